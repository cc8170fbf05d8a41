#include "iburd/placement.hpp"

#include <algorithm>
#include <string>

#include "iburd/error.hpp"

namespace iburd {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int Rng::uniform_int(int lo, int hi) {
    if (lo > hi) {
        throw InvalidArgument("uniform_int: empty range");
    }
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
}

std::size_t Rng::pick(std::size_t n) {
    if (n == 0) {
        throw InvalidArgument("pick: empty set");
    }
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

std::size_t GridSpec::free_cells() const {
    return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), false));
}

GridSpec make_grid(int canvas_w, int canvas_h, int rows, int cols) {
    if (rows < 1 || cols < 1 || canvas_w < cols || canvas_h < rows) {
        throw InvalidArgument("grid does not fit the canvas");
    }
    GridSpec g;
    g.rows = rows;
    g.cols = cols;
    for (int r = 0; r < rows; ++r) {
        const int y0 = r * canvas_h / rows;
        const int y1 = (r + 1) * canvas_h / rows;
        for (int c = 0; c < cols; ++c) {
            const int x0 = c * canvas_w / cols;
            const int x1 = (c + 1) * canvas_w / cols;
            g.cells.push_back({x0, y0, x1 - x0, y1 - y0});
        }
    }
    g.occupied.assign(g.cells.size(), false);
    return g;
}

int cell_margin(const Rect& cell, int scale) {
    const int room = std::min(cell.w, cell.h) - scale;
    if (room < 0) {
        throw InvalidArgument("patch side " + std::to_string(scale) + " exceeds grid cell " + std::to_string(cell.w) +
                              "x" + std::to_string(cell.h));
    }
    return room >= 2 ? 1 : 0;
}

GridSpec grid_for(int canvas_w, int canvas_h, int scale, int n_objects) {
    if (n_objects < 1 || n_objects > 4) {
        throw InvalidArgument("object count must be in 1..4, got " + std::to_string(n_objects));
    }
    if (scale < 1) {
        throw InvalidArgument("patch side must be positive");
    }
    const bool fine = n_objects == 1 && scale <= std::min(canvas_w, canvas_h) / 4;
    GridSpec g = fine ? make_grid(canvas_w, canvas_h, 4, 4) : make_grid(canvas_w, canvas_h, 2, 2);
    for (const Rect& cell : g.cells) {
        cell_margin(cell, scale);
    }
    return g;
}

CellPlacement sample_placement(Rng& rng, GridSpec& grid, int scale) {
    std::vector<int> free;
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        if (!grid.occupied[i]) {
            free.push_back(static_cast<int>(i));
        }
    }
    if (free.empty()) {
        throw InvalidArgument("all grid cells are occupied");
    }
    CellPlacement p;
    p.cell = free[rng.pick(free.size())];
    const Rect& cell = grid.cells[static_cast<std::size_t>(p.cell)];
    const int m = cell_margin(cell, scale);
    p.offset.x = rng.uniform_int(cell.x + m, cell.x + cell.w - m - scale);
    p.offset.y = rng.uniform_int(cell.y + m, cell.y + cell.h - m - scale);
    grid.occupied[static_cast<std::size_t>(p.cell)] = true;
    return p;
}

void PlacementConfig::validate() const {
    if (canvas_w < 64 || canvas_h < 64) {
        throw InvalidArgument("canvas must be at least 64x64");
    }
    if (scale_set.empty() || rotation_set.empty()) {
        throw InvalidArgument("scale and rotation sets must be non-empty");
    }
    for (const int s : scale_set) {
        if (s < 1 || s > std::min(canvas_w, canvas_h) / 2) {
            throw InvalidArgument("scale " + std::to_string(s) + " does not fit a 2x2 cell of the canvas");
        }
    }
    for (const int r : rotation_set) {
        if (r < 0 || r >= 360 || r % 90 != 0) {
            throw InvalidArgument("rotation " + std::to_string(r) + " is not a quarter turn in [0,360)");
        }
    }
}

std::vector<BlendJob> sample_scenario(Rng& rng, const PlacementConfig& config, std::size_t source_count,
                                      int background, int object_count) {
    config.validate();
    if (source_count == 0) {
        throw InvalidArgument("no source patches to place");
    }
    if (object_count < 1 || object_count > 4) {
        throw InvalidArgument("object count must be in 1..4, got " + std::to_string(object_count));
    }
    std::vector<BlendJob> jobs;
    GridSpec grid;
    for (int i = 0; i < object_count; ++i) {
        BlendJob job;
        job.background = background;
        job.mode = config.mode;
        job.source = static_cast<int>(rng.pick(source_count));
        job.scale = config.scale_set[rng.pick(config.scale_set.size())];
        job.rot_k = config.rotation_set[rng.pick(config.rotation_set.size())] / 90;
        if (i == 0) {
            // A 2x2 grid holds every configured scale, so only the single-object
            // case depends on the drawn scale.
            grid = grid_for(config.canvas_w, config.canvas_h, job.scale, object_count);
        }
        const CellPlacement p = sample_placement(rng, grid, job.scale);
        job.cell = p.cell;
        job.offset = p.offset;
        jobs.push_back(job);
    }
    return jobs;
}

Letterboxed letterbox(const ImagePlane& img, const BinaryMask& mask) {
    if (mask.height() != img.height() || mask.width() != img.width()) {
        throw InvalidArgument("source mask size does not match its image");
    }
    const int side = std::max(img.height(), img.width());
    Letterboxed out;
    out.pad_x = (side - img.width()) / 2;
    out.pad_y = (side - img.height()) / 2;
    if (out.pad_x == 0 && out.pad_y == 0) {
        out.image = img;
        out.mask = mask;
        return out;
    }
    out.image = ImagePlane(side, side, img.channels());
    out.mask = BinaryMask(side, side);
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < side; ++y) {
            const int sy = std::clamp(y - out.pad_y, 0, img.height() - 1);
            for (int x = 0; x < side; ++x) {
                const int sx = std::clamp(x - out.pad_x, 0, img.width() - 1);
                out.image.at(c, y, x) = img.at(c, sy, sx);
            }
        }
    }
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            out.mask.set(y + out.pad_y, x + out.pad_x, mask.at(y, x));
        }
    }
    return out;
}

PreparedPatch prepare_patch(const ImagePlane& img, const BinaryMask& mask, const Annotation& ann, int scale,
                            int rot_k) {
    if (scale < 1) {
        throw InvalidArgument("patch side must be positive");
    }
    PreparedPatch out = prepare_patch(img, mask, scale, rot_k);
    const Letterboxed boxed = letterbox(img, mask);
    const FrameSize src{static_cast<double>(img.width()), static_cast<double>(img.height())};
    const double side = boxed.image.width();
    const Annotation boxed_ann =
        transform_annotation(ann, src, src, 0, {static_cast<double>(boxed.pad_x), static_cast<double>(boxed.pad_y)});
    const FrameSize target{static_cast<double>(scale), static_cast<double>(scale)};
    out.annotation = transform_annotation(boxed_ann, {side, side}, target, rot_k, {0.0, 0.0});
    return out;
}

PreparedPatch prepare_patch(const ImagePlane& img, const BinaryMask& mask, int scale, int rot_k) {
    if (scale < 1) {
        throw InvalidArgument("patch side must be positive");
    }
    const Letterboxed boxed = letterbox(img, mask);
    PreparedPatch out;
    out.image = rotate_quarter(resize_bilinear(to_rgb(boxed.image), scale, scale), rot_k);
    out.mask = rotate_quarter(resize_mask(boxed.mask, scale, scale), rot_k);
    return out;
}

}  // namespace iburd
