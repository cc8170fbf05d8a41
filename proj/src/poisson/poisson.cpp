#include "iburd/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "iburd/error.hpp"

namespace iburd {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void require_same_dims(const ImagePlane& a, const ImagePlane& b, const BinaryMask& m) {
    if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels() ||
        m.height() != a.height() || m.width() != a.width()) {
        throw InvalidArgument("source, target and mask must share dimensions");
    }
}

}  // namespace

GradientMode parse_gradient_mode(std::string_view name) {
    if (name == "source" || name == "source_gradients") {
        return GradientMode::source;
    }
    if (name == "mixed" || name == "mixed_gradients") {
        return GradientMode::mixed;
    }
    throw InvalidArgument("unknown gradient mode '" + std::string(name) + "' (expected source or mixed)");
}

std::string_view to_string(GradientMode mode) {
    return mode == GradientMode::source ? "source" : "mixed";
}

GuidanceField guidance_field(const ImagePlane& source, const ImagePlane& target, const BinaryMask& mask,
                             GradientMode mode) {
    require_same_dims(source, target, mask);
    GuidanceField g;
    g.height = source.height();
    g.width = source.width();
    g.channels = source.channels();
    g.gx.assign(source.size(), 0.0);
    g.gy.assign(source.size(), 0.0);

    auto pick = [mode](double s, double t) {
        if (mode == GradientMode::source) {
            return s;
        }
        return std::abs(t) > std::abs(s) ? t : s;
    };

    for (int c = 0; c < g.channels; ++c) {
        for (int y = 0; y < g.height; ++y) {
            for (int x = 0; x < g.width; ++x) {
                const std::size_t i = g.index(c, y, x);
                if (x + 1 < g.width) {
                    g.gx[i] = pick(source.at(c, y, x + 1) - source.at(c, y, x),
                                   target.at(c, y, x + 1) - target.at(c, y, x));
                }
                if (y + 1 < g.height) {
                    g.gy[i] = pick(source.at(c, y + 1, x) - source.at(c, y, x),
                                   target.at(c, y + 1, x) - target.at(c, y, x));
                }
            }
        }
    }
    return g;
}

std::size_t default_max_iterations(std::size_t unknowns) {
    return static_cast<std::size_t>(10.0 * std::sqrt(static_cast<double>(unknowns))) + 1000;
}

CgResult cg_solve(const LinearOperator& op, std::span<const double> b, std::span<const double> x0, double tol,
                  std::size_t max_iter) {
    const std::size_t n = op.size;
    if (b.size() != n || x0.size() != n) {
        throw InvalidArgument("cg_solve: vector sizes do not match the operator");
    }
    if (!(tol > 0.0)) {
        throw InvalidArgument("cg_solve: tolerance must be positive");
    }
    if (!op.diagonal.empty() && op.diagonal.size() != n) {
        throw InvalidArgument("cg_solve: preconditioner diagonal has the wrong size");
    }

    CgResult result;
    const double b_norm = norm(b);
    if (b_norm == 0.0) {
        result.x.assign(n, 0.0);
        result.residual_history.push_back(0.0);
        return result;
    }

    // Relative test for small right-hand sides, absolute once ||b|| > 1, so the
    // solution error stays near tol for large patches too.
    const double threshold = tol * std::min(1.0, 1.0 / b_norm);
    result.x.assign(x0.begin(), x0.end());
    std::vector<double> r(n);
    std::vector<double> z(n);
    std::vector<double> p(n);
    std::vector<double> ap(n);

    op.apply(result.x, ap);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = b[i] - ap[i];
    }
    auto precondition = [&] {
        if (op.diagonal.empty()) {
            z = r;
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                z[i] = r[i] / op.diagonal[i];
            }
        }
    };

    double rel = norm(r) / b_norm;
    result.residual_history.push_back(rel);
    if (rel <= threshold) {
        return result;
    }
    precondition();
    p = z;
    double rz = dot(r, z);

    for (std::size_t k = 0; k < max_iter; ++k) {
        op.apply(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) {
            throw ConvergenceError("cg_solve: operator is not positive definite along the search direction",
                                   result.iterations, rel);
        }
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) {
            result.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        ++result.iterations;
        rel = norm(r) / b_norm;
        result.residual_history.push_back(rel);
        if (rel <= threshold) {
            return result;
        }
        precondition();
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = z[i] + beta * p[i];
        }
    }
    throw ConvergenceError("cg_solve: no convergence after " + std::to_string(result.iterations) +
                               " iterations (history length " + std::to_string(result.residual_history.size()) +
                               ", final relative residual " + std::to_string(rel) + ")",
                           result.iterations, rel);
}

InteriorIndex index_interior(const BinaryMask& mask) {
    InteriorIndex idx;
    idx.height = mask.height();
    idx.width = mask.width();
    idx.lookup.assign(static_cast<std::size_t>(idx.height) * idx.width, -1);
    for (int y = 0; y < idx.height; ++y) {
        for (int x = 0; x < idx.width; ++x) {
            if (mask.at(y, x)) {
                const int p = y * idx.width + x;
                idx.lookup[static_cast<std::size_t>(p)] = static_cast<long>(idx.pixels.size());
                idx.pixels.push_back(p);
            }
        }
    }
    return idx;
}

LinearOperator laplacian_operator(const InteriorIndex& interior) {
    LinearOperator op;
    op.size = interior.pixels.size();
    op.diagonal.assign(op.size, 4.0);
    // Neighbour lists are precomputed once; apply() runs many times per solve.
    const int w = interior.width;
    const int h = interior.height;
    std::vector<long> neighbours(op.size * 4, -1);
    for (std::size_t i = 0; i < op.size; ++i) {
        const int p = interior.pixels[i];
        const int y = p / w;
        const int x = p % w;
        const int ny[4] = {y, y, y - 1, y + 1};
        const int nx[4] = {x - 1, x + 1, x, x};
        for (int k = 0; k < 4; ++k) {
            if (ny[k] >= 0 && ny[k] < h && nx[k] >= 0 && nx[k] < w) {
                neighbours[i * 4 + k] = interior.lookup[static_cast<std::size_t>(ny[k]) * w + nx[k]];
            }
        }
    }
    op.apply = [neighbours = std::move(neighbours)](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double v = 4.0 * x[i];
            for (int k = 0; k < 4; ++k) {
                const long j = neighbours[i * 4 + k];
                if (j >= 0) {
                    v -= x[static_cast<std::size_t>(j)];
                }
            }
            out[i] = v;
        }
    };
    return op;
}

ImagePlane solve_poisson(const ImagePlane& target, const BinaryMask& mask, const GuidanceField& guidance,
                         const PoissonOptions& options) {
    if (mask.height() != target.height() || mask.width() != target.width() ||
        guidance.height != target.height() || guidance.width != target.width() ||
        guidance.channels != target.channels()) {
        throw InvalidArgument("solve_poisson: target, mask and guidance must share dimensions");
    }
    if (!(options.tol > 0.0)) {
        throw InvalidArgument("solve_poisson: tolerance must be positive");
    }
    const int h = target.height();
    const int w = target.width();
    const InteriorIndex interior = index_interior(mask);
    if (interior.pixels.empty()) {
        return target;
    }
    for (const int p : interior.pixels) {
        const int y = p / w;
        const int x = p % w;
        if (y == 0 || x == 0 || y == h - 1 || x == w - 1) {
            throw InvalidArgument("solve_poisson: mask interior touches the raster border at (" +
                                  std::to_string(x) + ", " + std::to_string(y) + ")");
        }
    }

    const LinearOperator op = laplacian_operator(interior);
    const std::size_t n = op.size;
    const std::size_t max_iter = options.max_iter > 0 ? options.max_iter : default_max_iterations(n);

    ImagePlane out = target;
    std::vector<double> b(n);
    std::vector<double> x0(n);
    for (int c = 0; c < target.channels(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const int p = interior.pixels[i];
            const int y = p / w;
            const int x = p % w;
            const double div = guidance.gx[guidance.index(c, y, x)] - guidance.gx[guidance.index(c, y, x - 1)] +
                               guidance.gy[guidance.index(c, y, x)] - guidance.gy[guidance.index(c, y - 1, x)];
            double rhs = -div;
            const int ny[4] = {y, y, y - 1, y + 1};
            const int nx[4] = {x - 1, x + 1, x, x};
            for (int k = 0; k < 4; ++k) {
                if (!mask.at(ny[k], nx[k])) {
                    rhs += target.at(c, ny[k], nx[k]);
                }
            }
            b[i] = rhs;
            x0[i] = target.at(c, y, x);
        }
        const CgResult solved = cg_solve(op, b, x0, options.tol, max_iter);
        for (std::size_t i = 0; i < n; ++i) {
            const int p = interior.pixels[i];
            out.at(c, p / w, p % w) = solved.x[i];
        }
    }
    out.clamp();
    return out;
}

ImagePlane seamless_clone(const ImagePlane& source_patch, const BinaryMask& patch_mask, const ImagePlane& target,
                          PixelOffset offset, GradientMode mode, const PoissonOptions& options) {
    const int pw = source_patch.width();
    const int ph = source_patch.height();
    if (patch_mask.width() != pw || patch_mask.height() != ph) {
        throw InvalidArgument("seamless_clone: patch mask does not match the patch");
    }
    if (source_patch.channels() != target.channels()) {
        throw InvalidArgument("seamless_clone: patch and target channel counts differ");
    }
    if (offset.x < 0 || offset.y < 0 || offset.x + pw > target.width() || offset.y + ph > target.height()) {
        throw InvalidArgument("seamless_clone: patch at (" + std::to_string(offset.x) + ", " +
                              std::to_string(offset.y) + ") with size " + std::to_string(pw) + "x" +
                              std::to_string(ph) + " does not fit inside the " + std::to_string(target.width()) +
                              "x" + std::to_string(target.height()) + " target");
    }

    // Working region: the patch plus a one-pixel ring, clipped to the target.
    const int x0 = std::max(offset.x - 1, 0);
    const int y0 = std::max(offset.y - 1, 0);
    const int x1 = std::min(offset.x + pw + 1, target.width());
    const int y1 = std::min(offset.y + ph + 1, target.height());
    const int rw = x1 - x0;
    const int rh = y1 - y0;

    const int ch = target.channels();
    ImagePlane region_target(rh, rw, ch);
    ImagePlane region_source(rh, rw, ch);
    BinaryMask region_mask(rh, rw);
    for (int y = 0; y < rh; ++y) {
        for (int x = 0; x < rw; ++x) {
            const int ty = y0 + y;
            const int tx = x0 + x;
            const int sy = std::clamp(ty - offset.y, 0, ph - 1);
            const int sx = std::clamp(tx - offset.x, 0, pw - 1);
            for (int c = 0; c < ch; ++c) {
                region_target.at(c, y, x) = target.at(c, ty, tx);
                region_source.at(c, y, x) = source_patch.at(c, sy, sx);
            }
            const bool in_patch = ty >= offset.y && ty < offset.y + ph && tx >= offset.x && tx < offset.x + pw;
            const bool on_raster_border =
                ty == 0 || tx == 0 || ty == target.height() - 1 || tx == target.width() - 1;
            region_mask.set(y, x, in_patch && !on_raster_border && patch_mask.at(ty - offset.y, tx - offset.x));
        }
    }
    if (!region_mask.any()) {
        return target;
    }

    GuidanceField g = guidance_field(region_source, region_target, region_mask, mode);
    // Edges that leave the patch have no source gradient; they follow the target.
    const int px0 = offset.x - x0;
    const int py0 = offset.y - y0;
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < rh; ++y) {
            for (int x = 0; x < rw; ++x) {
                const std::size_t i = g.index(c, y, x);
                const bool row_in = y >= py0 && y < py0 + ph;
                const bool col_in = x >= px0 && x < px0 + pw;
                if (row_in && (x == px0 - 1 || x == px0 + pw - 1) && x + 1 < rw) {
                    g.gx[i] = region_target.at(c, y, x + 1) - region_target.at(c, y, x);
                }
                if (col_in && (y == py0 - 1 || y == py0 + ph - 1) && y + 1 < rh) {
                    g.gy[i] = region_target.at(c, y + 1, x) - region_target.at(c, y, x);
                }
            }
        }
    }
    const ImagePlane solved = solve_poisson(region_target, region_mask, g, options);

    ImagePlane out = target;
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < rh; ++y) {
            for (int x = 0; x < rw; ++x) {
                out.at(c, y0 + y, x0 + x) = solved.at(c, y, x);
            }
        }
    }
    return out;
}

}  // namespace iburd
