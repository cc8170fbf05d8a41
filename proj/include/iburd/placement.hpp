#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "iburd/annotate.hpp"
#include "iburd/imgcore.hpp"
#include "iburd/poisson.hpp"

namespace iburd {

/// Mixes a 64-bit value into a well-distributed one (splitmix64 finalizer).
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for scenario `index` of a run with master seed `master`.
inline std::uint64_t scenario_seed(std::uint64_t master, std::uint64_t index) { return splitmix64(master + index); }

/// The only random source of the placement module. Draws are made through
/// explicit helpers so the sequence is fixed by the call order alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi);
    /// Uniform index in [0, n).
    std::size_t pick(std::size_t n);

private:
    std::mt19937_64 engine_;
};

struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool operator==(const Rect&) const = default;
};

struct GridSpec {
    int rows = 0;
    int cols = 0;
    std::vector<Rect> cells;  ///< row-major
    std::vector<bool> occupied;

    std::size_t free_cells() const;
};

/// Picks the grid: two or more objects share a 2x2 grid; a single object uses
/// a 4x4 grid when its side is at most a quarter of the canvas, else 2x2.
/// Throws InvalidArgument when the patch cannot fit a cell.
GridSpec grid_for(int canvas_w, int canvas_h, int scale, int n_objects);

/// Grid with `rows` x `cols` cells tiling the canvas (cell edges at
/// floor(i * extent / count)).
GridSpec make_grid(int canvas_w, int canvas_h, int rows, int cols);

/// Gap kept between a patch and its cell edges: 1 pixel when the cell has room
/// for it, otherwise 0 (patch exactly as large as the cell).
int cell_margin(const Rect& cell, int scale);

struct CellPlacement {
    int cell = 0;
    PixelOffset offset;
};

/// Uniform free cell, then a uniform top-left offset inside it. Marks the cell
/// occupied.
CellPlacement sample_placement(Rng& rng, GridSpec& grid, int scale);

struct BlendJob {
    int source = 0;
    int background = 0;
    int scale = 0;
    int rot_k = 0;
    int cell = 0;
    PixelOffset offset;
    GradientMode mode = GradientMode::mixed;

    bool operator==(const BlendJob&) const = default;
};

struct PlacementConfig {
    int canvas_w = 512;
    int canvas_h = 512;
    std::vector<int> scale_set = {96, 128, 192, 256};
    std::vector<int> rotation_set = {0, 90, 180, 270};  ///< degrees, multiples of 90
    GradientMode mode = GradientMode::mixed;

    void validate() const;
};

/// Draws `object_count` jobs. Per object the draw order is: source, scale,
/// rotation, cell, offset.
std::vector<BlendJob> sample_scenario(Rng& rng, const PlacementConfig& config, std::size_t source_count,
                                      int background, int object_count);

/// A source fitted into a square with edge-replicated padding; the mask is
/// padded with unset pixels.
struct Letterboxed {
    ImagePlane image;
    BinaryMask mask;
    int pad_x = 0;
    int pad_y = 0;
};
Letterboxed letterbox(const ImagePlane& img, const BinaryMask& mask);

/// Source patch after letterbox, resize to `scale` and rotation. The
/// annotation is expressed in the patch frame.
struct PreparedPatch {
    ImagePlane image;
    BinaryMask mask;
    Annotation annotation;
};
PreparedPatch prepare_patch(const ImagePlane& img, const BinaryMask& mask, const Annotation& ann, int scale,
                            int rot_k);
/// Same geometry without an annotation (the returned annotation is empty).
PreparedPatch prepare_patch(const ImagePlane& img, const BinaryMask& mask, int scale, int rot_k);

}  // namespace iburd
