#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "iburd/imgcore.hpp"

namespace iburd {

enum class GradientMode {
    source,  ///< guidance is the source patch's own gradient
    mixed,   ///< per pixel and axis, the stronger of source and target gradient
};

GradientMode parse_gradient_mode(std::string_view name);
std::string_view to_string(GradientMode mode);

/// Desired forward differences per channel, planar like ImagePlane.
/// gx(c,y,x) targets f(y,x+1) - f(y,x); gy(c,y,x) targets f(y+1,x) - f(y,x).
/// Differences that would leave the raster are stored as 0.
struct GuidanceField {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> gx;
    std::vector<double> gy;

    std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * height + y) * width + x;
    }
};

GuidanceField guidance_field(const ImagePlane& source, const ImagePlane& target, const BinaryMask& mask,
                             GradientMode mode);

/// Matrix-free symmetric operator. `diagonal` is used as a Jacobi
/// preconditioner when non-empty.
struct LinearOperator {
    std::size_t size = 0;
    std::function<void(std::span<const double> x, std::span<double> out)> apply;
    std::vector<double> diagonal;
};

struct CgResult {
    std::vector<double> x;
    /// Relative residual ||b - Ax|| / ||b|| before the first and after every iteration.
    std::vector<double> residual_history;
    std::size_t iterations = 0;
};

/// Jacobi-preconditioned conjugate gradients. Stops once
/// ||r|| <= tol * min(1, ||b||); throws ConvergenceError when that is not
/// reached within `max_iter` iterations. The history holds ||r|| / ||b||.
CgResult cg_solve(const LinearOperator& op, std::span<const double> b, std::span<const double> x0, double tol,
                  std::size_t max_iter);

/// 10 * sqrt(unknowns) + 1000.
std::size_t default_max_iterations(std::size_t unknowns);

/// Interior pixels of a mask in row-major order plus a raster-sized lookup
/// (-1 for pixels outside the region).
struct InteriorIndex {
    int height = 0;
    int width = 0;
    std::vector<int> pixels;  // y * width + x
    std::vector<long> lookup;
};

InteriorIndex index_interior(const BinaryMask& mask);

/// 5-point Laplacian (4 on the diagonal, -1 per interior neighbour) over the
/// interior unknowns; boundary neighbours are folded into the right-hand side.
LinearOperator laplacian_operator(const InteriorIndex& interior);

struct PoissonOptions {
    double tol = 1e-6;
    std::size_t max_iter = 0;  ///< 0 selects default_max_iterations
};

/// Solves lap(f) = div(g) on the mask interior with f = target on its
/// boundary, each channel independently; pixels outside the mask are copied
/// from the target. The interior may not touch the raster border.
ImagePlane solve_poisson(const ImagePlane& target, const BinaryMask& mask, const GuidanceField& guidance,
                         const PoissonOptions& options = {});

struct PixelOffset {
    int x = 0;
    int y = 0;
    bool operator==(const PixelOffset&) const = default;
};

/// Gradient-domain paste of `source_patch` with its top-left corner at
/// `offset`. Only the patch's neighbourhood is solved; the rest of `target` is
/// returned untouched. The patch must lie inside the target; mask pixels on
/// the target's outer border are treated as boundary. Guidance on edges that
/// cross the patch outline comes from the target.
ImagePlane seamless_clone(const ImagePlane& source_patch, const BinaryMask& patch_mask, const ImagePlane& target,
                          PixelOffset offset, GradientMode mode, const PoissonOptions& options = {});

}  // namespace iburd
