#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iburd/imgcore.hpp"

namespace iburd {

/// Returns f(x) and writes the gradient into `grad` (same length as x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct Bounds {
    double lower;
    double upper;
};

struct LbfgsOptions {
    std::size_t iterations = 100;
    std::size_t history = 10;
    double armijo_c1 = 1e-4;
    int max_backtracks = 20;
    double gradient_tolerance = 1e-8;
    /// Box constraint; iterates are projected onto it after every step.
    std::optional<Bounds> bounds;
};

struct LbfgsResult {
    std::vector<double> x;
    /// Objective at the start point followed by the value after each accepted step.
    std::vector<double> accepted_values;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    /// "iterations", "gradient" or "line_search".
    std::string stop_reason;
};

/**
 * Limited-memory BFGS with the two-loop recursion and a backtracking Armijo
 * line search (step halving). With bounds, trial points are projected onto
 * the box and sufficient decrease is measured along the projected step, so
 * accepted steps strictly decrease the objective.
 *
 * Throws ConvergenceError if the objective or its gradient is not finite.
 */
LbfgsResult lbfgs_optimize(const Objective& objective, std::span<const double> init, const LbfgsOptions& options);

/// Image form: optimizes over [0,1]-bounded samples and returns the final iterate.
ImagePlane lbfgs_optimize(const Objective& objective, const ImagePlane& init, std::size_t iterations,
                          std::size_t history = 10);

}  // namespace iburd
