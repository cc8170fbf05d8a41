#include "iburd/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
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

struct Pair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
};

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

LbfgsResult lbfgs_optimize(const Objective& objective, std::span<const double> init, const LbfgsOptions& options) {
    if (options.history < 1) {
        throw InvalidArgument("L-BFGS history must be at least 1");
    }
    const std::size_t n = init.size();
    LbfgsResult result;
    result.x.assign(init.begin(), init.end());
    if (options.iterations == 0) {
        result.stop_reason = "iterations";
        return result;
    }

    auto project = [&](std::vector<double>& v) {
        if (options.bounds) {
            for (double& e : v) {
                e = std::clamp(e, options.bounds->lower, options.bounds->upper);
            }
        }
    };
    auto evaluate = [&](std::span<const double> x, std::span<double> g, std::size_t iteration) {
        const double f = objective(x, g);
        ++result.evaluations;
        if (!std::isfinite(f) || !all_finite(g)) {
            throw ConvergenceError("L-BFGS: objective or gradient is not finite at iteration " +
                                       std::to_string(iteration),
                                   iteration, f);
        }
        return f;
    };
    // Gradient with components that push against an active bound removed.
    auto projected_gradient = [&](const std::vector<double>& x, const std::vector<double>& g) {
        std::vector<double> pg = g;
        if (options.bounds) {
            for (std::size_t i = 0; i < n; ++i) {
                if ((x[i] <= options.bounds->lower && g[i] > 0.0) || (x[i] >= options.bounds->upper && g[i] < 0.0)) {
                    pg[i] = 0.0;
                }
            }
        }
        return pg;
    };

    project(result.x);
    std::vector<double> g(n);
    double f = evaluate(result.x, g, 0);
    result.accepted_values.push_back(f);

    std::deque<Pair> memory;
    std::vector<double> d(n);
    std::vector<double> x_trial(n);
    std::vector<double> g_trial(n);
    std::vector<double> step(n);
    std::vector<double> alpha(options.history);

    for (std::size_t iter = 1; iter <= options.iterations; ++iter) {
        std::vector<double> pg = projected_gradient(result.x, g);
        const double pg_norm = std::sqrt(dot(pg, pg));
        if (pg_norm < options.gradient_tolerance) {
            result.stop_reason = "gradient";
            return result;
        }

        bool retried = false;
        while (true) {
            // Two-loop recursion on the projected gradient.
            std::vector<double> q = pg;
            for (std::size_t i = memory.size(); i-- > 0;) {
                alpha[i] = memory[i].rho * dot(memory[i].s, q);
                for (std::size_t j = 0; j < n; ++j) {
                    q[j] -= alpha[i] * memory[i].y[j];
                }
            }
            double gamma = 1.0;
            if (!memory.empty()) {
                const Pair& last = memory.back();
                gamma = dot(last.s, last.y) / dot(last.y, last.y);
            }
            for (std::size_t j = 0; j < n; ++j) {
                q[j] *= gamma;
            }
            for (std::size_t i = 0; i < memory.size(); ++i) {
                const double beta = memory[i].rho * dot(memory[i].y, q);
                for (std::size_t j = 0; j < n; ++j) {
                    q[j] += memory[i].s[j] * (alpha[i] - beta);
                }
            }
            for (std::size_t j = 0; j < n; ++j) {
                d[j] = pg[j] == 0.0 && g[j] != pg[j] ? 0.0 : -q[j];
            }
            if (dot(d, pg) >= 0.0) {
                memory.clear();
                for (std::size_t j = 0; j < n; ++j) {
                    d[j] = -pg[j];
                }
            }

            double t = memory.empty() ? std::min(1.0, 1.0 / pg_norm) : 1.0;
            bool accepted = false;
            double f_trial = f;
            for (int b = 0; b <= options.max_backtracks; ++b) {
                for (std::size_t j = 0; j < n; ++j) {
                    x_trial[j] = result.x[j] + t * d[j];
                }
                project(x_trial);
                for (std::size_t j = 0; j < n; ++j) {
                    step[j] = x_trial[j] - result.x[j];
                }
                const double decrease = dot(g, step);
                if (decrease < 0.0) {
                    f_trial = evaluate(x_trial, g_trial, iter);
                    if (f_trial <= f + options.armijo_c1 * decrease) {
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }

            if (accepted) {
                std::vector<double> y(n);
                for (std::size_t j = 0; j < n; ++j) {
                    y[j] = g_trial[j] - g[j];
                }
                const double sy = dot(step, y);
                if (sy > 1e-10 * std::sqrt(dot(step, step) * dot(y, y))) {
                    memory.push_back({step, std::move(y), 1.0 / sy});
                    if (memory.size() > options.history) {
                        memory.pop_front();
                    }
                }
                result.x.swap(x_trial);
                g.swap(g_trial);
                f = f_trial;
                result.accepted_values.push_back(f);
                result.iterations = iter;
                break;
            }
            if (memory.empty() || retried) {
                result.stop_reason = "line_search";
                return result;
            }
            // Stale curvature pairs: fall back to steepest descent once.
            memory.clear();
            retried = true;
        }
    }
    result.stop_reason = "iterations";
    return result;
}

ImagePlane lbfgs_optimize(const Objective& objective, const ImagePlane& init, std::size_t iterations,
                          std::size_t history) {
    LbfgsOptions options;
    options.iterations = iterations;
    options.history = history;
    options.bounds = Bounds{0.0, 1.0};
    LbfgsResult r = lbfgs_optimize(objective, init.samples(), options);
    return ImagePlane::from_planar(init.height(), init.width(), init.channels(), std::move(r.x));
}

}  // namespace iburd
