#include "iburd/styleloss.hpp"

#include <cblas.h>

#include <cmath>
#include <string>

#include "iburd/error.hpp"

namespace iburd {

namespace {

void require_batch_one(const Tensor4& t, const char* what) {
    if (t.n != 1) {
        throw InvalidArgument(std::string(what) + " expects batch size 1, got " + std::to_string(t.n));
    }
}

}  // namespace

void LossWeights::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    bool valid = ok(lambda) && ok(mu) && ok(nu) && ok(alpha);
    for (const double b : beta) {
        valid = valid && ok(b);
    }
    if (!valid) {
        throw InvalidArgument("loss weights must be finite and non-negative");
    }
}

GramMatrix gram(const Tensor4& feat) {
    require_batch_one(feat, "gram");
    GramMatrix g;
    g.n = feat.c;
    const int m = feat.h * feat.w;
    g.values.assign(static_cast<std::size_t>(g.n) * g.n, 0.0);
    if (g.n == 0 || m == 0) {
        return g;
    }
    cblas_dsyrk(CblasRowMajor, CblasUpper, CblasNoTrans, g.n, m, 1.0, feat.data.data(), m, 0.0, g.values.data(),
                g.n);
    for (int i = 0; i < g.n; ++i) {
        for (int k = 0; k < i; ++k) {
            g.values[static_cast<std::size_t>(i) * g.n + k] = g.values[static_cast<std::size_t>(k) * g.n + i];
        }
    }
    return g;
}

StyleGrams style_grams(const TapTensors& feats) {
    StyleGrams grams;
    for (int t = 0; t < kTapCount; ++t) {
        grams[static_cast<std::size_t>(t)] = gram(feats[static_cast<std::size_t>(t)]);
    }
    return grams;
}

TermWithFeatureGrad style_loss(const TapTensors& feats_r, const StyleGrams& grams_b,
                               const std::array<double, kTapCount>& beta) {
    TermWithFeatureGrad out;
    for (int t = 0; t < kTapCount; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const Tensor4& f = feats_r[ti];
        require_batch_one(f, "style_loss");
        const GramMatrix& gb = grams_b[ti];
        if (gb.n != f.c) {
            throw InvalidArgument(std::string("style_loss: tap ") + kTapNames[ti] + " has " + std::to_string(f.c) +
                                  " channels but the reference Gram matrix is " + std::to_string(gb.n) + "x" +
                                  std::to_string(gb.n));
        }
        const GramMatrix gr = gram(f);
        const int n = f.c;
        const int m = f.h * f.w;
        std::vector<double> diff(gr.values.size());
        double sq = 0.0;
        for (std::size_t i = 0; i < diff.size(); ++i) {
            diff[i] = gr.values[i] - gb.values[i];
            sq += diff[i] * diff[i];
        }
        const double n2 = static_cast<double>(n) * n;
        out.value += beta[ti] / (2.0 * n2) * sq;

        // d/dF ||F F^T - G_b||^2 = 4 (G_r - G_b) F for symmetric G.
        Tensor4 grad(1, n, f.h, f.w);
        if (n > 0 && m > 0 && beta[ti] != 0.0) {
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, n, m, n, 2.0 * beta[ti] / n2, diff.data(), n,
                        f.data.data(), m, 0.0, grad.data.data(), m);
        }
        out.grad[ti] = std::move(grad);
    }
    return out;
}

TermWithFeatureGrad style_loss(const TapTensors& feats_r, const TapTensors& feats_b,
                               const std::array<double, kTapCount>& beta) {
    for (int t = 0; t < kTapCount; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        if (!feats_r[ti].same_shape(feats_b[ti])) {
            throw InvalidArgument(std::string("style_loss: shape mismatch at tap ") + kTapNames[ti] + ": " +
                                  feats_r[ti].shape_string() + " vs " + feats_b[ti].shape_string());
        }
    }
    return style_loss(feats_r, style_grams(feats_b), beta);
}

TermWithTensorGrad content_loss(const Tensor4& feat_r, const Tensor4& feat_fp, double alpha) {
    if (!feat_r.same_shape(feat_fp)) {
        throw InvalidArgument("content_loss: shape mismatch " + feat_r.shape_string() + " vs " +
                              feat_fp.shape_string());
    }
    require_batch_one(feat_r, "content_loss");
    TermWithTensorGrad out;
    out.grad = Tensor4(feat_r.n, feat_r.c, feat_r.h, feat_r.w);
    const double nm = static_cast<double>(feat_r.c) * feat_r.h * feat_r.w;
    if (nm == 0.0) {
        return out;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < feat_r.size(); ++i) {
        const double d = feat_r.data[i] - feat_fp.data[i];
        sq += d * d;
        out.grad.data[i] = alpha / nm * d;
    }
    out.value = alpha / (2.0 * nm) * sq;
    return out;
}

TermWithImageGrad tv_loss(std::span<const double> planar, int height, int width, int channels) {
    const std::size_t hw = static_cast<std::size_t>(height) * width;
    if (planar.size() != hw * static_cast<std::size_t>(channels)) {
        throw InvalidArgument("tv_loss: sample count does not match dimensions");
    }
    TermWithImageGrad out;
    out.grad.assign(planar.size(), 0.0);
    auto sign = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    for (int c = 0; c < channels; ++c) {
        const double* p = planar.data() + static_cast<std::size_t>(c) * hw;
        double* g = out.grad.data() + static_cast<std::size_t>(c) * hw;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * width + x;
                if (y + 1 < height) {
                    const double d = p[i + width] - p[i];
                    out.value += std::abs(d);
                    g[i + width] += sign(d);
                    g[i] -= sign(d);
                }
                if (x + 1 < width) {
                    const double d = p[i + 1] - p[i];
                    out.value += std::abs(d);
                    g[i + 1] += sign(d);
                    g[i] -= sign(d);
                }
            }
        }
    }
    return out;
}

TermWithImageGrad tv_loss(const ImagePlane& img) {
    return tv_loss(img.samples(), img.height(), img.width(), img.channels());
}

StyleObjective::StyleObjective(const VggPrefix& net, const ImagePlane& background, const ImagePlane& first_pass,
                               LossWeights weights)
    : net_(&net), height_(first_pass.height()), width_(first_pass.width()), weights_(weights) {
    weights_.validate();
    if (background.height() != height_ || background.width() != width_) {
        throw InvalidArgument("background and first-pass images must have the same size");
    }
    if (background.channels() != 3 || first_pass.channels() != 3) {
        throw InvalidArgument("style objective expects RGB images");
    }
    background_grams_ = style_grams(forward_features(net, background).taps);
    first_pass_content_ = forward_features(net, first_pass).taps[static_cast<std::size_t>(Tap::relu2_2)];
}

LossBreakdown StyleObjective::evaluate(std::span<const double> planar, std::span<double> grad) const {
    const FeatureStack stack = forward_features(*net_, planar, height_, width_);
    const TermWithFeatureGrad style = style_loss(stack.taps, background_grams_, weights_.beta);
    const auto content_tap = static_cast<std::size_t>(Tap::relu2_2);
    const TermWithTensorGrad content = content_loss(stack.taps[content_tap], first_pass_content_, weights_.alpha);
    const TermWithImageGrad tv = tv_loss(planar, height_, width_, 3);

    LossBreakdown terms;
    terms.style = style.value;
    terms.content = content.value;
    terms.tv = tv.value;
    terms.total = weights_.lambda * style.value + weights_.mu * content.value + weights_.nu * tv.value;

    if (!grad.empty()) {
        if (grad.size() != planar.size()) {
            throw InvalidArgument("gradient buffer has the wrong size");
        }
        TapTensors tap_grads;
        for (int t = 0; t < kTapCount; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            if (weights_.lambda == 0.0 && !(ti == content_tap && weights_.mu != 0.0)) {
                continue;
            }
            Tensor4 g = style.grad[ti];
            for (double& v : g.data) {
                v *= weights_.lambda;
            }
            if (ti == content_tap) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g.data[i] += weights_.mu * content.grad.data[i];
                }
            }
            tap_grads[ti] = std::move(g);
        }
        const Tensor4 input_grad = backward_to_input(*net_, stack, tap_grads);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad[i] = input_grad.data[i] + weights_.nu * tv.grad[i];
        }
    }
    return terms;
}

TotalLoss total_loss(const ImagePlane& img, const ImagePlane& background, const ImagePlane& first_pass,
                     const LossWeights& weights, const VggPrefix& net) {
    if (img.height() != first_pass.height() || img.width() != first_pass.width() || img.channels() != 3) {
        throw InvalidArgument("total_loss: image, background and first-pass must share dimensions");
    }
    const StyleObjective objective(net, background, first_pass, weights);
    TotalLoss out;
    out.grad.assign(img.size(), 0.0);
    out.terms = objective.evaluate(img.samples(), out.grad);
    return out;
}

SecondPassResult second_pass(const ImagePlane& first_pass, const ImagePlane& background, double lambda,
                             std::size_t iterations, const VggPrefix& net, const LossWeights& base_weights,
                             std::size_t history) {
    LossWeights weights = base_weights;
    weights.lambda = lambda;
    const StyleObjective objective(net, background, first_pass, weights);

    SecondPassResult result;
    bool have_initial = false;
    const Objective fn = [&](std::span<const double> x, std::span<double> g) {
        const LossBreakdown terms = objective.evaluate(x, g);
        if (!have_initial) {
            // The optimizer's first evaluation is at the (already in-bounds) start point.
            result.initial = terms;
            have_initial = true;
        }
        return terms.total;
    };

    LbfgsOptions options;
    options.iterations = iterations;
    options.history = history;
    options.bounds = Bounds{0.0, 1.0};
    result.trace = lbfgs_optimize(fn, first_pass.samples(), options);
    result.image = ImagePlane::from_planar(first_pass.height(), first_pass.width(), 3, std::move(result.trace.x));
    result.trace.x.clear();

    if (!have_initial) {
        result.initial = objective.evaluate(first_pass.samples(), {});
    }
    result.final = iterations == 0 ? result.initial : objective.evaluate(result.image.samples(), {});
    return result;
}

}  // namespace iburd
