#pragma once

#include <array>
#include <span>
#include <vector>

#include "iburd/imgcore.hpp"
#include "iburd/lbfgs.hpp"
#include "iburd/tensor.hpp"
#include "iburd/vgg.hpp"

namespace iburd {

/// Channel-correlation matrix G = F F^T of one feature map (N x N, row-major).
struct GramMatrix {
    int n = 0;
    std::vector<double> values;

    double at(int i, int k) const { return values[static_cast<std::size_t>(i) * n + k]; }
};

/// Unnormalized Gram matrix of a batch-1 feature tensor.
GramMatrix gram(const Tensor4& feat);

using StyleGrams = std::array<GramMatrix, kTapCount>;
StyleGrams style_grams(const TapTensors& feats);

struct LossWeights {
    double lambda = 0.0;  ///< style weight, chosen per background
    double mu = 1.0;      ///< content weight
    double nu = 1e-6;     ///< total-variation weight
    std::array<double, kTapCount> beta = {1.0, 1.0, 1.0, 1.0};
    double alpha = 1.0;  ///< content-layer weight

    void validate() const;
};

struct TermWithFeatureGrad {
    double value = 0.0;
    TapTensors grad;  ///< empty tensors for taps the term does not touch
};

/// sum_l beta_l / (2 N_l^2) * ||G_l[r] - G_l[b]||_F^2 and its gradient with
/// respect to each reconstructed tap.
TermWithFeatureGrad style_loss(const TapTensors& feats_r, const StyleGrams& grams_b,
                               const std::array<double, kTapCount>& beta);
TermWithFeatureGrad style_loss(const TapTensors& feats_r, const TapTensors& feats_b,
                               const std::array<double, kTapCount>& beta);

struct TermWithTensorGrad {
    double value = 0.0;
    Tensor4 grad;
};

/// alpha / (2 N M) * ||F_r - F_fp||^2; gradient alpha / (N M) * (F_r - F_fp).
TermWithTensorGrad content_loss(const Tensor4& feat_r, const Tensor4& feat_fp, double alpha);

struct TermWithImageGrad {
    double value = 0.0;
    std::vector<double> grad;  ///< planar, same layout as ImagePlane
};

/// Anisotropic total variation summed over channels; subgradient 0 where a
/// neighbour difference is exactly 0.
TermWithImageGrad tv_loss(std::span<const double> planar, int height, int width, int channels);
TermWithImageGrad tv_loss(const ImagePlane& img);

struct LossBreakdown {
    double total = 0.0;
    double style = 0.0;    ///< unweighted
    double content = 0.0;  ///< unweighted
    double tv = 0.0;       ///< unweighted
};

/**
 * lambda * style + mu * content + nu * tv for a fixed background and
 * first-pass image. Background Gram matrices and first-pass relu2_2 features
 * are computed once at construction.
 */
class StyleObjective {
public:
    StyleObjective(const VggPrefix& net, const ImagePlane& background, const ImagePlane& first_pass,
                   LossWeights weights);

    /// `grad` may be empty to skip the backward pass.
    LossBreakdown evaluate(std::span<const double> planar, std::span<double> grad) const;

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    const LossWeights& weights() const noexcept { return weights_; }

private:
    const VggPrefix* net_;
    int height_;
    int width_;
    LossWeights weights_;
    StyleGrams background_grams_;
    Tensor4 first_pass_content_;
};

struct TotalLoss {
    LossBreakdown terms;
    std::vector<double> grad;
};

TotalLoss total_loss(const ImagePlane& img, const ImagePlane& background, const ImagePlane& first_pass,
                     const LossWeights& weights, const VggPrefix& net);

struct SecondPassResult {
    ImagePlane image;
    LossBreakdown initial;
    LossBreakdown final;
    LbfgsResult trace;  ///< x is cleared; accepted_values holds the loss sequence
};

/// Restyles the first-pass composite toward the background by minimizing the
/// total loss with L-BFGS, starting from the first-pass image itself.
SecondPassResult second_pass(const ImagePlane& first_pass, const ImagePlane& background, double lambda,
                             std::size_t iterations, const VggPrefix& net, const LossWeights& base_weights = {},
                             std::size_t history = 10);

}  // namespace iburd
