#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "iburd/imgcore.hpp"
#include "iburd/tensor.hpp"
#include "iburd/tensor_archive.hpp"

namespace iburd {

/// Feature taps, in network order.
enum class Tap : int { relu1_2 = 0, relu2_2 = 1, relu3_3 = 2, relu4_3 = 3 };
inline constexpr int kTapCount = 4;
inline constexpr std::array<const char*, kTapCount> kTapNames = {"relu1_2", "relu2_2", "relu3_3", "relu4_3"};

using TapTensors = std::array<Tensor4, kTapCount>;

struct ConvSpec {
    const char* name;
    int in_channels;
    int out_channels;
};

/// The ten 3x3 convolutions of VGG-16 up to conv4_3.
const std::vector<ConvSpec>& vgg16_prefix_architecture();

/**
 * Read-only VGG-16 feature extractor through relu4_3.
 *
 * Every convolution is 3x3 / stride 1 / pad 1 followed by ReLU; blocks are
 * separated by 2x2 stride-2 max pooling (floor on odd sizes). Inputs are
 * normalized per channel by (v - mean) / std before the first convolution.
 */
class VggPrefix {
public:
    struct Conv {
        std::string name;
        int in_channels = 0;
        int out_channels = 0;
        std::vector<double> weight;  // (out, in, 3, 3)
        std::vector<double> bias;    // (out)
    };

    static constexpr std::array<double, 3> kMean = {0.485, 0.456, 0.406};
    static constexpr std::array<double, 3> kStd = {0.229, 0.224, 0.225};

    /// Builds the network from named tensors (conv1_1.weight ... conv4_3.bias).
    /// Throws MissingTensorError / ShapeMismatchError naming the tensor.
    static VggPrefix from_tensors(std::span<const ArchiveTensor> tensors);

    const std::vector<Conv>& convs() const noexcept { return convs_; }

    /// FNV-1a digest over all weights and biases.
    std::uint64_t weights_digest() const;

private:
    std::vector<Conv> convs_;
};

VggPrefix load_weights(const std::filesystem::path& path);

/// Tap activations plus what the backward pass needs (ReLU masks and pooling
/// argmax positions). Owned per call; never shared between jobs.
struct FeatureStack {
    int input_height = 0;
    int input_width = 0;
    TapTensors taps;

    struct ConvRecord {
        int channels = 0;
        int height = 0;
        int width = 0;
        std::vector<std::uint8_t> active;  // 1 where the ReLU output is > 0
    };
    struct PoolRecord {
        int channels = 0;
        int in_height = 0;
        int in_width = 0;
        int out_height = 0;
        int out_width = 0;
        std::vector<std::int32_t> argmax;  // flat index into the input plane
    };
    std::vector<ConvRecord> convs;
    std::vector<PoolRecord> pools;

    const Tensor4& tap(Tap t) const { return taps[static_cast<std::size_t>(t)]; }
};

inline constexpr int kMinFeatureSide = 16;

/// Forward pass over a planar 3 x height x width raster of raw [0,1] values.
FeatureStack forward_features(const VggPrefix& net, std::span<const double> planar_rgb, int height, int width);
FeatureStack forward_features(const VggPrefix& net, const ImagePlane& img);

/// Gradient of sum_t <tap_t, tap_grads_t> with respect to the raw input, as a
/// 1 x 3 x H x W tensor. An empty Tensor4 stands for a zero tap gradient.
Tensor4 backward_to_input(const VggPrefix& net, const FeatureStack& stack, const TapTensors& tap_grads);
Tensor4 backward_to_input(const VggPrefix& net, const ImagePlane& img, const TapTensors& tap_grads);

}  // namespace iburd
