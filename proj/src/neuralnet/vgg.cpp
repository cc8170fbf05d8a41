#include "iburd/vgg.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "iburd/error.hpp"

namespace iburd {

namespace {

// Upper bound on im2col scratch size, in doubles.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

struct Step {
    enum Kind { conv, pool, tap } kind;
    int index;
};

// conv indices refer to vgg16_prefix_architecture(); tap indices to Tap.
const std::vector<Step>& program() {
    static const std::vector<Step> steps = {
        {Step::conv, 0}, {Step::conv, 1}, {Step::tap, 0}, {Step::pool, 0},
        {Step::conv, 2}, {Step::conv, 3}, {Step::tap, 1}, {Step::pool, 1},
        {Step::conv, 4}, {Step::conv, 5}, {Step::conv, 6}, {Step::tap, 2}, {Step::pool, 2},
        {Step::conv, 7}, {Step::conv, 8}, {Step::conv, 9}, {Step::tap, 3},
    };
    return steps;
}

int rows_per_chunk(int k, int width, int height) {
    const std::size_t per_row = static_cast<std::size_t>(k) * width;
    return std::clamp(static_cast<int>(kColumnBudget / std::max<std::size_t>(per_row, 1)), 1, height);
}

void im2col(const double* in, int channels, int height, int width, int y0, int rows, double* cols) {
    const std::size_t n = static_cast<std::size_t>(rows) * width;
    for (int ci = 0; ci < channels; ++ci) {
        const double* plane = in + static_cast<std::size_t>(ci) * height * width;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                double* dst = cols + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * n;
                for (int r = 0; r < rows; ++r) {
                    const int iy = y0 + r + ky - 1;
                    double* drow = dst + static_cast<std::size_t>(r) * width;
                    if (iy < 0 || iy >= height) {
                        std::fill(drow, drow + width, 0.0);
                        continue;
                    }
                    const double* srow = plane + static_cast<std::size_t>(iy) * width;
                    for (int x = 0; x < width; ++x) {
                        const int ix = x + kx - 1;
                        drow[x] = (ix >= 0 && ix < width) ? srow[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, int channels, int height, int width, int y0, int rows, double* out) {
    const std::size_t n = static_cast<std::size_t>(rows) * width;
    for (int ci = 0; ci < channels; ++ci) {
        double* plane = out + static_cast<std::size_t>(ci) * height * width;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const double* src = cols + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * n;
                for (int r = 0; r < rows; ++r) {
                    const int iy = y0 + r + ky - 1;
                    if (iy < 0 || iy >= height) {
                        continue;
                    }
                    const double* srow = src + static_cast<std::size_t>(r) * width;
                    double* drow = plane + static_cast<std::size_t>(iy) * width;
                    const int x_begin = kx == 0 ? 1 : 0;
                    const int x_end = kx == 2 ? width - 1 : width;
                    for (int x = x_begin; x < x_end; ++x) {
                        drow[x + kx - 1] += srow[x];
                    }
                }
            }
        }
    }
}

// Convolution + bias + ReLU. Returns the activated output.
std::vector<double> conv_relu_forward(const VggPrefix::Conv& conv, const std::vector<double>& in, int height,
                                      int width, FeatureStack::ConvRecord& record) {
    const int k = conv.in_channels * 9;
    const std::size_t hw = static_cast<std::size_t>(height) * width;
    std::vector<double> out(static_cast<std::size_t>(conv.out_channels) * hw);
    const int chunk = rows_per_chunk(k, width, height);
    std::vector<double> cols(static_cast<std::size_t>(k) * chunk * width);
    for (int y0 = 0; y0 < height; y0 += chunk) {
        const int rows = std::min(chunk, height - y0);
        const int n = rows * width;
        im2col(in.data(), conv.in_channels, height, width, y0, rows, cols.data());
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, conv.out_channels, n, k, 1.0, conv.weight.data(), k,
                    cols.data(), n, 0.0, out.data() + static_cast<std::size_t>(y0) * width,
                    static_cast<int>(hw));
    }
    record.channels = conv.out_channels;
    record.height = height;
    record.width = width;
    record.active.resize(out.size());
    for (int o = 0; o < conv.out_channels; ++o) {
        const double b = conv.bias[static_cast<std::size_t>(o)];
        double* plane = out.data() + static_cast<std::size_t>(o) * hw;
        std::uint8_t* act = record.active.data() + static_cast<std::size_t>(o) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
            const double v = plane[i] + b;
            const bool on = v > 0.0;
            plane[i] = on ? v : 0.0;
            act[i] = on ? 1 : 0;
        }
    }
    return out;
}

// Gradient w.r.t. the convolution input, given the gradient w.r.t. its
// post-ReLU output. `grad_out` is masked in place.
std::vector<double> conv_relu_backward(const VggPrefix::Conv& conv, std::vector<double>& grad_out,
                                       const FeatureStack::ConvRecord& record) {
    const int height = record.height;
    const int width = record.width;
    const std::size_t hw = static_cast<std::size_t>(height) * width;
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        if (!record.active[i]) {
            grad_out[i] = 0.0;
        }
    }
    const int k = conv.in_channels * 9;
    std::vector<double> grad_in(static_cast<std::size_t>(conv.in_channels) * hw, 0.0);
    const int chunk = rows_per_chunk(k, width, height);
    std::vector<double> cols(static_cast<std::size_t>(k) * chunk * width);
    for (int y0 = 0; y0 < height; y0 += chunk) {
        const int rows = std::min(chunk, height - y0);
        const int n = rows * width;
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, n, conv.out_channels, 1.0, conv.weight.data(), k,
                    grad_out.data() + static_cast<std::size_t>(y0) * width, static_cast<int>(hw), 0.0,
                    cols.data(), n);
        col2im_add(cols.data(), conv.in_channels, height, width, y0, rows, grad_in.data());
    }
    return grad_in;
}

std::vector<double> pool_forward(const std::vector<double>& in, int channels, int height, int width,
                                 FeatureStack::PoolRecord& record) {
    const int oh = height / 2;
    const int ow = width / 2;
    record.channels = channels;
    record.in_height = height;
    record.in_width = width;
    record.out_height = oh;
    record.out_width = ow;
    std::vector<double> out(static_cast<std::size_t>(channels) * oh * ow);
    record.argmax.resize(out.size());
    for (int c = 0; c < channels; ++c) {
        const double* plane = in.data() + static_cast<std::size_t>(c) * height * width;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                // Row-major scan with strict comparison: ties keep the first index.
                int best = (2 * y) * width + 2 * x;
                double best_v = plane[best];
                const int candidates[3] = {(2 * y) * width + 2 * x + 1, (2 * y + 1) * width + 2 * x,
                                           (2 * y + 1) * width + 2 * x + 1};
                for (const int idx : candidates) {
                    if (plane[idx] > best_v) {
                        best_v = plane[idx];
                        best = idx;
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(c) * oh + y) * ow + x;
                out[o] = best_v;
                record.argmax[o] = best;
            }
        }
    }
    return out;
}

std::vector<double> pool_backward(const std::vector<double>& grad_out, const FeatureStack::PoolRecord& record) {
    const std::size_t in_plane = static_cast<std::size_t>(record.in_height) * record.in_width;
    const std::size_t out_plane = static_cast<std::size_t>(record.out_height) * record.out_width;
    std::vector<double> grad_in(static_cast<std::size_t>(record.channels) * in_plane, 0.0);
    for (int c = 0; c < record.channels; ++c) {
        for (std::size_t o = 0; o < out_plane; ++o) {
            const std::size_t oi = static_cast<std::size_t>(c) * out_plane + o;
            grad_in[static_cast<std::size_t>(c) * in_plane + static_cast<std::size_t>(record.argmax[oi])] +=
                grad_out[oi];
        }
    }
    return grad_in;
}

}  // namespace

const std::vector<ConvSpec>& vgg16_prefix_architecture() {
    static const std::vector<ConvSpec> arch = {
        {"conv1_1", 3, 64},    {"conv1_2", 64, 64},   {"conv2_1", 64, 128},  {"conv2_2", 128, 128},
        {"conv3_1", 128, 256}, {"conv3_2", 256, 256}, {"conv3_3", 256, 256}, {"conv4_1", 256, 512},
        {"conv4_2", 512, 512}, {"conv4_3", 512, 512},
    };
    return arch;
}

VggPrefix VggPrefix::from_tensors(std::span<const ArchiveTensor> tensors) {
    std::map<std::string, const ArchiveTensor*> by_name;
    for (const auto& t : tensors) {
        by_name[t.name] = &t;
    }
    auto fetch = [&](const std::string& name, const std::vector<std::int64_t>& shape) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw MissingTensorError("weight tensor '" + name + "' is missing", name);
        }
        if (it->second->shape != shape) {
            std::string got;
            for (const auto d : it->second->shape) {
                got += (got.empty() ? "" : ",") + std::to_string(d);
            }
            std::string want;
            for (const auto d : shape) {
                want += (want.empty() ? "" : ",") + std::to_string(d);
            }
            throw ShapeMismatchError("weight tensor '" + name + "' has shape (" + got + "), expected (" + want + ")",
                                     name);
        }
        const auto& values = it->second->values;
        for (const float v : values) {
            if (!std::isfinite(v)) {
                throw TensorError("weight tensor '" + name + "' contains a non-finite value", name);
            }
        }
        return std::vector<double>(values.begin(), values.end());
    };

    VggPrefix net;
    for (const auto& spec : vgg16_prefix_architecture()) {
        Conv conv;
        conv.name = spec.name;
        conv.in_channels = spec.in_channels;
        conv.out_channels = spec.out_channels;
        conv.weight = fetch(conv.name + ".weight", {spec.out_channels, spec.in_channels, 3, 3});
        conv.bias = fetch(conv.name + ".bias", {spec.out_channels});
        net.convs_.push_back(std::move(conv));
    }
    return net;
}

std::uint64_t VggPrefix::weights_digest() const {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](const std::vector<double>& values) {
        for (const double v : values) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, &v, sizeof(bits));
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xFFu;
                h *= 1099511628211ull;
            }
        }
    };
    for (const auto& conv : convs_) {
        feed(conv.weight);
        feed(conv.bias);
    }
    return h;
}

VggPrefix load_weights(const std::filesystem::path& path) {
    const auto tensors = read_archive(path);
    return VggPrefix::from_tensors(tensors);
}

FeatureStack forward_features(const VggPrefix& net, std::span<const double> planar_rgb, int height, int width) {
    if (height < kMinFeatureSide || width < kMinFeatureSide) {
        throw InvalidArgument("feature extraction needs at least " + std::to_string(kMinFeatureSide) + "x" +
                              std::to_string(kMinFeatureSide) + " pixels, got " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
    const std::size_t hw = static_cast<std::size_t>(height) * width;
    if (planar_rgb.size() != 3 * hw) {
        throw InvalidArgument("feature extraction expects a 3-channel image");
    }
    FeatureStack stack;
    stack.input_height = height;
    stack.input_width = width;

    std::vector<double> cur(planar_rgb.size());
    for (int c = 0; c < 3; ++c) {
        const double mean = VggPrefix::kMean[static_cast<std::size_t>(c)];
        const double inv_std = 1.0 / VggPrefix::kStd[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < hw; ++i) {
            cur[c * hw + i] = (planar_rgb[c * hw + i] - mean) * inv_std;
        }
    }
    int channels = 3;
    int h = height;
    int w = width;
    for (const Step& step : program()) {
        switch (step.kind) {
            case Step::conv: {
                const auto& conv = net.convs()[static_cast<std::size_t>(step.index)];
                stack.convs.emplace_back();
                cur = conv_relu_forward(conv, cur, h, w, stack.convs.back());
                channels = conv.out_channels;
                break;
            }
            case Step::pool: {
                stack.pools.emplace_back();
                cur = pool_forward(cur, channels, h, w, stack.pools.back());
                h /= 2;
                w /= 2;
                break;
            }
            case Step::tap: {
                Tensor4 t(1, channels, h, w);
                t.data = cur;
                stack.taps[static_cast<std::size_t>(step.index)] = std::move(t);
                break;
            }
        }
    }
    return stack;
}

FeatureStack forward_features(const VggPrefix& net, const ImagePlane& img) {
    if (img.channels() != 3) {
        throw InvalidArgument("feature extraction expects a 3-channel image, got " + std::to_string(img.channels()));
    }
    return forward_features(net, img.samples(), img.height(), img.width());
}

Tensor4 backward_to_input(const VggPrefix& net, const FeatureStack& stack, const TapTensors& tap_grads) {
    int deepest = -1;
    for (int t = 0; t < kTapCount; ++t) {
        const Tensor4& g = tap_grads[static_cast<std::size_t>(t)];
        if (g.empty()) {
            continue;
        }
        if (!g.same_shape(stack.taps[static_cast<std::size_t>(t)])) {
            throw InvalidArgument(std::string("gradient for tap ") + kTapNames[static_cast<std::size_t>(t)] +
                                  " has shape " + g.shape_string() + ", expected " +
                                  stack.taps[static_cast<std::size_t>(t)].shape_string());
        }
        deepest = t;
    }

    const int height = stack.input_height;
    const int width = stack.input_width;
    Tensor4 result(1, 3, height, width);
    if (deepest < 0) {
        return result;
    }

    // Walk the program backwards, starting at the deepest tap that carries a gradient.
    const auto& steps = program();
    std::vector<double> grad;
    bool started = false;
    int conv_cursor = static_cast<int>(stack.convs.size());
    int pool_cursor = static_cast<int>(stack.pools.size());
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        const Step& step = *it;
        if (step.kind == Step::conv) {
            --conv_cursor;
        } else if (step.kind == Step::pool) {
            --pool_cursor;
        }
        if (!started) {
            if (step.kind == Step::tap && step.index == deepest) {
                started = true;
                grad = tap_grads[static_cast<std::size_t>(deepest)].data;
            }
            continue;
        }
        switch (step.kind) {
            case Step::tap: {
                const Tensor4& g = tap_grads[static_cast<std::size_t>(step.index)];
                if (!g.empty()) {
                    for (std::size_t i = 0; i < grad.size(); ++i) {
                        grad[i] += g.data[i];
                    }
                }
                break;
            }
            case Step::conv:
                grad = conv_relu_backward(net.convs()[static_cast<std::size_t>(step.index)], grad,
                                          stack.convs[static_cast<std::size_t>(conv_cursor)]);
                break;
            case Step::pool:
                grad = pool_backward(grad, stack.pools[static_cast<std::size_t>(pool_cursor)]);
                break;
        }
    }

    const std::size_t hw = static_cast<std::size_t>(height) * width;
    for (int c = 0; c < 3; ++c) {
        const double inv_std = 1.0 / VggPrefix::kStd[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < hw; ++i) {
            result.data[c * hw + i] = grad[c * hw + i] * inv_std;
        }
    }
    return result;
}

Tensor4 backward_to_input(const VggPrefix& net, const ImagePlane& img, const TapTensors& tap_grads) {
    return backward_to_input(net, forward_features(net, img), tap_grads);
}

std::string Tensor4::shape_string() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) +
           ")";
}

}  // namespace iburd
