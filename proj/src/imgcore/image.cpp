#include "iburd/imgcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "iburd/error.hpp"

namespace iburd {

namespace {

void check_dims(int height, int width, int channels) {
    if (height < 1 || width < 1) {
        throw InvalidArgument("image dimensions must be positive, got " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
    if (channels != 1 && channels != 3) {
        throw InvalidArgument("image must have 1 or 3 channels, got " + std::to_string(channels));
    }
}

struct Tap {
    int lo;
    int hi;
    double frac;
};

// Half-pixel-centre source coordinate for each output index along one axis.
std::vector<Tap> bilinear_taps(int in_len, int out_len) {
    std::vector<Tap> taps(static_cast<std::size_t>(out_len));
    const double ratio = static_cast<double>(in_len) / out_len;
    for (int i = 0; i < out_len; ++i) {
        double s = (i + 0.5) * ratio - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in_len - 1));
        const int lo = static_cast<int>(std::floor(s));
        const int hi = std::min(lo + 1, in_len - 1);
        taps[static_cast<std::size_t>(i)] = {lo, hi, s - lo};
    }
    return taps;
}

// Convex interpolation that never leaves [min(a,b), max(a,b)] under rounding.
inline double lerp_bounded(double a, double b, double t) {
    const double v = a + t * (b - a);
    return std::clamp(v, std::min(a, b), std::max(a, b));
}

void resample_plane(std::span<const double> src, int in_w, int in_h, std::span<double> dst, int out_w,
                    int out_h) {
    const auto tx = bilinear_taps(in_w, out_w);
    const auto ty = bilinear_taps(in_h, out_h);
    for (int y = 0; y < out_h; ++y) {
        const Tap& vy = ty[static_cast<std::size_t>(y)];
        const double* row0 = src.data() + static_cast<std::size_t>(vy.lo) * in_w;
        const double* row1 = src.data() + static_cast<std::size_t>(vy.hi) * in_w;
        for (int x = 0; x < out_w; ++x) {
            const Tap& vx = tx[static_cast<std::size_t>(x)];
            const double top = lerp_bounded(row0[vx.lo], row0[vx.hi], vx.frac);
            const double bottom = lerp_bounded(row1[vx.lo], row1[vx.hi], vx.frac);
            dst[static_cast<std::size_t>(y) * out_w + x] = lerp_bounded(top, bottom, vy.frac);
        }
    }
}

void check_quarter(int k) {
    if (k < 0 || k > 3) {
        throw InvalidArgument("quarter rotation count must be in 0..3, got " + std::to_string(k));
    }
}

// Destination (x', y') of source pixel (x, y) for k clockwise quarter turns
// of a w x h raster.
inline void rotated_index(int k, int w, int h, int x, int y, int& ox, int& oy) {
    switch (k) {
        case 0: ox = x; oy = y; break;
        case 1: ox = h - 1 - y; oy = x; break;
        case 2: ox = w - 1 - x; oy = h - 1 - y; break;
        default: ox = y; oy = w - 1 - x; break;
    }
}

}  // namespace

ImagePlane::ImagePlane(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    check_dims(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, std::clamp(fill, 0.0, 1.0));
}

ImagePlane ImagePlane::from_planar(int height, int width, int channels, std::vector<double> samples) {
    check_dims(height, width, channels);
    if (samples.size() != static_cast<std::size_t>(height) * width * channels) {
        throw InvalidArgument("sample count does not match image dimensions");
    }
    ImagePlane img;
    img.height_ = height;
    img.width_ = width;
    img.channels_ = channels;
    img.data_ = std::move(samples);
    img.clamp();
    return img;
}

std::span<const double> ImagePlane::plane(int c) const noexcept {
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * pixel_count(), pixel_count());
}

std::span<double> ImagePlane::plane(int c) noexcept {
    return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * pixel_count(), pixel_count());
}

void ImagePlane::clamp() {
    for (double& v : data_) {
        // NaN maps to 0 so the [0,1] invariant survives a bad upstream value.
        v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    }
}

BinaryMask::BinaryMask(int height, int width, bool fill) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
        throw InvalidArgument("mask dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

ImagePlane resize_bilinear(const ImagePlane& img, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) {
        throw InvalidArgument("resize target must be at least 1x1, got " + std::to_string(out_w) + "x" +
                              std::to_string(out_h));
    }
    ImagePlane out(out_h, out_w, img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        resample_plane(img.plane(c), img.width(), img.height(), out.plane(c), out_w, out_h);
    }
    out.clamp();
    return out;
}

BinaryMask resize_mask(const BinaryMask& mask, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) {
        throw InvalidArgument("resize target must be at least 1x1");
    }
    std::vector<double> src(mask.bits().begin(), mask.bits().end());
    std::vector<double> dst(static_cast<std::size_t>(out_w) * out_h);
    resample_plane(src, mask.width(), mask.height(), dst, out_w, out_h);
    BinaryMask out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            out.set(y, x, dst[static_cast<std::size_t>(y) * out_w + x] > 0.5);
        }
    }
    return out;
}

ImagePlane rotate_quarter(const ImagePlane& img, int k) {
    check_quarter(k);
    const int w = img.width();
    const int h = img.height();
    const bool odd = (k % 2) == 1;
    ImagePlane out(odd ? w : h, odd ? h : w, img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                int ox = 0;
                int oy = 0;
                rotated_index(k, w, h, x, y, ox, oy);
                out.at(c, oy, ox) = img.at(c, y, x);
            }
        }
    }
    return out;
}

BinaryMask rotate_quarter(const BinaryMask& mask, int k) {
    check_quarter(k);
    const int w = mask.width();
    const int h = mask.height();
    const bool odd = (k % 2) == 1;
    BinaryMask out(odd ? w : h, odd ? h : w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int ox = 0;
            int oy = 0;
            rotated_index(k, w, h, x, y, ox, oy);
            out.set(oy, ox, mask.at(y, x));
        }
    }
    return out;
}

ImagePlane to_gray(const ImagePlane& img) {
    if (img.channels() == 1) {
        return img;
    }
    ImagePlane out(img.height(), img.width(), 1);
    const auto r = img.plane(0);
    const auto g = img.plane(1);
    const auto b = img.plane(2);
    auto dst = out.plane(0);
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    }
    out.clamp();
    return out;
}

ImagePlane to_rgb(const ImagePlane& img) {
    if (img.channels() == 3) {
        return img;
    }
    ImagePlane out(img.height(), img.width(), 3);
    for (int c = 0; c < 3; ++c) {
        std::copy(img.plane(0).begin(), img.plane(0).end(), out.plane(c).begin());
    }
    return out;
}

}  // namespace iburd
