#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace iburd {

/**
 * A raster of real samples in [0,1].
 *
 * Storage is planar: all of channel 0 row by row, then channel 1, and so on.
 * Sample (c, y, x) lives at index (c * height + y) * width + x. The planar
 * layout is shared by every module (the network consumes it directly as a
 * 1xCxHxW tensor and the Poisson solver works one channel plane at a time).
 *
 * Mutable element access exists for code that builds images; every free
 * function that returns an ImagePlane clamps its result to [0,1].
 */
class ImagePlane {
public:
    ImagePlane() = default;
    ImagePlane(int height, int width, int channels, double fill = 0.0);

    /// Takes ownership of planar samples; values are clamped to [0,1].
    static ImagePlane from_planar(int height, int width, int channels, std::vector<double> samples);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }

    std::span<const double> samples() const noexcept { return data_; }
    std::span<double> samples() noexcept { return data_; }
    std::span<const double> plane(int c) const noexcept;
    std::span<double> plane(int c) noexcept;

    void clamp();

    bool operator==(const ImagePlane&) const = default;

private:
    std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Per-pixel {0,1} region. A pixel is interior when set; boundary pixels are
/// unset pixels 4-adjacent to an interior one.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width, bool fill = false);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }

    bool at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int y, int x, bool v) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

    std::size_t count() const noexcept;
    bool any() const noexcept { return count() > 0; }
    std::span<const std::uint8_t> bits() const noexcept { return data_; }

    bool operator==(const BinaryMask&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

struct LoadedImage {
    ImagePlane image;
    std::optional<BinaryMask> alpha;
};

/// Reads an 8- or 16-bit gray, gray+alpha, RGB or RGBA PNG. Alpha above 0.5
/// becomes an interior mask pixel; the alpha plane itself is dropped.
LoadedImage load_png(const std::filesystem::path& path);

/// Writes an 8-bit PNG (RGB for three channels, gray for one). Samples are
/// quantized as round(v * 255).
void save_png(const ImagePlane& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const ImagePlane& img);

/// Bilinear resampling with half-pixel-centre alignment.
ImagePlane resize_bilinear(const ImagePlane& img, int out_w, int out_h);

/// Bilinear resampling of the mask's indicator followed by a 0.5 threshold.
BinaryMask resize_mask(const BinaryMask& mask, int out_w, int out_h);

/// k quarter turns clockwise; a pure index permutation.
ImagePlane rotate_quarter(const ImagePlane& img, int k);
BinaryMask rotate_quarter(const BinaryMask& mask, int k);

/// Rec. 601 luma. A one-channel input is returned unchanged.
ImagePlane to_gray(const ImagePlane& img);

/// Replicates a gray plane into three channels; RGB input is returned unchanged.
ImagePlane to_rgb(const ImagePlane& img);

}  // namespace iburd
