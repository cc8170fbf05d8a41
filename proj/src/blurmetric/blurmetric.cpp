#include "iburd/blurmetric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "iburd/error.hpp"

namespace iburd {

int next_power_of_two(int n) {
    int p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

void fft_inplace(std::span<Complex> data, bool inverse) {
    const std::size_t n = data.size();
    if (n <= 1) {
        return;
    }
    if ((n & (n - 1)) != 0) {
        throw InvalidArgument("fft length must be a power of two, got " + std::to_string(n));
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(data[i], data[j]);
        }
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            // Direct twiddles rather than a running product keep the error flat in n.
            const Complex w = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                                                  static_cast<double>(len));
            for (std::size_t start = 0; start < n; start += len) {
                const Complex u = data[start + k];
                const Complex v = data[start + k + half] * w;
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
    }
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& v : data) {
            v *= scale;
        }
    }
}

namespace {

void fft_2d(std::vector<Complex>& grid, int h, int w, bool inverse) {
    for (int y = 0; y < h; ++y) {
        fft_inplace(std::span<Complex>(grid).subspan(static_cast<std::size_t>(y) * w, static_cast<std::size_t>(w)),
                    inverse);
    }
    std::vector<Complex> column(static_cast<std::size_t>(h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            column[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * w + x];
        }
        fft_inplace(column, inverse);
        for (int y = 0; y < h; ++y) {
            grid[static_cast<std::size_t>(y) * w + x] = column[static_cast<std::size_t>(y)];
        }
    }
}

Spectrum padded_spectrum(const ImagePlane& gray, double scale) {
    if (gray.channels() != 1) {
        throw InvalidArgument("fft2 expects a one-channel image");
    }
    Spectrum s;
    s.height = next_power_of_two(gray.height());
    s.width = next_power_of_two(gray.width());
    s.bins.assign(static_cast<std::size_t>(s.height) * s.width, Complex{});
    for (int y = 0; y < gray.height(); ++y) {
        for (int x = 0; x < gray.width(); ++x) {
            s.at(y, x) = Complex(gray.at(0, y, x) * scale, 0.0);
        }
    }
    fft_2d(s.bins, s.height, s.width, false);
    quadrant_swap(s.bins, s.height, s.width);
    return s;
}

}  // namespace

void quadrant_swap(std::span<Complex> grid, int height, int width) {
    const int hy = height / 2;
    const int hx = width / 2;
    std::vector<Complex> copy(grid.begin(), grid.end());
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int ty = (y + hy) % height;
            const int tx = (x + hx) % width;
            grid[static_cast<std::size_t>(ty) * width + tx] = copy[static_cast<std::size_t>(y) * width + x];
        }
    }
}

Spectrum fft2(const ImagePlane& gray) { return padded_spectrum(gray, 1.0); }

std::vector<Complex> ifft2(const Spectrum& spectrum) {
    std::vector<Complex> grid = spectrum.bins;
    // Power-of-two sizes are even (or 1), where the swap is its own inverse.
    quadrant_swap(grid, spectrum.height, spectrum.width);
    fft_2d(grid, spectrum.height, spectrum.width, true);
    return grid;
}

int zeroed_half_width(int padded_height, int padded_width, double center_fraction) {
    const int r = static_cast<int>(std::floor(center_fraction * std::min(padded_height, padded_width)));
    return std::max(r, 1);
}

double blurriness_mean(const ImagePlane& gray, const BlurOptions& options) {
    if (!(options.center_fraction > 0.0 && options.center_fraction < 0.5)) {
        throw InvalidArgument("center_fraction must lie in (0, 0.5)");
    }
    if (!(options.eps > 0.0)) {
        throw InvalidArgument("eps must be positive");
    }
    Spectrum s = padded_spectrum(to_gray(gray), options.intensity_scale);
    const int r = zeroed_half_width(s.height, s.width, options.center_fraction);
    const int cy = s.height / 2;
    const int cx = s.width / 2;
    for (int y = std::max(cy - r, 0); y < std::min(cy + r, s.height); ++y) {
        for (int x = std::max(cx - r, 0); x < std::min(cx + r, s.width); ++x) {
            s.at(y, x) = Complex{};
        }
    }
    const std::vector<Complex> recon = ifft2(s);
    double sum = 0.0;
    for (const Complex& v : recon) {
        sum += 20.0 * std::log10(std::max(std::abs(v), options.eps));
    }
    return sum / static_cast<double>(recon.size());
}

LambdaSchedule::LambdaSchedule()
    : LambdaSchedule({{40.0, 30000.0},
                      {10.0, 15000.0},
                      {0.0, 1500.0},
                      {-std::numeric_limits<double>::infinity(), 800.0}}) {}

LambdaSchedule::LambdaSchedule(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) {
        throw InvalidArgument("lambda schedule must have at least one entry");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!(entries_[i].lambda > 0.0) || !std::isfinite(entries_[i].lambda)) {
            throw InvalidArgument("lambda schedule weights must be positive and finite");
        }
        if (std::isnan(entries_[i].lower_bound)) {
            throw InvalidArgument("lambda schedule bound is NaN");
        }
        if (i > 0 && !(entries_[i].lower_bound < entries_[i - 1].lower_bound)) {
            throw InvalidArgument("lambda schedule bounds must be strictly decreasing");
        }
        // Sharper backgrounds never get a smaller style weight.
        if (i > 0 && entries_[i].lambda > entries_[i - 1].lambda) {
            throw InvalidArgument("lambda schedule weights must not increase as bounds decrease");
        }
    }
    if (entries_.back().lower_bound != -std::numeric_limits<double>::infinity()) {
        throw InvalidArgument("lambda schedule must end with a -infinity bound so every mean is covered");
    }
}

double LambdaSchedule::lambda_for(double mean) const {
    for (const Entry& e : entries_) {
        if (mean >= e.lower_bound) {
            return e.lambda;
        }
    }
    // NaN means fall through every comparison.
    return entries_.back().lambda;
}

}  // namespace iburd
