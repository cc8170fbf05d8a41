#pragma once

#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "iburd/imgcore.hpp"

namespace iburd {

using Complex = std::complex<double>;

/// DC-centred 2-D spectrum on the zero-padded power-of-two grid.
struct Spectrum {
    int height = 0;  ///< padded rows
    int width = 0;   ///< padded columns
    std::vector<Complex> bins;

    Complex& at(int y, int x) { return bins[static_cast<std::size_t>(y) * width + x]; }
    const Complex& at(int y, int x) const { return bins[static_cast<std::size_t>(y) * width + x]; }
};

int next_power_of_two(int n);

/// In-place radix-2 transform of a power-of-two length sequence. The inverse
/// includes the 1/n factor.
void fft_inplace(std::span<Complex> data, bool inverse);

/// Forward 2-D DFT of a one-channel image after zero-padding each dimension
/// to a power of two, followed by a quadrant swap that moves DC to
/// (height/2, width/2).
Spectrum fft2(const ImagePlane& gray);

/// Undoes the quadrant swap and applies the inverse 2-D DFT. Returns the
/// padded spatial grid, row-major.
std::vector<Complex> ifft2(const Spectrum& spectrum);

/// Moves bin (0,0) to (h/2, w/2); its own inverse on even-sized grids.
void quadrant_swap(std::span<Complex> grid, int height, int width);

struct BlurOptions {
    /// Half-width of the removed low-frequency square as a fraction of the
    /// smaller padded dimension (60 px on a 512 px grid).
    double center_fraction = 60.0 / 512.0;
    double eps = 1e-8;
    /// Gray levels are scaled from [0,1] to 8-bit intensity before the
    /// transform, the range the lambda schedule thresholds are expressed in.
    double intensity_scale = 255.0;
};

/// Half-width of the zeroed square for a padded grid.
int zeroed_half_width(int padded_height, int padded_width, double center_fraction);

/// Mean over the padded grid of 20*log10(max(|high-pass reconstruction|, eps)).
/// Lower values mean a blurrier image.
double blurriness_mean(const ImagePlane& gray, const BlurOptions& options = {});

/// Step function from blurriness mean (dB) to style-loss weight.
class LambdaSchedule {
public:
    struct Entry {
        double lower_bound;  ///< inclusive; -infinity for the final catch-all
        double lambda;
    };

    /// 30000 for mean >= 40, 15000 for [10, 40), 1500 for [0, 10), 800 below 0.
    LambdaSchedule();
    explicit LambdaSchedule(std::vector<Entry> entries);

    const std::vector<Entry>& entries() const noexcept { return entries_; }

    /// The first entry (in decreasing bound order) whose bound is <= mean.
    double lambda_for(double mean) const;

private:
    std::vector<Entry> entries_;
};

inline double lambda_for(double mean, const LambdaSchedule& schedule) { return schedule.lambda_for(mean); }

}  // namespace iburd
