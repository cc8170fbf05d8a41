#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "iburd/blurmetric.hpp"
#include "iburd/error.hpp"
#include "oracles.hpp"

using namespace iburd;

namespace {

ImagePlane fixture_gray(const char* name) {
    return to_gray(load_png(std::filesystem::path(IBURD_FIXTURE_DIR) / name).image);
}

// Oracle spectrum with DC moved to the centre by modular indexing.
std::vector<Complex> naive_centred(const ImagePlane& gray, int& ph, int& pw) {
    const std::vector<Complex> grid = oracle::padded_grid(gray, 1.0, ph, pw);
    const std::vector<Complex> spec = oracle::naive_dft2(grid, ph, pw, false);
    std::vector<Complex> centred(spec.size());
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
            centred[((y + ph / 2) % ph) * pw + (x + pw / 2) % pw] = spec[y * pw + x];
        }
    }
    return centred;
}

}  // namespace

TEST_CASE("next_power_of_two") {
    CHECK(next_power_of_two(1) == 1);
    CHECK(next_power_of_two(2) == 2);
    CHECK(next_power_of_two(3) == 4);
    CHECK(next_power_of_two(512) == 512);
    CHECK(next_power_of_two(513) == 1024);
}

TEST_CASE("fft2 of a constant image is a single centred bin") {
    const ImagePlane c(8, 8, 1, 0.3);
    const Spectrum s = fft2(c);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const double expect = (y == 4 && x == 4) ? 64 * 0.3 : 0.0;
            CHECK(std::abs(s.at(y, x)) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("fft2 of a unit impulse is flat") {
    ImagePlane impulse(8, 8, 1, 0.0);
    impulse.at(0, 0, 0) = 1.0;
    const Spectrum s = fft2(impulse);
    for (const Complex& v : s.bins) {
        CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fft2 matches the naive DFT including non power-of-two sizes") {
    std::mt19937_64 rng(21);
    for (const auto& [h, w] : {std::pair{16, 16}, std::pair{5, 7}, std::pair{1, 9}, std::pair{12, 3}}) {
        const ImagePlane img = oracle::random_image(rng, h, w, 1);
        int ph = 0, pw = 0;
        const std::vector<Complex> ref = naive_centred(img, ph, pw);
        const Spectrum s = fft2(img);
        REQUIRE(s.height == ph);
        REQUIRE(s.width == pw);
        double worst = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            worst = std::max(worst, std::abs(ref[i] - s.bins[i]));
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("fft2 round trip and Parseval") {
    std::mt19937_64 rng(22);
    for (int n = 1; n <= 64; n = n * 2 + 1) {
        const ImagePlane img = oracle::random_image(rng, n, 64 - n + 1, 1);
        const Spectrum s = fft2(img);
        const std::vector<Complex> back = ifft2(s);
        double worst = 0.0;
        double energy_x = 0.0;
        double energy_f = 0.0;
        for (int y = 0; y < s.height; ++y) {
            for (int x = 0; x < s.width; ++x) {
                const double orig = (y < img.height() && x < img.width()) ? img.at(0, y, x) : 0.0;
                worst = std::max(worst, std::abs(back[y * s.width + x] - orig));
                energy_x += orig * orig;
            }
        }
        for (const Complex& v : s.bins) {
            energy_f += std::norm(v);
        }
        CHECK(worst < 1e-6);
        CHECK(energy_x == doctest::Approx(energy_f / (s.height * s.width)).epsilon(1e-6));
    }
}

TEST_CASE("fft2 rejects multi-channel input") { CHECK_THROWS_AS(fft2(ImagePlane(4, 4, 3)), InvalidArgument); }

TEST_CASE("blurriness_mean of a constant image is exactly -160 dB") {
    CHECK(blurriness_mean(ImagePlane(64, 64, 1, 0.6)) == -160.0);
    CHECK(blurriness_mean(fixture_gray("constant.png")) == -160.0);
}

TEST_CASE("blurriness_mean on a checkerboard matches the naive reference pipeline") {
    ImagePlane board(64, 64, 1);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            board.at(0, y, x) = (x + y) % 2;
        }
    }
    const BlurOptions opt;
    const double ref = oracle::naive_blur_mean(board, opt.center_fraction, opt.eps, opt.intensity_scale);
    CHECK(std::abs(blurriness_mean(board, opt) - ref) < 1e-4);
}

TEST_CASE("blurriness_mean on random images matches the naive reference pipeline") {
    std::mt19937_64 rng(23);
    const BlurOptions opt;
    for (const auto& [h, w] : {std::pair{32, 32}, std::pair{20, 28}}) {
        const ImagePlane img = oracle::random_image(rng, h, w, 1);
        const double ref = oracle::naive_blur_mean(img, opt.center_fraction, opt.eps, opt.intensity_scale);
        CHECK(std::abs(blurriness_mean(img, opt) - ref) < 1e-4);
    }
}

TEST_CASE("sharp fixture scores above the blurry fixture, in both implementations") {
    const ImagePlane sharp = fixture_gray("sharp_reef.png");
    const ImagePlane blurry = fixture_gray("blurry_pool.png");
    const BlurOptions opt;
    CHECK(blurriness_mean(sharp) > blurriness_mean(blurry));
    CHECK(oracle::naive_blur_mean(sharp, opt.center_fraction, opt.eps, opt.intensity_scale) >
          oracle::naive_blur_mean(blurry, opt.center_fraction, opt.eps, opt.intensity_scale));
}

TEST_CASE("blurriness_mean ignores a constant offset on power-of-two grids") {
    std::mt19937_64 rng(24);
    const ImagePlane img = oracle::random_image(rng, 64, 64, 1, 0.2, 0.6);
    ImagePlane shifted = img;
    for (double& v : shifted.samples()) {
        v += 0.25;
    }
    CHECK(std::abs(blurriness_mean(img) - blurriness_mean(shifted)) < 1e-6);
}

TEST_CASE("blurriness_mean validates options") {
    const ImagePlane img(16, 16, 1, 0.5);
    CHECK_THROWS_AS(blurriness_mean(img, {0.0, 1e-8, 255.0}), InvalidArgument);
    CHECK_THROWS_AS(blurriness_mean(img, {0.5, 1e-8, 255.0}), InvalidArgument);
    CHECK_THROWS_AS(blurriness_mean(img, {0.1, 0.0, 255.0}), InvalidArgument);
}

TEST_CASE("lambda_for follows the default table with inclusive lower bounds") {
    const LambdaSchedule s;
    CHECK(lambda_for(45.0, s) == 30000.0);
    CHECK(lambda_for(40.0, s) == 30000.0);
    CHECK(lambda_for(39.9, s) == 15000.0);
    CHECK(lambda_for(10.0, s) == 15000.0);
    CHECK(lambda_for(9.9, s) == 1500.0);
    CHECK(lambda_for(0.0, s) == 1500.0);
    CHECK(lambda_for(-0.5, s) == 800.0);
    CHECK(lambda_for(-1e300, s) == 800.0);
    CHECK(lambda_for(1e300, s) == 30000.0);
}

TEST_CASE("lambda_for is monotone non-decreasing") {
    const LambdaSchedule s;
    double prev = 0.0;
    for (double m = -200.0; m <= 200.0; m += 0.05) {
        const double l = s.lambda_for(m);
        CHECK(l >= prev);
        prev = l;
    }
}

TEST_CASE("LambdaSchedule validation") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(LambdaSchedule(std::vector<LambdaSchedule::Entry>{}), InvalidArgument);
    CHECK_THROWS_AS(LambdaSchedule({{0.0, 1.0}}), InvalidArgument);  // does not cover the reals
    CHECK_THROWS_AS(LambdaSchedule({{0.0, 1.0}, {5.0, 2.0}, {-inf, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(LambdaSchedule({{0.0, -1.0}, {-inf, 1.0}}), InvalidArgument);
    const LambdaSchedule custom({{3.0, 10.0}, {-inf, 2.0}});
    CHECK(custom.lambda_for(3.0) == 10.0);
    CHECK(custom.lambda_for(2.999) == 2.0);
}
