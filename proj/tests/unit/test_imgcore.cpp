#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "iburd/error.hpp"
#include "iburd/imgcore.hpp"
#include "oracles.hpp"

using namespace iburd;

namespace {

std::filesystem::path temp_file(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("ImagePlane validates dimensions and clamps planar input") {
    CHECK_THROWS_AS(ImagePlane(0, 4, 3), InvalidArgument);
    CHECK_THROWS_AS(ImagePlane(4, 4, 2), InvalidArgument);
    const ImagePlane img = ImagePlane::from_planar(1, 2, 1, {-0.5, 1.5});
    CHECK(img.at(0, 0, 0) == 0.0);
    CHECK(img.at(0, 0, 1) == 1.0);
    CHECK_THROWS_AS(ImagePlane::from_planar(2, 2, 1, {0.1, 0.2}), InvalidArgument);
}

TEST_CASE("resize_bilinear: identity size and constant images") {
    std::mt19937_64 rng(1);
    const ImagePlane img = oracle::random_image(rng, 7, 5, 3);
    CHECK(resize_bilinear(img, 5, 7) == img);

    const ImagePlane flat(9, 9, 3, 0.37);
    const ImagePlane up = resize_bilinear(flat, 23, 17);
    for (const double v : up.samples()) {
        CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
    }
}

TEST_CASE("resize_bilinear: 2x2 to 4x4 matches half-pixel-centre interpolation") {
    const ImagePlane img = ImagePlane::from_planar(2, 2, 1, {0.0, 1.0, 0.0, 1.0});
    const ImagePlane up = resize_bilinear(img, 4, 4);
    // Output centre x' + 0.5 maps to input x = (x' + 0.5) / 2 - 0.5, clamped to [0, 1].
    const double expect[4] = {0.0, 0.25, 0.75, 1.0};
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            CHECK(up.at(0, y, x) == doctest::Approx(expect[x]).epsilon(1e-12));
        }
    }
}

TEST_CASE("resize_bilinear stays inside the input range") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const ImagePlane img = oracle::random_image(rng, 3 + trial % 5, 4 + trial % 7, 1, 0.2, 0.7);
        const auto [lo, hi] = std::minmax_element(img.samples().begin(), img.samples().end());
        const ImagePlane out = resize_bilinear(img, 1 + trial * 3, 2 + trial * 2);
        for (const double v : out.samples()) {
            CHECK(v >= *lo);
            CHECK(v <= *hi);
        }
    }
}

TEST_CASE("rotate_quarter is an exact clockwise permutation") {
    std::mt19937_64 rng(3);
    const ImagePlane img = oracle::random_image(rng, 2, 3, 1);
    CHECK(rotate_quarter(img, 0) == img);
    const ImagePlane r = rotate_quarter(img, 1);
    REQUIRE(r.height() == 3);
    REQUIRE(r.width() == 2);
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 3; ++x) {
            CHECK(r.at(0, x, 2 - 1 - y) == img.at(0, y, x));
        }
    }
    const ImagePlane rgb = oracle::random_image(rng, 5, 8, 3);
    CHECK(rotate_quarter(rotate_quarter(rgb, 1), 3) == rgb);
    ImagePlane four = rgb;
    for (int i = 0; i < 4; ++i) {
        four = rotate_quarter(four, 1);
    }
    CHECK(four == rgb);
    CHECK(rotate_quarter(rotate_quarter(rgb, 1), 1) == rotate_quarter(rgb, 2));
}

TEST_CASE("rotate_quarter on masks matches the image permutation") {
    BinaryMask m(3, 4);
    m.set(0, 3, true);
    m.set(2, 1, true);
    const BinaryMask r = rotate_quarter(m, 1);
    CHECK(r.height() == 4);
    CHECK(r.width() == 3);
    CHECK(r.at(3, 2));  // (x=3, y=0) -> (x'=h-1-y=2, y'=3)
    CHECK(r.at(1, 0));  // (x=1, y=2) -> (x'=0, y'=1)
    CHECK(r.count() == 2);
}

TEST_CASE("to_gray uses Rec. 601 weights") {
    ImagePlane white(1, 1, 3, 1.0);
    CHECK(to_gray(white).at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    ImagePlane red(1, 1, 3, 0.0);
    red.at(0, 0, 0) = 1.0;
    CHECK(to_gray(red).at(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-15));

    const LoadedImage reef = load_png(std::filesystem::path(IBURD_FIXTURE_DIR) / "sharp_reef.png");
    const ImagePlane gray = to_gray(reef.image);
    for (int y = 0; y < gray.height(); y += 7) {
        for (int x = 0; x < gray.width(); x += 5) {
            const double expect = 0.299 * reef.image.at(0, y, x) + 0.587 * reef.image.at(1, y, x) +
                                  0.114 * reef.image.at(2, y, x);
            CHECK(gray.at(0, y, x) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    const ImagePlane one(2, 2, 1, 0.4);
    CHECK(to_gray(one) == one);
}

TEST_CASE("PNG round trip is lossless on 8-bit data") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> level(0, 255);
    ImagePlane img(13, 17, 3);
    for (double& v : img.samples()) {
        v = level(rng) / 255.0;
    }
    const auto path = temp_file("iburd_roundtrip.png");
    save_png(img, path);
    const LoadedImage back = load_png(path);
    CHECK_FALSE(back.alpha.has_value());
    REQUIRE(back.image.height() == 13);
    REQUIRE(back.image.width() == 17);
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(std::lround(back.image.samples()[i] * 255.0) == std::lround(img.samples()[i] * 255.0));
    }

    const std::vector<std::uint8_t> bytes = encode_png(img);
    const oracle::Ihdr ihdr = oracle::parse_ihdr(bytes);
    CHECK(ihdr.width == 17);
    CHECK(ihdr.height == 13);
    CHECK(ihdr.bit_depth == 8);
    CHECK(ihdr.color_type == 2);
    std::filesystem::remove(path);
}

TEST_CASE("load_png reads alpha as a 0.5-threshold mask") {
    const LoadedImage star = load_png(std::filesystem::path(IBURD_FIXTURE_DIR) / "starfish.png");
    REQUIRE(star.alpha.has_value());
    CHECK(star.image.channels() == 3);
    CHECK(star.alpha->width() == 96);
    CHECK(star.alpha->height() == 80);
    CHECK(star.alpha->at(42, 48));
    CHECK_FALSE(star.alpha->at(0, 0));
}

TEST_CASE("load_png errors") {
    CHECK_THROWS_AS(load_png("/nonexistent/file.png"), IoError);
    const auto path = temp_file("iburd_not_png.png");
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("definitely not a png", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_png(path), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("resize_mask thresholds the interpolated indicator") {
    BinaryMask m(4, 4);
    for (int y = 1; y < 3; ++y) {
        for (int x = 1; x < 3; ++x) {
            m.set(y, x, true);
        }
    }
    CHECK(resize_mask(m, 4, 4) == m);
    const BinaryMask big = resize_mask(m, 8, 8);
    CHECK(big.at(4, 4));
    CHECK_FALSE(big.at(0, 0));
}
