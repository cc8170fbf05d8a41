#include <doctest.h>

#include <cmath>
#include <random>

#include "iburd/annotate.hpp"
#include "iburd/error.hpp"
#include "oracles.hpp"

using namespace iburd;
using nlohmann::json;

namespace {

Polygon square(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

void check_same_points(const Annotation& a, const Annotation& b, double tol) {
    REQUIRE(a.polygons.size() == b.polygons.size());
    for (std::size_t i = 0; i < a.polygons.size(); ++i) {
        REQUIRE(a.polygons[i].size() == b.polygons[i].size());
        for (std::size_t j = 0; j < a.polygons[i].size(); ++j) {
            CHECK(std::abs(a.polygons[i][j].x - b.polygons[i][j].x) <= tol);
            CHECK(std::abs(a.polygons[i][j].y - b.polygons[i][j].y) <= tol);
        }
    }
}

// Bounding box of the set pixels as [x0, x1) x [y0, y1).
BBox mask_bbox(const BinaryMask& m) {
    int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m.at(y, x)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    }
    return {double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)};
}

CocoDataset small_dataset() {
    CocoDataset d;
    d.images.push_back({1, "images/000000.png", 100, 80});
    d.categories.push_back({1, "starfish"});
    d.categories.push_back({2, "bottle"});
    d.annotations.push_back({1, 1, make_annotation(1, {square(10.123, 20.456, 30.789, 40.001)})});
    d.annotations.push_back({2, 1, make_annotation(2, {{{50, 10}, {70, 10}, {60, 30}}})});
    return d;
}

}  // namespace

TEST_CASE("bbox and area on simple shapes") {
    const auto [bb, area] = bbox_and_area({square(0, 0, 1, 1)});
    CHECK(area == 1.0);
    CHECK(bb.x == 0.0);
    CHECK(bb.w == 1.0);
    const auto [tb, tarea] = bbox_and_area({{{0, 0}, {4, 0}, {0, 3}}});
    CHECK(tarea == 6.0);
    CHECK(tb.h == 3.0);
    // Orientation does not change the area.
    CHECK(bbox_and_area({{{0, 3}, {4, 0}, {0, 0}}}).second == 6.0);
}

TEST_CASE("shoelace area agrees with Monte-Carlo sampling") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 5; ++t) {
        const Polygon p = oracle::random_star_polygon(rng, 50, 50, 10, 40, 9);
        const double area = make_annotation(1, {p}).area;
        const double mc = oracle::monte_carlo_area(p, 100000, 100 + t);
        CHECK(std::abs(area - mc) / area < 0.02);
    }
}

TEST_CASE("degenerate polygons are rejected") {
    CHECK_THROWS_AS(make_annotation(1, {{{0, 0}, {1, 1}}}), InvalidArgument);
    CHECK_THROWS_AS(make_annotation(1, {{{0, 0}, {1, 1}, {0, 0}}}), InvalidArgument);
    CHECK_THROWS_AS(make_annotation(1, {{{0, 0}, {1, NAN}, {0, 1}}}), InvalidArgument);
}

TEST_CASE("identity transform and quarter-turn composition") {
    const Annotation a = make_annotation(3, {square(10, 20, 30, 35), {{1, 1}, {9, 2}, {4, 7}}});
    const FrameSize f{100, 60};
    check_same_points(transform_annotation(a, f, f, 0, {}), a, 0.0);

    Annotation r = a;
    FrameSize frame = f;
    for (int k = 0; k < 4; ++k) {
        r = transform_annotation(r, frame, frame, 1, {});
        frame = rotated_frame(frame, 1);
    }
    CHECK(frame.w == f.w);
    check_same_points(r, a, 0.0);
    check_same_points(transform_annotation(transform_annotation(a, f, f, 2, {}), f, f, 2, {}), a, 0.0);

    const Annotation k1 = transform_annotation(a, f, f, 1, {});
    CHECK(k1.polygons[0][0] == Point{60 - 20, 10});
    const Annotation k3 = transform_annotation(a, f, f, 3, {});
    CHECK(k3.polygons[0][0] == Point{20, 100 - 10});
}

TEST_CASE("rotated square matches the rotated rasterization") {
    const Annotation a = make_annotation(1, {square(10, 20, 40, 60)});
    const BinaryMask m = rasterize_polygons(a.polygons, 100, 100);
    const BinaryMask rm = rotate_quarter(m, 1);
    const Annotation t = transform_annotation(a, {100, 100}, {100, 100}, 1, {5, 5});
    const BBox raster = mask_bbox(rm);
    CHECK(std::abs(t.bbox.x - (raster.x + 5)) <= 1.0);
    CHECK(std::abs(t.bbox.y - (raster.y + 5)) <= 1.0);
    CHECK(std::abs(t.bbox.w - raster.w) <= 1.0);
    CHECK(std::abs(t.bbox.h - raster.h) <= 1.0);
}

TEST_CASE("transform checks points against the source frame") {
    const Annotation a = make_annotation(1, {square(10, 20, 40, 60)});
    CHECK_THROWS_AS(transform_annotation(a, {30, 30}, {30, 30}, 0, {}), InvalidArgument);
    CHECK_THROWS_AS(transform_annotation(a, {100, 100}, {50, 50}, 5, {}), InvalidArgument);
    const Annotation half = transform_annotation(a, {100, 100}, {50, 50}, 0, {});
    CHECK(half.area == doctest::Approx(a.area / 4));
}

TEST_CASE("rasterizer agrees with the winding-number oracle") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
        const Polygon p = oracle::random_star_polygon(rng, 32, 30, 5, 25, 7 + t);
        const BinaryMask got = rasterize_polygons({p}, 64, 60);
        const BinaryMask want = oracle::winding_rasterize({p}, 64, 60);
        CHECK(got == want);
    }
}

TEST_CASE("polygons_from_json accepts both layouts") {
    const auto a = polygons_from_json(json::parse(R"({"polygons": [[0,0, 4,0, 4,4]]})"));
    REQUIRE(a.size() == 1);
    CHECK(a[0][1] == Point{4, 0});
    const auto b = polygons_from_json(json::parse(R"({"segmentation": [[0,0, 4,0, 4,4], [5,5,6,5,6,6]]})"));
    CHECK(b.size() == 2);
    CHECK_THROWS(polygons_from_json(json::parse(R"({"polygons": [[0,0, 4]]})")));
    CHECK_THROWS(polygons_from_json(json::parse(R"({"other": 1})")));
}

TEST_CASE("coordinate quantization") {
    CHECK(quantize_coordinate(1.234) == 1.23);
    CHECK(quantize_coordinate(1.235000001) == 1.24);
    CHECK(!std::signbit(quantize_coordinate(-0.001)));
}

TEST_CASE("empty dataset exports to the minimal document") {
    CHECK(coco_export(CocoDataset{}) == R"({"images":[],"annotations":[],"categories":[]})");
}

TEST_CASE("export validates references before writing") {
    CocoDataset d = small_dataset();
    d.annotations[1].image_id = 9;
    CHECK_THROWS_AS(coco_export(d), InvalidArgument);
    d = small_dataset();
    d.annotations[1].ann.category_id = 9;
    CHECK_THROWS_AS(coco_export(d), InvalidArgument);
    d = small_dataset();
    d.annotations[1].id = 1;
    CHECK_THROWS_AS(coco_export(d), InvalidArgument);
}

TEST_CASE("export, validate, import round trip") {
    const CocoDataset d = small_dataset();
    const std::string text = coco_export(d);
    const json doc = json::parse(text);
    CHECK(validate_coco(doc).empty());
    const auto& seg = doc["annotations"][0]["segmentation"][0];
    CHECK(seg[0].get<double>() == 10.12);
    CHECK(seg[1].get<double>() == 20.46);
    const auto& bbox = doc["annotations"][0]["bbox"];
    CHECK(bbox[0].get<double>() == 10.12);
    CHECK(bbox[2].get<double>() == doctest::Approx(30.79 - 10.12));

    const CocoDataset back = coco_import(text);
    CHECK(back.images.size() == 1);
    CHECK(back.categories[1].name == "bottle");
    CHECK(back.annotations[1].ann.polygons[0][2] == Point{60, 30});
    CHECK(coco_export(back) == text);
}

TEST_CASE("validate_coco reports structural problems") {
    json doc = json::parse(coco_export(small_dataset()));
    CHECK(!validate_coco(json::parse("[]")).empty());

    json bad = doc;
    bad["annotations"][0]["image_id"] = 42;
    CHECK(!validate_coco(bad).empty());

    bad = doc;
    bad["annotations"][0]["segmentation"][0][0] = 500.0;
    CHECK(!validate_coco(bad).empty());

    bad = doc;
    bad["annotations"][0]["bbox"][0] = 0.0;
    CHECK(!validate_coco(bad).empty());

    bad = doc;
    bad["annotations"][0]["iscrowd"] = 2;
    CHECK(!validate_coco(bad).empty());

    bad = doc;
    bad["annotations"][0]["segmentation"][0] = json::array({1.0, 2.0, 3.0, 4.0});
    CHECK(!validate_coco(bad).empty());

    CHECK_THROWS_AS(coco_import(bad.dump()), FormatError);
    CHECK_THROWS_AS(coco_import("{not json"), FormatError);
}
