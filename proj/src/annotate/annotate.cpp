#include "iburd/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "iburd/error.hpp"

namespace iburd {

namespace {

using ordered_json = nlohmann::ordered_json;

std::size_t distinct_points(const Polygon& poly) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(poly.size());
    for (const auto& p : poly) {
        pts.emplace_back(p.x, p.y);
    }
    std::sort(pts.begin(), pts.end());
    return static_cast<std::size_t>(std::unique(pts.begin(), pts.end()) - pts.begin());
}

void check_polygons(const std::vector<Polygon>& polygons) {
    if (polygons.empty()) {
        throw InvalidArgument("annotation has no polygons");
    }
    for (const auto& poly : polygons) {
        if (distinct_points(poly) < 3) {
            throw InvalidArgument("degenerate polygon: fewer than 3 distinct points");
        }
        for (const auto& p : poly) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                throw InvalidArgument("polygon has a non-finite coordinate");
            }
        }
    }
}

Point rotate_point(Point p, FrameSize frame, int k) {
    switch (k) {
        case 0: return p;
        case 1: return {frame.h - p.y, p.x};
        case 2: return {frame.w - p.x, frame.h - p.y};
        default: return {p.y, frame.w - p.x};
    }
}

}  // namespace

std::pair<BBox, double> bbox_and_area(const std::vector<Polygon>& polygons) {
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = min_x;
    double max_x = -min_x;
    double max_y = -min_x;
    double area = 0.0;
    for (const auto& poly : polygons) {
        double twice = 0.0;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Point& a = poly[i];
            const Point& b = poly[(i + 1) % poly.size()];
            twice += a.x * b.y - b.x * a.y;
            min_x = std::min(min_x, a.x);
            min_y = std::min(min_y, a.y);
            max_x = std::max(max_x, a.x);
            max_y = std::max(max_y, a.y);
        }
        area += std::abs(twice) * 0.5;
    }
    if (min_x > max_x) {
        return {BBox{}, 0.0};
    }
    return {BBox{min_x, min_y, max_x - min_x, max_y - min_y}, area};
}

Annotation make_annotation(int category_id, std::vector<Polygon> polygons) {
    check_polygons(polygons);
    Annotation ann;
    ann.category_id = category_id;
    ann.polygons = std::move(polygons);
    std::tie(ann.bbox, ann.area) = bbox_and_area(ann.polygons);
    return ann;
}

FrameSize rotated_frame(FrameSize frame, int rot_k) {
    return (rot_k % 2 == 1) ? FrameSize{frame.h, frame.w} : frame;
}

Annotation transform_annotation(const Annotation& ann, FrameSize src, FrameSize scaled, int rot_k,
                                Translation offset) {
    if (rot_k < 0 || rot_k > 3) {
        throw InvalidArgument("quarter rotation count must be in 0..3");
    }
    if (!(src.w > 0.0 && src.h > 0.0 && scaled.w > 0.0 && scaled.h > 0.0)) {
        throw InvalidArgument("annotation frames must have positive size");
    }
    constexpr double kSlack = 1e-9;
    const double sx = scaled.w / src.w;
    const double sy = scaled.h / src.h;
    std::vector<Polygon> out;
    out.reserve(ann.polygons.size());
    for (const auto& poly : ann.polygons) {
        Polygon mapped;
        mapped.reserve(poly.size());
        for (const auto& p : poly) {
            if (p.x < -kSlack || p.y < -kSlack || p.x > src.w + kSlack || p.y > src.h + kSlack) {
                throw InvalidArgument("annotation point lies outside its source frame");
            }
            // Identity scales skip the multiply so unscaled transforms are exact.
            const Point s{sx == 1.0 ? p.x : p.x * sx, sy == 1.0 ? p.y : p.y * sy};
            const Point r = rotate_point(s, scaled, rot_k);
            mapped.push_back({r.x + offset.x, r.y + offset.y});
        }
        out.push_back(std::move(mapped));
    }
    return make_annotation(ann.category_id, std::move(out));
}

BinaryMask rasterize_polygons(const std::vector<Polygon>& polygons, int width, int height) {
    BinaryMask mask(height, width);
    std::vector<double> crossings;
    for (const auto& poly : polygons) {
        for (int y = 0; y < height; ++y) {
            const double cy = y + 0.5;
            crossings.clear();
            for (std::size_t i = 0; i < poly.size(); ++i) {
                const Point& a = poly[i];
                const Point& b = poly[(i + 1) % poly.size()];
                if ((a.y <= cy) != (b.y <= cy)) {
                    crossings.push_back(a.x + (cy - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
            std::sort(crossings.begin(), crossings.end());
            for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
                const int x0 = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
                const int x1 = std::min(width - 1, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)) - 1);
                for (int x = x0; x <= x1; ++x) {
                    mask.set(y, x, true);
                }
            }
        }
    }
    return mask;
}

std::vector<Polygon> polygons_from_json(const nlohmann::json& doc) {
    const char* key = doc.contains("polygons") ? "polygons" : "segmentation";
    if (!doc.is_object() || !doc.contains(key) || !doc[key].is_array()) {
        throw FormatError("annotation file needs a 'polygons' or 'segmentation' array");
    }
    std::vector<Polygon> polygons;
    for (const auto& flat : doc[key]) {
        if (!flat.is_array() || flat.size() % 2 != 0) {
            throw FormatError("polygon must be a flat list of x,y pairs");
        }
        Polygon poly;
        for (std::size_t i = 0; i < flat.size(); i += 2) {
            if (!flat[i].is_number() || !flat[i + 1].is_number()) {
                throw FormatError("polygon coordinates must be numbers");
            }
            poly.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
        }
        polygons.push_back(std::move(poly));
    }
    return polygons;
}

double quantize_coordinate(double v) {
    const double q = std::round(v * 100.0) / 100.0;
    return q == 0.0 ? 0.0 : q;  // no negative zero in the output
}

ordered_json coco_to_json(const CocoDataset& dataset) {
    std::set<int> image_ids;
    std::set<int> category_ids;
    std::set<int> annotation_ids;
    for (const auto& img : dataset.images) {
        if (!image_ids.insert(img.id).second) {
            throw InvalidArgument("duplicate image id " + std::to_string(img.id));
        }
    }
    for (const auto& cat : dataset.categories) {
        if (!category_ids.insert(cat.id).second) {
            throw InvalidArgument("duplicate category id " + std::to_string(cat.id));
        }
    }
    for (const auto& a : dataset.annotations) {
        if (!annotation_ids.insert(a.id).second) {
            throw InvalidArgument("duplicate annotation id " + std::to_string(a.id));
        }
        if (!image_ids.contains(a.image_id)) {
            throw InvalidArgument("annotation " + std::to_string(a.id) + " references missing image_id " +
                                  std::to_string(a.image_id));
        }
        if (!category_ids.contains(a.ann.category_id)) {
            throw InvalidArgument("annotation " + std::to_string(a.id) + " references missing category_id " +
                                  std::to_string(a.ann.category_id));
        }
        check_polygons(a.ann.polygons);
    }

    ordered_json doc;
    doc["images"] = ordered_json::array();
    for (const auto& img : dataset.images) {
        ordered_json j;
        j["id"] = img.id;
        j["file_name"] = img.file_name;
        j["width"] = img.width;
        j["height"] = img.height;
        doc["images"].push_back(std::move(j));
    }
    doc["annotations"] = ordered_json::array();
    for (const auto& a : dataset.annotations) {
        std::vector<Polygon> quantized;
        ordered_json segmentation = ordered_json::array();
        for (const auto& poly : a.ann.polygons) {
            Polygon q;
            ordered_json flat = ordered_json::array();
            for (const auto& p : poly) {
                q.push_back({quantize_coordinate(p.x), quantize_coordinate(p.y)});
                flat.push_back(q.back().x);
                flat.push_back(q.back().y);
            }
            quantized.push_back(std::move(q));
            segmentation.push_back(std::move(flat));
        }
        const auto [box, area] = bbox_and_area(quantized);
        ordered_json j;
        j["id"] = a.id;
        j["image_id"] = a.image_id;
        j["category_id"] = a.ann.category_id;
        j["segmentation"] = std::move(segmentation);
        j["area"] = quantize_coordinate(area);
        j["bbox"] = {quantize_coordinate(box.x), quantize_coordinate(box.y), quantize_coordinate(box.w),
                     quantize_coordinate(box.h)};
        j["iscrowd"] = a.ann.iscrowd;
        doc["annotations"].push_back(std::move(j));
    }
    doc["categories"] = ordered_json::array();
    for (const auto& cat : dataset.categories) {
        ordered_json j;
        j["id"] = cat.id;
        j["name"] = cat.name;
        doc["categories"].push_back(std::move(j));
    }
    return doc;
}

std::string coco_export(const CocoDataset& dataset) { return coco_to_json(dataset).dump(); }

CocoDataset coco_import(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("COCO document is not valid JSON: ") + e.what());
    }
    if (const auto problems = validate_coco(doc); !problems.empty()) {
        throw FormatError("invalid COCO document: " + problems.front());
    }
    CocoDataset ds;
    for (const auto& j : doc["images"]) {
        ds.images.push_back({j["id"].get<int>(), j["file_name"].get<std::string>(), j["width"].get<int>(),
                             j["height"].get<int>()});
    }
    for (const auto& j : doc["categories"]) {
        ds.categories.push_back({j["id"].get<int>(), j["name"].get<std::string>()});
    }
    for (const auto& j : doc["annotations"]) {
        std::vector<Polygon> polys;
        for (const auto& flat : j["segmentation"]) {
            Polygon poly;
            for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
                poly.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
            }
            polys.push_back(std::move(poly));
        }
        CocoAnnotation a;
        a.id = j["id"].get<int>();
        a.image_id = j["image_id"].get<int>();
        a.ann = make_annotation(j["category_id"].get<int>(), std::move(polys));
        a.ann.iscrowd = j.value("iscrowd", 0);
        ds.annotations.push_back(std::move(a));
    }
    return ds;
}

std::vector<std::string> validate_coco(const nlohmann::json& doc) {
    std::vector<std::string> problems;
    auto fail = [&problems](std::string msg) { problems.push_back(std::move(msg)); };
    if (!doc.is_object()) {
        fail("document is not an object");
        return problems;
    }
    for (const char* key : {"images", "annotations", "categories"}) {
        if (!doc.contains(key) || !doc[key].is_array()) {
            fail(std::string("missing array '") + key + "'");
        }
    }
    if (!problems.empty()) {
        return problems;
    }

    struct Dims {
        int w;
        int h;
    };
    std::map<long long, Dims> images;
    for (const auto& img : doc["images"]) {
        if (!img.is_object() || !img.contains("id") || !img["id"].is_number_integer() ||
            !img.contains("file_name") || !img["file_name"].is_string() || !img.contains("width") ||
            !img["width"].is_number_integer() || !img.contains("height") || !img["height"].is_number_integer()) {
            fail("image entry lacks id/file_name/width/height");
            continue;
        }
        const long long id = img["id"].get<long long>();
        if (img["width"].get<int>() <= 0 || img["height"].get<int>() <= 0) {
            fail("image " + std::to_string(id) + " has non-positive size");
        }
        if (!images.emplace(id, Dims{img["width"].get<int>(), img["height"].get<int>()}).second) {
            fail("duplicate image id " + std::to_string(id));
        }
    }
    std::set<long long> categories;
    for (const auto& cat : doc["categories"]) {
        if (!cat.is_object() || !cat.contains("id") || !cat["id"].is_number_integer() || !cat.contains("name") ||
            !cat["name"].is_string()) {
            fail("category entry lacks id/name");
            continue;
        }
        if (!categories.insert(cat["id"].get<long long>()).second) {
            fail("duplicate category id " + std::to_string(cat["id"].get<long long>()));
        }
    }
    std::set<long long> ann_ids;
    for (const auto& a : doc["annotations"]) {
        if (!a.is_object()) {
            fail("annotation entry is not an object");
            continue;
        }
        bool shape_ok = true;
        for (const char* key : {"id", "image_id", "category_id", "iscrowd"}) {
            if (!a.contains(key) || !a[key].is_number_integer()) {
                fail(std::string("annotation lacks integer '") + key + "'");
                shape_ok = false;
            }
        }
        if (!a.contains("segmentation") || !a["segmentation"].is_array() || !a.contains("bbox") ||
            !a["bbox"].is_array() || a["bbox"].size() != 4 || !a.contains("area") || !a["area"].is_number()) {
            fail("annotation lacks segmentation/bbox/area");
            shape_ok = false;
        }
        if (!shape_ok) {
            continue;
        }
        const long long id = a["id"].get<long long>();
        const std::string tag = "annotation " + std::to_string(id);
        if (!ann_ids.insert(id).second) {
            fail("duplicate " + tag);
        }
        const auto img = images.find(a["image_id"].get<long long>());
        if (img == images.end()) {
            fail(tag + " references a missing image");
        }
        if (!categories.contains(a["category_id"].get<long long>())) {
            fail(tag + " references a missing category");
        }
        const int iscrowd = a["iscrowd"].get<int>();
        if (iscrowd != 0 && iscrowd != 1) {
            fail(tag + " has iscrowd outside {0,1}");
        }
        if (a["area"].get<double>() < 0.0) {
            fail(tag + " has negative area");
        }
        double bx[4];
        bool bbox_numeric = true;
        for (int i = 0; i < 4; ++i) {
            if (!a["bbox"][static_cast<std::size_t>(i)].is_number()) {
                bbox_numeric = false;
                break;
            }
            bx[i] = a["bbox"][static_cast<std::size_t>(i)].get<double>();
        }
        if (!bbox_numeric || bx[2] < 0.0 || bx[3] < 0.0) {
            fail(tag + " has a malformed bbox");
            continue;
        }
        if (a["segmentation"].empty()) {
            fail(tag + " has an empty segmentation");
        }
        double min_x = std::numeric_limits<double>::infinity();
        double min_y = min_x;
        double max_x = -min_x;
        double max_y = -min_x;
        for (const auto& flat : a["segmentation"]) {
            if (!flat.is_array() || flat.size() < 6 || flat.size() % 2 != 0) {
                fail(tag + " has a polygon with fewer than 3 points or an odd coordinate count");
                continue;
            }
            for (std::size_t i = 0; i < flat.size(); i += 2) {
                if (!flat[i].is_number() || !flat[i + 1].is_number()) {
                    fail(tag + " has a non-numeric coordinate");
                    break;
                }
                const double x = flat[i].get<double>();
                const double y = flat[i + 1].get<double>();
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
                if (img != images.end() &&
                    (x < 0.0 || y < 0.0 || x > img->second.w || y > img->second.h)) {
                    fail(tag + " has a point outside its image");
                }
            }
        }
        constexpr double kTol = 1e-6;
        if (min_x <= max_x &&
            (std::abs(bx[0] - min_x) > kTol || std::abs(bx[1] - min_y) > kTol ||
             std::abs(bx[0] + bx[2] - max_x) > 0.01 + kTol || std::abs(bx[1] + bx[3] - max_y) > 0.01 + kTol)) {
            fail(tag + " bbox is not the tight bound of its segmentation");
        }
    }
    return problems;
}

}  // namespace iburd
