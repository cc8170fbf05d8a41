#pragma once

#include <string>
#include <utility>
#include <vector>

#include "iburd/imgcore.hpp"
#include "json.hpp"

namespace iburd {

/// Continuous pixel coordinates: origin at the top-left corner of the top-left
/// pixel, x to the right, y down.
struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

using Polygon = std::vector<Point>;

struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

struct Annotation {
    int category_id = 0;
    std::vector<Polygon> polygons;
    BBox bbox;
    double area = 0.0;
    int iscrowd = 0;
};

/// Tight bound over every point and the sum of absolute shoelace areas.
std::pair<BBox, double> bbox_and_area(const std::vector<Polygon>& polygons);

/// Builds an annotation and derives bbox/area. Every polygon needs at least
/// three distinct points.
Annotation make_annotation(int category_id, std::vector<Polygon> polygons);

struct FrameSize {
    double w = 0.0;
    double h = 0.0;
};

struct Translation {
    double x = 0.0;
    double y = 0.0;
};

/**
 * Maps an annotation through the patch geometry: scale from `src` to
 * `scaled`, then `rot_k` clockwise quarter turns inside the scaled frame,
 * then a translation. Rotation is formulated on the frame (not pixel centres)
 * so four quarter turns compose to the identity:
 *   k=1: (x,y) -> (h'-y, x);  k=2: (w'-x, h'-y);  k=3: (y, w'-x).
 */
Annotation transform_annotation(const Annotation& ann, FrameSize src, FrameSize scaled, int rot_k,
                                Translation offset);

/// Frame size after `rot_k` quarter turns.
FrameSize rotated_frame(FrameSize frame, int rot_k);

/// Pixels whose centre lies inside any polygon (even-odd rule per polygon).
BinaryMask rasterize_polygons(const std::vector<Polygon>& polygons, int width, int height);

/// Reads polygons from {"polygons": [[x1,y1,...], ...]} or the COCO-style
/// {"segmentation": [...]} key.
std::vector<Polygon> polygons_from_json(const nlohmann::json& doc);

struct CocoImage {
    int id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;
};

struct CocoCategory {
    int id = 0;
    std::string name;
};

struct CocoAnnotation {
    int id = 0;
    int image_id = 0;
    Annotation ann;
};

struct CocoDataset {
    std::vector<CocoImage> images;
    std::vector<CocoAnnotation> annotations;
    std::vector<CocoCategory> categories;
};

/// Round to the 2-decimal grid used for exported coordinates.
double quantize_coordinate(double v);

/// Serializes with fixed key order. Coordinates are quantized to 2 decimals
/// and bbox/area are recomputed from the quantized polygons. Throws
/// InvalidArgument on duplicate ids or dangling references before producing
/// any output.
std::string coco_export(const CocoDataset& dataset);
nlohmann::ordered_json coco_to_json(const CocoDataset& dataset);

/// Parses a COCO document (polygon segmentations only).
CocoDataset coco_import(const std::string& text);

/// Independent structural check of a COCO document. Returns human-readable
/// problems; empty means valid.
std::vector<std::string> validate_coco(const nlohmann::json& doc);

}  // namespace iburd
