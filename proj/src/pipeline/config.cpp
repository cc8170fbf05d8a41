#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "iburd/error.hpp"
#include "iburd/pipeline.hpp"

namespace iburd {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::set<std::string> kTopLevelKeys = {
    "sources", "backgrounds", "categories", "output",      "counts",        "seed",         "canvas",
    "iterations", "lbfgs_history", "loss",   "blur",        "lambda_schedule", "poisson",   "source_mode",
    "scale_set", "rotation_set", "gradient_mode", "weights", "workers"};

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
T get_as(const json& doc, const char* key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
    }
}

std::string source_mode_name(SourceMode mode) { return mode == SourceMode::trashcan ? "trashcan" : "generated"; }

SourceMode parse_source_mode(const std::string& name) {
    if (name == "generated") {
        return SourceMode::generated;
    }
    if (name == "trashcan") {
        return SourceMode::trashcan;
    }
    throw InvalidArgument("unknown source_mode '" + name + "' (expected generated or trashcan)");
}

std::string grid_name(const GridSpec& g) { return std::to_string(g.rows) + "x" + std::to_string(g.cols); }

}  // namespace

std::vector<int> scale_preset(SourceMode mode) {
    if (mode == SourceMode::trashcan) {
        return {192, 256};
    }
    return {96, 128, 192, 256};
}

std::vector<int> PipelineConfig::effective_scale_set() const {
    return scale_set.empty() ? scale_preset(source_mode) : scale_set;
}

PlacementConfig PipelineConfig::placement() const {
    PlacementConfig p;
    p.canvas_w = canvas;
    p.canvas_h = canvas;
    p.scale_set = effective_scale_set();
    p.rotation_set = rotation_set;
    p.mode = mode;
    return p;
}

int PipelineConfig::total_images() const { return counts[0] + counts[1] + counts[2] + counts[3]; }

void PipelineConfig::validate() const {
    for (const int c : counts) {
        if (c < 0) {
            throw InvalidArgument("image counts must be non-negative");
        }
    }
    if (workers < 1) {
        throw InvalidArgument("workers must be at least 1");
    }
    if (lbfgs_history < 1) {
        throw InvalidArgument("lbfgs_history must be at least 1");
    }
    if (!(poisson.tol > 0.0)) {
        throw InvalidArgument("poisson tol must be positive");
    }
    if (!(blur.center_fraction > 0.0 && blur.center_fraction < 0.5) || !(blur.eps > 0.0) ||
        !(blur.intensity_scale > 0.0)) {
        throw InvalidArgument("blur options out of range");
    }
    loss.validate();
    placement().validate();
    if (total_images() > 0) {
        if (sources.empty()) {
            throw InvalidArgument("config has no sources");
        }
        if (backgrounds.empty()) {
            throw InvalidArgument("config has no backgrounds");
        }
        if (iterations > 0 && !weights) {
            throw InvalidArgument("style iterations requested but no weights archive configured");
        }
    }
    auto require_file = [](const fs::path& p) {
        if (!fs::is_regular_file(p)) {
            throw IoError("file not found: " + p.string());
        }
    };
    std::set<std::string> names;
    for (const auto& c : categories) {
        names.insert(c.name);
    }
    for (const auto& s : sources) {
        require_file(s.image);
        require_file(s.annotation);
        if (s.mask) {
            require_file(*s.mask);
        }
        if (!names.contains(s.category)) {
            throw InvalidArgument("source category '" + s.category + "' is not a configured category");
        }
    }
    for (const auto& b : backgrounds) {
        require_file(b);
    }
    if (weights && iterations > 0 && total_images() > 0) {
        require_file(*weights);
    }
}

PipelineConfig parse_config(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) {
        throw InvalidArgument("config must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (!kTopLevelKeys.contains(key)) {
            throw InvalidArgument("unknown config key '" + key + "'");
        }
    }
    PipelineConfig cfg;
    if (doc.contains("sources")) {
        for (const auto& s : doc["sources"]) {
            SourceEntry e;
            e.image = resolve(base_dir, get_as<std::string>(s, "image"));
            e.annotation = resolve(base_dir, get_as<std::string>(s, "annotation"));
            if (s.contains("mask") && !s["mask"].is_null()) {
                e.mask = resolve(base_dir, get_as<std::string>(s, "mask"));
            }
            e.category = get_as<std::string>(s, "category");
            cfg.sources.push_back(std::move(e));
        }
    }
    if (doc.contains("backgrounds")) {
        for (const auto& b : doc["backgrounds"]) {
            if (!b.is_string()) {
                throw InvalidArgument("backgrounds must be a list of paths");
            }
            cfg.backgrounds.push_back(resolve(base_dir, b.get<std::string>()));
        }
    }
    if (doc.contains("categories")) {
        for (const auto& c : doc["categories"]) {
            cfg.categories.push_back({get_as<int>(c, "id"), get_as<std::string>(c, "name")});
        }
    } else {
        std::set<std::string> seen;
        for (const auto& s : cfg.sources) {
            if (seen.insert(s.category).second) {
                cfg.categories.push_back({static_cast<int>(cfg.categories.size()) + 1, s.category});
            }
        }
    }
    if (doc.contains("output")) {
        cfg.output = resolve(base_dir, get_as<std::string>(doc, "output"));
    } else {
        cfg.output = resolve(base_dir, cfg.output.string());
    }
    if (doc.contains("counts")) {
        const auto counts = get_as<std::vector<int>>(doc, "counts");
        if (counts.size() > 4) {
            throw InvalidArgument("counts lists images with 1..4 objects (at most 4 entries)");
        }
        std::copy(counts.begin(), counts.end(), cfg.counts.begin());
    }
    if (doc.contains("seed")) {
        cfg.seed = get_as<std::uint64_t>(doc, "seed");
    }
    if (doc.contains("canvas")) {
        cfg.canvas = get_as<int>(doc, "canvas");
    }
    if (doc.contains("iterations")) {
        cfg.iterations = get_as<std::size_t>(doc, "iterations");
    }
    if (doc.contains("lbfgs_history")) {
        cfg.lbfgs_history = get_as<std::size_t>(doc, "lbfgs_history");
    }
    if (doc.contains("loss")) {
        const json& l = doc["loss"];
        cfg.loss.mu = l.value("mu", cfg.loss.mu);
        cfg.loss.nu = l.value("nu", cfg.loss.nu);
        cfg.loss.alpha = l.value("alpha", cfg.loss.alpha);
        if (l.contains("beta")) {
            const auto beta = get_as<std::vector<double>>(l, "beta");
            if (beta.size() != kTapCount) {
                throw InvalidArgument("loss.beta needs one weight per style layer (4)");
            }
            std::copy(beta.begin(), beta.end(), cfg.loss.beta.begin());
        }
    }
    if (doc.contains("blur")) {
        const json& b = doc["blur"];
        cfg.blur.center_fraction = b.value("center_fraction", cfg.blur.center_fraction);
        cfg.blur.eps = b.value("eps", cfg.blur.eps);
        cfg.blur.intensity_scale = b.value("intensity_scale", cfg.blur.intensity_scale);
    }
    if (doc.contains("lambda_schedule")) {
        std::vector<LambdaSchedule::Entry> entries;
        for (const auto& e : doc["lambda_schedule"]) {
            const json& lb = e.at("lower_bound");
            double bound = 0.0;
            if (lb.is_string() && lb.get<std::string>() == "-inf") {
                bound = -std::numeric_limits<double>::infinity();
            } else if (lb.is_number()) {
                bound = lb.get<double>();
            } else {
                throw InvalidArgument("lambda_schedule lower_bound must be a number or \"-inf\"");
            }
            entries.push_back({bound, get_as<double>(e, "lambda")});
        }
        cfg.schedule = LambdaSchedule(std::move(entries));
    }
    if (doc.contains("poisson")) {
        const json& p = doc["poisson"];
        cfg.poisson.tol = p.value("tol", cfg.poisson.tol);
        cfg.poisson.max_iter = p.value("max_iter", cfg.poisson.max_iter);
    }
    if (doc.contains("source_mode")) {
        cfg.source_mode = parse_source_mode(get_as<std::string>(doc, "source_mode"));
    }
    if (doc.contains("scale_set") && !doc["scale_set"].is_null()) {
        cfg.scale_set = get_as<std::vector<int>>(doc, "scale_set");
    }
    if (doc.contains("rotation_set")) {
        cfg.rotation_set = get_as<std::vector<int>>(doc, "rotation_set");
    }
    if (doc.contains("gradient_mode")) {
        cfg.mode = parse_gradient_mode(get_as<std::string>(doc, "gradient_mode"));
    }
    if (doc.contains("weights") && !doc["weights"].is_null()) {
        cfg.weights = resolve(base_dir, get_as<std::string>(doc, "weights"));
    }
    if (doc.contains("workers")) {
        cfg.workers = get_as<int>(doc, "workers");
    }
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config: " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc, fs::absolute(path).parent_path());
}

ordered_json config_to_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["sources"] = ordered_json::array();
    for (const auto& s : cfg.sources) {
        ordered_json e;
        e["image"] = s.image.string();
        e["annotation"] = s.annotation.string();
        e["mask"] = s.mask ? ordered_json(s.mask->string()) : ordered_json(nullptr);
        e["category"] = s.category;
        j["sources"].push_back(std::move(e));
    }
    j["backgrounds"] = ordered_json::array();
    for (const auto& b : cfg.backgrounds) {
        j["backgrounds"].push_back(b.string());
    }
    j["categories"] = ordered_json::array();
    for (const auto& c : cfg.categories) {
        j["categories"].push_back({{"id", c.id}, {"name", c.name}});
    }
    j["output"] = cfg.output.string();
    j["counts"] = cfg.counts;
    j["seed"] = cfg.seed;
    j["canvas"] = cfg.canvas;
    j["iterations"] = cfg.iterations;
    j["lbfgs_history"] = cfg.lbfgs_history;
    j["loss"] = {{"mu", cfg.loss.mu}, {"nu", cfg.loss.nu}, {"alpha", cfg.loss.alpha}, {"beta", cfg.loss.beta}};
    j["blur"] = {{"center_fraction", cfg.blur.center_fraction},
                 {"eps", cfg.blur.eps},
                 {"intensity_scale", cfg.blur.intensity_scale}};
    j["lambda_schedule"] = ordered_json::array();
    for (const auto& e : cfg.schedule.entries()) {
        ordered_json entry;
        entry["lower_bound"] = std::isinf(e.lower_bound) ? ordered_json("-inf") : ordered_json(e.lower_bound);
        entry["lambda"] = e.lambda;
        j["lambda_schedule"].push_back(std::move(entry));
    }
    j["poisson"] = {{"tol", cfg.poisson.tol}, {"max_iter", cfg.poisson.max_iter}};
    j["source_mode"] = source_mode_name(cfg.source_mode);
    j["scale_set"] = cfg.scale_set.empty() ? ordered_json(nullptr) : ordered_json(cfg.scale_set);
    j["rotation_set"] = cfg.rotation_set;
    j["gradient_mode"] = std::string(to_string(cfg.mode));
    j["weights"] = cfg.weights ? ordered_json(cfg.weights->string()) : ordered_json(nullptr);
    j["workers"] = cfg.workers;
    return j;
}

std::string config_hash(const PipelineConfig& cfg) {
    ordered_json j = config_to_json(cfg);
    // Worker count and output location do not change generated bytes.
    j.erase("workers");
    j.erase("output");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

ordered_json manifest_constants(const PipelineConfig& cfg) {
    ordered_json c;
    c["mu"] = cfg.loss.mu;
    c["nu"] = cfg.loss.nu;
    c["alpha"] = cfg.loss.alpha;
    c["beta"] = cfg.loss.beta;
    c["iterations"] = cfg.iterations;
    c["lbfgs_history"] = cfg.lbfgs_history;
    c["canvas"] = {{"width", cfg.canvas}, {"height", cfg.canvas}};
    c["rotation_set_degrees"] = cfg.rotation_set;
    c["source_mode"] = source_mode_name(cfg.source_mode);
    c["scale_set"] = cfg.effective_scale_set();
    c["scale_presets"] = {{"generated", scale_preset(SourceMode::generated)},
                          {"trashcan", scale_preset(SourceMode::trashcan)}};
    ordered_json single = ordered_json::object();
    ordered_json multi = ordered_json::object();
    for (const int s : cfg.effective_scale_set()) {
        single[std::to_string(s)] = grid_name(grid_for(cfg.canvas, cfg.canvas, s, 1));
    }
    const auto scales = cfg.effective_scale_set();
    const int largest = *std::max_element(scales.begin(), scales.end());
    for (int n = 2; n <= 4; ++n) {
        multi[std::to_string(n)] = grid_name(grid_for(cfg.canvas, cfg.canvas, largest, n));
    }
    c["grid_rule"] = {{"single_object", std::move(single)}, {"multi_object", std::move(multi)}};
    c["lambda_schedule"] = config_to_json(cfg)["lambda_schedule"];
    c["blur"] = {{"center_fraction", cfg.blur.center_fraction},
                 {"eps", cfg.blur.eps},
                 {"intensity_scale", cfg.blur.intensity_scale}};
    c["gradient_mode"] = std::string(to_string(cfg.mode));
    c["poisson"] = {{"tol", cfg.poisson.tol}, {"max_iter", cfg.poisson.max_iter}};
    return c;
}

}  // namespace iburd
