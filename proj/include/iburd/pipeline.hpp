#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "iburd/blurmetric.hpp"
#include "iburd/placement.hpp"
#include "iburd/poisson.hpp"
#include "iburd/styleloss.hpp"
#include "json.hpp"

namespace iburd {

inline constexpr const char* kToolVersion = "1.0.0";

struct SourceEntry {
    std::filesystem::path image;
    std::filesystem::path annotation;
    std::optional<std::filesystem::path> mask;
    std::string category;
};

/// Which object-size preset applies when `scale_set` is not given explicitly.
enum class SourceMode { generated, trashcan };

std::vector<int> scale_preset(SourceMode mode);

struct PipelineConfig {
    std::vector<SourceEntry> sources;
    std::vector<std::filesystem::path> backgrounds;
    std::vector<CocoCategory> categories;  ///< derived from sources when empty
    std::filesystem::path output = "out";
    std::array<int, 4> counts = {0, 0, 0, 0};  ///< images with 1..4 objects
    std::uint64_t seed = 0;
    int canvas = 512;
    std::size_t iterations = 100;
    std::size_t lbfgs_history = 10;
    LossWeights loss;  ///< lambda is ignored; it comes from the schedule
    BlurOptions blur;
    LambdaSchedule schedule;
    PoissonOptions poisson;
    SourceMode source_mode = SourceMode::generated;
    std::vector<int> scale_set;  ///< empty selects the source-mode preset
    std::vector<int> rotation_set = {0, 90, 180, 270};
    GradientMode mode = GradientMode::mixed;
    std::optional<std::filesystem::path> weights;
    int workers = 1;

    std::vector<int> effective_scale_set() const;
    PlacementConfig placement() const;
    int total_images() const;

    /// Checks value ranges and that every referenced file exists.
    void validate() const;
};

/// Parses a config document; relative paths resolve against `base_dir`.
/// Missing keys take their defaults.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical serialization (every key, fixed order, paths as resolved).
nlohmann::ordered_json config_to_json(const PipelineConfig& config);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

/// The pinned generation constants recorded in every manifest.
nlohmann::ordered_json manifest_constants(const PipelineConfig& config);

struct GenerateSummary {
    int requested = 0;
    int succeeded = 0;
    int failed = 0;
    bool aborted = false;
    nlohmann::ordered_json manifest;
};

using LogSink = std::function<void(const std::string&)>;

/**
 * Runs the whole batch: per image sample a scenario, blend every job, pick
 * lambda from the background's blurriness, restyle, transform annotations and
 * write the PNG. Writes out/annotations.json and, last, out/manifest.json.
 * Image failures are recorded and skipped; when more than half of the
 * requested images fail, no further images are started and the run is marked
 * aborted (outputs are still written).
 */
GenerateSummary generate(const PipelineConfig& config, const LogSink& log = {});

}  // namespace iburd
