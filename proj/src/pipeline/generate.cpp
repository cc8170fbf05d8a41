#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "iburd/error.hpp"
#include "iburd/pipeline.hpp"
#include "iburd/vgg.hpp"

namespace iburd {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct LoadedSource {
    ImagePlane image;
    BinaryMask mask;
    Annotation annotation;
};

struct LoadedBackground {
    ImagePlane image;
    double blur_mean = 0.0;
    double lambda = 0.0;
};

struct ImageOutcome {
    bool ok = false;
    std::string file_name;
    std::vector<Annotation> annotations;
    ordered_json record;
};

BinaryMask mask_from_png(const fs::path& path, int height, int width) {
    LoadedImage loaded = load_png(path);
    if (loaded.image.height() != height || loaded.image.width() != width) {
        throw InvalidArgument("mask " + path.string() + " does not match its source image size");
    }
    if (loaded.alpha) {
        return *loaded.alpha;
    }
    const ImagePlane gray = to_gray(loaded.image);
    BinaryMask mask(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            mask.set(y, x, gray.at(0, y, x) > 0.5);
        }
    }
    return mask;
}

LoadedSource load_source(const SourceEntry& entry, int category_id) {
    LoadedImage loaded = load_png(entry.image);
    std::ifstream in(entry.annotation);
    if (!in) {
        throw IoError("cannot open annotation " + entry.annotation.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("annotation " + entry.annotation.string() + " is not valid JSON: " + e.what());
    }
    LoadedSource src;
    src.annotation = make_annotation(category_id, polygons_from_json(doc));
    const int h = loaded.image.height();
    const int w = loaded.image.width();
    if (entry.mask) {
        src.mask = mask_from_png(*entry.mask, h, w);
    } else if (loaded.alpha) {
        src.mask = *loaded.alpha;
    } else {
        src.mask = rasterize_polygons(src.annotation.polygons, w, h);
    }
    if (!src.mask.any()) {
        throw InvalidArgument("source " + entry.image.string() + " has an empty object mask");
    }
    src.image = to_rgb(loaded.image);
    return src;
}

ordered_json loss_json(const LossBreakdown& l) {
    return {{"total", l.total}, {"style", l.style}, {"content", l.content}, {"tv", l.tv}};
}

ordered_json job_json(const BlendJob& job) {
    ordered_json j;
    j["source"] = job.source;
    j["background"] = job.background;
    j["scale"] = job.scale;
    j["rotation_degrees"] = job.rot_k * 90;
    j["cell"] = job.cell;
    j["offset"] = {job.offset.x, job.offset.y};
    j["gradient_mode"] = std::string(to_string(job.mode));
    return j;
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

}  // namespace

GenerateSummary generate(const PipelineConfig& config, const LogSink& log) {
    config.validate();
    std::mutex log_mutex;
    auto say = [&](const std::string& line) {
        if (log) {
            std::lock_guard lock(log_mutex);
            log(line);
        }
    };

    const int total = config.total_images();
    std::map<std::string, int> category_ids;
    for (const auto& c : config.categories) {
        category_ids[c.name] = c.id;
    }

    std::vector<LoadedSource> sources;
    std::vector<LoadedBackground> backgrounds;
    std::optional<VggPrefix> net;
    if (total > 0) {
        for (const auto& s : config.sources) {
            sources.push_back(load_source(s, category_ids.at(s.category)));
        }
        for (const auto& b : config.backgrounds) {
            LoadedBackground bg;
            bg.image = to_rgb(load_png(b).image);
            if (bg.image.width() != config.canvas || bg.image.height() != config.canvas) {
                bg.image = resize_bilinear(bg.image, config.canvas, config.canvas);
            }
            bg.blur_mean = blurriness_mean(bg.image, config.blur);
            bg.lambda = config.schedule.lambda_for(bg.blur_mean);
            backgrounds.push_back(std::move(bg));
        }
        if (config.iterations > 0) {
            net = load_weights(*config.weights);
        }
    }

    const fs::path image_dir = config.output / "images";
    fs::create_directories(image_dir);
    const PlacementConfig placement = config.placement();

    // Image index -> number of objects, following counts[0..3] in order.
    std::vector<int> object_counts;
    for (int n = 0; n < 4; ++n) {
        object_counts.insert(object_counts.end(), static_cast<std::size_t>(config.counts[n]), n + 1);
    }

    std::vector<ImageOutcome> outcomes(static_cast<std::size_t>(total));
    std::atomic<int> next{0};
    std::atomic<int> failures{0};
    std::atomic<bool> stop{false};

    auto run_one = [&](int index) {
        ImageOutcome& out = outcomes[static_cast<std::size_t>(index)];
        ordered_json& rec = out.record;
        const auto started = std::chrono::steady_clock::now();
        const std::uint64_t seed = scenario_seed(config.seed, static_cast<std::uint64_t>(index));
        rec["index"] = index;
        rec["seed"] = seed;
        rec["object_count"] = object_counts[static_cast<std::size_t>(index)];
        try {
            Rng rng(seed);
            const int bg_index = static_cast<int>(rng.pick(backgrounds.size()));
            const LoadedBackground& bg = backgrounds[static_cast<std::size_t>(bg_index)];
            const std::vector<BlendJob> jobs = sample_scenario(
                rng, placement, sources.size(), bg_index, object_counts[static_cast<std::size_t>(index)]);
            rec["background"] = bg_index;
            rec["jobs"] = ordered_json::array();
            for (const auto& job : jobs) {
                rec["jobs"].push_back(job_json(job));
            }

            ImagePlane composite = bg.image;
            for (const auto& job : jobs) {
                const LoadedSource& src = sources[static_cast<std::size_t>(job.source)];
                const PreparedPatch patch = prepare_patch(src.image, src.mask, src.annotation, job.scale, job.rot_k);
                if (!patch.mask.any()) {
                    throw InvalidArgument("object mask vanished after resizing to " + std::to_string(job.scale));
                }
                composite = seamless_clone(patch.image, patch.mask, composite, job.offset, job.mode, config.poisson);
                const FrameSize frame{static_cast<double>(job.scale), static_cast<double>(job.scale)};
                out.annotations.push_back(transform_annotation(
                    patch.annotation, frame, frame, 0,
                    {static_cast<double>(job.offset.x), static_cast<double>(job.offset.y)}));
            }

            rec["blur_mean_db"] = bg.blur_mean;
            rec["lambda"] = bg.lambda;
            ImagePlane final_image = composite;
            if (net) {
                SecondPassResult sp = second_pass(composite, bg.image, bg.lambda, config.iterations, *net,
                                                  config.loss, config.lbfgs_history);
                rec["initial_loss"] = loss_json(sp.initial);
                rec["final_loss"] = loss_json(sp.final);
                rec["loss_trace"] = sp.trace.accepted_values;
                rec["lbfgs_iterations"] = sp.trace.iterations;
                rec["stop_reason"] = sp.trace.stop_reason;
                final_image = std::move(sp.image);
            } else {
                rec["initial_loss"] = nullptr;
                rec["final_loss"] = nullptr;
                rec["loss_trace"] = ordered_json::array();
            }

            char name[32];
            std::snprintf(name, sizeof name, "%06d.png", index);
            out.file_name = std::string("images/") + name;
            save_png(final_image, image_dir / name);
            rec["file_name"] = out.file_name;
            rec["error"] = nullptr;
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.annotations.clear();
            rec["file_name"] = nullptr;
            rec["error"] = e.what();
            const int failed = failures.fetch_add(1) + 1;
            if (2 * failed > total) {
                stop = true;
            }
            say("image " + std::to_string(index) + " failed: " + e.what());
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
        rec["wall_time_s"] = elapsed.count();
        if (out.ok) {
            say("image " + std::to_string(index) + " done in " + std::to_string(elapsed.count()) + " s");
        }
    };

    auto worker = [&] {
        while (!stop) {
            const int index = next.fetch_add(1);
            if (index >= total) {
                return;
            }
            run_one(index);
        }
    };
    {
        const int width = std::max(1, std::min(config.workers, total));
        std::vector<std::jthread> pool;
        for (int i = 1; i < width; ++i) {
            pool.emplace_back(worker);
        }
        worker();
    }

    GenerateSummary summary;
    summary.requested = total;
    summary.aborted = stop.load();

    CocoDataset coco;
    coco.categories = config.categories;
    ordered_json records = ordered_json::array();
    int next_annotation = 1;
    for (int i = 0; i < total; ++i) {
        ImageOutcome& out = outcomes[static_cast<std::size_t>(i)];
        if (out.record.empty()) {
            continue;  // never started because the run was aborted
        }
        if (out.ok) {
            ++summary.succeeded;
            coco.images.push_back({i + 1, out.file_name, config.canvas, config.canvas});
            for (auto& ann : out.annotations) {
                coco.annotations.push_back({next_annotation++, i + 1, std::move(ann)});
            }
        } else {
            ++summary.failed;
        }
        records.push_back(std::move(out.record));
    }
    write_file_atomic(config.output / "annotations.json", coco_export(coco));

    ordered_json manifest;
    manifest["tool"] = "iburd";
    manifest["version"] = kToolVersion;
    manifest["config_hash"] = config_hash(config);
    manifest["seed"] = config.seed;
    manifest["weights_digest"] = nullptr;
    if (net) {
        char digest[20];
        std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(net->weights_digest()));
        manifest["weights_digest"] = digest;
    }
    manifest["constants"] = manifest_constants(config);
    manifest["status"] = summary.aborted ? "aborted" : "complete";
    manifest["requested"] = summary.requested;
    manifest["succeeded"] = summary.succeeded;
    manifest["failed"] = summary.failed;
    manifest["images"] = std::move(records);
    write_file_atomic(config.output / "manifest.json", manifest.dump(2) + "\n");
    summary.manifest = std::move(manifest);
    return summary;
}

}  // namespace iburd
