#include "iburd/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "iburd/error.hpp"
#include "iburd/pipeline.hpp"
#include "iburd/tensor_archive.hpp"
#include "iburd/vgg.hpp"

namespace iburd {

namespace {

namespace fs = std::filesystem;

constexpr int kUsage = 1;
constexpr int kFailure = 2;

struct UsageError : Error {
    using Error::Error;
};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void require_existing(const fs::path& path, const char* what) {
    if (!fs::exists(path)) {
        throw UsageError(std::string(what) + " not found: " + path.string());
    }
}

std::string hex32(std::uint32_t v) {
    char buf[12];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Synthetic underwater detection data: blend, restyle and annotate objects", "iburd"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "Generate a blended, restyled COCO dataset from a config");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool print_defaults = false;
    gen->add_option("--config", config_path, "JSON config file");
    gen->add_option("--seed", seed, "Override the master seed");
    gen->add_option("--out", out_dir, "Override the output directory");
    gen->add_flag("--print-defaults", print_defaults, "Print the default config and exit");

    auto* blend = app.add_subcommand("blend", "Poisson-blend one object into a background");
    std::string source, mask, background, blend_out = "blend.png", mode = "mixed";
    int bx = 0, by = 0, scale = 0, rot = 0;
    blend->add_option("--source", source, "Source image (PNG)")->required();
    blend->add_option("--mask", mask, "Object mask (PNG)")->required();
    blend->add_option("--background", background, "Background image (PNG)")->required();
    blend->add_option("--x", bx, "Left edge of the patch in the background")->required();
    blend->add_option("--y", by, "Top edge of the patch in the background")->required();
    blend->add_option("--scale", scale, "Patch side in pixels")->required();
    blend->add_option("--rot", rot, "Clockwise rotation in degrees (0, 90, 180, 270)");
    blend->add_option("--mode", mode, "Guidance gradients: source or mixed");
    blend->add_option("--out", blend_out, "Output PNG");

    auto* blur = app.add_subcommand("blur", "Print the blurriness mean (dB) and its style weight");
    std::string blur_image;
    blur->add_option("--image", blur_image, "Image (PNG)")->required();

    auto* coco = app.add_subcommand("export-coco", "Validate a COCO file and rewrite it canonically");
    std::string coco_in, coco_out;
    coco->add_option("--input", coco_in, "COCO JSON to read")->required();
    coco->add_option("--out", coco_out, "Where to write the canonical JSON")->required();

    auto* weights = app.add_subcommand("validate-weights", "Check a weight archive against the network contract");
    std::string archive;
    weights->add_option("--archive", archive, "Weight archive")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            app.exit(e, out, err);
            return 0;
        }
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (*gen) {
            if (print_defaults) {
                out << config_to_json(PipelineConfig{}).dump(2) << "\n";
                return 0;
            }
            if (config_path.empty()) {
                throw UsageError("generate needs --config (or --print-defaults)");
            }
            require_existing(config_path, "config file");
            PipelineConfig cfg = load_config(config_path);
            if (seed) {
                cfg.seed = *seed;
            }
            if (!out_dir.empty()) {
                cfg.output = fs::absolute(out_dir);
            }
            const GenerateSummary s = generate(cfg, [&err](const std::string& line) { err << line << "\n"; });
            out << "generated " << s.succeeded << "/" << s.requested << " images in " << cfg.output.string()
                << "\n";
            if (s.aborted) {
                err << "error: more than half of the images failed; run aborted\n";
                return kFailure;
            }
            return 0;
        }
        if (*blend) {
            require_existing(source, "source image");
            require_existing(mask, "mask image");
            require_existing(background, "background image");
            if (rot % 90 != 0 || rot < 0 || rot >= 360) {
                throw UsageError("--rot must be one of 0, 90, 180, 270");
            }
            const GradientMode gm = parse_gradient_mode(mode);
            const LoadedImage src = load_png(source);
            const LoadedImage m = load_png(mask);
            if (m.image.height() != src.image.height() || m.image.width() != src.image.width()) {
                throw InvalidArgument("mask and source sizes differ");
            }
            BinaryMask bits(m.image.height(), m.image.width());
            const ImagePlane gray = to_gray(m.image);
            for (int y = 0; y < bits.height(); ++y) {
                for (int x = 0; x < bits.width(); ++x) {
                    bits.set(y, x, m.alpha ? m.alpha->at(y, x) : gray.at(0, y, x) > 0.5);
                }
            }
            const PreparedPatch patch = prepare_patch(src.image, bits, scale, rot / 90);
            const ImagePlane target = to_rgb(load_png(background).image);
            const ImagePlane result = seamless_clone(patch.image, patch.mask, target, {bx, by}, gm);
            save_png(result, blend_out);
            out << blend_out << "\n";
            return 0;
        }
        if (*blur) {
            require_existing(blur_image, "image");
            const double mean = blurriness_mean(load_png(blur_image).image);
            char line[64];
            std::snprintf(line, sizeof line, "mean_db=%.4f\n", mean);
            out << line << "lambda=" << LambdaSchedule().lambda_for(mean) << "\n";
            return 0;
        }
        if (*coco) {
            require_existing(coco_in, "COCO file");
            const CocoDataset ds = coco_import(read_text(coco_in));
            const std::string text = coco_export(ds);
            std::ofstream o(coco_out, std::ios::binary | std::ios::trunc);
            o << text;
            if (!o) {
                throw IoError("cannot write " + coco_out);
            }
            out << coco_out << ": " << ds.images.size() << " images, " << ds.annotations.size() << " annotations\n";
            return 0;
        }
        if (*weights) {
            require_existing(archive, "archive");
            const std::string text = read_text(archive);
            const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                      text.size());
            const std::vector<ArchiveTensor> tensors = decode_archive(bytes);
            const VggPrefix net = VggPrefix::from_tensors(tensors);
            for (const ArchiveEntry& e : list_archive(bytes)) {
                std::ostringstream shape;
                for (std::size_t i = 0; i < e.shape.size(); ++i) {
                    shape << (i ? "," : "") << e.shape[i];
                }
                out << e.name << " (" << shape.str() << ") crc32=" << hex32(e.crc32) << "\n";
            }
            out << "ok: " << tensors.size() << " tensors, " << net.convs().size() << " conv layers\n";
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const TensorError& e) {
        err << "error: " << e.what() << " [tensor " << e.tensor() << "]\n";
        return kFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

}  // namespace iburd
