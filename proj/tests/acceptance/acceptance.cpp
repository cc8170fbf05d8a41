// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <string>

#include "iburd/annotate.hpp"
#include "iburd/blurmetric.hpp"
#include "iburd/pipeline.hpp"
#include "iburd/poisson.hpp"
#include "iburd/styleloss.hpp"
#include "oracles.hpp"

using namespace iburd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = IBURD_FIXTURE_DIR;
const fs::path kWeights = fs::path(IBURD_GENERATED_FIXTURE_DIR) / "random_vgg_prefix.ibwt";

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

// Runs one criterion; an exception counts as a failure.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [ok, detail] = body();
        report(name, ok, detail);
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double max_abs_diff(const ImagePlane& a, const ImagePlane& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a.samples()[i] - b.samples()[i]));
    }
    return d;
}

BinaryMask random_interior_mask(std::mt19937_64& rng, int h, int w, double p) {
    std::bernoulli_distribution on(p);
    BinaryMask m(h, w);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            m.set(y, x, on(rng));
        }
    }
    return m;
}

std::pair<bool, std::string> poisson_oracle() {
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> side(3, 16);
    std::uniform_real_distribution<double> density(0.3, 1.0);
    double worst = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 50; ++i) {
        const int h = side(rng);
        const int w = side(rng);
        const ImagePlane target = oracle::random_image(rng, h, w, 3);
        const ImagePlane source = oracle::random_image(rng, h, w, 3);
        const BinaryMask m = random_interior_mask(rng, h, w, density(rng));
        const GradientMode mode = i % 2 ? GradientMode::mixed : GradientMode::source;
        const GuidanceField g = guidance_field(source, target, m, mode);
        worst = std::max(worst, max_abs_diff(solve_poisson(target, m, g), oracle::dense_poisson(target, m, g)));
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-6 && t < 10.0, fmt("50 instances, max-abs %.3g (limit 1e-6), %.2f s (limit 10 s)", worst, t)};
}

std::pair<bool, std::string> seamless_identity() {
    std::mt19937_64 rng(1002);
    const ImagePlane img = oracle::random_image(rng, 64, 64, 3);
    double worst = 0.0;
    for (const GradientMode mode : {GradientMode::source, GradientMode::mixed}) {
        ImagePlane crop(24, 24, 3);
        BinaryMask disk(24, 24);
        for (int y = 0; y < 24; ++y) {
            for (int x = 0; x < 24; ++x) {
                for (int c = 0; c < 3; ++c) {
                    crop.at(c, y, x) = img.at(c, 17 + y, 9 + x);
                }
                disk.set(y, x, (y - 11.5) * (y - 11.5) + (x - 11.5) * (x - 11.5) < 110.0);
            }
        }
        worst = std::max(worst, max_abs_diff(seamless_clone(crop, disk, img, {9, 17}, mode), img));
        worst = std::max(worst, max_abs_diff(seamless_clone(crop, BinaryMask(24, 24, true), img, {9, 17}, mode), img));
    }
    return {worst < 1e-5, fmt("max-abs %.3g (limit 1e-5)", worst)};
}

std::pair<bool, std::string> gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    const VggPrefix net = load_weights(kWeights);
    std::mt19937_64 rng(1003);
    const ImagePlane img = oracle::random_image(rng, 16, 16, 3, 0.1, 0.9);
    const ImagePlane bg = oracle::random_image(rng, 16, 16, 3);
    const ImagePlane fp = oracle::random_image(rng, 16, 16, 3);
    std::vector<double> x(img.samples().begin(), img.samples().end());

    struct Term {
        const char* name;
        double lambda, mu, nu;
    };
    const Term terms[] = {{"style", 1.0, 0.0, 0.0}, {"content", 0.0, 1.0, 0.0}, {"tv", 0.0, 0.0, 1.0},
                          {"total", 800.0, 1.0, 1e-6}};
    std::string detail;
    bool ok = true;
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    for (const Term& term : terms) {
        LossWeights w;
        w.lambda = term.lambda;
        w.mu = term.mu;
        w.nu = term.nu;
        const StyleObjective obj(net, bg, fp, w);
        std::vector<double> grad(x.size());
        obj.evaluate(x, grad);
        double scale = 0.0;
        for (const double g : grad) {
            scale = std::max(scale, std::abs(g));
        }
        const auto f = [&](std::span<const double> v) { return obj.evaluate(v, {}).total; };
        double worst = 0.0;
        for (int k = 0; k < 24; ++k) {
            const std::size_t i = pick(rng);
            const double fd = oracle::central_difference(f, x, i, 1e-6);
            worst = std::max(worst, oracle::relative_error(fd, grad[i], 1e-3 * scale));
        }
        ok = ok && worst < 1e-2;
        detail += std::string(term.name) + " " + fmt("%.2g", worst) + ", ";
    }
    const double t = seconds_since(t0);
    ok = ok && t < 60.0;
    return {ok, "worst relative error over 24 coordinates of 3x16x16: " + detail +
                    fmt("limit 1e-2; %.1f s (limit 60 s)", t)};
}

std::pair<bool, std::string> loss_zero_cases() {
    const VggPrefix net = load_weights(kWeights);
    std::mt19937_64 rng(1004);
    const ImagePlane img = oracle::random_image(rng, 32, 32, 3);
    LossWeights w;
    w.lambda = 15000.0;
    const TotalLoss same = total_loss(img, img, img, w, net);
    const ImagePlane flat(32, 32, 3, 0.37);
    const TotalLoss constant = total_loss(flat, flat, flat, w, net);
    const double tv_flat = tv_loss(flat).value;
    const bool ok = same.terms.style == 0.0 && same.terms.content == 0.0 && same.terms.total == w.nu * same.terms.tv &&
                    constant.terms.total == 0.0 && tv_flat == 0.0;
    return {ok, fmt("r=b=fp random: style %g, content %g; constant image: total %g", same.terms.style,
                    same.terms.content, constant.terms.total) +
                    fmt(", tv %g", tv_flat)};
}

std::pair<bool, std::string> lambda_table() {
    const LambdaSchedule s;
    const std::pair<double, double> table[] = {{45, 30000},  {40, 30000}, {39.9, 15000}, {10, 15000},
                                               {9.9, 1500}, {0, 1500},   {-0.1, 800}};
    bool ok = true;
    std::string detail;
    for (const auto& [mean, want] : table) {
        const double got = s.lambda_for(mean);
        ok = ok && got == want;
        detail += fmt("%g->%g ", mean, got);
    }
    return {ok, detail};
}

std::pair<bool, std::string> pipeline_constants() {
    const fs::path out = fs::temp_directory_path() / "iburd_acceptance_constants";
    fs::remove_all(out);
    PipelineConfig c;
    c.output = out / "generated";
    generate(c);
    PipelineConfig t;
    t.source_mode = SourceMode::trashcan;
    t.output = out / "trashcan";
    generate(t);
    const json g = json::parse(slurp(c.output / "manifest.json"))["constants"];
    const json k = json::parse(slurp(t.output / "manifest.json"))["constants"];
    const json rot = json::array({0, 90, 180, 270});
    bool ok = g["mu"] == 1.0 && g["nu"] == 1e-6 && g["iterations"] == 100 && g["canvas"]["width"] == 512 &&
              g["canvas"]["height"] == 512 && g["rotation_set_degrees"] == rot &&
              g["scale_set"] == json::array({96, 128, 192, 256}) && k["scale_set"] == json::array({192, 256}) &&
              k["rotation_set_degrees"] == rot;
    const json& single = g["grid_rule"]["single_object"];
    ok = ok && single["96"] == "4x4" && single["128"] == "4x4" && single["192"] == "2x2" && single["256"] == "2x2";
    for (const char* n : {"2", "3", "4"}) {
        ok = ok && g["grid_rule"]["multi_object"][n] == "2x2";
    }
    return {ok, "mu=" + g["mu"].dump() + " nu=" + g["nu"].dump() + " iterations=" + g["iterations"].dump() +
                    " canvas=" + g["canvas"].dump() + " rotations=" + g["rotation_set_degrees"].dump() +
                    " scales=" + g["scale_set"].dump() + " trashcan=" + k["scale_set"].dump() +
                    " grid=" + g["grid_rule"].dump()};
}

// Tightness after 2-decimal quantization: every bbox edge touches a point.
bool bbox_tight(const json& ann, const json& img) {
    const auto& bb = ann["bbox"];
    const double x0 = bb[0], y0 = bb[1], x1 = x0 + bb[2].get<double>(), y1 = y0 + bb[3].get<double>();
    bool left = false, top = false, right = false, bottom = false;
    for (const auto& poly : ann["segmentation"]) {
        for (std::size_t i = 0; i + 1 < poly.size(); i += 2) {
            const double x = poly[i], y = poly[i + 1];
            if (x < x0 - 1e-6 || x > x1 + 1e-6 || y < y0 - 1e-6 || y > y1 + 1e-6) {
                return false;
            }
            if (x < 0 || y < 0 || x > img["width"].get<double>() || y > img["height"].get<double>()) {
                return false;
            }
            left |= std::abs(x - x0) <= 1e-6;
            right |= std::abs(x - x1) <= 1e-6;
            top |= std::abs(y - y0) <= 1e-6;
            bottom |= std::abs(y - y1) <= 1e-6;
        }
    }
    return left && top && right && bottom;
}

struct SmokeRun {
    GenerateSummary summary;
    fs::path out;
    double seconds = 0.0;
};

SmokeRun run_smoke(const std::string& tag) {
    PipelineConfig c = load_config(kFixtures / "smoke_config.json");
    c.weights = kWeights;
    c.output = fs::temp_directory_path() / ("iburd_acceptance_smoke_" + tag);
    fs::remove_all(c.output);
    const auto t0 = std::chrono::steady_clock::now();
    SmokeRun r{generate(c), c.output, 0.0};
    r.seconds = seconds_since(t0);
    return r;
}

std::pair<bool, std::string> smoke(const SmokeRun& a, const SmokeRun& b) {
    const json coco = json::parse(slurp(a.out / "annotations.json"));
    const auto problems = validate_coco(coco);
    bool tight = true;
    std::map<int, json> images;
    for (const auto& img : coco["images"]) {
        images[img["id"].get<int>()] = img;
    }
    for (const auto& ann : coco["annotations"]) {
        tight = tight && bbox_tight(ann, images.at(ann["image_id"].get<int>()));
    }
    bool identical = slurp(a.out / "annotations.json") == slurp(b.out / "annotations.json");
    for (const auto& img : coco["images"]) {
        const std::string name = img["file_name"];
        identical = identical && !slurp(a.out / name).empty() && slurp(a.out / name) == slurp(b.out / name);
    }
    const bool ok = a.summary.succeeded == 4 && b.summary.succeeded == 4 && problems.empty() && tight && identical &&
                    a.seconds < 300.0 && b.seconds < 300.0;
    std::string detail = fmt("%g/4 images, %g annotations, ", a.summary.succeeded, coco["annotations"].size());
    detail += problems.empty() ? "schema valid" : "schema problem: " + problems.front();
    detail += tight ? ", in-bounds and tight" : ", bbox/bounds violation";
    detail += identical ? ", PNG+COCO byte-identical" : ", runs differ";
    detail += fmt(", %.0f s and %.0f s (limit 300 s each)", a.seconds, b.seconds);
    return {ok, detail};
}

std::pair<bool, std::string> monotone(const SmokeRun& a) {
    bool ok = true;
    int steps = 0;
    int pairs = 0;
    std::string detail;
    for (const auto& rec : a.summary.manifest["images"]) {
        const auto& trace = rec["loss_trace"];
        ok = ok && trace.size() >= 2;
        for (std::size_t i = 1; i < trace.size(); ++i) {
            ok = ok && trace[i].get<double>() <= trace[i - 1].get<double>();
            ++steps;
        }
        if (rec["lambda"] == 800.0) {
            const double first = rec["initial_loss"]["total"];
            const double last = rec["final_loss"]["total"];
            ok = ok && last < first;
            ++pairs;
            detail += fmt("; lambda=800 image: %.6g -> %.6g", first, last);
        }
    }
    ok = ok && pairs > 0;
    return {ok, fmt("%g accepted steps, all non-increasing", steps) + detail};
}

std::pair<bool, std::string> fft_correctness() {
    std::mt19937_64 rng(1005);
    double worst_fwd = 0.0;
    for (const auto& [h, w] : {std::pair{16, 16}, std::pair{1, 1}, std::pair{7, 16}, std::pair{13, 5}, std::pair{8, 3},
                               std::pair{16, 11}}) {
        const ImagePlane img = oracle::random_image(rng, h, w, 1);
        int ph = 0, pw = 0;
        const auto grid = oracle::padded_grid(img, 1.0, ph, pw);
        const auto want = oracle::naive_dft2(grid, ph, pw, false);
        const Spectrum got = fft2(img);
        for (int y = 0; y < ph; ++y) {
            for (int x = 0; x < pw; ++x) {
                // The spectrum is stored with DC moved to the centre.
                const Complex g = got.at((y + ph / 2) % ph, (x + pw / 2) % pw);
                worst_fwd = std::max(worst_fwd, std::abs(g - want[static_cast<std::size_t>(y) * pw + x]));
            }
        }
    }
    double worst_rt = 0.0;
    for (const auto& [h, w] : {std::pair{64, 64}, std::pair{33, 50}, std::pair{1, 64}, std::pair{64, 17}}) {
        const ImagePlane img = oracle::random_image(rng, h, w, 1);
        const auto back = ifft2(fft2(img));
        const int pw = next_power_of_two(w);
        for (int y = 0; y < next_power_of_two(h); ++y) {
            for (int x = 0; x < pw; ++x) {
                const double want = y < h && x < w ? img.at(0, y, x) : 0.0;
                worst_rt = std::max(worst_rt, std::abs(back[static_cast<std::size_t>(y) * pw + x] - want));
            }
        }
    }
    return {worst_fwd <= 1e-6 && worst_rt <= 1e-6,
            fmt("forward vs naive DFT max-abs %.3g, round trip max-abs %.3g (limit 1e-6)", worst_fwd, worst_rt)};
}

// Largest Chebyshev distance from a set pixel of `a` to the nearest set pixel of `b`.
int mask_distance(const BinaryMask& a, const BinaryMask& b) {
    int worst = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (!a.at(y, x)) {
                continue;
            }
            int d = 0;
            for (bool found = false; !found; ++d) {
                if (d > std::max(a.width(), a.height())) {
                    return d;
                }
                for (int dy = -d; dy <= d && !found; ++dy) {
                    for (int dx = -d; dx <= d && !found; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        found = yy >= 0 && xx >= 0 && yy < b.height() && xx < b.width() && b.at(yy, xx);
                    }
                }
            }
            worst = std::max(worst, d - 1);
        }
    }
    return worst;
}

std::pair<bool, std::string> annotation_geometry() {
    std::mt19937_64 rng(1006);
    std::uniform_int_distribution<int> side(40, 120);
    std::uniform_int_distribution<int> quarter(0, 3);
    std::uniform_int_distribution<int> shift(0, 30);
    bool exact = true;
    double drift = 0.0;
    int worst = 0;
    for (int i = 0; i < 20; ++i) {
        const int w = side(rng);
        const int h = side(rng);
        const double r = 0.45 * std::min(w, h);
        const Polygon raw = oracle::random_star_polygon(rng, w / 2.0, h / 2.0, 0.3 * r, r, 5 + i % 8);
        // Coordinates on a 1/64 grid make every rotation step exact in binary.
        Polygon p = raw;
        for (Point& q : p) {
            q = {std::round(q.x * 64.0) / 64.0, std::round(q.y * 64.0) / 64.0};
        }
        const Polygon* const variants[] = {&p, &raw};
        for (const Polygon* poly : variants) {
            const Annotation a = make_annotation(1, {*poly});
            Annotation spun = a;
            FrameSize frame{double(w), double(h)};
            for (int k = 0; k < 4; ++k) {
                spun = transform_annotation(spun, frame, frame, 1, {});
                frame = rotated_frame(frame, 1);
            }
            for (std::size_t j = 0; j < poly->size(); ++j) {
                const double d = std::max(std::abs(spun.polygons[0][j].x - a.polygons[0][j].x),
                                          std::abs(spun.polygons[0][j].y - a.polygons[0][j].y));
                if (poly == &p) {
                    exact = exact && d == 0.0;
                } else {
                    drift = std::max(drift, d);
                }
            }
        }

        // Rotate and shift the raster, versus rasterize the transformed polygon.
        const int k = quarter(rng);
        const int tx = shift(rng), ty = shift(rng);
        const FrameSize turned = rotated_frame({double(w), double(h)}, k);
        const int cw = int(turned.w) + tx, chh = int(turned.h) + ty;
        const Annotation moved =
            transform_annotation(make_annotation(1, {raw}), {double(w), double(h)}, {double(w), double(h)}, k,
                                 {double(tx), double(ty)});
        const BinaryMask geometric = rasterize_polygons(moved.polygons, cw, chh);
        const BinaryMask turned_raster = rotate_quarter(rasterize_polygons({raw}, w, h), k);
        BinaryMask raster(chh, cw);
        for (int y = 0; y < turned_raster.height(); ++y) {
            for (int x = 0; x < turned_raster.width(); ++x) {
                raster.set(y + ty, x + tx, turned_raster.at(y, x));
            }
        }
        worst = std::max({worst, mask_distance(raster, geometric), mask_distance(geometric, raster)});
    }
    return {exact && worst <= 1,
            std::string(exact ? "four quarter turns exact" : "four quarter turns NOT exact") +
                fmt(" (unquantized coordinates drift %.3g); raster vs geometric transform within %g px on 20 "
                    "polygons (limit 1)",
                    drift, worst)};
}

}  // namespace

int main(int argc, char** argv) {
    // --quick skips the two end-to-end runs.
    const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
    criterion("poisson_oracle_equivalence", poisson_oracle);
    criterion("seamless_identity", seamless_identity);
    criterion("gradient_suite", gradient_suite);
    criterion("loss_zero_cases", loss_zero_cases);
    criterion("lambda_schedule", lambda_table);
    criterion("pipeline_constants", pipeline_constants);
    criterion("fft_correctness", fft_correctness);
    criterion("annotation_geometry", annotation_geometry);

    if (quick) {
        std::printf("%s: %d criteria failed (smoke runs skipped)\n", failures ? "FAILED" : "PARTIAL", failures);
        return failures ? 1 : 0;
    }
    SmokeRun first, second;
    try {
        first = run_smoke("a");
        second = run_smoke("b");
    } catch (const std::exception& e) {
        report("end_to_end_smoke", false, std::string("exception: ") + e.what());
        report("monotone_optimization", false, "smoke run did not complete");
        return 1;
    }
    criterion("end_to_end_smoke", [&] { return smoke(first, second); });
    criterion("monotone_optimization", [&] { return monotone(first); });

    std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
