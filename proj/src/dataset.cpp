#include "granusense/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "granusense/csv.hpp"
#include "granusense/hash.hpp"
#include "granusense/png_io.hpp"

namespace gsn::classify {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* kLabelNames[kNumClasses] = {
    "TriangleClean", "SquareClean", "HexagonClean", "CircleClean",
    "TriangleSand",  "SquareSand",  "HexagonSand",  "CircleSand",
    "ZeroContact",
};

tactile::ShapeKind label_shape(ClassLabel label) {
    switch (static_cast<int>(label) % 4) {
    case 0: return tactile::ShapeKind::Triangle;
    case 1: return tactile::ShapeKind::Square;
    case 2: return tactile::ShapeKind::Hexagon;
    default: return tactile::ShapeKind::Circle;
    }
}

json pose_to_json(const PoseRecord& p) {
    return json{{"x_mm", p.x},
                {"y_mm", p.y},
                {"rotation_deg", p.rotation_deg},
                {"press_depth_mm", p.press_depth},
                {"diameter_mm", p.diameter}};
}

PoseRecord pose_from_json(const json& j) {
    PoseRecord p;
    p.x = j.at("x_mm").get<double>();
    p.y = j.at("y_mm").get<double>();
    p.rotation_deg = j.at("rotation_deg").get<double>();
    p.press_depth = j.at("press_depth_mm").get<double>();
    p.diameter = j.at("diameter_mm").get<double>();
    return p;
}

// Bilinear sample with clamp-to-edge; coordinates in pixel-index space.
double sample_bilinear(const std::vector<double>& plane, int w, int h, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = plane[static_cast<std::size_t>(y0) * w + x0] * (1.0 - fx) +
                       plane[static_cast<std::size_t>(y0) * w + x1] * fx;
    const double bot = plane[static_cast<std::size_t>(y1) * w + x0] * (1.0 - fx) +
                       plane[static_cast<std::size_t>(y1) * w + x1] * fx;
    return top * (1.0 - fy) + bot * fy;
}

} // namespace

const char* label_name(ClassLabel label) {
    const int i = static_cast<int>(label);
    if (i < 0 || i >= kNumClasses) throw std::invalid_argument("bad class label index");
    return kLabelNames[i];
}

ClassLabel parse_label(const std::string& name) {
    for (int i = 0; i < kNumClasses; ++i)
        if (name == kLabelNames[i]) return static_cast<ClassLabel>(i);
    throw std::invalid_argument("unknown class label '" + name + "'");
}

std::vector<std::string> all_label_names() {
    return {kLabelNames, kLabelNames + kNumClasses};
}

const char* split_name(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + name + "'");
}

void split_counts(int per_class, int& train, int& val, int& test) {
    // 1200 : 200 : 100 out of 1500.
    train = per_class * 4 / 5;
    val = per_class * 2 / 15;
    test = per_class - train - val;
}

namespace {

struct RenderJob {
    ClassLabel label;
    int index; // within class
};

ManifestEntry render_one(const RenderJob& job, const GenConfig& cfg,
                         const tactile::LightingModel& lighting,
                         const sim::MediumSpec& sand, std::uint64_t dataset_seed,
                         int train_n, int val_n, const std::string& out_dir) {
    const std::uint64_t item_seed =
        derive_seed(dataset_seed, static_cast<std::uint64_t>(job.label) * 1000003ULL +
                                      static_cast<std::uint64_t>(job.index));
    Rng rng(item_seed);

    ManifestEntry entry;
    entry.label = job.label;
    entry.seed = item_seed;
    entry.split = job.index < train_n          ? Split::Train
                  : job.index < train_n + val_n ? Split::Val
                                                : Split::Test;

    std::ostringstream rel;
    rel << "images/" << label_name(job.label) << "/";
    rel.fill('0');
    rel.width(5);
    rel << job.index;
    entry.path = rel.str() + ".png";

    TactileImage img;
    if (job.label == ClassLabel::ZeroContact) {
        HeightMap hm(cfg.grid.width, cfg.grid.height, cfg.grid.resolution);
        const bool clutter = rng.uniform() < cfg.clutter_prob;
        if (clutter) {
            const int count = 1 + static_cast<int>(rng.below(
                                      static_cast<std::uint64_t>(std::max(1, cfg.clutter_max))));
            hm = tactile::add_loose_grains(hm, sand, count, rng.next_u64());
        }
        img = tactile::shade(tactile::normals_from_heightmap(hm), lighting);
    } else {
        tactile::ShapeSpec shape;
        shape.kind = label_shape(job.label);
        shape.circumscribed_diameter = rng.uniform(cfg.diameter_min, cfg.diameter_max);
        shape.press_depth = rng.uniform(cfg.press_min, cfg.press_max);
        shape.pose.rotation_deg = rng.uniform(0.0, 360.0);

        // Keep the full footprint (plus margin) inside the frame; the paper's
        // manual cleaning of no/partial-contact frames is enforced here by
        // construction.
        const double field_w = cfg.grid.width * cfg.grid.resolution;
        const double field_h = cfg.grid.height * cfg.grid.resolution;
        const double r = shape.circumscribed_diameter * 0.5 + cfg.edge_margin;
        const double max_off_x = std::max(0.0, field_w * 0.5 - r);
        const double max_off_y = std::max(0.0, field_h * 0.5 - r);
        shape.pose.x = field_w * 0.5 + rng.uniform(-max_off_x, max_off_x);
        shape.pose.y = field_h * 0.5 + rng.uniform(-max_off_y, max_off_y);

        entry.pose = {shape.pose.x, shape.pose.y, shape.pose.rotation_deg,
                      shape.press_depth, shape.circumscribed_diameter};

        const bool with_sand = static_cast<int>(job.label) >= 4;
        img = tactile::render(shape, with_sand ? &sand : nullptr,
                              sim::ClearingAction::None, lighting, rng.next_u64(),
                              cfg.grid);
    }

    if (cfg.sensor_noise_sigma > 0.0) {
        for (auto& plane : img.channels)
            for (auto& v : plane)
                v = std::clamp(v + rng.normal(0.0, cfg.sensor_noise_sigma), 0.0, 1.0);
    }

    pngio::write_rgb8((fs::path(out_dir) / entry.path).string(), img);
    return entry;
}

json gen_config_json(int per_class, const GenConfig& cfg,
                     const tactile::LightingModel& lighting,
                     const sim::MediumSpec& sand, std::uint64_t seed) {
    json j;
    j["per_class"] = per_class;
    j["seed"] = seed;
    j["grid"] = {{"width", cfg.grid.width},
                 {"height", cfg.grid.height},
                 {"resolution_mm", cfg.grid.resolution}};
    j["diameter_mm"] = {cfg.diameter_min, cfg.diameter_max};
    j["press_depth_mm"] = {cfg.press_min, cfg.press_max};
    j["edge_margin_mm"] = cfg.edge_margin;
    j["clutter_prob"] = cfg.clutter_prob;
    j["clutter_max"] = cfg.clutter_max;
    j["sensor_noise_sigma"] = cfg.sensor_noise_sigma;
    json lights = json::array();
    for (std::size_t c = 0; c < 3; ++c)
        lights.push_back({{"direction", lighting.direction[c]},
                          {"intensity", lighting.intensity[c]},
                          {"ambient", lighting.ambient[c]}});
    j["lighting"] = lights;
    j["sand"] = {{"grain_diameter_m", sand.grain_diameter},
                 {"grain_length_m", sand.grain_length},
                 {"mode", static_cast<int>(sand.mode)}};
    return j;
}

} // namespace

DatasetManifest generate_dataset(int per_class, const GenConfig& cfg,
                                 const tactile::LightingModel& lighting,
                                 const sim::MediumSpec& sand, std::uint64_t seed,
                                 const std::string& out_dir, int threads) {
    if (per_class < 30)
        throw std::domain_error("generate_dataset: per_class must be >= 30");
    lighting.validate();
    sand.validate();

    int train_n = 0, val_n = 0, test_n = 0;
    split_counts(per_class, train_n, val_n, test_n);

    fs::create_directories(out_dir);
    for (int c = 0; c < kNumClasses; ++c)
        fs::create_directories(fs::path(out_dir) / "images" /
                               label_name(static_cast<ClassLabel>(c)));

    std::vector<RenderJob> jobs;
    jobs.reserve(static_cast<std::size_t>(per_class) * kNumClasses);
    for (int c = 0; c < kNumClasses; ++c)
        for (int i = 0; i < per_class; ++i)
            jobs.push_back({static_cast<ClassLabel>(c), i});

    DatasetManifest manifest;
    manifest.per_class = per_class;
    manifest.seed = seed;
    manifest.config_hash =
        hex64(fnv1a64(gen_config_json(per_class, cfg, lighting, sand, seed).dump()));
    manifest.entries.resize(jobs.size());

    const int workers = std::max(1, threads);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                manifest.entries[i] = render_one(jobs[i], cfg, lighting, sand, seed,
                                                 train_n, val_n, out_dir);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), manifest);
    return manifest;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path);
    json header = {{"type", "granusense-dataset"},
                   {"version", 1},
                   {"config_hash", manifest.config_hash},
                   {"per_class", manifest.per_class},
                   {"seed", manifest.seed}};
    out << header.dump() << "\n";
    for (const auto& e : manifest.entries) {
        json j = {{"path", e.path},
                  {"label", label_name(e.label)},
                  {"pose", pose_to_json(e.pose)},
                  {"seed", e.seed},
                  {"split", split_name(e.split)}};
        out << j.dump() << "\n";
    }
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path);
    DatasetManifest manifest;
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw csv::ParseError(path, lineno, e.what());
        }
        if (!saw_header) {
            if (j.value("type", "") != "granusense-dataset")
                throw csv::ParseError(path, lineno, "missing dataset header record");
            manifest.config_hash = j.at("config_hash").get<std::string>();
            manifest.per_class = j.at("per_class").get<int>();
            manifest.seed = j.at("seed").get<std::uint64_t>();
            saw_header = true;
            continue;
        }
        ManifestEntry e;
        try {
            e.path = j.at("path").get<std::string>();
            e.label = parse_label(j.at("label").get<std::string>());
            e.pose = pose_from_json(j.at("pose"));
            e.seed = j.at("seed").get<std::uint64_t>();
            e.split = parse_split(j.at("split").get<std::string>());
        } catch (const json::exception& ex) {
            throw csv::ParseError(path, lineno, ex.what());
        }
        manifest.entries.push_back(std::move(e));
    }
    if (!saw_header) throw csv::ParseError(path, 1, "empty manifest");
    return manifest;
}

AugmentParams draw_augment_params(const AugmentConfig& cfg, int width, int height, Rng& rng) {
    AugmentParams p;
    if (cfg.crop) {
        const double area = rng.uniform(cfg.min_crop_area, 1.0);
        p.crop_scale = std::sqrt(area);
        const double half_w = (width - 1) * 0.5;
        const double half_h = (height - 1) * 0.5;
        const double slack_x = (1.0 - p.crop_scale) * half_w;
        const double slack_y = (1.0 - p.crop_scale) * half_h;
        p.crop_cx = half_w + rng.uniform(-slack_x, slack_x);
        p.crop_cy = half_h + rng.uniform(-slack_y, slack_y);
    }
    if (cfg.rotate) p.rotation_deg = rng.uniform(-180.0, 180.0);
    if (cfg.noise) p.noise_sigma = cfg.noise_sigma;
    return p;
}

TactileImage augment(const TactileImage& img, const AugmentParams& params, Rng& rng) {
    const int w = img.width, h = img.height;
    TactileImage out(w, h, img.resolution);

    const double cx = (w - 1) * 0.5;
    const double cy = (h - 1) * 0.5;
    const double ccx = params.crop_cx < 0.0 ? cx : params.crop_cx;
    const double ccy = params.crop_cy < 0.0 ? cy : params.crop_cy;
    const double s = params.crop_scale;
    const double ang = params.rotation_deg * kPi / 180.0;
    const bool identity_map = (s == 1.0 && params.rotation_deg == 0.0 && ccx == cx && ccy == cy);
    const double ca = std::cos(ang), sa = std::sin(ang);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sx = x, sy = y;
            if (!identity_map) {
                // rotate about the image centre, then map through the crop
                const double rx = ca * (x - cx) - sa * (y - cy);
                const double ry = sa * (x - cx) + ca * (y - cy);
                sx = ccx + rx * s;
                sy = ccy + ry * s;
            }
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = identity_map
                                     ? img.channels[c][img.index(x, y)]
                                     : sample_bilinear(img.channels[c], w, h, sx, sy);
                out.channels[c][out.index(x, y)] = v;
            }
        }
    }

    if (params.noise_sigma > 0.0) {
        for (std::size_t c = 0; c < 3; ++c)
            for (auto& v : out.channels[c])
                v = std::clamp(v + rng.normal(0.0, params.noise_sigma), 0.0, 1.0);
    } else {
        for (std::size_t c = 0; c < 3; ++c)
            for (auto& v : out.channels[c]) v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

TactileImage augment(const TactileImage& img, const AugmentConfig& cfg, Rng& rng) {
    const AugmentParams p = draw_augment_params(cfg, img.width, img.height, rng);
    return augment(img, p, rng);
}

} // namespace gsn::classify
