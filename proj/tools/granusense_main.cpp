// granusense — desk-scale granular-media tactile sensing toolkit.
//
// Single binary with subcommands covering the two experiment tracks
// (penetration/fluidization and buried-shape identification) plus single-image
// inference. All stochastic commands are seed-deterministic; see README.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "granusense/calibration.hpp"
#include "granusense/csv.hpp"
#include "granusense/dataset.hpp"
#include "granusense/dsp.hpp"
#include "granusense/hash.hpp"
#include "granusense/net.hpp"
#include "granusense/png_io.hpp"
#include "granusense/recon.hpp"
#include "granusense/sim.hpp"
#include "granusense/svg.hpp"
#include "granusense/tactile.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

json default_config() {
    return json{
        {"seed", 42},
        {"out", "out"},
        {"deterministic", false},
        {"calibration_file", ""},
        {"lighting_file", ""},
        {"contact_threshold", 0.05},
        {"sweep",
         {{"media", {"sand", "rice"}},
          {"voltages", {0, 6, 8, 10, 12}},
          {"max_depth_m", 0.1524},
          {"sample_rate_hz", 500.0},
          {"filter_alpha", 0.1}}},
        {"dataset",
         {{"per_class", 300},
          {"grid", {{"width", 64}, {"height", 64}, {"resolution_mm", 0.25}}},
          {"diameter_mm", {8.5, 12.5}},
          {"press_depth_mm", {0.6, 1.2}},
          {"edge_margin_mm", 1.0},
          {"clutter_prob", 0.5},
          {"clutter_max", 6},
          {"sensor_noise_sigma", 0.003}}},
        {"train",
         {{"epochs", 10},
          {"batch", 64},
          {"lr", 0.05},
          {"lr_decay", 0.5},
          {"decay_every_epochs", 3},
          {"momentum", 0.9},
          {"augment",
           {{"crop", true},
            {"rotate", true},
            {"noise", true},
            {"min_crop_area", 0.85},
            {"noise_sigma", 0.02}}}}},
    };
}

void merge_into(json& base, const json& overlay) {
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool have_out = false;
    bool have_seed = false;
    bool force = false;
    bool dry_run = false;
    bool deterministic = false;
};

json resolve_config(const GlobalOpts& opts) {
    json cfg = default_config();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw std::invalid_argument("cannot open config file " + opts.config_path);
        json overlay;
        try {
            overlay = json::parse(in);
        } catch (const json::exception& e) {
            throw std::invalid_argument("config file " + opts.config_path + ": " + e.what());
        }
        merge_into(cfg, overlay);
    }
    if (opts.have_out) cfg["out"] = opts.out_dir;
    if (opts.have_seed) cfg["seed"] = opts.seed;
    if (opts.deterministic) cfg["deterministic"] = true;
    return cfg;
}

int worker_threads(const json& cfg) {
    if (cfg.at("deterministic").get<bool>()) return 1;
    if (const char* env = std::getenv("GRANUSENSE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

gsn::sim::Calibration calibration_from(const json& cfg) {
    const auto path = cfg.at("calibration_file").get<std::string>();
    return path.empty() ? gsn::sim::Calibration::defaults()
                        : gsn::sim::load_calibration(path);
}

gsn::tactile::LightingModel lighting_from(const json& cfg) {
    const auto path = cfg.at("lighting_file").get<std::string>();
    return path.empty() ? gsn::tactile::LightingModel::default_model()
                        : gsn::tactile::load_lighting(path);
}

gsn::classify::GenConfig gen_config_from(const json& cfg) {
    const json& d = cfg.at("dataset");
    gsn::classify::GenConfig gc;
    gc.grid.width = d.at("grid").at("width").get<int>();
    gc.grid.height = d.at("grid").at("height").get<int>();
    gc.grid.resolution = d.at("grid").at("resolution_mm").get<double>();
    gc.diameter_min = d.at("diameter_mm").at(0).get<double>();
    gc.diameter_max = d.at("diameter_mm").at(1).get<double>();
    gc.press_min = d.at("press_depth_mm").at(0).get<double>();
    gc.press_max = d.at("press_depth_mm").at(1).get<double>();
    gc.edge_margin = d.at("edge_margin_mm").get<double>();
    gc.clutter_prob = d.at("clutter_prob").get<double>();
    gc.clutter_max = d.at("clutter_max").get<int>();
    gc.sensor_noise_sigma = d.at("sensor_noise_sigma").get<double>();
    return gc;
}

gsn::classify::TrainConfig train_config_from(const json& cfg, int threads) {
    const json& t = cfg.at("train");
    gsn::classify::TrainConfig tc;
    tc.epochs = t.at("epochs").get<int>();
    tc.batch = t.at("batch").get<int>();
    tc.lr = t.at("lr").get<double>();
    tc.lr_decay = t.at("lr_decay").get<double>();
    tc.decay_every = t.at("decay_every_epochs").get<int>();
    tc.momentum = t.at("momentum").get<double>();
    const json& a = t.at("augment");
    tc.augment.crop = a.at("crop").get<bool>();
    tc.augment.rotate = a.at("rotate").get<bool>();
    tc.augment.noise = a.at("noise").get<bool>();
    tc.augment.min_crop_area = a.at("min_crop_area").get<double>();
    tc.augment.noise_sigma = a.at("noise_sigma").get<double>();
    tc.seed = cfg.at("seed").get<std::uint64_t>();
    tc.threads = threads;
    return tc;
}

// ---------------------------------------------------------------------------
// Run records and output discipline
// ---------------------------------------------------------------------------

std::string utc_now() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Run {
public:
    Run(std::string command, const json& cfg, const GlobalOpts& opts)
        : command_(std::move(command)), cfg_(cfg), force_(opts.force),
          dry_run_(opts.dry_run),
          deterministic_(cfg.at("deterministic").get<bool>()),
          out_dir_(cfg.at("out").get<std::string>()), started_(utc_now()) {}

    const fs::path& out_dir() const { return out_dir_; }
    bool dry_run() const { return dry_run_; }

    fs::path declare(const std::string& relative) {
        const fs::path p = out_dir_ / relative;
        outputs_.push_back(relative);
        return p;
    }

    // Refuses to continue when any declared output already exists, unless
    // --force was given. Call after declaring everything, before writing.
    void guard_overwrites() const {
        if (force_ || dry_run_) return;
        for (const auto& rel : outputs_) {
            const fs::path p = out_dir_ / rel;
            if (fs::exists(p))
                throw std::runtime_error("output " + p.string() +
                                         " already exists; rerun with --force to overwrite");
        }
    }

    void print_plan() const {
        std::cout << "resolved config:\n" << cfg_.dump(2) << "\n";
        std::cout << "planned outputs under " << out_dir_.string() << ":\n";
        for (const auto& rel : outputs_) std::cout << "  " << rel << "\n";
        std::cout << "(dry run: nothing written)\n";
    }

    void prepare_directories() const {
        fs::create_directories(out_dir_);
    }

    // Writes the run record and verifies that every declared output exists.
    void finish() {
        json record;
        record["command"] = command_;
        record["version"] = kVersion;
        json hashed = cfg_;
        hashed.erase("out"); // the destination is not part of the experiment
        record["config_hash"] = gsn::hex64(gsn::fnv1a64(hashed.dump()));
        record["deterministic"] = deterministic_;
        if (!deterministic_) {
            record["started_utc"] = started_;
            record["finished_utc"] = utc_now();
        }
        record["outputs"] = outputs_;
        std::ofstream out(out_dir_ / "run_record.json");
        if (!out) throw std::runtime_error("cannot write run record");
        out << record.dump(2) << "\n";

        for (const auto& rel : outputs_) {
            if (!fs::exists(out_dir_ / rel))
                throw std::runtime_error("declared output missing after run: " + rel);
        }
    }

    void mark_failed(const std::string& stage, const std::string& why) const {
        std::error_code ec;
        fs::create_directories(out_dir_, ec);
        std::ofstream marker(out_dir_ / "FAILED");
        marker << "stage: " << stage << "\n" << why << "\n";
    }

private:
    std::string command_;
    json cfg_;
    bool force_;
    bool dry_run_;
    bool deterministic_;
    fs::path out_dir_;
    std::string started_;
    std::vector<std::string> outputs_;
};

// ---------------------------------------------------------------------------
// vibration-sweep
// ---------------------------------------------------------------------------

int cmd_vibration_sweep(const GlobalOpts& opts) {
    const json cfg = resolve_config(opts);
    const json& sweep = cfg.at("sweep");
    const auto cal = calibration_from(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const double alpha = sweep.at("filter_alpha").get<double>();
    const double max_depth = sweep.at("max_depth_m").get<double>();
    const double sample_rate = sweep.at("sample_rate_hz").get<double>();

    std::vector<std::string> media = sweep.at("media").get<std::vector<std::string>>();
    std::vector<int> voltages = sweep.at("voltages").get<std::vector<int>>();
    for (int v : voltages) {
        try {
            gsn::sim::VibrationProfile::at_voltage(v);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string("sweep.voltages: ") + e.what());
        }
    }

    Run run("vibration-sweep", cfg, opts);
    for (const auto& medium : media)
        for (int v : voltages)
            run.declare(medium + "_" + std::to_string(v) + "v.csv");
    for (const auto& medium : media) run.declare(medium + "_overlay.svg");
    run.declare("stall_summary.csv");

    if (run.dry_run()) {
        run.print_plan();
        return 0;
    }
    run.guard_overwrites();
    run.prepare_directories();

    std::ostringstream summary;
    summary << "medium,voltage_v,gamma,stalled,stall_depth_m,ratio_to_still\n";

    std::size_t run_index = 0;
    for (const auto& medium_name : media) {
        const auto& medium = cal.medium(medium_name);
        gsn::svg::LineChart chart;
        chart.title = "Penetration force vs depth: " + medium_name;
        chart.x_label = "depth (m)";
        chart.y_label = "force (N)";

        std::optional<double> still_stall;
        for (int v : voltages) {
            const auto vib = gsn::sim::VibrationProfile::at_voltage(v);
            const auto trace = gsn::sim::simulate_penetration(
                medium, cal.probe, vib, max_depth, sample_rate,
                gsn::derive_seed(seed, run_index));
            ++run_index;

            gsn::dsp::TimeSeries force{sample_rate, {}};
            force.values.reserve(trace.samples.size());
            for (const auto& s : trace.samples) force.values.push_back(s.force);
            const auto smoothed = gsn::dsp::exp_filter(force, alpha);

            gsn::sim::ForceTrace filtered = trace;
            for (std::size_t i = 0; i < filtered.samples.size(); ++i)
                filtered.samples[i].force = smoothed.values[i];
            gsn::sim::write_trace_csv(
                (run.out_dir() / (medium_name + "_" + std::to_string(v) + "v.csv")).string(),
                filtered);

            std::vector<double> xs, ys;
            xs.reserve(filtered.samples.size());
            ys.reserve(filtered.samples.size());
            for (const auto& s : filtered.samples) {
                xs.push_back(s.depth);
                ys.push_back(s.force);
            }
            chart.add(std::to_string(v) + " V", std::move(xs), std::move(ys));

            const double gamma = gsn::sim::dimensionless_acceleration(vib);
            summary << medium_name << ',' << v << ',' << gsn::csv::format_double(gamma)
                    << ',' << (trace.stalled ? "true" : "false") << ',';
            if (trace.stall_depth) summary << gsn::csv::format_double(*trace.stall_depth);
            summary << ',';
            if (v == 0 && trace.stall_depth) still_stall = *trace.stall_depth;
            if (v != 0 && still_stall && trace.stall_depth)
                summary << gsn::csv::format_double(*trace.stall_depth / *still_stall);
            summary << '\n';
        }
        gsn::svg::write_file((run.out_dir() / (medium_name + "_overlay.svg")).string(),
                             chart.render());
    }

    std::ofstream out(run.out_dir() / "stall_summary.csv");
    out << summary.str();
    out.close();

    run.finish();
    std::cout << "vibration sweep written to " << run.out_dir().string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// analyze-vibration
// ---------------------------------------------------------------------------

int cmd_analyze_vibration(const GlobalOpts& opts, const std::vector<std::string>& files,
                          bool average) {
    if (files.empty()) throw std::invalid_argument("analyze-vibration: no input files");
    const json cfg = resolve_config(opts);

    Run run("analyze-vibration", cfg, opts);
    run.declare("vibration_table.csv");
    if (run.dry_run()) {
        run.print_plan();
        return 0;
    }
    run.guard_overwrites();
    run.prepare_directories();

    std::ostringstream table;
    table << "file,fundamental_hz,peak_accel_m_s2\n";
    std::vector<gsn::dsp::TimeSeries> trials;
    double amp_sum = 0.0;
    for (const auto& file : files) {
        const auto ts = gsn::dsp::read_timeseries_csv(file);
        const double f0 = gsn::dsp::fundamental_frequency(ts);
        const double amp = gsn::dsp::peak_amplitude(ts);
        table << fs::path(file).filename().string() << ','
              << gsn::csv::format_double(f0) << ',' << gsn::csv::format_double(amp) << '\n';
        trials.push_back(ts);
        amp_sum += amp;
    }
    if (average) {
        table << "mean," << gsn::csv::format_double(gsn::dsp::mean_fundamental(trials))
              << ',' << gsn::csv::format_double(amp_sum / static_cast<double>(trials.size()))
              << '\n';
    }

    std::ofstream out(run.out_dir() / "vibration_table.csv");
    out << table.str();
    out.close();
    std::cout << table.str();
    run.finish();
    return 0;
}

// ---------------------------------------------------------------------------
// gen-dataset / train / evaluate / predict / pipeline
// ---------------------------------------------------------------------------

int cmd_gen_dataset(const GlobalOpts& opts) {
    const json cfg = resolve_config(opts);
    Run run("gen-dataset", cfg, opts);
    run.declare("manifest.jsonl");
    run.declare("images");
    if (run.dry_run()) {
        run.print_plan();
        return 0;
    }
    run.guard_overwrites();
    run.prepare_directories();

    const auto manifest = gsn::classify::generate_dataset(
        cfg.at("dataset").at("per_class").get<int>(), gen_config_from(cfg),
        lighting_from(cfg), calibration_from(cfg).medium("sand"),
        cfg.at("seed").get<std::uint64_t>(), run.out_dir().string(), worker_threads(cfg));
    run.finish();
    std::cout << "dataset: " << manifest.entries.size() << " images, config hash "
              << manifest.config_hash << "\n";
    return 0;
}

int cmd_train(const GlobalOpts& opts, const std::string& manifest_path) {
    const json cfg = resolve_config(opts);
    Run run("train", cfg, opts);
    run.declare("model.gsnw");
    run.declare("train_log.csv");
    if (run.dry_run()) {
        run.print_plan();
        return 0;
    }
    run.guard_overwrites();
    run.prepare_directories();

    const auto manifest = gsn::classify::read_manifest(manifest_path);
    const auto data = gsn::classify::load_dataset(
        manifest, fs::path(manifest_path).parent_path().string());
    const auto result =
        gsn::classify::train(data, train_config_from(cfg, worker_threads(cfg)));

    gsn::classify::save_weights((run.out_dir() / "model.gsnw").string(), result.model);
    gsn::classify::write_train_log_csv((run.out_dir() / "train_log.csv").string(),
                                       result.log);
    run.finish();
    const auto& last = result.log.back();
    std::cout << "trained " << last.epoch << " epochs: train acc "
              << last.train_acc << ", val acc " << last.val_acc << "\n";
    return 0;
}

int cmd_evaluate(const GlobalOpts& opts, const std::string& model_path,
                 const std::string& manifest_path, const std::string& split_name) {
    const json cfg = resolve_config(opts);
    Run run("evaluate", cfg, opts);
    run.declare("confusion.csv");
    run.declare("confusion.svg");
    run.declare("report.txt");
    if (run.dry_run()) {
        run.print_plan();
        return 0;
    }
    run.guard_overwrites();
    run.prepare_directories();

    const auto model = gsn::classify::load_weights(model_path);
    const auto manifest = gsn::classify::read_manifest(manifest_path);
    const auto data = gsn::classify::load_dataset(
        manifest, fs::path(manifest_path).parent_path().string());
    const auto cm =
        gsn::classify::evaluate(model, data, gsn::classify::parse_split(split_name));

    gsn::classify::write_confusion_csv((run.out_dir() / "confusion.csv").string(), cm);
    gsn::svg::write_file((run.out_dir() / "confusion.svg").string(),
                         gsn::svg::heatmap(
                             [&] {
                                 std::vector<std::vector<long>> rows;
                                 for (const auto& r : cm.counts)
                                     rows.emplace_back(r.begin(), r.end());
                                 return rows;
                             }(),
                             gsn::classify::all_label_names(),
                             "Confusion matrix (" + split_name + ")"));
    const std::string report = gsn::classify::confusion_report(cm);
    gsn::svg::write_file((run.out_dir() / "report.txt").string(), report);
    std::cout << report;
    run.finish();
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& image_path) {
    const auto model = gsn::classify::load_weights(model_path);
    const auto img = gsn::pngio::read_rgb8(image_path);
    const auto pred = gsn::classify::predict(model, img);
    std::cout << gsn::classify::label_name(pred.label) << ","
              << gsn::csv::format_double(pred.confidence) << "\n";
    return 0;
}

int cmd_pipeline(const GlobalOpts& opts) {
    const json cfg = resolve_config(opts);
    Run run("pipeline", cfg, opts);
    run.declare("dataset/manifest.jsonl");
    run.declare("dataset/images");
    run.declare("model.gsnw");
    run.declare("train_log.csv");
    run.declare("confusion.csv");
    run.declare("confusion.svg");
    run.declare("report.txt");
    if (run.dry_run()) {
        run.print_plan();
        return 0;
    }
    run.guard_overwrites();
    run.prepare_directories();

    const int threads = worker_threads(cfg);
    std::string stage = "gen-dataset";
    try {
        const auto dataset_dir = run.out_dir() / "dataset";
        const auto manifest = gsn::classify::generate_dataset(
            cfg.at("dataset").at("per_class").get<int>(), gen_config_from(cfg),
            lighting_from(cfg), calibration_from(cfg).medium("sand"),
            cfg.at("seed").get<std::uint64_t>(), dataset_dir.string(), threads);
        std::cout << "[pipeline] dataset: " << manifest.entries.size() << " images\n";

        stage = "train";
        const auto data = gsn::classify::load_dataset(manifest, dataset_dir.string());
        const auto result = gsn::classify::train(data, train_config_from(cfg, threads));
        gsn::classify::save_weights((run.out_dir() / "model.gsnw").string(), result.model);
        gsn::classify::write_train_log_csv((run.out_dir() / "train_log.csv").string(),
                                           result.log);
        const auto& last = result.log.back();
        std::cout << "[pipeline] train acc " << last.train_acc << ", val acc "
                  << last.val_acc << "\n";

        stage = "evaluate";
        const auto cm = gsn::classify::evaluate(result.model, data,
                                                gsn::classify::Split::Test);
        gsn::classify::write_confusion_csv((run.out_dir() / "confusion.csv").string(), cm);
        gsn::svg::write_file((run.out_dir() / "confusion.svg").string(),
                             gsn::svg::heatmap(
                                 [&] {
                                     std::vector<std::vector<long>> rows;
                                     for (const auto& r : cm.counts)
                                         rows.emplace_back(r.begin(), r.end());
                                     return rows;
                                 }(),
                                 gsn::classify::all_label_names(),
                                 "Confusion matrix (test)"));
        const std::string report = gsn::classify::confusion_report(cm);
        gsn::svg::write_file((run.out_dir() / "report.txt").string(), report);
        std::cout << report;
    } catch (const std::exception& e) {
        run.mark_failed(stage, e.what());
        throw std::runtime_error("pipeline stage '" + stage + "' failed: " + e.what());
    }

    run.finish();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"granusense: granular-media tactile sensing toolkit"};
    app.set_version_flag("--version", std::string("granusense ") + kVersion);

    GlobalOpts opts;
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults,
                 "Print the default configuration as JSON and exit");
    app.add_option("--config", opts.config_path, "JSON config file (overrides defaults)");
    auto* out_opt = app.add_option("--out", opts.out_dir, "Output directory");
    auto* seed_opt = app.add_option("--seed", opts.seed, "Global random seed");
    app.add_flag("--force", opts.force, "Overwrite existing outputs");
    app.add_flag("--dry-run", opts.dry_run,
                 "Print the resolved config and planned outputs, write nothing");
    app.add_flag("--deterministic", opts.deterministic,
                 "Single-threaded bitwise-deterministic mode");

    auto* sweep_cmd = app.add_subcommand(
        "vibration-sweep", "Simulate penetration across media and vibration profiles");
    auto* analyze_cmd = app.add_subcommand(
        "analyze-vibration", "Extract fundamental frequencies from accelerometer CSVs");
    std::vector<std::string> analyze_files;
    bool analyze_average = false;
    analyze_cmd->add_option("files", analyze_files, "Accelerometer CSV files")
        ->required();
    analyze_cmd->add_flag("--average", analyze_average,
                          "Append a row averaging the per-trial fundamentals");

    auto* gen_cmd = app.add_subcommand("gen-dataset", "Render the labeled synthetic corpus");
    auto* train_cmd = app.add_subcommand("train", "Train the shape classifier");
    std::string train_manifest;
    train_cmd->add_option("--manifest", train_manifest, "Dataset manifest path")->required();

    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a model on a dataset split");
    std::string eval_model, eval_manifest, eval_split = "test";
    eval_cmd->add_option("--model", eval_model, "Weights file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest path")->required();
    eval_cmd->add_option("--split", eval_split, "Split: train, val or test");

    auto* predict_cmd = app.add_subcommand("predict", "Classify a single tactile image");
    std::string predict_model, predict_image;
    predict_cmd->add_option("--model", predict_model, "Weights file")->required();
    predict_cmd->add_option("--image", predict_image, "PNG tactile image")->required();

    auto* pipeline_cmd = app.add_subcommand(
        "pipeline", "gen-dataset, train and evaluate in one run");

    app.require_subcommand(0, 1);
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    opts.have_out = out_opt->count() > 0;
    opts.have_seed = seed_opt->count() > 0;

    try {
        if (print_defaults) {
            std::cout << default_config().dump(2) << "\n";
            return 0;
        }
        if (sweep_cmd->parsed()) return cmd_vibration_sweep(opts);
        if (analyze_cmd->parsed())
            return cmd_analyze_vibration(opts, analyze_files, analyze_average);
        if (gen_cmd->parsed()) return cmd_gen_dataset(opts);
        if (train_cmd->parsed()) return cmd_train(opts, train_manifest);
        if (eval_cmd->parsed())
            return cmd_evaluate(opts, eval_model, eval_manifest, eval_split);
        if (predict_cmd->parsed()) return cmd_predict(predict_model, predict_image);
        if (pipeline_cmd->parsed()) return cmd_pipeline(opts);
        std::cerr << app.help();
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
