// Nine-class labeled synthetic corpus: generation, manifest persistence, and
// the training-time augmentation pipeline.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "granusense/image.hpp"
#include "granusense/rng.hpp"
#include "granusense/sim.hpp"
#include "granusense/tactile.hpp"

namespace gsn::classify {

constexpr int kNumClasses = 9;

enum class ClassLabel : int {
    TriangleClean = 0,
    SquareClean,
    HexagonClean,
    CircleClean,
    TriangleSand,
    SquareSand,
    HexagonSand,
    CircleSand,
    ZeroContact,
};

const char* label_name(ClassLabel label);
ClassLabel parse_label(const std::string& name);
std::vector<std::string> all_label_names();

enum class Split { Train, Val, Test };
const char* split_name(Split split);
Split parse_split(const std::string& name);

// Per-class split sizes following the 1200/200/100-of-1500 ratio.
void split_counts(int per_class, int& train, int& val, int& test);

struct PoseRecord {
    double x = 0.0;            // mm
    double y = 0.0;            // mm
    double rotation_deg = 0.0;
    double press_depth = 0.0;  // mm
    double diameter = 0.0;     // mm
};

struct ManifestEntry {
    std::string path; // relative to the manifest's directory
    ClassLabel label = ClassLabel::ZeroContact;
    PoseRecord pose;
    std::uint64_t seed = 0;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::string config_hash;
    int per_class = 0;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> entries;
};

struct GenConfig {
    tactile::GridSpec grid;
    double diameter_min = 8.5;  // mm, circumscribed
    double diameter_max = 12.5;
    double press_min = 0.6;     // mm
    double press_max = 1.2;
    double edge_margin = 1.0;   // mm kept between footprint and frame edge
    double clutter_prob = 0.5;  // chance a zero-contact image carries loose grains
    int clutter_max = 6;
    // Camera noise applied to every generated frame; also guarantees that no
    // two images (in particular zero-contact ones) are byte-identical, which
    // the split-hygiene check relies on.
    double sensor_noise_sigma = 0.003;
};

// Renders per_class images for each of the nine classes under out_dir,
// writes out_dir/manifest.jsonl, and returns the manifest. Deterministic for
// fixed (config, seed) regardless of thread count. per_class must be >= 30.
DatasetManifest generate_dataset(int per_class, const GenConfig& cfg,
                                 const tactile::LightingModel& lighting,
                                 const sim::MediumSpec& sand,
                                 std::uint64_t seed, const std::string& out_dir,
                                 int threads = 1);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

// ---------------------------------------------------------------------------
// Augmentation: random crop (>= min area) resized back, rotation in
// [-180, 180), and per-channel Gaussian noise, clamped to [0, 1].
// ---------------------------------------------------------------------------

struct AugmentParams {
    double crop_scale = 1.0;     // linear scale, sqrt(area fraction)
    double crop_cx = -1.0;       // crop centre in pixel coords; <0 = image centre
    double crop_cy = -1.0;
    double rotation_deg = 0.0;
    double noise_sigma = 0.0;
};

struct AugmentConfig {
    bool crop = true;
    bool rotate = true;
    bool noise = true;
    double min_crop_area = 0.85;
    double noise_sigma = 0.02;
};

AugmentParams draw_augment_params(const AugmentConfig& cfg, int width, int height, Rng& rng);
TactileImage augment(const TactileImage& img, const AugmentParams& params, Rng& rng);
TactileImage augment(const TactileImage& img, const AugmentConfig& cfg, Rng& rng);

} // namespace gsn::classify
