#include "granusense/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "granusense/csv.hpp"
#include "granusense/rng.hpp"

namespace gsn::sim {

namespace {

// Ripple amplitude added to vibrated traces, N per unit Gamma. Chosen so the
// resonant 10 V profile keeps showing oscillation after alpha=0.1 smoothing
// while the weaker profiles are flattened into the noise floor.
constexpr double kRippleNewtonPerGamma = 0.8;

// Occlusion model constants. Sticks media leave a thin boundary fringe that
// no action clears; Blocks media cover most of the face until vibrated or
// twisted free, twisting being the most effective.
constexpr double kSticksBase = 0.08;
constexpr double kSticksJitter = 0.03;
constexpr double kBlocksMeanNone = 0.85;
constexpr double kBlocksMeanVibrate = 0.50;
constexpr double kBlocksMeanTwist = 0.20;
constexpr double kBlocksJitter = 0.12;

} // namespace

void MediumSpec::validate() const {
    if (!(bulk_density > 0.0)) throw std::domain_error("medium: bulk_density must be > 0");
    if (!(grain_diameter > 0.0)) throw std::domain_error("medium: grain_diameter must be > 0");
    if (!(grain_length >= grain_diameter)) throw std::domain_error("medium: grain_length must be >= grain_diameter");
    if (!(jamming_k > 0.0)) throw std::domain_error("medium: jamming_k must be > 0");
    if (onset_depth_still < 0.0) throw std::domain_error("medium: onset_depth_still must be >= 0");
    if (onset_extension_vibrated < 0.0) throw std::domain_error("medium: onset_extension_vibrated must be >= 0");
    if (!(force_exponent > 0.0)) throw std::domain_error("medium: force_exponent must be > 0");
    if (fluidization_c < 0.0) throw std::domain_error("medium: fluidization_c must be >= 0");
    if (noise_sigma < 0.0) throw std::domain_error("medium: noise_sigma must be >= 0");
}

MediumSpec MediumSpec::sand() {
    MediumSpec m;
    m.name = "sand";
    m.bulk_density = 1578.56;
    m.grain_diameter = 0.0005;
    m.grain_length = 0.0005;
    m.jamming_k = 520.0;
    m.onset_depth_still = 0.010;
    m.onset_extension_vibrated = 0.020;
    m.mode = InteractionMode::Sticks;
    m.force_exponent = 1.5;
    m.fluidization_c = 0.60;
    m.noise_sigma = 0.05;
    return m;
}

MediumSpec MediumSpec::rice() {
    MediumSpec m;
    m.name = "rice";
    m.bulk_density = 941.48;
    m.grain_diameter = 0.002;
    m.grain_length = 0.006;
    m.jamming_k = 1020.0;
    m.onset_depth_still = 0.010;
    m.onset_extension_vibrated = 0.040;
    m.mode = InteractionMode::Blocks;
    m.force_exponent = 1.5;
    m.fluidization_c = 0.273;
    m.noise_sigma = 0.05;
    return m;
}

MediumSpec MediumSpec::beans() {
    MediumSpec m;
    m.name = "beans";
    m.bulk_density = 850.0;
    m.grain_diameter = 0.004;
    m.grain_length = 0.004;
    m.jamming_k = 800.0;
    m.onset_depth_still = 0.010;
    m.onset_extension_vibrated = 0.030;
    m.mode = InteractionMode::Slips;
    m.force_exponent = 1.5;
    m.fluidization_c = 0.4;
    m.noise_sigma = 0.05;
    return m;
}

void VibrationProfile::validate() const {
    if (frequency < 0.0) throw std::domain_error("vibration: frequency must be >= 0");
    if (accel_amplitude < 0.0) throw std::domain_error("vibration: accel_amplitude must be >= 0");
    if (frequency > 300.0) throw std::domain_error("vibration: frequency above 300 Hz exceeds the motor rating");
    if (voltage == 0.0 && (frequency != 0.0 || accel_amplitude != 0.0))
        throw std::domain_error("vibration: 0 V encodes vibration off (frequency = accel = 0)");
}

VibrationProfile VibrationProfile::off() { return VibrationProfile{0.0, 0.0, 0.0}; }

VibrationProfile VibrationProfile::at_voltage(int volts) {
    switch (volts) {
    case 0: return off();
    case 6: return VibrationProfile{6.0, 156.0, 9.6};
    case 8: return VibrationProfile{8.0, 189.0, 19.8};
    case 10: return VibrationProfile{10.0, 213.0, 23.6}; // resonance
    case 12: return VibrationProfile{12.0, 172.0, 14.7}; // measured drop past resonance
    default:
        throw std::invalid_argument("no measured vibration profile for " +
                                    std::to_string(volts) + " V (supported: 0, 6, 8, 10, 12)");
    }
}

void ProbeSpec::validate() const {
    if (!(tip_area > 0.0)) throw std::domain_error("probe: tip_area must be > 0");
    if (!(descent_speed > 0.0)) throw std::domain_error("probe: descent_speed must be > 0");
    if (!(force_limit > 0.0)) throw std::domain_error("probe: force_limit must be > 0");
}

double dimensionless_acceleration(const VibrationProfile& vib) {
    return vib.accel_amplitude / kGravity;
}

double onset_depth(const MediumSpec& medium, const VibrationProfile& vib) {
    const double gamma = dimensionless_acceleration(vib);
    // Saturated onset shift: the measured early-rise offsets are fixed per
    // medium, not proportional to Gamma.
    return medium.onset_depth_still +
           medium.onset_extension_vibrated * std::min(gamma, 1.0);
}

double resistance_force(double depth, const MediumSpec& medium,
                        const ProbeSpec& probe, const VibrationProfile& vib) {
    if (depth < 0.0) throw std::domain_error("resistance_force: depth must be >= 0");
    const double z_on = onset_depth(medium, vib);
    if (depth <= z_on) return 0.0;
    const double gamma = dimensionless_acceleration(vib);
    const double jam = medium.jamming_k * medium.bulk_density * kGravity * probe.tip_area *
                       std::pow(depth - z_on, medium.force_exponent);
    return jam / (1.0 + medium.fluidization_c * gamma);
}

ForceTrace simulate_penetration(const MediumSpec& medium, const ProbeSpec& probe,
                                const VibrationProfile& vib, double max_depth,
                                double sample_rate, std::uint64_t noise_seed) {
    medium.validate();
    probe.validate();
    vib.validate();
    if (!(max_depth > 0.0)) throw std::domain_error("simulate_penetration: max_depth must be > 0");
    if (!(sample_rate > 0.0)) throw std::domain_error("simulate_penetration: sample_rate must be > 0");

    Rng rng(noise_seed);
    const double gamma = dimensionless_acceleration(vib);
    const double ripple_amp = (vib.voltage > 0.0) ? kRippleNewtonPerGamma * gamma : 0.0;
    const double dt = 1.0 / sample_rate;

    ForceTrace trace;
    trace.samples.reserve(static_cast<std::size_t>(max_depth / probe.descent_speed * sample_rate) + 2);

    for (std::size_t i = 0;; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double depth = std::min(t * probe.descent_speed, max_depth);
        double force = resistance_force(depth, medium, probe, vib);
        if (ripple_amp > 0.0 && depth > onset_depth(medium, vib))
            force += ripple_amp * std::sin(2.0 * 3.14159265358979323846 * vib.frequency * t);
        if (medium.noise_sigma > 0.0) force += rng.normal(0.0, medium.noise_sigma);
        force = std::max(force, 0.0);

        trace.samples.push_back({t, depth, force});

        if (force >= probe.force_limit) {
            trace.stalled = true;
            trace.stall_depth = depth;
            break;
        }
        if (depth >= max_depth) break;
    }
    return trace;
}

double occlusion_fraction(const MediumSpec& medium, ClearingAction action,
                          std::uint64_t rng_seed) {
    switch (medium.mode) {
    case InteractionMode::Slips:
        return 0.0;
    case InteractionMode::Sticks: {
        // Grains permanently stuck at the contact boundary; clearing actions
        // do not move them, so the draw must not depend on the action.
        Rng rng(derive_seed(rng_seed, 0x5711C5));
        const double f = kSticksBase + kSticksJitter * (2.0 * rng.uniform() - 1.0);
        return std::clamp(f, 0.0, 1.0);
    }
    case InteractionMode::Blocks: {
        Rng rng(derive_seed(rng_seed, 0xB10C5));
        double mean = kBlocksMeanNone;
        if (action == ClearingAction::Vibrate) mean = kBlocksMeanVibrate;
        if (action == ClearingAction::Twist) mean = kBlocksMeanTwist;
        const double f = mean + kBlocksJitter * (2.0 * rng.uniform() - 1.0);
        return std::clamp(f, 0.0, 1.0);
    }
    }
    return 0.0;
}

void write_trace_csv(const std::string& path, const ForceTrace& trace) {
    auto out = csv::open_out(path);
    out << "time_s,depth_m,force_n\n";
    for (const auto& s : trace.samples)
        out << csv::format_double(s.time) << ',' << csv::format_double(s.depth) << ','
            << csv::format_double(s.force) << '\n';
}

ForceTrace read_trace_csv(const std::string& path) {
    auto in = csv::open_in(path);
    ForceTrace trace;
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (!saw_header) {
            if (line.rfind("time_s,", 0) != 0)
                throw csv::ParseError(path, lineno, "expected header 'time_s,depth_m,force_n'");
            saw_header = true;
            continue;
        }
        const auto fields = csv::split_fields(line);
        if (fields.size() != 3)
            throw csv::ParseError(path, lineno, "expected 3 fields");
        trace.samples.push_back({csv::parse_double(fields[0], path, lineno),
                                 csv::parse_double(fields[1], path, lineno),
                                 csv::parse_double(fields[2], path, lineno)});
    }
    if (!saw_header) throw csv::ParseError(path, lineno == 0 ? 1 : lineno, "empty trace file");
    return trace;
}

ClearingAction parse_action(const std::string& name) {
    if (name == "none") return ClearingAction::None;
    if (name == "vibrate") return ClearingAction::Vibrate;
    if (name == "twist") return ClearingAction::Twist;
    throw std::invalid_argument("unknown clearing action '" + name + "'");
}

const char* action_name(ClearingAction a) {
    switch (a) {
    case ClearingAction::None: return "none";
    case ClearingAction::Vibrate: return "vibrate";
    case ClearingAction::Twist: return "twist";
    }
    return "none";
}

} // namespace gsn::sim
