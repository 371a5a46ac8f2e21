// Granular jamming resistance on a wedge-tipped probe, its reduction under
// mechanical vibration, and constant-speed penetration runs integrated to
// stall. Also models how grains lodge between the sensor and a buried object
// (occlusion) and how clearing actions mitigate it.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gsn::sim {

constexpr double kGravity = 9.80665; // m/s^2

// How grains interact with the sensing face when it approaches an object:
// sand-like grains stick at the contact boundary, rice-like grains can block
// the object entirely, slippery grains (mung beans, lentils) leave no trace.
enum class InteractionMode { Sticks, Blocks, Slips };

enum class ClearingAction { None, Vibrate, Twist };

struct MediumSpec {
    std::string name;
    double bulk_density = 0.0;             // kg/m^3
    double grain_diameter = 0.0;           // m (minor axis for elongated grains)
    double grain_length = 0.0;             // m (major axis; == diameter if round)
    double jamming_k = 0.0;                // dimensionless force-law coefficient
    double onset_depth_still = 0.0;        // z0, m
    double onset_extension_vibrated = 0.0; // dz0, m
    InteractionMode mode = InteractionMode::Sticks;

    // Calibrated force-law terms (shipped in data/calibration.json).
    double force_exponent = 1.5;  // p
    double fluidization_c = 0.0;  // c in 1/(1 + c*Gamma)
    double noise_sigma = 0.05;    // N, measurement noise

    void validate() const; // throws std::domain_error

    static MediumSpec sand();
    static MediumSpec rice();
    // Slippery reference medium (beans/lentils class); occlusion-free.
    static MediumSpec beans();
};

struct VibrationProfile {
    double voltage = 0.0;         // V; 0 means vibration off
    double frequency = 0.0;       // Hz
    double accel_amplitude = 0.0; // m/s^2

    void validate() const;

    static VibrationProfile off();
    // Measured tip response at the motor's operating points (0/6/8/10/12 V).
    static VibrationProfile at_voltage(int volts);
};

struct ProbeSpec {
    double tip_area = 3.801327e-4; // m^2, 22 mm outer diameter cross-section
    double descent_speed = 0.002;  // m/s
    double force_limit = 40.0;     // N, robot stall threshold

    void validate() const;
    static ProbeSpec default_probe() { return ProbeSpec{}; }
};

struct TraceSample {
    double time = 0.0;  // s
    double depth = 0.0; // m
    double force = 0.0; // N
};

struct ForceTrace {
    std::vector<TraceSample> samples;
    bool stalled = false;
    std::optional<double> stall_depth; // m, present iff stalled
};

// Gamma = accel amplitude / g; the control parameter for vibrated granular
// media. Zero when vibration is off.
double dimensionless_acceleration(const VibrationProfile& vib);

// Depth where jamming resistance engages: z0 still, z0 + dz0*min(Gamma, 1)
// under vibration.
double onset_depth(const MediumSpec& medium, const VibrationProfile& vib);

// F = k * rho * g * A * (depth - z_on)^p / (1 + c*Gamma) beyond onset, 0 above.
double resistance_force(double depth, const MediumSpec& medium,
                        const ProbeSpec& probe, const VibrationProfile& vib);

struct SimParams {
    double max_depth = 0.1524;  // m, 6 inch media depth
    double sample_rate = 500.0; // Hz
};

// Constant-speed descent sampled at sample_rate; terminates at stall
// (sampled force >= probe.force_limit) or max_depth. Adds zero-mean
// measurement noise and, when vibrating, a sinusoidal ripple at the vibration
// frequency. Deterministic for a fixed seed.
ForceTrace simulate_penetration(const MediumSpec& medium, const ProbeSpec& probe,
                                const VibrationProfile& vib, double max_depth,
                                double sample_rate, std::uint64_t noise_seed);

// Fraction of the sensing face blocked by grains when approaching an object,
// in [0, 1]. Depends on the interaction mode and the clearing action.
double occlusion_fraction(const MediumSpec& medium, ClearingAction action,
                          std::uint64_t rng_seed);

// ForceTrace CSV: header "time_s,depth_m,force_n".
void write_trace_csv(const std::string& path, const ForceTrace& trace);
ForceTrace read_trace_csv(const std::string& path);

ClearingAction parse_action(const std::string& name);
const char* action_name(ClearingAction a);

} // namespace gsn::sim
