// Forward model of the sensing surface: presses parameterized shapes into the
// gel, injects grain distortion, and renders three-channel images under
// directional illumination.
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "granusense/image.hpp"
#include "granusense/sim.hpp"

namespace gsn::tactile {

// Gel sheet thickness (mm). Sets the press-depth budget and the
// characteristic falloff width of an indentation boundary.
constexpr double kGelThicknessMm = 1.5;

// Gaussian falloff kernel whose FWHM equals the gel thickness.
constexpr double kFalloffSigmaMm = kGelThicknessMm / 2.35482004503;

enum class ShapeKind { Triangle, Square, Hexagon, Circle };

struct Pose {
    double x = 8.0;            // mm, shape centre
    double y = 8.0;            // mm
    double rotation_deg = 0.0;
};

struct ShapeSpec {
    ShapeKind kind = ShapeKind::Circle;
    double circumscribed_diameter = 10.0; // mm
    Pose pose;
    double press_depth = 1.0; // mm, 0 = no contact

    void validate() const;
};

struct GridSpec {
    int width = 64;
    int height = 64;
    double resolution = 0.25; // mm per pixel (16 mm field of view)
};

// Antialiased footprint occupancy in [0, 1] per pixel (4x4 subsampling).
std::vector<double> footprint_coverage(const ShapeSpec& shape, const GridSpec& grid);

// Closed-form footprint area of the polygon/circle, mm^2.
double analytic_footprint_area_mm2(const ShapeSpec& shape);

// Interior at press_depth with a smooth falloff outside the boundary:
// convolution of the antialiased footprint with a radially symmetric Gaussian
// of FWHM = gel thickness. Throws if the footprint exceeds the grid.
HeightMap press_shape(const ShapeSpec& shape, const GridSpec& grid);

// Grain distortion. Sticks: additive spherical-cap bumps along the footprint
// boundary band. Blocks: elongated grain bumps overwrite part or all of the
// footprint with probability-of-area occlusion_fraction. Slips: identity.
// Deterministic per seed.
HeightMap add_grains(const HeightMap& hm, const sim::MediumSpec& medium,
                     sim::ClearingAction action, std::uint64_t seed);

// Loose clutter resting against the free gel (used for zero-contact scenes).
HeightMap add_loose_grains(const HeightMap& hm, const sim::MediumSpec& medium,
                           int count, std::uint64_t seed);

// n ~ (-dh/dx, -dh/dy, 1), central differences inside, one-sided at borders.
NormalMap normals_from_heightmap(const HeightMap& hm);

// Three effective directional lights mapped to the R, G, B channels.
struct LightingModel {
    std::array<std::array<double, 3>, 3> direction{}; // unit vectors, one per channel
    std::array<double, 3> intensity{};
    std::array<double, 3> ambient{};

    void validate() const; // unit, well-conditioned triad, positive intensity
    double condition_number() const;

    static LightingModel default_model(); // azimuths 120 deg apart, 45 deg elevation
};

LightingModel load_lighting(const std::string& path);
void save_lighting(const std::string& path, const LightingModel& lm);

// Lambertian shading: channel c = clamp(ambient_c + intensity_c * max(0, n.l_c)).
TactileImage shade(const NormalMap& nm, const LightingModel& lighting);

// press -> add_grains (skipped when medium is null) -> normals -> shade.
TactileImage render(const ShapeSpec& shape, const sim::MediumSpec* medium,
                    sim::ClearingAction action, const LightingModel& lighting,
                    std::uint64_t seed, const GridSpec& grid = {});

const char* shape_name(ShapeKind k);
ShapeKind parse_shape(const std::string& name);

} // namespace gsn::tactile
