// Shipped calibration: probe geometry, force limit, and per-medium force-law
// parameters. data/calibration.json is the human-readable record of the
// compiled defaults; the CLI can load a modified copy.
#pragma once

#include <map>
#include <string>

#include "granusense/sim.hpp"

namespace gsn::sim {

struct Calibration {
    ProbeSpec probe;
    std::map<std::string, MediumSpec> media;

    const MediumSpec& medium(const std::string& name) const;

    static Calibration defaults();
};

Calibration load_calibration(const std::string& path);
void save_calibration(const std::string& path, const Calibration& cal);

} // namespace gsn::sim
