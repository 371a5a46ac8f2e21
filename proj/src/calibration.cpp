#include "granusense/calibration.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gsn::sim {

namespace {

using nlohmann::json;

const char* mode_name(InteractionMode m) {
    switch (m) {
    case InteractionMode::Sticks: return "sticks";
    case InteractionMode::Blocks: return "blocks";
    case InteractionMode::Slips: return "slips";
    }
    return "sticks";
}

InteractionMode parse_mode(const std::string& s) {
    if (s == "sticks") return InteractionMode::Sticks;
    if (s == "blocks") return InteractionMode::Blocks;
    if (s == "slips") return InteractionMode::Slips;
    throw std::invalid_argument("calibration: unknown interaction_mode '" + s + "'");
}

json medium_to_json(const MediumSpec& m) {
    return json{{"bulk_density_kg_m3", m.bulk_density},
                {"grain_diameter_m", m.grain_diameter},
                {"grain_length_m", m.grain_length},
                {"jamming_k", m.jamming_k},
                {"onset_depth_still_m", m.onset_depth_still},
                {"onset_extension_vibrated_m", m.onset_extension_vibrated},
                {"interaction_mode", mode_name(m.mode)},
                {"force_exponent_p", m.force_exponent},
                {"fluidization_c", m.fluidization_c},
                {"noise_sigma_n", m.noise_sigma}};
}

MediumSpec medium_from_json(const std::string& name, const json& j) {
    MediumSpec m;
    m.name = name;
    m.bulk_density = j.at("bulk_density_kg_m3").get<double>();
    m.grain_diameter = j.at("grain_diameter_m").get<double>();
    m.grain_length = j.value("grain_length_m", m.grain_diameter);
    m.jamming_k = j.at("jamming_k").get<double>();
    m.onset_depth_still = j.at("onset_depth_still_m").get<double>();
    m.onset_extension_vibrated = j.at("onset_extension_vibrated_m").get<double>();
    m.mode = parse_mode(j.at("interaction_mode").get<std::string>());
    m.force_exponent = j.at("force_exponent_p").get<double>();
    m.fluidization_c = j.at("fluidization_c").get<double>();
    m.noise_sigma = j.at("noise_sigma_n").get<double>();
    m.validate();
    return m;
}

} // namespace

const MediumSpec& Calibration::medium(const std::string& name) const {
    auto it = media.find(name);
    if (it == media.end())
        throw std::invalid_argument("calibration: unknown medium '" + name + "'");
    return it->second;
}

Calibration Calibration::defaults() {
    Calibration cal;
    cal.probe = ProbeSpec::default_probe();
    cal.media["sand"] = MediumSpec::sand();
    cal.media["rice"] = MediumSpec::rice();
    cal.media["beans"] = MediumSpec::beans();
    return cal;
}

Calibration load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open calibration file " + path);
    json j = json::parse(in);

    Calibration cal;
    const json& p = j.at("probe");
    cal.probe.tip_area = p.at("tip_area_m2").get<double>();
    cal.probe.descent_speed = p.at("descent_speed_m_s").get<double>();
    cal.probe.force_limit = p.at("force_limit_n").get<double>();
    cal.probe.validate();

    for (const auto& [name, jm] : j.at("media").items())
        cal.media[name] = medium_from_json(name, jm);
    return cal;
}

void save_calibration(const std::string& path, const Calibration& cal) {
    json j;
    j["probe"] = json{{"tip_area_m2", cal.probe.tip_area},
                      {"descent_speed_m_s", cal.probe.descent_speed},
                      {"force_limit_n", cal.probe.force_limit}};
    json media = json::object();
    for (const auto& [name, m] : cal.media) media[name] = medium_to_json(m);
    j["media"] = media;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write calibration file " + path);
    out << j.dump(2) << "\n";
}

} // namespace gsn::sim
