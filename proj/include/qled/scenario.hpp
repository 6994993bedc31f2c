#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qled/cascade.hpp"
#include "qled/config.hpp"
#include "qled/polarization.hpp"
#include "qled/timetag.hpp"

namespace qled {

// Detector channel roles, in channel-plan order. These strings are both the
// [detector.<role>] config section names and the stream channel labels.
extern const std::array<std::string, 4> kChannelRoles;

// A fully validated simulation setup: source, analyzers, detector chain.
struct Scenario {
    CascadeParams source;
    Basis basis_xx = Basis::HV;
    Basis basis_x = Basis::HV;
    double duration_s = 0.0;
    std::uint64_t seed = 0;
    std::vector<DetectorChannel> detectors;  // in kChannelRoles order
    ArmChannels channels;
    std::map<std::uint16_t, std::string> channel_map;  // channel -> role label
    std::optional<TemperatureModel> temperature;
};

// Builds a Scenario from a parsed config, collecting every validation problem
// into one ConfigError instead of stopping at the first. Non-fatal oddities
// (e.g. a dead time shorter than one time bin) land in *warnings.
Scenario scenario_from_config(const ConfigFile& cfg,
                              std::vector<std::string>* warnings = nullptr);

// End-to-end simulation: cascades -> analyzer ports -> detector chain.
// Deterministic in (scenario, seed).
TimeTagStream simulate_stream(const Scenario& sc, std::uint64_t seed,
                              DetectorStats* stats = nullptr);

// Effective parameters as key=value text, for reproducibility sidecars.
std::string scenario_manifest(const Scenario& sc, std::uint64_t seed);

}  // namespace qled
