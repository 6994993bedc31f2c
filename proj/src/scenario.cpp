#include "qled/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "qled/csv.hpp"
#include "qled/errors.hpp"

namespace qled {

const std::array<std::string, 4> kChannelRoles = {"xx_plus", "xx_minus", "x_plus", "x_minus"};

namespace {

class Collector {
  public:
    void fail(const std::string& what) { errors_.push_back(what); }

    bool ok() const { return errors_.empty(); }

    [[noreturn]] void raise() const {
        std::ostringstream ss;
        ss << "config invalid:";
        for (const auto& e : errors_) ss << "\n  - " << e;
        throw ConfigError(ss.str());
    }

  private:
    std::vector<std::string> errors_;
};

std::optional<double> parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') return std::nullopt;
    return v;
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
    if (s.empty() || s[0] == '-') return std::nullopt;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') return std::nullopt;
    return static_cast<std::uint64_t>(v);
}

// Fetches and parses one numeric key, appending a diagnostic on failure.
double take_double(const ConfigFile& cfg, const std::string& section, const std::string& key,
                   double fallback, Collector& errs, bool required = false) {
    const auto raw = cfg.get(section, key);
    if (!raw) {
        if (required) errs.fail("[" + section + "] missing required key '" + key + "'");
        return fallback;
    }
    const auto v = parse_double(*raw);
    if (!v) {
        errs.fail("[" + section + "] " + key + " = '" + *raw + "' is not a number");
        return fallback;
    }
    return *v;
}

void check_known_keys(const ConfigFile& cfg, const std::string& section,
                      const std::set<std::string>& known, Collector& errs) {
    for (const auto& k : cfg.keys(section)) {
        if (!known.count(k))
            errs.fail("[" + section + "] unknown key '" + k + "'");
    }
}

}  // namespace

Scenario scenario_from_config(const ConfigFile& cfg, std::vector<std::string>* warnings) {
    Collector errs;
    Scenario sc;

    const std::set<std::string> known_sections_fixed = {"source", "measurement", "temperature"};
    for (const auto& name : cfg.section_names()) {
        if (known_sections_fixed.count(name)) continue;
        if (name.rfind("detector.", 0) == 0) {
            const std::string role = name.substr(9);
            if (std::find(kChannelRoles.begin(), kChannelRoles.end(), role) ==
                kChannelRoles.end()) {
                errs.fail("unknown detector section [" + name +
                          "]; expected one of xx_plus, xx_minus, x_plus, x_minus");
            }
            continue;
        }
        errs.fail("unknown section [" + name + "]");
    }

    // --- [source] ---
    if (!cfg.has_section("source")) {
        errs.fail("missing [source] section");
    } else {
        check_known_keys(cfg, "source",
                         {"fss_uev", "x_lifetime_ps", "xx_lifetime_ps", "cycle_rate_hz",
                          "reexcitation_rate_hz", "background_fraction", "noise_mode"},
                         errs);
        auto& s = sc.source;
        s.fss_uev = take_double(cfg, "source", "fss_uev", s.fss_uev, errs);
        s.x_lifetime_ps = take_double(cfg, "source", "x_lifetime_ps", s.x_lifetime_ps, errs);
        s.xx_lifetime_ps = take_double(cfg, "source", "xx_lifetime_ps", s.xx_lifetime_ps, errs);
        s.cycle_rate_hz = take_double(cfg, "source", "cycle_rate_hz", s.cycle_rate_hz, errs);
        s.reexcitation_rate_hz =
            take_double(cfg, "source", "reexcitation_rate_hz", s.reexcitation_rate_hz, errs);
        s.background_fraction =
            take_double(cfg, "source", "background_fraction", s.background_fraction, errs);
        if (s.fss_uev < 0.0) errs.fail("[source] fss_uev must be nonnegative");
        if (s.x_lifetime_ps <= 0.0) errs.fail("[source] x_lifetime_ps must be positive");
        if (s.xx_lifetime_ps <= 0.0) errs.fail("[source] xx_lifetime_ps must be positive");
        if (s.cycle_rate_hz <= 0.0) errs.fail("[source] cycle_rate_hz must be positive");
        if (s.reexcitation_rate_hz < 0.0)
            errs.fail("[source] reexcitation_rate_hz must be nonnegative");
        if (s.background_fraction < 0.0 || s.background_fraction >= 1.0)
            errs.fail("[source] background_fraction must lie in [0, 1)");
        if (const auto mode = cfg.get("source", "noise_mode")) {
            try {
                s.noise_mode = noise_mode_from_name(*mode);
            } catch (const ConfigError& e) {
                errs.fail(std::string("[source] ") + e.what());
            }
        }
    }

    // --- [measurement] ---
    if (!cfg.has_section("measurement")) {
        errs.fail("missing [measurement] section");
    } else {
        check_known_keys(cfg, "measurement", {"basis_xx", "basis_x", "duration_s", "seed"},
                         errs);
        for (auto [key, target] : {std::pair{"basis_xx", &sc.basis_xx},
                                   std::pair{"basis_x", &sc.basis_x}}) {
            if (const auto b = cfg.get("measurement", key)) {
                try {
                    *target = basis_from_name(*b);
                } catch (const ConfigError& e) {
                    errs.fail(std::string("[measurement] ") + e.what());
                }
            } else {
                errs.fail(std::string("[measurement] missing required key '") + key + "'");
            }
        }
        sc.duration_s = take_double(cfg, "measurement", "duration_s", 0.0, errs, true);
        if (sc.duration_s < 0.0) errs.fail("[measurement] duration_s must be nonnegative");
        if (const auto seed = cfg.get("measurement", "seed")) {
            if (const auto v = parse_u64(*seed)) {
                sc.seed = *v;
            } else {
                errs.fail("[measurement] seed = '" + *seed +
                          "' is not an unsigned 64-bit integer");
            }
        } else {
            errs.fail("[measurement] missing required key 'seed' (runs must be reproducible)");
        }
    }

    // --- [detector.<role>] ---
    std::set<std::uint16_t> used_channels;
    std::array<std::uint16_t, 4> role_channel{};
    for (std::size_t i = 0; i < kChannelRoles.size(); ++i) {
        const std::string section = "detector." + kChannelRoles[i];
        if (!cfg.has_section(section)) {
            errs.fail("missing [" + section + "] section");
            continue;
        }
        check_known_keys(cfg, section,
                         {"channel", "efficiency", "jitter_fwhm_ps", "dark_rate_hz",
                          "dead_time_ps", "time_bin_ps"},
                         errs);
        DetectorChannel dc;
        if (const auto ch = cfg.get(section, "channel")) {
            const auto v = parse_u64(*ch);
            if (!v || *v > 0xFFFF) {
                errs.fail("[" + section + "] channel = '" + *ch +
                          "' is not a channel number (0-65535)");
            } else {
                dc.channel = static_cast<std::uint16_t>(*v);
                if (!used_channels.insert(dc.channel).second)
                    errs.fail("[" + section + "] channel " + *ch +
                              " is already assigned to another detector");
            }
        } else {
            errs.fail("[" + section + "] missing required key 'channel'");
        }
        auto& m = dc.model;
        m.efficiency = take_double(cfg, section, "efficiency", m.efficiency, errs);
        m.jitter_fwhm_ps = take_double(cfg, section, "jitter_fwhm_ps", m.jitter_fwhm_ps, errs);
        m.dark_rate_hz = take_double(cfg, section, "dark_rate_hz", m.dark_rate_hz, errs);
        m.dead_time_ps = take_double(cfg, section, "dead_time_ps", m.dead_time_ps, errs);
        m.time_bin_ps = take_double(cfg, section, "time_bin_ps", m.time_bin_ps, errs);
        if (m.efficiency < 0.0 || m.efficiency > 1.0)
            errs.fail("[" + section + "] efficiency must lie in [0, 1]");
        if (m.jitter_fwhm_ps < 0.0)
            errs.fail("[" + section + "] jitter_fwhm_ps must be nonnegative");
        if (m.dark_rate_hz < 0.0)
            errs.fail("[" + section + "] dark_rate_hz must be nonnegative");
        if (m.dead_time_ps < 0.0)
            errs.fail("[" + section + "] dead_time_ps must be nonnegative");
        if (m.time_bin_ps < 1.0)
            errs.fail("[" + section + "] time_bin_ps must be at least 1 ps");
        if (warnings && m.dead_time_ps > 0.0 && m.dead_time_ps < m.time_bin_ps)
            warnings->push_back("[" + section +
                                "] dead time shorter than one time bin acts as a one-bin"
                                " dead time after quantization");
        role_channel[i] = dc.channel;
        sc.detectors.push_back(dc);
        sc.channel_map[dc.channel] = kChannelRoles[i];
    }
    if (sc.detectors.size() == 4) {
        sc.channels = ArmChannels{role_channel[0], role_channel[1], role_channel[2],
                                  role_channel[3]};
    }

    // --- [temperature] (optional) ---
    if (cfg.has_section("temperature")) {
        check_known_keys(cfg, "temperature", {"row"}, errs);
        TemperatureModel model;
        const auto rows = cfg.get_all("temperature", "row");
        if (rows.empty()) errs.fail("[temperature] section present but holds no row entries");
        for (const auto& r : rows) {
            std::istringstream ss(r);
            TemperatureRow row;
            std::string extra;
            if (!(ss >> row.temperature_k >> row.x_lifetime_ps >> row.background_fraction) ||
                (ss >> extra)) {
                errs.fail("[temperature] row '" + r +
                          "' must be three numbers: kelvin lifetime_ps background");
                continue;
            }
            if (row.x_lifetime_ps <= 0.0)
                errs.fail("[temperature] row '" + r + "': lifetime must be positive");
            if (row.background_fraction < 0.0 || row.background_fraction >= 1.0)
                errs.fail("[temperature] row '" + r + "': background must lie in [0, 1)");
            model.rows.push_back(row);
        }
        for (std::size_t i = 1; i < model.rows.size(); ++i) {
            if (!(model.rows[i].temperature_k > model.rows[i - 1].temperature_k)) {
                errs.fail("[temperature] rows must have strictly increasing temperatures");
                break;
            }
        }
        if (!model.rows.empty()) sc.temperature = std::move(model);
    }

    if (!errs.ok()) errs.raise();
    return sc;
}

TimeTagStream simulate_stream(const Scenario& sc, std::uint64_t seed, DetectorStats* stats) {
    Rng rng(seed);
    const double duration_ps = std::round(sc.duration_s * 1e12);
    const auto clicks =
        generate_clicks(sc.source, measurement_basis(sc.basis_xx), measurement_basis(sc.basis_x),
                        sc.channels, duration_ps, rng);
    return apply_detector(clicks, sc.detectors, static_cast<std::uint64_t>(duration_ps),
                          sc.channel_map, rng, stats);
}

std::string scenario_manifest(const Scenario& sc, std::uint64_t seed) {
    // format_double: shortest representation that round-trips, so the manifest
    // stays human-readable without losing the exact parameter values.
    std::ostringstream ss;
    ss << "fss_uev = " << format_double(sc.source.fss_uev) << '\n'
       << "x_lifetime_ps = " << format_double(sc.source.x_lifetime_ps) << '\n'
       << "xx_lifetime_ps = " << format_double(sc.source.xx_lifetime_ps) << '\n'
       << "cycle_rate_hz = " << format_double(sc.source.cycle_rate_hz) << '\n'
       << "reexcitation_rate_hz = " << format_double(sc.source.reexcitation_rate_hz) << '\n'
       << "background_fraction = " << format_double(sc.source.background_fraction) << '\n'
       << "noise_mode = " << noise_mode_name(sc.source.noise_mode) << '\n'
       << "basis_xx = " << basis_name(sc.basis_xx) << '\n'
       << "basis_x = " << basis_name(sc.basis_x) << '\n'
       << "duration_s = " << format_double(sc.duration_s) << '\n'
       << "seed = " << seed << '\n';
    for (std::size_t i = 0; i < sc.detectors.size() && i < kChannelRoles.size(); ++i) {
        const auto& d = sc.detectors[i];
        ss << "detector." << kChannelRoles[i] << " = channel " << d.channel << ", efficiency "
           << format_double(d.model.efficiency) << ", jitter_fwhm_ps "
           << format_double(d.model.jitter_fwhm_ps) << ", dark_rate_hz "
           << format_double(d.model.dark_rate_hz) << ", dead_time_ps "
           << format_double(d.model.dead_time_ps) << ", time_bin_ps "
           << format_double(d.model.time_bin_ps) << '\n';
    }
    return ss.str();
}

}  // namespace qled
