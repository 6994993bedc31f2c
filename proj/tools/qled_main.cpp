#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qled/analysis.hpp"
#include "qled/cascade.hpp"
#include "qled/config.hpp"
#include "qled/correlator.hpp"
#include "qled/csv.hpp"
#include "qled/errors.hpp"
#include "qled/fss.hpp"
#include "qled/qtt_file.hpp"
#include "qled/scenario.hpp"
#include "qled/timetag.hpp"

namespace {

using namespace qled;

// Exit codes: 0 ok; 1 fidelity peak not significantly above the classical
// limit; 2 config/usage; 3 I/O or file format; 4 degenerate analysis.

std::optional<std::uint64_t> parse_u64_arg(const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(),
                                  [](unsigned char c) { return std::isdigit(c); }))
        return std::nullopt;
    return std::stoull(s);
}

std::uint16_t resolve_channel(const TimeTagStream& s, const std::string& spec) {
    if (const auto num = parse_u64_arg(spec)) {
        if (*num <= 0xFFFF && s.channel_map.count(static_cast<std::uint16_t>(*num)))
            return static_cast<std::uint16_t>(*num);
        throw ConfigError("channel " + spec + " is not present in the file");
    }
    if (const auto ch = channel_by_label(s, spec)) return *ch;
    std::string labels;
    for (const auto& [ch, label] : s.channel_map) {
        if (!labels.empty()) labels += ", ";
        labels += std::to_string(ch) + "=" + label;
    }
    throw ConfigError("no channel labeled '" + spec + "'; file has: " + labels);
}

void write_curve_csv(const std::string& path, const std::vector<std::string>& header,
                     const CorrelationCurve& c) {
    std::vector<std::vector<double>> rows;
    rows.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        rows.push_back({c.delay_ps[i], c.value[i], c.sigma[i]});
    write_csv(path, header, rows);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

struct SimulateArgs {
    std::string config_path;
    std::string out_path;
    std::string out_dir;
    bool fidelity_set = false;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double temperature_k = 0.0;
    bool temperature_given = false;
    std::string basis;
};

int cmd_simulate(const SimulateArgs& a) {
    std::vector<std::string> warnings;
    Scenario sc = scenario_from_config(load_config_file(a.config_path), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

    if (a.fidelity_set && !a.out_path.empty())
        throw ConfigError("--out and --fidelity-set/--out-dir are mutually exclusive");
    if (!a.fidelity_set && a.out_path.empty())
        throw ConfigError("either --out FILE or --fidelity-set --out-dir DIR is required");
    if (a.fidelity_set && a.out_dir.empty())
        throw ConfigError("--fidelity-set needs --out-dir DIR");

    if (a.temperature_given) {
        if (!sc.temperature)
            throw ConfigError("config has no [temperature] table; cannot interpolate");
        sc.source = params_at_temperature(sc.source, *sc.temperature, a.temperature_k);
    }
    if (!a.basis.empty()) {
        const Basis b = basis_from_name(a.basis);
        sc.basis_xx = b;
        sc.basis_x = b;
    }
    const std::uint64_t seed = a.seed_given ? a.seed : sc.seed;

    std::ostringstream manifest;
    manifest << scenario_manifest(sc, seed);
    if (a.temperature_given) manifest << "temperature_k = " << a.temperature_k << '\n';

    if (!a.fidelity_set) {
        DetectorStats stats;
        const TimeTagStream stream = simulate_stream(sc, seed, &stats);
        write_qtt(a.out_path, stream);
        manifest << "output = " << a.out_path << '\n'
                 << "records = " << stream.records.size() << '\n'
                 << "dark_counts = " << stats.dark_counts << '\n'
                 << "dead_time_drops = " << stats.dead_time_drops << '\n'
                 << "clamped_timestamps = " << stats.clamped << '\n';
        write_text_file(a.out_path + ".manifest", manifest.str());
        std::cout << "wrote " << a.out_path << ": " << stream.records.size()
                  << " records over " << sc.duration_s << " s (seed " << seed << ")\n";
        return 0;
    }

    std::filesystem::create_directories(a.out_dir);
    const FidelitySet set = simulate_fidelity_set(sc, seed);
    manifest << "fidelity_set =";
    for (std::size_t i = 0; i < kAllBases.size(); ++i) {
        const std::string path =
            (std::filesystem::path(a.out_dir) / (std::string(basis_name(kAllBases[i])) + ".qtt"))
                .string();
        write_qtt(path, set[i]);
        manifest << ' ' << basis_name(kAllBases[i]) << ".qtt";
        std::cout << "wrote " << path << ": " << set[i].records.size() << " records\n";
    }
    manifest << '\n';
    write_text_file((std::filesystem::path(a.out_dir) / "manifest.txt").string(),
                    manifest.str());
    return 0;
}

struct CorrArgs {
    std::string in_path, a, b, out_path;
    std::int64_t bin_ps = 32;
    double window_ns = 50.0;
};

int cmd_xcorr(const CorrArgs& args, bool normalized) {
    if (args.bin_ps < 1) throw ConfigError("--bin-ps must be at least 1");
    const auto window_ps = static_cast<std::int64_t>(std::llround(args.window_ns * 1000.0));
    if (window_ps < args.bin_ps) throw ConfigError("--window-ns must cover at least one bin");
    const TimeTagStream stream = read_qtt(args.in_path);
    const std::vector<std::string> header = {"delay_ps", "value", "sigma"};
    if (stream.records.empty()) {
        write_csv(args.out_path, header, std::vector<std::vector<double>>{});
        std::cout << "empty stream; wrote header-only " << args.out_path << '\n';
        return 0;
    }
    const std::uint16_t ch_a = resolve_channel(stream, args.a);
    const std::uint16_t ch_b = resolve_channel(stream, args.b);
    const CorrelationHistogram h =
        cross_correlation(stream, ch_a, ch_b, args.bin_ps, window_ps);
    if (normalized) {
        const CorrelationCurve g2 = normalize_g2(h);
        write_curve_csv(args.out_path, header, g2);
        const std::size_t center = static_cast<std::size_t>(h.n_half);
        std::cout << "g2(0) = " << format_double(g2.value[center]) << " +- "
                  << format_double(g2.sigma[center]) << '\n';
    } else {
        CorrelationCurve c;
        c.bin_width_ps = h.bin_width_ps;
        for (std::size_t i = 0; i < h.size(); ++i) {
            c.delay_ps.push_back(static_cast<double>(h.delay_at(i)));
            c.value.push_back(static_cast<double>(h.counts[i]));
            c.sigma.push_back(std::sqrt(static_cast<double>(h.counts[i])));
        }
        write_curve_csv(args.out_path, header, c);
        std::cout << "wrote " << args.out_path << " (" << h.total_a << " x " << h.total_b
                  << " singles)\n";
    }
    return 0;
}

struct FidelityArgs {
    std::string in_dir, mode = "evolving", out_path;
    double fss_uev = 0.0;
    std::int64_t bin_ps = 8;
    double window_ns = 1.0;
};

int cmd_fidelity(const FidelityArgs& a) {
    if (a.bin_ps < 1) throw ConfigError("--bin-ps must be at least 1");
    const auto window_ps = static_cast<std::int64_t>(std::llround(a.window_ns * 1000.0));
    if (window_ps < a.bin_ps) throw ConfigError("--window-ns must cover at least one bin");

    PhaseMode mode = PhaseMode::evolving;
    double chi = 0.0;
    if (a.mode != "evolving") {
        if (a.mode.rfind("chi=", 0) != 0)
            throw ConfigError("--mode must be 'evolving' or 'chi=<radians>'");
        char* end = nullptr;
        chi = std::strtod(a.mode.c_str() + 4, &end);
        if (end == a.mode.c_str() + 4 || *end != '\0')
            throw ConfigError("--mode chi value '" + a.mode.substr(4) + "' is not a number");
        mode = PhaseMode::fixed;
    }

    FidelitySet set;
    std::vector<std::string> missing, found;
    for (std::size_t i = 0; i < kAllBases.size(); ++i) {
        const std::string name = std::string(basis_name(kAllBases[i])) + ".qtt";
        const std::string path = (std::filesystem::path(a.in_dir) / name).string();
        if (!std::filesystem::exists(path)) {
            missing.push_back(name);
            continue;
        }
        found.push_back(name);
        set[i] = read_qtt(path);
    }
    if (!missing.empty()) {
        std::string msg = a.in_dir + ": missing basis runs:";
        for (const auto& m : missing) msg += ' ' + m;
        msg += "; found:";
        if (found.empty()) msg += " none";
        for (const auto& f : found) msg += ' ' + f;
        throw IoError(msg);
    }

    const FidelityInputs in = fidelity_inputs(set, a.fss_uev, a.bin_ps, window_ps);
    const CorrelationCurve f = fidelity_curve(in, mode, chi);
    write_curve_csv(a.out_path, {"delay_ps", "fidelity", "sigma"}, f);
    const PeakValue peak = peak_fidelity(f);
    std::cout << "peak fidelity " << format_double(peak.value) << " +- "
              << format_double(peak.sigma) << " at " << format_double(peak.delay_ps)
              << " ps\n";
    const bool significant = peak.value - 0.5 >= 4.0 * peak.sigma;
    std::cout << (significant ? "above the classical limit (>= 4 sigma)\n"
                              : "not significantly above the classical limit\n");
    return significant ? 0 : 1;
}

struct TempSweepArgs {
    std::string config_path, temps, out_path;
    std::int64_t bin_ps = 8;
    std::int64_t decay_bin_ps = 32;
    double window_ns = 16.0;
    double peak_window_ns = 1.0;
};

int cmd_tempsweep(const TempSweepArgs& a) {
    std::vector<double> temps;
    std::istringstream ss(a.temps);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        char* end = nullptr;
        const double t = std::strtod(item.c_str(), &end);
        if (end == item.c_str() || *end != '\0')
            throw ConfigError("--temps entry '" + item + "' is not a number");
        temps.push_back(t);
    }
    if (temps.empty()) throw ConfigError("--temps must list at least one temperature");

    std::vector<std::string> warnings;
    const Scenario sc = scenario_from_config(load_config_file(a.config_path), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

    SweepOptions opt;
    opt.bin_width_ps = a.bin_ps;
    opt.decay_bin_ps = a.decay_bin_ps;
    opt.curve_window_ps = static_cast<std::int64_t>(std::llround(a.window_ns * 1000.0));
    opt.peak_window_ps = static_cast<std::int64_t>(std::llround(a.peak_window_ns * 1000.0));
    const auto rows = run_temperature_sweep(sc, temps, opt);

    std::vector<std::vector<double>> cells;
    for (const auto& r : rows) {
        cells.push_back({r.temperature_k, r.peak_fidelity, r.sigma, r.hwhm_ps,
                         r.x_lifetime_ps});
        std::cout << r.temperature_k << " K: peak " << format_double(r.peak_fidelity)
                  << " +- " << format_double(r.sigma) << ", hwhm "
                  << format_double(r.hwhm_ps) << " ps\n";
    }
    write_csv(a.out_path,
              {"temperature_K", "peak_fidelity", "sigma", "hwhm_ps", "x_lifetime_ps"}, cells);
    return 0;
}

struct FssSynthArgs {
    std::string config_path, out_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int cmd_fss_synth(const FssSynthArgs& a) {
    const ConfigFile cfg = load_config_file(a.config_path);
    std::vector<std::string> errors;
    auto need_double = [&](const std::string& sec, const std::string& key, double fallback) {
        const auto raw = cfg.get(sec, key);
        if (!raw) return fallback;
        char* end = nullptr;
        const double v = std::strtod(raw->c_str(), &end);
        if (end == raw->c_str() || *end != '\0') {
            errors.push_back("[" + sec + "] " + key + " = '" + *raw + "' is not a number");
            return fallback;
        }
        return v;
    };
    for (const auto& sec : cfg.section_names())
        if (sec != "qwp" && sec != "sweep") errors.push_back("unknown section [" + sec + "]");
    if (!cfg.has_section("qwp")) errors.push_back("missing [qwp] section");
    for (const auto& key : cfg.keys("qwp"))
        if (key != "s_uev" && key != "theta_rad" && key != "phi_rad" && key != "p" &&
            key != "epsilon_uev")
            errors.push_back("[qwp] unknown key '" + key + "'");
    for (const auto& key : cfg.keys("sweep"))
        if (key != "n_points" && key != "chi_span_rad" && key != "noise_uev" && key != "seed")
            errors.push_back("[sweep] unknown key '" + key + "'");

    QwpModelParams params;
    params.s_uev = need_double("qwp", "s_uev", 0.0);
    params.theta_rad = need_double("qwp", "theta_rad", 0.0);
    params.phi_rad = need_double("qwp", "phi_rad", 0.0);
    params.p = need_double("qwp", "p", 0.0);
    params.epsilon_uev = need_double("qwp", "epsilon_uev", 0.0);
    const double n_points_raw = need_double("sweep", "n_points", 64.0);
    const double span = need_double("sweep", "chi_span_rad", 2.0 * 3.14159265358979323846);
    const double noise = need_double("sweep", "noise_uev", 0.0);
    if (std::abs(params.p) > 1.0) errors.push_back("[qwp] p must lie in [-1, 1]");
    if (n_points_raw < 2.0 || n_points_raw != std::floor(n_points_raw))
        errors.push_back("[sweep] n_points must be an integer >= 2");
    if (span <= 0.0) errors.push_back("[sweep] chi_span_rad must be positive");
    if (noise < 0.0) errors.push_back("[sweep] noise_uev must be nonnegative");

    std::uint64_t seed = a.seed;
    if (!a.seed_given) {
        if (const auto raw = cfg.get("sweep", "seed")) {
            if (const auto v = parse_u64_arg(*raw)) {
                seed = *v;
            } else {
                errors.push_back("[sweep] seed = '" + *raw +
                                 "' is not an unsigned 64-bit integer");
            }
        } else if (noise > 0.0) {
            errors.push_back("[sweep] missing 'seed' (required when noise_uev > 0)");
        }
    }
    if (!errors.empty()) {
        std::string msg = "config invalid:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }

    Rng rng(seed);
    const QwpSeries series =
        synth_series(params, static_cast<int>(n_points_raw), span, noise, rng);
    std::vector<std::vector<double>> rows;
    for (const auto& p : series.points)
        rows.push_back({p.chi_rad, p.delta_e_uev, p.sigma_uev});
    write_csv(a.out_path, {"chi_rad", "delta_e_ueV", "sigma_ueV"}, rows);
    std::cout << "wrote " << a.out_path << " (" << rows.size() << " points)\n";
    return 0;
}

struct FssFitArgs {
    std::string in_path, out_path;
    double p = 0.0;
    bool fit_p = false;
};

int cmd_fss_fit(const FssFitArgs& a) {
    const auto rows = read_numeric_csv(a.in_path, {"chi_rad", "delta_e_ueV", "sigma_ueV"});
    QwpSeries series;
    for (const auto& r : rows) series.points.push_back({r[0], r[1], r[2]});
    FssFitOptions opt;
    opt.p = a.p;
    opt.fit_p = a.fit_p;
    const FssFit fit = fit_fss(series, opt);

    std::vector<std::vector<std::string>> out_rows = {
        {"s_ueV", format_double(fit.params.s_uev), format_double(fit.sigma_s_uev)},
        {"theta_rad", format_double(fit.params.theta_rad), format_double(fit.sigma_theta_rad)},
        {"phi_rad", format_double(fit.params.phi_rad), format_double(fit.sigma_phi_rad)},
        {"epsilon_ueV", format_double(fit.params.epsilon_uev),
         format_double(fit.sigma_epsilon_uev)},
    };
    if (a.fit_p)
        out_rows.push_back({"p", format_double(fit.params.p),
                            format_double(std::sqrt(std::max(fit.covariance(4, 4), 0.0)))});
    out_rows.push_back({"status", fit.resolved ? "resolved" : "unresolved",
                        fit.resolved ? "" : format_double(fit.upper_bound_uev)});
    write_csv(a.out_path, {"parameter", "estimate", "sigma"}, out_rows);

    std::cout << "chi2/dof = " << format_double(fit.chi2) << "/" << fit.dof << '\n';
    if (fit.resolved) {
        std::cout << "s = " << format_double(fit.params.s_uev) << " +- "
                  << format_double(fit.sigma_s_uev) << " ueV\n";
        return 0;
    }
    std::cout << fit.message << '\n';
    return 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulator and analysis toolkit for an entangled-photon-pair source"};
    app.require_subcommand(1);
    int rc = 0;

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "generate time-tag streams from a config");
    c_sim->add_option("--config", sim.config_path, "scenario config file")
        ->required()
        ->check(CLI::ExistingFile);
    c_sim->add_option("--out", sim.out_path, "output stream file");
    c_sim->add_flag("--fidelity-set", sim.fidelity_set,
                    "write one run per analysis basis into --out-dir");
    c_sim->add_option("--out-dir", sim.out_dir, "output directory for --fidelity-set");
    auto* sim_seed = c_sim->add_option("--seed", sim.seed, "override the config seed");
    auto* sim_temp = c_sim->add_option("--temperature", sim.temperature_k,
                                       "interpolate the [temperature] table at this kelvin");
    c_sim->add_option("--basis", sim.basis, "analyze both arms in this basis (hv, da, lr, "
                                            "elderra, elaerd)");
    c_sim->callback([&] {
        sim.seed_given = sim_seed->count() > 0;
        sim.temperature_given = sim_temp->count() > 0;
        rc = cmd_simulate(sim);
    });

    CorrArgs xc;
    auto* c_xcorr = app.add_subcommand("xcorr", "raw coincidence histogram between channels");
    CorrArgs g2;
    auto* c_g2 = app.add_subcommand("g2", "normalized intensity correlation between channels");
    for (auto [cmd, args] : {std::pair{c_xcorr, &xc}, std::pair{c_g2, &g2}}) {
        cmd->add_option("--in", args->in_path, "input stream file")->required();
        cmd->add_option("--a", args->a, "first channel (number or label)")->required();
        cmd->add_option("--b", args->b, "second channel (number or label)")->required();
        cmd->add_option("--bin-ps", args->bin_ps, "histogram bin width in ps");
        cmd->add_option("--window-ns", args->window_ns, "correlation window half-width in ns");
        cmd->add_option("--out", args->out_path, "output csv")->required();
    }
    c_xcorr->callback([&] { rc = cmd_xcorr(xc, false); });
    c_g2->callback([&] { rc = cmd_xcorr(g2, true); });

    FidelityArgs fid;
    auto* c_fid = app.add_subcommand("fidelity", "entanglement fidelity from five basis runs");
    c_fid->add_option("--in-dir", fid.in_dir, "directory with hv/da/lr/elderra/elaerd.qtt")
        ->required();
    c_fid->add_option("--fss-uev", fid.fss_uev, "splitting used for the phase evolution")
        ->required();
    c_fid->add_option("--mode", fid.mode, "'evolving' or 'chi=<radians>'");
    c_fid->add_option("--bin-ps", fid.bin_ps, "analysis bin width in ps");
    c_fid->add_option("--window-ns", fid.window_ns, "curve extent in ns");
    c_fid->add_option("--out", fid.out_path, "output csv")->required();
    c_fid->callback([&] { rc = cmd_fidelity(fid); });

    TempSweepArgs ts;
    auto* c_ts = app.add_subcommand("tempsweep", "peak fidelity and decay width vs temperature");
    c_ts->add_option("--config", ts.config_path, "scenario config with a [temperature] table")
        ->required()
        ->check(CLI::ExistingFile);
    c_ts->add_option("--temps", ts.temps, "comma-separated temperatures in kelvin")->required();
    c_ts->add_option("--bin-ps", ts.bin_ps, "peak-search bin width in ps");
    c_ts->add_option("--decay-bin-ps", ts.decay_bin_ps, "decay-fit bin width in ps");
    c_ts->add_option("--window-ns", ts.window_ns, "decay-fit curve extent in ns");
    c_ts->add_option("--peak-window-ns", ts.peak_window_ns, "peak search extent in ns");
    c_ts->add_option("--out", ts.out_path, "output csv")->required();
    c_ts->callback([&] { rc = cmd_tempsweep(ts); });

    auto* c_fss = app.add_subcommand("fss", "splitting spectroscopy synthesis and fitting");
    c_fss->require_subcommand(1);
    FssSynthArgs fsyn;
    auto* c_synth = c_fss->add_subcommand("synth", "synthesize a plate-rotation series");
    c_synth->add_option("--config", fsyn.config_path, "config with [qwp] and [sweep] sections")
        ->required()
        ->check(CLI::ExistingFile);
    c_synth->add_option("--out", fsyn.out_path, "output csv")->required();
    auto* synth_seed = c_synth->add_option("--seed", fsyn.seed, "override the config seed");
    c_synth->callback([&] {
        fsyn.seed_given = synth_seed->count() > 0;
        rc = cmd_fss_synth(fsyn);
    });
    FssFitArgs ffit;
    auto* c_fit = c_fss->add_subcommand("fit", "fit a measured series to the plate model");
    c_fit->add_option("--in", ffit.in_path, "series csv (chi_rad,delta_e_ueV,sigma_ueV)")
        ->required();
    c_fit->add_option("--out", ffit.out_path, "output csv (parameter,estimate,sigma)")
        ->required();
    c_fit->add_option("--p", ffit.p, "fixed state polarization");
    c_fit->add_flag("--fit-p", ffit.fit_p, "fit the state polarization too");
    c_fit->callback([&] { rc = cmd_fss_fit(ffit); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 3;
    } catch (const AnalysisError& e) {
        std::cerr << "analysis error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return rc;
}
