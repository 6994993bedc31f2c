#include "qled/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qled/errors.hpp"

namespace qled {

namespace {

std::uint16_t role_channel(const TimeTagStream& s, const std::string& role) {
    const auto ch = channel_by_label(s, role);
    if (!ch) throw AnalysisError("stream has no channel labeled '" + role + "'");
    return *ch;
}

}  // namespace

BasisCorrelation basis_correlation(const TimeTagStream& s, std::int64_t bin_width_ps,
                                   std::int64_t window_ps) {
    const std::uint16_t xxp = role_channel(s, "xx_plus");
    const std::uint16_t xxm = role_channel(s, "xx_minus");
    const std::uint16_t xp = role_channel(s, "x_plus");
    const std::uint16_t xm = role_channel(s, "x_minus");
    BasisCorrelation out;
    out.co = merge_histograms(cross_correlation(s, xxp, xp, bin_width_ps, window_ps),
                              cross_correlation(s, xxm, xm, bin_width_ps, window_ps));
    out.cross = merge_histograms(cross_correlation(s, xxp, xm, bin_width_ps, window_ps),
                                 cross_correlation(s, xxm, xp, bin_width_ps, window_ps));
    return out;
}

FidelitySet simulate_fidelity_set(const Scenario& sc, std::uint64_t seed) {
    Rng rng(seed);
    const double duration_ps = std::round(sc.duration_s * 1e12);
    FidelitySet out;
    for (std::size_t i = 0; i < kAllBases.size(); ++i) {
        const MeasurementBasis mb = measurement_basis(kAllBases[i]);
        const auto clicks =
            generate_clicks(sc.source, mb, mb, sc.channels, duration_ps, rng);
        out[i] = apply_detector(clicks, sc.detectors, static_cast<std::uint64_t>(duration_ps),
                                sc.channel_map, rng, nullptr);
    }
    return out;
}

FidelityInputs fidelity_inputs(const FidelitySet& streams, double fss_uev,
                               std::int64_t bin_width_ps, std::int64_t window_ps) {
    std::array<CorrelationCurve, kNumBases> curves;
    for (std::size_t i = 0; i < streams.size(); ++i) {
        const BasisCorrelation bc = basis_correlation(streams[i], bin_width_ps, window_ps);
        curves[i] = degree_of_correlation(bc.co, bc.cross);
    }
    FidelityInputs in;
    in.c_hv = std::move(curves[0]);
    in.c_da = std::move(curves[1]);
    in.c_lr = std::move(curves[2]);
    in.c_eldera = std::move(curves[3]);
    in.c_elaerd = std::move(curves[4]);
    in.fss_uev = fss_uev;
    return in;
}

std::vector<TempSweepRow> run_temperature_sweep(const Scenario& sc,
                                                const std::vector<double>& temperatures_k,
                                                const SweepOptions& opt) {
    if (!sc.temperature)
        throw ConfigError("temperature sweep needs a [temperature] calibration table");
    if (temperatures_k.empty())
        throw ConfigError("temperature sweep needs at least one temperature");
    std::vector<TempSweepRow> rows;
    rows.reserve(temperatures_k.size());
    for (std::size_t i = 0; i < temperatures_k.size(); ++i) {
        Scenario at = sc;
        at.source = params_at_temperature(sc.source, *sc.temperature, temperatures_k[i]);
        const FidelitySet set = simulate_fidelity_set(at, sc.seed + i);

        // Coincidence counts per bin fall off on the intermediate-level
        // lifetime, so a fixed window would scan count-starved bins at short
        // lifetimes and the peak search would ride their noise. Cap both the
        // peak window and the decay-fit extent by the lifetime scales.
        const double tau_x = at.source.x_lifetime_ps;
        const std::int64_t peak_win =
            std::min(opt.peak_window_ps,
                     std::max<std::int64_t>(opt.bin_width_ps,
                                            static_cast<std::int64_t>(std::llround(tau_x))));
        const FidelityInputs peak_in =
            fidelity_inputs(set, at.source.fss_uev, opt.bin_width_ps, peak_win);
        const PeakValue peak = peak_fidelity(fidelity_curve(peak_in, PhaseMode::evolving));

        // Predicted half-decay of the accidental dilution 1/(1 + r*tau_x*e^{tau/tau_x});
        // fit out to ~4x that so the tail is covered without pure-noise bins.
        const double r_tau = at.source.cycle_rate_hz * 1e-12 * tau_x;
        std::int64_t decay_win = opt.curve_window_ps;
        if (r_tau > 0.0 && r_tau < 0.5) {
            const double tau_half = tau_x * std::log(1.0 / r_tau);
            decay_win = std::min(
                decay_win, std::max<std::int64_t>(
                               8 * opt.decay_bin_ps,
                               static_cast<std::int64_t>(std::llround(4.0 * tau_half))));
        }
        const FidelityInputs decay_in =
            fidelity_inputs(set, at.source.fss_uev, opt.decay_bin_ps, decay_win);
        const CorrelationCurve f = fidelity_curve(decay_in, PhaseMode::evolving);
        const DecayFit decay = fit_gaussian_decay(f, 0.25);
        TempSweepRow row;
        row.temperature_k = temperatures_k[i];
        row.peak_fidelity = peak.value;
        row.sigma = peak.sigma;
        row.hwhm_ps = decay.hwhm_ps;
        row.x_lifetime_ps = at.source.x_lifetime_ps;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace qled
