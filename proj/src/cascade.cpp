#include "qled/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "qled/constants.hpp"
#include "qled/errors.hpp"

namespace qled {

PairEvent sample_cascade_event(const CascadeParams& p, double& clock_ps, Rng& rng) {
    clock_ps += rng.exponential(p.cycle_rate_hz * 1e-12);
    clock_ps += rng.exponential(1.0 / p.xx_lifetime_ps);
    PairEvent e;
    e.xx_emit_time_ps = clock_ps;
    const double decay_rate = 1.0 / p.x_lifetime_ps;
    const double reexc_rate = p.reexcitation_rate_hz * 1e-12;
    e.x_delay_ps = rng.exponential(decay_rate + reexc_rate);
    e.uncorrelated =
        reexc_rate > 0.0 && rng.uniform01() < reexc_rate / (decay_rate + reexc_rate);
    e.chi = p.fss_uev * e.x_delay_ps * kPhaseRadPerUevPs;
    clock_ps = e.x_emit_time_ps();
    return e;
}

TwoPhotonDensityMatrix event_state(const CascadeParams& p, const PairEvent& e) {
    if (e.uncorrelated) return TwoPhotonDensityMatrix{};
    return mix_noise(bell_state(e.chi), 1.0 - p.background_fraction, p.noise_mode);
}

std::array<ResolvedClick, 2> resolve_clicks(const CascadeParams& p, const PairEvent& e,
                                            const MeasurementBasis& basis_xx,
                                            const MeasurementBasis& basis_x, Rng& rng) {
    const TwoPhotonDensityMatrix rho = event_state(p, e);
    const AnalyzerSetting* xx_ports[2] = {&basis_xx.plus, &basis_xx.minus};
    const AnalyzerSetting* x_ports[2] = {&basis_x.plus, &basis_x.minus};
    double pr[4];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            pr[2 * i + j] = coincidence_probability(rho, *xx_ports[i], *x_ports[j]);
    const int k = rng.categorical4(pr);
    return {ResolvedClick{e.xx_emit_time_ps, true, k < 2},
            ResolvedClick{e.x_emit_time_ps(), false, k % 2 == 0}};
}

PairSampler::PairSampler(const CascadeParams& p, const MeasurementBasis& basis_xx,
                         const MeasurementBasis& basis_x) {
    visibility_ = 1.0 - p.background_fraction;
    const AnalyzerSetting* xx_ports[2] = {&basis_xx.plus, &basis_xx.minus};
    const AnalyzerSetting* x_ports[2] = {&basis_x.plus, &basis_x.minus};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const int k = 2 * i + j;
            const std::complex<double> c0 = xx_ports[i]->jones[0] * x_ports[j]->jones[0];
            const std::complex<double> c1 = xx_ports[i]->jones[1] * x_ports[j]->jones[1];
            // |<e1 e2|pair(chi)>|^2 = |conj(c0) + exp(i chi) conj(c1)|^2 / 2
            //                       = alpha + Re(w) cos chi + Im(w) sin chi
            alpha_[k] = 0.5 * (std::norm(c0) + std::norm(c1));
            const std::complex<double> w = std::conj(c0) * c1;
            beta_[k] = w.real();
            gamma_[k] = w.imag();
            noise_[k] = (p.noise_mode == NoiseMode::white)
                            ? 0.25
                            : 0.5 * (std::norm(c0) + std::norm(c1));
        }
    }
}

std::array<double, 4> PairSampler::probabilities(double chi, bool uncorrelated) const {
    if (uncorrelated) return {0.25, 0.25, 0.25, 0.25};
    const double c = std::cos(chi), s = std::sin(chi);
    std::array<double, 4> out{};
    for (int k = 0; k < 4; ++k) {
        const double pure = alpha_[k] + beta_[k] * c + gamma_[k] * s;
        out[k] = visibility_ * pure + (1.0 - visibility_) * noise_[k];
    }
    return out;
}

std::vector<ClickEvent> generate_clicks(const CascadeParams& p, const MeasurementBasis& basis_xx,
                                        const MeasurementBasis& basis_x, const ArmChannels& ch,
                                        double duration_ps, Rng& rng) {
    if (duration_ps < 0.0) throw std::invalid_argument("duration must be nonnegative");
    const PairSampler sampler(p, basis_xx, basis_x);
    std::vector<ClickEvent> out;
    out.reserve(static_cast<std::size_t>(2.2 * p.cycle_rate_hz * 1e-12 * duration_ps) + 16);
    double clock = 0.0;
    for (;;) {
        const PairEvent e = sample_cascade_event(p, clock, rng);
        if (e.xx_emit_time_ps >= duration_ps) break;
        const auto pr = sampler.probabilities(e.chi, e.uncorrelated);
        const int k = rng.categorical4(pr.data());
        out.push_back({e.xx_emit_time_ps, (k < 2) ? ch.xx_plus : ch.xx_minus});
        if (e.x_emit_time_ps() < duration_ps)
            out.push_back({e.x_emit_time_ps(), (k % 2 == 0) ? ch.x_plus : ch.x_minus});
    }
    return out;
}

namespace {

struct QuantizedClick {
    std::int64_t timestamp_ps;
    std::uint16_t flags;
};

void validate_model(const DetectorModel& d) {
    if (d.time_bin_ps < 1.0) throw std::invalid_argument("time bin must be at least 1 ps");
    if (d.efficiency < 0.0 || d.efficiency > 1.0)
        throw std::invalid_argument("efficiency must lie in [0, 1]");
    if (d.jitter_fwhm_ps < 0.0 || d.dark_rate_hz < 0.0 || d.dead_time_ps < 0.0)
        throw std::invalid_argument("detector parameters must be nonnegative");
}

}  // namespace

TimeTagStream apply_detector(const std::vector<ClickEvent>& clicks,
                             const std::vector<DetectorChannel>& detectors,
                             std::uint64_t duration_ps,
                             const std::map<std::uint16_t, std::string>& channel_map, Rng& rng,
                             DetectorStats* stats) {
    std::set<std::uint16_t> seen;
    for (const auto& d : detectors) {
        if (!seen.insert(d.channel).second)
            throw std::invalid_argument("duplicate detector channel");
        if (!channel_map.count(d.channel))
            throw std::invalid_argument("detector channel missing from channel map");
        validate_model(d.model);
    }

    std::map<std::uint16_t, std::vector<double>> by_channel;
    for (const auto& c : clicks) {
        if (!seen.count(c.channel)) {
            std::ostringstream ss;
            ss << "click on channel " << c.channel << " with no detector model";
            throw std::invalid_argument(ss.str());
        }
        by_channel[c.channel].push_back(c.time_ps);
    }

    std::vector<DetectorChannel> ordered = detectors;
    std::sort(ordered.begin(), ordered.end(),
              [](const DetectorChannel& a, const DetectorChannel& b) {
                  return a.channel < b.channel;
              });

    DetectorStats local;
    std::vector<TimeTagRecord> records;
    for (const auto& dc : ordered) {
        const DetectorModel& det = dc.model;
        const double sigma = det.jitter_fwhm_ps * kFwhmToSigma;
        std::vector<QuantizedClick> kept;
        auto quantize = [&](double t) {
            QuantizedClick q{};
            std::int64_t bin_index = static_cast<std::int64_t>(std::floor(t / det.time_bin_ps));
            if (bin_index < 0) {
                bin_index = 0;
                q.flags |= kFlagClampedNegative;
                ++local.clamped;
            }
            q.timestamp_ps =
                static_cast<std::int64_t>(std::llround(bin_index * det.time_bin_ps));
            return q;
        };
        auto it = by_channel.find(dc.channel);
        if (it != by_channel.end()) {
            for (double t : it->second) {
                if (det.efficiency < 1.0 && rng.uniform01() >= det.efficiency) continue;
                if (sigma > 0.0) t += rng.gaussian(0.0, sigma);
                kept.push_back(quantize(t));
            }
        }
        if (det.dark_rate_hz > 0.0 && duration_ps > 0) {
            const double rate_per_ps = det.dark_rate_hz * 1e-12;
            for (double t = rng.exponential(rate_per_ps);
                 t < static_cast<double>(duration_ps); t += rng.exponential(rate_per_ps)) {
                kept.push_back(quantize(t));
                ++local.dark_counts;
            }
        }
        std::stable_sort(kept.begin(), kept.end(),
                         [](const QuantizedClick& a, const QuantizedClick& b) {
                             return a.timestamp_ps < b.timestamp_ps;
                         });
        const auto dead = static_cast<std::int64_t>(std::llround(det.dead_time_ps));
        std::int64_t last_kept = std::numeric_limits<std::int64_t>::min();
        for (const auto& q : kept) {
            if (last_kept != std::numeric_limits<std::int64_t>::min() &&
                q.timestamp_ps - last_kept < dead) {
                ++local.dead_time_drops;
                continue;
            }
            last_kept = q.timestamp_ps;
            if (static_cast<std::uint64_t>(q.timestamp_ps) >= duration_ps) continue;
            records.push_back(
                {static_cast<std::uint64_t>(q.timestamp_ps), dc.channel, q.flags});
        }
    }

    std::sort(records.begin(), records.end(), [](const TimeTagRecord& a, const TimeTagRecord& b) {
        return std::tie(a.timestamp_ps, a.channel, a.flags) <
               std::tie(b.timestamp_ps, b.channel, b.flags);
    });

    if (stats) *stats = local;
    TimeTagStream s;
    s.records = std::move(records);
    s.duration_ps = duration_ps;
    s.channel_map = channel_map;
    return s;
}

TimeTagStream apply_detector(const std::vector<ClickEvent>& clicks, const DetectorModel& model,
                             const std::vector<std::uint16_t>& channels,
                             std::uint64_t duration_ps, Rng& rng, DetectorStats* stats) {
    std::vector<DetectorChannel> detectors;
    std::map<std::uint16_t, std::string> channel_map;
    for (std::uint16_t c : channels) {
        detectors.push_back({c, model});
        channel_map[c] = "ch" + std::to_string(c);
    }
    return apply_detector(clicks, detectors, duration_ps, channel_map, rng, stats);
}

CascadeParams params_at_temperature(CascadeParams base, const TemperatureModel& m,
                                    double temperature_k) {
    if (m.rows.empty()) throw ConfigError("temperature table is empty");
    for (std::size_t i = 1; i < m.rows.size(); ++i) {
        if (!(m.rows[i].temperature_k > m.rows[i - 1].temperature_k))
            throw ConfigError("temperature table rows must be strictly increasing");
    }
    const double lo = m.rows.front().temperature_k;
    const double hi = m.rows.back().temperature_k;
    if (temperature_k < lo || temperature_k > hi) {
        std::ostringstream ss;
        ss << "temperature " << temperature_k << " K outside calibrated range [" << lo << ", "
           << hi << "] K";
        throw ConfigError(ss.str());
    }
    auto upper = std::lower_bound(
        m.rows.begin(), m.rows.end(), temperature_k,
        [](const TemperatureRow& r, double t) { return r.temperature_k < t; });
    if (upper == m.rows.begin()) {
        base.x_lifetime_ps = upper->x_lifetime_ps;
        base.background_fraction = upper->background_fraction;
        return base;
    }
    const TemperatureRow& b = *upper;
    const TemperatureRow& a = *(upper - 1);
    const double f = (temperature_k - a.temperature_k) / (b.temperature_k - a.temperature_k);
    base.x_lifetime_ps = a.x_lifetime_ps + f * (b.x_lifetime_ps - a.x_lifetime_ps);
    base.background_fraction =
        a.background_fraction + f * (b.background_fraction - a.background_fraction);
    return base;
}

}  // namespace qled
