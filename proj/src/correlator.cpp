#include "qled/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qled/errors.hpp"
#include "qled/fit.hpp"

namespace qled {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::int64_t floor_div(std::int64_t x, std::int64_t y) {
    std::int64_t q = x / y;
    if ((x % y != 0) && ((x < 0) != (y < 0))) --q;
    return q;
}

struct ChannelTimes {
    std::vector<std::int64_t> a, b;
    // Positions of a-clicks inside the b array when both channels coincide, so
    // self-pairs can be skipped by index rather than by timestamp.
    bool same_channel = false;
};

ChannelTimes extract(const TimeTagStream& s, std::uint16_t ch_a, std::uint16_t ch_b) {
    ChannelTimes out;
    out.same_channel = (ch_a == ch_b);
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < s.records.size(); ++i) {
        const auto& r = s.records[i];
        if (i > 0 && r.timestamp_ps < prev) {
            std::ostringstream ss;
            ss << "stream not sorted: record " << i << " at " << r.timestamp_ps
               << " ps after " << prev << " ps";
            throw std::invalid_argument(ss.str());
        }
        prev = r.timestamp_ps;
        const auto t = static_cast<std::int64_t>(r.timestamp_ps);
        if (r.channel == ch_a) out.a.push_back(t);
        if (r.channel == ch_b) out.b.push_back(t);
    }
    return out;
}

// Counts pairs for a-clicks with index in [i_begin, i_end).
void accumulate(const ChannelTimes& ct, std::int64_t bin, std::int64_t n_half,
                std::size_t i_begin, std::size_t i_end, std::vector<std::uint64_t>& counts) {
    const auto& ta = ct.a;
    const auto& tb = ct.b;
    const std::int64_t lo = -(n_half * bin + bin / 2);              // first delay inside bin -n_half
    const std::int64_t hi = n_half * bin + bin - bin / 2;           // first delay past bin +n_half
    std::size_t j_lo = std::lower_bound(tb.begin(), tb.end(),
                                        (i_begin < ta.size() ? ta[i_begin] + lo
                                                             : std::numeric_limits<std::int64_t>::max())) -
                       tb.begin();
    for (std::size_t i = i_begin; i < i_end; ++i) {
        const std::int64_t t = ta[i];
        while (j_lo < tb.size() && tb[j_lo] < t + lo) ++j_lo;
        for (std::size_t j = j_lo; j < tb.size() && tb[j] < t + hi; ++j) {
            if (ct.same_channel && j == i) continue;
            const std::int64_t d = tb[j] - t;
            const std::int64_t k = floor_div(2 * d + bin, 2 * bin);
            counts[static_cast<std::size_t>(k + n_half)] += 1;
        }
    }
}

CorrelationHistogram make_histogram(const TimeTagStream& s, const ChannelTimes& ct,
                                    std::int64_t bin, std::int64_t window) {
    if (bin < 1) throw std::invalid_argument("bin width must be at least 1 ps");
    if (window < bin) throw std::invalid_argument("window must be at least one bin wide");
    CorrelationHistogram h;
    h.bin_width_ps = bin;
    h.n_half = window / bin;
    h.counts.assign(static_cast<std::size_t>(2 * h.n_half + 1), 0);
    h.total_a = ct.a.size();
    h.total_b = ct.b.size();
    h.duration_ps = s.duration_ps;
    return h;
}

}  // namespace

CorrelationHistogram cross_correlation_serial(const TimeTagStream& s, std::uint16_t ch_a,
                                              std::uint16_t ch_b, std::int64_t bin_width_ps,
                                              std::int64_t window_ps) {
    const ChannelTimes ct = extract(s, ch_a, ch_b);
    CorrelationHistogram h = make_histogram(s, ct, bin_width_ps, window_ps);
    accumulate(ct, h.bin_width_ps, h.n_half, 0, ct.a.size(), h.counts);
    return h;
}

CorrelationHistogram cross_correlation(const TimeTagStream& s, std::uint16_t ch_a,
                                       std::uint16_t ch_b, std::int64_t bin_width_ps,
                                       std::int64_t window_ps) {
    const ChannelTimes ct = extract(s, ch_a, ch_b);
    CorrelationHistogram h = make_histogram(s, ct, bin_width_ps, window_ps);
#ifdef _OPENMP
    const std::size_t n = ct.a.size();
    const int max_threads = omp_get_max_threads();
    const int n_chunks = std::max(1, std::min<int>(max_threads, static_cast<int>(n / 1024 + 1)));
    if (n_chunks > 1) {
        std::vector<std::vector<std::uint64_t>> partial(
            n_chunks, std::vector<std::uint64_t>(h.counts.size(), 0));
        const std::size_t chunk = (n + n_chunks - 1) / n_chunks;
#pragma omp parallel for schedule(static)
        for (int c = 0; c < n_chunks; ++c) {
            const std::size_t i0 = static_cast<std::size_t>(c) * chunk;
            const std::size_t i1 = std::min(n, i0 + chunk);
            if (i0 < i1) accumulate(ct, h.bin_width_ps, h.n_half, i0, i1, partial[c]);
        }
        for (const auto& p : partial)
            for (std::size_t i = 0; i < h.counts.size(); ++i) h.counts[i] += p[i];
        return h;
    }
#endif
    accumulate(ct, h.bin_width_ps, h.n_half, 0, ct.a.size(), h.counts);
    return h;
}

CorrelationHistogram merge_histograms(const CorrelationHistogram& a, const CorrelationHistogram& b) {
    if (a.bin_width_ps != b.bin_width_ps || a.n_half != b.n_half)
        throw std::invalid_argument("histogram shapes differ");
    if (a.duration_ps != b.duration_ps)
        throw std::invalid_argument("histogram durations differ");
    CorrelationHistogram out = a;
    for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += b.counts[i];
    out.total_a += b.total_a;
    out.total_b += b.total_b;
    return out;
}

CorrelationCurve normalize_g2(const CorrelationHistogram& h) {
    if (h.total_a == 0 || h.total_b == 0)
        throw AnalysisError("cannot normalize: a channel has zero counts");
    if (h.duration_ps == 0) throw AnalysisError("cannot normalize: stream duration is zero");
    const double norm = static_cast<double>(h.total_a) * static_cast<double>(h.total_b) *
                        static_cast<double>(h.bin_width_ps) / static_cast<double>(h.duration_ps);
    CorrelationCurve c;
    c.bin_width_ps = h.bin_width_ps;
    c.delay_ps.reserve(h.size());
    c.value.reserve(h.size());
    c.sigma.reserve(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        c.delay_ps.push_back(static_cast<double>(h.delay_at(i)));
        c.value.push_back(static_cast<double>(h.counts[i]) / norm);
        c.sigma.push_back(std::sqrt(static_cast<double>(h.counts[i])) / norm);
    }
    return c;
}

CorrelationCurve degree_of_correlation(const CorrelationHistogram& co,
                                       const CorrelationHistogram& cross) {
    if (co.bin_width_ps != cross.bin_width_ps || co.n_half != cross.n_half)
        throw std::invalid_argument("co/cross histogram grids differ");
    CorrelationCurve c;
    c.bin_width_ps = co.bin_width_ps;
    c.delay_ps.reserve(co.size());
    c.value.reserve(co.size());
    c.sigma.reserve(co.size());
    for (std::size_t i = 0; i < co.size(); ++i) {
        c.delay_ps.push_back(static_cast<double>(co.delay_at(i)));
        const double nco = static_cast<double>(co.counts[i]);
        const double ncr = static_cast<double>(cross.counts[i]);
        const double n = nco + ncr;
        if (n <= 0.0) {
            c.value.push_back(kNaN);
            c.sigma.push_back(kNaN);
            continue;
        }
        c.value.push_back((nco - ncr) / n);
        // Clamp keeps empty-side bins from claiming zero variance.
        const double p = std::clamp(nco / n, 1.0 / (n + 2.0), 1.0 - 1.0 / (n + 2.0));
        c.sigma.push_back(2.0 * std::sqrt(p * (1.0 - p) / n));
    }
    return c;
}

namespace {

void require_matching_grids(const FidelityInputs& in) {
    const CorrelationCurve* curves[] = {&in.c_hv, &in.c_da, &in.c_lr, &in.c_eldera, &in.c_elaerd};
    for (const auto* c : curves) {
        if (c->size() != in.c_hv.size() || c->bin_width_ps != in.c_hv.bin_width_ps)
            throw std::invalid_argument("correlation curves are not on a shared delay grid");
        for (std::size_t i = 0; i < c->size(); ++i)
            if (c->delay_ps[i] != in.c_hv.delay_ps[i])
                throw std::invalid_argument("correlation curves are not on a shared delay grid");
    }
}

}  // namespace

CorrelationCurve fidelity_curve(const FidelityInputs& in, PhaseMode mode, double fixed_chi) {
    require_matching_grids(in);
    constexpr double phase_per_uev_ps = 1e-18 / 6.582119569e-16;
    CorrelationCurve f;
    f.bin_width_ps = in.c_hv.bin_width_ps;
    f.delay_ps = in.c_hv.delay_ps;
    f.value.resize(f.delay_ps.size());
    f.sigma.resize(f.delay_ps.size());
    for (std::size_t i = 0; i < f.delay_ps.size(); ++i) {
        const double chi = (mode == PhaseMode::evolving)
                               ? in.fss_uev * f.delay_ps[i] * phase_per_uev_ps
                               : fixed_chi;
        const double ch = in.c_hv.value[i], cd = in.c_da.value[i], cl = in.c_lr.value[i];
        const double ce1 = in.c_eldera.value[i], ce2 = in.c_elaerd.value[i];
        if (std::isnan(ch) || std::isnan(cd) || std::isnan(cl) || std::isnan(ce1) || std::isnan(ce2)) {
            f.value[i] = kNaN;
            f.sigma[i] = kNaN;
            continue;
        }
        f.value[i] = 0.25 * (1.0 + ch + (cd - cl) * std::cos(chi) + (ce1 - ce2) * std::sin(chi));
        const double c2 = std::cos(chi) * std::cos(chi), s2 = std::sin(chi) * std::sin(chi);
        const double var = in.c_hv.sigma[i] * in.c_hv.sigma[i] +
                           c2 * (in.c_da.sigma[i] * in.c_da.sigma[i] +
                                 in.c_lr.sigma[i] * in.c_lr.sigma[i]) +
                           s2 * (in.c_eldera.sigma[i] * in.c_eldera.sigma[i] +
                                 in.c_elaerd.sigma[i] * in.c_elaerd.sigma[i]);
        f.sigma[i] = 0.25 * std::sqrt(var);
    }
    return f;
}

PeakValue peak_fidelity(const CorrelationCurve& f) {
    PeakValue best;
    bool found = false;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.delay_ps[i] < 0.0 || std::isnan(f.value[i])) continue;
        if (!found || f.value[i] > best.value) {
            best = PeakValue{f.value[i], f.sigma[i], f.delay_ps[i]};
            found = true;
        }
    }
    if (!found) throw AnalysisError("no defined bins at nonnegative delay");
    return best;
}

namespace {

// Collects finite (delay, value, sigma) triples from a curve, optionally
// restricted to |delay| <= max_delay.
struct CurvePoints {
    std::vector<double> tau, y, sig;
};

CurvePoints collect_points(const CorrelationCurve& c, double lo_ps, double hi_ps) {
    CurvePoints p;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double t = c.delay_ps[i];
        if (t < lo_ps || t > hi_ps) continue;
        if (std::isnan(c.value[i]) || std::isnan(c.sigma[i]) || c.sigma[i] <= 0.0) continue;
        p.tau.push_back(t);
        p.y.push_back(c.value[i]);
        p.sig.push_back(c.sigma[i]);
    }
    return p;
}

}  // namespace

DecayFit fit_gaussian_decay(const CorrelationCurve& f, double floor_value,
                            std::optional<double> max_delay_ps) {
    const double hi = max_delay_ps.value_or(std::numeric_limits<double>::infinity());
    const CurvePoints pts = collect_points(f, 0.0, hi);
    DecayFit out;
    out.floor_value = floor_value;
    if (pts.tau.size() < 4) {
        out.message = "too few defined bins for a decay fit";
        return out;
    }
    // Seeds: amplitude from near-zero bins, width from where the curve falls
    // halfway to the floor.
    double a0 = floor_value;
    double tmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.tau.size(); ++i) {
        if (pts.tau[i] < tmin) {
            tmin = pts.tau[i];
            a0 = pts.y[i];
        }
    }
    double w0 = 0.0;
    const double half = floor_value + 0.5 * (a0 - floor_value);
    for (std::size_t i = 0; i < pts.tau.size(); ++i) {
        if (pts.y[i] > half && pts.tau[i] > w0) w0 = pts.tau[i];
    }
    if (w0 <= 0.0) w0 = 0.25 * (*std::max_element(pts.tau.begin(), pts.tau.end()) + 1.0);

    const double ln2 = std::numbers::ln2;
    auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const double a = p[0], w = p[1];
        if (w <= 0.0) return false;
        for (std::size_t i = 0; i < pts.tau.size(); ++i) {
            const double u = pts.tau[i] / w;
            const double m = floor_value + (a - floor_value) * std::exp(-u * u * ln2);
            r[static_cast<Eigen::Index>(i)] = (m - pts.y[i]) / pts.sig[i];
        }
        return true;
    };
    Eigen::VectorXd p0(2);
    p0 << a0, w0;
    const FitResult fr = levenberg_marquardt(residual, p0, static_cast<int>(pts.tau.size()));
    out.amplitude = fr.params[0];
    out.sigma_amplitude = fr.sigma(0);
    out.hwhm_ps = std::abs(fr.params[1]);
    out.sigma_hwhm = fr.sigma(1);
    out.chi2 = fr.chi2;
    out.dof = fr.dof;
    out.converged = fr.converged;
    out.message = fr.message;
    out.degenerate = !fr.converged ||
                     std::abs(out.amplitude - floor_value) < 2.0 * out.sigma_amplitude ||
                     !(out.sigma_hwhm < out.hwhm_ps);
    return out;
}

LifetimeFit fit_exponential_decay(const CorrelationHistogram& h, std::int64_t lo_ps,
                                  std::int64_t hi_ps) {
    LifetimeFit out;
    std::vector<double> tau, y;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const std::int64_t t = h.delay_at(i);
        if (t < lo_ps || t > hi_ps) continue;
        tau.push_back(static_cast<double>(t));
        y.push_back(static_cast<double>(h.counts[i]));
    }
    if (tau.size() < 6) {
        out.message = "too few bins in fit range";
        return out;
    }
    // Background seed: mean of the last 10% of bins in range.
    const std::size_t n_tail = std::max<std::size_t>(2, tau.size() / 10);
    double b0 = 0.0;
    for (std::size_t i = tau.size() - n_tail; i < tau.size(); ++i) b0 += y[i];
    b0 /= static_cast<double>(n_tail);
    std::size_t n_above = 0;
    double ymax = 0.0;
    for (double v : y) {
        if (v > b0 + 3.0 * std::sqrt(std::max(b0, 1.0))) ++n_above;
        ymax = std::max(ymax, v);
    }
    if (n_above < 5) {
        out.message = "no decay visible above background";
        return out;
    }
    const double a0 = std::max(ymax - b0, 1.0);
    // Lifetime seed: delay where the curve falls to background + (a0 / e).
    double t0 = 0.25 * (tau.back() - tau.front());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (y[i] < b0 + a0 / std::numbers::e) {
            t0 = std::max(tau[i] - tau.front(), static_cast<double>(h.bin_width_ps));
            break;
        }
    }
    auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const double a = p[0], tc = p[1], b = p[2];
        if (tc <= 0.0) return false;
        for (std::size_t i = 0; i < tau.size(); ++i) {
            const double m = b + a * std::exp(-(tau[i] - tau.front()) / tc);
            const double s = std::sqrt(std::max(y[i], 1.0));
            r[static_cast<Eigen::Index>(i)] = (m - y[i]) / s;
        }
        return true;
    };
    Eigen::VectorXd p0(3);
    p0 << a0, t0, b0;
    const FitResult fr = levenberg_marquardt(residual, p0, static_cast<int>(tau.size()));
    out.amplitude = fr.params[0];
    out.tau_ps = fr.params[1];
    out.sigma_tau = fr.sigma(1);
    out.background = fr.params[2];
    out.chi2 = fr.chi2;
    out.dof = fr.dof;
    out.ok = fr.converged && out.tau_ps > 0.0 && out.sigma_tau < out.tau_ps;
    out.message = fr.message;
    return out;
}

OscillationFit fit_oscillation(const CorrelationCurve& c, double lo_ps, double hi_ps) {
    OscillationFit out;
    const CurvePoints pts = collect_points(c, lo_ps, hi_ps);
    if (pts.tau.size() < 8) {
        out.message = "too few defined bins in fit range";
        return out;
    }
    // Period seed from mean spacing of sign changes (each is half a period).
    std::vector<double> crossings;
    for (std::size_t i = 1; i < pts.tau.size(); ++i) {
        if ((pts.y[i - 1] < 0.0) != (pts.y[i] < 0.0)) {
            const double frac = pts.y[i - 1] / (pts.y[i - 1] - pts.y[i]);
            crossings.push_back(pts.tau[i - 1] + frac * (pts.tau[i] - pts.tau[i - 1]));
        }
    }
    double period0;
    if (crossings.size() >= 2) {
        period0 = 2.0 * (crossings.back() - crossings.front()) /
                  static_cast<double>(crossings.size() - 1);
    } else {
        period0 = 2.0 * (hi_ps - lo_ps);
    }
    double amp0 = 0.0;
    for (double v : pts.y) amp0 = std::max(amp0, std::abs(v));
    if (amp0 <= 0.0) amp0 = 1.0;

    auto make_residual = [&](double /*unused*/) {
        return [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
            const double a = p[0], period = p[1], phase = p[2];
            if (period <= 0.0) return false;
            for (std::size_t i = 0; i < pts.tau.size(); ++i) {
                const double m = a * std::cos(2.0 * std::numbers::pi * pts.tau[i] / period + phase);
                r[static_cast<Eigen::Index>(i)] = (m - pts.y[i]) / pts.sig[i];
            }
            return true;
        };
    };
    const auto residual = make_residual(0.0);
    FitResult best;
    bool have = false;
    for (double phase0 : {0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi}) {
        Eigen::VectorXd p0(3);
        p0 << amp0, period0, phase0;
        FitResult fr = levenberg_marquardt(residual, p0, static_cast<int>(pts.tau.size()));
        if (!have || (fr.converged && fr.chi2 < best.chi2)) {
            best = fr;
            have = true;
        }
    }
    out.amplitude = best.params[0];
    out.period_ps = std::abs(best.params[1]);
    out.phase_rad = best.params[2];
    out.sigma_period = best.sigma(1);
    out.chi2 = best.chi2;
    out.dof = best.dof;
    // A period extracted from an amplitude consistent with zero is noise.
    const bool significant = std::abs(out.amplitude) > 3.0 * best.sigma(0);
    out.ok = best.converged && out.period_ps > 0.0 && significant &&
             out.sigma_period < 0.5 * out.period_ps;
    out.message = best.message;
    if (best.converged && !significant) out.message = "amplitude consistent with zero";
    return out;
}

CorrelationCurve chsh_parameter(const FidelityInputs& in, ChshPlane plane) {
    require_matching_grids(in);
    const CorrelationCurve* c1 = nullptr;
    const CorrelationCurve* c2 = nullptr;
    switch (plane) {
        case ChshPlane::da_lr: c1 = &in.c_da; c2 = &in.c_lr; break;
        case ChshPlane::hv_da: c1 = &in.c_hv; c2 = &in.c_da; break;
        case ChshPlane::hv_lr: c1 = &in.c_hv; c2 = &in.c_lr; break;
    }
    CorrelationCurve s;
    s.bin_width_ps = in.c_hv.bin_width_ps;
    s.delay_ps = in.c_hv.delay_ps;
    s.value.resize(s.delay_ps.size());
    s.sigma.resize(s.delay_ps.size());
    for (std::size_t i = 0; i < s.delay_ps.size(); ++i) {
        if (std::isnan(c1->value[i]) || std::isnan(c2->value[i])) {
            s.value[i] = kNaN;
            s.sigma[i] = kNaN;
            continue;
        }
        s.value[i] = std::numbers::sqrt2 * (std::abs(c1->value[i]) + std::abs(c2->value[i]));
        s.sigma[i] = std::numbers::sqrt2 *
                     std::sqrt(c1->sigma[i] * c1->sigma[i] + c2->sigma[i] * c2->sigma[i]);
    }
    return s;
}

}  // namespace qled
