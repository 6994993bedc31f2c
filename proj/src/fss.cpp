#include "qled/fss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "qled/constants.hpp"
#include "qled/errors.hpp"
#include "qled/fit.hpp"

namespace qled {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// The angular part multiplying s/2 in the numerator, shared with the
// denominator where it is scaled by p instead of added to 2p.
double angular_bracket(double chi, double theta, double phi) {
    const double c4 = std::cos(4.0 * chi);
    const double s4 = std::sin(4.0 * chi);
    const double s2 = std::sin(2.0 * chi);
    return std::cos(theta) * (1.0 + c4) +
           std::sin(theta) * (s4 * std::cos(phi) - 2.0 * s2 * std::sin(phi));
}

double positive_fmod(double x, double period) {
    const double r = std::fmod(x, period);
    return r < 0.0 ? r + period : r;
}

}  // namespace

double qwp_energy_shift(double chi_rad, const QwpModelParams& m) {
    const double bracket = angular_bracket(chi_rad, m.theta_rad, m.phi_rad);
    const double den = 2.0 + m.p * bracket;
    if (std::abs(den) < 1e-9)
        throw AnalysisError("waveplate model singular: denominator vanishes (|p| near 1)");
    return 0.5 * m.s_uev * (2.0 * m.p + bracket) / den;
}

QwpModelParams canonical_qwp_params(QwpModelParams m) {
    if (m.s_uev < 0.0) {
        m.s_uev = -m.s_uev;
        m.theta_rad += std::numbers::pi;
    }
    m.theta_rad = positive_fmod(m.theta_rad, kTwoPi);
    // theta == pi maps to itself; anything beyond reflects into [0, pi).
    if (m.theta_rad > std::numbers::pi) {
        m.theta_rad = kTwoPi - m.theta_rad;
        m.phi_rad += std::numbers::pi;
    }
    m.phi_rad = positive_fmod(m.phi_rad, kTwoPi);
    return m;
}

Spectrum synth_spectrum(const std::vector<SpectralLine>& lines, double chi_rad,
                        double resolution_uev, const SpectrumGrid& grid, Rng* shot_noise) {
    if (resolution_uev <= 0.0) throw std::invalid_argument("resolution must be positive");
    if (grid.step_uev <= 0.0 || grid.max_uev < grid.min_uev)
        throw std::invalid_argument("energy grid must ascend with a positive step");
    Spectrum sp;
    const auto n = static_cast<std::size_t>((grid.max_uev - grid.min_uev) / grid.step_uev) + 1;
    sp.energy_uev.reserve(n);
    for (std::size_t i = 0; i < n; ++i) sp.energy_uev.push_back(grid.min_uev + i * grid.step_uev);
    sp.counts.assign(n, 0.0);
    for (const auto& line : lines) {
        if (line.intensity < 0.0 || line.fwhm_uev <= 0.0)
            throw std::invalid_argument("line needs nonnegative intensity and positive width");
        double center = line.center_uev;
        if (line.splitting)
            center += qwp_energy_shift(chi_rad, *line.splitting) + line.splitting->epsilon_uev;
        const double fwhm_eff = std::sqrt(line.fwhm_uev * line.fwhm_uev +
                                          resolution_uev * resolution_uev);
        const double sig = fwhm_eff * kFwhmToSigma;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (sp.energy_uev[i] - center) / sig;
            sp.counts[i] += line.intensity * std::exp(-0.5 * u * u);
        }
    }
    if (shot_noise) {
        for (auto& c : sp.counts) c = static_cast<double>(shot_noise->poisson(c));
    }
    return sp;
}

LineCenterFit fit_line_center(const Spectrum& spectrum, double window_lo_uev,
                              double window_hi_uev) {
    if (spectrum.energy_uev.size() != spectrum.counts.size())
        throw std::invalid_argument("spectrum arrays differ in length");
    std::vector<double> e, y;
    for (std::size_t i = 0; i < spectrum.energy_uev.size(); ++i) {
        if (spectrum.energy_uev[i] < window_lo_uev || spectrum.energy_uev[i] > window_hi_uev)
            continue;
        e.push_back(spectrum.energy_uev[i]);
        y.push_back(spectrum.counts[i]);
    }
    if (e.size() < 5) throw AnalysisError("line-fit window holds too few samples");
    const double ymin = *std::min_element(y.begin(), y.end());
    const double ymax = *std::max_element(y.begin(), y.end());
    const double amp = ymax - ymin;
    if (!(amp > 0.0)) throw AnalysisError("no line in window: spectrum is flat");

    // Reject windows holding several comparable peaks: local maxima above 60%
    // of the window amplitude separated by a dip below 30% count as distinct.
    int distinct = 0;
    double dip = ymax;
    bool in_peak = false;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool high = y[i] >= ymin + 0.6 * amp;
        if (high && !in_peak) {
            if (distinct == 0 || dip < ymin + 0.3 * amp) ++distinct;
            in_peak = true;
        } else if (!high && in_peak) {
            in_peak = false;
            dip = y[i];
        } else if (!high) {
            dip = std::min(dip, y[i]);
        }
    }
    if (distinct > 1) throw AnalysisError("multiple comparable peaks in window");

    const std::size_t imax =
        static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    double half_lo = e.front(), half_hi = e.back();
    for (std::size_t i = imax; i-- > 0;)
        if (y[i] < ymin + 0.5 * amp) { half_lo = e[i]; break; }
    for (std::size_t i = imax + 1; i < y.size(); ++i)
        if (y[i] < ymin + 0.5 * amp) { half_hi = e[i]; break; }
    const double step = e.size() > 1 ? e[1] - e[0] : 1.0;
    const double sig0 = std::max((half_hi - half_lo) * kFwhmToSigma, step);

    auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const double a = p[0], c = p[1], s = p[2], b = p[3];
        if (s <= 0.0) return false;
        for (std::size_t i = 0; i < e.size(); ++i) {
            const double u = (e[i] - c) / s;
            const double m = b + a * std::exp(-0.5 * u * u);
            const double w = std::sqrt(std::max(y[i], 1.0));
            r[static_cast<Eigen::Index>(i)] = (m - y[i]) / w;
        }
        return true;
    };
    Eigen::VectorXd p0(4);
    p0 << amp, e[imax], sig0, ymin;
    const FitResult fr = levenberg_marquardt(residual, p0, static_cast<int>(e.size()));
    if (!fr.converged) throw AnalysisError("line fit did not converge: " + fr.message);
    LineCenterFit out;
    out.amplitude = fr.params[0];
    out.center_uev = fr.params[1];
    out.sigma_uev = fr.sigma(1);
    out.fwhm_uev = std::abs(fr.params[2]) / kFwhmToSigma;
    out.background = fr.params[3];
    out.chi2 = fr.chi2;
    out.dof = fr.dof;
    return out;
}

QwpSeries synth_series(const QwpModelParams& params, int n_points, double chi_span_rad,
                       double noise_uev, Rng& rng) {
    if (n_points < 2) throw std::invalid_argument("series needs at least two points");
    if (chi_span_rad <= 0.0) throw std::invalid_argument("span must be positive");
    if (noise_uev < 0.0) throw std::invalid_argument("noise must be nonnegative");
    QwpSeries series;
    series.points.reserve(static_cast<std::size_t>(n_points));
    const double sigma = noise_uev > 0.0 ? noise_uev : 1.0;
    for (int k = 0; k < n_points; ++k) {
        const double chi = chi_span_rad * k / (n_points - 1);
        double v = qwp_energy_shift(chi, params) + params.epsilon_uev;
        if (noise_uev > 0.0) v += rng.gaussian(0.0, noise_uev);
        series.points.push_back({chi, v, sigma});
    }
    return series;
}

namespace {

struct SeriesView {
    std::vector<double> chi, y, w;  // w = 1/sigma
};

SeriesView validate_series(const QwpSeries& series) {
    const auto& pts = series.points;
    if (pts.size() < 8) throw AnalysisError("series needs at least 8 points for a fit");
    SeriesView v;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : pts) {
        if (!(p.sigma_uev > 0.0)) throw AnalysisError("series sigma must be positive");
        if (!std::isfinite(p.chi_rad) || !std::isfinite(p.delta_e_uev))
            throw AnalysisError("series contains non-finite values");
        lo = std::min(lo, p.chi_rad);
        hi = std::max(hi, p.chi_rad);
        v.chi.push_back(p.chi_rad);
        v.y.push_back(p.delta_e_uev);
        v.w.push_back(1.0 / p.sigma_uev);
    }
    if (hi - lo < std::numbers::pi - 1e-9)
        throw AnalysisError("series must span at least half a turn of the plate");
    return v;
}

}  // namespace

FssFit fit_fss(const QwpSeries& series, const FssFitOptions& options) {
    if (std::abs(options.p) > 1.0)
        throw std::invalid_argument("state polarization must lie in [-1, 1]");
    const SeriesView v = validate_series(series);
    const int n = static_cast<int>(v.chi.size());

    // Flat-model fit: chi2 against the weighted mean measures whether the
    // series varies at all.
    double sw = 0.0, swy = 0.0;
    for (int i = 0; i < n; ++i) {
        sw += v.w[i] * v.w[i];
        swy += v.w[i] * v.w[i] * v.y[i];
    }
    const double flat_mean = swy / sw;
    double chi2_flat = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = (v.y[i] - flat_mean) * v.w[i];
        chi2_flat += r * r;
    }

    // Grid multi-start: s enters the model linearly, so each (theta, phi)
    // start reduces to a weighted linear solve for (s, epsilon).
    struct Start {
        double s, theta, phi, eps, chi2;
    };
    std::vector<Start> starts;
    for (int it = 0; it < 8; ++it) {
        const double theta = std::numbers::pi * it / 8.0;
        for (int ip = 0; ip < 8; ++ip) {
            const double phi = kTwoPi * ip / 8.0;
            double a11 = 0.0, a12 = 0.0, a22 = 0.0, b1 = 0.0, b2 = 0.0;
            QwpModelParams unit{1.0, theta, phi, options.p, 0.0};
            std::vector<double> g(n);
            bool ok = true;
            for (int i = 0; i < n; ++i) {
                try {
                    g[i] = qwp_energy_shift(v.chi[i], unit);
                } catch (const AnalysisError&) {
                    ok = false;
                    break;
                }
                const double w2 = v.w[i] * v.w[i];
                a11 += w2 * g[i] * g[i];
                a12 += w2 * g[i];
                a22 += w2;
                b1 += w2 * g[i] * v.y[i];
                b2 += w2 * v.y[i];
            }
            if (!ok) continue;
            const double det = a11 * a22 - a12 * a12;
            if (std::abs(det) < 1e-12 * std::max(a11 * a22, 1.0)) continue;
            const double s = (b1 * a22 - b2 * a12) / det;
            const double eps = (a11 * b2 - a12 * b1) / det;
            double chi2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const double r = (s * g[i] + eps - v.y[i]) * v.w[i];
                chi2 += r * r;
            }
            starts.push_back({s, theta, phi, eps, chi2});
        }
    }
    if (starts.empty()) throw AnalysisError("no usable starting point for the fit");
    std::stable_sort(starts.begin(), starts.end(),
                     [](const Start& a, const Start& b) { return a.chi2 < b.chi2; });
    starts.resize(std::min<std::size_t>(starts.size(), 6));

    const int n_params = options.fit_p ? 5 : 4;
    auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        QwpModelParams m{p[0], p[1], p[2], options.fit_p ? p[4] : options.p, 0.0};
        for (int i = 0; i < n; ++i) {
            double shift;
            try {
                shift = qwp_energy_shift(v.chi[i], m);
            } catch (const AnalysisError&) {
                return false;
            }
            r[i] = (shift + p[3] - v.y[i]) * v.w[i];
        }
        return true;
    };

    FitResult best;
    bool have = false;
    for (const auto& st : starts) {
        Eigen::VectorXd p0(n_params);
        p0[0] = st.s;
        p0[1] = st.theta;
        p0[2] = st.phi;
        p0[3] = st.eps;
        if (options.fit_p) p0[4] = options.p;
        FitResult fr = levenberg_marquardt(residual, p0, n);
        if (!have || fr.chi2 < best.chi2) {
            best = fr;
            have = true;
        }
    }

    FssFit out;
    out.chi2 = best.chi2;
    out.dof = best.dof;
    out.message = best.message;
    QwpModelParams fitted{best.params[0], best.params[1], best.params[2],
                          options.fit_p ? best.params[4] : options.p, best.params[3]};
    const QwpModelParams canon = canonical_qwp_params(fitted);

    // The canonical map is built from sign flips of s and theta (plus angle
    // shifts), so the covariance follows by flipping the matching rows and
    // columns.
    Eigen::VectorXd sign = Eigen::VectorXd::Ones(n_params);
    if (fitted.s_uev < 0.0) sign[0] = -1.0;
    const double theta_shifted =
        positive_fmod(fitted.theta_rad + (fitted.s_uev < 0.0 ? std::numbers::pi : 0.0), kTwoPi);
    if (theta_shifted > std::numbers::pi) sign[1] = -1.0;
    out.covariance = best.covariance;
    for (int i = 0; i < n_params; ++i)
        for (int j = 0; j < n_params; ++j) out.covariance(i, j) *= sign[i] * sign[j];

    out.params = canon;
    out.sigma_s_uev = std::sqrt(std::max(out.covariance(0, 0), 0.0));
    out.sigma_theta_rad = std::sqrt(std::max(out.covariance(1, 1), 0.0));
    out.sigma_phi_rad = std::sqrt(std::max(out.covariance(2, 2), 0.0));
    out.sigma_epsilon_uev = std::sqrt(std::max(out.covariance(3, 3), 0.0));

    const double s_abs = std::abs(canon.s_uev);
    const bool varies = chi2_flat - out.chi2 > 25.0;
    const bool significant = out.sigma_s_uev > 0.0 && s_abs > 3.0 * out.sigma_s_uev;
    out.resolved = best.converged && varies && significant;
    if (!out.resolved) {
        out.upper_bound_uev = s_abs + 3.0 * out.sigma_s_uev;
        std::ostringstream ss;
        ss << "splitting unresolved: series variation is consistent with zero"
           << " (bound " << out.upper_bound_uev << " ueV)";
        out.message = ss.str();
    }
    return out;
}

}  // namespace qled
