#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qled/timetag.hpp"

namespace qled {

// Symmetric coincidence histogram between two channels. Delay = t_b - t_a. Bin k
// (k in [-n_half, n_half]) covers [k*bin - bin/2, k*bin + bin/2), so the zero bin
// is centered on zero delay; counts[i] holds bin k = i - n_half.
struct CorrelationHistogram {
    std::int64_t bin_width_ps = 0;
    std::int64_t n_half = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t total_a = 0, total_b = 0;  // singles counted on each channel
    std::uint64_t duration_ps = 0;

    std::size_t size() const { return counts.size(); }
    std::int64_t delay_at(std::size_t i) const {
        return (static_cast<std::int64_t>(i) - n_half) * bin_width_ps;
    }
    std::int64_t window_ps() const { return n_half * bin_width_ps; }
};

// All-pairs counting (not start-stop): every ordered (a, b) click pair whose delay
// falls in a bin increments it. With ch_a == ch_b every ordered pair of distinct
// records counts, so the histogram is symmetric. OpenMP-parallel over a-clicks with
// per-thread histograms; the merge is a plain integer sum, so the result is
// bit-identical to the serial reference for any thread count.
CorrelationHistogram cross_correlation(const TimeTagStream& s, std::uint16_t ch_a,
                                       std::uint16_t ch_b, std::int64_t bin_width_ps,
                                       std::int64_t window_ps);

// Single-threaded reference implementation, kept for tests and benchmarks.
CorrelationHistogram cross_correlation_serial(const TimeTagStream& s, std::uint16_t ch_a,
                                              std::uint16_t ch_b, std::int64_t bin_width_ps,
                                              std::int64_t window_ps);

// Element-wise sum. Shapes and durations must match; totals add (meaningful when
// combining disjoint channel pairings of the same acquisition).
CorrelationHistogram merge_histograms(const CorrelationHistogram& a, const CorrelationHistogram& b);

// Values on the histogram delay grid; NaN value+sigma marks an undefined bin.
struct CorrelationCurve {
    std::int64_t bin_width_ps = 0;
    std::vector<double> delay_ps, value, sigma;
    std::size_t size() const { return value.size(); }
};

// g2[k] = counts[k] / (total_a * total_b * bin / duration), Poisson errors.
// Throws AnalysisError when a total or the duration is zero.
CorrelationCurve normalize_g2(const CorrelationHistogram& h);

// C = (co - cross)/(co + cross) per bin; sigma by binomial propagation with the
// success fraction clamped away from 0/1 by 1/(n+2) so single-count bins keep a
// finite error. Bins with co + cross = 0 are NaN-flagged.
CorrelationCurve degree_of_correlation(const CorrelationHistogram& co,
                                       const CorrelationHistogram& cross);

// Correlation degrees of the five standard bases on a shared delay grid.
struct FidelityInputs {
    CorrelationCurve c_hv, c_da, c_lr, c_eldera, c_elaerd;
    double fss_uev = 0.0;  // splitting used for the evolving-phase reconstruction
};

enum class PhaseMode { evolving, fixed };

// Per-bin fidelity to the pair state, with chi = fss * delay / hbar (evolving) or a
// fixed chi. Undefined input bins propagate to NaN.
CorrelationCurve fidelity_curve(const FidelityInputs& in, PhaseMode mode, double fixed_chi = 0.0);

struct PeakValue {
    double value = 0, sigma = 0;
    double delay_ps = 0;
};

// Maximum defined value at nonnegative delay; throws AnalysisError when no bin is defined.
PeakValue peak_fidelity(const CorrelationCurve& f);

enum class ChshPlane { da_lr, hv_da, hv_lr };

// Rotated-basis estimator S[k] = sqrt(2) * (|C1[k]| + |C2[k]|) for the plane's two
// correlators; errors add in quadrature.
CorrelationCurve chsh_parameter(const FidelityInputs& in, ChshPlane plane);

struct DecayFit {
    double amplitude = 0, sigma_amplitude = 0;
    double hwhm_ps = 0, sigma_hwhm = 0;
    double floor_value = 0;
    double chi2 = 0;
    int dof = 0;
    bool converged = false;
    bool degenerate = false;  // amplitude indistinguishable from the floor
    std::string message;
};

// Weighted fit of value(tau) = floor + (A - floor) exp(-(tau/w)^2 ln 2) over defined
// bins with 0 <= tau <= max_delay_ps (whole curve when unset). w is the half width
// at half maximum.
DecayFit fit_gaussian_decay(const CorrelationCurve& f, double floor_value = 0.25,
                            std::optional<double> max_delay_ps = {});

struct LifetimeFit {
    double tau_ps = 0, sigma_tau = 0;
    double amplitude = 0, background = 0;
    double chi2 = 0;
    int dof = 0;
    bool ok = false;
    std::string message;
};

// counts(tau) = B + A exp(-tau/tau0) over delay bins in [lo, hi] ps. Needs at least
// five bins clearly above the flat background, otherwise ok = false with a reason.
LifetimeFit fit_exponential_decay(const CorrelationHistogram& h, std::int64_t lo_ps,
                                  std::int64_t hi_ps);

struct OscillationFit {
    double amplitude = 0, period_ps = 0, phase_rad = 0;
    double sigma_period = 0;
    double chi2 = 0;
    int dof = 0;
    bool ok = false;
    std::string message;
};

// value(tau) = A cos(2 pi tau / P + phi0) over defined bins in [lo, hi]; the period
// search is seeded from the mean zero-crossing spacing. ok additionally requires an
// amplitude inconsistent with zero, so featureless input never yields a period.
OscillationFit fit_oscillation(const CorrelationCurve& c, double lo_ps, double hi_ps);

}  // namespace qled
