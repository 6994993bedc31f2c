#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qled/correlator.hpp"
#include "qled/scenario.hpp"
#include "qled/timetag.hpp"

namespace qled {

// Co- and cross-polarized coincidence histograms of one basis run, summed
// over both analyzer-port pairings.
struct BasisCorrelation {
    CorrelationHistogram co;
    CorrelationHistogram cross;
};

// Requires the four role labels (xx_plus .. x_minus) in the stream's channel
// map; throws AnalysisError otherwise.
BasisCorrelation basis_correlation(const TimeTagStream& s, std::int64_t bin_width_ps,
                                   std::int64_t window_ps);

// One stream per analysis basis, in kAllBases order.
using FidelitySet = std::array<TimeTagStream, kNumBases>;

// Simulates the five basis runs back to back on a single random sequence, so
// one (scenario, seed) pair pins the whole calibration set.
FidelitySet simulate_fidelity_set(const Scenario& sc, std::uint64_t seed);

// Degree-of-correlation curves of the five runs, assembled for the fidelity
// and Bell-parameter estimators.
FidelityInputs fidelity_inputs(const FidelitySet& streams, double fss_uev,
                               std::int64_t bin_width_ps, std::int64_t window_ps);

struct SweepOptions {
    std::int64_t bin_width_ps = 8;         // peak-search binning
    std::int64_t decay_bin_ps = 32;        // envelope-fit binning
    std::int64_t curve_window_ps = 16000;  // envelope-fit extent cap
    std::int64_t peak_window_ps = 1000;    // peak search extent cap
};

struct TempSweepRow {
    double temperature_k = 0.0;
    double peak_fidelity = 0.0;
    double sigma = 0.0;
    double hwhm_ps = 0.0;
    double x_lifetime_ps = 0.0;
};

// Per temperature: interpolate the calibration table, simulate a fidelity
// set with seed sc.seed + index, and summarize peak and decay width. Both
// analysis windows are capped by the interpolated lifetime so short-lifetime
// rows don't pick their peak from count-starved bins.
std::vector<TempSweepRow> run_temperature_sweep(const Scenario& sc,
                                                const std::vector<double>& temperatures_k,
                                                const SweepOptions& opt = {});

}  // namespace qled
