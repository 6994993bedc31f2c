#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qled/polarization.hpp"
#include "qled/rng.hpp"
#include "qled/timetag.hpp"

namespace qled {

// Source parameters for one emission cycle. Rates are in Hz, times in ps.
struct CascadeParams {
    double fss_uev = 0.0;
    double x_lifetime_ps = 1000.0;
    double xx_lifetime_ps = 500.0;
    double cycle_rate_hz = 2e6;
    double reexcitation_rate_hz = 0.0;
    double background_fraction = 0.0;
    NoiseMode noise_mode = NoiseMode::white;
};

// One emitted photon pair. chi is the phase accumulated during the delay
// between the two emissions; uncorrelated marks pairs whose intermediate
// level was re-populated, which scrambles the polarization correlation.
struct PairEvent {
    double xx_emit_time_ps = 0.0;
    double x_delay_ps = 0.0;
    double chi = 0.0;
    bool uncorrelated = false;

    double x_emit_time_ps() const { return xx_emit_time_ps + x_delay_ps; }
};

// Samples the next cascade and advances clock_ps past it, so consecutive
// cascades never overlap in time.
PairEvent sample_cascade_event(const CascadeParams& p, double& clock_ps, Rng& rng);

// Density matrix of the emitted pair, mixed per background_fraction.
TwoPhotonDensityMatrix event_state(const CascadeParams& p, const PairEvent& e);

// One photon assigned to an analyzer output port, before the detector chain.
struct ResolvedClick {
    double time_ps = 0.0;
    bool is_xx = false;
    bool plus_arm = false;
};

// Samples the joint analyzer-port outcome for one pair directly from the
// event's density matrix. Readable reference; the stream generator uses the
// algebraically identical closed form in PairSampler instead.
std::array<ResolvedClick, 2> resolve_clicks(const CascadeParams& p, const PairEvent& e,
                                            const MeasurementBasis& basis_xx,
                                            const MeasurementBasis& basis_x, Rng& rng);

// Joint outcome probabilities for a pair analyzed in fixed settings on each
// arm. The pure-state probability is alpha + beta*cos(chi) + gamma*sin(chi)
// per outcome, so per-event work is a few multiply-adds instead of a
// density-matrix contraction. Must match resolve_clicks' probabilities.
class PairSampler {
  public:
    PairSampler(const CascadeParams& p, const MeasurementBasis& basis_xx,
                const MeasurementBasis& basis_x);

    // Outcome order: (xx+,x+), (xx+,x-), (xx-,x+), (xx-,x-). Sums to 1.
    std::array<double, 4> probabilities(double chi, bool uncorrelated) const;

  private:
    double alpha_[4];
    double beta_[4];
    double gamma_[4];
    double noise_[4];
    double visibility_;
};

// Channel assignment for the four analyzer ports.
struct ArmChannels {
    std::uint16_t xx_plus = 0;
    std::uint16_t xx_minus = 1;
    std::uint16_t x_plus = 2;
    std::uint16_t x_minus = 3;
};

// An ideal click before any detector response is applied.
struct ClickEvent {
    double time_ps = 0.0;
    std::uint16_t channel = 0;
};

// Simulates cascades until duration_ps and resolves each photon to one
// analyzer port. Output is time-ordered.
std::vector<ClickEvent> generate_clicks(const CascadeParams& p, const MeasurementBasis& basis_xx,
                                        const MeasurementBasis& basis_x, const ArmChannels& ch,
                                        double duration_ps, Rng& rng);

// Detector response parameters.
struct DetectorModel {
    double efficiency = 1.0;
    double jitter_fwhm_ps = 0.0;
    double dark_rate_hz = 0.0;
    double dead_time_ps = 0.0;
    double time_bin_ps = 1.0;
};

// Binds a detector response to one stream channel.
struct DetectorChannel {
    std::uint16_t channel = 0;
    DetectorModel model;
};

struct DetectorStats {
    std::uint64_t dark_counts = 0;
    std::uint64_t dead_time_drops = 0;
    std::uint64_t clamped = 0;
};

// Applies efficiency thinning, timing jitter, tagger quantization, dark
// counts, and dead time, then assembles a sorted stream. RNG is consumed in
// ascending channel order so results are reproducible for a given seed.
TimeTagStream apply_detector(const std::vector<ClickEvent>& clicks,
                             const std::vector<DetectorChannel>& detectors,
                             std::uint64_t duration_ps,
                             const std::map<std::uint16_t, std::string>& channel_map, Rng& rng,
                             DetectorStats* stats = nullptr);

// Same response on every listed channel; channels are labeled "ch<N>".
TimeTagStream apply_detector(const std::vector<ClickEvent>& clicks, const DetectorModel& model,
                             const std::vector<std::uint16_t>& channels,
                             std::uint64_t duration_ps, Rng& rng, DetectorStats* stats = nullptr);

// Calibration row: how the intermediate-level lifetime and the uncorrelated
// background grow as the sample warms up.
struct TemperatureRow {
    double temperature_k = 0.0;
    double x_lifetime_ps = 0.0;
    double background_fraction = 0.0;
};

struct TemperatureModel {
    std::vector<TemperatureRow> rows;  // strictly ascending temperature
};

// Linear interpolation between calibration rows; exact at the rows. Refuses
// to extrapolate outside the table.
CascadeParams params_at_temperature(CascadeParams base, const TemperatureModel& m,
                                    double temperature_k);

}  // namespace qled
