#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qled/analysis.hpp"
#include "qled/config.hpp"
#include "qled/correlator.hpp"
#include "qled/errors.hpp"
#include "qled/scenario.hpp"

using namespace qled;

namespace {

// Small but real scenario: ideal detectors, one channel per analyzer port.
Scenario micro_scenario(double fss_uev, double background, double duration_s) {
    Scenario sc;
    sc.source.fss_uev = fss_uev;
    sc.source.x_lifetime_ps = 1000;
    sc.source.xx_lifetime_ps = 500;
    sc.source.cycle_rate_hz = 2e6;
    sc.source.background_fraction = background;
    sc.duration_s = duration_s;
    sc.seed = 4242;
    for (std::uint16_t c = 0; c < 4; ++c) sc.detectors.push_back({c, {}});
    sc.channels = {0, 1, 2, 3};
    for (std::size_t i = 0; i < kChannelRoles.size(); ++i)
        sc.channel_map[static_cast<std::uint16_t>(i)] = kChannelRoles[i];
    return sc;
}

}  // namespace

TEST_CASE("per-basis correlation needs the four role labels") {
    const Scenario sc = micro_scenario(0.0, 0.0, 0.002);
    TimeTagStream s = simulate_stream(sc, 1);
    CHECK_NOTHROW((void)basis_correlation(s, 32, 1024));
    s.channel_map.erase(2);  // drop the x_plus label
    s.records.erase(std::remove_if(s.records.begin(), s.records.end(),
                                   [](const TimeTagRecord& r) { return r.channel == 2; }),
                    s.records.end());
    CHECK_THROWS_AS((void)basis_correlation(s, 32, 1024), AnalysisError);
}

TEST_CASE("co and cross pairings sum every analyzer-port combination once") {
    const Scenario sc = micro_scenario(0.0, 0.0, 0.01);
    const TimeTagStream s = simulate_stream(sc, 2);
    const BasisCorrelation bc = basis_correlation(s, 32, 2048);
    // totals: co counts (0,2)+(1,3) singles, cross counts (0,3)+(1,2) —
    // identical sums because both cover all four channels
    CHECK(bc.co.total_a == s.counts_on(0) + s.counts_on(1));
    CHECK(bc.cross.total_a == s.counts_on(0) + s.counts_on(1));
    CHECK(bc.co.total_b == s.counts_on(2) + s.counts_on(3));

    // fss = 0, no background: the symmetric state never produces cross
    // clicks, so every true coincidence lands in the co histogram
    std::uint64_t co_sum = 0, cross_sum = 0;
    for (std::size_t i = 0; i < bc.co.size(); ++i) {
        if (bc.co.delay_at(i) >= 0) co_sum += bc.co.counts[i];
        if (bc.cross.delay_at(i) >= 0) cross_sum += bc.cross.counts[i];
    }
    REQUIRE(co_sum > 2000);
    CHECK(cross_sum < co_sum / 50);  // accidentals only
}

TEST_CASE("a fidelity set is pinned by scenario and seed") {
    const Scenario sc = micro_scenario(17.7, 0.1, 0.002);
    const FidelitySet a = simulate_fidelity_set(sc, 77);
    const FidelitySet b = simulate_fidelity_set(sc, 77);
    const FidelitySet c = simulate_fidelity_set(sc, 78);
    bool same_ab = true, same_ac = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        check_stream(a[i]);
        same_ab = same_ab && a[i].records.size() == b[i].records.size();
        same_ac = same_ac && a[i].records.size() == c[i].records.size();
        if (same_ab)
            for (std::size_t j = 0; j < a[i].records.size(); ++j)
                same_ab = same_ab && a[i].records[j].timestamp_ps == b[i].records[j].timestamp_ps &&
                          a[i].records[j].channel == b[i].records[j].channel;
    }
    CHECK(same_ab);
    CHECK_FALSE(same_ac);
}

TEST_CASE("an ideal source reconstructs near-unit fidelity end to end") {
    const Scenario sc = micro_scenario(17.7, 0.0, 0.02);
    const FidelitySet set = simulate_fidelity_set(sc, sc.seed);
    const FidelityInputs in = fidelity_inputs(set, sc.source.fss_uev, 8, 1000);
    CHECK(in.fss_uev == 17.7);
    REQUIRE(in.c_hv.size() == in.c_da.size());
    REQUIRE(in.c_hv.size() == in.c_elaerd.size());
    const PeakValue peak = peak_fidelity(fidelity_curve(in, PhaseMode::evolving));
    CHECK(peak.value > 0.9);
    CHECK(peak.value < 1.05);
    CHECK(peak.sigma < 0.05);

    // background lowers the plateau: same seed, heavily mixed emission
    const Scenario noisy = micro_scenario(17.7, 0.6, 0.02);
    const FidelitySet nset = simulate_fidelity_set(noisy, noisy.seed);
    const PeakValue npeak =
        peak_fidelity(fidelity_curve(fidelity_inputs(nset, 17.7, 8, 1000), PhaseMode::evolving));
    CHECK(npeak.value < peak.value - 0.2);
}

TEST_CASE("temperature sweeps demand a calibration table and temperatures") {
    Scenario sc = micro_scenario(17.7, 0.1, 0.002);
    CHECK_THROWS_AS((void)run_temperature_sweep(sc, {50.0}), ConfigError);
    sc.temperature = TemperatureModel{{{44.0, 1000.0, 0.1}, {99.0, 200.0, 0.7}}};
    CHECK_THROWS_AS((void)run_temperature_sweep(sc, {}), ConfigError);
    CHECK_THROWS_AS((void)run_temperature_sweep(sc, {120.0}), ConfigError);  // outside table
}

TEST_CASE("sweep rows echo the interpolated lifetime and summarize the curve") {
    Scenario sc = micro_scenario(17.7, 0.0, 0.01);
    sc.temperature = TemperatureModel{{{40.0, 1000.0, 0.0}, {100.0, 400.0, 0.3}}};
    const auto rows = run_temperature_sweep(sc, {40.0, 70.0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].temperature_k == 40.0);
    CHECK(rows[0].x_lifetime_ps == 1000.0);
    CHECK(rows[1].x_lifetime_ps == 700.0);  // midpoint of the table
    for (const auto& r : rows) {
        CHECK(r.peak_fidelity > 0.5);
        // the argmax over noisy bins may overshoot the physical ceiling, but
        // only within its own reported error
        CHECK(r.peak_fidelity <= 1.0 + 5 * r.sigma);
        CHECK(r.sigma > 0.0);
        CHECK(r.hwhm_ps > 0.0);
    }
    // the cold row is cleaner than the warm one
    CHECK(rows[0].peak_fidelity > rows[1].peak_fidelity - 3 * rows[1].sigma);
}
