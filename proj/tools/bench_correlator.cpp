#include <benchmark/benchmark.h>

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qled/cascade.hpp"
#include "qled/correlator.hpp"
#include "qled/polarization.hpp"
#include "qled/rng.hpp"
#include "qled/timetag.hpp"

namespace {

using namespace qled;

// ~1M detector records: a dense pair source observed for 8 ms.
const TimeTagStream& bench_stream() {
    static const TimeTagStream stream = [] {
        CascadeParams p;
        p.fss_uev = 2.0;
        p.x_lifetime_ps = 400.0;
        p.xx_lifetime_ps = 200.0;
        p.cycle_rate_hz = 1e8;
        Rng rng(7151);
        const double duration_ps = 8e9;
        const auto clicks = generate_clicks(p, measurement_basis(Basis::HV),
                                            measurement_basis(Basis::HV), ArmChannels{},
                                            duration_ps, rng);
        DetectorModel m;
        m.efficiency = 0.6;
        return apply_detector(clicks, m, {0, 1, 2, 3},
                              static_cast<std::uint64_t>(duration_ps), rng);
    }();
    return stream;
}

void bm_cross_correlation_serial(benchmark::State& state) {
    const TimeTagStream& s = bench_stream();
    for (auto _ : state) {
        auto h = cross_correlation_serial(s, 0, 2, 32, 50000);
        benchmark::DoNotOptimize(h.counts.data());
    }
}
BENCHMARK(bm_cross_correlation_serial)->Unit(benchmark::kMillisecond);

void bm_cross_correlation_parallel(benchmark::State& state) {
#ifdef _OPENMP
    omp_set_num_threads(static_cast<int>(state.range(0)));
#endif
    const TimeTagStream& s = bench_stream();
    for (auto _ : state) {
        auto h = cross_correlation(s, 0, 2, 32, 50000);
        benchmark::DoNotOptimize(h.counts.data());
    }
}
BENCHMARK(bm_cross_correlation_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
