#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "qled/errors.hpp"
#include "qled/fss.hpp"
#include "qled/rng.hpp"

using namespace qled;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("waveplate model hits its closed-form anchor points") {
    QwpModelParams m{17.7, 0.0, 0.0, 0.0, 0.0};
    // chi = 0 with theta = 0: the full splitting projects onto the line, s/2
    CHECK(qwp_energy_shift(0.0, m) == doctest::Approx(17.7 / 2).epsilon(1e-14));
    // chi = pi/4 rotates the detected component to the orthogonal line: 0
    CHECK(qwp_energy_shift(kPi / 4, m) == doctest::Approx(0.0).epsilon(1e-14));

    // theta = pi/2, phi = 0 at chi = pi/8 gives a quarter of the splitting
    m.theta_rad = kPi / 2;
    CHECK(qwp_energy_shift(kPi / 8, m) == doctest::Approx(17.7 / 4).epsilon(1e-12));

    // residual polarization shifts the plateau: theta = 0, chi = pi/4 leaves
    // only the 2p term, s*p/2 after the denominator's 2
    QwpModelParams pol{10.0, 0.0, 0.0, 0.4, 0.0};
    CHECK(qwp_energy_shift(kPi / 4, pol) == doctest::Approx(10.0 * 0.4 / 2).epsilon(1e-12));
}

TEST_CASE("waveplate model is periodic in half a plate turn") {
    const QwpModelParams m{17.7, 0.35, 1.1, 0.2, 0.0};
    Rng rng(101);
    for (int i = 0; i < 25; ++i) {
        const double chi = rng.uniform(0.0, 2 * kPi);
        CHECK(qwp_energy_shift(chi + kPi, m) ==
              doctest::Approx(qwp_energy_shift(chi, m)).epsilon(1e-12));
    }
}

TEST_CASE("eight evenly spaced plate angles average to a quarter splitting") {
    // with theta = 0 and no residual polarization the shift is
    // (s/4)(1 + cos 4chi); the cosine averages out on the pi/8 grid
    const QwpModelParams m{17.7, 0.0, 0.0, 0.0, 0.0};
    double mean = 0.0;
    for (int k = 0; k < 8; ++k) mean += qwp_energy_shift(k * kPi / 8, m);
    mean /= 8.0;
    CHECK(mean == doctest::Approx(17.7 / 4).epsilon(1e-12));
}

TEST_CASE("the unpolarized model is blind to the two sign symmetries") {
    Rng rng(103);
    for (int i = 0; i < 20; ++i) {
        const QwpModelParams m{rng.uniform(0.5, 30.0), rng.uniform(0.0, kPi),
                               rng.uniform(0.0, 2 * kPi), 0.0, 0.0};
        QwpModelParams flip_s = m;
        flip_s.s_uev = -m.s_uev;
        flip_s.theta_rad = m.theta_rad + kPi;
        QwpModelParams flip_theta = m;
        flip_theta.theta_rad = -m.theta_rad;
        flip_theta.phi_rad = m.phi_rad + kPi;
        const double chi = rng.uniform(0.0, 2 * kPi);
        const double ref = qwp_energy_shift(chi, m);
        CHECK(qwp_energy_shift(chi, flip_s) == doctest::Approx(ref).epsilon(1e-12));
        CHECK(qwp_energy_shift(chi, flip_theta) == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("canonicalization lands in the fundamental domain without moving the model") {
    Rng rng(107);
    for (int i = 0; i < 20; ++i) {
        const QwpModelParams raw{rng.uniform(-30.0, 30.0), rng.uniform(-7.0, 7.0),
                                 rng.uniform(-7.0, 7.0), 0.0, rng.uniform(-1.0, 1.0)};
        const QwpModelParams canon = canonical_qwp_params(raw);
        CHECK(canon.s_uev >= 0.0);
        CHECK(canon.theta_rad >= 0.0);
        CHECK(canon.theta_rad <= kPi);
        CHECK(canon.phi_rad >= 0.0);
        CHECK(canon.phi_rad < 2 * kPi);
        CHECK(canon.epsilon_uev == raw.epsilon_uev);
        for (double chi : {0.3, 1.1, 2.9}) {
            CHECK(qwp_energy_shift(chi, canon) ==
                  doctest::Approx(qwp_energy_shift(chi, raw)).epsilon(1e-10));
        }
        // applying it twice changes nothing
        const QwpModelParams twice = canonical_qwp_params(canon);
        CHECK(twice.s_uev == canon.s_uev);
        CHECK(twice.theta_rad == canon.theta_rad);
        CHECK(twice.phi_rad == canon.phi_rad);
    }
}

TEST_CASE("a fully polarized state can make the model singular") {
    const QwpModelParams m{10.0, 0.0, 0.0, -1.0, 0.0};
    // denominator 2 + p*B vanishes at chi = 0 where B = 2
    CHECK_THROWS_AS((void)qwp_energy_shift(0.0, m), AnalysisError);
    // away from the singular angle the model is fine
    CHECK_NOTHROW((void)qwp_energy_shift(0.7, m));
}

TEST_CASE("lines without splitting ignore the plate angle") {
    SpectralLine line;
    line.center_uev = 3.0;
    line.intensity = 500.0;
    line.fwhm_uev = 2.0;
    const SpectrumGrid grid{-15.0, 15.0, 0.25};
    const Spectrum a = synth_spectrum({line}, 0.0, 1.0, grid);
    const Spectrum b = synth_spectrum({line}, 1.234, 1.0, grid);
    REQUIRE(a.counts.size() == b.counts.size());
    for (std::size_t i = 0; i < a.counts.size(); ++i) CHECK(a.counts[i] == b.counts[i]);
    // and the grid is inclusive on both ends
    CHECK(a.energy_uev.front() == -15.0);
    CHECK(a.energy_uev.back() == 15.0);
}

TEST_CASE("with no setup rotation the line sweeps an envelope of half the splitting") {
    // the detected component moves as (s/4)(1 + cos 4chi): never negative,
    // topping out at s/2 rather than the full splitting
    const QwpModelParams m{17.7, 0.0, 0.0, 0.0, 0.0};
    double lo = 1e300, hi = -1e300;
    for (int k = 0; k < 720; ++k) {
        const double shift = qwp_energy_shift(k * kPi / 720, m);
        lo = std::min(lo, shift);
        hi = std::max(hi, shift);
    }
    CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(hi == doctest::Approx(17.7 / 2).epsilon(1e-12));
}

TEST_CASE("shot noise is reproducible for a fixed seed") {
    SpectralLine line;
    line.center_uev = 0.0;
    line.intensity = 200.0;
    line.fwhm_uev = 2.0;
    const SpectrumGrid grid{-10.0, 10.0, 0.5};
    Rng r1(11), r2(11), r3(12);
    const Spectrum a = synth_spectrum({line}, 0.0, 1.0, grid, &r1);
    const Spectrum b = synth_spectrum({line}, 0.0, 1.0, grid, &r2);
    const Spectrum c = synth_spectrum({line}, 0.0, 1.0, grid, &r3);
    CHECK(a.counts == b.counts);
    CHECK(a.counts != c.counts);
    // Poisson draws are integers
    for (double v : a.counts) CHECK(v == std::floor(v));
}

TEST_CASE("line-center fitting recovers an isolated line exactly") {
    SpectralLine line;
    line.center_uev = 3.2;
    line.intensity = 1000.0;
    line.fwhm_uev = 2.0;
    const Spectrum sp = synth_spectrum({line}, 0.0, 1.0, {-15.0, 15.0, 0.25});
    const LineCenterFit fit = fit_line_center(sp, -10.0, 16.0);
    CHECK(fit.center_uev == doctest::Approx(3.2).epsilon(1e-6));
    CHECK(fit.amplitude == doctest::Approx(1000.0).epsilon(1e-4));
    // width comes back as the quadrature sum of line and instrument widths
    CHECK(fit.fwhm_uev == doctest::Approx(std::sqrt(2.0 * 2.0 + 1.0)).epsilon(1e-4));
    CHECK(std::abs(fit.background) < 1e-3);
    CHECK(fit.sigma_uev >= 0.0);
    CHECK(fit.dof > 0);
}

TEST_CASE("line-center fitting refuses ambiguous and empty windows") {
    SpectralLine a, b;
    a.center_uev = -6.0;
    b.center_uev = 6.0;
    a.intensity = b.intensity = 800.0;
    a.fwhm_uev = b.fwhm_uev = 1.0;
    const Spectrum two = synth_spectrum({a, b}, 0.0, 1.0, {-15.0, 15.0, 0.25});

    try {
        (void)fit_line_center(two, -15.0, 15.0);
        FAIL("expected AnalysisError");
    } catch (const AnalysisError& e) {
        CHECK(std::string(e.what()).find("multiple comparable peaks") != std::string::npos);
    }
    // a window isolating one line is fine
    CHECK(fit_line_center(two, -15.0, 0.0).center_uev == doctest::Approx(-6.0).epsilon(1e-6));

    CHECK_THROWS_AS((void)fit_line_center(two, 20.0, 30.0), AnalysisError);  // no samples

    Spectrum flat;
    for (int i = 0; i < 50; ++i) {
        flat.energy_uev.push_back(i * 0.5);
        flat.counts.push_back(7.0);
    }
    try {
        (void)fit_line_center(flat, 0.0, 25.0);
        FAIL("expected AnalysisError");
    } catch (const AnalysisError& e) {
        CHECK(std::string(e.what()).find("flat") != std::string::npos);
    }
}

TEST_CASE("synthesized rotation series covers the span inclusively") {
    const QwpModelParams m{17.7, 0.35, 1.1, 0.0, -0.4};
    Rng rng(13);
    const QwpSeries series = synth_series(m, 64, 2 * kPi, 0.0, rng);
    REQUIRE(series.points.size() == 64);
    CHECK(series.points.front().chi_rad == 0.0);
    CHECK(series.points.back().chi_rad == doctest::Approx(2 * kPi).epsilon(1e-15));
    for (const auto& pt : series.points) {
        CHECK(pt.sigma_uev == 1.0);  // noiseless synthesis stores unit sigma
        CHECK(pt.delta_e_uev ==
              doctest::Approx(qwp_energy_shift(pt.chi_rad, m) - 0.4).epsilon(1e-12));
    }

    CHECK_THROWS_AS((void)synth_series(m, 1, 2 * kPi, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS((void)synth_series(m, 64, -1.0, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS((void)synth_series(m, 64, 2 * kPi, -0.1, rng), std::invalid_argument);
}

TEST_CASE("splitting fit recovers noiseless series parameters to machine precision") {
    const QwpModelParams truth{17.7, 0.4, 0.7, 0.0, -0.4};
    Rng rng(17);
    const QwpSeries series = synth_series(truth, 48, 2 * kPi, 0.0, rng);
    const FssFit fit = fit_fss(series);
    CHECK(fit.resolved);
    CHECK(fit.params.s_uev == doctest::Approx(17.7).epsilon(1e-6));
    CHECK(fit.params.theta_rad == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(fit.params.phi_rad == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(fit.params.epsilon_uev == doctest::Approx(-0.4).epsilon(1e-5));
    CHECK(fit.chi2 < 1e-10);
}

TEST_CASE("splitting fit can float the residual polarization") {
    const QwpModelParams truth{12.0, 1.1, 2.2, 0.3, 0.5};
    Rng rng(19);
    const QwpSeries series = synth_series(truth, 96, 2 * kPi, 0.0, rng);
    FssFitOptions opt;
    opt.fit_p = true;
    opt.p = 0.0;  // start away from the truth
    const FssFit fit = fit_fss(series, opt);
    CHECK(fit.resolved);
    CHECK(fit.params.s_uev == doctest::Approx(12.0).epsilon(1e-4));
    CHECK(fit.params.p == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(fit.covariance.rows() == 5);
}

TEST_CASE("noisy series still localize the splitting") {
    const QwpModelParams truth{17.7, 0.4, 0.7, 0.0, 0.0};
    int hits = 0;
    double total_err = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(9000 + trial);
        const QwpSeries series = synth_series(truth, 128, 2 * kPi, 0.3, rng);
        const FssFit fit = fit_fss(series);
        REQUIRE(fit.resolved);
        const double err = std::abs(fit.params.s_uev - 17.7);
        total_err += err;
        if (err < 0.5) ++hits;
        CHECK(fit.sigma_s_uev > 0.0);
        CHECK(fit.sigma_s_uev < 0.5);
    }
    CHECK(hits == 10);
    CHECK(total_err / 10 < 0.2);
}

TEST_CASE("a splitting-free series comes back unresolved with an upper bound") {
    const QwpModelParams truth{0.0, 0.0, 0.0, 0.0, 1.5};
    Rng rng(23);
    const QwpSeries series = synth_series(truth, 512, 2 * kPi, 0.3, rng);
    const FssFit fit = fit_fss(series);
    CHECK_FALSE(fit.resolved);
    CHECK(fit.upper_bound_uev > 0.0);
    CHECK(fit.upper_bound_uev < 0.9);  // a long series pins the bound well below 1 ueV
    CHECK(fit.message.find("unresolved") != std::string::npos);
}

TEST_CASE("series validation rejects unusable inputs") {
    const QwpModelParams m{17.7, 0.4, 0.7, 0.0, 0.0};
    Rng rng(29);

    const QwpSeries short_series = synth_series(m, 7, 2 * kPi, 0.0, rng);
    CHECK_THROWS_AS((void)fit_fss(short_series), AnalysisError);

    const QwpSeries narrow = synth_series(m, 64, 3.0, 0.0, rng);  // 3.0 < pi
    CHECK_THROWS_AS((void)fit_fss(narrow), AnalysisError);

    QwpSeries bad_sigma = synth_series(m, 64, 2 * kPi, 0.0, rng);
    bad_sigma.points[10].sigma_uev = 0.0;
    CHECK_THROWS_AS((void)fit_fss(bad_sigma), AnalysisError);

    QwpSeries non_finite = synth_series(m, 64, 2 * kPi, 0.0, rng);
    non_finite.points[3].delta_e_uev = std::nan("");
    CHECK_THROWS_AS((void)fit_fss(non_finite), AnalysisError);

    FssFitOptions opt;
    opt.p = 1.5;
    const QwpSeries good = synth_series(m, 64, 2 * kPi, 0.0, rng);
    CHECK_THROWS_AS((void)fit_fss(good, opt), std::invalid_argument);
}

TEST_CASE("spectra measured across plate angles reproduce the splitting") {
    // full pipeline: synthesize a moving line, fit each spectrum's center,
    // assemble the rotation series, and fit the waveplate model to it
    const QwpModelParams truth{17.7, 0.35, 1.1, 0.0, -0.4};
    SpectralLine line;
    line.center_uev = 0.0;
    line.intensity = 2000.0;
    line.fwhm_uev = 1.0;
    line.splitting = truth;

    QwpSeries series;
    const int n = 16;
    for (int k = 0; k < n; ++k) {
        const double chi = 2 * kPi * k / (n - 1);
        const Spectrum sp = synth_spectrum({line}, chi, 2.0, {-15.0, 15.0, 0.25});
        const LineCenterFit lf = fit_line_center(sp, -15.0, 15.0);
        series.points.push_back({chi, lf.center_uev, std::max(lf.sigma_uev, 1e-4)});
    }
    const FssFit fit = fit_fss(series);
    REQUIRE(fit.resolved);
    CHECK(fit.params.s_uev == doctest::Approx(17.7).epsilon(1e-3));
    CHECK(fit.params.theta_rad == doctest::Approx(0.35).epsilon(1e-2));
    CHECK(fit.params.epsilon_uev == doctest::Approx(-0.4).epsilon(1e-2));
}
