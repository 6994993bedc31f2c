#include "qled/polarization.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <sstream>

#include "qled/errors.hpp"

namespace qled {

namespace {

using cd = std::complex<double>;

// Jones vector of the +1 eigenstate of s . (sigma_z, sigma_x, sigma_y) for a unit
// Stokes vector s: (cos(t/2), e^{i ph} sin(t/2)) with s = (cos t, sin t cos ph, sin t sin ph).
Eigen::Vector2cd jones_from_stokes(const Eigen::Vector3d& s) {
    const double t = std::acos(std::clamp(s[0], -1.0, 1.0));
    const double ph = std::atan2(s[2], s[1]);
    Eigen::Vector2cd j;
    j << cd(std::cos(t / 2.0), 0.0), std::polar(std::sin(t / 2.0), ph);
    return j;
}

AnalyzerSetting make_setting(Pol label, Eigen::Vector3d s) {
    s.normalize();
    return AnalyzerSetting{label, jones_from_stokes(s), s};
}

const std::array<AnalyzerSetting, 10>& settings_table() {
    static const std::array<AnalyzerSetting, 10> table = [] {
        const double r = 1.0 / std::numbers::sqrt2;
        return std::array<AnalyzerSetting, 10>{
            make_setting(Pol::H, {1, 0, 0}),
            make_setting(Pol::V, {-1, 0, 0}),
            make_setting(Pol::D, {0, 1, 0}),
            make_setting(Pol::A, {0, -1, 0}),
            make_setting(Pol::L, {0, 0, 1}),
            make_setting(Pol::R, {0, 0, -1}),
            make_setting(Pol::Eld, {0, r, r}),
            make_setting(Pol::Era, {0, -r, -r}),
            make_setting(Pol::Ela, {0, -r, r}),
            make_setting(Pol::Erd, {0, r, -r}),
        };
    }();
    return table;
}

}  // namespace

const AnalyzerSetting& analyzer(Pol p) { return settings_table()[static_cast<int>(p)]; }

const MeasurementBasis& measurement_basis(Basis b) {
    static const std::array<MeasurementBasis, kNumBases> table = {
        MeasurementBasis{Basis::HV, analyzer(Pol::H), analyzer(Pol::V)},
        MeasurementBasis{Basis::DA, analyzer(Pol::D), analyzer(Pol::A)},
        MeasurementBasis{Basis::LR, analyzer(Pol::L), analyzer(Pol::R)},
        MeasurementBasis{Basis::EldEra, analyzer(Pol::Eld), analyzer(Pol::Era)},
        MeasurementBasis{Basis::ElaErd, analyzer(Pol::Ela), analyzer(Pol::Erd)},
    };
    return table[static_cast<int>(b)];
}

const std::string& basis_name(Basis b) {
    static const std::array<std::string, kNumBases> names = {"hv", "da", "lr", "elderra", "elaerd"};
    return names[static_cast<int>(b)];
}

Basis basis_from_name(const std::string& name) {
    for (Basis b : kAllBases)
        if (basis_name(b) == name) return b;
    throw ConfigError("unknown basis name '" + name + "' (expected hv, da, lr, elderra or elaerd)");
}

TwoPhotonState bell_state(double chi) {
    TwoPhotonState s;
    const double r = 1.0 / std::numbers::sqrt2;
    s.amplitudes << cd(r, 0), cd(0, 0), cd(0, 0), std::polar(r, chi);
    s.phase_chi = chi;
    return s;
}

NoiseMode noise_mode_from_name(const std::string& name) {
    if (name == "white") return NoiseMode::white;
    if (name == "classical") return NoiseMode::classical;
    throw ConfigError("unknown noise mode '" + name + "' (expected white or classical)");
}

const std::string& noise_mode_name(NoiseMode m) {
    static const std::string names[2] = {"white", "classical"};
    return names[static_cast<int>(m)];
}

TwoPhotonDensityMatrix TwoPhotonDensityMatrix::from_matrix(const Eigen::Matrix4cd& m) {
    const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12) {
        std::ostringstream ss;
        ss << "density matrix not Hermitian (max |M - M^dag| = " << herm << ")";
        throw std::invalid_argument(ss.str());
    }
    const double tr = std::abs(m.trace() - cd(1.0, 0.0));
    if (tr > 1e-12) {
        std::ostringstream ss;
        ss << "density matrix trace differs from 1 by " << tr;
        throw std::invalid_argument(ss.str());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo < -1e-10) {
        std::ostringstream ss;
        ss << "density matrix not positive semidefinite (min eigenvalue " << lo << ")";
        throw std::invalid_argument(ss.str());
    }
    return TwoPhotonDensityMatrix(Trusted{}, m);
}

TwoPhotonDensityMatrix TwoPhotonDensityMatrix::pure(const TwoPhotonState& s) {
    return mix_noise(s, 1.0, NoiseMode::white);
}

TwoPhotonDensityMatrix mix_noise(const TwoPhotonState& s, double v, NoiseMode mode) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("mixing weight v must be in [0, 1]");
    const double norm = s.amplitudes.squaredNorm();
    if (std::abs(norm - 1.0) > 1e-9) throw std::invalid_argument("state amplitudes not normalized");
    Eigen::Matrix4cd noise = Eigen::Matrix4cd::Zero();
    if (mode == NoiseMode::white) {
        noise = Eigen::Matrix4cd::Identity() * 0.25;
    } else {
        noise(0, 0) = 0.5;
        noise(3, 3) = 0.5;
    }
    // Valid by construction: convex combination of a projector and a valid noise state.
    Eigen::Matrix4cd m = v * (s.amplitudes * s.amplitudes.adjoint()) + (1.0 - v) * noise;
    return TwoPhotonDensityMatrix(TwoPhotonDensityMatrix::Trusted{}, m);
}

TwoPhotonDensityMatrix mix_white_noise(const TwoPhotonState& s, double v) {
    return mix_noise(s, v, NoiseMode::white);
}

double coincidence_probability(const TwoPhotonDensityMatrix& rho, const AnalyzerSetting& first,
                               const AnalyzerSetting& second) {
    Eigen::Vector4cd v;
    v << first.jones[0] * second.jones[0], first.jones[0] * second.jones[1],
        first.jones[1] * second.jones[0], first.jones[1] * second.jones[1];
    const double p = std::real(v.dot(rho.matrix() * v));  // Eigen dot conjugates the left side
    return std::clamp(p, 0.0, 1.0);
}

double fidelity_to_state(const TwoPhotonDensityMatrix& rho, const TwoPhotonState& s) {
    return std::clamp(std::real(s.amplitudes.dot(rho.matrix() * s.amplitudes)), 0.0, 1.0);
}

double theoretical_correlation(const TwoPhotonDensityMatrix& rho, const MeasurementBasis& basis) {
    const double pp = coincidence_probability(rho, basis.plus, basis.plus);
    const double mm = coincidence_probability(rho, basis.minus, basis.minus);
    const double pm = coincidence_probability(rho, basis.plus, basis.minus);
    const double mp = coincidence_probability(rho, basis.minus, basis.plus);
    const double co = pp + mm, cross = pm + mp;
    if (co + cross < 1e-12)
        throw AnalysisError("outcome probabilities vanish in basis " + basis_name(basis.id) +
                            "; state is unphysical");
    return (co - cross) / (co + cross);
}

double fidelity_from_correlations(double c_hv, double c_da, double c_lr, double c_eldera,
                                  double c_elaerd, double chi) {
    return 0.25 * (1.0 + c_hv + (c_da - c_lr) * std::cos(chi) + (c_eldera - c_elaerd) * std::sin(chi));
}

}  // namespace qled
