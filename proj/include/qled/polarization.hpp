#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>

namespace qled {

// Analyzer settings on the Poincare sphere. Fixed conventions:
//   H = (+1,0,0), D = (0,+1,0), L = (0,0,+1), with L = (|H> + i|V>)/sqrt(2).
// The elliptical settings are great-circle midpoints between circular and diagonal:
//   Eld ~ L+D, Era = -Eld, Ela ~ L+A, Erd = -Ela (normalized Stokes sums).
enum class Pol { H, V, D, A, L, R, Eld, Era, Ela, Erd };

struct AnalyzerSetting {
    Pol label;
    Eigen::Vector2cd jones;   // unit norm, (H, V) components
    Eigen::Vector3d stokes;   // unit norm
};

const AnalyzerSetting& analyzer(Pol p);

enum class Basis { HV, DA, LR, EldEra, ElaErd };
inline constexpr int kNumBases = 5;
inline constexpr std::array<Basis, kNumBases> kAllBases{Basis::HV, Basis::DA, Basis::LR,
                                                        Basis::EldEra, Basis::ElaErd};

struct MeasurementBasis {
    Basis id;
    AnalyzerSetting plus, minus;  // orthogonal pair
};

const MeasurementBasis& measurement_basis(Basis b);
const std::string& basis_name(Basis b);            // "hv", "da", "lr", "elderra", "elaerd"
Basis basis_from_name(const std::string& name);    // throws ConfigError on unknown names

// Two-photon pure state over the product basis (HH, HV, VH, VV); the first slot is
// the first (earlier) photon of the pair.
struct TwoPhotonState {
    Eigen::Vector4cd amplitudes;  // unit norm
    double phase_chi = 0.0;       // relative HH/VV phase the state was built with
};

// (|HH> + e^{i chi} |VV>) / sqrt(2)
TwoPhotonState bell_state(double chi);

enum class NoiseMode { white, classical };
NoiseMode noise_mode_from_name(const std::string& name);  // "white" | "classical"
const std::string& noise_mode_name(NoiseMode m);

// 4x4 density matrix, valid by construction: Hermitian within 1e-12, unit trace
// within 1e-12, eigenvalues >= -1e-10. Default is the maximally mixed state.
class TwoPhotonDensityMatrix {
public:
    TwoPhotonDensityMatrix() : m_(Eigen::Matrix4cd::Identity() * 0.25) {}

    // Validates; throws std::invalid_argument naming the violated property.
    static TwoPhotonDensityMatrix from_matrix(const Eigen::Matrix4cd& m);
    static TwoPhotonDensityMatrix pure(const TwoPhotonState& s);

    const Eigen::Matrix4cd& matrix() const { return m_; }

private:
    struct Trusted {};
    TwoPhotonDensityMatrix(Trusted, const Eigen::Matrix4cd& m) : m_(m) {}
    Eigen::Matrix4cd m_;

    friend TwoPhotonDensityMatrix mix_noise(const TwoPhotonState&, double, NoiseMode);
};

// v |s><s| + (1 - v) * noise for v in [0,1]. White noise is I/4; classical noise
// keeps only co-polarized populations, diag(1/2, 0, 0, 1/2).
TwoPhotonDensityMatrix mix_noise(const TwoPhotonState& s, double v, NoiseMode mode);
TwoPhotonDensityMatrix mix_white_noise(const TwoPhotonState& s, double v);

// Born coincidence probability Tr(rho (P_first x P_second)) for independent
// analyzers on the two photons.
double coincidence_probability(const TwoPhotonDensityMatrix& rho, const AnalyzerSetting& first,
                               const AnalyzerSetting& second);

// <s| rho |s>
double fidelity_to_state(const TwoPhotonDensityMatrix& rho, const TwoPhotonState& s);

// Degree of correlation C = (co - cross)/(co + cross) with the same basis on both
// photons. Throws AnalysisError if the outcome probabilities vanish (unphysical rho).
double theoretical_correlation(const TwoPhotonDensityMatrix& rho, const MeasurementBasis& basis);

// Fidelity to (|HH> + e^{i chi}|VV>)/sqrt(2) reconstructed from the five measured
// correlation degrees:
//   F = (1 + C_hv + (C_da - C_lr) cos chi + (C_eldera - C_elaerd) sin chi) / 4
double fidelity_from_correlations(double c_hv, double c_da, double c_lr, double c_eldera,
                                  double c_elaerd, double chi);

}  // namespace qled
