#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qled/rng.hpp"

namespace qled {

// Waveplate-rotation model of the measured line splitting: s is the energy
// splitting, theta/phi describe the polarization rotation and phase shift the
// setup adds, p the residual state polarization, epsilon a constant offset of
// the recorded energies from the true mean.
struct QwpModelParams {
    double s_uev = 0.0;
    double theta_rad = 0.0;
    double phi_rad = 0.0;
    double p = 0.0;  // |p| <= 1
    double epsilon_uev = 0.0;
};

// Energy deviation of the detected line component from the mean energy at
// plate angle chi. Does not include epsilon. Throws AnalysisError when the
// model denominator vanishes (possible only for |p| near 1).
double qwp_energy_shift(double chi_rad, const QwpModelParams& params);

// Maps params onto the canonical representative of their symmetry class:
// s >= 0, theta in [0, pi), phi in [0, 2*pi). Valid at p = 0, where
// (s, theta, phi) ~ (-s, theta+pi, phi) ~ (s, -theta, phi+pi).
QwpModelParams canonical_qwp_params(QwpModelParams params);

// A spectral line; lines with splitting move with the plate angle, lines
// without are polarization-independent.
struct SpectralLine {
    double center_uev = 0.0;
    double intensity = 1.0;
    double fwhm_uev = 1.0;
    std::optional<QwpModelParams> splitting;
};

struct SpectrumGrid {
    double min_uev = 0.0;
    double max_uev = 0.0;
    double step_uev = 1.0;
};

struct Spectrum {
    std::vector<double> energy_uev;
    std::vector<double> counts;
};

// Sum of Gaussian lines sampled on the grid; line width is convolved with the
// instrument resolution. Pass shot_noise to draw Poisson counts per sample.
Spectrum synth_spectrum(const std::vector<SpectralLine>& lines, double chi_rad,
                        double resolution_uev, const SpectrumGrid& grid,
                        Rng* shot_noise = nullptr);

struct LineCenterFit {
    double center_uev = 0.0;
    double sigma_uev = 0.0;  // from the fit covariance
    double amplitude = 0.0;
    double fwhm_uev = 0.0;
    double background = 0.0;
    double chi2 = 0.0;
    int dof = 0;
};

// Weighted Gaussian least-squares fit of the single dominant line inside the
// energy window. Throws AnalysisError when the window is empty, holds several
// comparable peaks, or the fit does not converge.
LineCenterFit fit_line_center(const Spectrum& spectrum, double window_lo_uev,
                              double window_hi_uev);

struct QwpSeriesPoint {
    double chi_rad = 0.0;
    double delta_e_uev = 0.0;
    double sigma_uev = 0.0;
};

// Measured energy deviation versus plate angle. Fitting requires at least 8
// points spanning at least pi of rotation, each with positive sigma.
struct QwpSeries {
    std::vector<QwpSeriesPoint> points;
};

// Evaluates the model (with epsilon) on n_points angles evenly covering
// [0, chi_span_rad] and adds Gaussian noise of width noise_uev. Stored sigma
// is noise_uev, or 1 when synthesizing noiseless data.
QwpSeries synth_series(const QwpModelParams& params, int n_points, double chi_span_rad,
                       double noise_uev, Rng& rng);

struct FssFitOptions {
    double p = 0.0;   // held fixed unless fit_p
    bool fit_p = false;
};

struct FssFit {
    QwpModelParams params;      // canonical representative
    Eigen::MatrixXd covariance; // parameter order: s, theta, phi, epsilon [, p]
    double sigma_s_uev = 0.0;
    double sigma_theta_rad = 0.0;
    double sigma_phi_rad = 0.0;
    double sigma_epsilon_uev = 0.0;
    double chi2 = 0.0;
    int dof = 0;
    bool resolved = false;       // splitting significantly different from zero
    double upper_bound_uev = 0.0;  // 3-sigma bound on |s| when unresolved
    std::string message;
};

// Weighted nonlinear least squares over (s, theta, phi, epsilon), multi-start
// on a theta/phi grid because the model is strongly multimodal in the phase
// parameters. A series whose variation is consistent with zero splitting
// comes back unresolved with an upper bound instead of a parameter estimate.
FssFit fit_fss(const QwpSeries& series, const FssFitOptions& options = {});

}  // namespace qled
