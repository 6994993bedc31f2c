#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace qled {

struct FitOptions {
    int max_iterations = 200;
    double ftol = 1e-12;     // relative chi2 improvement treated as converged
    double xtol = 1e-12;     // relative step size treated as converged
    double lambda0 = 1e-3;   // initial damping
};

struct FitResult {
    Eigen::VectorXd params;
    // Pseudo-inverse of J^T J at the optimum. Residuals are expected already scaled
    // by 1/sigma, so this is the parameter covariance directly.
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
    bool converged = false;
    std::string message;

    double sigma(int i) const { return std::sqrt(std::max(0.0, covariance(i, i))); }
};

// Fills r with weighted residuals (model - data)/sigma at parameter vector p.
// Returning false marks p as outside the model domain (treated as an uphill step).
using ResidualFn = std::function<bool(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Damped least squares (Levenberg-Marquardt) with a central-difference Jacobian.
FitResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd p0, int n_residuals,
                              const FitOptions& opts = {});

}  // namespace qled
