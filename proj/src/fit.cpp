#include "qled/fit.hpp"

#include <cmath>
#include <sstream>

namespace qled {

namespace {

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Central differences; steps scale with the parameter magnitude.
bool jacobian(const ResidualFn& fn, const Eigen::VectorXd& p, int m, Eigen::MatrixXd& J) {
    const int n = static_cast<int>(p.size());
    Eigen::VectorXd rp(m), rm(m), q = p;
    for (int j = 0; j < n; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(p[j]));
        q[j] = p[j] + h;
        if (!fn(q, rp) || !finite(rp)) return false;
        q[j] = p[j] - h;
        if (!fn(q, rm) || !finite(rm)) return false;
        q[j] = p[j];
        J.col(j) = (rp - rm) / (2.0 * h);
    }
    return true;
}

}  // namespace

FitResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd p, int m, const FitOptions& opts) {
    const int n = static_cast<int>(p.size());
    FitResult out;
    out.params = p;
    out.dof = m - n;

    Eigen::VectorXd r(m);
    if (!fn(p, r) || !finite(r)) {
        out.message = "model undefined at the starting point";
        return out;
    }
    double chi2 = r.squaredNorm();
    double lambda = opts.lambda0;

    Eigen::MatrixXd J(m, n);
    Eigen::VectorXd r_try(m);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        if (!jacobian(fn, p, m, J)) {
            out.message = "model undefined while estimating the Jacobian";
            break;
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;

        bool stepped = false;
        while (lambda <= 1e12) {
            Eigen::MatrixXd A = JtJ;
            for (int d = 0; d < n; ++d) A(d, d) += lambda * std::max(JtJ(d, d), 1e-12);
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            if (!finite(delta)) {
                lambda *= 8.0;
                continue;
            }
            const Eigen::VectorXd p_try = p + delta;
            if (fn(p_try, r_try) && finite(r_try) && r_try.squaredNorm() < chi2) {
                const double chi2_new = r_try.squaredNorm();
                const double drop = chi2 - chi2_new;
                const double step = delta.norm();
                p = p_try;
                r = r_try;
                chi2 = chi2_new;
                lambda = std::max(lambda / 8.0, 1e-12);
                stepped = true;
                if (drop <= opts.ftol * std::max(chi2, 1e-300) || step <= opts.xtol * (p.norm() + opts.xtol)) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 8.0;
        }
        if (!stepped) {
            // No downhill step exists at any damping. Judge by the quadratic model:
            // if the Gauss-Newton prediction offers no real chi2 improvement the
            // point is a numerical optimum; a large prediction means the search
            // stalled (e.g. against a domain boundary) and must be reported.
            Eigen::MatrixXd A = JtJ;
            for (int d = 0; d < n; ++d) A(d, d) += 1e-10 * std::max(JtJ(d, d), 1e-12);
            const double predicted = g.dot(Eigen::VectorXd(A.ldlt().solve(g)));
            out.converged =
                (std::isfinite(predicted) && predicted <= std::max(1e-6, 1e-9 * chi2)) ||
                chi2 <= 1e-300 * m;
            if (!out.converged) {
                std::ostringstream ss;
                ss << "stalled; chi2=" << chi2 << " with predicted improvement " << predicted;
                out.message = ss.str();
            }
            break;
        }
        if (out.converged) break;
    }

    if (!out.converged && out.message.empty()) {
        std::ostringstream ss;
        ss << "not converged after " << it << " iterations; chi2=" << chi2;
        out.message = ss.str();
    }

    if (jacobian(fn, p, m, J)) {
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(JtJ);
        out.covariance = cod.pseudoInverse();
    } else {
        out.covariance = Eigen::MatrixXd::Zero(n, n);
    }
    out.params = p;
    out.chi2 = chi2;
    out.iterations = it;
    return out;
}

}  // namespace qled
