#pragma once

#include <Eigen/Dense>
#include <functional>

namespace fwid {

// Box-projected Levenberg-Marquardt for nonlinear least squares
// f(x) = ||r(x)||^2. Callbacks return false when a point cannot be
// evaluated (singular denominators etc.); such trial steps are rejected.

struct LmOptions {
    int max_iter = 500;
    double grad_tol = 1e-8;    // projected-gradient sup-norm, relative to 1+f
    double stall_tol = 1e-12;  // relative objective decrease counted as a plateau
    double mu0 = 1e-3;
    double mu_max = 1e14;
};

struct LmResult {
    Eigen::VectorXd x;
    double fmin = 0.0;
    bool converged = false;
    bool valid = false;  // x evaluated successfully at least once
    int iters = 0;
    double grad_norm = 0.0;
};

using ResidualFn = std::function<bool(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using ResidualJacFn = std::function<bool(const Eigen::VectorXd&, Eigen::MatrixXd&)>;

LmResult lm_minimize_box(const ResidualFn& residual, const ResidualJacFn& jacobian,
                         const Eigen::VectorXd& x0, const Eigen::VectorXd& lb,
                         const Eigen::VectorXd& ub, const LmOptions& opts = {});

}  // namespace fwid
