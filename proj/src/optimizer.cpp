#include "fwid/optimizer.hpp"

#include <cmath>
#include <limits>

#include "fwid/errors.hpp"

namespace fwid {

namespace {

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lb,
                      const Eigen::VectorXd& ub) {
    return x.cwiseMax(lb).cwiseMin(ub);
}

double projected_grad_norm(const Eigen::VectorXd& g, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) {
    double nrm = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        if (lb[i] == ub[i]) continue;  // pinned coordinate
        double gi = g[i];
        if (x[i] <= lb[i] && gi > 0.0) gi = 0.0;
        if (x[i] >= ub[i] && gi < 0.0) gi = 0.0;
        nrm = std::max(nrm, std::fabs(gi));
    }
    return nrm;
}

}  // namespace

LmResult lm_minimize_box(const ResidualFn& residual, const ResidualJacFn& jacobian,
                         const Eigen::VectorXd& x0, const Eigen::VectorXd& lb,
                         const Eigen::VectorXd& ub, const LmOptions& opts) {
    const int d = static_cast<int>(x0.size());
    if (lb.size() != d || ub.size() != d)
        throw InvalidParameterError("lm_minimize_box: bound dimensions differ from x0");

    LmResult res;
    res.x = clamp(x0, lb, ub);
    Eigen::VectorXd r;
    if (!residual(res.x, r) || !r.allFinite()) {
        res.fmin = std::numeric_limits<double>::infinity();
        return res;
    }
    res.valid = true;
    res.fmin = r.squaredNorm();

    double mu = opts.mu0;
    int stall_count = 0;
    Eigen::MatrixXd J;
    for (int it = 0; it < opts.max_iter; ++it) {
        res.iters = it + 1;
        if (!jacobian(res.x, J) || !J.allFinite()) break;

        Eigen::VectorXd g = 2.0 * J.transpose() * r;
        res.grad_norm = projected_grad_norm(g, res.x, lb, ub);
        if (res.grad_norm < opts.grad_tol * (1.0 + res.fmin)) {
            res.converged = true;
            break;
        }

        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd Jtr = J.transpose() * r;
        // Pinned coordinates never move.
        for (int i = 0; i < d; ++i)
            if (lb[i] == ub[i]) {
                JtJ.row(i).setZero();
                JtJ.col(i).setZero();
                JtJ(i, i) = 1.0;
                Jtr[i] = 0.0;
            }
        const double diag_scale = std::max(JtJ.diagonal().maxCoeff(), 1e-12);

        bool accepted = false;
        while (mu <= opts.mu_max) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal().array() += mu * diag_scale;
            Eigen::VectorXd step = A.ldlt().solve(-Jtr);
            Eigen::VectorXd xt = clamp(res.x + step, lb, ub);
            Eigen::VectorXd rt;
            if ((xt - res.x).cwiseAbs().maxCoeff() == 0.0) {
                mu *= 4.0;
                continue;
            }
            if (residual(xt, rt) && rt.allFinite()) {
                double ft = rt.squaredNorm();
                if (ft < res.fmin) {
                    double rel_drop = (res.fmin - ft) / (1.0 + ft);
                    res.x = xt;
                    r = rt;
                    res.fmin = ft;
                    mu = std::max(mu / 3.0, 1e-12);
                    accepted = true;
                    stall_count = (rel_drop < opts.stall_tol) ? stall_count + 1 : 0;
                    break;
                }
            }
            mu *= 4.0;
        }
        if (!accepted) {
            // No descent direction left at this damping range; flat or bound-
            // blocked. Report convergence only if the gradient test agrees
            // after the final evaluation.
            res.converged = res.grad_norm < std::sqrt(opts.grad_tol) * (1.0 + res.fmin);
            break;
        }
        if (stall_count >= 2) {  // plateau-tolerant stop
            res.converged = true;
            break;
        }
    }
    if (!res.converged && res.valid) {
        // Gradient may have met the tolerance on the final accepted step.
        if (jacobian(res.x, J) && J.allFinite()) {
            Eigen::VectorXd g = 2.0 * J.transpose() * r;
            res.grad_norm = projected_grad_norm(g, res.x, lb, ub);
            res.converged = res.grad_norm < opts.grad_tol * (1.0 + res.fmin);
        }
    }
    return res;
}

}  // namespace fwid
