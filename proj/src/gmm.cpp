#include "fwid/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fwid/errors.hpp"
#include "fwid/rng.hpp"

namespace fwid {

ParamSpace ParamSpace::defaults(Model model, int p, double beta_min, double beta_max,
                                double pi_bound) {
    const int q = theta_dim(model, p);
    ThetaLayout L{model, p};
    ParamSpace s;
    s.lower = Eigen::VectorXd::Constant(q, -pi_bound);
    s.upper = Eigen::VectorXd::Constant(q, pi_bound);
    for (int j = 1; j <= p; ++j) s.lower[L.omega(j)] = 1e-6;  // variances stay positive
    s.lower[q - 1] = beta_min;
    s.upper[q - 1] = beta_max;
    return s;
}

double q_n(Model model, const Eigen::VectorXd& theta, const MomentSystem& ms) {
    Eigen::VectorXd g = gbar(model, theta, ms);
    return ms.n * ms.whiten(g).squaredNorm();
}

ThetaMap ThetaMap::identity(const ParamSpace& space) {
    ThetaMap m;
    m.theta_dim = static_cast<int>(space.lower.size());
    m.lb = space.lower;
    m.ub = space.upper;
    m.feasibility_weight = space.feasibility_weight;
    m.variance_floor = space.variance_floor;
    m.to_theta = [](const Eigen::VectorXd& nu, Eigen::VectorXd& theta) {
        theta = nu;
        return true;
    };
    const int d = m.theta_dim;
    m.dtheta_dnu = [d](const Eigen::VectorXd&, Eigen::MatrixXd& J) {
        J = Eigen::MatrixXd::Identity(d, d);
        return true;
    };
    m.nu_of_theta = [](const Eigen::VectorXd& theta) { return theta; };
    return m;
}

Eigen::VectorXd informed_theta(Model model, const MomentSystem& ms, const ParamSpace& space) {
    const int p = ms.p;
    VechIndex vi(p);
    ThetaLayout L{model, p};
    Eigen::VectorXd theta(L.dim());
    const Eigen::VectorXd& g0 = ms.gbar_base;

    std::vector<double> beta_cands;
    if (model == Model::OneFactor) {
        for (int j = 2; j <= p; ++j) theta[L.rho(j)] = g0[vi.index(j, 1)];
        for (int j = 1; j <= p; ++j) theta[L.omega(j)] = g0[vi.index(j, j)];
        // sigma^2 = rho_j rho_k / tau_jk when the product moment is away
        // from zero.
        for (int j = 2; j < p; ++j)
            for (int k = j + 1; k <= p; ++k) {
                double tau = g0[vi.index(j, k)];
                if (std::fabs(tau) > 1e-3)
                    beta_cands.push_back(theta[L.rho(j)] * theta[L.rho(k)] / tau);
            }
    } else {
        for (int j = 3; j <= p; ++j) {
            theta[L.rho(j, 1)] = g0[vi.index(j, 1)];
            theta[L.rho(j, 2)] = g0[vi.index(j, 2)];
        }
        for (int j = 1; j <= p; ++j) theta[L.omega(j)] = g0[vi.index(j, j)];
        theta[L.chi()] = g0[vi.index(4, 3)];
        theta[L.sigma12()] = g0[vi.index(2, 1)];
        // Solve the tau_3k / tau_4k equations (linear in beta) at the
        // sample moments.
        const double chi = theta[L.chi()], s12 = theta[L.sigma12()];
        auto solve_anchor = [&](int a, int o, int k) {
            double r2a = theta[L.rho(a, 2)];
            double r1o = theta[L.rho(o, 1)], r2o = theta[L.rho(o, 2)];
            double r1k = theta[L.rho(k, 1)], r2k = theta[L.rho(k, 2)];
            double tau = g0[vi.index(a, k)];
            double den = tau * r1o - chi * r1k;
            if (std::fabs(den) > 1e-6) {
                double num = r2a * (r2k * r1o - r1k * r2o) - chi * s12 * r2k + tau * s12 * r2o;
                beta_cands.push_back(num / den);
            }
        };
        for (int k = 5; k <= p; ++k) {
            solve_anchor(3, 4, k);
            solve_anchor(4, 3, k);
        }
    }
    double beta = 1.0;
    if (!beta_cands.empty()) {
        std::sort(beta_cands.begin(), beta_cands.end());
        beta = beta_cands[beta_cands.size() / 2];
    }
    theta[L.beta()] = beta;
    return theta.cwiseMax(space.lower).cwiseMin(space.upper);
}

FitResult minimize_mapped(Model model, const MomentSystem& ms, const ThetaMap& map,
                          const Eigen::VectorXd& informed_start, const FitOptions& opts) {
    const double sqrt_n = std::sqrt(static_cast<double>(ms.n));
    const int p = ms.p;
    const bool penalized = map.feasibility_weight > 0.0;
    const double pen_scale = penalized ? std::sqrt(map.feasibility_weight) : 0.0;

    auto penalty_block = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& rp) {
        Eigen::VectorXd phi;
        if (!implied_phi(model, p, theta, phi)) return false;
        rp = pen_scale * (map.variance_floor - phi.array()).max(0.0).matrix();
        return true;
    };
    auto residual = [&](const Eigen::VectorXd& nu, Eigen::VectorXd& r) {
        Eigen::VectorXd theta, m;
        if (!map.to_theta(nu, theta)) return false;
        if (!theta_moments_safe(model, p, theta, m)) return false;
        Eigen::VectorXd rm = sqrt_n * ms.whiten(Eigen::VectorXd(ms.gbar_base - m));
        if (!penalized) {
            r = std::move(rm);
        } else {
            Eigen::VectorXd rp;
            if (!penalty_block(theta, rp)) return false;
            r.resize(rm.size() + rp.size());
            r << rm, rp;
        }
        return r.allFinite();
    };
    auto jacobian = [&](const Eigen::VectorXd& nu, Eigen::MatrixXd& J) {
        Eigen::VectorXd theta;
        Eigen::MatrixXd D, Jmap;
        if (!map.to_theta(nu, theta)) return false;
        if (!jacobian_theta_safe(model, p, theta, D)) return false;
        if (!map.dtheta_dnu(nu, Jmap)) return false;
        Eigen::MatrixXd Jm = sqrt_n * ms.whiten(Eigen::MatrixXd(D * Jmap));
        if (!penalized) {
            J = std::move(Jm);
            return J.allFinite();
        }
        // Central differences for the penalty rows (the block is kinked at
        // the floor; the subgradient is good enough for a descent step).
        Eigen::MatrixXd Jp(p, nu.size());
        Eigen::VectorXd up, dn, t;
        for (int i = 0; i < nu.size(); ++i) {
            Eigen::VectorXd x = nu;
            const double h = 1e-6 * (1.0 + std::fabs(nu[i]));
            x[i] = nu[i] + h;
            if (!map.to_theta(x, t) || !penalty_block(t, up)) return false;
            x[i] = nu[i] - h;
            if (!map.to_theta(x, t) || !penalty_block(t, dn)) return false;
            Jp.col(i) = (up - dn) / (2.0 * h);
        }
        J.resize(Jm.rows() + p, nu.size());
        J << Jm, Jp;
        return J.allFinite();
    };

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(map.nu_of_theta(informed_start).cwiseMax(map.lb).cwiseMin(map.ub));
    if (opts.starts > 1) {
        // Weak identification can degrade the moment-matched beta; a unit
        // beta with the same pi block is the natural second start.
        Eigen::VectorXd centered = informed_start;
        centered[centered.size() - 1] = 1.0;
        starts.push_back(map.nu_of_theta(centered).cwiseMax(map.lb).cwiseMin(map.ub));
    }
    Rng rng(splitmix64(opts.seed ^ 0x5ca1ab1eULL));
    for (int s = static_cast<int>(starts.size()); s < opts.starts; ++s) {
        Eigen::VectorXd x(map.nu_dim());
        for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(map.lb[i], map.ub[i]);
        starts.push_back(x);
    }

    FitResult best;
    best.qmin = std::numeric_limits<double>::infinity();
    for (const auto& x0 : starts) {
        LmResult lr = lm_minimize_box(residual, jacobian, x0, map.lb, map.ub, opts.lm);
        ++best.starts_used;
        if (lr.valid && lr.fmin < best.qmin) {
            best.qmin = lr.fmin;
            best.nu = lr.x;
            best.converged = lr.converged;
            best.grad_norm = lr.grad_norm;
            best.iters = lr.iters;
        }
    }
    if (!std::isfinite(best.qmin))
        throw SingularMomentError("minimize_mapped: no start produced an evaluable point");
    Eigen::VectorXd theta;
    map.to_theta(best.nu, theta);
    best.theta = theta;
    return best;
}

FitResult minimize_full(Model model, const MomentSystem& ms, const ParamSpace& space,
                        const FitOptions& opts) {
    ThetaMap map = ThetaMap::identity(space);
    return minimize_mapped(model, ms, map, informed_theta(model, ms, space), opts);
}

FitResult minimize_pinned(Model model, const MomentSystem& ms, const ParamSpace& space,
                          int coord, double r0, const FitOptions& opts) {
    if (r0 < space.lower[coord] || r0 > space.upper[coord])
        throw InfeasibleNullError("minimize_pinned: pinned value outside the parameter box");
    ThetaMap map = ThetaMap::identity(space);
    map.lb[coord] = r0;
    map.ub[coord] = r0;
    Eigen::VectorXd start = informed_theta(model, ms, space);
    start[coord] = r0;
    return minimize_mapped(model, ms, map, start, opts);
}

}  // namespace fwid
