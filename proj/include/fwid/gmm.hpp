#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "fwid/moments.hpp"
#include "fwid/optimizer.hpp"

namespace fwid {

// Parameter box for theta. A product space between the pi block and the
// beta block: null-imposed estimators need interior nuisance parameters,
// so the defaults keep the pi bounds loose and bound beta to [0.01, 10].
struct ParamSpace {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    // Optional penalty on implied error variances below the floor. Off by
    // default: null-imposed estimators need the unconstrained product
    // space, and points with implied phi_j < 0 are legitimate there.
    double feasibility_weight = 0.0;
    double variance_floor = 0.0;

    double beta_min() const { return lower[lower.size() - 1]; }
    double beta_max() const { return upper[upper.size() - 1]; }

    static ParamSpace defaults(Model model, int p, double beta_min = 0.01,
                               double beta_max = 10.0, double pi_bound = 50.0);
};

struct FitResult {
    Eigen::VectorXd theta;  // full model coordinates
    Eigen::VectorXd nu;     // free coordinates of the minimized problem
    double qmin = 0.0;
    bool converged = false;
    int starts_used = 0;
    int iters = 0;
    double grad_norm = 0.0;
};

struct FitOptions {
    int starts = 10;
    std::uint64_t seed = 20240501;
    LmOptions lm;
};

// GMM objective Q_n(theta) = n gbar' Vhat^{-1} gbar, via the cached
// Cholesky factor of Vhat.
double q_n(Model model, const Eigen::VectorXd& theta, const MomentSystem& ms);

// A smooth change of coordinates nu -> theta with box constraints on nu.
// minimize_full and the null-imposed fits are all instances.
struct ThetaMap {
    int theta_dim = 0;
    Eigen::VectorXd lb, ub;  // nu box; lb[i] == ub[i] pins a coordinate
    std::function<bool(const Eigen::VectorXd& nu, Eigen::VectorXd& theta)> to_theta;
    std::function<bool(const Eigen::VectorXd& nu, Eigen::MatrixXd& J)> dtheta_dnu;
    // Projection used to seed starts from a full-theta initial point.
    std::function<Eigen::VectorXd(const Eigen::VectorXd& theta)> nu_of_theta;
    // Copied from the ParamSpace when a structural-feasibility penalty is
    // requested; 0 keeps the plain GMM objective.
    double feasibility_weight = 0.0;
    double variance_floor = 0.0;

    int nu_dim() const { return static_cast<int>(lb.size()); }
    static ThetaMap identity(const ParamSpace& space);
};

// Moment-matching initial point (strong-identification closed forms where
// available), clamped into the box.
Eigen::VectorXd informed_theta(Model model, const MomentSystem& ms, const ParamSpace& space);

FitResult minimize_mapped(Model model, const MomentSystem& ms, const ThetaMap& map,
                          const Eigen::VectorXd& informed_start, const FitOptions& opts);

FitResult minimize_full(Model model, const MomentSystem& ms, const ParamSpace& space,
                        const FitOptions& opts = {});

// Null-imposed fit with one theta coordinate pinned to r0 (the FV-style
// restriction; general restrictions live in hypotheses.hpp and reduce to
// minimize_mapped). Throws InfeasibleNullError when r0 violates the box.
FitResult minimize_pinned(Model model, const MomentSystem& ms, const ParamSpace& space,
                          int coord, double r0, const FitOptions& opts = {});

}  // namespace fwid
