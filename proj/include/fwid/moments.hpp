#pragma once

#include <Eigen/Dense>

#include "fwid/model.hpp"
#include "fwid/vech.hpp"

namespace fwid {

// Sample moments of a dataset: the mean and covariance of the n vectors
// vech(W_i W_i'). Both depend only on the data (the moment function is
// additively separable in theta), so they are computed once and shared.
struct MomentSystem {
    int n = 0;
    int p = 0;
    Eigen::VectorXd gbar_base;             // k-vector, mean of vech(W_i W_i')
    Eigen::MatrixXd Vhat;                  // k x k, covariance of those vectors
    Eigen::LLT<Eigen::MatrixXd> Vhat_llt;  // cached Cholesky of Vhat

    int k() const { return static_cast<int>(gbar_base.size()); }
    VechIndex vech_index() const { return VechIndex(p); }

    // L^{-1} x for the Cholesky factor L of Vhat (whitening transform).
    Eigen::VectorXd whiten(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd whiten(const Eigen::MatrixXd& x) const;
};

// Build a MomentSystem from an n x p data matrix. With demean=true each
// column is centered and rescaled by sqrt(n/(n-1)) so the second-moment
// vector is the unbiased covariance estimate. Throws SingularWeightError
// when Vhat is numerically rank deficient (condition number > 1e12).
MomentSystem make_moment_system(const Eigen::MatrixXd& data, bool demean = true);

// Synthetic system with gbar_base given directly and Vhat = I (tests).
MomentSystem exact_moment_system(int p, const Eigen::VectorXd& gbar_base, int n = 1);

// tau_jk(pi, beta) for the two-factor model, 3 <= j < k <= p, k >= 5.
// Throws SingularMomentError when a denominator vanishes.
double tau_2f(const TwoFactorTheta& theta, int j, int k);

// vech(Omega(theta)) assembled from the reparameterized coordinates.
Eigen::VectorXd theta_moments(Model model, int p, const Eigen::VectorXd& theta);
// Non-throwing variant for optimizer inner loops; returns false on a
// singular or non-finite evaluation.
bool theta_moments_safe(Model model, int p, const Eigen::VectorXd& theta,
                        Eigen::VectorXd& out) noexcept;

// gbar(theta) = gbar_base - vech(Omega(theta)).
Eigen::VectorXd gbar(Model model, const Eigen::VectorXd& theta, const MomentSystem& ms);

// Analytic Jacobian D = d gbar / d theta' = -d vech(Omega(theta)) / d theta'.
struct ThetaJacobian {
    Eigen::MatrixXd D;  // k x q
    int q() const { return static_cast<int>(D.cols()); }
};

ThetaJacobian jacobian_theta(Model model, int p, const Eigen::VectorXd& theta);
bool jacobian_theta_safe(Model model, int p, const Eigen::VectorXd& theta,
                         Eigen::MatrixXd& D) noexcept;

}  // namespace fwid
