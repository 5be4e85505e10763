#include "fwid/model.hpp"

#include <cmath>
#include <limits>

#include "fwid/errors.hpp"

namespace fwid {

int theta_dim(Model model, int p) {
    return model == Model::OneFactor ? 2 * p : 3 * p - 1;
}

int moment_dim(int p) { return p * (p + 1) / 2; }

int min_p(Model model) { return model == Model::OneFactor ? 3 : 5; }

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void OneFactorParams::validate() const {
    const int np = p();
    if (np < 3) throw InvalidParameterError("OneFactorParams: p >= 3 required");
    if (phi.size() != np)
        throw InvalidParameterError("OneFactorParams: lambda and phi dimensions differ");
    if (lambda[0] != 1.0)
        throw InvalidParameterError("OneFactorParams: lambda_1 must equal 1 (IC1)");
    if (!(sigma2 > 0.0)) throw InvalidParameterError("OneFactorParams: sigma2 must be > 0");
    for (int j = 0; j < np; ++j)
        if (phi[j] < 0.0) throw InvalidParameterError("OneFactorParams: phi_j must be >= 0");
}

void TwoFactorParams::validate() const {
    const int np = p();
    if (np < 5) throw InvalidParameterError("TwoFactorParams: p >= 5 required");
    if (Lambda.cols() != 2)
        throw InvalidParameterError("TwoFactorParams: Lambda must have 2 columns");
    if (phi.size() != np)
        throw InvalidParameterError("TwoFactorParams: Lambda and phi dimensions differ");
    if (Lambda(0, 0) != 1.0 || Lambda(0, 1) != 0.0 || Lambda(1, 0) != 0.0 || Lambda(1, 1) != 1.0)
        throw InvalidParameterError("TwoFactorParams: top 2x2 block of Lambda must be I (IC1)");
    if (Sigma(0, 1) != Sigma(1, 0))
        throw InvalidParameterError("TwoFactorParams: Sigma must be symmetric");
    if (!(Sigma(0, 0) > 0.0) || !(Sigma(1, 1) > 0.0) ||
        !(Sigma(0, 0) * Sigma(1, 1) - Sigma(0, 1) * Sigma(0, 1) > 0.0))
        throw InvalidParameterError("TwoFactorParams: Sigma must be positive definite");
    if (Lambda(2, 0) == 0.0 || Lambda(3, 0) == 0.0)
        throw InvalidParameterError("TwoFactorParams: lambda_31 and lambda_41 must be nonzero");
    for (int j = 0; j < np; ++j)
        if (phi[j] < 0.0) throw InvalidParameterError("TwoFactorParams: phi_j must be >= 0");
}

// ---------------------------------------------------------------------------
// Flat conversions
// ---------------------------------------------------------------------------

Eigen::VectorXd OneFactorTheta::to_vector() const {
    const int np = p();
    Eigen::VectorXd v(2 * np);
    v.head(np - 1) = rho;
    v.segment(np - 1, np) = omega;
    v[2 * np - 1] = beta;
    return v;
}

OneFactorTheta OneFactorTheta::from_vector(const Eigen::VectorXd& v) {
    const int np = static_cast<int>((v.size()) / 2);
    if (v.size() != 2 * np || np < 3)
        throw InvalidParameterError("OneFactorTheta::from_vector: bad length");
    OneFactorTheta t;
    t.rho = v.head(np - 1);
    t.omega = v.segment(np - 1, np);
    t.beta = v[2 * np - 1];
    return t;
}

Eigen::VectorXd TwoFactorTheta::to_vector() const {
    const int np = p();
    Eigen::VectorXd v(3 * np - 1);
    v.head(np - 2) = rho1;
    v.segment(np - 2, np - 2) = rho2;
    v.segment(2 * (np - 2), np) = omega;
    v[3 * np - 4] = chi;
    v[3 * np - 3] = sigma12;
    v[3 * np - 2] = beta;
    return v;
}

TwoFactorTheta TwoFactorTheta::from_vector(const Eigen::VectorXd& v) {
    const int np = static_cast<int>((v.size() + 1) / 3);
    if (v.size() != 3 * np - 1 || np < 5)
        throw InvalidParameterError("TwoFactorTheta::from_vector: bad length");
    TwoFactorTheta t;
    t.rho1 = v.head(np - 2);
    t.rho2 = v.segment(np - 2, np - 2);
    t.omega = v.segment(2 * (np - 2), np);
    t.chi = v[3 * np - 4];
    t.sigma12 = v[3 * np - 3];
    t.beta = v[3 * np - 2];
    return t;
}

// ---------------------------------------------------------------------------
// Covariance map
// ---------------------------------------------------------------------------

Eigen::MatrixXd omega_of_gamma(const OneFactorParams& gamma) {
    gamma.validate();
    Eigen::MatrixXd om = gamma.sigma2 * gamma.lambda * gamma.lambda.transpose();
    om.diagonal() += gamma.phi;
    return om;
}

Eigen::MatrixXd omega_of_gamma(const TwoFactorParams& gamma) {
    gamma.validate();
    Eigen::MatrixXd om = gamma.Lambda * gamma.Sigma * gamma.Lambda.transpose();
    om.diagonal() += gamma.phi;
    return om;
}

// ---------------------------------------------------------------------------
// Reparameterization 1: rho_j = lambda_j sigma^2, omega_j = lambda_j^2
// sigma^2 + phi_j, beta = sigma^2.
// ---------------------------------------------------------------------------

OneFactorTheta reparam_1f(const OneFactorParams& gamma) {
    gamma.validate();
    const int p = gamma.p();
    OneFactorTheta t;
    t.rho = gamma.sigma2 * gamma.lambda.tail(p - 1);
    t.omega = gamma.sigma2 * gamma.lambda.cwiseProduct(gamma.lambda) + gamma.phi;
    t.beta = gamma.sigma2;
    return t;
}

OneFactorInverse invert_1f(const OneFactorTheta& theta) {
    if (!(theta.beta > 0.0)) throw DomainError("invert_1f: beta must be > 0");
    const int p = theta.p();
    OneFactorInverse out;
    out.gamma.lambda.resize(p);
    out.gamma.phi.resize(p);
    out.gamma.lambda[0] = 1.0;
    out.gamma.lambda.tail(p - 1) = theta.rho / theta.beta;
    out.gamma.sigma2 = theta.beta;
    out.gamma.phi[0] = theta.omega[0] - theta.beta;
    for (int j = 1; j < p; ++j)
        out.gamma.phi[j] = theta.omega[j] - theta.rho[j - 1] * theta.rho[j - 1] / theta.beta;
    out.valid = (out.gamma.phi.array() >= 0.0).all();
    return out;
}

// ---------------------------------------------------------------------------
// Reparameterization 2: covariance-level coordinates with beta = sigma_2^2.
// ---------------------------------------------------------------------------

TwoFactorTheta reparam_2f(const TwoFactorParams& gamma) {
    gamma.validate();
    const int p = gamma.p();
    TwoFactorTheta t;
    t.rho1.resize(p - 2);
    t.rho2.resize(p - 2);
    t.omega.resize(p);
    // Sigma * lambda_j gives (Cov(W_j, W_1), Cov(W_j, W_2)) under IC1.
    for (int j = 3; j <= p; ++j) {
        Eigen::Vector2d sl = gamma.Sigma * gamma.Lambda.row(j - 1).transpose();
        t.rho1[j - 3] = sl[0];
        t.rho2[j - 3] = sl[1];
    }
    for (int j = 1; j <= p; ++j) {
        Eigen::Vector2d lj = gamma.Lambda.row(j - 1).transpose();
        t.omega[j - 1] = lj.dot(gamma.Sigma * lj) + gamma.phi[j - 1];
    }
    t.chi = gamma.Lambda.row(2) * gamma.Sigma * gamma.Lambda.row(3).transpose();
    t.sigma12 = gamma.Sigma(0, 1);
    t.beta = gamma.Sigma(1, 1);
    return t;
}

double denom_d4(const TwoFactorTheta& t) {
    return t.beta * t.rho1[1] - t.sigma12 * t.rho2[1];
}

double denom_d3(const TwoFactorTheta& t) {
    return t.beta * t.rho1[0] - t.sigma12 * t.rho2[0];
}

TwoFactorInverse invert_2f(const TwoFactorTheta& theta) {
    const int p = theta.p();
    const double beta = theta.beta;
    const double s12 = theta.sigma12;
    const double r31 = theta.rho1[0];
    const double r32 = theta.rho2[0], r42 = theta.rho2[1];

    const double d4 = denom_d4(theta);
    const double d3 = denom_d3(theta);
    const double num = theta.chi * beta - r32 * r42;
    // Scale-aware singularity guard near the identification boundary.
    if (std::fabs(d4) < 1e-12 * std::max(1.0, std::fabs(num)) ||
        std::fabs(d3) < 1e-12 * std::max(1.0, std::fabs(num)))
        throw SingularInversionError("invert_2f: beta*rho_j1 - sigma12*rho_j2 vanishes");

    TwoFactorInverse out;
    out.gamma.Lambda.resize(p, 2);
    out.gamma.phi.resize(p);
    out.gamma.Lambda.row(0) << 1.0, 0.0;
    out.gamma.Lambda.row(1) << 0.0, 1.0;

    const double l31 = num / d4;
    const double l41 = num / d3;
    const double l32 = (r32 - s12 * l31) / beta;
    const double l42 = (r42 - s12 * l41) / beta;
    const double sigma1sq = (l31 != 0.0) ? (r31 - s12 * l32) / l31
                                         : std::numeric_limits<double>::quiet_NaN();
    out.gamma.Lambda.row(2) << l31, l32;
    out.gamma.Lambda.row(3) << l41, l42;
    out.gamma.Sigma << sigma1sq, s12, s12, beta;

    bool valid = std::isfinite(sigma1sq) && l31 != 0.0 && l41 != 0.0 &&
                 sigma1sq * beta - s12 * s12 > 0.0 && beta > 0.0;
    if (valid) {
        Eigen::Matrix2d SigInv = out.gamma.Sigma.inverse();
        for (int j = 5; j <= p; ++j) {
            Eigen::Vector2d rj(theta.rho1[j - 3], theta.rho2[j - 3]);
            out.gamma.Lambda.row(j - 1) = (SigInv * rj).transpose();
        }
    } else {
        for (int j = 5; j <= p; ++j) out.gamma.Lambda.row(j - 1).setZero();
    }
    for (int j = 1; j <= p; ++j) {
        Eigen::Vector2d lj = out.gamma.Lambda.row(j - 1).transpose();
        out.gamma.phi[j - 1] = theta.omega[j - 1] - lj.dot(out.gamma.Sigma * lj);
        if (out.gamma.phi[j - 1] < 0.0) valid = false;
    }
    out.valid = valid;
    return out;
}

// ---------------------------------------------------------------------------
// Identification strength
// ---------------------------------------------------------------------------

bool implied_phi(Model model, int p, const Eigen::VectorXd& theta,
                 Eigen::VectorXd& phi) noexcept {
    if (theta.size() != theta_dim(model, p)) return false;
    ThetaLayout L{model, p};
    phi.resize(p);
    if (model == Model::OneFactor) {
        const double beta = theta[L.beta()];
        if (!(std::fabs(beta) > 1e-100)) return false;
        phi[0] = theta[L.omega(1)] - beta;
        for (int j = 2; j <= p; ++j) {
            const double r = theta[L.rho(j)];
            phi[j - 1] = theta[L.omega(j)] - r * r / beta;
        }
        return phi.allFinite();
    }
    const double beta = theta[L.beta()];
    const double s12 = theta[L.sigma12()];
    const double chi = theta[L.chi()];
    const double r31 = theta[L.rho(3, 1)], r32 = theta[L.rho(3, 2)];
    const double r41 = theta[L.rho(4, 1)], r42 = theta[L.rho(4, 2)];
    const double d4 = beta * r41 - s12 * r42;
    const double d3 = beta * r31 - s12 * r32;
    const double num = chi * beta - r32 * r42;
    if (std::fabs(d4) < 1e-12 * std::max(1.0, std::fabs(num)) ||
        std::fabs(d3) < 1e-12 * std::max(1.0, std::fabs(num)))
        return false;
    const double l31 = num / d4, l41 = num / d3;
    const double l32 = (r32 - s12 * l31) / beta;
    const double l42 = (r42 - s12 * l41) / beta;
    if (std::fabs(l31) < 1e-12) return false;
    const double sigma1sq = (r31 - s12 * l32) / l31;
    Eigen::Matrix2d Sig;
    Sig << sigma1sq, s12, s12, beta;
    const double det = sigma1sq * beta - s12 * s12;
    if (std::fabs(det) < 1e-12) return false;
    Eigen::Matrix2d SigInv;
    SigInv << beta, -s12, -s12, sigma1sq;
    SigInv /= det;
    auto quad = [&](const Eigen::Vector2d& l) { return l.dot(Sig * l); };
    phi[0] = theta[L.omega(1)] - sigma1sq;
    phi[1] = theta[L.omega(2)] - beta;
    phi[2] = theta[L.omega(3)] - quad({l31, l32});
    phi[3] = theta[L.omega(4)] - quad({l41, l42});
    for (int j = 5; j <= p; ++j) {
        Eigen::Vector2d rj(theta[L.rho(j, 1)], theta[L.rho(j, 2)]);
        phi[j - 1] = theta[L.omega(j)] - quad(SigInv * rj);
    }
    return phi.allFinite();
}

IdStrength id_strength_1f(const OneFactorTheta& theta, double n) {
    const int p = theta.p();
    IdStrength out;
    out.n = n;
    out.s.resize((p - 1) * (p - 2) / 2);
    int idx = 0;
    for (int j = 2; j < p; ++j)
        for (int k = j + 1; k <= p; ++k) out.s[idx++] = theta.rho[j - 2] * theta.rho[k - 2];
    out.scaled = std::sqrt(n) * out.s;
    return out;
}

IdStrength id_strength_2f(const TwoFactorTheta& theta, double n) {
    const int p = theta.p();
    const double r31 = theta.rho1[0], r41 = theta.rho1[1];
    const double r32 = theta.rho2[0], r42 = theta.rho2[1];
    const double a1 = r32 * r41 - theta.chi * theta.sigma12;
    const double a2 = r31 * r42 - theta.chi * theta.sigma12;

    IdStrength out;
    out.n = n;
    out.s.resize(2 * (p - 4) + (p - 4) * (p - 5) / 2);
    int idx = 0;
    for (int k = 5; k <= p; ++k)
        out.s[idx++] = (theta.rho2[k - 3] * r41 - theta.rho1[k - 3] * r42) * a1;
    for (int k = 5; k <= p; ++k)
        out.s[idx++] = (theta.rho2[k - 3] * r31 - theta.rho1[k - 3] * r32) * a2;
    for (int j = 5; j < p; ++j)
        for (int k = j + 1; k <= p; ++k)
            out.s[idx++] = (theta.rho2[j - 3] * r41 - theta.rho1[j - 3] * r42) *
                           (theta.rho2[k - 3] * r31 - theta.rho1[k - 3] * r32);
    out.scaled = std::sqrt(n) * out.s;
    return out;
}

}  // namespace fwid
