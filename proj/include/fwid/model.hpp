#pragma once

#include <Eigen/Dense>
#include <vector>

namespace fwid {

enum class Model { OneFactor, TwoFactor };

// Number of model parameters: 2p (one factor) or 3p-1 (two factors).
int theta_dim(Model model, int p);
// Number of moments, p(p+1)/2.
int moment_dim(int p);
int min_p(Model model);

// ---------------------------------------------------------------------------
// Structural parameters gamma, normalization IC1 (leading loadings pinned to
// the identity). lambda/Lambda includes the normalized rows.
// ---------------------------------------------------------------------------

struct OneFactorParams {
    Eigen::VectorXd lambda;  // p-vector, lambda[0] == 1
    double sigma2 = 1.0;     // factor variance, > 0
    Eigen::VectorXd phi;     // p-vector of error variances, >= 0

    int p() const { return static_cast<int>(lambda.size()); }
    void validate() const;  // throws InvalidParameterError
};

struct TwoFactorParams {
    Eigen::MatrixXd Lambda;  // p x 2, top 2x2 block == I
    Eigen::Matrix2d Sigma;   // factor covariance, positive definite
    Eigen::VectorXd phi;     // p-vector, >= 0

    int p() const { return static_cast<int>(Lambda.rows()); }
    void validate() const;
};

// ---------------------------------------------------------------------------
// Reparameterized coordinates theta = (pi, beta). pi collects covariance-
// level parameters (strongly identified); beta is the factor variance that
// can be weakly identified.
//
// Flat layout, one factor : (rho_2..rho_p, omega_1..omega_p, beta)
// Flat layout, two factors: (rho_31..rho_p1, rho_32..rho_p2,
//                            omega_1..omega_p, chi, sigma12, beta)
// ---------------------------------------------------------------------------

struct OneFactorTheta {
    Eigen::VectorXd rho;    // (p-1)-vector: rho_2..rho_p
    Eigen::VectorXd omega;  // p-vector
    double beta = 1.0;

    int p() const { return static_cast<int>(omega.size()); }
    Eigen::VectorXd to_vector() const;
    static OneFactorTheta from_vector(const Eigen::VectorXd& v);
};

struct TwoFactorTheta {
    Eigen::VectorXd rho1;   // (p-2)-vector: rho_31..rho_p1
    Eigen::VectorXd rho2;   // (p-2)-vector: rho_32..rho_p2
    Eigen::VectorXd omega;  // p-vector
    double chi = 0.0;
    double sigma12 = 0.0;
    double beta = 1.0;

    int p() const { return static_cast<int>(omega.size()); }
    Eigen::VectorXd to_vector() const;
    static TwoFactorTheta from_vector(const Eigen::VectorXd& v);
};

// Coordinate offsets into the flat theta vector.
struct ThetaLayout {
    Model model;
    int p;

    int dim() const { return theta_dim(model, p); }
    int beta() const { return dim() - 1; }

    // One factor: rho_j for j in 2..p.
    int rho(int j) const { return j - 2; }
    // Two factors: rho_{j,f} for j in 3..p, f in {1,2}.
    int rho(int j, int f) const { return (f - 1) * (p - 2) + (j - 3); }
    int omega(int j) const {
        return (model == Model::OneFactor ? p - 1 : 2 * (p - 2)) + (j - 1);
    }
    int chi() const { return 2 * (p - 2) + p; }
    int sigma12() const { return chi() + 1; }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Eigen::MatrixXd omega_of_gamma(const OneFactorParams& gamma);
Eigen::MatrixXd omega_of_gamma(const TwoFactorParams& gamma);

OneFactorTheta reparam_1f(const OneFactorParams& gamma);
TwoFactorTheta reparam_2f(const TwoFactorParams& gamma);

// Inverse maps. `valid` is false when theta lies outside the structural
// image (an implied phi_j < 0, or Sigma not positive definite); the gamma
// returned is still the algebraic inverse.
struct OneFactorInverse {
    OneFactorParams gamma;
    bool valid = true;
};
struct TwoFactorInverse {
    TwoFactorParams gamma;
    bool valid = true;
};

OneFactorInverse invert_1f(const OneFactorTheta& theta);   // throws DomainError if beta <= 0
TwoFactorInverse invert_2f(const TwoFactorTheta& theta);   // throws SingularInversionError

// Identification-strength products. One factor: rho_j*rho_k for
// 2 <= j < k <= p. Two factors: (s1, s2, s3) stacked, each block in
// ascending k (and lexicographic (j,k) for s3).
struct IdStrength {
    Eigen::VectorXd s;
    Eigen::VectorXd scaled;  // sqrt(n) * s
    double n = 0;
};

IdStrength id_strength_1f(const OneFactorTheta& theta, double n);
IdStrength id_strength_2f(const TwoFactorTheta& theta, double n);

// Inverse-formula denominators beta*rho_41 - sigma12*rho_42 and
// beta*rho_31 - sigma12*rho_32 (equal det(Sigma)*lambda_41 and
// det(Sigma)*lambda_31 on the structural image).
double denom_d4(const TwoFactorTheta& theta);
double denom_d3(const TwoFactorTheta& theta);

// Implied error variances phi_j(theta) through the inverse map, without
// validity checks. Returns false when the inverse is singular at theta.
bool implied_phi(Model model, int p, const Eigen::VectorXd& theta,
                 Eigen::VectorXd& phi) noexcept;

}  // namespace fwid
