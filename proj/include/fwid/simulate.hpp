#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>

#include "fwid/model.hpp"

namespace fwid {

// The simulation designs: local drifts in the factor loadings indexed by
// b (one factor) or (b1, b2) (two factors), everything else held at the
// base values sigma^2 = 1, phi_j = 1, Sigma = I2, n = 500.
enum class DgpVariant {
    OneFactorSpec1,  // lambda = (1, b/sqrt(n))
    OneFactorSpec2,  // lambda_2 = lambda_3 = sqrt(b)/n^{1/4}
    TwoFactorSpec1,  // l31=l41=l52=1, l51=0, (l32,l42) = (b1,b2)/sqrt(n)
    TwoFactorSpec2,  // l31=l41=l51=l52=1, (l32,l42) = (1-b2/sqrt(n), 1-b1/sqrt(n))
    TwoFactorSpec3,  // l31=l41=1, l51=0, (l32,l42,l52) = (sqrt(b1), b2/sqrt(b1), sqrt(b1))/n^{1/4}
};

DgpVariant parse_variant(const std::string& text);
std::string variant_name(DgpVariant v);
bool is_one_factor(DgpVariant v);

struct DgpSpec {
    DgpVariant variant = DgpVariant::OneFactorSpec1;
    int n = 500;
    double b1 = 0.0;  // `b` for the one-factor designs
    double b2 = 0.0;

    int p() const { return is_one_factor(variant) ? 3 : 5; }
    Model model() const { return is_one_factor(variant) ? Model::OneFactor : Model::TwoFactor; }
};

// The structural parameters at sample size spec.n.
std::variant<OneFactorParams, TwoFactorParams> dgp_params(const DgpSpec& spec);

// n x p draw of W = F Lambda' + E, deterministic per seed.
Eigen::MatrixXd simulate(const DgpSpec& spec, std::uint64_t seed);

}  // namespace fwid
