#include "fwid/simulate.hpp"

#include <cctype>
#include <cmath>

#include "fwid/errors.hpp"
#include "fwid/rng.hpp"

namespace fwid {

DgpVariant parse_variant(const std::string& text) {
    std::string t;
    for (char c : text) t.push_back(std::tolower(static_cast<unsigned char>(c)));
    if (t == "1f-spec1") return DgpVariant::OneFactorSpec1;
    if (t == "1f-spec2") return DgpVariant::OneFactorSpec2;
    if (t == "2f-spec1") return DgpVariant::TwoFactorSpec1;
    if (t == "2f-spec2") return DgpVariant::TwoFactorSpec2;
    if (t == "2f-spec3") return DgpVariant::TwoFactorSpec3;
    throw InvalidParameterError("unknown DGP variant: " + text +
                                " (expected 1f-spec1, 1f-spec2, 2f-spec1, 2f-spec2, 2f-spec3)");
}

std::string variant_name(DgpVariant v) {
    switch (v) {
        case DgpVariant::OneFactorSpec1: return "1f-spec1";
        case DgpVariant::OneFactorSpec2: return "1f-spec2";
        case DgpVariant::TwoFactorSpec1: return "2f-spec1";
        case DgpVariant::TwoFactorSpec2: return "2f-spec2";
        case DgpVariant::TwoFactorSpec3: return "2f-spec3";
    }
    return "?";
}

bool is_one_factor(DgpVariant v) {
    return v == DgpVariant::OneFactorSpec1 || v == DgpVariant::OneFactorSpec2;
}

std::variant<OneFactorParams, TwoFactorParams> dgp_params(const DgpSpec& spec) {
    const double rn = std::sqrt(static_cast<double>(spec.n));
    const double rn4 = std::pow(static_cast<double>(spec.n), 0.25);
    if (is_one_factor(spec.variant)) {
        OneFactorParams g;
        g.lambda.resize(3);
        g.lambda[0] = 1.0;
        if (spec.variant == DgpVariant::OneFactorSpec1) {
            g.lambda[1] = 1.0;
            g.lambda[2] = spec.b1 / rn;
        } else {
            g.lambda[1] = std::sqrt(spec.b1) / rn4;
            g.lambda[2] = std::sqrt(spec.b1) / rn4;
        }
        g.sigma2 = 1.0;
        g.phi = Eigen::VectorXd::Ones(3);
        return g;
    }
    TwoFactorParams g;
    g.Lambda.setZero(5, 2);
    g.Lambda(0, 0) = 1.0;
    g.Lambda(1, 1) = 1.0;
    g.Sigma = Eigen::Matrix2d::Identity();
    g.phi = Eigen::VectorXd::Ones(5);
    switch (spec.variant) {
        case DgpVariant::TwoFactorSpec1:
            g.Lambda(2, 0) = 1.0;
            g.Lambda(3, 0) = 1.0;
            g.Lambda(4, 1) = 1.0;
            g.Lambda(2, 1) = spec.b1 / rn;
            g.Lambda(3, 1) = spec.b2 / rn;
            break;
        case DgpVariant::TwoFactorSpec2:
            g.Lambda(2, 0) = 1.0;
            g.Lambda(3, 0) = 1.0;
            g.Lambda(4, 0) = 1.0;
            g.Lambda(4, 1) = 1.0;
            g.Lambda(2, 1) = 1.0 - spec.b2 / rn;
            g.Lambda(3, 1) = 1.0 - spec.b1 / rn;
            break;
        case DgpVariant::TwoFactorSpec3:
            g.Lambda(2, 0) = 1.0;
            g.Lambda(3, 0) = 1.0;
            g.Lambda(2, 1) = std::sqrt(spec.b1) / rn4;
            // b1 = 0 zeroes the whole drift block.
            g.Lambda(3, 1) = spec.b1 > 0.0 ? spec.b2 / std::sqrt(spec.b1) / rn4 : 0.0;
            g.Lambda(4, 1) = std::sqrt(spec.b1) / rn4;
            break;
        default:
            throw InvalidParameterError("dgp_params: inconsistent variant");
    }
    return g;
}

Eigen::MatrixXd simulate(const DgpSpec& spec, std::uint64_t seed) {
    auto params = dgp_params(spec);
    Rng rng(seed);
    const int n = spec.n;
    if (is_one_factor(spec.variant)) {
        const auto& g = std::get<OneFactorParams>(params);
        const int p = g.p();
        const double sd_f = std::sqrt(g.sigma2);
        Eigen::MatrixXd W(n, p);
        for (int i = 0; i < n; ++i) {
            const double f = sd_f * rng.normal();
            for (int j = 0; j < p; ++j)
                W(i, j) = g.lambda[j] * f + std::sqrt(g.phi[j]) * rng.normal();
        }
        return W;
    }
    const auto& g = std::get<TwoFactorParams>(params);
    const int p = g.p();
    Eigen::LLT<Eigen::Matrix2d> llt(g.Sigma);
    Eigen::Matrix2d Lf = llt.matrixL();
    Eigen::MatrixXd W(n, p);
    for (int i = 0; i < n; ++i) {
        Eigen::Vector2d z(rng.normal(), rng.normal());
        Eigen::Vector2d f = Lf * z;
        for (int j = 0; j < p; ++j)
            W(i, j) = g.Lambda.row(j).dot(f) + std::sqrt(g.phi[j]) * rng.normal();
    }
    return W;
}

}  // namespace fwid
