#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "fwid/errors.hpp"
#include "fwid/model.hpp"
#include "fwid/rng.hpp"
#include "oracles.hpp"

using namespace fwid;
using namespace fwid::testing;

TEST_CASE("omega_of_gamma one factor closed cases") {
    OneFactorParams g;
    g.lambda = Eigen::Vector3d(1, 1, 1);
    g.sigma2 = 1.0;
    g.phi = Eigen::Vector3d(1, 1, 1);
    Eigen::MatrixXd om = omega_of_gamma(g);
    Eigen::Matrix3d expect;
    expect << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    CHECK((om - expect).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

    // Zero third loading kills every covariance involving variable 3.
    g.lambda[2] = 0.0;
    om = omega_of_gamma(g);
    CHECK(om(2, 0) == 0.0);
    CHECK(om(2, 1) == 0.0);
    CHECK(om(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("omega_of_gamma two factor derived case") {
    TwoFactorParams g;
    g.Lambda.resize(5, 2);
    g.Lambda << 1, 0, 0, 1, 1, 1, 1, 0, 0, 1;
    g.Sigma = Eigen::Matrix2d::Identity();
    g.phi = Eigen::VectorXd::Ones(5);
    Eigen::MatrixXd om = omega_of_gamma(g);
    Eigen::MatrixXd direct = g.Lambda * g.Sigma * g.Lambda.transpose();
    direct.diagonal() += g.phi;
    CHECK((om - direct).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(om(2, 4) == doctest::Approx(1.0));
    CHECK(om(3, 4) == doctest::Approx(0.0));
    CHECK(om(2, 3) == doctest::Approx(1.0));
}

TEST_CASE("omega_of_gamma rejects inconsistent dimensions") {
    OneFactorParams g;
    g.lambda = Eigen::Vector3d(1, 1, 1);
    g.phi = Eigen::Vector2d(1, 1);
    CHECK_THROWS_AS(omega_of_gamma(g), InvalidParameterError);
}

TEST_CASE("reparam_1f closed cases") {
    OneFactorParams g;
    g.lambda = Eigen::Vector3d(1, 1, 0);
    g.sigma2 = 1.0;
    g.phi = Eigen::Vector3d(1, 1, 1);
    OneFactorTheta t = reparam_1f(g);
    CHECK(t.rho[0] == doctest::Approx(1.0));
    CHECK(t.rho[1] == doctest::Approx(0.0));
    CHECK(t.omega[0] == doctest::Approx(2.0));
    CHECK(t.omega[1] == doctest::Approx(2.0));
    CHECK(t.omega[2] == doctest::Approx(1.0));
    CHECK(t.beta == doctest::Approx(1.0));

    g.lambda = Eigen::Vector3d(1, 1, 1);
    g.sigma2 = 2.0;
    t = reparam_1f(g);
    CHECK(t.rho[0] == doctest::Approx(2.0));
    CHECK(t.rho[1] == doctest::Approx(2.0));
    CHECK(t.omega[0] == doctest::Approx(3.0));
    CHECK(t.omega[1] == doctest::Approx(3.0));
    CHECK(t.omega[2] == doctest::Approx(3.0));
    CHECK(t.beta == doctest::Approx(2.0));
}

TEST_CASE("invert_1f closed cases and validity") {
    OneFactorTheta t;
    t.rho = Eigen::Vector2d(2, 1);
    t.omega = Eigen::Vector3d(3, 5, 2);
    t.beta = 2.0;
    auto inv = invert_1f(t);
    CHECK(inv.valid);
    CHECK(inv.gamma.lambda[0] == doctest::Approx(1.0));
    CHECK(inv.gamma.lambda[1] == doctest::Approx(1.0));
    CHECK(inv.gamma.lambda[2] == doctest::Approx(0.5));
    CHECK(inv.gamma.sigma2 == doctest::Approx(2.0));
    CHECK(inv.gamma.phi[0] == doctest::Approx(1.0));
    CHECK(inv.gamma.phi[1] == doctest::Approx(3.0));
    CHECK(inv.gamma.phi[2] == doctest::Approx(1.5));

    // Zero loadings sit on the boundary of the image and stay valid.
    t.rho = Eigen::Vector2d(0, 0);
    t.omega = Eigen::Vector3d(1, 1, 1);
    t.beta = 1.0;
    inv = invert_1f(t);
    CHECK(inv.valid);
    CHECK(inv.gamma.lambda[1] == 0.0);
    CHECK(inv.gamma.phi[0] == doctest::Approx(0.0));

    // omega_1 < beta implies a negative phi_1.
    t.omega[0] = 0.5;
    inv = invert_1f(t);
    CHECK_FALSE(inv.valid);

    t.beta = 0.0;
    CHECK_THROWS_AS(invert_1f(t), DomainError);
}

TEST_CASE("reparam_2f closed cases") {
    TwoFactorParams g;
    g.Lambda.resize(5, 2);
    g.Lambda << 1, 0, 0, 1, 1, 1, 1, 0, 0, 1;
    g.Sigma = Eigen::Matrix2d::Identity();
    g.phi = Eigen::VectorXd::Ones(5);
    TwoFactorTheta t = reparam_2f(g);
    CHECK(t.rho1[0] == doctest::Approx(1.0));  // rho_31
    CHECK(t.rho2[0] == doctest::Approx(1.0));  // rho_32
    CHECK(t.rho1[1] == doctest::Approx(1.0));  // rho_41
    CHECK(t.rho2[1] == doctest::Approx(0.0));  // rho_42
    CHECK(t.chi == doctest::Approx(1.0));
    CHECK(t.sigma12 == doctest::Approx(0.0));
    CHECK(t.beta == doctest::Approx(1.0));

    g.Sigma << 2, 0.5, 0.5, 1;
    g.Lambda.row(2) << 1, 0;
    t = reparam_2f(g);
    CHECK(t.rho1[0] == doctest::Approx(2.0));
    CHECK(t.rho2[0] == doctest::Approx(0.5));
}

TEST_CASE("invert_2f identity-Sigma image and singularity") {
    TwoFactorTheta t;
    t.rho1 = Eigen::Vector3d(1, 1, 0);
    t.rho2 = Eigen::Vector3d(1, 0, 1);
    t.omega = Eigen::VectorXd::Constant(5, 3.0);
    t.chi = 1.0;
    t.sigma12 = 0.0;
    t.beta = 1.0;
    auto inv = invert_2f(t);
    CHECK(inv.gamma.Lambda(2, 0) == doctest::Approx(1.0));
    CHECK(inv.gamma.Lambda(3, 0) == doctest::Approx(1.0));
    CHECK(inv.gamma.Lambda(2, 1) == doctest::Approx(1.0));
    CHECK(inv.gamma.Lambda(3, 1) == doctest::Approx(0.0));
    CHECK(inv.gamma.Sigma(0, 0) == doctest::Approx(1.0));

    // beta*rho_41 - sigma12*rho_42 == 0.
    t.rho1[1] = 0.0;
    CHECK_THROWS_AS(invert_2f(t), SingularInversionError);
}

TEST_CASE("roundtrip oracles both models") {
    Rng rng(7771);
    double max_err_1f = 0.0;
    for (int it = 0; it < 1000; ++it) {
        const int p = 3 + static_cast<int>(rng.uniform01() * 3.0);
        OneFactorParams g = random_gamma_1f(rng, p);
        auto inv = invert_1f(reparam_1f(g));
        CHECK(inv.valid);
        max_err_1f = std::max(max_err_1f,
                              (inv.gamma.lambda - g.lambda).cwiseAbs().maxCoeff());
        max_err_1f = std::max(max_err_1f, std::fabs(inv.gamma.sigma2 - g.sigma2));
        max_err_1f = std::max(max_err_1f, (inv.gamma.phi - g.phi).cwiseAbs().maxCoeff());
        // theta -> gamma -> theta
        OneFactorTheta t = reparam_1f(g);
        OneFactorTheta t2 = reparam_1f(invert_1f(t).gamma);
        max_err_1f = std::max(max_err_1f,
                              (t.to_vector() - t2.to_vector()).cwiseAbs().maxCoeff());
    }
    CHECK(max_err_1f < 1e-10);

    double max_err_2f = 0.0;
    for (int it = 0; it < 1000; ++it) {
        const int p = 5 + static_cast<int>(rng.uniform01() * 2.0);
        TwoFactorParams g = random_gamma_2f(rng, p);
        auto inv = invert_2f(reparam_2f(g));
        CHECK(inv.valid);
        max_err_2f =
            std::max(max_err_2f, (inv.gamma.Lambda - g.Lambda).cwiseAbs().maxCoeff());
        max_err_2f =
            std::max(max_err_2f, (inv.gamma.Sigma - g.Sigma).cwiseAbs().maxCoeff());
        max_err_2f = std::max(max_err_2f, (inv.gamma.phi - g.phi).cwiseAbs().maxCoeff());
        TwoFactorTheta t = reparam_2f(g);
        TwoFactorTheta t2 = reparam_2f(invert_2f(t).gamma);
        max_err_2f = std::max(max_err_2f,
                              (t.to_vector() - t2.to_vector()).cwiseAbs().maxCoeff());
    }
    CHECK(max_err_2f < 1e-10);
}

TEST_CASE("invert_2f agrees with a root-finding solution of the covariance equations") {
    Rng rng(424242);
    int solved = 0;
    for (int it = 0; it < 25; ++it) {
        TwoFactorParams g = random_gamma_2f(rng, 5);
        TwoFactorTheta t = reparam_2f(g);
        TwoFactorParams sol;
        bool ok = false;
        // Shrinking perturbation scales: the solver must find the root on
        // its own, but far starts can land in another basin.
        for (double scale : {0.3, 0.15, 0.06, 0.02}) {
            TwoFactorParams start = g;
            for (int j = 2; j < 5; ++j) {
                start.Lambda(j, 0) *= 1.0 + scale * (rng.uniform01() - 0.5);
                start.Lambda(j, 1) += scale * (rng.uniform01() - 0.5);
            }
            for (int j = 0; j < 5; ++j)
                start.phi[j] *= 1.0 + scale * (rng.uniform01() - 0.5);
            if (solve_gamma_2f(t, start, sol)) {
                ok = true;
                break;
            }
        }
        if (!ok) continue;
        ++solved;
        auto closed = invert_2f(t);
        CHECK((closed.gamma.Lambda - sol.Lambda).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((closed.gamma.Sigma - sol.Sigma).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((closed.gamma.phi - sol.phi).cwiseAbs().maxCoeff() < 1e-6);
    }
    CHECK(solved >= 20);  // the oracle must actually exercise the check
}

TEST_CASE("image consistency: structural covariance equals theta-assembled moments") {
    Rng rng(664);
    double err = 0.0;
    for (int it = 0; it < 200; ++it) {
        OneFactorParams g1 = random_gamma_1f(rng, 3 + it % 4);
        OneFactorTheta t1 = reparam_1f(g1);
        Eigen::VectorXd direct =
            vech(omega_of_gamma(invert_1f(t1).gamma));
        Eigen::VectorXd assembled =
            theta_moments(Model::OneFactor, t1.p(), t1.to_vector());
        err = std::max(err, (direct - assembled).cwiseAbs().maxCoeff());

        TwoFactorParams g2 = random_gamma_2f(rng, 5 + it % 2);
        TwoFactorTheta t2 = reparam_2f(g2);
        Eigen::VectorXd direct2 = vech(omega_of_gamma(invert_2f(t2).gamma));
        Eigen::VectorXd assembled2 =
            theta_moments(Model::TwoFactor, t2.p(), t2.to_vector());
        err = std::max(err, (direct2 - assembled2).cwiseAbs().maxCoeff());
    }
    CHECK(err < 1e-10);
}

TEST_CASE("implied phi matches the inverse map") {
    Rng rng(991100);
    for (int it = 0; it < 100; ++it) {
        OneFactorParams g1 = random_gamma_1f(rng, 4);
        Eigen::VectorXd t1 = reparam_1f(g1).to_vector();
        Eigen::VectorXd phi;
        REQUIRE(implied_phi(Model::OneFactor, 4, t1, phi));
        CHECK((phi - g1.phi).cwiseAbs().maxCoeff() < 1e-10);

        TwoFactorParams g2 = random_gamma_2f(rng, 6);
        Eigen::VectorXd t2 = reparam_2f(g2).to_vector();
        REQUIRE(implied_phi(Model::TwoFactor, 6, t2, phi));
        CHECK((phi - g2.phi).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("denominator identities") {
    Rng rng(991);
    for (int it = 0; it < 200; ++it) {
        TwoFactorParams g = random_gamma_2f(rng, 5 + (it % 2));
        TwoFactorTheta t = reparam_2f(g);
        const double det = g.Sigma.determinant();
        CHECK(std::fabs(denom_d4(t) - det * g.Lambda(3, 0)) < 1e-12 * std::max(1.0, det));
        CHECK(std::fabs(denom_d3(t) - det * g.Lambda(2, 0)) < 1e-12 * std::max(1.0, det));
    }
}

TEST_CASE("id_strength one factor") {
    OneFactorTheta t;
    t.rho = Eigen::Vector2d(1, 0);
    t.omega = Eigen::Vector3d(2, 2, 1);
    t.beta = 1.0;
    IdStrength s = id_strength_1f(t, 500);
    REQUIRE(s.s.size() == 1);
    CHECK(s.s[0] == doctest::Approx(0.0));

    OneFactorTheta t4;
    t4.rho = Eigen::Vector3d(1, 2, 3);
    t4.omega = Eigen::VectorXd::Ones(4);
    t4.beta = 1.0;
    s = id_strength_1f(t4, 100);
    REQUIRE(s.s.size() == 3);
    CHECK(s.s[0] == doctest::Approx(2.0));
    CHECK(s.s[1] == doctest::Approx(3.0));
    CHECK(s.s[2] == doctest::Approx(6.0));
    CHECK(s.scaled[2] == doctest::Approx(60.0));
}

TEST_CASE("id_strength two factor derived case and collinearity") {
    TwoFactorTheta t;
    t.rho1 = Eigen::Vector3d(1, 1, 0);
    t.rho2 = Eigen::Vector3d(1, 0, 1);
    t.omega = Eigen::VectorXd::Constant(5, 3.0);
    t.chi = 1.0;
    t.sigma12 = 0.0;
    t.beta = 1.0;
    IdStrength s = id_strength_2f(t, 500);
    REQUIRE(s.s.size() == 2);
    CHECK(s.s[0] == doctest::Approx(1.0));  // s1
    CHECK(s.s[1] == doctest::Approx(0.0));  // s2

    // Collinear rho columns zero every product.
    TwoFactorTheta tc;
    tc.rho1 = Eigen::VectorXd::Ones(4);
    tc.rho2 = 2.0 * Eigen::VectorXd::Ones(4);
    tc.omega = Eigen::VectorXd::Constant(6, 3.0);
    tc.chi = 0.5;
    tc.sigma12 = 0.25;  // chi*sigma12 = 0.125 ... need rho32*rho41 == chi*sigma12
    tc.rho1 = Eigen::Vector4d(0.5, 0.5, 1.0, 2.0);
    tc.rho2 = Eigen::Vector4d(0.25, 0.25, 0.5, 1.0);  // rho2 = rho1/2 collinear
    tc.chi = 1.0;
    tc.sigma12 = 0.25 * 0.5 / 1.0;  // rho32*rho41 / chi = 0.125
    IdStrength sc = id_strength_2f(tc, 500);
    REQUIRE(sc.s.size() == 2 * 2 + 1);
    CHECK(sc.s.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("identification equivalence: s(rho) == 0 iff at most one nonzero loading") {
    Rng rng(5150);
    for (int it = 0; it < 300; ++it) {
        const int p = 3 + static_cast<int>(rng.uniform01() * 3.0);
        OneFactorParams g = random_gamma_1f(rng, p);
        // Randomly zero out loadings.
        int nonzero = 0;
        for (int j = 1; j < p; ++j) {
            if (rng.uniform01() < 0.5) g.lambda[j] = 0.0;
            if (g.lambda[j] != 0.0) ++nonzero;
        }
        IdStrength s = id_strength_1f(reparam_1f(g), 1);
        const bool s_zero = s.s.cwiseAbs().maxCoeff() == 0.0;
        CHECK(s_zero == (nonzero <= 1));
    }
}

TEST_CASE("theta flat vector round trip") {
    Rng rng(31337);
    OneFactorTheta t1 = reparam_1f(random_gamma_1f(rng, 4));
    CHECK((OneFactorTheta::from_vector(t1.to_vector()).to_vector() - t1.to_vector())
              .cwiseAbs()
              .maxCoeff() == 0.0);
    TwoFactorTheta t2 = reparam_2f(random_gamma_2f(rng, 6));
    CHECK((TwoFactorTheta::from_vector(t2.to_vector()).to_vector() - t2.to_vector())
              .cwiseAbs()
              .maxCoeff() == 0.0);
}
