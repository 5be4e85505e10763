#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fwid/errors.hpp"
#include "fwid/hypotheses.hpp"
#include "fwid/rng.hpp"
#include "fwid/simulate.hpp"
#include "oracles.hpp"

using namespace fwid;
using namespace fwid::testing;

namespace {

std::vector<HypothesisKind> all_kinds(Model model, int p) {
    std::vector<HypothesisKind> ks;
    if (model == Model::OneFactor) {
        ks.push_back({HypFamily::FV, 0, 0});
        for (int j = 2; j <= p; ++j) ks.push_back({HypFamily::FL, j, 0});
        for (int j = 1; j <= p; ++j) ks.push_back({HypFamily::EV, j, 0});
        for (int j = 1; j <= p; ++j) ks.push_back({HypFamily::StNR, j, 0});
        return ks;
    }
    ks.push_back({HypFamily::FV, 1, 0});
    ks.push_back({HypFamily::FV, 2, 0});
    for (int j : {3, 4})
        for (int f : {1, 2}) ks.push_back({HypFamily::FL, j, f});
    for (int j = 1; j <= 4; ++j) ks.push_back({HypFamily::EV, j, 0});
    for (int j = 1; j <= 4; ++j) ks.push_back({HypFamily::StNR, j, 0});
    return ks;
}

// Structural value of the restriction, computed from gamma directly.
double structural_r(Model model, const OneFactorParams* g1, const TwoFactorParams* g2,
                    HypothesisKind k) {
    if (model == Model::OneFactor) {
        const auto& g = *g1;
        switch (k.family) {
            case HypFamily::FV: return g.sigma2;
            case HypFamily::FL: return g.lambda[k.j - 1];
            case HypFamily::EV: return g.phi[k.j - 1];
            case HypFamily::StNR: {
                const double sig = g.lambda[k.j - 1] * g.lambda[k.j - 1] * g.sigma2;
                return sig / g.phi[k.j - 1];
            }
        }
    }
    const auto& g = *g2;
    switch (k.family) {
        case HypFamily::FV: return g.Sigma(k.j - 1, k.j - 1);
        case HypFamily::FL: return g.Lambda(k.j - 1, k.f - 1);
        case HypFamily::EV: return g.phi[k.j - 1];
        case HypFamily::StNR: {
            Eigen::Vector2d lj = g.Lambda.row(k.j - 1).transpose();
            const double sig = lj.dot(g.Sigma * lj);
            return sig / g.phi[k.j - 1];
        }
    }
    return 0.0;
}

}  // namespace

TEST_CASE("r_fn reproduces the structural restriction on the image") {
    Rng rng(1212);
    for (int it = 0; it < 100; ++it) {
        OneFactorParams g1 = random_gamma_1f(rng, 4);
        Eigen::VectorXd t1 = reparam_1f(g1).to_vector();
        for (HypothesisKind k : all_kinds(Model::OneFactor, 4)) {
            HypothesisSpec spec = registry(Model::OneFactor, 4, k, Approach::A);
            CHECK(spec.r_fn(t1) ==
                  doctest::Approx(structural_r(Model::OneFactor, &g1, nullptr, k))
                      .epsilon(1e-9));
        }
        TwoFactorParams g2 = random_gamma_2f(rng, 5);
        Eigen::VectorXd t2 = reparam_2f(g2).to_vector();
        for (HypothesisKind k : all_kinds(Model::TwoFactor, 5)) {
            HypothesisSpec spec = registry(Model::TwoFactor, 5, k, Approach::A);
            CHECK(spec.r_fn(t2) ==
                  doctest::Approx(structural_r(Model::TwoFactor, nullptr, &g2, k))
                      .epsilon(1e-9));
        }
    }
}

TEST_CASE("approach-A beta inverse composes to the identity") {
    Rng rng(3434);
    double max_err = 0.0;
    for (int it = 0; it < 100; ++it) {
        OneFactorParams g1 = random_gamma_1f(rng, 4);
        Eigen::VectorXd t1 = reparam_1f(g1).to_vector();
        TwoFactorParams g2 = random_gamma_2f(rng, 5);
        Eigen::VectorXd t2 = reparam_2f(g2).to_vector();
        const double beta_alt = rng.uniform(0.2, 5.0);
        for (HypothesisKind k : all_kinds(Model::OneFactor, 4)) {
            HypothesisSpec spec = registry(Model::OneFactor, 4, k, Approach::A);
            Eigen::VectorXd t = t1;
            t[t.size() - 1] = beta_alt;
            const double r0 = spec.r_fn(t);
            if (!std::isfinite(r0)) continue;
            const double beta_back = spec.beta_inverse(t1, r0);
            max_err = std::max(max_err, std::fabs(beta_back - beta_alt));
        }
        for (HypothesisKind k : all_kinds(Model::TwoFactor, 5)) {
            HypothesisSpec spec = registry(Model::TwoFactor, 5, k, Approach::A);
            Eigen::VectorXd t = t2;
            t[t.size() - 1] = beta_alt;
            const double r0 = spec.r_fn(t);
            if (!std::isfinite(r0)) continue;
            const double beta_back = spec.beta_inverse(t2, r0);
            max_err = std::max(max_err, std::fabs(beta_back - beta_alt));
        }
    }
    CHECK(max_err < 1e-10);
}

TEST_CASE("approach-B swap inverse restores the swapped coordinate") {
    Rng rng(5656);
    double max_err = 0.0;
    for (int it = 0; it < 100; ++it) {
        OneFactorParams g1 = random_gamma_1f(rng, 4);
        Eigen::VectorXd t1 = reparam_1f(g1).to_vector();
        for (HypothesisKind k : all_kinds(Model::OneFactor, 4)) {
            if (k.family == HypFamily::FV) continue;
            HypothesisSpec spec = registry(Model::OneFactor, 4, k, Approach::B);
            const double r0 = spec.r_fn(t1);
            if (!std::isfinite(r0) || std::fabs(r0) < 1e-3) continue;
            const double back = spec.swap_inverse(t1, r0);
            max_err = std::max(max_err, std::fabs(back - t1[spec.swap_coord]));
        }
        TwoFactorParams g2 = random_gamma_2f(rng, 5);
        Eigen::VectorXd t2 = reparam_2f(g2).to_vector();
        for (HypothesisKind k : all_kinds(Model::TwoFactor, 5)) {
            if (k.family == HypFamily::FV && k.j == 2) continue;
            HypothesisSpec spec = registry(Model::TwoFactor, 5, k, Approach::B);
            const double r0 = spec.r_fn(t2);
            if (!std::isfinite(r0) || std::fabs(r0) < 1e-3) continue;
            const double back = spec.swap_inverse(t2, r0);
            max_err = std::max(max_err, std::fabs(back - t2[spec.swap_coord]));
        }
    }
    CHECK(max_err < 1e-9);
}

TEST_CASE("registry table rows and routing") {
    HypothesisSpec fv = registry(Model::OneFactor, 3, {HypFamily::FV, 0, 0}, Approach::A);
    CHECK(fv.is_factor_variance());
    CHECK(fv.assumptions.empty());
    CHECK_THROWS_AS(registry(Model::OneFactor, 3, {HypFamily::FV, 0, 0}, Approach::B),
                    InvalidParameterError);

    HypothesisSpec flb = registry(Model::OneFactor, 3, {HypFamily::FL, 2, 0}, Approach::B);
    ThetaLayout L{Model::OneFactor, 3};
    CHECK(flb.swap_coord == L.rho(2));

    HypothesisSpec ev3 = registry(Model::TwoFactor, 5, {HypFamily::EV, 3, 0}, Approach::A);
    CHECK(ev3.assumptions.size() == 2);

    CHECK_THROWS_AS(registry(Model::TwoFactor, 5, {HypFamily::FL, 5, 1}, Approach::A),
                    InvalidParameterError);

    CHECK(parse_hypothesis(Model::OneFactor, "fl3").family == HypFamily::FL);
    CHECK(parse_hypothesis(Model::OneFactor, "fl3").j == 3);
    CHECK(parse_hypothesis(Model::TwoFactor, "fl31").f == 1);
    CHECK(parse_hypothesis(Model::TwoFactor, "stnr2").j == 2);
    CHECK_THROWS_AS(parse_hypothesis(Model::OneFactor, "zzz"), InvalidParameterError);
}

TEST_CASE("null fit reaches zero under a true factor-variance null") {
    OneFactorParams g;
    g.lambda = Eigen::Vector3d(1.0, 0.8, -1.2);
    g.sigma2 = 1.5;
    g.phi = Eigen::Vector3d(1.0, 0.7, 1.3);
    MomentSystem ms = exact_system_from_gamma(g, 400);
    ParamSpace space = ParamSpace::defaults(Model::OneFactor, 3);
    HypothesisSpec spec = registry(Model::OneFactor, 3, {HypFamily::FV, 0, 0}, Approach::A);
    FitResult fit = minimize_null(Model::OneFactor, ms, space, spec, 1.5);
    CHECK(fit.qmin < 1e-8);
    TestOutcome out = test_hypothesis(spec, 1.5, ms, space, TestMethod::ArPlug);
    CHECK_FALSE(out.reject);
    CHECK(out.df == 1);

    CHECK_THROWS_AS(minimize_null(Model::OneFactor, ms, space, spec, 10.5),
                    InfeasibleNullError);
}

TEST_CASE("approach-B factor-loading null fits exactly on the image") {
    OneFactorParams g;
    g.lambda = Eigen::Vector3d(1.0, 0.9, 0.6);
    g.sigma2 = 1.2;
    g.phi = Eigen::Vector3d(0.8, 1.1, 0.9);
    MomentSystem ms = exact_system_from_gamma(g, 400);
    ParamSpace space = ParamSpace::defaults(Model::OneFactor, 3);
    HypothesisSpec spec = registry(Model::OneFactor, 3, {HypFamily::FL, 2, 0}, Approach::B);
    TestConfig cfg;
    FitResult fit = minimize_null(Model::OneFactor, ms, space, spec, 0.9, cfg);
    CHECK(fit.qmin < 1e-8);
    TestOutcome out = test_hypothesis(spec, 0.9, ms, space, TestMethod::ArPlug, cfg);
    CHECK_FALSE(out.reject);
    CHECK(out.df == 2);  // k - q + 2

    CHECK_THROWS_AS(test_hypothesis(spec, 0.9, ms, space, TestMethod::KPlug, cfg),
                    InvalidParameterError);
}

TEST_CASE("profile over beta matches a brute-force beta grid") {
    DgpSpec dgp;
    dgp.variant = DgpVariant::OneFactorSpec1;
    dgp.b1 = 1.0;
    dgp.n = 300;
    MomentSystem ms = make_moment_system(simulate(dgp, 864));
    ParamSpace space = ParamSpace::defaults(Model::OneFactor, 3);
    HypothesisSpec spec = registry(Model::OneFactor, 3, {HypFamily::FL, 2, 0}, Approach::B);
    TestConfig cfg;
    cfg.starts = 4;

    // r0 = 0 pins rho_2 to zero for every beta, so the profile is exactly
    // flat in beta and the coarse grid resolves the projected minimum.
    {
        const double r0 = 0.0;
        FitResult prof = minimize_null(Model::OneFactor, ms, space, spec, r0, cfg);
        double grid_min = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 200; ++i) {
            const double beta0 =
                space.beta_min() + (space.beta_max() - space.beta_min()) * i / 199.0;
            FitResult fixed = minimize_null_fixed_beta(Model::OneFactor, ms, space, spec,
                                                       r0, beta0, cfg);
            grid_min = std::min(grid_min, fixed.qmin);
            CHECK(prof.qmin <= fixed.qmin + 1e-9 * (1.0 + fixed.qmin));
        }
        CHECK(grid_min - prof.qmin < 1e-4 * (1.0 + prof.qmin));
    }

    // r0 != 0 ties beta to the strongly identified rho_2; a coarse pass
    // plus a fine pass around the bracket reproduces the profile minimum.
    {
        const double r0 = 1.0;
        FitResult prof = minimize_null(Model::OneFactor, ms, space, spec, r0, cfg);
        const double lo = space.beta_min(), hi = space.beta_max();
        double best = std::numeric_limits<double>::infinity(), best_beta = lo;
        for (int i = 0; i < 200; ++i) {
            const double beta0 = lo + (hi - lo) * i / 199.0;
            FitResult fixed = minimize_null_fixed_beta(Model::OneFactor, ms, space, spec,
                                                       r0, beta0, cfg);
            CHECK(prof.qmin <= fixed.qmin + 1e-9 * (1.0 + fixed.qmin));
            if (fixed.qmin < best) {
                best = fixed.qmin;
                best_beta = beta0;
            }
        }
        const double step = (hi - lo) / 199.0;
        for (int i = 0; i < 80; ++i) {
            const double beta0 = std::clamp(best_beta - step + 2.0 * step * i / 79.0, lo, hi);
            FitResult fixed = minimize_null_fixed_beta(Model::OneFactor, ms, space, spec,
                                                       r0, beta0, cfg);
            best = std::min(best, fixed.qmin);
        }
        CHECK(best - prof.qmin < 1e-4 * (1.0 + prof.qmin));
    }
}

TEST_CASE("two-factor FV2 null fit and K pieces on the exact image") {
    Rng rng(9876);
    TwoFactorParams g = random_gamma_2f(rng, 5);
    g.Sigma(1, 1) = 1.5;  // make the null true
    TwoFactorTheta th = reparam_2f(g);
    MomentSystem ms = exact_system_from_gamma(g, 500);
    ParamSpace space = ParamSpace::defaults(Model::TwoFactor, 5);
    HypothesisSpec spec = registry(Model::TwoFactor, 5, {HypFamily::FV, 2, 0}, Approach::A);
    TestConfig cfg;
    cfg.starts = 6;
    auto run = run_hypothesis_tests(spec, 1.5, ms, space,
                                    {TestMethod::ArPlug, TestMethod::KPlug,
                                     TestMethod::ClrPlug, TestMethod::ArProj},
                                    cfg);
    CHECK(run.fit.qmin < 1e-6);
    for (const auto& out : run.outcomes) CHECK_FALSE(out.reject);
    // df bookkeeping: AR-Plug 2, AR-Proj 15.
    CHECK(run.outcomes[0].df == 2);
    CHECK(run.outcomes[3].df == 15);
    // K <= Q always.
    CHECK(run.outcomes[1].statistic <= run.fit.qmin + 1e-9);
}

TEST_CASE("confidence interval by inversion: duality, coverage point, truncation") {
    DgpSpec dgp;
    dgp.variant = DgpVariant::OneFactorSpec1;
    dgp.b1 = std::sqrt(500.0);
    dgp.n = 500;
    MomentSystem ms = make_moment_system(simulate(dgp, 31));
    ParamSpace space = ParamSpace::defaults(Model::OneFactor, 3);
    HypothesisSpec spec = registry(Model::OneFactor, 3, {HypFamily::FV, 0, 0}, Approach::A);
    TestConfig cfg;
    cfg.starts = 4;
    GridSpec grid;
    grid.points = 40;
    ConfidenceInterval ci = ci_invert(spec, ms, space, TestMethod::ArPlug, grid, cfg);
    CHECK_FALSE(ci.empty);
    // Strong identification: the true sigma^2 = 1 is covered here.
    bool covers = false;
    for (auto& iv : ci.intervals) covers = covers || (iv.first <= 1.0 && 1.0 <= iv.second);
    CHECK(covers);
    // Duality, bit for bit.
    for (size_t i = 0; i < ci.grid.size(); ++i) {
        TestOutcome out = test_hypothesis(spec, ci.grid[i], ms, space, TestMethod::ArPlug, cfg);
        CHECK(static_cast<bool>(ci.accepted[i]) == !out.reject);
    }
    CHECK(ci.length > 0.0);
    CHECK(ci.length <= space.beta_max() - space.beta_min());

    // Weak identification: the interval runs into the upper bound.
    DgpSpec weak = dgp;
    weak.b1 = 0.0;
    MomentSystem ms_w = make_moment_system(simulate(weak, 32));
    ConfidenceInterval ci_w = ci_invert(spec, ms_w, space, TestMethod::ArPlug, grid, cfg);
    CHECK_FALSE(ci_w.empty);
    CHECK(ci_w.truncated_hi);
    CHECK(ci_w.intervals.back().second == doctest::Approx(space.beta_max()));
}

TEST_CASE("confidence interval empty case") {
    OneFactorParams g;
    g.lambda = Eigen::Vector3d(1.0, 1.0, 1.0);
    g.sigma2 = 1.0;
    g.phi = Eigen::Vector3d(1, 1, 1);
    MomentSystem ms = exact_system_from_gamma(g, 100000);
    ParamSpace space = ParamSpace::defaults(Model::OneFactor, 3);
    HypothesisSpec spec = registry(Model::OneFactor, 3, {HypFamily::FV, 0, 0}, Approach::A);
    GridSpec grid;
    grid.from_space = false;
    grid.lo = 6.0;
    grid.hi = 10.0;
    grid.points = 15;
    TestConfig cfg;
    cfg.starts = 3;
    ConfidenceInterval ci = ci_invert(spec, ms, space, TestMethod::ArPlug, grid, cfg);
    CHECK(ci.empty);
    CHECK(ci.length == 0.0);
}

TEST_CASE("ordering switch: swapping variables 4 and 5 relabels the hypotheses") {
    Rng rng(246);
    TwoFactorParams g = random_gamma_2f(rng, 5);
    g.Lambda(4, 0) = 0.9;  // lambda_51 != 0 so the swapped model stays valid
    g.Lambda(4, 1) = -0.7;

    TwoFactorParams gs = g;
    gs.Lambda.row(3).swap(gs.Lambda.row(4));
    std::swap(gs.phi[3], gs.phi[4]);

    // Semantics: FL(4,1) evaluated after the swap is lambda_51 of the original.
    HypothesisSpec fl41 = registry(Model::TwoFactor, 5, {HypFamily::FL, 4, 1}, Approach::A);
    Eigen::VectorXd ts = reparam_2f(gs).to_vector();
    CHECK(fl41.r_fn(ts) == doctest::Approx(g.Lambda(4, 0)).epsilon(1e-10));

    // Pipeline: permuting the data columns equals permuting the moment system.
    VechIndex vi(5);
    auto perm_var = [](int j) { return j == 4 ? 5 : (j == 5 ? 4 : j); };
    Eigen::VectorXd base = brute_force_vech_2f(g);
    Eigen::VectorXd base_perm(15);
    for (int c = 1; c <= 5; ++c)
        for (int r = c; r <= 5; ++r)
            base_perm[vi.index(perm_var(r), perm_var(c))] = base[vi.index(r, c)];
    MomentSystem ms_route1 = exact_moment_system(5, base_perm, 500);
    MomentSystem ms_route2 = exact_moment_system(5, brute_force_vech_2f(gs), 500);
    CHECK((ms_route1.gbar_base - ms_route2.gbar_base).cwiseAbs().maxCoeff() < 1e-12);

    ParamSpace space = ParamSpace::defaults(Model::TwoFactor, 5);
    TestConfig cfg;
    cfg.starts = 4;
    const double r0 = g.Lambda(4, 0) + 0.15;  // off the truth so Q > 0
    TestOutcome o1 = test_hypothesis(fl41, r0, ms_route1, space, TestMethod::ArPlug, cfg);
    TestOutcome o2 = test_hypothesis(fl41, r0, ms_route2, space, TestMethod::ArPlug, cfg);
    CHECK(o1.statistic == doctest::Approx(o2.statistic).epsilon(1e-8));
}
