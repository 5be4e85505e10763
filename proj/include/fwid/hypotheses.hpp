#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fwid/gmm.hpp"
#include "fwid/robust_tests.hpp"

namespace fwid {

// Families of invertible restrictions r(pi, beta) = r0. One factor: FV
// (j unused), FL/EV/StNR with a 1-based variable index. Two factors: FV
// with j in {1,2} naming the factor, FL with (j, f) in {3,4} x {1,2},
// EV/StNR with j in 1..4.
enum class HypFamily { FV, FL, EV, StNR };

struct HypothesisKind {
    HypFamily family = HypFamily::FV;
    int j = 0;
    int f = 0;
};

enum class Approach { A, B };

// A restriction plus its inversion route. Approach A inverts r for beta
// (every nuisance parameter is plugged in); approach B inverts r for one
// pi coordinate and projects over beta.
struct HypothesisSpec {
    Model model = Model::OneFactor;
    int p = 3;
    HypothesisKind kind;
    Approach approach = Approach::A;
    std::string name;
    std::vector<std::string> assumptions;

    std::function<double(const Eigen::VectorXd& theta)> r_fn;
    // Approach A: beta as a function of the pi coordinates (read from a
    // full-length theta vector; the beta slot is ignored) and r0.
    std::function<double(const Eigen::VectorXd& theta, double r0)> beta_inverse;
    // Approach B: the swapped pi coordinate and its inverse, a function of
    // the remaining coordinates (including beta) and r0.
    int swap_coord = -1;
    std::function<double(const Eigen::VectorXd& theta, double r0)> swap_inverse;
    std::function<std::vector<std::string>(const Eigen::VectorXd& theta)> check_assumptions;

    bool is_factor_variance() const;  // r is beta itself
};

HypothesisSpec registry(Model model, int p, HypothesisKind kind, Approach approach);
HypothesisKind parse_hypothesis(Model model, const std::string& text);

// Coordinate map for the null-imposed problem: nu -> theta with r pinned
// at r0. Under approach A nu = pi; under approach B nu = (pi-tilde, beta).
ThetaMap null_map(const HypothesisSpec& spec, double r0, const ParamSpace& space);

// Tested-coordinate direction d theta / d r at nu (for the K and rank
// statistics).
Eigen::VectorXd tested_direction(const HypothesisSpec& spec, double r0,
                                 const Eigen::VectorXd& nu);

enum class TestMethod { ArPlug, ArProj, KPlug, ClrPlug };

std::string method_name(TestMethod m);
TestMethod parse_method(const std::string& text);

struct TestConfig {
    double alpha = 0.05;
    std::uint64_t seed = 20240501;
    int starts = 10;
    int clr_draws = 10000;
    LmOptions lm;
};

// Null-imposed fit for H0: r = r0 (approach A), or the profile over beta of
// the joint null (approach B). Also the implementation of profile_beta.
FitResult minimize_null(Model model, const MomentSystem& ms, const ParamSpace& space,
                        const HypothesisSpec& spec, double r0, const TestConfig& cfg = {});

// Joint approach-B fit with beta additionally pinned at beta0 (used to
// cross-check the profile shortcut).
FitResult minimize_null_fixed_beta(Model model, const MomentSystem& ms,
                                   const ParamSpace& space, const HypothesisSpec& spec,
                                   double r0, double beta0, const TestConfig& cfg = {});

TestOutcome test_hypothesis(const HypothesisSpec& spec, double r0, const MomentSystem& ms,
                            const ParamSpace& space, TestMethod method,
                            const TestConfig& cfg = {});

// Several methods at one hypothesized value share the null-imposed fit.
struct HypothesisTestRun {
    FitResult fit;
    std::vector<TestOutcome> outcomes;  // aligned with the methods argument
};

HypothesisTestRun run_hypothesis_tests(const HypothesisSpec& spec, double r0,
                                       const MomentSystem& ms, const ParamSpace& space,
                                       const std::vector<TestMethod>& methods,
                                       const TestConfig& cfg = {});

struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    int points = 200;
    bool from_space = true;  // FV default: the beta box
};

struct ConfidenceInterval {
    std::vector<double> grid;
    std::vector<char> accepted;
    std::vector<std::pair<double, double>> intervals;  // union of accepted ranges
    double length = 0.0;
    bool empty = true;
    bool disconnected = false;
    bool truncated_lo = false;
    bool truncated_hi = false;
    std::pair<double, double> hull{0.0, 0.0};
};

ConfidenceInterval ci_invert(const HypothesisSpec& spec, const MomentSystem& ms,
                             const ParamSpace& space, TestMethod method,
                             const GridSpec& grid = {}, const TestConfig& cfg = {});

}  // namespace fwid
