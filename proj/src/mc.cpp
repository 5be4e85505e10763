#include "fwid/mc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>

#include "fwid/errors.hpp"
#include "fwid/rng.hpp"

namespace fwid {

namespace {

double pct_se(double pct, int b) {
    const double phat = pct / 100.0;
    return 100.0 * std::sqrt(std::max(phat * (1.0 - phat), 0.0) / b);
}

// Runs fn(rep) for rep in [0, B) across a worker pool. Results land in
// rep-indexed storage inside fn, so the outcome is independent of the
// worker count.
void parallel_for(int B, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1) {
        for (int r = 0; r < B; ++r) fn(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int r = next.fetch_add(1); r < B; r = next.fetch_add(1)) fn(r);
        });
    for (auto& t : pool) t.join();
}

struct RepPower {
    bool failed = true;
    std::vector<char> reject;
    double ci_length = 0.0;
    double seconds = 0.0;
};

struct RepSelect {
    bool failed = true;
    bool aic_large = false;
    bool bic_large = false;
    bool j_reject = false;
    double seconds = 0.0;
};

}  // namespace

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FWID_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

McReport run_power_mc(const DgpSpec& dgp, const std::vector<TestMethod>& methods,
                      bool with_ci_length, const McConfig& cfg) {
    if (cfg.B < 1) throw InvalidParameterError("run_power_mc: B >= 1 required");
    const Model model = dgp.model();
    const int p = dgp.p();
    const ParamSpace space = ParamSpace::defaults(model, p);
    HypothesisKind fv{HypFamily::FV, model == Model::TwoFactor ? 2 : 0, 0};
    const HypothesisSpec spec = registry(model, p, fv, Approach::A);

    std::vector<RepPower> reps(cfg.B);
    auto body = [&](int rep) {
        auto t0 = std::chrono::steady_clock::now();
        RepPower& out = reps[rep];
        const std::uint64_t rep_seed = derive_seed(cfg.seed, rep);
        try {
            Eigen::MatrixXd W = simulate(dgp, rep_seed);
            MomentSystem ms = make_moment_system(W);
            TestConfig tc;
            tc.alpha = cfg.alpha;
            tc.seed = rep_seed;
            tc.starts = cfg.starts;
            tc.clr_draws = cfg.clr_draws;
            HypothesisTestRun run =
                run_hypothesis_tests(spec, cfg.r0, ms, space, methods, tc);
            if (!run.fit.converged) return;  // counted as a failure
            out.reject.resize(methods.size());
            for (size_t m = 0; m < methods.size(); ++m)
                out.reject[m] = run.outcomes[m].reject;
            if (with_ci_length) {
                ConfidenceInterval ci =
                    ci_invert(spec, ms, space, TestMethod::ArPlug, cfg.ci_grid, tc);
                out.ci_length = ci.length;
            }
            out.failed = false;
        } catch (const Error&) {
            // replication failure; recorded below
        }
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    parallel_for(cfg.B, resolve_workers(cfg.workers), body);

    McReport rep;
    rep.dgp = variant_name(dgp.variant);
    rep.b1 = dgp.b1;
    rep.b2 = dgp.b2;
    rep.n = dgp.n;
    rep.B = cfg.B;
    rep.alpha = cfg.alpha;
    rep.seed = cfg.seed;

    int failures = 0;
    double total_sec = 0.0;
    for (const auto& r : reps) {
        failures += r.failed ? 1 : 0;
        total_sec += r.seconds;
    }
    const int used = cfg.B - failures;
    rep.failed_run = failures > cfg.fail_threshold * cfg.B;
    const double sec_per_rep = total_sec / cfg.B;

    for (size_t m = 0; m < methods.size(); ++m) {
        McCell cell;
        cell.row = method_name(methods[m]);
        int count = 0;
        for (const auto& r : reps)
            if (!r.failed && r.reject[m]) ++count;
        cell.used = used;
        cell.failures = failures;
        cell.value = used > 0 ? 100.0 * count / used : 0.0;
        cell.mc_se = used > 0 ? pct_se(cell.value, used) : 0.0;
        cell.seconds_per_rep = sec_per_rep;
        rep.cells.push_back(cell);
    }
    if (with_ci_length) {
        McCell cell;
        cell.row = "Ave. Len.";
        double sum = 0.0, sumsq = 0.0;
        for (const auto& r : reps)
            if (!r.failed) {
                sum += r.ci_length;
                sumsq += r.ci_length * r.ci_length;
            }
        cell.used = used;
        cell.failures = failures;
        if (used > 0) {
            cell.value = sum / used;
            double var = std::max(sumsq / used - cell.value * cell.value, 0.0);
            cell.mc_se = std::sqrt(var / used);
        }
        cell.seconds_per_rep = sec_per_rep;
        rep.cells.push_back(cell);
    }
    return rep;
}

McReport run_selection_mc(const DgpSpec& dgp, const std::vector<int>& candidates,
                          const McConfig& cfg) {
    if (cfg.B < 1) throw InvalidParameterError("run_selection_mc: B >= 1 required");
    const int p = dgp.p();
    const ModelSpaces spaces = ModelSpaces::defaults(p);
    const int large = *std::max_element(candidates.begin(), candidates.end());

    std::vector<RepSelect> reps(cfg.B);
    auto body = [&](int rep) {
        auto t0 = std::chrono::steady_clock::now();
        RepSelect& out = reps[rep];
        const std::uint64_t rep_seed = derive_seed(cfg.seed, rep);
        try {
            Eigen::MatrixXd W = simulate(dgp, rep_seed);
            MomentSystem ms = make_moment_system(W);
            FitOptions fopts;
            fopts.starts = cfg.starts;
            fopts.seed = rep_seed;
            SelectionReport sel = select_factors(ms, spaces, candidates, fopts);
            out.aic_large = sel.chosen_aic == large;
            out.bic_large = sel.chosen_bic == large;
            out.j_reject = sel.fits.front().j_pvalue < cfg.alpha;
            out.failed = false;
        } catch (const Error&) {
        }
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    parallel_for(cfg.B, resolve_workers(cfg.workers), body);

    McReport rep;
    rep.dgp = variant_name(dgp.variant);
    rep.b1 = dgp.b1;
    rep.b2 = dgp.b2;
    rep.n = dgp.n;
    rep.B = cfg.B;
    rep.alpha = cfg.alpha;
    rep.seed = cfg.seed;

    int failures = 0;
    double total_sec = 0.0;
    for (const auto& r : reps) {
        failures += r.failed ? 1 : 0;
        total_sec += r.seconds;
    }
    const int used = cfg.B - failures;
    rep.failed_run = failures > cfg.fail_threshold * cfg.B;

    auto add_cell = [&](const std::string& row, auto pred) {
        McCell cell;
        cell.row = row;
        int count = 0;
        for (const auto& r : reps)
            if (!r.failed && pred(r)) ++count;
        cell.used = used;
        cell.failures = failures;
        cell.value = used > 0 ? 100.0 * count / used : 0.0;
        cell.mc_se = used > 0 ? pct_se(cell.value, used) : 0.0;
        cell.seconds_per_rep = total_sec / cfg.B;
        rep.cells.push_back(cell);
    };
    add_cell("AIC", [](const RepSelect& r) { return r.aic_large; });
    add_cell("BIC", [](const RepSelect& r) { return r.bic_large; });
    add_cell("J-Test", [](const RepSelect& r) { return r.j_reject; });
    return rep;
}

}  // namespace fwid
