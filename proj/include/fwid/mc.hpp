#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fwid/hypotheses.hpp"
#include "fwid/selection.hpp"
#include "fwid/simulate.hpp"

namespace fwid {

struct McConfig {
    int B = 1000;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    int workers = 0;  // 0: FWID_WORKERS env var, else hardware concurrency
    int starts = 10;
    int clr_draws = 10000;
    double fail_threshold = 0.02;  // fraction of failed replications that fails the run
    double r0 = 1.5;               // hypothesized factor variance for power cells
    GridSpec ci_grid;              // used when CI lengths are requested
};

struct McCell {
    std::string row;     // method name, "Ave. Len.", "AIC", "BIC", "J-Test"
    double value = 0.0;  // rejection/selection percent, or average CI length
    double mc_se = 0.0;  // on the same scale as value
    int failures = 0;
    int used = 0;              // replications entering the cell
    double seconds_per_rep = 0.0;
};

struct McReport {
    std::string dgp;
    double b1 = 0.0, b2 = 0.0;
    int n = 0, B = 0;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::vector<McCell> cells;
    bool failed_run = false;  // failure fraction above the threshold
};

// Rejection-rate cells (and optionally the average AR-Plug CI length) for
// one DGP point. The tested restriction is the factor variance (FV for a
// one-factor design, FV2 for a two-factor design) at cfg.r0.
McReport run_power_mc(const DgpSpec& dgp, const std::vector<TestMethod>& methods,
                      bool with_ci_length, const McConfig& cfg);

// AIC/BIC selection frequencies (percent choosing the larger candidate)
// and the J-test rejection rate of the smaller candidate.
McReport run_selection_mc(const DgpSpec& dgp, const std::vector<int>& candidates,
                          const McConfig& cfg);

int resolve_workers(int requested);

}  // namespace fwid
