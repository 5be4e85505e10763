#pragma once

#include <vector>

#include "fwid/gmm.hpp"
#include "fwid/robust_tests.hpp"

namespace fwid {

// Factor-count estimation by GMM model-selection criteria (downward MSC
// with AIC/BIC penalties on the overidentifying degrees of freedom) plus
// the J-test of the smaller candidate.

struct ModelFit {
    int factors = 0;
    double j_stat = 0.0;
    int k = 0;
    int q = 0;
    double aic = 0.0;       // J - 2 (k - q)
    double bic = 0.0;       // J - (k - q) ln n
    double j_pvalue = 1.0;  // from chi2_{k-q}; 1 when just identified
    bool just_identified = false;
};

struct SelectionReport {
    std::vector<ModelFit> fits;  // per candidate, ascending factor count
    int chosen_aic = 0;
    int chosen_bic = 0;
    int n = 0;
};

// Parameter boxes for the iterative candidates (the zero-factor fit is
// closed form and needs none).
struct ModelSpaces {
    ParamSpace one_factor;
    ParamSpace two_factor;
    static ModelSpaces defaults(int p);
};

SelectionReport select_factors(const MomentSystem& ms, const ModelSpaces& spaces,
                               const std::vector<int>& candidates,
                               const FitOptions& opts = {});

}  // namespace fwid
