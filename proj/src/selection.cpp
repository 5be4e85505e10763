#include "fwid/selection.hpp"

#include <algorithm>
#include <cmath>

#include "fwid/chi2.hpp"
#include "fwid/errors.hpp"

namespace fwid {

ModelSpaces ModelSpaces::defaults(int p) {
    ModelSpaces s;
    s.one_factor = ParamSpace::defaults(Model::OneFactor, p);
    if (p >= 5) s.two_factor = ParamSpace::defaults(Model::TwoFactor, p);
    return s;
}

SelectionReport select_factors(const MomentSystem& ms, const ModelSpaces& spaces,
                               const std::vector<int>& candidates, const FitOptions& opts) {
    if (candidates.size() < 2)
        throw InvalidParameterError("select_factors: need at least two candidates");
    std::vector<int> cands = candidates;
    std::sort(cands.begin(), cands.end());
    for (int c : cands) {
        if (c < 0 || c > 2)
            throw InvalidParameterError("select_factors: candidates must be in {0,1,2}");
        if (c == 2 && ms.p < 5)
            throw InvalidParameterError("select_factors: two factors need p >= 5");
    }

    SelectionReport rep;
    rep.n = ms.n;
    const int k = ms.k();
    const double logn = std::log(static_cast<double>(ms.n));
    for (int c : cands) {
        ModelFit f;
        f.factors = c;
        f.k = k;
        if (c == 0) {
            f.q = ms.p;
            f.j_stat = zero_factor_qmin(ms);
        } else {
            Model model = c == 1 ? Model::OneFactor : Model::TwoFactor;
            f.q = theta_dim(model, ms.p);
            const ParamSpace& sp = c == 1 ? spaces.one_factor : spaces.two_factor;
            f.j_stat = minimize_full(model, ms, sp, opts).qmin;
        }
        const int over = k - f.q;
        f.just_identified = over == 0;
        f.aic = f.j_stat - 2.0 * over;
        f.bic = f.j_stat - over * logn;
        f.j_pvalue = over > 0 ? 1.0 - chi2_cdf(f.j_stat, over) : 1.0;
        rep.fits.push_back(f);
    }

    auto pick = [&](auto crit) {
        int best = rep.fits.front().factors;
        double best_val = crit(rep.fits.front());
        for (const auto& f : rep.fits)
            if (crit(f) < best_val) {
                best_val = crit(f);
                best = f.factors;
            }
        return best;
    };
    rep.chosen_aic = pick([](const ModelFit& f) { return f.aic; });
    rep.chosen_bic = pick([](const ModelFit& f) { return f.bic; });
    return rep;
}

}  // namespace fwid
