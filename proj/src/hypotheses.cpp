#include "fwid/hypotheses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "fwid/chi2.hpp"
#include "fwid/errors.hpp"
#include "fwid/rng.hpp"

namespace fwid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double guarded_ratio(double num, double den) {
    if (std::fabs(den) < 1e-12 * std::max(1.0, std::fabs(num))) return kNaN;
    return num / den;
}

// Structural functions of a two-factor theta (inverse-map pieces).
struct Struct2F {
    const Eigen::VectorXd& th;
    ThetaLayout L;

    double r1(int j) const { return th[L.rho(j, 1)]; }
    double r2(int j) const { return th[L.rho(j, 2)]; }
    double w(int j) const { return th[L.omega(j)]; }
    double chi() const { return th[L.chi()]; }
    double s12() const { return th[L.sigma12()]; }
    double beta() const { return th[L.beta()]; }
    double d3() const { return beta() * r1(3) - s12() * r2(3); }
    double d4() const { return beta() * r1(4) - s12() * r2(4); }

    double l31() const { return guarded_ratio(chi() * beta() - r2(3) * r2(4), d4()); }
    double l41() const { return guarded_ratio(chi() * beta() - r2(3) * r2(4), d3()); }
    double l32() const { return guarded_ratio(r2(3) * r1(4) - s12() * chi(), d4()); }
    double l42() const { return guarded_ratio(r1(3) * r2(4) - s12() * chi(), d3()); }
    double sigma1sq() const { return guarded_ratio(r1(3) - s12() * l32(), l31()); }
    double signal3() const { return r1(3) * l31() + r2(3) * l32(); }
    double signal4() const { return r1(4) * l41() + r2(4) * l42(); }
};

// Two-factor approach-A beta inverses (all linear in beta).
double beta_inv_fv1(const Struct2F& t, double r0) {
    double num = t.chi() * t.s12() * t.s12() + r0 * t.r2(3) * t.r2(4) -
                 t.s12() * (t.r1(3) * t.r2(4) + t.r2(3) * t.r1(4));
    double den = t.chi() * r0 - t.r1(3) * t.r1(4);
    return guarded_ratio(num, den);
}

double beta_inv_ev3(const Struct2F& t, double r0) {
    double num = t.chi() * t.r2(3) * t.s12() + r0 * t.r2(4) * t.s12() +
                 t.r1(3) * t.r2(3) * t.r2(4) - t.r2(3) * t.r2(3) * t.r1(4) -
                 t.r2(4) * t.s12() * t.w(3);
    double den = t.chi() * t.r1(3) + r0 * t.r1(4) - t.r1(4) * t.w(3);
    return guarded_ratio(num, den);
}

double beta_inv_ev4(const Struct2F& t, double r0) {
    double num = t.chi() * t.r2(4) * t.s12() + r0 * t.r2(3) * t.s12() -
                 t.r1(3) * t.r2(4) * t.r2(4) + t.r2(3) * t.r1(4) * t.r2(4) -
                 t.r2(3) * t.s12() * t.w(4);
    double den = t.chi() * t.r1(4) + r0 * t.r1(3) - t.r1(3) * t.w(4);
    return guarded_ratio(num, den);
}

std::string kind_label(Model model, HypothesisKind k) {
    auto num = [](int v) { return std::to_string(v); };
    if (model == Model::OneFactor) {
        switch (k.family) {
            case HypFamily::FV: return "FV";
            case HypFamily::FL: return "FL(" + num(k.j) + ")";
            case HypFamily::EV: return "EV(" + num(k.j) + ")";
            case HypFamily::StNR: return "StNR(" + num(k.j) + ")";
        }
    }
    switch (k.family) {
        case HypFamily::FV: return "FV" + num(k.j);
        case HypFamily::FL: return "FL(" + num(k.j) + "," + num(k.f) + ")";
        case HypFamily::EV: return "EV(" + num(k.j) + ")";
        case HypFamily::StNR: return "StNR(" + num(k.j) + ")";
    }
    return "?";
}

void validate_kind(Model model, int p, HypothesisKind k) {
    if (model == Model::OneFactor) {
        if (k.family == HypFamily::FV) return;
        int lo = (k.family == HypFamily::FL) ? 2 : 1;
        if (k.j < lo || k.j > p)
            throw InvalidParameterError("registry: hypothesis index out of range");
        return;
    }
    switch (k.family) {
        case HypFamily::FV:
            if (k.j != 1 && k.j != 2)
                throw InvalidParameterError("registry: two-factor FV index must be 1 or 2");
            return;
        case HypFamily::FL:
            if ((k.j != 3 && k.j != 4) || (k.f != 1 && k.f != 2))
                throw InvalidParameterError("registry: two-factor FL must be (3|4, 1|2)");
            return;
        case HypFamily::EV:
        case HypFamily::StNR:
            if (k.j < 1 || k.j > 4)
                throw InvalidParameterError("registry: two-factor EV/StNR index in 1..4");
            return;
    }
}

}  // namespace

bool HypothesisSpec::is_factor_variance() const {
    if (model == Model::OneFactor) return kind.family == HypFamily::FV;
    return kind.family == HypFamily::FV && kind.j == 2;
}

HypothesisSpec registry(Model model, int p, HypothesisKind kind, Approach approach) {
    if (p < min_p(model)) throw InvalidParameterError("registry: p below the model minimum");
    validate_kind(model, p, kind);

    HypothesisSpec spec;
    spec.model = model;
    spec.p = p;
    spec.kind = kind;
    spec.approach = approach;
    spec.name = (model == Model::OneFactor ? "1F " : "2F ") + kind_label(model, kind);
    ThetaLayout L{model, p};

    auto warn_if_small = [](std::vector<std::string>& w, double value, double tol,
                            const std::string& what) {
        if (!(std::fabs(value) > tol)) w.push_back("assumption near violation: " + what);
    };

    if (model == Model::OneFactor) {
        const int j = kind.j;
        switch (kind.family) {
            case HypFamily::FV:
                spec.r_fn = [L](const Eigen::VectorXd& th) { return th[L.beta()]; };
                spec.beta_inverse = [](const Eigen::VectorXd&, double r0) { return r0; };
                if (approach == Approach::B)
                    throw InvalidParameterError("registry: FV tests beta itself; no approach B");
                break;
            case HypFamily::FL:
                spec.assumptions = {"lambda_" + std::to_string(j) + " != 0"};
                spec.r_fn = [L, j](const Eigen::VectorXd& th) {
                    return th[L.rho(j)] / th[L.beta()];
                };
                spec.beta_inverse = [L, j](const Eigen::VectorXd& th, double r0) {
                    return guarded_ratio(th[L.rho(j)], r0);
                };
                spec.swap_coord = L.rho(j);
                spec.swap_inverse = [L](const Eigen::VectorXd& th, double r0) {
                    return th[L.beta()] * r0;
                };
                break;
            case HypFamily::EV:
                if (j >= 2) spec.assumptions = {"lambda_" + std::to_string(j) + " != 0"};
                spec.r_fn = [L, j](const Eigen::VectorXd& th) {
                    if (j == 1) return th[L.omega(1)] - th[L.beta()];
                    double r = th[L.rho(j)];
                    return th[L.omega(j)] - r * r / th[L.beta()];
                };
                spec.beta_inverse = [L, j](const Eigen::VectorXd& th, double r0) {
                    if (j == 1) return th[L.omega(1)] - r0;
                    double r = th[L.rho(j)];
                    return guarded_ratio(r * r, th[L.omega(j)] - r0);
                };
                spec.swap_coord = L.omega(j);
                spec.swap_inverse = [L, j](const Eigen::VectorXd& th, double r0) {
                    if (j == 1) return r0 + th[L.beta()];
                    double r = th[L.rho(j)];
                    return r0 + r * r / th[L.beta()];
                };
                break;
            case HypFamily::StNR:
                if (j >= 2) spec.assumptions = {"lambda_" + std::to_string(j) + " != 0"};
                spec.r_fn = [L, j](const Eigen::VectorXd& th) {
                    double b = th[L.beta()];
                    if (j == 1) return guarded_ratio(b, th[L.omega(1)] - b);
                    double r = th[L.rho(j)];
                    return guarded_ratio(r * r, b * th[L.omega(j)] - r * r);
                };
                spec.beta_inverse = [L, j](const Eigen::VectorXd& th, double r0) {
                    if (j == 1) return guarded_ratio(r0 * th[L.omega(1)], 1.0 + r0);
                    double r = th[L.rho(j)];
                    return guarded_ratio(r * r * (1.0 + r0), r0 * th[L.omega(j)]);
                };
                spec.swap_coord = L.omega(j);
                spec.swap_inverse = [L, j](const Eigen::VectorXd& th, double r0) {
                    double b = th[L.beta()];
                    if (j == 1) return guarded_ratio(b * (1.0 + r0), r0);
                    double r = th[L.rho(j)];
                    return guarded_ratio(r * r * (1.0 + r0), r0 * b);
                };
                break;
        }
        if (!spec.assumptions.empty() && approach == Approach::A) {
            spec.check_assumptions = [L, j, warn_if_small](const Eigen::VectorXd& th) {
                std::vector<std::string> w;
                warn_if_small(w, th[L.rho(j)], 1e-6, "rho_" + std::to_string(j) + " near 0");
                return w;
            };
        }
        return spec;
    }

    // --- two factors ---------------------------------------------------
    auto S = [L](const Eigen::VectorXd& th) { return Struct2F{th, L}; };

    switch (kind.family) {
        case HypFamily::FV:
            if (kind.j == 2) {
                spec.r_fn = [L](const Eigen::VectorXd& th) { return th[L.beta()]; };
                spec.beta_inverse = [](const Eigen::VectorXd&, double r0) { return r0; };
                if (approach == Approach::B)
                    throw InvalidParameterError("registry: FV2 tests beta itself; no approach B");
            } else {
                spec.assumptions = {"lambda_32 != 0", "lambda_42 != 0"};
                spec.r_fn = [S](const Eigen::VectorXd& th) { return S(th).sigma1sq(); };
                spec.beta_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    return beta_inv_fv1(S(th), r0);
                };
                spec.swap_coord = L.rho(3, 1);
                spec.swap_inverse = [S, L](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    double core = t.chi() * t.beta() - t.r2(3) * t.r2(4);
                    double d3 = guarded_ratio(
                        core * (r0 * t.beta() - t.s12() * t.s12()), t.d4());
                    return guarded_ratio(t.s12() * t.r2(3) + d3, t.beta());
                };
                spec.check_assumptions = [S, warn_if_small](const Eigen::VectorXd& th) {
                    std::vector<std::string> w;
                    warn_if_small(w, S(th).l32(), 1e-6, "lambda_32 near 0");
                    warn_if_small(w, S(th).l42(), 1e-6, "lambda_42 near 0");
                    return w;
                };
            }
            break;
        case HypFamily::FL: {
            const int j = kind.j, f = kind.f;
            spec.r_fn = [S, j, f](const Eigen::VectorXd& th) {
                Struct2F t = S(th);
                if (j == 3) return f == 1 ? t.l31() : t.l32();
                return f == 1 ? t.l41() : t.l42();
            };
            if (j == 3 && f == 1) {
                spec.assumptions = {"rho_42 != 0", "lambda_32 != 0"};
                spec.beta_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    return guarded_ratio(t.r2(4) * (r0 * t.s12() - t.r2(3)),
                                         r0 * t.r1(4) - t.chi());
                };
                spec.swap_coord = L.chi();
                spec.swap_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    return guarded_ratio(r0 * t.d4() + t.r2(3) * t.r2(4), t.beta());
                };
            } else if (j == 4 && f == 1) {
                spec.assumptions = {"rho_32 != 0", "lambda_42 != 0"};
                spec.beta_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    return guarded_ratio(t.r2(3) * (r0 * t.s12() - t.r2(4)),
                                         r0 * t.r1(3) - t.chi());
                };
                spec.swap_coord = L.chi();
                spec.swap_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    return guarded_ratio(r0 * t.d3() + t.r2(3) * t.r2(4), t.beta());
                };
            } else if (j == 3 && f == 2) {
                spec.assumptions = {"rho_41 != 0", "lambda_32 != 0"};  // as printed in the table
                spec.beta_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    return guarded_ratio(
                        t.r2(3) * t.r1(4) - t.chi() * t.s12() + r0 * t.r2(4) * t.s12(),
                        r0 * t.r1(4));
                };
                spec.swap_coord = L.rho(3, 2);
                spec.swap_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    return guarded_ratio(r0 * t.d4() + t.s12() * t.chi(), t.r1(4));
                };
            } else {
                spec.assumptions = {"rho_31 != 0", "lambda_42 != 0"};
                spec.beta_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    return guarded_ratio(
                        t.r1(3) * t.r2(4) - t.chi() * t.s12() + r0 * t.r2(3) * t.s12(),
                        r0 * t.r1(3));
                };
                spec.swap_coord = L.rho(4, 2);
                spec.swap_inverse = [S](const Eigen::VectorXd& th, double r0) {
                    Struct2F t = S(th);
                    return guarded_ratio(r0 * t.d3() + t.s12() * t.chi(), t.r1(3));
                };
            }
            spec.check_assumptions = [S, L, j, f, warn_if_small](const Eigen::VectorXd& th) {
                std::vector<std::string> w;
                Struct2F t = S(th);
                if (j == 3 && f == 1) {
                    warn_if_small(w, t.r2(4), 1e-6, "rho_42 near 0");
                    warn_if_small(w, t.l32(), 1e-6, "lambda_32 near 0");
                } else if (j == 4 && f == 1) {
                    warn_if_small(w, t.r2(3), 1e-6, "rho_32 near 0");
                    warn_if_small(w, t.l42(), 1e-6, "lambda_42 near 0");
                } else if (j == 3 && f == 2) {
                    warn_if_small(w, t.r1(4), 1e-6, "rho_41 near 0");
                    warn_if_small(w, t.l32(), 1e-6, "lambda_32 near 0");
                } else {
                    warn_if_small(w, t.r1(3), 1e-6, "rho_31 near 0");
                    warn_if_small(w, t.l42(), 1e-6, "lambda_42 near 0");
                }
                return w;
            };
            break;
        }
        case HypFamily::EV:
        case HypFamily::StNR: {
            const int j = kind.j;
            const bool stnr = kind.family == HypFamily::StNR;
            auto signal = [S, L, j](const Eigen::VectorXd& th) -> double {
                Struct2F t = S(th);
                switch (j) {
                    case 1: return t.sigma1sq();
                    case 2: return t.beta();
                    case 3: return t.signal3();
                    default: return t.signal4();
                }
            };
            spec.r_fn = [signal, L, j, stnr](const Eigen::VectorXd& th) {
                double s = signal(th);
                double noise = th[L.omega(j)] - s;
                return stnr ? guarded_ratio(s, noise) : noise;
            };
            // EV inverts for beta at noise = r0; StNR at noise = omega_j/(1+r0).
            auto ev_inv = [S, L, j](const Eigen::VectorXd& th, double noise) -> double {
                Struct2F t = S(th);
                switch (j) {
                    case 1: return beta_inv_fv1(t, t.w(1) - noise);
                    case 2: return t.w(2) - noise;
                    case 3: return beta_inv_ev3(t, noise);
                    default: return beta_inv_ev4(t, noise);
                }
            };
            if (stnr) {
                spec.beta_inverse = [ev_inv, L, j](const Eigen::VectorXd& th, double r0) {
                    return ev_inv(th, guarded_ratio(th[L.omega(j)], 1.0 + r0));
                };
            } else {
                spec.beta_inverse = ev_inv;
            }
            spec.swap_coord = L.omega(j);
            spec.swap_inverse = [signal, stnr](const Eigen::VectorXd& th, double r0) {
                double s = signal(th);
                return stnr ? guarded_ratio(s * (1.0 + r0), r0) : r0 + s;
            };
            if (j == 1) {
                spec.assumptions = {"lambda_32 != 0", "lambda_42 != 0"};
                spec.check_assumptions = [S, warn_if_small](const Eigen::VectorXd& th) {
                    std::vector<std::string> w;
                    warn_if_small(w, S(th).l32(), 1e-6, "lambda_32 near 0");
                    warn_if_small(w, S(th).l42(), 1e-6, "lambda_42 near 0");
                    return w;
                };
            } else if (j == 3) {
                spec.assumptions = {"rho_41*rho_32 - rho_42*rho_31 != 0", "lambda_32 != 0"};
                spec.check_assumptions = [S, warn_if_small](const Eigen::VectorXd& th) {
                    std::vector<std::string> w;
                    Struct2F t = S(th);
                    warn_if_small(w, t.r1(4) * t.r2(3) - t.r2(4) * t.r1(3), 1e-6,
                                  "rho_41*rho_32 - rho_42*rho_31 near 0");
                    warn_if_small(w, t.l32(), 1e-6, "lambda_32 near 0");
                    return w;
                };
            } else if (j == 4) {
                spec.assumptions = {"rho_31*rho_42 - rho_32*rho_41 != 0", "lambda_42 != 0"};
                spec.check_assumptions = [S, warn_if_small](const Eigen::VectorXd& th) {
                    std::vector<std::string> w;
                    Struct2F t = S(th);
                    warn_if_small(w, t.r1(3) * t.r2(4) - t.r2(3) * t.r1(4), 1e-6,
                                  "rho_31*rho_42 - rho_32*rho_41 near 0");
                    warn_if_small(w, t.l42(), 1e-6, "lambda_42 near 0");
                    return w;
                };
            }
            break;
        }
    }
    if (approach == Approach::B && spec.swap_coord < 0)
        throw InvalidParameterError("registry: no approach-B route for this hypothesis");
    return spec;
}

// ---------------------------------------------------------------------------
// Null-problem coordinate maps
// ---------------------------------------------------------------------------

namespace {

double fd_step(double x) { return 1e-6 * (1.0 + std::fabs(x)); }

}  // namespace

ThetaMap null_map(const HypothesisSpec& spec, double r0, const ParamSpace& space) {
    const int q = theta_dim(spec.model, spec.p);
    ThetaMap map;
    map.theta_dim = q;
    map.feasibility_weight = space.feasibility_weight;
    map.variance_floor = space.variance_floor;

    if (spec.approach == Approach::A) {
        const bool fv = spec.is_factor_variance();
        map.lb = space.lower.head(q - 1);
        map.ub = space.upper.head(q - 1);
        auto binv = spec.beta_inverse;
        map.to_theta = [q, r0, binv, fv](const Eigen::VectorXd& nu, Eigen::VectorXd& th) {
            th.resize(q);
            th.head(q - 1) = nu;
            th[q - 1] = 0.0;
            th[q - 1] = fv ? r0 : binv(th, r0);
            return std::isfinite(th[q - 1]);
        };
        map.dtheta_dnu = [q, r0, binv, fv](const Eigen::VectorXd& nu, Eigen::MatrixXd& J) {
            J.setZero(q, q - 1);
            J.topLeftCorner(q - 1, q - 1).setIdentity();
            if (fv) return true;
            Eigen::VectorXd th(q);
            th.head(q - 1) = nu;
            th[q - 1] = 0.0;
            for (int i = 0; i < q - 1; ++i) {
                const double h = fd_step(nu[i]);
                const double save = th[i];
                th[i] = save + h;
                const double up = binv(th, r0);
                th[i] = save - h;
                const double dn = binv(th, r0);
                th[i] = save;
                if (!std::isfinite(up) || !std::isfinite(dn)) return false;
                J(q - 1, i) = (up - dn) / (2.0 * h);
            }
            return true;
        };
        map.nu_of_theta = [q](const Eigen::VectorXd& th) {
            return Eigen::VectorXd(th.head(q - 1));
        };
        return map;
    }

    // Approach B: nu keeps every theta coordinate except the swapped one
    // (beta included, order preserved).
    const int sc = spec.swap_coord;
    std::vector<int> idx;
    idx.reserve(q - 1);
    for (int i = 0; i < q; ++i)
        if (i != sc) idx.push_back(i);
    map.lb.resize(q - 1);
    map.ub.resize(q - 1);
    for (int i = 0; i < q - 1; ++i) {
        map.lb[i] = space.lower[idx[i]];
        map.ub[i] = space.upper[idx[i]];
    }
    auto sinv = spec.swap_inverse;
    map.to_theta = [q, sc, idx, r0, sinv](const Eigen::VectorXd& nu, Eigen::VectorXd& th) {
        th.resize(q);
        for (int i = 0; i < q - 1; ++i) th[idx[i]] = nu[i];
        th[sc] = 0.0;
        th[sc] = sinv(th, r0);
        return std::isfinite(th[sc]);
    };
    map.dtheta_dnu = [q, sc, idx, r0, sinv](const Eigen::VectorXd& nu, Eigen::MatrixXd& J) {
        J.setZero(q, q - 1);
        Eigen::VectorXd th(q);
        for (int i = 0; i < q - 1; ++i) th[idx[i]] = nu[i];
        th[sc] = 0.0;
        for (int i = 0; i < q - 1; ++i) {
            J(idx[i], i) = 1.0;
            const double h = fd_step(nu[i]);
            const double save = th[idx[i]];
            th[idx[i]] = save + h;
            const double up = sinv(th, r0);
            th[idx[i]] = save - h;
            const double dn = sinv(th, r0);
            th[idx[i]] = save;
            if (!std::isfinite(up) || !std::isfinite(dn)) return false;
            J(sc, i) = (up - dn) / (2.0 * h);
        }
        return true;
    };
    map.nu_of_theta = [q, idx](const Eigen::VectorXd& th) {
        Eigen::VectorXd nu(q - 1);
        for (int i = 0; i < q - 1; ++i) nu[i] = th[idx[i]];
        return nu;
    };
    return map;
}

Eigen::VectorXd tested_direction(const HypothesisSpec& spec, double r0,
                                 const Eigen::VectorXd& nu) {
    const int q = theta_dim(spec.model, spec.p);
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(q);
    const double h = fd_step(r0);
    if (spec.approach == Approach::A) {
        if (spec.is_factor_variance()) {
            dir[q - 1] = 1.0;
            return dir;
        }
        Eigen::VectorXd th(q);
        th.head(q - 1) = nu;
        th[q - 1] = 0.0;
        dir[q - 1] = (spec.beta_inverse(th, r0 + h) - spec.beta_inverse(th, r0 - h)) / (2.0 * h);
        return dir;
    }
    const int sc = spec.swap_coord;
    Eigen::VectorXd th(q);
    int at = 0;
    for (int i = 0; i < q; ++i) th[i] = (i == sc) ? 0.0 : nu[at++];
    dir[sc] = (spec.swap_inverse(th, r0 + h) - spec.swap_inverse(th, r0 - h)) / (2.0 * h);
    return dir;
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

FitResult minimize_null(Model model, const MomentSystem& ms, const ParamSpace& space,
                        const HypothesisSpec& spec, double r0, const TestConfig& cfg) {
    if (spec.is_factor_variance() &&
        (r0 < space.beta_min() || r0 > space.beta_max()))
        throw InfeasibleNullError("minimize_null: hypothesized beta outside the parameter box");
    ThetaMap map = null_map(spec, r0, space);
    FitOptions fopts;
    fopts.starts = cfg.starts;
    fopts.seed = cfg.seed;
    fopts.lm = cfg.lm;
    return minimize_mapped(model, ms, map, informed_theta(model, ms, space), fopts);
}

FitResult minimize_null_fixed_beta(Model model, const MomentSystem& ms,
                                   const ParamSpace& space, const HypothesisSpec& spec,
                                   double r0, double beta0, const TestConfig& cfg) {
    if (spec.approach != Approach::B)
        throw InvalidParameterError("minimize_null_fixed_beta: approach-B specs only");
    if (beta0 < space.beta_min() || beta0 > space.beta_max())
        throw InfeasibleNullError("minimize_null_fixed_beta: beta0 outside the parameter box");
    ThetaMap map = null_map(spec, r0, space);
    const int last = map.nu_dim() - 1;  // beta stays the trailing coordinate
    map.lb[last] = beta0;
    map.ub[last] = beta0;
    FitOptions fopts;
    fopts.starts = cfg.starts;
    fopts.seed = cfg.seed;
    fopts.lm = cfg.lm;
    Eigen::VectorXd start = informed_theta(model, ms, space);
    start[theta_dim(model, ms.p) - 1] = beta0;
    return minimize_mapped(model, ms, map, start, fopts);
}

HypothesisKind parse_hypothesis(Model model, const std::string& text) {
    std::string t;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c)))
            t.push_back(std::tolower(static_cast<unsigned char>(c)));
    auto family = [&](const std::string& prefix, HypFamily fam,
                      HypothesisKind& out) {
        if (!t.starts_with(prefix)) return false;
        std::string rest = t.substr(prefix.size());
        out.family = fam;
        if (fam == HypFamily::FL && model == Model::TwoFactor) {
            if (rest.size() != 2 || !std::isdigit(rest[0]) || !std::isdigit(rest[1]))
                throw InvalidParameterError("hypothesis: expected e.g. fl31, got " + text);
            out.j = rest[0] - '0';
            out.f = rest[1] - '0';
            return true;
        }
        if (rest.empty()) {
            out.j = 0;
            return true;
        }
        out.j = std::stoi(rest);
        return true;
    };
    HypothesisKind k;
    if (family("stnr", HypFamily::StNR, k) || family("fv", HypFamily::FV, k) ||
        family("fl", HypFamily::FL, k) || family("ev", HypFamily::EV, k))
        return k;
    throw InvalidParameterError("unknown hypothesis: " + text);
}

std::string method_name(TestMethod m) {
    switch (m) {
        case TestMethod::ArPlug: return "AR-Plug";
        case TestMethod::ArProj: return "AR-Proj";
        case TestMethod::KPlug: return "K-Plug";
        case TestMethod::ClrPlug: return "CLR-Plug";
    }
    return "?";
}

TestMethod parse_method(const std::string& text) {
    std::string t;
    for (char c : text) t.push_back(std::tolower(static_cast<unsigned char>(c)));
    std::erase(t, '-');
    std::erase(t, '_');
    if (t == "arplug") return TestMethod::ArPlug;
    if (t == "arproj") return TestMethod::ArProj;
    if (t == "kplug") return TestMethod::KPlug;
    if (t == "clrplug") return TestMethod::ClrPlug;
    throw InvalidParameterError("unknown test method: " + text);
}

HypothesisTestRun run_hypothesis_tests(const HypothesisSpec& spec, double r0,
                                       const MomentSystem& ms, const ParamSpace& space,
                                       const std::vector<TestMethod>& methods,
                                       const TestConfig& cfg) {
    const Model model = spec.model;
    const bool approach_b = spec.approach == Approach::B;
    bool score_needed = false;
    for (TestMethod m : methods) {
        if (m == TestMethod::KPlug || m == TestMethod::ClrPlug) {
            if (approach_b)
                throw InvalidParameterError(
                    "test_hypothesis: K-Plug/CLR-Plug require an approach-A hypothesis");
            score_needed = true;
        }
    }

    HypothesisTestRun run;
    run.fit = minimize_null(model, ms, space, spec, r0, cfg);
    const FitResult& fit = run.fit;
    const DfInfo d = df_info(model, ms.p, approach_b);

    std::vector<std::string> warnings;
    if (spec.check_assumptions) warnings = spec.check_assumptions(fit.theta);
    if (!fit.converged) warnings.push_back("optimizer: null fit did not converge");

    SubvectorScore sc;
    if (score_needed) {
        ThetaMap map = null_map(spec, r0, space);
        Eigen::MatrixXd D = jacobian_theta(model, ms.p, fit.theta).D;
        Eigen::MatrixXd Jnu;
        if (!map.dtheta_dnu(fit.nu, Jnu))
            throw SingularMomentError("test_hypothesis: map Jacobian failed at the optimum");
        Eigen::VectorXd dir = tested_direction(spec, r0, fit.nu);
        Eigen::MatrixXd Nw = ms.whiten(Eigen::MatrixXd(D * Jnu));
        Eigen::VectorXd cw = ms.whiten(Eigen::VectorXd(D * dir));
        Eigen::VectorXd w = ms.whiten(gbar(model, fit.theta, ms));
        sc = subvector_score(Nw, cw, w, ms.n);
    }

    for (TestMethod method : methods) {
        TestOutcome out;
        out.alpha = cfg.alpha;
        out.method = method_name(method);
        out.warnings = warnings;
        switch (method) {
            case TestMethod::ArPlug:
                out.statistic = fit.qmin;
                out.df = d.ar_plug_df();
                out.critical_value = chi2_quantile(1.0 - cfg.alpha, out.df);
                break;
            case TestMethod::ArProj:
                out.statistic = fit.qmin;
                out.df = d.k;
                out.critical_value = chi2_quantile(1.0 - cfg.alpha, out.df);
                break;
            case TestMethod::KPlug:
                out.statistic = sc.k_stat;
                out.df = 1;
                out.rk = sc.rk;
                out.critical_value = chi2_quantile(1.0 - cfg.alpha, 1);
                break;
            case TestMethod::ClrPlug: {
                TestOutcome clr =
                    clr_conditional(fit.qmin, sc.k_stat, sc.rk, 1, d.y2_df(), cfg.alpha,
                                    cfg.clr_draws, splitmix64(cfg.seed ^ 0xc1a5c1a5ULL));
                out.statistic = clr.statistic;
                out.critical_value = clr.critical_value;
                out.rk = sc.rk;
                out.df = 0;
                break;
            }
        }
        out.reject = out.statistic > out.critical_value;
        run.outcomes.push_back(out);
    }
    return run;
}

TestOutcome test_hypothesis(const HypothesisSpec& spec, double r0, const MomentSystem& ms,
                            const ParamSpace& space, TestMethod method,
                            const TestConfig& cfg) {
    return run_hypothesis_tests(spec, r0, ms, space, {method}, cfg).outcomes.front();
}

// ---------------------------------------------------------------------------
// Confidence intervals by test inversion
// ---------------------------------------------------------------------------

ConfidenceInterval ci_invert(const HypothesisSpec& spec, const MomentSystem& ms,
                             const ParamSpace& space, TestMethod method,
                             const GridSpec& grid, const TestConfig& cfg) {
    GridSpec g = grid;
    if (g.from_space) {
        if (!spec.is_factor_variance())
            throw InvalidParameterError(
                "ci_invert: explicit grid bounds required for non-FV hypotheses");
        g.lo = space.beta_min();
        g.hi = space.beta_max();
    }
    if (g.points < 2 || !(g.hi > g.lo))
        throw InvalidParameterError("ci_invert: bad grid specification");

    ConfidenceInterval ci;
    ci.grid.resize(g.points);
    ci.accepted.resize(g.points);
    auto accepts = [&](double r0) {
        return !test_hypothesis(spec, r0, ms, space, method, cfg).reject;
    };
    for (int i = 0; i < g.points; ++i) {
        ci.grid[i] = g.lo + (g.hi - g.lo) * i / (g.points - 1);
        ci.accepted[i] = accepts(ci.grid[i]);
    }

    const double resolution = 1e-3 * (g.hi - g.lo);
    // Bisect an accept/reject boundary down to the resolution.
    auto refine = [&](double a, double b, bool a_accepts) {
        while (b - a > resolution) {
            double mid = 0.5 * (a + b);
            if (accepts(mid) == a_accepts)
                a = mid;
            else
                b = mid;
        }
        return 0.5 * (a + b);
    };

    for (int i = 0; i < g.points;) {
        if (!ci.accepted[i]) {
            ++i;
            continue;
        }
        int jend = i;
        while (jend + 1 < g.points && ci.accepted[jend + 1]) ++jend;
        double left = (i == 0) ? g.lo : refine(ci.grid[i - 1], ci.grid[i], false);
        double right =
            (jend == g.points - 1) ? g.hi : refine(ci.grid[jend], ci.grid[jend + 1], true);
        if (i == 0) ci.truncated_lo = true;
        if (jend == g.points - 1) ci.truncated_hi = true;
        ci.intervals.emplace_back(left, right);
        i = jend + 1;
    }
    ci.empty = ci.intervals.empty();
    ci.disconnected = ci.intervals.size() > 1;
    for (const auto& iv : ci.intervals) ci.length += iv.second - iv.first;
    if (!ci.empty) ci.hull = {ci.intervals.front().first, ci.intervals.back().second};
    return ci;
}

}  // namespace fwid
