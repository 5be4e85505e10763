// Command-line interface: DGP simulation, Monte Carlo tables, hypothesis
// tests, confidence intervals, factor-count selection, and point fits.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fwid/chi2.hpp"
#include "fwid/errors.hpp"
#include "fwid/io.hpp"
#include "fwid/mc.hpp"
#include "fwid/selection.hpp"

using namespace fwid;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitFailedRun = 3;

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

Model parse_model(const std::string& text) {
    if (text == "1f") return Model::OneFactor;
    if (text == "2f") return Model::TwoFactor;
    throw InvalidParameterError("--model must be 1f or 2f");
}

void print_outcome(const TestOutcome& out) {
    std::cout << out.method << ": statistic=" << out.statistic
              << " critical=" << out.critical_value;
    if (out.df > 0) std::cout << " df=" << out.df;
    if (out.rk > 0) std::cout << " rk=" << out.rk;
    std::cout << (out.reject ? "  REJECT" : "  accept") << " (alpha=" << out.alpha << ")\n";
    for (const auto& w : out.warnings) std::cout << "  warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identification-robust inference in one- and two-factor models"};
    app.set_config("--config");
    app.require_subcommand(1);

    // ---- simulate -------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "draw a dataset from a design");
    std::string sim_variant = "1f-spec1", sim_out;
    double sim_b1 = 0.0, sim_b2 = 0.0;
    int sim_n = 500;
    std::uint64_t sim_seed = 0;
    sim->add_option("--variant", sim_variant, "1f-spec1|1f-spec2|2f-spec1|2f-spec2|2f-spec3");
    sim->add_option("--b", sim_b1, "drift constant b (or b1)");
    sim->add_option("--b2", sim_b2, "second drift constant");
    sim->add_option("--n", sim_n, "sample size");
    sim->add_option("--seed", sim_seed)->required();
    sim->add_option("--out", sim_out, "output CSV path (default stdout)");

    // ---- mc -------------------------------------------------------------
    auto* mc = app.add_subcommand("mc", "Monte Carlo rejection/selection tables");
    std::string mc_table = "power", mc_variant = "1f-spec1", mc_tests = "ar-plug,ar-proj";
    std::string mc_blist = "0,1,2,5,10", mc_cands = "0,1", mc_out;
    double mc_b2 = 0.0, mc_alpha = 0.05, mc_r0 = 1.5, mc_cilo = 0.0, mc_cihi = 0.0;
    int mc_B = 1000, mc_n = 500, mc_workers = 0, mc_starts = 10, mc_clr = 10000,
        mc_cipoints = 200;
    bool mc_ci = false;
    std::uint64_t mc_seed = 0;
    mc->add_option("--table", mc_table, "power|selection");
    mc->add_option("--variant", mc_variant);
    mc->add_option("--b-list", mc_blist, "comma-separated drift values");
    mc->add_option("--b2", mc_b2);
    mc->add_option("--tests", mc_tests, "comma-separated methods for power tables");
    mc->add_option("--candidates", mc_cands, "factor counts for selection tables");
    mc->add_flag("--ci", mc_ci, "add the average AR-Plug CI length row");
    mc->add_option("--r0", mc_r0, "hypothesized factor variance");
    mc->add_option("--B", mc_B, "replications");
    mc->add_option("--n", mc_n);
    mc->add_option("--alpha", mc_alpha);
    mc->add_option("--seed", mc_seed)->required();
    mc->add_option("--workers", mc_workers, "0 = FWID_WORKERS env or hardware");
    mc->add_option("--starts", mc_starts);
    mc->add_option("--clr-draws", mc_clr);
    mc->add_option("--ci-lo", mc_cilo, "CI grid lower bound (0 = model default)");
    mc->add_option("--ci-hi", mc_cihi, "CI grid upper bound (0 = model default)");
    mc->add_option("--ci-points", mc_cipoints);
    mc->add_option("--out", mc_out, "output prefix for .cells.csv and .table.txt");

    // ---- test -----------------------------------------------------------
    auto* tst = app.add_subcommand("test", "test one hypothesis on a dataset");
    std::string t_data, t_model = "1f", t_hyp = "fv", t_method = "ar-plug",
                t_approach = "A";
    double t_r0 = 1.0, t_alpha = 0.05, t_beta_min = 0.01, t_beta_max = 10.0;
    int t_starts = 10, t_clr = 10000;
    std::uint64_t t_seed = 20240501;
    tst->add_option("--data", t_data)->required();
    tst->add_option("--model", t_model, "1f|2f");
    tst->add_option("--hypothesis", t_hyp, "fv, fl3, ev1, stnr2, fv2, fl31, ...");
    tst->add_option("--approach", t_approach, "A|B");
    tst->add_option("--r0", t_r0)->required();
    tst->add_option("--method", t_method, "ar-plug|ar-proj|k-plug|clr-plug");
    tst->add_option("--alpha", t_alpha);
    tst->add_option("--seed", t_seed);
    tst->add_option("--starts", t_starts);
    tst->add_option("--clr-draws", t_clr);
    tst->add_option("--beta-min", t_beta_min);
    tst->add_option("--beta-max", t_beta_max);

    // ---- ci -------------------------------------------------------------
    auto* civ = app.add_subcommand("ci", "confidence interval by test inversion");
    std::string c_data, c_model = "1f", c_hyp = "fv", c_method = "ar-plug",
                c_approach = "A";
    double c_alpha = 0.05, c_lo = 0.0, c_hi = 0.0, c_beta_min = 0.01, c_beta_max = 10.0;
    int c_points = 200, c_starts = 10, c_clr = 10000;
    std::uint64_t c_seed = 20240501;
    civ->add_option("--data", c_data)->required();
    civ->add_option("--model", c_model);
    civ->add_option("--hypothesis", c_hyp);
    civ->add_option("--approach", c_approach);
    civ->add_option("--method", c_method);
    civ->add_option("--alpha", c_alpha);
    civ->add_option("--grid-lo", c_lo, "0 with an FV hypothesis = beta box");
    civ->add_option("--grid-hi", c_hi);
    civ->add_option("--grid-points", c_points);
    civ->add_option("--seed", c_seed);
    civ->add_option("--starts", c_starts);
    civ->add_option("--clr-draws", c_clr);
    civ->add_option("--beta-min", c_beta_min);
    civ->add_option("--beta-max", c_beta_max);

    // ---- select ---------------------------------------------------------
    auto* sel = app.add_subcommand("select", "estimate the number of factors");
    std::string s_data, s_cands = "0,1";
    int s_starts = 10;
    std::uint64_t s_seed = 20240501;
    sel->add_option("--data", s_data)->required();
    sel->add_option("--candidates", s_cands, "0,1 or 1,2");
    sel->add_option("--starts", s_starts);
    sel->add_option("--seed", s_seed);

    // ---- fit ------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "full GMM point fit");
    std::string f_data, f_model = "1f";
    int f_starts = 10;
    std::uint64_t f_seed = 20240501;
    fit->add_option("--data", f_data)->required();
    fit->add_option("--model", f_model);
    fit->add_option("--starts", f_starts);
    fit->add_option("--seed", f_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            DgpSpec dgp;
            dgp.variant = parse_variant(sim_variant);
            dgp.b1 = sim_b1;
            dgp.b2 = sim_b2;
            dgp.n = sim_n;
            Eigen::MatrixXd W = simulate(dgp, sim_seed);
            std::vector<std::string> cols;
            for (int j = 1; j <= dgp.p(); ++j) cols.push_back("W" + std::to_string(j));
            if (sim_out.empty()) {
                write_dataset(std::cout, W, cols);
            } else {
                std::ofstream out(sim_out);
                if (!out) throw IngestError("cannot write " + sim_out);
                write_dataset(out, W, cols);
            }
            return 0;
        }

        if (*mc) {
            DgpSpec dgp;
            dgp.variant = parse_variant(mc_variant);
            dgp.b2 = mc_b2;
            dgp.n = mc_n;
            McConfig cfg;
            cfg.B = mc_B;
            cfg.alpha = mc_alpha;
            cfg.seed = mc_seed;
            cfg.workers = mc_workers;
            cfg.starts = mc_starts;
            cfg.clr_draws = mc_clr;
            cfg.r0 = mc_r0;
            // One-factor tables invert the factor variance over [0.01, 4];
            // two-factor tables use the full beta box [0.01, 10].
            cfg.ci_grid.from_space = false;
            cfg.ci_grid.lo = mc_cilo > 0.0 ? mc_cilo : 0.01;
            cfg.ci_grid.hi = mc_cihi > 0.0 ? mc_cihi
                             : (dgp.model() == Model::OneFactor ? 4.0 : 10.0);
            cfg.ci_grid.points = mc_cipoints;

            std::vector<McReport> columns;
            bool any_failed = false;
            for (const std::string& btxt : split_csv(mc_blist)) {
                dgp.b1 = std::stod(btxt);
                McReport rep;
                if (mc_table == "selection") {
                    std::vector<int> cands;
                    for (const auto& c : split_csv(mc_cands)) cands.push_back(std::stoi(c));
                    rep = run_selection_mc(dgp, cands, cfg);
                } else {
                    std::vector<TestMethod> methods;
                    for (const auto& m : split_csv(mc_tests))
                        methods.push_back(parse_method(m));
                    rep = run_power_mc(dgp, methods, mc_ci, cfg);
                }
                any_failed = any_failed || rep.failed_run;
                columns.push_back(std::move(rep));
            }
            std::ostringstream title;
            if (mc_table == "selection")
                title << "Factor-count selection frequencies, " << mc_variant;
            else
                title << "Rejection probabilities of nominal " << mc_alpha * 100
                      << "% tests, " << mc_variant << ", H0: factor variance = " << mc_r0;
            McTable table = assemble_table(title.str(), columns);
            write_text_table(std::cout, table);
            if (!mc_out.empty()) {
                std::ofstream cells(mc_out + ".cells.csv");
                std::ofstream text(mc_out + ".table.txt");
                if (!cells || !text) throw IngestError("cannot write outputs at " + mc_out);
                write_cells_csv(cells, table);
                write_text_table(text, table);
            }
            if (any_failed) {
                std::cerr << "error: more than 2% of replications failed in a cell\n";
                return kExitFailedRun;
            }
            return 0;
        }

        if (*tst || *civ) {
            const bool is_test = tst->parsed();
            const std::string data = is_test ? t_data : c_data;
            Model model = parse_model(is_test ? t_model : c_model);
            MomentSystem ms = ingest(data);
            if (ms.p < min_p(model))
                throw InvalidParameterError("dataset has too few columns for the model");
            ParamSpace space =
                ParamSpace::defaults(model, ms.p, is_test ? t_beta_min : c_beta_min,
                                     is_test ? t_beta_max : c_beta_max);
            const std::string htxt = is_test ? t_hyp : c_hyp;
            const std::string atxt = is_test ? t_approach : c_approach;
            Approach approach = (atxt == "B" || atxt == "b") ? Approach::B : Approach::A;
            HypothesisSpec spec =
                registry(model, ms.p, parse_hypothesis(model, htxt), approach);
            TestConfig tc;
            tc.alpha = is_test ? t_alpha : c_alpha;
            tc.seed = is_test ? t_seed : c_seed;
            tc.starts = is_test ? t_starts : c_starts;
            tc.clr_draws = is_test ? t_clr : c_clr;
            if (is_test) {
                TestOutcome out =
                    test_hypothesis(spec, t_r0, ms, space, parse_method(t_method), tc);
                std::cout << spec.name << "  H0: r = " << t_r0 << '\n';
                print_outcome(out);
            } else {
                GridSpec grid;
                if (c_lo != 0.0 || c_hi != 0.0) {
                    grid.from_space = false;
                    grid.lo = c_lo;
                    grid.hi = c_hi;
                }
                grid.points = c_points;
                ConfidenceInterval ci =
                    ci_invert(spec, ms, space, parse_method(c_method), grid, tc);
                std::cout << spec.name << " " << (1.0 - tc.alpha) * 100
                          << "% CI: " << format_interval(ci) << '\n';
            }
            return 0;
        }

        if (*sel) {
            MomentSystem ms = ingest(s_data);
            std::vector<int> cands;
            for (const auto& c : split_csv(s_cands)) cands.push_back(std::stoi(c));
            FitOptions opts;
            opts.starts = s_starts;
            opts.seed = s_seed;
            SelectionReport rep =
                select_factors(ms, ModelSpaces::defaults(ms.p), cands, opts);
            std::cout << "factors  J-stat    k   q   AIC       BIC       J p-value\n";
            for (const auto& f : rep.fits) {
                std::cout << f.factors << "        " << format_cell_value(f.j_stat)
                          << "\t  " << f.k << "  " << f.q << "  "
                          << format_cell_value(f.aic) << "\t" << format_cell_value(f.bic)
                          << "\t"
                          << (f.just_identified ? "just identified"
                                                : format_cell_value(f.j_pvalue))
                          << '\n';
            }
            std::cout << "chosen: AIC -> " << rep.chosen_aic << " factor(s), BIC -> "
                      << rep.chosen_bic << " factor(s)\n";
            return 0;
        }

        if (*fit) {
            MomentSystem ms = ingest(f_data);
            Model model = parse_model(f_model);
            if (ms.p < min_p(model))
                throw InvalidParameterError("dataset has too few columns for the model");
            ParamSpace space = ParamSpace::defaults(model, ms.p);
            FitOptions opts;
            opts.starts = f_starts;
            opts.seed = f_seed;
            FitResult res = minimize_full(model, ms, space, opts);
            std::cout << "qmin=" << res.qmin << " converged=" << res.converged
                      << " starts=" << res.starts_used << '\n';
            const int k = ms.k(), q = theta_dim(model, ms.p);
            if (k > q)
                std::cout << "J-test p-value: "
                          << format_cell_value(1.0 - chi2_cdf(res.qmin, k - q)) << '\n';
            std::cout << "theta: " << res.theta.transpose() << '\n';
            if (model == Model::OneFactor) {
                auto inv = invert_1f(OneFactorTheta::from_vector(res.theta));
                std::cout << "lambda: " << inv.gamma.lambda.transpose() << '\n'
                          << "sigma2: " << inv.gamma.sigma2 << '\n'
                          << "phi: " << inv.gamma.phi.transpose() << '\n'
                          << "structurally valid: " << (inv.valid ? "yes" : "no") << '\n';
            } else {
                auto inv = invert_2f(TwoFactorTheta::from_vector(res.theta));
                std::cout << "Lambda:\n"
                          << inv.gamma.Lambda << "\nSigma:\n"
                          << inv.gamma.Sigma << "\nphi: " << inv.gamma.phi.transpose()
                          << '\n'
                          << "structurally valid: " << (inv.valid ? "yes" : "no") << '\n';
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
