// xtreat command-line tool: estimation runs, effect bands, simulation and
// coverage experiments, and heavy-tail diagnostics. All outputs are plain
// CSV/JSON tables with a parameter header; nothing is rendered.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xtreat/xtreat.hpp"

namespace fs = std::filesystem;
using namespace xtreat;

namespace {

struct CommonOpts {
    std::string input;
    std::string output_dir = ".";
    std::string format = "both";
    std::vector<double> t_grid = default_t_grid();
    std::vector<double> alphas = {0.999};
    std::string kernel = "epanechnikov";
    std::string gamma_method = "hill";
    std::string weights = "kernel";
    std::optional<double> bandwidth;
    std::optional<int> k_override;
    int J = 8;
    std::uint64_t seed = 12345;
};

KernelShape parse_kernel(const std::string& s) {
    if (s == "epanechnikov") return KernelShape::Epanechnikov;
    if (s == "biweight") return KernelShape::Biweight;
    if (s == "triangular") return KernelShape::Triangular;
    throw std::invalid_argument("unknown kernel '" + s + "'");
}

GammaMethod parse_method(const std::string& s) {
    if (s == "hill") return GammaMethod::Hill;
    if (s == "pickands") return GammaMethod::Pickands;
    throw std::invalid_argument("unknown gamma method '" + s + "'");
}

DgpSpec parse_dgp(const std::string& s) {
    if (s == "dgp1") return make_dgp1();
    if (s == "dgp2") return make_dgp2();
    throw std::invalid_argument("unknown simulation design '" + s + "'");
}

void check_unit_interval(const std::vector<double>& grid, const std::string& what) {
    for (double t : grid)
        if (!(t >= 0.0 && t <= 1.0))
            throw std::invalid_argument(what + " must lie in [0,1] after rescaling");
}

void check_alphas(const std::vector<double>& alphas) {
    if (alphas.empty()) throw std::invalid_argument("alpha list must be nonempty");
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("alpha values must lie in (0,1)");
}

void emit(const std::string& dir, const std::string& stem, const std::string& format,
          const Params& params, const Table& table) {
    fs::create_directories(dir);
    const fs::path base = fs::path(dir) / stem;
    if (format == "csv" || format == "both")
        write_table_csv_file(base.string() + ".csv", params, table);
    if (format == "json" || format == "both")
        write_table_json_file(base.string() + ".json", params, table);
}

// Data, stabilized weights, and the affine treatment map of one estimation
// run. Oracle weights are evaluated on the original treatment scale; the
// kernel-ratio estimate runs on the rescaled data it will be used with.
struct LoadedRun {
    Dataset ds;  // treatment rescaled to [0,1]
    AffineMap map;
    std::vector<double> weights;
};

LoadedRun load_run(const CommonOpts& opt, const KernelSpec& kern) {
    const Dataset raw = read_dataset_csv_file(opt.input);
    std::vector<double> oracle_w;
    if (opt.weights == "oracle") {
        if (raw.r < 1)
            throw std::invalid_argument("oracle weights need covariate column x1");
        oracle_w.reserve(raw.n());
        for (const auto& o : raw.obs) oracle_w.push_back(oracle_weights(o.t, o.x[0]));
    }
    auto [ds, map] = rescale_treatment(raw);
    LoadedRun run{std::move(ds), map, {}};
    if (opt.weights == "oracle") {
        run.weights = std::move(oracle_w);
    } else if (opt.weights == "column") {
        run.weights = load_weights(run.ds);
    } else {
        run.weights = estimate_weights_kernel_ratio(run.ds, default_weight_model(run.ds), kern);
    }
    return run;
}

double effective_bandwidth(const CommonOpts& opt, const LoadedRun& run, const KernelSpec& kern) {
    if (opt.bandwidth) {
        if (!(*opt.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
        return *opt.bandwidth;
    }
    return select_bandwidth(run.ds, run.weights, kern, bandwidth_candidates(run.ds), 7);
}

int effective_k(const CommonOpts& opt, const LoadedRun& run, const KernelSpec& kern, double h) {
    if (opt.k_override) {
        if (*opt.k_override < 1) throw std::invalid_argument("k must be positive");
        return *opt.k_override;
    }
    return select_k(run.ds, run.weights, kern, h, opt.t_grid, opt.J);
}

Params common_params(const CommonOpts& opt, const LoadedRun& run, double h, int k_n) {
    Params p;
    p.add("input", opt.input);
    p.add("n", run.ds.n());
    p.add("covariates", run.ds.r);
    p.add("treatment_min", run.map.lo);
    p.add("treatment_max", run.map.hi);
    p.add("kernel", opt.kernel);
    p.add("gamma_method", opt.gamma_method);
    p.add("weights", opt.weights);
    p.add("J", opt.J);
    p.add("h", h);
    p.add("k_n", k_n);
    p.add("seed", std::to_string(opt.seed));
    return p;
}

// --- estimate -------------------------------------------------------------

void cmd_estimate(const CommonOpts& opt) {
    check_alphas(opt.alphas);
    check_unit_interval(opt.t_grid, "t grid");
    const KernelSpec kern = make_kernel(parse_kernel(opt.kernel));
    const GammaMethod method = parse_method(opt.gamma_method);
    const LoadedRun run = load_run(opt, kern);
    const double h = effective_bandwidth(opt, run, kern);
    const int k_n = effective_k(opt, run, kern, h);

    Table table;
    table.columns = {"t",         "alpha",     "q_intermediate", "q_extreme",
                     "q_naive",   "gamma_hat", "gamma_method",   "tail_mean",
                     "f_T_hat",   "k_n",       "h"};
    for (double t : opt.t_grid) {
        const LocalSurvival local(run.ds, run.weights, kern, t, h);
        const TailFit fit = fit_tail_local(local, k_n, method, opt.J);
        for (double a : opt.alphas) {
            auto& row = table.add_row();
            row.push_back(t);
            row.push_back(a);
            row.push_back(fit.q_intermediate);
            row.push_back(extreme_quantile(fit, a));
            row.push_back(local.quantile(a));
            row.push_back(fit.gamma_hat);
            row.push_back(opt.gamma_method);
            try {
                row.push_back(tail_mean(fit, a));
            } catch (const std::domain_error&) {
                row.push_back(nullptr);  // gamma_hat >= 1
            }
            row.push_back(fit.f_T_hat);
            row.push_back(fit.k_n);
            row.push_back(fit.h);
        }
    }
    emit(opt.output_dir, "estimate", opt.format, common_params(opt, run, h, k_n), table);
}

// --- effects ----------------------------------------------------------------

struct EffectsOpts {
    CommonOpts common;
    double baseline_t = 0.0;
    double confidence = 0.95;
    std::string oracle_dgp;  // empty: no overlay
};

void cmd_effects(const EffectsOpts& opt) {
    check_alphas(opt.common.alphas);
    check_unit_interval(opt.common.t_grid, "t grid");
    check_unit_interval({opt.baseline_t}, "baseline t");
    const KernelSpec kern = make_kernel(parse_kernel(opt.common.kernel));
    const GammaMethod method = parse_method(opt.common.gamma_method);
    const LoadedRun run = load_run(opt.common, kern);
    const double h = effective_bandwidth(opt.common, run, kern);
    const int k_n = effective_k(opt.common, run, kern, h);
    const double delta0 = 0.5;

    std::optional<SimOracle> oracle;
    if (!opt.oracle_dgp.empty()) oracle = make_oracle(parse_dgp(opt.oracle_dgp));

    const LocalSurvival base_local(run.ds, run.weights, kern, opt.baseline_t, h);
    const TailFit base_fit = fit_tail_local(base_local, k_n, method, opt.common.J);
    const double base_var = gamma_variance_local(base_local, kern, base_fit);

    struct KindSpec {
        BandKind kind;
        const char* name;
    };
    const KindSpec kinds[] = {{BandKind::Eqte, "eqte"},
                              {BandKind::Eate, "eate"},
                              {BandKind::EateUnadjusted, "eate_unadjusted"}};

    Params params = common_params(opt.common, run, h, k_n);
    params.add("baseline_t", opt.baseline_t);
    params.add("confidence", opt.confidence);
    params.add("delta0", delta0);

    for (const auto& [kind, name] : kinds) {
        Table table;
        table.columns = {"t", "alpha", "rho", "center", "lower", "upper", "usable"};
        if (oracle) table.columns.push_back("oracle");
        Table plot;  // first (t, alpha) pair, band vs rho
        plot.columns = {"rho", "center", "lower", "upper"};
        if (oracle) plot.columns.push_back("oracle");

        for (double t : opt.common.t_grid) {
            const LocalSurvival local(run.ds, run.weights, kern, t, h);
            const TailFit fit = fit_tail_local(local, k_n, method, opt.common.J);
            const double var = gamma_variance_local(local, kern, fit);
            for (double a : opt.common.alphas) {
                const std::vector<double> rho_grid = default_rho_grid(a, delta0);
                const EffectBand band = effect_band(fit, var, base_fit, base_var, a, delta0,
                                                    opt.confidence, rho_grid, kind);
                for (std::size_t i = 0; i < band.rho.size(); ++i) {
                    auto& row = table.add_row();
                    row.push_back(t);
                    row.push_back(a);
                    row.push_back(band.rho[i]);
                    row.push_back(band.center[i]);
                    row.push_back(band.lower[i]);
                    row.push_back(band.upper[i]);
                    row.push_back(band.usable[i] ? "yes" : "no");
                    double oracle_val = 0.0;
                    if (oracle) {
                        oracle_val = kind == BandKind::Eqte
                                         ? oracle->quantile(t, band.rho[i]) /
                                               oracle->quantile(opt.baseline_t, band.rho[i])
                                         : oracle->tail_mean(t, band.rho[i]) /
                                               oracle->tail_mean(opt.baseline_t, band.rho[i]);
                        row.push_back(oracle_val);
                    }
                    if (t == opt.common.t_grid.front() && a == opt.common.alphas.front()) {
                        auto& prow = plot.add_row();
                        prow.push_back(band.rho[i]);
                        prow.push_back(band.center[i]);
                        prow.push_back(band.lower[i]);
                        prow.push_back(band.upper[i]);
                        if (oracle) prow.push_back(oracle_val);
                    }
                }
            }
        }
        emit(opt.common.output_dir, std::string("effects_") + name, opt.common.format, params,
             table);
        Params pparams = params;
        pparams.add("plot_t", opt.common.t_grid.front());
        pparams.add("plot_alpha", opt.common.alphas.front());
        emit(opt.common.output_dir, std::string("plot_") + name, opt.common.format, pparams,
             plot);
    }
}

// --- simulate / coverage ----------------------------------------------------

struct SimOpts {
    std::string dgp = "dgp1";
    std::size_t n = 2000;
    std::size_t reps = 200;
    double confidence = 0.95;
    CommonOpts common;
};

SimPolicy make_policy(const SimOpts& opt) {
    SimPolicy policy;
    policy.kernel = make_kernel(parse_kernel(opt.common.kernel));
    policy.method = parse_method(opt.common.gamma_method);
    policy.J = opt.common.J;
    policy.h_override = opt.common.bandwidth;
    policy.k_override = opt.common.k_override;
    if (opt.common.weights == "oracle")
        policy.weight_source = WeightSource::Oracle;
    else if (opt.common.weights == "kernel")
        policy.weight_source = WeightSource::KernelRatio;
    else
        throw std::invalid_argument("simulation weights must be 'oracle' or 'kernel'");
    return policy;
}

Params sim_params(const SimOpts& opt) {
    Params p;
    p.add("dgp", opt.dgp);
    p.add("n", opt.n);
    p.add("reps", opt.reps);
    p.add("seed", std::to_string(opt.common.seed));
    p.add("kernel", opt.common.kernel);
    p.add("gamma_method", opt.common.gamma_method);
    p.add("weights", opt.common.weights);
    p.add("J", opt.common.J);
    p.add("boundary", "reflect");
    return p;
}

void cmd_simulate(const SimOpts& opt) {
    check_alphas(opt.common.alphas);
    check_unit_interval(opt.common.t_grid, "t grid");
    const DgpSpec spec = parse_dgp(opt.dgp);
    const SimPolicy policy = make_policy(opt);
    const SimEstimates est = simulate_reps(spec, opt.n, opt.common.alphas, opt.reps,
                                           opt.common.t_grid, opt.common.seed, policy);

    Table table;
    table.columns = {"rep",       "t", "alpha",     "q_extreme", "q_naive",
                     "tail_mean", "gamma_hat", "h", "k_n"};
    for (std::size_t r = 0; r < opt.reps; ++r) {
        if (est.q_extreme[r].empty()) continue;  // failed replication
        for (std::size_t ti = 0; ti < est.t_grid.size(); ++ti) {
            for (std::size_t ai = 0; ai < est.alphas.size(); ++ai) {
                auto& row = table.add_row();
                row.push_back(r);
                row.push_back(est.t_grid[ti]);
                row.push_back(est.alphas[ai]);
                row.push_back(est.q_extreme[r][ti][ai]);
                row.push_back(est.q_naive[r][ti][ai]);
                row.push_back(est.tail_mean[r][ti][ai]);
                row.push_back(est.gamma_hat[r][ti]);
                row.push_back(est.h_used[r]);
                row.push_back(est.k_used[r]);
            }
        }
    }
    Params params = sim_params(opt);
    params.add("failed_reps", est.failed_reps.size());
    params.add("warnings", est.warning_count);
    emit(opt.common.output_dir, "simulate_estimates", opt.common.format, params, table);
}

void cmd_coverage(const SimOpts& opt) {
    check_alphas(opt.common.alphas);
    check_unit_interval(opt.common.t_grid, "t grid");
    const double alpha = opt.common.alphas.front();
    const DgpSpec spec = parse_dgp(opt.dgp);
    const SimPolicy policy = make_policy(opt);
    const CoverageResult cov =
        coverage_experiment(spec, opt.n, alpha, opt.reps, opt.confidence, opt.common.t_grid,
                            opt.common.seed, policy);

    Table table;
    table.columns = {"t",
                     "eqte_coverage",
                     "eqte_se",
                     "eate_coverage",
                     "eate_se",
                     "eate_unadjusted_coverage",
                     "eate_unadjusted_se"};
    for (std::size_t ti = 0; ti < cov.t_grid.size(); ++ti) {
        auto& row = table.add_row();
        row.push_back(cov.t_grid[ti]);
        row.push_back(cov.eqte_coverage[ti]);
        row.push_back(cov.eqte_se[ti]);
        row.push_back(cov.eate_coverage[ti]);
        row.push_back(cov.eate_se[ti]);
        row.push_back(cov.eate_unadjusted_coverage[ti]);
        row.push_back(cov.eate_unadjusted_se[ti]);
    }
    Params params = sim_params(opt);
    params.add("alpha", alpha);
    params.add("confidence", opt.confidence);
    params.add("baseline_t", policy.baseline_t);
    params.add("reps_used", cov.reps_used);
    params.add("failures", cov.failures);
    params.add("warnings", cov.warning_count);
    emit(opt.common.output_dir, "coverage", opt.common.format, params, table);
}

// --- diagnose -----------------------------------------------------------------

void cmd_diagnose(const CommonOpts& opt) {
    const Dataset ds = read_dataset_csv_file(opt.input);
    std::vector<double> ys(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) ys[i] = ds.obs[i].y;

    const BoxCoxResult bc = box_cox_search(ys);
    std::vector<double> transformed(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i)
        transformed[i] = box_cox(ys[i], bc.lambda1, bc.lambda2);
    const double tmin = *std::min_element(transformed.begin(), transformed.end());
    for (double& v : transformed) v -= tmin;  // shift so the minimum response is 0

    Params bparams;
    bparams.add("input", opt.input);
    bparams.add("n", ds.n());
    bparams.add("lambda1", bc.lambda1);
    bparams.add("lambda2", bc.lambda2);
    bparams.add("normal_correlation", bc.correlation);
    Table btable;
    btable.columns = {"y", "y_transformed"};
    for (std::size_t i = 0; i < ys.size(); ++i) {
        auto& row = btable.add_row();
        row.push_back(ys[i]);
        row.push_back(transformed[i]);
    }
    emit(opt.output_dir, "diagnose_boxcox", opt.format, bparams, btable);

    const auto emit_qq = [&](const std::vector<double>& data, const std::string& stem,
                             const char* which) {
        const ExpQqResult qq = exp_qq(data);
        Params qparams;
        qparams.add("input", opt.input);
        qparams.add("data", which);
        qparams.add("n", data.size());
        qparams.add("spacings", qq.sorted_z.size());
        qparams.add("skipped", qq.skipped);
        qparams.add("correlation", qq.correlation);
        Table qtable;
        qtable.columns = {"theoretical", "z"};
        for (std::size_t i = 0; i < qq.sorted_z.size(); ++i) {
            auto& row = qtable.add_row();
            row.push_back(qq.theoretical[i]);
            row.push_back(qq.sorted_z[i]);
        }
        emit(opt.output_dir, stem, opt.format, qparams, qtable);
    };
    emit_qq(ys, "diagnose_qq", "raw");
    emit_qq(transformed, "diagnose_qq_transformed", "boxcox_shifted");
}

void add_common_flags(CLI::App* cmd, CommonOpts& opt, bool with_input) {
    if (with_input)
        cmd->add_option("--input", opt.input, "input CSV with columns t,y[,x1..xr][,weight]")
            ->required();
    cmd->add_option("--output-dir", opt.output_dir, "directory for output files");
    cmd->add_option("--format", opt.format, "output format")
        ->check(CLI::IsMember({"csv", "json", "both"}));
    cmd->add_option("--t-grid", opt.t_grid, "treatment levels in [0,1]")->delimiter(',');
    cmd->add_option("--alpha", opt.alphas, "extreme quantile levels in (0,1)")->delimiter(',');
    cmd->add_option("--kernel", opt.kernel, "kernel shape")
        ->check(CLI::IsMember({"epanechnikov", "biweight", "triangular"}));
    cmd->add_option("--gamma-method", opt.gamma_method, "tail index estimator")
        ->check(CLI::IsMember({"hill", "pickands"}));
    cmd->add_option("--bandwidth", opt.bandwidth, "bandwidth override (default: tuned)");
    cmd->add_option("--k", opt.k_override, "tail sample size override (default: tuned)");
    cmd->add_option("--J", opt.J, "Hill weight count")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", opt.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"extreme quantile and average treatment effects for continuous treatments"};
    app.require_subcommand(1);

    std::function<void()> runner;

    CommonOpts est_opts;
    CLI::App* est = app.add_subcommand("estimate", "extreme quantile and tail mean estimates");
    add_common_flags(est, est_opts, true);
    est->add_option("--weights", est_opts.weights, "stabilized weight source")
        ->check(CLI::IsMember({"column", "kernel", "oracle"}));
    est->callback([&]() { runner = [&]() { cmd_estimate(est_opts); }; });

    EffectsOpts eff_opts;
    CLI::App* eff = app.add_subcommand("effects", "EQTE/EATE confidence bands");
    add_common_flags(eff, eff_opts.common, true);
    eff->add_option("--weights", eff_opts.common.weights, "stabilized weight source")
        ->check(CLI::IsMember({"column", "kernel", "oracle"}));
    eff->add_option("--baseline-t", eff_opts.baseline_t, "baseline treatment level t2");
    eff->add_option("--confidence", eff_opts.confidence, "band confidence level");
    eff->add_option("--oracle", eff_opts.oracle_dgp, "append analytic truth for a design")
        ->check(CLI::IsMember({"dgp1", "dgp2"}));
    eff->callback([&]() { runner = [&]() { cmd_effects(eff_opts); }; });

    SimOpts sim_opts;
    sim_opts.common.weights = "oracle";
    CLI::App* sim = app.add_subcommand("simulate", "replicate estimates on a simulation design");
    add_common_flags(sim, sim_opts.common, false);
    sim->add_option("--dgp", sim_opts.dgp, "simulation design")
        ->check(CLI::IsMember({"dgp1", "dgp2"}))
        ->required();
    sim->add_option("--n", sim_opts.n, "sample size per replication");
    sim->add_option("--reps", sim_opts.reps, "number of replications");
    sim->add_option("--weights", sim_opts.common.weights, "stabilized weight source")
        ->check(CLI::IsMember({"oracle", "kernel"}));
    sim->callback([&]() { runner = [&]() { cmd_simulate(sim_opts); }; });

    SimOpts cov_opts;
    cov_opts.common.weights = "oracle";
    CLI::App* cov = app.add_subcommand("coverage", "band coverage on a simulation design");
    add_common_flags(cov, cov_opts.common, false);
    cov->add_option("--dgp", cov_opts.dgp, "simulation design")
        ->check(CLI::IsMember({"dgp1", "dgp2"}))
        ->required();
    cov->add_option("--n", cov_opts.n, "sample size per replication");
    cov->add_option("--reps", cov_opts.reps, "number of replications");
    cov->add_option("--confidence", cov_opts.confidence, "band confidence level");
    cov->add_option("--weights", cov_opts.common.weights, "stabilized weight source")
        ->check(CLI::IsMember({"oracle", "kernel"}));
    cov->callback([&]() { runner = [&]() { cmd_coverage(cov_opts); }; });

    CommonOpts diag_opts;
    CLI::App* diag = app.add_subcommand("diagnose", "heavy-tail diagnostics");
    diag->add_option("--input", diag_opts.input, "input CSV with columns t,y[,x1..xr][,weight]")
        ->required();
    diag->add_option("--output-dir", diag_opts.output_dir, "directory for output files");
    diag->add_option("--format", diag_opts.format, "output format")
        ->check(CLI::IsMember({"csv", "json", "both"}));
    diag->callback([&]() { runner = [&]() { cmd_diagnose(diag_opts); }; });

    CLI11_PARSE(app, argc, argv);

    try {
        runner();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
