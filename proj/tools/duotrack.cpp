// Command-line surface of the two-player impact-game solver.
//
// Subcommands:
//   coeffs:  dump c+, c-, the five weights and the urgency rate on a grid
//   solve:   solve a named or user-supplied scenario, export per-player CSVs
//   verify:  run the invariant suite for a scenario (optionally auditing a
//             previously exported solution) and emit a JSON report
//   sweep:   plastic/elastic phenomenology table over gamma and lambda lists
//
// Exit codes: 0 success, 1 failed verification, 2 invalid scenario/config,
// 3 I/O failure, 4 solver failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "duotrack/duotrack.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string scenario;
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 12345;
    std::size_t n_paths = 1;
    duotrack::GridSpec grid;
    std::vector<std::string> outputs{"paths", "rates", "signals"};
};

void add_grid_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--grid-uniform", o.grid.n_uniform, "uniform cells")
        ->check(CLI::Range(std::size_t{2}, std::size_t{2000000}));
    cmd->add_option("--grid-tail", o.grid.n_tail, "geometric tail cells");
    cmd->add_option("--eps-frac", o.grid.eps_frac,
                    "terminal cutoff as a fraction of T")
        ->check(CLI::Range(1e-15, 0.4));
}

void add_scenario_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--scenario", o.scenario, "builtin scenario name");
    cmd->add_option("--config", o.config_path,
                    "JSON run config or scenario file");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "master seed for stochastic runs");
    cmd->add_option("--paths", o.n_paths, "number of Monte Carlo paths");
    add_grid_flags(cmd, o);
}

json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw duotrack::IoError("cannot open: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

/// Applies a run-config JSON file: either a bare scenario document or an
/// object with {scenario, grid, seed, paths, out, outputs} fields.
void merge_config(CommonOpts& o, duotrack::ScenarioSpec& sc, bool& have_scenario) {
    if (o.config_path.empty()) return;
    const json j = load_json_file(o.config_path);
    try {
        if (j.contains("params")) {  // bare scenario document
            sc = duotrack::scenario_from_json(j);
            have_scenario = true;
            return;
        }
        if (j.contains("scenario")) {
            const auto& s = j.at("scenario");
            if (s.is_string()) {
                o.scenario = s.get<std::string>();
            } else {
                sc = duotrack::scenario_from_json(s);
                have_scenario = true;
            }
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            o.grid.n_uniform = g.value("uniform", o.grid.n_uniform);
            o.grid.n_tail = g.value("tail", o.grid.n_tail);
            o.grid.eps_frac = g.value("eps_frac", o.grid.eps_frac);
        }
        o.seed = j.value("seed", o.seed);
        o.n_paths = j.value("paths", o.n_paths);
        if (j.contains("out")) o.out_dir = j.at("out").get<std::string>();
        if (j.contains("outputs"))
            o.outputs = j.at("outputs").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw std::invalid_argument("malformed run config " + o.config_path + ": " +
                                    e.what());
    }
}

duotrack::ScenarioSpec resolve_scenario(CommonOpts& o) {
    duotrack::ScenarioSpec sc;
    bool have = false;
    merge_config(o, sc, have);
    if (!o.scenario.empty()) {
        const auto* b = duotrack::find_builtin(o.scenario);
        if (b == nullptr)
            throw std::invalid_argument("unknown builtin scenario: " + o.scenario);
        sc = b->spec;
        have = true;
    }
    if (!have)
        throw std::invalid_argument("no scenario given (use --scenario or --config)");
    sc.validate();
    return sc;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw duotrack::IoError("cannot create output directory: " + dir);
}

json run_config_echo(const CommonOpts& o) {
    json j;
    j["scenario"] = o.scenario;
    j["config"] = o.config_path;
    j["out"] = o.out_dir;
    j["seed"] = o.seed;
    j["paths"] = o.n_paths;
    j["grid"] = {{"uniform", o.grid.n_uniform},
                 {"tail", o.grid.n_tail},
                 {"eps_frac", o.grid.eps_frac}};
    j["outputs"] = o.outputs;
    return j;
}

bool wants(const CommonOpts& o, std::string_view what) {
    for (const auto& s : o.outputs)
        if (s == what) return true;
    return false;
}

void write_coeffs_csv(const duotrack::ModelParams& p, const duotrack::TimeGrid& grid,
                      const std::string& path) {
    std::ostringstream os;
    duotrack::CsvWriter csv(os);
    csv.header({"t", "c_plus", "c_minus", "w1", "w2", "w3", "w4", "w5", "urgency"});
    for (double t : grid.nodes) {
        const auto e = duotrack::coefficient_eval(p, t);
        csv.row(std::initializer_list<double>{t, e.c_plus, e.c_minus, e.weights.w1,
                                              e.weights.w2, e.weights.w3, e.weights.w4,
                                              e.weights.w5, e.urgency});
    }
    duotrack::write_text_file(path, os.str());
}

void write_player_csv(const duotrack::ModelParams& p,
                      const duotrack::EquilibriumSolution& sol, int player,
                      const std::string& path) {
    const auto& grid = *sol.grid;
    std::ostringstream os;
    duotrack::CsvWriter csv(os);
    csv.header({"t", "X", "alpha", "xi_hat", "xi_hat_minus_w5_Xopp"});
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double w5 = duotrack::weights_at(p, grid.nodes[k]).w5;
        const double x = (player == 1) ? sol.x1[k] : sol.x2[k];
        const double xopp = (player == 1) ? sol.x2[k] : sol.x1[k];
        const double a = (player == 1) ? sol.alpha1[k] : sol.alpha2[k];
        const double s =
            (player == 1) ? sol.signal.xi_hat_1[k] : sol.signal.xi_hat_2[k];
        csv.row(std::initializer_list<double>{grid.nodes[k], x, a, s, s - w5 * xopp});
    }
    duotrack::write_text_file(path, os.str());
}

void write_ensemble_csvs(const duotrack::ModelParams& p,
                         const duotrack::EnsembleResult& ens,
                         const std::string& dir) {
    const auto& grid = *ens.grid;
    for (int player : {1, 2}) {
        const auto& mean_x = (player == 1) ? ens.mean_x1 : ens.mean_x2;
        const auto& mean_xo = (player == 1) ? ens.mean_x2 : ens.mean_x1;
        const auto& mean_a = (player == 1) ? ens.mean_alpha1 : ens.mean_alpha2;
        const auto& mean_s = (player == 1) ? ens.mean_xi1 : ens.mean_xi2;
        {
            std::ostringstream os;
            duotrack::CsvWriter csv(os);
            csv.header({"t", "X", "alpha", "xi_hat", "xi_hat_minus_w5_Xopp"});
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const double w5 = duotrack::weights_at(p, grid.nodes[k]).w5;
                csv.row(std::initializer_list<double>{grid.nodes[k], mean_x[k],
                                                      mean_a[k], mean_s[k],
                                                      mean_s[k] - w5 * mean_xo[k]});
            }
            duotrack::write_text_file(
                dir + "/player" + std::to_string(player) + "_mean.csv", os.str());
        }
        const auto& lo_x = (player == 1) ? ens.lo_x1 : ens.lo_x2;
        const auto& hi_x = (player == 1) ? ens.hi_x1 : ens.hi_x2;
        const auto& lo_a = (player == 1) ? ens.lo_alpha1 : ens.lo_alpha2;
        const auto& hi_a = (player == 1) ? ens.hi_alpha1 : ens.hi_alpha2;
        const auto& lo_s = (player == 1) ? ens.lo_xi1 : ens.lo_xi2;
        const auto& hi_s = (player == 1) ? ens.hi_xi1 : ens.hi_xi2;
        std::ostringstream os;
        duotrack::CsvWriter csv(os);
        csv.header({"t", "X_q10", "X_q90", "alpha_q10", "alpha_q90", "xi_hat_q10",
                    "xi_hat_q90"});
        for (std::size_t j = 0; j < ens.band_nodes.size(); ++j) {
            const double t = grid.nodes[ens.band_nodes[j]];
            csv.row(std::initializer_list<double>{t, lo_x[j], hi_x[j], lo_a[j],
                                                  hi_a[j], lo_s[j], hi_s[j]});
        }
        duotrack::write_text_file(
            dir + "/player" + std::to_string(player) + "_band.csv", os.str());
    }
}

std::vector<std::vector<double>> read_csv_columns(const std::string& path,
                                                  std::size_t expected_cols) {
    std::ifstream is(path);
    if (!is) throw duotrack::IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line))
        throw std::invalid_argument("empty solution file: " + path);
    std::vector<std::vector<double>> cols(expected_cols);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',') && c < expected_cols)
            cols[c++].push_back(std::stod(cell));
        if (c != expected_cols)
            throw std::invalid_argument("short row in " + path);
    }
    return cols;
}

/// Rebuilds an EquilibriumSolution from previously exported player CSVs so
/// that `verify --solution` can audit external or tampered files.
duotrack::EquilibriumSolution load_solution(const duotrack::ScenarioSpec& sc,
                                            const std::string& dir) {
    const auto c1 = read_csv_columns(dir + "/player1.csv", 5);
    const auto c2 = read_csv_columns(dir + "/player2.csv", 5);
    if (c1[0] != c2[0])
        throw std::invalid_argument("player CSVs disagree on the time grid");
    auto grid = std::make_shared<duotrack::TimeGrid>();
    grid->nodes = c1[0];
    grid->horizon = sc.params.horizon;
    grid->eps_terminal = sc.params.horizon - grid->nodes.back();
    duotrack::EquilibriumSolution sol;
    sol.grid = grid;
    sol.x1 = c1[1];
    sol.x2 = c2[1];
    sol.alpha1 = c1[2];
    sol.alpha2 = c2[2];
    sol.signal.grid = grid;
    sol.signal.xi_hat_1 = c1[3];
    sol.signal.xi_hat_2 = c2[3];
    sol.signal.xi_hat_sum.resize(grid->size());
    sol.signal.xi_hat_diff.resize(grid->size());
    for (std::size_t k = 0; k < grid->size(); ++k) {
        sol.signal.xi_hat_sum[k] = c1[3][k] + c2[3][k];
        sol.signal.xi_hat_diff[k] = c1[3][k] - c2[3][k];
    }
    sol.terminal_gap1 = std::abs(sol.x1.back() - sc.target1.terminal);
    sol.terminal_gap2 = std::abs(sol.x2.back() - sc.target2.terminal);
    return sol;
}

int cmd_coeffs(const CommonOpts& opts, const duotrack::ModelParams& params) {
    params.validate();
    ensure_out_dir(opts.out_dir);
    const auto grid = opts.grid.build(params.horizon);
    write_coeffs_csv(params, grid, opts.out_dir + "/coeffs.csv");
    std::cout << "wrote " << opts.out_dir << "/coeffs.csv (" << grid.size()
              << " rows)\n";
    return 0;
}

int cmd_solve(CommonOpts& opts) {
    const auto sc = resolve_scenario(opts);
    ensure_out_dir(opts.out_dir);
    auto grid = opts.grid.build_shared(sc.params.horizon);

    json summary;
    summary["run_config"] = run_config_echo(opts);
    summary["scenario"] = duotrack::scenario_to_json(sc);
    summary["eps_terminal"] = grid->eps_terminal;

    if (sc.deterministic()) {
        const auto cf =
            duotrack::solve_deterministic(sc, grid, duotrack::SolveMethod::closed_form);
        const auto ode =
            duotrack::solve_deterministic(sc, grid, duotrack::SolveMethod::ode);
        double agree = 0.0;
        const double t_cut = 0.99 * sc.params.horizon;
        for (std::size_t k = 0; k < grid->size() && grid->nodes[k] <= t_cut; ++k)
            agree = std::max({agree, std::abs(cf.x1[k] - ode.x1[k]),
                              std::abs(cf.x2[k] - ode.x2[k])});
        write_player_csv(sc.params, cf, 1, opts.out_dir + "/player1.csv");
        write_player_csv(sc.params, cf, 2, opts.out_dir + "/player2.csv");
        summary["method_agreement_sup"] = agree;
        summary["terminal_gaps"] = {{"player1", cf.terminal_gap1},
                                    {"player2", cf.terminal_gap2}};
    } else if (opts.n_paths <= 1) {
        const auto path = duotrack::simulate_price_path(sc.params, grid, opts.seed, 0);
        const auto sol = duotrack::solve_pathwise(sc, path, grid);
        write_player_csv(sc.params, sol, 1, opts.out_dir + "/player1.csv");
        write_player_csv(sc.params, sol, 2, opts.out_dir + "/player2.csv");
        std::ostringstream os;
        duotrack::CsvWriter csv(os);
        csv.header({"t", "P"});
        for (std::size_t k = 0; k < grid->size(); ++k)
            csv.row(std::initializer_list<double>{grid->nodes[k], path.values[k]});
        duotrack::write_text_file(opts.out_dir + "/price.csv", os.str());
        summary["terminal_gaps"] = {{"player1", sol.terminal_gap1},
                                    {"player2", sol.terminal_gap2}};
        summary["path_seed"] = path.seed_id;
    } else {
        const auto ens =
            duotrack::run_ensemble(sc, opts.n_paths, opts.seed, grid);
        write_ensemble_csvs(sc.params, ens, opts.out_dir);
        summary["terminal_gaps"] = {
            {"player1",
             {{"max", ens.gap1.max_abs}, {"mean", ens.gap1.mean_abs},
              {"q10", ens.gap1.q10}, {"q90", ens.gap1.q90}}},
            {"player2",
             {{"max", ens.gap2.max_abs}, {"mean", ens.gap2.mean_abs},
              {"q10", ens.gap2.q10}, {"q90", ens.gap2.q90}}}};
        summary["band_levels"] = {ens.band_lo_level, ens.band_hi_level};
        summary["band_nodes"] = ens.band_nodes.size();
    }

    if (wants(opts, "weights"))
        write_coeffs_csv(sc.params, *grid, opts.out_dir + "/coeffs.csv");
    if (wants(opts, "verification")) {
        duotrack::VerifyOptions vo;
        vo.grid = opts.grid;
        vo.seed = opts.seed;
        vo.n_paths = std::max<std::size_t>(opts.n_paths, 20);
        const auto rep = duotrack::verify_scenario(sc, vo);
        duotrack::write_text_file(opts.out_dir + "/verification.json",
                                  duotrack::report_to_json(rep).dump(2) + "\n");
        summary["verification_all_pass"] = rep.all_pass();
    }

    duotrack::write_text_file(opts.out_dir + "/summary.json",
                              summary.dump(2) + "\n");
    std::cout << "wrote solution files to " << opts.out_dir << "\n";
    return 0;
}

int cmd_verify(CommonOpts& opts, const std::string& solution_dir) {
    const auto sc = resolve_scenario(opts);
    ensure_out_dir(opts.out_dir);
    duotrack::VerifyOptions vo;
    vo.grid = opts.grid;
    vo.seed = opts.seed;
    vo.n_paths = std::max<std::size_t>(opts.n_paths, 20);

    duotrack::VerificationReport rep;
    if (!solution_dir.empty()) {
        if (!sc.deterministic())
            throw std::invalid_argument(
                "verify --solution supports deterministic scenarios only");
        const auto sol = load_solution(sc, solution_dir);
        rep = duotrack::verify_scenario(sc, vo, &sol);
    } else {
        rep = duotrack::verify_scenario(sc, vo);
    }

    duotrack::write_text_file(opts.out_dir + "/verification.json",
                              duotrack::report_to_json(rep).dump(2) + "\n");
    for (const auto& c : rep.checks) {
        std::cout << (c.skipped ? "[skip]" : (c.pass ? "[pass]" : "[FAIL]")) << " "
                  << c.name;
        if (!c.skipped)
            std::cout << " value=" << duotrack::format_double(c.value)
                      << " tol=" << duotrack::format_double(c.tolerance);
        if (!c.note.empty()) std::cout << "  (" << c.note << ")";
        std::cout << "\n";
    }
    if (!rep.all_pass()) {
        std::cerr << "verification failed:";
        for (const auto& name : rep.failing()) std::cerr << " " << name;
        std::cerr << "\n";
        return 1;
    }
    std::cout << "verification passed\n";
    return 0;
}

int cmd_sweep(CommonOpts& opts, const std::vector<double>& gammas,
              const std::vector<double>& lambdas) {
    const auto sc = resolve_scenario(opts);
    if (gammas.empty())
        throw std::invalid_argument("sweep: --gamma list must be nonempty");
    if (lambdas.empty())
        throw std::invalid_argument("sweep: --lambda list must be nonempty");
    ensure_out_dir(opts.out_dir);
    const auto rows = duotrack::regime_sweep(sc, gammas, lambdas, opts.grid);
    std::ostringstream os;
    duotrack::CsvWriter csv(os);
    csv.header({"gamma", "lambda", "w5_at_0", "min_x2", "t_argmin_x2", "max_x2",
                "t_argmax_x2", "predation", "cooperation", "sign_w3_minus_w4_at_0",
                "sign_w3_minus_w4_at_half"});
    for (const auto& r : rows) {
        csv.row(std::initializer_list<double>{
            r.gamma, r.lambda, r.w5_at_0, r.min_x2, r.t_argmin_x2, r.max_x2,
            r.t_argmax_x2, r.predation ? 1.0 : 0.0, r.cooperation ? 1.0 : 0.0,
            static_cast<double>(r.sign_w3_minus_w4_at_0),
            static_cast<double>(r.sign_w3_minus_w4_at_half)});
    }
    duotrack::write_text_file(opts.out_dir + "/sweep.csv", os.str());
    std::cout << "wrote " << opts.out_dir << "/sweep.csv (" << rows.size()
              << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-player price-impact tracking game solver"};
    app.require_subcommand(1);

    CommonOpts coeff_opts, solve_opts, verify_opts, sweep_opts;
    duotrack::ModelParams coeff_params;
    std::string solution_dir;
    std::vector<double> gammas, lambdas;

    auto* coeffs = app.add_subcommand(
        "coeffs", "tabulate coefficient functions and weights");
    coeffs->add_option("--T", coeff_params.horizon, "horizon")->required();
    coeffs->add_option("--sigma", coeff_params.sigma, "variance rate")->required();
    coeffs->add_option("--lambda", coeff_params.lambda, "temporary impact")
        ->required();
    coeffs->add_option("--gamma", coeff_params.gamma, "permanent impact")
        ->required();
    coeffs->add_option("--out", coeff_opts.out_dir, "output directory");
    add_grid_flags(coeffs, coeff_opts);

    auto* solve = app.add_subcommand("solve", "solve a scenario and export CSVs");
    add_scenario_flags(solve, solve_opts);

    auto* verify = app.add_subcommand("verify", "run the invariant suite");
    add_scenario_flags(verify, verify_opts);
    verify->add_option("--solution", solution_dir,
                       "audit a previously exported solution directory");

    auto* sweep = app.add_subcommand("sweep", "gamma/lambda regime table");
    add_scenario_flags(sweep, sweep_opts);
    sweep->add_option("--gamma", gammas, "gamma values")->delimiter(',');
    sweep->add_option("--lambda", lambdas, "lambda values")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (coeffs->parsed()) return cmd_coeffs(coeff_opts, coeff_params);
        if (solve->parsed()) return cmd_solve(solve_opts);
        if (verify->parsed()) return cmd_verify(verify_opts, solution_dir);
        if (sweep->parsed()) return cmd_sweep(sweep_opts, gammas, lambdas);
    } catch (const duotrack::SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << " (t = " << e.at_time()
                  << ")\n";
        return 4;
    } catch (const duotrack::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid scenario/config: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "invalid scenario/config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
