#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "duotrack/equilibrium.hpp"
#include "duotrack/quadrature.hpp"
#include "duotrack/targets.hpp"
#include "duotrack/verification.hpp"

namespace duotrack {

namespace detail {

/// Compensated (Kahan) accumulator so ensemble means are independent of
/// path chunking.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace detail

/// Ensemble statistics of a stochastic scenario. Means are accumulated on
/// every node with compensated summation; the quantile bands (nearest-rank,
/// 10%/90% by default) are evaluated on a subsampled set of band nodes to
/// bound memory, which is an artifact of this tool rather than of the model.
struct EnsembleResult {
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double band_lo_level = 0.10;
    double band_hi_level = 0.90;
    std::shared_ptr<const TimeGrid> grid;

    std::vector<double> mean_x1, mean_x2, mean_alpha1, mean_alpha2, mean_xi1, mean_xi2;

    std::vector<std::size_t> band_nodes;  // indices into the grid
    // per quantity: [band_node] lower / upper quantile
    std::vector<double> lo_x1, hi_x1, lo_x2, hi_x2;
    std::vector<double> lo_alpha1, hi_alpha1, lo_alpha2, hi_alpha2;
    std::vector<double> lo_xi1, hi_xi1, lo_xi2, hi_xi2;

    struct GapSummary {
        double max_abs = 0.0;
        double mean_abs = 0.0;
        double q10 = 0.0;
        double q90 = 0.0;
    };
    GapSummary gap1, gap2;
};

namespace detail {

inline std::vector<std::size_t> pick_band_nodes(std::size_t n, std::size_t cap) {
    std::vector<std::size_t> idx;
    if (n <= cap) {
        idx.resize(n);
        for (std::size_t k = 0; k < n; ++k) idx[k] = k;
        return idx;
    }
    idx.reserve(cap);
    for (std::size_t j = 0; j < cap; ++j)
        idx.push_back(j * (n - 1) / (cap - 1));
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

inline double nearest_rank(std::vector<double>& column, double level) {
    std::sort(column.begin(), column.end());
    const auto n = column.size();
    const auto rank = static_cast<std::size_t>(
        std::max(1.0, std::ceil(level * static_cast<double>(n))));
    return column[rank - 1];
}

}  // namespace detail

/// Solves the scenario pathwise over a pinned-seed ensemble and reduces to
/// means, quantile bands and a terminal-gap summary. Deterministic in
/// (scenario, n_paths, seed, grid).
inline EnsembleResult run_ensemble(const ScenarioSpec& sc, std::size_t n_paths,
                                   std::uint64_t seed,
                                   std::shared_ptr<const TimeGrid> grid,
                                   std::size_t band_node_cap = 129) {
    sc.validate();
    if (!sc.martingale_class() || sc.has_random_terminal())
        throw std::invalid_argument("run_ensemble: unsupported target class");
    if (n_paths < 1)
        throw std::invalid_argument("run_ensemble: n_paths must be >= 1");

    const auto n = grid->size();
    EnsembleResult res;
    res.n_paths = n_paths;
    res.seed = seed;
    res.grid = grid;
    res.band_nodes = detail::pick_band_nodes(n, band_node_cap);

    std::vector<detail::KahanSum> acc(6 * n);
    const auto bn = res.band_nodes.size();
    // band sample matrix: [quantity][band node][path]
    std::vector<std::vector<double>> band(6 * bn, std::vector<double>(n_paths));
    std::vector<double> gaps1(n_paths), gaps2(n_paths);

    for (std::size_t i = 0; i < n_paths; ++i) {
        const PricePath path = simulate_price_path(sc.params, grid, seed, i);
        const EquilibriumSolution sol =
            solve_pathwise(sc, path, grid, SolveMethod::closed_form);
        const std::vector<double>* const quantities[6] = {
            &sol.x1, &sol.x2, &sol.alpha1, &sol.alpha2,
            &sol.signal.xi_hat_1, &sol.signal.xi_hat_2};
        for (std::size_t q = 0; q < 6; ++q) {
            const auto& v = *quantities[q];
            for (std::size_t k = 0; k < n; ++k) acc[q * n + k].add(v[k]);
            for (std::size_t j = 0; j < bn; ++j)
                band[q * bn + j][i] = v[res.band_nodes[j]];
        }
        gaps1[i] = std::abs(sol.x1.back() - sc.target1.terminal);
        gaps2[i] = std::abs(sol.x2.back() - sc.target2.terminal);
    }

    auto reduce_mean = [&](std::size_t q, std::vector<double>& out) {
        out.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            out[k] = acc[q * n + k].sum / static_cast<double>(n_paths);
    };
    reduce_mean(0, res.mean_x1);
    reduce_mean(1, res.mean_x2);
    reduce_mean(2, res.mean_alpha1);
    reduce_mean(3, res.mean_alpha2);
    reduce_mean(4, res.mean_xi1);
    reduce_mean(5, res.mean_xi2);

    auto reduce_band = [&](std::size_t q, std::vector<double>& lo,
                           std::vector<double>& hi) {
        lo.resize(bn);
        hi.resize(bn);
        for (std::size_t j = 0; j < bn; ++j) {
            auto column = band[q * bn + j];
            lo[j] = detail::nearest_rank(column, res.band_lo_level);
            hi[j] = detail::nearest_rank(column, res.band_hi_level);
        }
    };
    reduce_band(0, res.lo_x1, res.hi_x1);
    reduce_band(1, res.lo_x2, res.hi_x2);
    reduce_band(2, res.lo_alpha1, res.hi_alpha1);
    reduce_band(3, res.lo_alpha2, res.hi_alpha2);
    reduce_band(4, res.lo_xi1, res.hi_xi1);
    reduce_band(5, res.lo_xi2, res.hi_xi2);

    auto summarize = [](std::vector<double>& g) {
        EnsembleResult::GapSummary s;
        detail::KahanSum mean;
        for (double v : g) {
            s.max_abs = std::max(s.max_abs, v);
            mean.add(v);
        }
        s.mean_abs = mean.sum / static_cast<double>(g.size());
        s.q10 = detail::nearest_rank(g, 0.10);
        std::vector<double> copy = g;
        s.q90 = detail::nearest_rank(copy, 0.90);
        return s;
    };
    res.gap1 = summarize(gaps1);
    res.gap2 = summarize(gaps2);
    return res;
}

/// Ensemble average of a player's realized cost when her pathwise
/// equilibrium rate is shifted by eps * beta (the opponent stays on the
/// equilibrium). eps = 0 gives the equilibrium cost itself; common random
/// numbers across eps values make cost differences directly comparable.
struct EnsembleCost {
    double mean = 0.0;
    double standard_error = 0.0;
};

inline EnsembleCost ensemble_cost(const ScenarioSpec& sc, std::size_t n_paths,
                                  std::uint64_t seed,
                                  std::shared_ptr<const TimeGrid> grid, int which,
                                  const Perturbation* beta = nullptr,
                                  double eps = 0.0) {
    if (!sc.martingale_class() || sc.has_random_terminal())
        throw std::invalid_argument("ensemble_cost: unsupported target class");
    detail::KahanSum acc, acc2;
    std::vector<double> shifted(grid->size());
    for (std::size_t i = 0; i < n_paths; ++i) {
        const PricePath path = simulate_price_path(sc.params, grid, seed, i);
        const EquilibriumSolution sol =
            solve_pathwise(sc, path, grid, SolveMethod::closed_form);
        const auto& own = (which == 1) ? sol.alpha1 : sol.alpha2;
        double j;
        if (beta != nullptr && eps != 0.0) {
            for (std::size_t k = 0; k < grid->size(); ++k)
                shifted[k] = own[k] + eps * beta->beta[k];
            j = (which == 1)
                    ? cost_functional(sc, *grid, shifted, sol.alpha2, 1, &path)
                    : cost_functional(sc, *grid, sol.alpha1, shifted, 2, &path);
        } else {
            j = cost_functional(sc, *grid, sol.alpha1, sol.alpha2, which, &path);
        }
        acc.add(j);
        acc2.add(j * j);
    }
    EnsembleCost out;
    const double n = static_cast<double>(n_paths);
    out.mean = acc.sum / n;
    const double var = std::max(0.0, acc2.sum / n - out.mean * out.mean);
    out.standard_error = std::sqrt(var / n);
    return out;
}

/// Mean and standard error of the pathwise first-variation of player
/// `which`'s cost in direction beta, over a pinned-seed ensemble with common
/// random numbers. At the equilibrium the mean is zero up to sampling noise.
struct EnsembleGateaux {
    double mean = 0.0;
    double standard_error = 0.0;
    double curvature = 0.0;  // deterministic quadratic coefficient in eps
};

inline EnsembleGateaux ensemble_gateaux(const ScenarioSpec& sc, std::size_t n_paths,
                                        std::uint64_t seed,
                                        std::shared_ptr<const TimeGrid> grid,
                                        const Perturbation& beta, int which) {
    if (!sc.martingale_class() || sc.has_random_terminal())
        throw std::invalid_argument("ensemble_gateaux: unsupported target class");
    detail::KahanSum acc, acc2;
    for (std::size_t i = 0; i < n_paths; ++i) {
        const PricePath path = simulate_price_path(sc.params, grid, seed, i);
        const EquilibriumSolution sol =
            solve_pathwise(sc, path, grid, SolveMethod::closed_form);
        const double g = gateaux_derivative(sc, *grid, sol.alpha1, sol.alpha2, beta,
                                            which, &path);
        acc.add(g);
        acc2.add(g * g);
    }
    EnsembleGateaux out;
    const double n = static_cast<double>(n_paths);
    out.mean = acc.sum / n;
    const double var = std::max(0.0, acc2.sum / n - out.mean * out.mean);
    out.standard_error = std::sqrt(var / n);
    // d^2/deps^2 J(alpha + eps beta) = lambda ||beta||^2 + sigma ||B||^2, path-free.
    auto b_path = cumtrapz(*grid, beta.beta);
    std::vector<double> b2(grid->size());
    for (std::size_t k = 0; k < grid->size(); ++k) b2[k] = b_path[k] * b_path[k];
    const double nb = beta.norm();
    out.curvature = 0.5 * (sc.params.lambda * nb * nb + sc.params.sigma * trapz(*grid, b2));
    return out;
}

/// One row of the plastic/elastic phenomenology table for the second
/// (responding) player of the scenario template.
struct SweepRow {
    double gamma = 0.0;
    double lambda = 0.0;
    double w5_at_0 = 0.0;
    double min_x2 = 0.0;
    double t_argmin_x2 = 0.0;
    double max_x2 = 0.0;
    double t_argmax_x2 = 0.0;
    bool predation = false;     // responder's inventory crosses below zero
    bool cooperation = false;   // responder builds positive mid-horizon inventory
    int sign_w3_minus_w4_at_0 = 0;
    int sign_w3_minus_w4_at_half = 0;
};

/// Deterministic-template sweep over permanent/temporary impact values.
/// Flags use a small dead band so that rounding-level excursions do not
/// register as behavioral regimes.
inline std::vector<SweepRow> regime_sweep(const ScenarioSpec& scenario_template,
                                          const std::vector<double>& gamma_values,
                                          const std::vector<double>& lambda_values,
                                          const GridSpec& gridspec,
                                          double flag_threshold = 1e-3) {
    if (gamma_values.empty() || lambda_values.empty())
        throw std::invalid_argument("regime_sweep: parameter lists must be nonempty");
    if (!scenario_template.deterministic())
        throw std::invalid_argument("regime_sweep: template must be deterministic");
    std::vector<SweepRow> rows;
    rows.reserve(gamma_values.size() * lambda_values.size());
    for (double g : gamma_values) {
        for (double l : lambda_values) {
            ScenarioSpec sc = scenario_template;
            sc.params.gamma = g;
            sc.params.lambda = l;
            sc.validate();
            auto grid = gridspec.build_shared(sc.params.horizon);
            const auto sol = solve_deterministic(sc, grid, SolveMethod::closed_form);

            SweepRow row;
            row.gamma = g;
            row.lambda = l;
            row.w5_at_0 = weights_at(sc.params, 0.0).w5;
            row.min_x2 = std::numeric_limits<double>::infinity();
            row.max_x2 = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < grid->size(); ++k) {
                if (sol.x2[k] < row.min_x2) {
                    row.min_x2 = sol.x2[k];
                    row.t_argmin_x2 = grid->nodes[k];
                }
                if (sol.x2[k] > row.max_x2) {
                    row.max_x2 = sol.x2[k];
                    row.t_argmax_x2 = grid->nodes[k];
                }
            }
            row.predation = row.min_x2 < -flag_threshold;
            row.cooperation = row.max_x2 > flag_threshold;
            auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
            const auto w0 = weights_at(sc.params, 0.0);
            const auto wh = weights_at(sc.params, 0.5 * sc.params.horizon);
            row.sign_w3_minus_w4_at_0 = sgn(w0.w3 - w0.w4);
            row.sign_w3_minus_w4_at_half = sgn(wh.w3 - wh.w4);
            rows.push_back(row);
        }
    }
    return rows;
}

/// Bisection for the permanent-impact level at which w5(0) changes sign,
/// holding sigma, lambda, T fixed. Requires a sign change on [lo, hi].
inline double w5_sign_flip_gamma(double sigma, double lambda, double T, double lo,
                                 double hi, double tol = 1e-10) {
    auto w5_at_zero = [&](double g) {
        ModelParams p{lambda, g, sigma, T};
        return weights_at(p, 0.0).w5;
    };
    double f_lo = w5_at_zero(lo);
    double f_hi = w5_at_zero(hi);
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0))
        throw std::invalid_argument("w5_sign_flip_gamma: no sign change on [lo, hi]");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = w5_at_zero(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace duotrack
