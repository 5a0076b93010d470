#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "duotrack/coefficients.hpp"
#include "duotrack/grid.hpp"
#include "duotrack/signals.hpp"
#include "duotrack/targets.hpp"

namespace duotrack {

enum class SolveMethod { closed_form, ode };

/// Equilibrium holdings and trading rates on a grid. Rates satisfy the
/// feedback law alpha_i = urgency * (xi_hat_i - w5 * X_j - X_i) nodewise.
struct EquilibriumSolution {
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> x1;
    std::vector<double> x2;
    std::vector<double> alpha1;
    std::vector<double> alpha2;
    SignalPath signal;
    SolveMethod method = SolveMethod::closed_form;
    double terminal_gap1 = 0.0;
    double terminal_gap2 = 0.0;
};

struct OdeOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    int max_subdivisions = 16;  // 0 disables error control (plain per-cell RK4)
};

inline std::pair<double, double> to_sum_diff(double x1, double x2) {
    return {x1 + x2, x1 - x2};
}
inline std::pair<double, double> from_sum_diff(double s, double d) {
    return {0.5 * (s + d), 0.5 * (s - d)};
}
inline std::pair<std::vector<double>, std::vector<double>> to_sum_diff(
    const std::vector<double>& x1, const std::vector<double>& x2) {
    std::vector<double> s(x1.size()), d(x1.size());
    for (std::size_t k = 0; k < x1.size(); ++k) {
        s[k] = x1[k] + x2[k];
        d[k] = x1[k] - x2[k];
    }
    return {std::move(s), std::move(d)};
}
inline std::pair<std::vector<double>, std::vector<double>> from_sum_diff(
    const std::vector<double>& s, const std::vector<double>& d) {
    std::vector<double> x1(s.size()), x2(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        x1[k] = 0.5 * (s[k] + d[k]);
        x2[k] = 0.5 * (s[k] - d[k]);
    }
    return {std::move(x1), std::move(x2)};
}

namespace detail {

inline void require_same_grid(const SignalPath& signal, const TimeGrid& grid,
                              const char* who) {
    if (signal.grid.get() == &grid) return;
    if (signal.grid && signal.grid->nodes == grid.nodes) return;
    throw std::invalid_argument(std::string(who) +
                                ": signal was computed on a different grid");
}

inline void require_solvable(const ScenarioSpec& sc, const char* who) {
    sc.validate();
    if (sc.has_random_terminal())
        throw std::invalid_argument(
            std::string(who) +
            ": random terminal constraints are rejected by the solvers");
}

inline SignalEvaluator make_evaluator(const ScenarioSpec& sc, const SignalPath& signal) {
    if (sc.deterministic()) return SignalEvaluator::exact_deterministic(sc);
    return SignalEvaluator::interpolating(std::make_shared<SignalPath>(signal));
}

inline void fill_feedback_rates(const ScenarioSpec& sc, EquilibriumSolution& sol) {
    const auto n = sol.grid->size();
    sol.alpha1.resize(n);
    sol.alpha2.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = sol.grid->nodes[k];
        const auto [cp, cm] = c_functions(sc.params, t);
        const double urgency = (cp + cm) / (2.0 * sc.params.lambda);
        const double w5 = weights_at(sc.params, t).w5;
        sol.alpha1[k] =
            urgency * (sol.signal.xi_hat_1[k] - w5 * sol.x2[k] - sol.x1[k]);
        sol.alpha2[k] =
            urgency * (sol.signal.xi_hat_2[k] - w5 * sol.x1[k] - sol.x2[k]);
    }
}

// Gauss-Legendre 3 on [0,1].
inline constexpr std::array<double, 3> kGl3Nodes = {
    0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
inline constexpr std::array<double, 3> kGl3Weights = {5.0 / 18.0, 8.0 / 18.0,
                                                      5.0 / 18.0};

}  // namespace detail

/// Variation-of-constants solution in sum/difference coordinates: each cell
/// advances X+- by the closed-form propagator and a 3-point Gauss rule on
/// (c+ + c-) xi_hat+- propagator / (2 lambda). The propagator absorbs the
/// horizon singularity, so the integrand stays bounded on the geometric tail.
inline EquilibriumSolution solve_closed_form(const ScenarioSpec& sc,
                                             const SignalPath& signal,
                                             std::shared_ptr<const TimeGrid> grid) {
    detail::require_solvable(sc, "solve_closed_form");
    detail::require_same_grid(signal, *grid, "solve_closed_form");
    const ModelParams& p = sc.params;
    const auto ev = detail::make_evaluator(sc, signal);
    const auto n = grid->size();

    std::vector<double> xs(n), xd(n);
    xs[0] = sc.x1 + sc.x2;
    xd[0] = sc.x1 - sc.x2;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double t0 = grid->nodes[k];
        const double t1 = grid->nodes[k + 1];
        const double h = t1 - t0;
        double q_plus = 0.0, q_minus = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double s = t0 + detail::kGl3Nodes[j] * h;
            const auto [cp, cm] = c_functions(p, s);
            const double u = (cp + cm) / (2.0 * p.lambda);
            const auto [s1, s2] = ev(s);
            const double wj = detail::kGl3Weights[j] * h * u;
            q_plus += wj * (s1 + s2) * propagator(p, Branch::plus, s, t1);
            q_minus += wj * (s1 - s2) * propagator(p, Branch::minus, s, t1);
        }
        xs[k + 1] = xs[k] * propagator(p, Branch::plus, t0, t1) + q_plus;
        xd[k + 1] = xd[k] * propagator(p, Branch::minus, t0, t1) + q_minus;
    }

    EquilibriumSolution sol;
    sol.grid = grid;
    std::tie(sol.x1, sol.x2) = from_sum_diff(xs, xd);
    sol.signal = signal;
    sol.method = SolveMethod::closed_form;
    detail::fill_feedback_rates(sc, sol);
    sol.terminal_gap1 = std::abs(sol.x1.back() - sc.target1.terminal);
    sol.terminal_gap2 = std::abs(sol.x2.back() - sc.target2.terminal);
    return sol;
}

/// Direct integration of the coupled feedback ODE with a classical
/// fourth-order Runge-Kutta stepper on the refined grid, independent of the
/// variation-of-constants route. Each cell is re-integrated with doubled
/// substep counts until the step-doubling error estimate meets tolerance;
/// exceeding the retry budget raises SolverFailure with the failing time.
inline EquilibriumSolution solve_ode(const ScenarioSpec& sc, const SignalPath& signal,
                                     std::shared_ptr<const TimeGrid> grid,
                                     const OdeOptions& opts = {}) {
    detail::require_solvable(sc, "solve_ode");
    detail::require_same_grid(signal, *grid, "solve_ode");
    const ModelParams& p = sc.params;
    const auto ev = detail::make_evaluator(sc, signal);

    auto deriv = [&](double t, const std::array<double, 2>& y) {
        const auto [cp, cm] = c_functions(p, t);
        const double u = (cp + cm) / (2.0 * p.lambda);
        const double w5 = weights_at(p, t).w5;
        const auto [s1, s2] = ev(t);
        return std::array<double, 2>{u * (s1 - w5 * y[1] - y[0]),
                                     u * (s2 - w5 * y[0] - y[1])};
    };
    auto rk4_step = [&](double t, double h, std::array<double, 2> y) {
        const auto k1 = deriv(t, y);
        const auto k2 = deriv(t + 0.5 * h,
                              {y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]});
        const auto k3 = deriv(t + 0.5 * h,
                              {y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]});
        const auto k4 = deriv(t + h, {y[0] + h * k3[0], y[1] + h * k3[1]});
        y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        return y;
    };
    auto integrate_cell = [&](double t0, double t1, std::array<double, 2> y,
                              std::size_t substeps) {
        const double h = (t1 - t0) / static_cast<double>(substeps);
        for (std::size_t i = 0; i < substeps; ++i)
            y = rk4_step(t0 + static_cast<double>(i) * h, h, y);
        return y;
    };

    const auto n = grid->size();
    EquilibriumSolution sol;
    sol.grid = grid;
    sol.x1.resize(n);
    sol.x2.resize(n);
    sol.x1[0] = sc.x1;
    sol.x2[0] = sc.x2;
    std::array<double, 2> y{sc.x1, sc.x2};
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double t0 = grid->nodes[k];
        const double t1 = grid->nodes[k + 1];
        if (opts.max_subdivisions <= 0) {
            y = rk4_step(t0, t1 - t0, y);
        } else {
            std::size_t m = 1;
            std::array<double, 2> coarse = integrate_cell(t0, t1, y, m);
            for (;;) {
                const std::array<double, 2> fine = integrate_cell(t0, t1, y, 2 * m);
                const double scale =
                    opts.abs_tol +
                    opts.rel_tol * std::max({std::abs(fine[0]), std::abs(fine[1]), 1.0});
                const double err = std::max(std::abs(fine[0] - coarse[0]),
                                            std::abs(fine[1] - coarse[1])) /
                                   15.0;
                if (err <= scale) {
                    y = fine;
                    break;
                }
                if (m >= (std::size_t{1} << opts.max_subdivisions))
                    throw SolverFailure(
                        "solve_ode: step rejection beyond retry budget", t0);
                m *= 2;
                coarse = fine;
            }
        }
        sol.x1[k + 1] = y[0];
        sol.x2[k + 1] = y[1];
    }

    sol.signal = signal;
    sol.method = SolveMethod::ode;
    detail::fill_feedback_rates(sc, sol);
    sol.terminal_gap1 = std::abs(sol.x1.back() - sc.target1.terminal);
    sol.terminal_gap2 = std::abs(sol.x2.back() - sc.target2.terminal);
    return sol;
}

/// Builds the signal for a deterministic scenario and solves it.
inline EquilibriumSolution solve_deterministic(const ScenarioSpec& sc,
                                               std::shared_ptr<const TimeGrid> grid,
                                               SolveMethod method,
                                               const OdeOptions& opts = {}) {
    auto signal = signal_deterministic(sc, grid);
    return method == SolveMethod::closed_form
               ? solve_closed_form(sc, signal, std::move(grid))
               : solve_ode(sc, signal, std::move(grid), opts);
}

/// Builds the pathwise signal for a martingale-class scenario and solves it.
inline EquilibriumSolution solve_pathwise(const ScenarioSpec& sc, const PricePath& path,
                                          std::shared_ptr<const TimeGrid> grid,
                                          SolveMethod method = SolveMethod::closed_form,
                                          const OdeOptions& opts = {}) {
    auto signal = signal_martingale(sc, path, grid);
    return method == SolveMethod::closed_form
               ? solve_closed_form(sc, signal, std::move(grid))
               : solve_ode(sc, signal, std::move(grid), opts);
}

/// Feedback trading rates alpha_i = urgency * (xi_hat_i - w5 X_j - X_i)
/// recomputed from the stored holdings and signal.
inline std::pair<std::vector<double>, std::vector<double>> trading_rates(
    const ModelParams& p, const EquilibriumSolution& sol) {
    const auto n = sol.grid->size();
    std::vector<double> a1(n), a2(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = sol.grid->nodes[k];
        const auto [cp, cm] = c_functions(p, t);
        const double u = (cp + cm) / (2.0 * p.lambda);
        const double w5 = weights_at(p, t).w5;
        a1[k] = u * (sol.signal.xi_hat_1[k] - w5 * sol.x2[k] - sol.x1[k]);
        a2[k] = u * (sol.signal.xi_hat_2[k] - w5 * sol.x1[k] - sol.x2[k]);
    }
    return {std::move(a1), std::move(a2)};
}

/// Single-player optimal liquidation baseline. Only sigma, lambda and the
/// horizon enter; the permanent-impact coefficient plays no role here.
struct SinglePlayerSolution {
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> x;
    std::vector<double> alpha;
};

inline SinglePlayerSolution single_player_liquidation(
    const ModelParams& p, double x0, std::shared_ptr<const TimeGrid> grid) {
    p.validate();
    if (!std::isfinite(x0))
        throw std::invalid_argument("single_player_liquidation: x0 must be finite");
    const double kappa = std::sqrt(p.sigma / p.lambda);
    const double T = p.horizon;
    const double denom = -std::expm1(-2.0 * kappa * T);
    SinglePlayerSolution sol;
    sol.grid = grid;
    const auto n = grid->size();
    sol.x.resize(n);
    sol.alpha.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = grid->nodes[k];
        const double tau = T - t;
        // sinh(kappa tau)/sinh(kappa T) and the matching coth, in
        // overflow-free exponential form.
        const double ratio = std::exp(-kappa * t) * (-std::expm1(-2.0 * kappa * tau)) / denom;
        sol.x[k] = x0 * ratio;
        sol.alpha[k] = -kappa * detail::coth_positive(kappa * tau) * sol.x[k];
    }
    return sol;
}

}  // namespace duotrack
