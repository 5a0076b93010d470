#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "duotrack/coefficients.hpp"
#include "duotrack/grid.hpp"
#include "duotrack/targets.hpp"

namespace duotrack {

/// Optimal signal processes of both players sampled on a grid. The sum and
/// difference columns are exact nodewise combinations of the player columns.
struct SignalPath {
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> xi_hat_1;
    std::vector<double> xi_hat_2;
    std::vector<double> xi_hat_sum;
    std::vector<double> xi_hat_diff;
};

/// Cumulative forecast processes Y+- and terminal forecast martingales M+-.
/// For deterministic scenarios M+- are constant along the grid.
///
/// The signals depend on M+- and Y+- only through the differences M - Y,
/// which stay O(1/weight) while M and Y themselves grow like
/// e^{(gamma/lambda + sqrt(dm)/lambda) T} for the minus pair; subtracting the
/// materialized columns loses all precision near the horizon once that scale
/// passes ~1e16. The m_minus_y columns therefore carry the differences
/// accumulated from the small (horizon) end and are the ones to use in
/// reconstruction identities.
struct AuxProcesses {
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> y_plus;
    std::vector<double> y_minus;
    std::vector<double> m_plus;
    std::vector<double> m_minus;
    std::vector<double> m_minus_y_plus;
    std::vector<double> m_minus_y_minus;
};

/// Closed-form integral of the forecast kernel over a sub-interval:
/// int_a^b K(t,u) du for t <= a <= b <= T, which = 1 or 2. Additive over
/// adjacent pieces and equal to 1 over the full interval [t,T] up to the
/// agreement between the coth-based weight ratio and the exponential
/// antiderivative (~1e-13 for time-to-maturity above ~1e-6 T; closer to the
/// horizon the weight ratio w1/w3 (w2/w4) is cancellation-limited).
inline double kernel_piece_integral(const ModelParams& p, int which, double t,
                                    double a, double b) {
    if (!(t <= a && a <= b && b <= p.horizon))
        throw std::domain_error("kernel_piece_integral: need t <= a <= b <= T");
    detail::require_before_horizon(p, t, "kernel_piece_integral");
    if (a == b) return 0.0;
    const auto form = (which == 1) ? detail::kernel_form_1(p) : detail::kernel_form_2(p);
    if (which != 1 && which != 2)
        throw std::invalid_argument("kernel_piece_integral: which must be 1 or 2");
    const double tau_anchor = p.horizon - t;
    const double total = form.scaled_antiderivative(tau_anchor, tau_anchor);
    const double piece = form.scaled_antiderivative(p.horizon - a, tau_anchor) -
                         form.scaled_antiderivative(p.horizon - b, tau_anchor);
    return detail::kernel_mass_one(p, which, t) * piece / total;
}

namespace detail {

/// Sum/difference target values on a common partition of [0,T]. Only defined
/// for deterministic targets.
struct PiecewisePair {
    std::vector<double> edges;  // 0 = e_0 < ... < e_m = T
    std::vector<double> v_sum;  // per piece [e_i, e_{i+1})
    std::vector<double> v_diff;
};

inline PiecewisePair merged_deterministic_targets(const ScenarioSpec& sc) {
    const double T = sc.params.horizon;
    std::vector<double> edges{0.0, T};
    for (const auto* t : {&sc.target1, &sc.target2})
        for (double b : t->breakpoints)
            if (b > 0.0 && b < T) edges.push_back(b);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    PiecewisePair out;
    out.edges = edges;
    out.v_sum.reserve(edges.size() - 1);
    out.v_diff.reserve(edges.size() - 1);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double mid = 0.5 * (edges[i] + edges[i + 1]);
        const double a = target_value(sc.target1, nullptr, sc.params, mid);
        const double b = target_value(sc.target2, nullptr, sc.params, mid);
        out.v_sum.push_back(a + b);
        out.v_diff.push_back(a - b);
    }
    return out;
}

/// Normalized kernel average of a piecewise-constant function over [t,T]:
/// sum_i v_i * int K(t,u) du over piece_i, with the exactly-normalized
/// antiderivative ratio (stable at every grid node including the last).
inline double kernel_average_piecewise(const ModelParams& p, const ExpSinhForm& form,
                                       const std::vector<double>& edges,
                                       const std::vector<double>& values, double t) {
    const double T = p.horizon;
    const double tau_anchor = T - t;
    const double total = form.scaled_antiderivative(tau_anchor, tau_anchor);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double b = edges[i + 1];
        if (b <= t) continue;
        const double a = std::max(edges[i], t);
        const double piece = form.scaled_antiderivative(T - a, tau_anchor) -
                             form.scaled_antiderivative(T - b, tau_anchor);
        acc += values[i] * piece;
    }
    return acc / total;
}

}  // namespace detail

/// Evaluates the pair (xi_hat_1, xi_hat_2) at arbitrary times. Two modes:
/// exact closed-form evaluation for deterministic scenarios, and piecewise
/// linear interpolation of a sampled SignalPath (used pathwise for
/// stochastic scenarios, where the signal is only known at grid nodes).
class SignalEvaluator {
public:
    static SignalEvaluator exact_deterministic(const ScenarioSpec& sc) {
        if (!sc.deterministic() || sc.has_random_terminal())
            throw std::invalid_argument(
                "SignalEvaluator: exact evaluation needs deterministic targets "
                "and terminals");
        SignalEvaluator ev;
        ev.exact_ = true;
        ev.params_ = sc.params;
        ev.xi_cap_sum_ = sc.target1.terminal + sc.target2.terminal;
        ev.xi_cap_diff_ = sc.target1.terminal - sc.target2.terminal;
        ev.pieces_ = detail::merged_deterministic_targets(sc);
        ev.form1_ = detail::kernel_form_1(sc.params);
        ev.form2_ = detail::kernel_form_2(sc.params);
        return ev;
    }

    static SignalEvaluator interpolating(std::shared_ptr<const SignalPath> path) {
        SignalEvaluator ev;
        ev.exact_ = false;
        ev.path_ = std::move(path);
        return ev;
    }

    [[nodiscard]] std::pair<double, double> operator()(double t) const {
        if (exact_) {
            const Weights w = weights_at(params_, t);
            const double i1 = detail::kernel_average_piecewise(
                params_, form1_, pieces_.edges, pieces_.v_sum, t);
            const double i2 = detail::kernel_average_piecewise(
                params_, form2_, pieces_.edges, pieces_.v_diff, t);
            const double common = w.w1 * xi_cap_sum_ + w.w3 * i1;
            const double anti = w.w2 * xi_cap_diff_ + w.w4 * i2;
            return {common + anti, common - anti};
        }
        const auto& nodes = path_->grid->nodes;
        auto it = std::lower_bound(nodes.begin(), nodes.end(), t);
        if (it == nodes.end()) return {path_->xi_hat_1.back(), path_->xi_hat_2.back()};
        const auto k = static_cast<std::size_t>(it - nodes.begin());
        if (*it == t || k == 0) return {path_->xi_hat_1[k], path_->xi_hat_2[k]};
        const double w = (t - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
        return {(1.0 - w) * path_->xi_hat_1[k - 1] + w * path_->xi_hat_1[k],
                (1.0 - w) * path_->xi_hat_2[k - 1] + w * path_->xi_hat_2[k]};
    }

private:
    bool exact_ = false;
    ModelParams params_;
    double xi_cap_sum_ = 0.0;
    double xi_cap_diff_ = 0.0;
    detail::PiecewisePair pieces_;
    detail::ExpSinhForm form1_, form2_;
    std::shared_ptr<const SignalPath> path_;
};

namespace detail {

inline SignalPath assemble_signal_path(std::shared_ptr<const TimeGrid> grid,
                                       std::vector<double> xi1,
                                       std::vector<double> xi2) {
    SignalPath s;
    s.grid = std::move(grid);
    const auto n = xi1.size();
    s.xi_hat_sum.resize(n);
    s.xi_hat_diff.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        s.xi_hat_sum[k] = xi1[k] + xi2[k];
        s.xi_hat_diff[k] = xi1[k] - xi2[k];
    }
    s.xi_hat_1 = std::move(xi1);
    s.xi_hat_2 = std::move(xi2);
    return s;
}

}  // namespace detail

/// Optimal signals for deterministic targets: the kernel averages of future
/// target positions are integrated exactly piece by piece.
inline SignalPath signal_deterministic(const ScenarioSpec& sc,
                                       std::shared_ptr<const TimeGrid> grid) {
    sc.validate();
    if (!sc.deterministic())
        throw std::invalid_argument(
            "signal_deterministic: stochastic target kinds are unsupported here");
    if (sc.has_random_terminal())
        throw std::invalid_argument(
            "signal_deterministic: random terminal constraints are unsupported");
    const auto ev = SignalEvaluator::exact_deterministic(sc);
    std::vector<double> xi1(grid->size()), xi2(grid->size());
    for (std::size_t k = 0; k < grid->size(); ++k) {
        const auto [a, b] = ev(grid->nodes[k]);
        xi1[k] = a;
        xi2[k] = b;
    }
    return detail::assemble_signal_path(std::move(grid), std::move(xi1), std::move(xi2));
}

/// Optimal signals along one price path for martingale-class targets: the
/// conditional forecast of xi_u collapses to xi_t and the kernels integrate
/// to one, so the kernel averages reduce to the current target values.
inline SignalPath signal_martingale(const ScenarioSpec& sc, const PricePath& path,
                                    std::shared_ptr<const TimeGrid> grid) {
    sc.validate();
    if (!sc.martingale_class())
        throw std::invalid_argument(
            "signal_martingale: both targets must be of martingale class");
    if (sc.has_random_terminal())
        throw std::invalid_argument(
            "signal_martingale: random terminal constraints are unsupported");
    const double cap_sum = sc.target1.terminal + sc.target2.terminal;
    const double cap_diff = sc.target1.terminal - sc.target2.terminal;
    std::vector<double> xi1(grid->size()), xi2(grid->size());
    for (std::size_t k = 0; k < grid->size(); ++k) {
        const double t = grid->nodes[k];
        const Weights w = weights_at(sc.params, t);
        const double a = target_value(sc.target1, &path, sc.params, t);
        const double b = target_value(sc.target2, &path, sc.params, t);
        const double common = w.w1 * cap_sum + w.w3 * (a + b);
        const double anti = w.w2 * cap_diff + w.w4 * (a - b);
        xi1[k] = common + anti;
        xi2[k] = common - anti;
    }
    return detail::assemble_signal_path(std::move(grid), std::move(xi1), std::move(xi2));
}

namespace detail {

/// Exact integral of xi_sum/diff * g over [a,b] for piecewise-constant
/// targets, splitting at the partition edges.
inline double piecewise_weighted_integral(const ModelParams& p, const ExpSinhForm& form,
                                          const std::vector<double>& edges,
                                          const std::vector<double>& values, double a,
                                          double b) {
    const double T = p.horizon;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double lo = std::max(edges[i], a);
        const double hi = std::min(edges[i + 1], b);
        if (hi <= lo) continue;
        acc += values[i] * form.integral(T - hi, T - lo);
    }
    return acc;
}

}  // namespace detail

/// Cumulative forecast processes. Deterministic scenarios use exact piecewise
/// integration and constant M+-; martingale scenarios use the trapezoid rule
/// for Y+- and the closed-form conditional remainder for M+-.
inline AuxProcesses aux_processes(const ScenarioSpec& sc, const PricePath* path,
                                  std::shared_ptr<const TimeGrid> grid) {
    sc.validate();
    if (sc.has_random_terminal())
        throw std::invalid_argument("aux_processes: random terminals unsupported");
    const ModelParams& p = sc.params;
    const double T = p.horizon;
    const auto g1 = detail::kernel_form_1(p);
    const auto g2 = detail::kernel_form_2(p);
    const double cap_sum = sc.target1.terminal + sc.target2.terminal;
    const double cap_diff = sc.target1.terminal - sc.target2.terminal;
    const auto n = grid->size();

    AuxProcesses aux;
    aux.y_plus.assign(n, 0.0);
    aux.y_minus.assign(n, 0.0);
    aux.m_plus.assign(n, 0.0);
    aux.m_minus.assign(n, 0.0);

    aux.m_minus_y_plus.assign(n, 0.0);
    aux.m_minus_y_minus.assign(n, 0.0);

    if (sc.deterministic()) {
        const auto pieces = detail::merged_deterministic_targets(sc);
        for (std::size_t k = 1; k < n; ++k) {
            aux.y_plus[k] = aux.y_plus[k - 1] +
                            detail::piecewise_weighted_integral(
                                p, g1, pieces.edges, pieces.v_sum, grid->nodes[k - 1],
                                grid->nodes[k]);
            aux.y_minus[k] = aux.y_minus[k - 1] +
                             detail::piecewise_weighted_integral(
                                 p, g2, pieces.edges, pieces.v_diff, grid->nodes[k - 1],
                                 grid->nodes[k]);
        }
        const double y_plus_total = detail::piecewise_weighted_integral(
            p, g1, pieces.edges, pieces.v_sum, 0.0, T);
        const double y_minus_total = detail::piecewise_weighted_integral(
            p, g2, pieces.edges, pieces.v_diff, 0.0, T);
        std::fill(aux.m_plus.begin(), aux.m_plus.end(), cap_sum + y_plus_total);
        std::fill(aux.m_minus.begin(), aux.m_minus.end(), cap_diff + y_minus_total);

        // remaining-forecast differences, accumulated from the horizon end
        double tail_plus = detail::piecewise_weighted_integral(
            p, g1, pieces.edges, pieces.v_sum, grid->nodes[n - 1], T);
        double tail_minus = detail::piecewise_weighted_integral(
            p, g2, pieces.edges, pieces.v_diff, grid->nodes[n - 1], T);
        aux.m_minus_y_plus[n - 1] = cap_sum + tail_plus;
        aux.m_minus_y_minus[n - 1] = cap_diff + tail_minus;
        for (std::size_t k = n - 1; k-- > 0;) {
            tail_plus += detail::piecewise_weighted_integral(
                p, g1, pieces.edges, pieces.v_sum, grid->nodes[k], grid->nodes[k + 1]);
            tail_minus += detail::piecewise_weighted_integral(
                p, g2, pieces.edges, pieces.v_diff, grid->nodes[k], grid->nodes[k + 1]);
            aux.m_minus_y_plus[k] = cap_sum + tail_plus;
            aux.m_minus_y_minus[k] = cap_diff + tail_minus;
        }
        aux.grid = std::move(grid);
        return aux;
    }

    if (!sc.martingale_class() || path == nullptr)
        throw std::invalid_argument(
            "aux_processes: stochastic scenarios need martingale-class targets "
            "and a price path");

    std::vector<double> xi_sum(n), xi_diff(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double a = target_value(sc.target1, path, p, grid->nodes[k]);
        const double b = target_value(sc.target2, path, p, grid->nodes[k]);
        xi_sum[k] = a + b;
        xi_diff[k] = a - b;
    }
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = grid->dt(k - 1);
        aux.y_plus[k] = aux.y_plus[k - 1] +
                        0.5 * dt *
                            (xi_sum[k - 1] * g1.density(T - grid->nodes[k - 1]) +
                             xi_sum[k] * g1.density(T - grid->nodes[k]));
        aux.y_minus[k] = aux.y_minus[k - 1] +
                         0.5 * dt *
                             (xi_diff[k - 1] * g2.density(T - grid->nodes[k - 1]) +
                              xi_diff[k] * g2.density(T - grid->nodes[k]));
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double tau = T - grid->nodes[k];
        const double rem_plus = xi_sum[k] * g1.integral(0.0, tau);
        const double rem_minus = xi_diff[k] * g2.integral(0.0, tau);
        aux.m_plus[k] = cap_sum + aux.y_plus[k] + rem_plus;
        aux.m_minus[k] = cap_diff + aux.y_minus[k] + rem_minus;
        aux.m_minus_y_plus[k] = cap_sum + rem_plus;
        aux.m_minus_y_minus[k] = cap_diff + rem_minus;
    }
    aux.grid = std::move(grid);
    return aux;
}

}  // namespace duotrack
