#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "duotrack/equilibrium.hpp"
#include "duotrack/quadrature.hpp"
#include "duotrack/random.hpp"

namespace duotrack {

/// An admissible deviation direction: a rate path whose time integral
/// vanishes, so that adding epsilon * beta to any constrained strategy keeps
/// the terminal constraint intact.
struct Perturbation {
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> beta;

    /// Piecewise-linear bridge with Gaussian knot values, pinned to zero at
    /// both ends and mean-adjusted so the trapezoid integral over the grid is
    /// exactly zero. Knots are snapped to grid nodes, which keeps the bridge
    /// exactly representable on the grid (no quadrature error from kinks
    /// falling inside cells).
    static Perturbation random_bridge(std::shared_ptr<const TimeGrid> grid,
                                      std::size_t n_knots, std::uint64_t seed) {
        if (n_knots < 1)
            throw std::invalid_argument("Perturbation: need at least one knot");
        const double T = grid->horizon;
        const auto& nodes = grid->nodes;
        std::mt19937_64 engine(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);

        std::vector<std::size_t> knot_idx{0};
        for (std::size_t j = 1; j <= n_knots; ++j) {
            const double t = T * static_cast<double>(j) / static_cast<double>(n_knots + 1);
            const auto it = std::lower_bound(nodes.begin(), nodes.end(), t);
            auto k = static_cast<std::size_t>(it - nodes.begin());
            if (k >= nodes.size()) k = nodes.size() - 1;
            if (k > knot_idx.back()) knot_idx.push_back(k);
        }
        if (knot_idx.back() < nodes.size() - 1) knot_idx.push_back(nodes.size() - 1);

        std::vector<double> knot_v(knot_idx.size(), 0.0);
        for (std::size_t j = 1; j + 1 < knot_idx.size(); ++j) knot_v[j] = gauss(engine);

        Perturbation out;
        out.beta.resize(grid->size());
        std::size_t seg = 0;
        for (std::size_t k = 0; k < grid->size(); ++k) {
            while (seg + 2 < knot_idx.size() && knot_idx[seg + 1] < k) ++seg;
            const double t0 = nodes[knot_idx[seg]];
            const double t1 = nodes[knot_idx[seg + 1]];
            const double w = (nodes[k] - t0) / (t1 - t0);
            out.beta[k] = (1.0 - w) * knot_v[seg] + w * knot_v[seg + 1];
        }
        const double span_t = grid->back() - grid->front();
        const double mean = trapz(*grid, out.beta) / span_t;
        for (auto& b : out.beta) b -= mean;
        out.grid = std::move(grid);
        return out;
    }

    [[nodiscard]] double norm() const { return l2_norm(*grid, beta); }
    [[nodiscard]] double integral() const { return trapz(*grid, beta); }
};

namespace detail {

inline std::vector<double> target_values_on_grid(const ScenarioSpec& sc, int which,
                                                 const PricePath* path,
                                                 const TimeGrid& grid) {
    const TargetSpec& tgt = (which == 1) ? sc.target1 : sc.target2;
    if (!tgt.deterministic() && path == nullptr)
        throw std::invalid_argument(
            "cost evaluation: stochastic target needs a price path");
    std::vector<double> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        out[k] = target_value(tgt, path, sc.params, grid.nodes[k]);
    return out;
}

/// Interior discontinuity times of the scenario's targets (where equilibrium
/// rates have derivative jumps).
inline std::vector<double> jump_times(const ScenarioSpec& sc) {
    std::vector<double> out;
    for (const auto* t : {&sc.target1, &sc.target2})
        if (t->kind == TargetKind::piecewise_constant)
            for (double b : t->breakpoints)
                if (b > 0.0 && b < sc.params.horizon) out.push_back(b);
    return out;
}

/// Subinterval decomposition of the grid cells for the tracking integrals.
/// Piecewise-constant targets split cells at their breakpoints and carry the
/// exact (constant) level per subinterval; other kinds keep one subinterval
/// per cell with the node values at its endpoints.
struct TrackingCells {
    std::vector<std::size_t> offset;  // cell k owns subintervals [offset[k], offset[k+1])
    std::vector<double> u, v;
    std::vector<double> xi_u, xi_v;
};

inline TrackingCells tracking_cells(const ScenarioSpec& sc, int which,
                                    const PricePath* path, const TimeGrid& grid) {
    const TargetSpec& tgt = (which == 1) ? sc.target1 : sc.target2;
    TrackingCells cells;
    const auto n = grid.size();
    cells.offset.reserve(n);
    cells.offset.push_back(0);

    if (tgt.kind == TargetKind::piecewise_constant) {
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const double a = grid.nodes[k];
            const double b = grid.nodes[k + 1];
            std::vector<double> pts{a};
            for (double br : tgt.breakpoints)
                if (br > a && br < b) pts.push_back(br);
            pts.push_back(b);
            for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
                const double xi =
                    target_value(tgt, nullptr, sc.params, 0.5 * (pts[j] + pts[j + 1]));
                cells.u.push_back(pts[j]);
                cells.v.push_back(pts[j + 1]);
                cells.xi_u.push_back(xi);
                cells.xi_v.push_back(xi);
            }
            cells.offset.push_back(cells.u.size());
        }
        return cells;
    }

    const auto xi = target_values_on_grid(sc, which, path, grid);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        cells.u.push_back(grid.nodes[k]);
        cells.v.push_back(grid.nodes[k + 1]);
        cells.xi_u.push_back(xi[k]);
        cells.xi_v.push_back(xi[k + 1]);
        cells.offset.push_back(cells.u.size());
    }
    return cells;
}

/// Per-cell integrals of sigma/2 (X - xi)^2 (power = 2) or sigma (X - xi)
/// (power = 1) with X piecewise linear between the nodes and xi from the
/// subinterval decomposition; exact for those interpolants. When `alpha` is
/// nonempty (power = 1 only), each subinterval gets the Euler-Maclaurin
/// endpoint correction -len^2/12 (f'_v - f'_u) with f' = sigma * alpha, which
/// removes the O(h^2) bias of the trapezoid model for smooth rates.
inline std::vector<double> tracking_cell_integrals(const TrackingCells& cells,
                                                   const TimeGrid& grid,
                                                   std::span<const double> x_abs,
                                                   double sigma, int power,
                                                   std::span<const double> alpha = {}) {
    std::vector<double> out(grid.size() - 1, 0.0);
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double t0 = grid.nodes[k];
        const double h = grid.dt(k);
        double acc = 0.0;
        for (std::size_t j = cells.offset[k]; j < cells.offset[k + 1]; ++j) {
            const double wu = (cells.u[j] - t0) / h;
            const double wv = (cells.v[j] - t0) / h;
            const double xu = (1.0 - wu) * x_abs[k] + wu * x_abs[k + 1];
            const double xv = (1.0 - wv) * x_abs[k] + wv * x_abs[k + 1];
            const double a = xu - cells.xi_u[j];
            const double b = xv - cells.xi_v[j];
            const double len = cells.v[j] - cells.u[j];
            if (power == 2) {
                acc += 0.5 * sigma * len * (a * a + a * b + b * b) / 3.0;
            } else {
                acc += sigma * len * 0.5 * (a + b);
                if (!alpha.empty() && cells.offset[k + 1] - cells.offset[k] == 1)
                    acc -= sigma * len * len * len / (12.0 * h) *
                           (alpha[k + 1] - alpha[k]);
            }
        }
        out[k] = acc;
    }
    return out;
}

/// Second-order slope estimates at every node (nonuniform central stencils,
/// one-sided at the ends).
inline std::vector<double> fd_slopes(const TimeGrid& grid, std::span<const double> f) {
    const auto n = grid.size();
    std::vector<double> d(n);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double hm = grid.dt(k - 1);
        const double hp = grid.dt(k);
        d[k] = (-hp / (hm * (hm + hp))) * f[k - 1] +
               ((hp - hm) / (hm * hp)) * f[k] + (hm / (hp * (hm + hp))) * f[k + 1];
    }
    {
        const double h0 = grid.dt(0), h1 = grid.dt(1);
        d[0] = (-(2.0 * h0 + h1) / (h0 * (h0 + h1))) * f[0] +
               ((h0 + h1) / (h0 * h1)) * f[1] - (h0 / (h1 * (h0 + h1))) * f[2];
        const double hm = grid.dt(n - 2), hm2 = grid.dt(n - 3);
        d[n - 1] = (hm / (hm2 * (hm2 + hm))) * f[n - 3] -
                   ((hm2 + hm) / (hm2 * hm)) * f[n - 2] +
                   ((2.0 * hm + hm2) / (hm * (hm2 + hm))) * f[n - 1];
    }
    return d;
}

/// True when any of the given times lies within the slope-stencil reach of
/// cell k (the rates are not smooth there, so endpoint corrections are
/// suppressed).
inline bool near_kink(const TimeGrid& grid, std::size_t k,
                      const std::vector<double>& kinks) {
    if (kinks.empty()) return false;
    const auto n = grid.size();
    const double lo = grid.nodes[k >= 1 ? k - 1 : 0];
    const double hi = grid.nodes[std::min(k + 2, n - 1)];
    for (double b : kinks)
        if (b >= lo && b <= hi) return true;
    return false;
}

/// Cumulative integral of the rates with per-cell Euler-Maclaurin correction
/// from finite-difference slopes; fourth-order for smooth rates. Corrections
/// are dropped near the kink times (where the slope estimates straddle a
/// rate-derivative jump). out[0] = 0.
inline std::vector<double> cumulative_corrected(const TimeGrid& grid,
                                                std::span<const double> alpha,
                                                const std::vector<double>& kinks = {}) {
    const auto d = fd_slopes(grid, alpha);
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double h = grid.dt(k);
        double step = 0.5 * h * (alpha[k] + alpha[k + 1]);
        if (!near_kink(grid, k, kinks)) step -= h * h / 12.0 * (d[k + 1] - d[k]);
        out[k + 1] = out[k] + step;
    }
    return out;
}

}  // namespace detail

/// Cost functional of one player given both rate paths:
///   J = 1/2 sigma int (X_i - xi_i)^2 dt + lambda/2 int alpha_i (alpha_1+alpha_2) dt
///       + gamma int alpha_i (X_j - x_j) dt,
/// with holdings reconstructed from the rates by cumulative integration.
/// For stochastic targets the realized cost of one path is returned; ensemble
/// averaging lives in the Monte Carlo layer.
inline double cost_functional(const ScenarioSpec& sc, const TimeGrid& grid,
                              std::span<const double> alpha1,
                              std::span<const double> alpha2, int which,
                              const PricePath* path = nullptr) {
    if (which != 1 && which != 2)
        throw std::invalid_argument("cost_functional: which must be 1 or 2");
    if (alpha1.size() != grid.size() || alpha2.size() != grid.size())
        throw std::invalid_argument("cost_functional: rate/grid size mismatch");
    const ModelParams& p = sc.params;

    const auto own_alpha = (which == 1) ? alpha1 : alpha2;
    const double own_x0 = (which == 1) ? sc.x1 : sc.x2;

    auto own_x = cumtrapz(grid, own_alpha);
    for (auto& x : own_x) x += own_x0;
    auto other_x = cumtrapz(grid, (which == 1) ? alpha2 : alpha1);

    const auto cells = detail::tracking_cells(sc, which, path, grid);
    const auto track =
        detail::tracking_cell_integrals(cells, grid, own_x, p.sigma, 2);
    double j = 0.0;
    for (double c : track) j += c;

    std::vector<double> f(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        f[k] = 0.5 * p.lambda * own_alpha[k] * (alpha1[k] + alpha2[k]) +
               p.gamma * own_alpha[k] * other_x[k];
    return j + trapz(grid, f);
}

/// First-variation of the cost functional in an admissible direction beta:
///   <grad_i J_i, beta> = int beta_s ( lambda alpha_i + lambda/2 alpha_j
///       + gamma (X_j - x_j) + int_s^T (X_i - xi_i) sigma dt ) ds.
/// Vanishes at the equilibrium for every admissible beta.
inline double gateaux_derivative(const ScenarioSpec& sc, const TimeGrid& grid,
                                 std::span<const double> alpha1,
                                 std::span<const double> alpha2,
                                 const Perturbation& beta, int which,
                                 const PricePath* path = nullptr) {
    if (which != 1 && which != 2)
        throw std::invalid_argument("gateaux_derivative: which must be 1 or 2");
    if (beta.beta.size() != grid.size())
        throw std::invalid_argument("gateaux_derivative: perturbation grid mismatch");
    const ModelParams& p = sc.params;
    const auto own_alpha = (which == 1) ? alpha1 : alpha2;
    const auto other_alpha = (which == 1) ? alpha2 : alpha1;
    const double own_x0 = (which == 1) ? sc.x1 : sc.x2;

    // Deterministic rates are smooth away from the target jumps, so the
    // state reconstruction and the tail integrals take the cubic-accurate
    // corrections there; pathwise rates are rough and keep the plain
    // trapezoid model.
    const bool corrected = sc.deterministic();
    const auto kinks = detail::jump_times(sc);
    auto own_x = corrected ? detail::cumulative_corrected(grid, own_alpha, kinks)
                           : cumtrapz(grid, own_alpha);
    for (auto& x : own_x) x += own_x0;
    auto other_x = corrected
                       ? detail::cumulative_corrected(grid, other_alpha, kinks)
                       : cumtrapz(grid, other_alpha);

    const auto cells = detail::tracking_cells(sc, which, path, grid);
    const auto track_cells = detail::tracking_cell_integrals(
        cells, grid, own_x, p.sigma, 1,
        corrected ? own_alpha : std::span<const double>{});
    std::vector<double> tails(grid.size(), 0.0);
    for (std::size_t k = grid.size() - 1; k-- > 0;)
        tails[k] = tails[k + 1] + track_cells[k];

    std::vector<double> f(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
        f[k] = beta.beta[k] * (p.lambda * own_alpha[k] +
                               0.5 * p.lambda * other_alpha[k] +
                               p.gamma * other_x[k] + tails[k]);
    return trapz(grid, f);
}

namespace detail {

/// Second-order first derivative on a possibly nonuniform grid.
inline double central_difference(const TimeGrid& grid, std::span<const double> f,
                                 std::size_t k) {
    const double hm = grid.nodes[k] - grid.nodes[k - 1];
    const double hp = grid.nodes[k + 1] - grid.nodes[k];
    const double wl = hp / (hm * (hm + hp));
    const double wr = hm / (hp * (hm + hp));
    return -wl * f[k - 1] + (wl - wr) * f[k] + wr * f[k + 1];
}

}  // namespace detail

/// Maximum drift residual of the first-order-condition system
///   d(alpha_1 + alpha_2/2)/dt = (sigma/lambda)(X_1 - xi_1) - (gamma/lambda) alpha_2
/// (and the player-swapped counterpart) over interior nodes with
/// time-to-maturity at least 1% of the horizon, excluding nodes whose
/// difference stencil straddles a target discontinuity. Deterministic
/// scenarios only: along stochastic paths the residual would contain the
/// martingale increments.
inline double fbsde_residual(const ScenarioSpec& sc, const EquilibriumSolution& sol) {
    if (!sc.deterministic())
        throw std::invalid_argument(
            "fbsde_residual: unsupported for stochastic scenarios (martingale "
            "part is not observable from one path)");
    const ModelParams& p = sc.params;
    const TimeGrid& grid = *sol.grid;
    const auto n = grid.size();
    const auto xi1 = detail::target_values_on_grid(sc, 1, nullptr, grid);
    const auto xi2 = detail::target_values_on_grid(sc, 2, nullptr, grid);

    std::vector<double> combo1(n), combo2(n);
    for (std::size_t k = 0; k < n; ++k) {
        combo1[k] = sol.alpha1[k] + 0.5 * sol.alpha2[k];
        combo2[k] = sol.alpha2[k] + 0.5 * sol.alpha1[k];
    }
    const auto jumps = detail::jump_times(sc);
    const double t_cut = p.horizon * (1.0 - 0.01);

    double max_res = 0.0;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (grid.nodes[k] > t_cut) break;
        const double lo = grid.nodes[k >= 2 ? k - 2 : 0];
        const double hi = grid.nodes[std::min(k + 2, n - 1)];
        bool near_jump = false;
        for (double b : jumps)
            if (b >= lo && b <= hi) near_jump = true;
        if (near_jump) continue;

        const double d1 = detail::central_difference(grid, combo1, k);
        const double d2 = detail::central_difference(grid, combo2, k);
        const double rhs1 = p.sigma / p.lambda * (sol.x1[k] - xi1[k]) -
                            p.gamma / p.lambda * sol.alpha2[k];
        const double rhs2 = p.sigma / p.lambda * (sol.x2[k] - xi2[k]) -
                            p.gamma / p.lambda * sol.alpha1[k];
        max_res = std::max({max_res, std::abs(d1 - rhs1), std::abs(d2 - rhs2)});
    }
    return max_res;
}

/// Result of probing the equilibrium with random admissible deviations.
struct NashDeviationReport {
    std::size_t n_perturbations = 0;
    double max_abs_vertex = 0.0;           // worst parabola vertex offset
    double min_curvature = std::numeric_limits<double>::infinity();
    bool all_convex = true;
    double max_gateaux_over_norm = 0.0;    // worst |<grad J, beta>| / ||beta||
    [[nodiscard]] bool passes(double vertex_tol) const {
        return all_convex && max_abs_vertex < vertex_tol;
    }
};

namespace detail {

/// Least-squares quadratic fit j ~ a e^2 + b e + c; returns (a, b).
inline std::pair<double, double> fit_parabola(std::span<const double> eps,
                                              std::span<const double> j) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, y0 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double e = eps[i];
        const double e2 = e * e;
        s0 += 1.0;
        s1 += e;
        s2 += e2;
        s3 += e2 * e;
        s4 += e2 * e2;
        y0 += j[i];
        y1 += j[i] * e;
        y2 += j[i] * e2;
    }
    // Solve the 3x3 normal equations by Cramer's rule.
    const double det = s4 * (s2 * s0 - s1 * s1) - s3 * (s3 * s0 - s1 * s2) +
                       s2 * (s3 * s1 - s2 * s2);
    const double det_a = y2 * (s2 * s0 - s1 * s1) - s3 * (y1 * s0 - y0 * s1) +
                         s2 * (y1 * s1 - y0 * s2);
    const double det_b = s4 * (y1 * s0 - y0 * s1) - y2 * (s3 * s0 - s1 * s2) +
                         s2 * (s3 * y0 - s2 * y1);
    return {det_a / det, det_b / det};
}

}  // namespace detail

/// For each random admissible direction, fits the parabola
/// eps -> J_i(alpha_i + eps beta, alpha_j) for both players and records the
/// worst vertex offset and the smallest curvature. At the equilibrium every
/// parabola is strictly convex with its vertex at eps = 0.
inline NashDeviationReport nash_deviation_test(const ScenarioSpec& sc,
                                               const EquilibriumSolution& sol,
                                               std::size_t n_perturbations,
                                               std::span<const double> epsilons,
                                               std::uint64_t seed,
                                               const PricePath* path = nullptr) {
    if (n_perturbations < 1)
        throw std::invalid_argument("nash_deviation_test: n_perturbations >= 1");
    const TimeGrid& grid = *sol.grid;
    std::vector<double> eps(epsilons.begin(), epsilons.end());
    eps.push_back(0.0);

    NashDeviationReport rep;
    rep.n_perturbations = n_perturbations;
    std::vector<double> shifted(grid.size());
    std::vector<double> j_values(eps.size());
    for (std::size_t i = 0; i < n_perturbations; ++i) {
        const Perturbation beta =
            Perturbation::random_bridge(sol.grid, 17, substream_seed(seed, i));
        const double norm = beta.norm();
        for (int player : {1, 2}) {
            const auto& own = (player == 1) ? sol.alpha1 : sol.alpha2;
            for (std::size_t e = 0; e < eps.size(); ++e) {
                for (std::size_t k = 0; k < grid.size(); ++k)
                    shifted[k] = own[k] + eps[e] * beta.beta[k];
                j_values[e] =
                    (player == 1)
                        ? cost_functional(sc, grid, shifted, sol.alpha2, 1, path)
                        : cost_functional(sc, grid, sol.alpha1, shifted, 2, path);
            }
            const auto [a, b] = detail::fit_parabola(eps, j_values);
            if (!(a > 0.0)) rep.all_convex = false;
            rep.min_curvature = std::min(rep.min_curvature, a);
            rep.max_abs_vertex = std::max(rep.max_abs_vertex, std::abs(-b / (2.0 * a)));
            const double g = gateaux_derivative(sc, grid, sol.alpha1, sol.alpha2,
                                                beta, player, path);
            rep.max_gateaux_over_norm =
                std::max(rep.max_gateaux_over_norm, std::abs(g) / norm);
        }
    }
    return rep;
}

/// |int alpha (X - x0) dt - (Xi_T - x0)^2 / 2|: the trajectory-independent
/// cost of a player's own permanent impact, an exact calculus identity for
/// any rate path reaching Xi_T.
inline double own_impact_identity(const TimeGrid& grid, std::span<const double> alpha,
                                  double x0, double terminal) {
    auto x = cumtrapz(grid, alpha);
    std::vector<double> f(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) f[k] = alpha[k] * x[k];
    const double dx = terminal - x0;
    return std::abs(trapz(grid, f) - 0.5 * dx * dx);
}

}  // namespace duotrack
