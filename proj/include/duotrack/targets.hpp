#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "duotrack/coefficients.hpp"
#include "duotrack/grid.hpp"
#include "duotrack/model.hpp"
#include "duotrack/random.hpp"

namespace duotrack {

enum class TargetKind { zero, piecewise_constant, scaled_bachelier_delta };

/// One player's tracking target xi and terminal constraint Xi_T.
///
/// piecewise_constant: breakpoints are the left edges of the constant pieces
/// (strictly increasing, within [0,T]), one level per breakpoint. Lookup is
/// left-closed/right-open except that the final piece is closed at T; times
/// before the first breakpoint map to 0.
///
/// scaled_bachelier_delta: xi_t = scale * Phi((P_t - P_0)/sqrt(sigma (T-t))),
/// the frictionless hedge ratio of an at-the-money call under an arithmetic
/// price model. A martingale on [0,T].
///
/// terminal_random marks a terminal constraint revealed only at T. It is
/// representable here but rejected by every solver and flagged as not
/// verifiable by the admissibility diagnostic.
struct TargetSpec {
    TargetKind kind = TargetKind::zero;
    std::vector<double> breakpoints;
    std::vector<double> levels;
    double scale = 1.0;
    double terminal = 0.0;
    bool terminal_random = false;

    static TargetSpec zero(double terminal_value = 0.0) {
        TargetSpec s;
        s.kind = TargetKind::zero;
        s.terminal = terminal_value;
        return s;
    }
    static TargetSpec piecewise(std::vector<double> breaks, std::vector<double> lvls,
                                double terminal_value) {
        TargetSpec s;
        s.kind = TargetKind::piecewise_constant;
        s.breakpoints = std::move(breaks);
        s.levels = std::move(lvls);
        s.terminal = terminal_value;
        return s;
    }
    static TargetSpec bachelier(double scale_value, double terminal_value) {
        TargetSpec s;
        s.kind = TargetKind::scaled_bachelier_delta;
        s.scale = scale_value;
        s.terminal = terminal_value;
        return s;
    }

    [[nodiscard]] bool deterministic() const noexcept {
        return kind != TargetKind::scaled_bachelier_delta;
    }
    /// Targets whose conditional forecast E[xi_u | F_t] equals xi_t.
    [[nodiscard]] bool martingale_class() const noexcept {
        return kind == TargetKind::zero || kind == TargetKind::scaled_bachelier_delta;
    }

    void validate(double T) const {
        if (!std::isfinite(terminal))
            throw std::invalid_argument("TargetSpec: terminal must be finite");
        switch (kind) {
            case TargetKind::zero:
                break;
            case TargetKind::piecewise_constant: {
                if (breakpoints.empty() || breakpoints.size() != levels.size())
                    throw std::invalid_argument(
                        "TargetSpec: need one level per breakpoint");
                for (std::size_t i = 0; i < breakpoints.size(); ++i) {
                    if (!std::isfinite(breakpoints[i]) || !std::isfinite(levels[i]))
                        throw std::invalid_argument("TargetSpec: non-finite entry");
                    if (breakpoints[i] < 0.0 || breakpoints[i] > T)
                        throw std::invalid_argument(
                            "TargetSpec: breakpoints must lie in [0,T]");
                    if (i > 0 && !(breakpoints[i - 1] < breakpoints[i]))
                        throw std::invalid_argument(
                            "TargetSpec: breakpoints must be strictly increasing");
                }
                break;
            }
            case TargetKind::scaled_bachelier_delta:
                if (!std::isfinite(scale))
                    throw std::invalid_argument("TargetSpec: scale must be finite");
                break;
        }
    }
};

/// Realized unaffected price path on a grid: P_t = p0 + sqrt(sigma) W_t.
struct PricePath {
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> values;
    double p0 = 0.0;
    std::uint64_t seed_id = 0;
};

/// Full problem instance: market parameters, both players' initial holdings
/// and targets.
struct ScenarioSpec {
    ModelParams params;
    double x1 = 0.0;
    double x2 = 0.0;
    TargetSpec target1;
    TargetSpec target2;

    void validate() const {
        params.validate();
        if (!std::isfinite(x1) || !std::isfinite(x2))
            throw std::invalid_argument("ScenarioSpec: initial holdings must be finite");
        target1.validate(params.horizon);
        target2.validate(params.horizon);
    }
    [[nodiscard]] bool deterministic() const noexcept {
        return target1.deterministic() && target2.deterministic();
    }
    [[nodiscard]] bool martingale_class() const noexcept {
        return target1.martingale_class() && target2.martingale_class();
    }
    [[nodiscard]] bool has_random_terminal() const noexcept {
        return target1.terminal_random || target2.terminal_random;
    }
};

namespace detail {

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2_v<double>);
}

inline double piecewise_value(const TargetSpec& s, double t) {
    // left-closed / right-open pieces; 0 before the first breakpoint.
    auto it = std::upper_bound(s.breakpoints.begin(), s.breakpoints.end(), t);
    if (it == s.breakpoints.begin()) return 0.0;
    return s.levels[static_cast<std::size_t>(it - s.breakpoints.begin()) - 1];
}

/// Price at an arbitrary time: exact at grid nodes, linear in between.
inline double price_at(const PricePath& path, double t) {
    const auto& nodes = path.grid->nodes;
    auto it = std::lower_bound(nodes.begin(), nodes.end(), t);
    if (it == nodes.end()) return path.values.back();
    const auto k = static_cast<std::size_t>(it - nodes.begin());
    if (*it == t || k == 0) return path.values[k];
    const double t0 = nodes[k - 1], t1 = nodes[k];
    const double w = (t - t0) / (t1 - t0);
    return (1.0 - w) * path.values[k - 1] + w * path.values[k];
}

}  // namespace detail

/// Target position xi_t. `path` is required exactly for the stochastic kind.
inline double target_value(const TargetSpec& spec, const PricePath* path,
                           const ModelParams& params, double t) {
    if (t < 0.0 || t > params.horizon)
        throw std::domain_error("target_value: t outside [0,T]");
    switch (spec.kind) {
        case TargetKind::zero:
            return 0.0;
        case TargetKind::piecewise_constant:
            return detail::piecewise_value(spec, t);
        case TargetKind::scaled_bachelier_delta: {
            if (path == nullptr)
                throw std::invalid_argument(
                    "target_value: price path required for the stochastic target");
            const double p = detail::price_at(*path, t);
            if (t == params.horizon)
                return spec.scale * (p > path->p0 ? 1.0 : (p < path->p0 ? 0.0 : 0.5));
            const double z =
                (p - path->p0) / std::sqrt(params.sigma * (params.horizon - t));
            return spec.scale * detail::normal_cdf(z);
        }
    }
    throw std::logic_error("target_value: unreachable");
}

/// One Gaussian-increment path on the grid; deterministic in (seed, index)
/// and independent of how many paths are drawn.
inline PricePath simulate_price_path(const ModelParams& params,
                                     std::shared_ptr<const TimeGrid> grid,
                                     std::uint64_t seed, std::uint64_t index,
                                     double p0 = 0.0) {
    PricePath path;
    path.grid = grid;
    path.p0 = p0;
    path.seed_id = substream_seed(seed, index);
    auto engine = make_engine(seed, index);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto n = grid->size();
    path.values.resize(n);
    path.values[0] = p0;
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = grid->nodes[k] - grid->nodes[k - 1];
        path.values[k] =
            path.values[k - 1] + std::sqrt(params.sigma * dt) * gauss(engine);
    }
    return path;
}

/// Independent ensemble of price paths. Increment variance is sigma * dt.
inline std::vector<PricePath> simulate_price_paths(const ModelParams& params,
                                                   std::shared_ptr<const TimeGrid> grid,
                                                   std::size_t n_paths,
                                                   std::uint64_t seed,
                                                   double p0 = 0.0) {
    if (n_paths < 1)
        throw std::invalid_argument("simulate_price_paths: n_paths must be >= 1");
    std::vector<PricePath> out;
    out.reserve(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i)
        out.push_back(simulate_price_path(params, grid, seed, i, p0));
    return out;
}

/// Outcome of the information-speed admissibility check on the terminal
/// forecast martingales M+ and M-.
struct AdmissibilityReport {
    enum class Status { analytically_satisfied, estimated, not_verifiable };
    Status status = Status::analytically_satisfied;
    std::string note;
    /// Monte Carlo estimates of E[int_0^{T-eps} (T-s)^{-1} d<M+->_s] per
    /// truncation level (empty unless status == estimated).
    std::vector<double> eps_levels;
    std::vector<double> estimate_plus;
    std::vector<double> estimate_minus;
    bool stable = true;
};

namespace detail {

/// Adds one path's realized contribution to the truncated bracket integrals
/// int_0^{T-eps} (T-s)^{-1} d<M+->_s, where M+- are the terminal forecast
/// martingales of the sum/difference targets. For martingale targets with
/// deterministic terminals, M+-_t = const + Y+-_t + xi+-_t * R+-(t) with
/// R+-(t) the remaining kernel-integrand mass, so the increments are
/// computable in closed form along the path.
inline void accumulate_forecast_brackets(const ScenarioSpec& scenario,
                                         const PricePath& path,
                                         const std::vector<double>& eps_levels,
                                         std::vector<double>& acc_plus,
                                         std::vector<double>& acc_minus) {
    const ModelParams& p = scenario.params;
    const TimeGrid& grid = *path.grid;
    const auto g1 = kernel_form_1(p);
    const auto g2 = kernel_form_2(p);
    const double T = p.horizon;

    auto xi_pair = [&](double t) {
        const double a = target_value(scenario.target1, &path, p, t);
        const double b = target_value(scenario.target2, &path, p, t);
        return std::pair<double, double>{a + b, a - b};
    };

    auto [sum_prev, diff_prev] = xi_pair(grid[0]);
    double mp_prev = sum_prev * g1.integral(0.0, T - grid[0]);
    double mm_prev = diff_prev * g2.integral(0.0, T - grid[0]);
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double t1 = grid[k + 1];
        const auto [sum_next, diff_next] = xi_pair(t1);
        const double dt = grid.dt(k);
        // dY by the trapezoid rule on the closed-form integrand.
        const double dy_p = 0.5 * dt * (sum_prev * g1.density(T - grid[k]) +
                                        sum_next * g1.density(T - t1));
        const double dy_m = 0.5 * dt * (diff_prev * g2.density(T - grid[k]) +
                                        diff_next * g2.density(T - t1));
        const double mp_next = sum_next * g1.integral(0.0, T - t1);
        const double mm_next = diff_next * g2.integral(0.0, T - t1);
        const double dmp = dy_p + mp_next - mp_prev;
        const double dmm = dy_m + mm_next - mm_prev;
        const double mid = 0.5 * (grid[k] + t1);
        for (std::size_t j = 0; j < eps_levels.size(); ++j) {
            if (t1 <= T - eps_levels[j]) {
                acc_plus[j] += dmp * dmp / (T - mid);
                acc_minus[j] += dmm * dmm / (T - mid);
            }
        }
        sum_prev = sum_next;
        diff_prev = diff_next;
        mp_prev = mp_next;
        mm_prev = mm_next;
    }
}

}  // namespace detail

/// Checks whether the terminal constraints reveal fast enough for the
/// constrained admissibility sets to be nonempty. Deterministic terminals
/// with deterministic targets satisfy the condition analytically; martingale
/// targets get a truncated-bracket Monte Carlo estimate whose stability
/// across eps levels is reported.
inline AdmissibilityReport admissibility_diagnostic(
    const ScenarioSpec& scenario, const std::vector<PricePath>& ensemble,
    std::vector<double> eps_levels = {1e-2, 1e-3, 1e-4}) {
    scenario.validate();
    AdmissibilityReport rep;
    if (scenario.has_random_terminal()) {
        rep.status = AdmissibilityReport::Status::not_verifiable;
        rep.note = "terminal constraint revealed only at T: not verifiable";
        rep.stable = false;
        return rep;
    }
    if (scenario.deterministic()) {
        rep.status = AdmissibilityReport::Status::analytically_satisfied;
        rep.note =
            "deterministic targets and terminals: forecast martingales are "
            "constant, brackets vanish";
        return rep;
    }
    if (!scenario.martingale_class()) {
        rep.status = AdmissibilityReport::Status::not_verifiable;
        rep.note = "unsupported target class";
        rep.stable = false;
        return rep;
    }
    if (ensemble.empty())
        throw std::invalid_argument("admissibility_diagnostic: ensemble is empty");

    std::sort(eps_levels.begin(), eps_levels.end(), std::greater<double>());
    rep.status = AdmissibilityReport::Status::estimated;
    rep.eps_levels = eps_levels;
    rep.estimate_plus.assign(eps_levels.size(), 0.0);
    rep.estimate_minus.assign(eps_levels.size(), 0.0);
    for (const auto& path : ensemble)
        detail::accumulate_forecast_brackets(scenario, path, eps_levels,
                                             rep.estimate_plus, rep.estimate_minus);
    const double n = static_cast<double>(ensemble.size());
    for (auto& v : rep.estimate_plus) v /= n;
    for (auto& v : rep.estimate_minus) v /= n;
    // Stable when tightening the truncation stops moving the estimate.
    const auto rel_step = [](double a, double b) {
        return std::abs(b - a) / (1.0 + std::abs(a));
    };
    const auto m = eps_levels.size();
    rep.stable = m < 2 || (rel_step(rep.estimate_plus[m - 2], rep.estimate_plus[m - 1]) < 0.5 &&
                           rel_step(rep.estimate_minus[m - 2], rep.estimate_minus[m - 1]) < 0.5);
    rep.note = "truncated-bracket Monte Carlo estimate";
    return rep;
}

}  // namespace duotrack
