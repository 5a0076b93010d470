#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

#include "duotrack/model.hpp"

namespace duotrack {

/// Time grid from 0 to T - eps_terminal: a uniform segment followed by a
/// geometrically shrinking tail that resolves the coefficient singularity at
/// the horizon. Nodes are strictly increasing; the final node is exactly
/// T - eps_terminal.
struct TimeGrid {
    std::vector<double> nodes;
    double horizon = 0.0;
    double eps_terminal = 0.0;
    std::size_t n_uniform = 0;
    std::size_t n_tail = 0;

    [[nodiscard]] std::size_t size() const noexcept { return nodes.size(); }
    [[nodiscard]] double operator[](std::size_t k) const noexcept { return nodes[k]; }
    [[nodiscard]] double dt(std::size_t cell) const noexcept {
        return nodes[cell + 1] - nodes[cell];
    }
    [[nodiscard]] double front() const noexcept { return nodes.front(); }
    [[nodiscard]] double back() const noexcept { return nodes.back(); }
};

/// Builds the refinement described above. The geometric tail starts at
/// T - delta_tail with delta_tail = min(10*T/n_uniform, T/4) and shrinks at a
/// constant ratio down to T - eps_T. With n_tail == 0 the grid is uniform on
/// [0, T - eps_T]. Total node count is n_uniform + n_tail + 1.
inline TimeGrid make_grid(double T, std::size_t n_uniform, std::size_t n_tail,
                          double eps_T) {
    if (!(T > 0.0) || !std::isfinite(T))
        throw std::invalid_argument("make_grid: T must be positive and finite");
    if (n_uniform < 2)
        throw std::invalid_argument("make_grid: n_uniform must be >= 2");
    if (!(eps_T > 0.0) || !(eps_T < T / 2.0))
        throw std::invalid_argument("make_grid: eps_T must lie in (0, T/2)");

    TimeGrid g;
    g.horizon = T;
    g.eps_terminal = eps_T;
    g.n_uniform = n_uniform;
    g.n_tail = n_tail;
    g.nodes.reserve(n_uniform + n_tail + 1);

    const double t_end = T - eps_T;
    if (n_tail == 0) {
        for (std::size_t k = 0; k < n_uniform; ++k)
            g.nodes.push_back(static_cast<double>(k) * t_end /
                              static_cast<double>(n_uniform));
        g.nodes.push_back(t_end);
    } else {
        const double delta_tail =
            std::min(10.0 * T / static_cast<double>(n_uniform), T / 4.0);
        if (!(delta_tail > eps_T))
            throw std::invalid_argument(
                "make_grid: eps_T too large for the requested tail refinement");
        const double t_join = T - delta_tail;
        for (std::size_t k = 0; k < n_uniform; ++k)
            g.nodes.push_back(static_cast<double>(k) * t_join /
                              static_cast<double>(n_uniform));
        g.nodes.push_back(t_join);
        const double ratio = std::pow(eps_T / delta_tail,
                                      1.0 / static_cast<double>(n_tail));
        double tau = delta_tail;
        for (std::size_t j = 1; j < n_tail; ++j) {
            tau *= ratio;
            g.nodes.push_back(T - tau);
        }
        g.nodes.push_back(t_end);
    }

    for (std::size_t k = 0; k + 1 < g.nodes.size(); ++k)
        if (!(g.nodes[k] < g.nodes[k + 1]))
            throw std::invalid_argument(
                "make_grid: requested refinement collapses adjacent nodes");
    return g;
}

/// Grid construction knobs as exposed on the command line.
struct GridSpec {
    std::size_t n_uniform = 2000;
    std::size_t n_tail = 200;
    double eps_frac = 1e-9;  // eps_T = eps_frac * T

    [[nodiscard]] TimeGrid build(double T) const {
        return make_grid(T, n_uniform, n_tail, eps_frac * T);
    }
    [[nodiscard]] std::shared_ptr<const TimeGrid> build_shared(double T) const {
        return std::make_shared<const TimeGrid>(build(T));
    }
    [[nodiscard]] GridSpec halved_steps() const {
        return {n_uniform * 2, n_tail * 2, eps_frac};
    }
};

inline std::shared_ptr<const TimeGrid> default_grid(const ModelParams& p) {
    return GridSpec{}.build_shared(p.horizon);
}

}  // namespace duotrack
