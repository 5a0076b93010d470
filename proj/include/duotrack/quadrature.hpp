#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "duotrack/grid.hpp"

namespace duotrack {

/// Trapezoid rule on the grid nodes.
inline double trapz(const TimeGrid& grid, std::span<const double> f) {
    if (f.size() != grid.size())
        throw std::invalid_argument("trapz: size mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k)
        acc += 0.5 * grid.dt(k) * (f[k] + f[k + 1]);
    return acc;
}

/// Cumulative trapezoid; out[0] = 0.
inline std::vector<double> cumtrapz(const TimeGrid& grid, std::span<const double> f) {
    if (f.size() != grid.size())
        throw std::invalid_argument("cumtrapz: size mismatch");
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t k = 0; k + 1 < f.size(); ++k)
        out[k + 1] = out[k] + 0.5 * grid.dt(k) * (f[k] + f[k + 1]);
    return out;
}

/// Backward tails: out[k] = integral from node k to the last node.
inline std::vector<double> tail_trapz(const TimeGrid& grid, std::span<const double> f) {
    if (f.size() != grid.size())
        throw std::invalid_argument("tail_trapz: size mismatch");
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t k = f.size() - 1; k-- > 0;)
        out[k] = out[k + 1] + 0.5 * grid.dt(k) * (f[k] + f[k + 1]);
    return out;
}

inline double l2_norm(const TimeGrid& grid, std::span<const double> f) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k)
        acc += 0.5 * grid.dt(k) * (f[k] * f[k] + f[k + 1] * f[k + 1]);
    return std::sqrt(acc);
}

}  // namespace duotrack
