#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace duotrack {

/// Market and horizon constants of the two-player impact game.
///
///   lambda:  temporary impact coefficient (price per share per unit rate)
///   gamma:   permanent impact coefficient (price per share)
///   sigma:   unaffected-price variance rate (price^2 per unit time)
///   horizon: terminal time T
///
/// The derived constants delta_plus = gamma^2 + 6*lambda*sigma and
/// delta_minus = gamma^2 + 2*lambda*sigma are strictly positive whenever the
/// parameters validate, and delta_plus > delta_minus.
struct ModelParams {
    double lambda = 1.0;
    double gamma = 1.0;
    double sigma = 1.0;
    double horizon = 1.0;

    [[nodiscard]] double delta_plus() const noexcept {
        return gamma * gamma + 6.0 * lambda * sigma;
    }
    [[nodiscard]] double delta_minus() const noexcept {
        return gamma * gamma + 2.0 * lambda * sigma;
    }

    /// Throws std::invalid_argument unless lambda>0, sigma>0, horizon>0 and
    /// gamma>=0. gamma == 0 is accepted as a diagnostic limit (see warnings()),
    /// sigma == 0 is rejected outright.
    void validate() const {
        if (!(std::isfinite(lambda) && std::isfinite(gamma) &&
              std::isfinite(sigma) && std::isfinite(horizon)))
            throw std::invalid_argument("ModelParams: parameters must be finite");
        if (!(lambda > 0.0))
            throw std::invalid_argument("ModelParams: lambda must be > 0");
        if (!(sigma > 0.0))
            throw std::invalid_argument("ModelParams: sigma must be > 0");
        if (!(horizon > 0.0))
            throw std::invalid_argument("ModelParams: horizon must be > 0");
        if (gamma < 0.0)
            throw std::invalid_argument("ModelParams: gamma must be >= 0");
    }

    /// Non-fatal diagnostics for degenerate limits.
    [[nodiscard]] std::vector<std::string> warnings() const {
        std::vector<std::string> out;
        if (gamma == 0.0)
            out.push_back("gamma == 0: permanent impact disabled (diagnostic limit)");
        if (sigma < 1e-12 * lambda)
            out.push_back("sigma is vanishingly small relative to lambda");
        return out;
    }
};

/// The five weight values at one time point. w1..w4 are a partition of unity
/// on [0,T); w5 lies in (-1,1) and changes sign with the illiquidity regime.
struct Weights {
    double w1 = 0.0;
    double w2 = 0.0;
    double w3 = 0.0;
    double w4 = 0.0;
    double w5 = 0.0;
};

/// One-shot evaluation of every scalar coefficient at a time point.
/// urgency = (c_plus + c_minus) / (2*lambda) is the mean-reversion speed of
/// the equilibrium feedback law; it diverges as t approaches the horizon.
struct CoefficientEval {
    double t = 0.0;
    double c_plus = 0.0;
    double c_minus = 0.0;
    Weights weights;
    double urgency = 0.0;
};

/// Thrown when an ODE integration cannot meet its local error target within
/// the retry budget; carries the time at which the step failed.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double at_time)
        : std::runtime_error(what), at_time_(at_time) {}
    [[nodiscard]] double at_time() const noexcept { return at_time_; }

private:
    double at_time_;
};

}  // namespace duotrack
