#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "duotrack/model.hpp"

namespace duotrack {

namespace detail {

/// coth(x) for x > 0, stable for both tiny and huge arguments:
/// (1 + e^{-2x}) / (1 - e^{-2x}) with the denominator via expm1.
inline double coth_positive(double x) {
    return (1.0 + std::exp(-2.0 * x)) / (-std::expm1(-2.0 * x));
}

/// sinh(x) - x without cancellation for small x.
inline double sinh_minus_arg(double x) {
    if (std::abs(x) >= 0.1) return std::sinh(x) - x;
    const double x2 = x * x;
    return x * x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (1.0 + x2 / 72.0)));
}

/// Exponential-times-sinh kernel density in time-to-maturity coordinates:
/// g(tau) = factor * e^{alpha*tau} * sinh(beta*tau), tau = T - u.
/// Both kernels of the model and both aux-process integrands have this form.
struct ExpSinhForm {
    double alpha = 0.0;
    double beta = 0.0;
    double factor = 0.0;

    /// Antiderivative I(tau) = integral_0^tau e^{alpha s} sinh(beta s) ds
    /// (factor excluded). Exact since alpha+beta > 0 > alpha-beta always
    /// holds for this model's kernels.
    [[nodiscard]] double antiderivative(double tau) const {
        const double p = alpha + beta;
        const double m = alpha - beta;
        return 0.5 * (std::expm1(p * tau) / p - std::expm1(m * tau) / m);
    }

    /// Antiderivative scaled by e^{-(alpha+beta)*tau_anchor} so that every
    /// intermediate exponent is non-positive; overflow-free for any
    /// parameters as long as 0 <= tau <= tau_anchor.
    [[nodiscard]] double scaled_antiderivative(double tau, double tau_anchor) const {
        const double p = alpha + beta;
        const double m = alpha - beta;
        const double shift = std::exp(-p * tau_anchor);
        return 0.5 * ((std::exp(p * (tau - tau_anchor)) - shift) / p -
                      (std::exp(m * tau - p * tau_anchor) - shift) / m);
    }

    /// factor * integral_{tau_lo}^{tau_hi} e^{alpha s} sinh(beta s) ds.
    /// Unscaled; suitable at desk-scale parameters (exponent ~ (alpha+beta)*tau).
    [[nodiscard]] double integral(double tau_lo, double tau_hi) const {
        return factor * (antiderivative(tau_hi) - antiderivative(tau_lo));
    }

    /// Pointwise density value g(tau).
    [[nodiscard]] double density(double tau) const {
        return factor * std::exp(alpha * tau) * std::sinh(beta * tau);
    }
};

inline ExpSinhForm kernel_form_1(const ModelParams& p) {
    const double sdp = std::sqrt(p.delta_plus());
    return {-p.gamma / (3.0 * p.lambda), sdp / (3.0 * p.lambda), 2.0 * p.sigma / sdp};
}

inline ExpSinhForm kernel_form_2(const ModelParams& p) {
    const double sdm = std::sqrt(p.delta_minus());
    return {p.gamma / p.lambda, sdm / p.lambda, 2.0 * p.sigma / sdm};
}

inline void require_before_horizon(const ModelParams& p, double t, const char* who) {
    if (t < 0.0)
        throw std::domain_error(std::string(who) + ": t < 0");
    if (!(t < p.horizon))
        throw std::domain_error(std::string(who) +
                                ": t at or beyond the horizon singularity");
}

}  // namespace detail

/// (delta_plus, delta_minus) = (gamma^2 + 6*lambda*sigma, gamma^2 + 2*lambda*sigma).
inline std::pair<double, double> delta_constants(const ModelParams& p) {
    return {p.delta_plus(), p.delta_minus()};
}

/// The horizon-singular Riccati solutions:
///   c_plus(t)  = sqrt(dp)/3 * coth(sqrt(dp)(T-t)/(3 lambda)) + gamma/3
///   c_minus(t) = sqrt(dm)   * coth(sqrt(dm)(T-t)/lambda)     - gamma
/// Both are finite and positive on [0,T) and diverge as t -> T.
inline std::pair<double, double> c_functions(const ModelParams& p, double t) {
    detail::require_before_horizon(p, t, "c_functions");
    const double tau = p.horizon - t;
    const double ap = std::sqrt(p.delta_plus()) / (3.0 * p.lambda);
    const double am = std::sqrt(p.delta_minus()) / p.lambda;
    const double c_plus =
        p.lambda * ap * detail::coth_positive(ap * tau) + p.gamma / 3.0;
    const double c_minus =
        p.lambda * am * detail::coth_positive(am * tau) - p.gamma;
    return {c_plus, c_minus};
}

/// Weight functions at time t in [0,T]; at exactly t == T the analytic limits
/// (1/2, 1/2, 0, 0, 0) are returned. The sinh in w1, w2 is folded into the
/// exponential so no intermediate can overflow (the combined exponents are
/// always non-positive).
///
/// w3 = c+/(c+ + c-) - w1 and w4 = c-/(c+ + c-) - w2 vanish like (T-t)^2, so
/// the plain subtraction is cancellation-limited near the horizon. Close to
/// the horizon they are evaluated through the exact rearrangement
///   w3 (c+ + c-) 3 sinh(x) = sdp [2 sinh^2(x/2) - (e^y - 1 - y)] + gamma (sinh x - x)
///   w4 (c+ + c-)   sinh(u) = sdm [2 sinh^2(u/2) - (e^-v - 1 + v)] - gamma (sinh u - u)
/// with x = sdp tau/(3 lambda), y = gamma tau/(3 lambda), u = sdm tau/lambda,
/// v = gamma tau/lambda; the O(tau) parts cancel algebraically (gamma x = sdp y
/// and gamma u = sdm v), leaving only O(tau^2) terms that are computed
/// directly.
inline Weights weights_at(const ModelParams& p, double t) {
    if (t < 0.0)
        throw std::domain_error("weights_at: t < 0");
    if (t > p.horizon)
        throw std::domain_error("weights_at: t > horizon");
    if (t == p.horizon)
        return {0.5, 0.5, 0.0, 0.0, 0.0};

    const double tau = p.horizon - t;
    const double sdp = std::sqrt(p.delta_plus());
    const double sdm = std::sqrt(p.delta_minus());
    const double ap = sdp / (3.0 * p.lambda);
    const double am = sdm / p.lambda;
    const auto [c_plus, c_minus] = c_functions(p, t);
    const double s = c_plus + c_minus;

    Weights w;
    w.w1 = 2.0 * sdp * std::exp((p.gamma / (3.0 * p.lambda) - ap) * tau) /
           (3.0 * s * (-std::expm1(-2.0 * ap * tau)));
    w.w2 = 2.0 * sdm * std::exp((-p.gamma / p.lambda - am) * tau) /
           (s * (-std::expm1(-2.0 * am * tau)));

    const double x = ap * tau;
    const double u = am * tau;
    if (x < 0.5) {
        const double y = p.gamma * tau / (3.0 * p.lambda);
        const double sh = std::sinh(0.5 * x);
        const double num = sdp * (2.0 * sh * sh - (std::expm1(y) - y)) +
                           p.gamma * detail::sinh_minus_arg(x);
        w.w3 = num / (3.0 * s * std::sinh(x));
    } else {
        w.w3 = c_plus / s - w.w1;
    }
    if (u < 0.5) {
        const double v = p.gamma * tau / p.lambda;
        const double sh = std::sinh(0.5 * u);
        const double num = sdm * (2.0 * sh * sh - (std::expm1(-v) + v)) -
                           p.gamma * detail::sinh_minus_arg(u);
        w.w4 = num / (s * std::sinh(u));
    } else {
        w.w4 = c_minus / s - w.w2;
    }
    w.w5 = (c_plus - c_minus) / s;
    return w;
}

/// All scalar coefficients at once.
inline CoefficientEval coefficient_eval(const ModelParams& p, double t) {
    const auto [cp, cm] = c_functions(p, t);
    CoefficientEval e;
    e.t = t;
    e.c_plus = cp;
    e.c_minus = cm;
    e.weights = weights_at(p, t);
    e.urgency = (cp + cm) / (2.0 * p.lambda);
    return e;
}

/// Forecast kernel density K^1(t,u) or K^2(t,u), 0 <= t <= u < T.
/// Strictly positive; integrates to one in u over [t,T] for every t < T.
inline double kernel_value(const ModelParams& p, int which, double t, double u) {
    if (which != 1 && which != 2)
        throw std::invalid_argument("kernel_value: which must be 1 or 2");
    if (u < t)
        throw std::domain_error("kernel_value: u < t");
    detail::require_before_horizon(p, u, "kernel_value");
    if (t < 0.0)
        throw std::domain_error("kernel_value: t < 0");
    const Weights w = weights_at(p, t);
    const double ratio = (which == 1) ? w.w1 / w.w3 : w.w2 / w.w4;
    const auto form = (which == 1) ? detail::kernel_form_1(p) : detail::kernel_form_2(p);
    return ratio * form.density(p.horizon - u);
}

namespace detail {

/// Two-route normalization constant D(t) = (w1/w3) * integral_t^T g1, and the
/// analogue for the second kernel. Analytically D == 1; numerically it
/// compares the coth-based weights against the closed-form exponential
/// integral, which is the content of the kernel-mass identity. Assembled in
/// log space so that large exponents never overflow.
inline double kernel_mass_one(const ModelParams& p, int which, double t) {
    const Weights w = weights_at(p, t);
    const auto form = (which == 1) ? kernel_form_1(p) : kernel_form_2(p);
    const double wa = (which == 1) ? w.w1 : w.w2;
    const double wb = (which == 1) ? w.w3 : w.w4;
    const double tau = p.horizon - t;
    const double scaled = form.scaled_antiderivative(tau, tau);
    const double log_mass = std::log(wa) - std::log(wb) +
                            (form.alpha + form.beta) * tau +
                            std::log(form.factor * scaled);
    return std::exp(log_mass);
}

}  // namespace detail

/// Total kernel mass over [t,T] for both kernels, each computed as the
/// product of the weight ratio and the closed-form exponential integral.
/// Contract: both values within tolerance of 1.
inline std::pair<double, double> kernel_mass(const ModelParams& p, double t) {
    detail::require_before_horizon(p, t, "kernel_mass");
    return {detail::kernel_mass_one(p, 1, t), detail::kernel_mass_one(p, 2, t)};
}

enum class Branch { plus, minus };

/// Closed-form decay factor exp(-integral_s^t c_u / lambda du):
///   plus:  e^{-gamma (t-s)/(3 lambda)} sinh(sqrt(dp)(T-t)/(3 lambda)) / sinh(.. T-s ..)
///   minus: e^{+gamma (t-s)/lambda}     sinh(sqrt(dm)(T-t)/lambda)     / sinh(.. T-s ..)
/// Rearranged so every exponent is non-positive; value in (0,1], -> 0 as t -> T.
inline double propagator(const ModelParams& p, Branch branch, double s, double t) {
    if (s > t)
        throw std::domain_error("propagator: s > t");
    if (s < 0.0)
        throw std::domain_error("propagator: s < 0");
    detail::require_before_horizon(p, t, "propagator");
    const double rate = (branch == Branch::plus)
                            ? std::sqrt(p.delta_plus()) / (3.0 * p.lambda)
                            : std::sqrt(p.delta_minus()) / p.lambda;
    const double drift = (branch == Branch::plus) ? -p.gamma / (3.0 * p.lambda)
                                                  : p.gamma / p.lambda;
    const double tau_s = p.horizon - s;
    const double tau_t = p.horizon - t;
    return std::exp((drift - rate) * (t - s)) * (-std::expm1(-2.0 * rate * tau_t)) /
           (-std::expm1(-2.0 * rate * tau_s));
}

/// Central-difference residuals of the two Riccati equations at (t, h):
///   res_plus  = CD[c_plus]  - ( c_plus^2/lambda  - 2 gamma c_plus /(3 lambda) - 2 sigma/3 )
///   res_minus = CD[c_minus] - ( c_minus^2/lambda + 2 gamma c_minus/lambda     - 2 sigma   )
/// O(h^2) away from the horizon; the truncation constant grows like
/// lambda (T-t)^{-4}, so fixed-step residuals are only meaningful for
/// time-to-maturity well above h^{1/2}.
inline std::pair<double, double> riccati_residual(const ModelParams& p, double t,
                                                  double h) {
    if (!(h > 0.0))
        throw std::domain_error("riccati_residual: h must be > 0");
    if (t - h < 0.0)
        throw std::domain_error("riccati_residual: stencil crosses 0");
    if (!(t + h < p.horizon))
        throw std::domain_error("riccati_residual: stencil crosses the horizon");
    const auto [cp_f, cm_f] = c_functions(p, t + h);
    const auto [cp_b, cm_b] = c_functions(p, t - h);
    const auto [cp, cm] = c_functions(p, t);
    const double cd_p = (cp_f - cp_b) / (2.0 * h);
    const double cd_m = (cm_f - cm_b) / (2.0 * h);
    const double rhs_p =
        cp * cp / p.lambda - 2.0 * p.gamma * cp / (3.0 * p.lambda) - 2.0 * p.sigma / 3.0;
    const double rhs_m =
        cm * cm / p.lambda + 2.0 * p.gamma * cm / p.lambda - 2.0 * p.sigma;
    return {cd_p - rhs_p, cd_m - rhs_m};
}

/// Riccati residual with stencil width proportional to time-to-maturity and
/// normalized by the local right-hand-side scale. Uniformly O(h_rel^2) on
/// (0,T), which makes it suitable as a horizon-wide diagnostic.
inline std::pair<double, double> riccati_residual_scaled(const ModelParams& p, double t,
                                                         double h_rel = 1e-4) {
    const double tau = p.horizon - t;
    const double h = h_rel * tau;
    auto [rp, rm] = riccati_residual(p, t, h);
    const auto [cp, cm] = c_functions(p, t);
    const double rhs_p = std::abs(cp * cp / p.lambda -
                                  2.0 * p.gamma * cp / (3.0 * p.lambda) -
                                  2.0 * p.sigma / 3.0);
    const double rhs_m = std::abs(cm * cm / p.lambda + 2.0 * p.gamma * cm / p.lambda -
                                  2.0 * p.sigma);
    return {rp / (1.0 + rhs_p), rm / (1.0 + rhs_m)};
}

}  // namespace duotrack
