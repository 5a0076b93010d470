#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "duotrack/coefficients.hpp"
#include "support/oracles.hpp"

using namespace duotrack;

namespace {
const ModelParams kPlastic{1.0, 2.0, 1.0, 2.0};
const ModelParams kElastic{1.0, 0.1, 1.0, 2.0};
}  // namespace

TEST_CASE("delta constants") {
    CHECK(delta_constants({1.0, 2.0, 1.0, 1.0}) == std::pair{10.0, 6.0});
    CHECK(delta_constants({1.0, 0.0, 1.0, 1.0}) == std::pair{6.0, 2.0});
    const auto [dp, dm] = delta_constants({1.0, 0.1, 1.0, 2.0});
    CHECK(dp == Catch::Approx(6.01).margin(1e-15));
    CHECK(dm == Catch::Approx(2.01).margin(1e-15));
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS((ModelParams{0.0, 1.0, 1.0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ModelParams{1.0, 1.0, 0.0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ModelParams{1.0, -0.5, 1.0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ModelParams{1.0, 1.0, 1.0, -1.0}.validate()), std::invalid_argument);
    CHECK_NOTHROW((ModelParams{1.0, 0.0, 1.0, 1.0}.validate()));
    CHECK_FALSE(ModelParams{1.0, 0.0, 1.0, 1.0}.warnings().empty());
    CHECK(ModelParams{1.0, 1.0, 1.0, 1.0}.warnings().empty());
}

TEST_CASE("c functions match the Riccati integration oracle") {
    for (const ModelParams& p :
         {kPlastic, kElastic, ModelParams{1.0, 2.0, 1.0, 10.0},
          ModelParams{0.5, 0.0, 2.0, 5.0}}) {
        for (double frac : {0.0, 0.3, 0.7}) {
            const double t = frac * p.horizon;
            const auto [cp, cm] = c_functions(p, t);
            CHECK(cp == Catch::Approx(oracles::riccati_c_reference(p, true, t))
                            .margin(1e-10));
            CHECK(cm == Catch::Approx(oracles::riccati_c_reference(p, false, t))
                            .margin(1e-10));
            CHECK(cp > 0.0);
            CHECK(cm > 0.0);
        }
    }
}

TEST_CASE("c functions diverge at the horizon") {
    for (double tau : {1e-4, 1e-6, 1e-8}) {
        const auto [cp, cm] = c_functions(kPlastic, kPlastic.horizon - tau);
        CHECK(cp > 0.5 * kPlastic.lambda / tau);
        CHECK(cm > 0.5 * kPlastic.lambda / tau);
    }
    CHECK_THROWS_AS(c_functions(kPlastic, 2.0), std::domain_error);
    CHECK_THROWS_AS(c_functions(kPlastic, 2.5), std::domain_error);
    CHECK_THROWS_AS(c_functions(kPlastic, -0.1), std::domain_error);
}

TEST_CASE("gamma = 0 closed forms reduce to the single-coefficient formulas") {
    const ModelParams p{1.3, 0.0, 0.7, 3.0};
    for (double t : {0.0, 1.0, 2.9}) {
        const double tau = p.horizon - t;
        const auto [cp, cm] = c_functions(p, t);
        const double ap = std::sqrt(6.0 * p.lambda * p.sigma);
        const double am = std::sqrt(2.0 * p.lambda * p.sigma);
        CHECK(cp == Catch::Approx(ap / 3.0 / std::tanh(ap * tau / (3.0 * p.lambda)))
                        .epsilon(1e-14));
        CHECK(cm == Catch::Approx(am / std::tanh(am * tau / p.lambda)).epsilon(1e-14));
    }
}

TEST_CASE("weights: partition of unity, positivity, bounded w5") {
    for (const ModelParams& p : {kPlastic, kElastic, ModelParams{0.25, 2.8, 1.0, 10.0},
                                 ModelParams{2.5, 0.0, 1.0, 5.0}}) {
        for (int i = 0; i <= 500; ++i) {
            const double t = (p.horizon - 1e-3 * p.horizon) * i / 500.0;
            const Weights w = weights_at(p, t);
            CHECK(std::abs(w.w1 + w.w2 + w.w3 + w.w4 - 1.0) < 1e-12);
            CHECK(w.w1 > 0.0);
            CHECK(w.w2 > 0.0);
            CHECK(w.w3 > 0.0);
            CHECK(w.w4 > 0.0);
            CHECK(std::abs(w.w5) < 1.0);
            CHECK(w.w1 > w.w2);
        }
    }
}

TEST_CASE("weights at the horizon hit the analytic limits") {
    const Weights w = weights_at(kPlastic, kPlastic.horizon);
    CHECK(w.w1 == 0.5);
    CHECK(w.w2 == 0.5);
    CHECK(w.w3 == 0.0);
    CHECK(w.w4 == 0.0);
    CHECK(w.w5 == 0.0);

    // monotone approach: w at T - 10^-k converges to the limits as k grows
    double prev = 1.0;
    for (int k = 3; k <= 9; ++k) {
        const Weights wk = weights_at(kPlastic, kPlastic.horizon - std::pow(10.0, -k));
        const double dev = std::abs(wk.w1 - 0.5) + std::abs(wk.w2 - 0.5) +
                           wk.w3 + wk.w4 + std::abs(wk.w5);
        CHECK(dev < prev);
        prev = dev;
    }
    CHECK(prev < 1e-8);
}

TEST_CASE("w5 sign flips between the plastic and elastic regimes") {
    CHECK(weights_at(kPlastic, 0.0).w5 > 0.0);
    CHECK(weights_at(kElastic, 0.0).w5 < 0.0);
}

TEST_CASE("kernel values: positivity, domain errors, algebraic form") {
    const ModelParams& p = kPlastic;
    for (double t : {0.0, 0.5, 1.5}) {
        for (double u : {0.0, 0.5, 1.0, 1.9}) {
            if (u < t) {
                CHECK_THROWS_AS(kernel_value(p, 1, t, u), std::domain_error);
                continue;
            }
            CHECK(kernel_value(p, 1, t, u) > 0.0);
            CHECK(kernel_value(p, 2, t, u) > 0.0);
        }
    }
    CHECK_THROWS_AS(kernel_value(p, 1, 0.5, 2.0), std::domain_error);
    CHECK_THROWS_AS(kernel_value(p, 3, 0.0, 1.0), std::invalid_argument);

    // K1(t,u) w3/w1 is the weight-free density 2 sigma e^{-gamma(T-u)/(3l)}
    // sinh(sqrt(dp)(T-u)/(3l)) / sqrt(dp)
    const Weights w = weights_at(p, 0.5);
    const double tau = p.horizon - 1.2;
    const double sdp = std::sqrt(p.delta_plus());
    const double bare = 2.0 * p.sigma / sdp *
                        std::exp(-p.gamma * tau / (3.0 * p.lambda)) *
                        std::sinh(sdp * tau / (3.0 * p.lambda));
    CHECK(kernel_value(p, 1, 0.5, 1.2) * w.w3 / w.w1 ==
          Catch::Approx(bare).epsilon(1e-12));
}

TEST_CASE("kernel mass: unit normalization by two routes") {
    for (const ModelParams& p : {kPlastic, kElastic, ModelParams{0.25, 2.8, 1.0, 10.0}}) {
        for (double frac : {1e-2, 0.1, 0.5, 0.9}) {
            const auto [m1, m2] = kernel_mass(p, p.horizon * (1.0 - frac));
            CHECK(m1 == Catch::Approx(1.0).margin(1e-10));
            CHECK(m2 == Catch::Approx(1.0).margin(1e-10));
        }
        // looser module-level bound closer to the horizon
        const auto [m1, m2] = kernel_mass(p, p.horizon * (1.0 - 1e-3));
        CHECK(m1 == Catch::Approx(1.0).margin(1e-8));
        CHECK(m2 == Catch::Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("kernel mass identity against adaptive quadrature") {
    // w3/w1 equals the integral of the bare plus-kernel density over [t,T]
    const ModelParams p{1.0, 0.1, 1.0, 10.0};
    for (double t : {0.0, 5.0, 9.0}) {
        const Weights w = weights_at(p, t);
        const double sdp = std::sqrt(p.delta_plus());
        const auto density = [&](double u) {
            const double tau = p.horizon - u;
            return 2.0 * p.sigma / sdp * std::exp(-p.gamma * tau / (3.0 * p.lambda)) *
                   std::sinh(sdp * tau / (3.0 * p.lambda));
        };
        const double quad = oracles::adaptive_simpson(density, t, p.horizon, 1e-13);
        CHECK(w.w3 / w.w1 == Catch::Approx(quad).epsilon(1e-10));

        // and the full kernel integrates to one against the same oracle
        const auto kernel = [&](double u) { return kernel_value(p, 1, t, u); };
        const double mass =
            oracles::adaptive_simpson(kernel, t, p.horizon - 1e-9, 1e-12);
        CHECK(mass == Catch::Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("propagator closed form") {
    const ModelParams& p = kPlastic;
    SECTION("identity at s == t") {
        CHECK(propagator(p, Branch::plus, 0.7, 0.7) == 1.0);
        CHECK(propagator(p, Branch::minus, 0.0, 0.0) == 1.0);
    }
    SECTION("vanishes toward the horizon") {
        double prev = 1.0;
        for (double tau : {1e-2, 1e-4, 1e-6, 1e-8}) {
            const double v = propagator(p, Branch::plus, 0.0, p.horizon - tau);
            CHECK(v < prev);
            prev = v;
        }
        CHECK(prev < 1e-7);
    }
    SECTION("matches quadrature of exp(-int c/lambda)") {
        for (const ModelParams& q : {kPlastic, kElastic}) {
            for (auto [s, t] : {std::pair{0.0, 1.0}, {0.25, 1.75}, {1.0, 2.0 - 1e-6}}) {
                for (Branch br : {Branch::plus, Branch::minus}) {
                    const auto c_over_lambda = [&](double tau) {
                        return oracles::c_of_tau(q, br == Branch::plus, tau) /
                               q.lambda;
                    };
                    const double expo = oracles::log_time_integral(
                        c_over_lambda, q.horizon, s, t, 1e-12);
                    CHECK(propagator(q, br, s, t) ==
                          Catch::Approx(std::exp(-expo)).margin(1e-8));
                }
            }
        }
    }
    SECTION("cocycle identity and range") {
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (int i = 0; i < 200; ++i) {
            double a = 1.999 * uni(rng), b = 1.999 * uni(rng), c = 1.999 * uni(rng);
            if (a > b) std::swap(a, b);
            if (b > c) std::swap(b, c);
            if (a > b) std::swap(a, b);
            for (Branch br : {Branch::plus, Branch::minus}) {
                const double lhs =
                    propagator(kPlastic, br, a, b) * propagator(kPlastic, br, b, c);
                const double rhs = propagator(kPlastic, br, a, c);
                CHECK(std::abs(lhs - rhs) < 1e-12);
                CHECK(rhs > 0.0);
                CHECK(propagator(kPlastic, Branch::plus, a, c) <= 1.0);
            }
        }
        CHECK_THROWS_AS(propagator(kPlastic, Branch::plus, 1.5, 1.0),
                        std::domain_error);
    }
}

TEST_CASE("riccati residual is small away from the horizon") {
    const auto [rp, rm] = riccati_residual(kPlastic, 1.0, 1e-4);
    CHECK(std::abs(rp) < 1e-6);
    CHECK(std::abs(rm) < 1e-6);

    const ModelParams z{1.0, 0.0, 1.0, 2.0};
    const auto [zp, zm] = riccati_residual(z, 1.0, 1e-4);
    CHECK(std::abs(zp) < 1e-6);
    CHECK(std::abs(zm) < 1e-6);
}

TEST_CASE("riccati residual scales like h^2") {
    // the residual magnitude must drop by ~4x when the step halves
    const double t = 0.5;
    const auto [r1, _m1] = riccati_residual(kPlastic, t, 2e-3);
    const auto [r2, _m2] = riccati_residual(kPlastic, t, 1e-3);
    const double ratio = std::abs(r1) / std::abs(r2);
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
}

TEST_CASE("riccati residual stencil domain errors") {
    CHECK_THROWS_AS(riccati_residual(kPlastic, 2.0 - 1e-5, 1e-4), std::domain_error);
    CHECK_THROWS_AS(riccati_residual(kPlastic, 5e-5, 1e-4), std::domain_error);
    CHECK_THROWS_AS(riccati_residual(kPlastic, 1.0, 0.0), std::domain_error);
}

TEST_CASE("scaled riccati residual is uniformly small on (0,T)") {
    for (const ModelParams& p : {kPlastic, kElastic, ModelParams{0.25, 2.8, 1.0, 10.0}}) {
        for (int i = 0; i <= 60; ++i) {
            const double frac = std::exp(std::log(1e-6) +
                                         (std::log(0.99) - std::log(1e-6)) * i / 60.0);
            const double t = p.horizon * (1.0 - frac);
            if (t - 1e-4 * (p.horizon - t) < 0.0) continue;
            const auto [rp, rm] = riccati_residual_scaled(p, t);
            CHECK(std::abs(rp) < 1e-6);
            CHECK(std::abs(rm) < 1e-6);
        }
    }
}

TEST_CASE("coefficient eval bundles urgency") {
    const auto e = coefficient_eval(kPlastic, 0.5);
    const auto [cp, cm] = c_functions(kPlastic, 0.5);
    CHECK(e.urgency == Catch::Approx((cp + cm) / 2.0));
    CHECK(e.weights.w5 == Catch::Approx((cp - cm) / (cp + cm)));
}
