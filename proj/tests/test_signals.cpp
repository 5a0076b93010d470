#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "duotrack/scenarios.hpp"
#include "duotrack/signals.hpp"

using namespace duotrack;

namespace {
std::shared_ptr<const TimeGrid> grid_for(const ScenarioSpec& sc) {
    return GridSpec{}.build_shared(sc.params.horizon);
}
}  // namespace

TEST_CASE("kernel piece integral basics") {
    const ModelParams p{1.0, 2.0, 1.0, 2.0};
    for (int which : {1, 2}) {
        for (double t : {0.0, 0.7, 1.5}) {
            CHECK(kernel_piece_integral(p, which, t, t, p.horizon) ==
                  Catch::Approx(1.0).margin(1e-10));
            CHECK(kernel_piece_integral(p, which, t, 1.6, 1.6) == 0.0);
        }
    }
    CHECK_THROWS_AS(kernel_piece_integral(p, 1, 0.5, 0.2, 1.0), std::domain_error);
    CHECK_THROWS_AS(kernel_piece_integral(p, 1, 0.5, 1.0, 0.7), std::domain_error);
}

TEST_CASE("kernel piece integral is additive") {
    const ModelParams p{1.0, 0.1, 1.0, 10.0};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        double t = 9.0 * uni(rng);
        double a = t + (10.0 - t) * uni(rng);
        double c = a + (10.0 - a) * uni(rng);
        double b = a + (c - a) * uni(rng);
        for (int which : {1, 2}) {
            const double whole = kernel_piece_integral(p, which, t, a, c);
            const double split = kernel_piece_integral(p, which, t, a, b) +
                                 kernel_piece_integral(p, which, t, b, c);
            CHECK(std::abs(whole - split) < 1e-12);
        }
    }
}

TEST_CASE("liquidation scenario has identically zero signals") {
    const auto& sc = find_builtin("liquidation-plastic")->spec;
    const auto sig = signal_deterministic(sc, grid_for(sc));
    for (std::size_t k = 0; k < sig.xi_hat_1.size(); ++k) {
        CHECK(sig.xi_hat_1[k] == 0.0);
        CHECK(sig.xi_hat_2[k] == 0.0);
    }
}

TEST_CASE("buying schedule signals approach the terminal constraints") {
    const auto& sc = find_builtin("buying-schedule")->spec;
    const auto sig = signal_deterministic(sc, grid_for(sc));
    CHECK(std::abs(sig.xi_hat_1.back() - 2.0) < 1e-4);
    CHECK(std::abs(sig.xi_hat_2.back() - 0.0) < 1e-4);
    // the signal anticipates the jump: already above the pre-jump level before T/2
    const auto grid = sig.grid;
    for (std::size_t k = 0; k < grid->size(); ++k)
        if (grid->nodes[k] > 4.0 && grid->nodes[k] < 5.0)
            CHECK(sig.xi_hat_1[k] > 1.0);
}

TEST_CASE("signals approach the terminal constraints on every shipped scenario") {
    for (const auto& b : builtin_scenarios()) {
        INFO(b.name);
        const auto grid = grid_for(b.spec);
        SignalPath sig;
        if (b.spec.deterministic()) {
            sig = signal_deterministic(b.spec, grid);
        } else {
            const auto path = simulate_price_path(b.spec.params, grid, 99, 0);
            sig = signal_martingale(b.spec, path, grid);
        }
        CHECK(std::abs(sig.xi_hat_1.back() - b.spec.target1.terminal) < 1e-4);
        CHECK(std::abs(sig.xi_hat_2.back() - b.spec.target2.terminal) < 1e-4);
    }
}

TEST_CASE("signal sum and difference columns are exact") {
    const auto& sc = find_builtin("hold-pair")->spec;
    const auto sig = signal_deterministic(sc, grid_for(sc));
    for (std::size_t k = 0; k < sig.xi_hat_1.size(); ++k) {
        CHECK(sig.xi_hat_sum[k] == sig.xi_hat_1[k] + sig.xi_hat_2[k]);
        CHECK(sig.xi_hat_diff[k] == sig.xi_hat_1[k] - sig.xi_hat_2[k]);
    }
}

TEST_CASE("swapping the players swaps the signals exactly") {
    const auto& base = find_builtin("hold-pair")->spec;
    ScenarioSpec swapped = base;
    std::swap(swapped.x1, swapped.x2);
    std::swap(swapped.target1, swapped.target2);
    const auto grid = grid_for(base);
    const auto sig = signal_deterministic(base, grid);
    const auto sig_swapped = signal_deterministic(swapped, grid);
    CHECK(sig.xi_hat_1 == sig_swapped.xi_hat_2);
    CHECK(sig.xi_hat_2 == sig_swapped.xi_hat_1);
}

TEST_CASE("symmetric players share one signal") {
    ScenarioSpec sc = find_builtin("hold-pair")->spec;
    sc.target2 = sc.target1;
    sc.x2 = sc.x1;
    const auto sig = signal_deterministic(sc, grid_for(sc));
    CHECK(sig.xi_hat_1 == sig.xi_hat_2);
}

TEST_CASE("martingale signals collapse to the weight identities") {
    const auto& solo = find_builtin("delta-hedge")->spec;
    auto grid = grid_for(solo);
    const auto path = simulate_price_path(solo.params, grid, 7, 0);
    const auto sig = signal_martingale(solo, path, grid);
    for (std::size_t k = 0; k < grid->size(); ++k) {
        const double t = grid->nodes[k];
        const Weights w = weights_at(solo.params, t);
        const double xi1 = target_value(solo.target1, &path, solo.params, t);
        CHECK(sig.xi_hat_1[k] == Catch::Approx((w.w3 + w.w4) * xi1).margin(1e-14));
        CHECK(sig.xi_hat_2[k] == Catch::Approx((w.w3 - w.w4) * xi1).margin(1e-14));
    }

    const auto& pair = find_builtin("delta-hedge-pair")->spec;
    const auto sig_pair = signal_martingale(pair, path, grid);
    for (std::size_t k = 0; k < grid->size(); k += 37) {
        const double t = grid->nodes[k];
        const Weights w = weights_at(pair.params, t);
        const double xi1 = target_value(pair.target1, &path, pair.params, t);
        CHECK(sig_pair.xi_hat_1[k] ==
              Catch::Approx((w.w3 * 1.1 + w.w4 * 0.9) * xi1).margin(1e-14));
    }
}

TEST_CASE("identical martingale targets cancel the difference terms") {
    ScenarioSpec sc = find_builtin("delta-hedge-pair")->spec;
    sc.target2 = sc.target1;
    auto grid = grid_for(sc);
    const auto path = simulate_price_path(sc.params, grid, 3, 0);
    const auto sig = signal_martingale(sc, path, grid);
    for (std::size_t k = 0; k < grid->size(); k += 101) {
        CHECK(sig.xi_hat_1[k] == sig.xi_hat_2[k]);
        const double t = grid->nodes[k];
        const Weights w = weights_at(sc.params, t);
        const double xi1 = target_value(sc.target1, &path, sc.params, t);
        CHECK(sig.xi_hat_1[k] == Catch::Approx(2.0 * w.w3 * xi1).margin(1e-14));
    }
}

TEST_CASE("martingale signal equals brute-force kernel integration") {
    const auto& sc = find_builtin("delta-hedge-pair")->spec;
    auto grid = grid_for(sc);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const auto path = simulate_price_path(sc.params, grid, 42, i);
        const auto sig = signal_martingale(sc, path, grid);
        for (std::size_t k = 0; k < grid->size(); k += 13) {
            const double t = grid->nodes[k];
            const Weights w = weights_at(sc.params, t);
            const double a = target_value(sc.target1, &path, sc.params, t);
            const double b = target_value(sc.target2, &path, sc.params, t);
            const double m1 = kernel_piece_integral(sc.params, 1, t, t, sc.params.horizon);
            const double m2 = kernel_piece_integral(sc.params, 2, t, t, sc.params.horizon);
            const double brute = w.w3 * (a + b) * m1 + w.w4 * (a - b) * m2;
            worst = std::max(worst, std::abs(brute - sig.xi_hat_1[k]));
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("unsupported kinds are rejected") {
    const auto& stochastic = find_builtin("delta-hedge")->spec;
    CHECK_THROWS_AS(signal_deterministic(stochastic, grid_for(stochastic)),
                    std::invalid_argument);
    ScenarioSpec random_terminal = find_builtin("liquidation-plastic")->spec;
    random_terminal.target1.terminal_random = true;
    CHECK_THROWS_AS(signal_deterministic(random_terminal, grid_for(random_terminal)),
                    std::invalid_argument);
}

TEST_CASE("aux processes: zero targets give constant forecasts") {
    ScenarioSpec sc = find_builtin("liquidation-plastic")->spec;
    sc.target1.terminal = 1.0;  // nonzero terminal, zero running target
    const auto aux = aux_processes(sc, nullptr, grid_for(sc));
    for (std::size_t k = 0; k < aux.y_plus.size(); k += 97) {
        CHECK(aux.y_plus[k] == 0.0);
        CHECK(aux.y_minus[k] == 0.0);
        CHECK(aux.m_plus[k] == 1.0);
        CHECK(aux.m_minus[k] == 1.0);
        CHECK(aux.m_minus_y_plus[k] == 1.0);
        CHECK(aux.m_minus_y_minus[k] == 1.0);
    }
}

TEST_CASE("aux processes reconstruct the deterministic signal") {
    const auto& sc = find_builtin("buying-schedule")->spec;
    auto grid = grid_for(sc);
    const auto sig = signal_deterministic(sc, grid);
    const auto aux = aux_processes(sc, nullptr, grid);
    double worst1 = 0.0, worst_sum = 0.0, worst_diff = 0.0;
    for (std::size_t k = 0; k < grid->size(); ++k) {
        const Weights w = weights_at(sc.params, grid->nodes[k]);
        const double plus = w.w1 * aux.m_minus_y_plus[k];
        const double minus = w.w2 * aux.m_minus_y_minus[k];
        worst1 = std::max(worst1, std::abs(plus + minus - sig.xi_hat_1[k]));
        worst_sum = std::max(worst_sum, std::abs(2.0 * plus - sig.xi_hat_sum[k]));
        worst_diff = std::max(worst_diff, std::abs(2.0 * minus - sig.xi_hat_diff[k]));
    }
    CHECK(worst1 < 1e-8);
    CHECK(worst_sum < 1e-8);
    CHECK(worst_diff < 1e-8);

    // the raw M, Y columns tell the same story where their common scale
    // leaves headroom for the subtraction
    for (std::size_t k = 0; k < grid->size(); k += 87) {
        const double scale = std::max({1.0, std::abs(aux.m_minus[k])});
        const double diff = aux.m_minus[k] - aux.y_minus[k];
        CHECK(diff == Catch::Approx(aux.m_minus_y_minus[k])
                          .margin(1e-12 * scale));
    }
}

TEST_CASE("aux processes reconstruct the pathwise signal") {
    const auto& sc = find_builtin("delta-hedge-pair")->spec;
    auto grid = grid_for(sc);
    const auto path = simulate_price_path(sc.params, grid, 42, 0);
    const auto sig = signal_martingale(sc, path, grid);
    const auto aux = aux_processes(sc, &path, grid);
    double worst = 0.0;
    for (std::size_t k = 0; k < grid->size(); ++k) {
        const Weights w = weights_at(sc.params, grid->nodes[k]);
        const double rec = w.w1 * aux.m_minus_y_plus[k] +
                           w.w2 * aux.m_minus_y_minus[k];
        worst = std::max(worst, std::abs(rec - sig.xi_hat_1[k]));
    }
    CHECK(worst < 1e-6);
}
