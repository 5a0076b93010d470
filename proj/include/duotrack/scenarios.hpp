#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "duotrack/targets.hpp"

namespace duotrack {

/// Named, frozen problem instances. One entry per regime panel of the four
/// case studies shipped with this library; names and parameters are part of
/// the tool's contract and referenced by the acceptance suite.
struct BuiltinScenario {
    std::string name;
    std::string description;
    ScenarioSpec spec;
    bool in_deterministic_quartet = false;
};

namespace detail {

inline std::vector<BuiltinScenario> make_builtin_scenarios() {
    std::vector<BuiltinScenario> out;
    auto add = [&](std::string name, std::string desc, ScenarioSpec sc,
                   bool quartet = false) {
        sc.validate();
        out.push_back({std::move(name), std::move(desc), std::move(sc), quartet});
    };

    const auto liquidation = [](double gamma) {
        ScenarioSpec sc;
        sc.params = {1.0, gamma, 1.0, 2.0};
        sc.x1 = 1.0;
        sc.x2 = 0.0;
        sc.target1 = TargetSpec::zero(0.0);
        sc.target2 = TargetSpec::zero(0.0);
        return sc;
    };
    add("liquidation-plastic",
        "player 1 unwinds one share by T=2 in a plastic market (gamma=2); "
        "player 2 has no trading targets of her own",
        liquidation(2.0), true);
    add("liquidation-elastic",
        "same liquidation duel in an elastic market (gamma=0.1)",
        liquidation(0.1), true);
    add("liquidation-elastic-001",
        "liquidation duel at the near-frictionless permanent impact gamma=0.01",
        liquidation(0.01));

    const auto buying = [](double gamma) {
        ScenarioSpec sc;
        sc.params = {1.0, gamma, 1.0, 10.0};
        sc.x1 = 0.0;
        sc.x2 = 0.0;
        sc.target1 = TargetSpec::piecewise({0.0, 5.0}, {1.0, 2.0}, 2.0);
        sc.target2 = TargetSpec::zero(0.0);
        return sc;
    };
    add("buying-schedule",
        "player 1 follows a stock-buying schedule on [0,10]: hold one share, "
        "double at T/2, end constrained to two shares; plastic market (gamma=2)",
        buying(2.0), true);
    add("buying-schedule-elastic", "the same buying schedule with gamma=0.1",
        buying(0.1));

    const auto hold_pair = [](double gamma) {
        ScenarioSpec sc;
        sc.params = {1.0, gamma, 1.0, 10.0};
        sc.x1 = 0.0;
        sc.x2 = 0.0;
        sc.target1 = TargetSpec::piecewise({0.0}, {1.0}, 1.0);
        sc.target2 = TargetSpec::piecewise({0.0}, {0.1}, 0.1);
        return sc;
    };
    add("hold-pair",
        "both players build and hold positive inventories on [0,10], player 1 "
        "ten times larger; plastic market (gamma=2)",
        hold_pair(2.0), true);
    add("hold-pair-elastic", "the same paired holding targets with gamma=0.1",
        hold_pair(0.1));

    const auto delta_hedge = [](double gamma, bool pair) {
        ScenarioSpec sc;
        sc.params = {1.0, gamma, 1.0, 5.0};
        sc.x1 = 0.5;
        sc.x2 = pair ? 0.05 : 0.0;
        sc.target1 = TargetSpec::bachelier(1.0, 0.0);
        sc.target2 = pair ? TargetSpec::bachelier(0.1, 0.0) : TargetSpec::zero(0.0);
        return sc;
    };
    add("delta-hedge",
        "player 1 tracks the frictionless hedge ratio of an at-the-money call "
        "and unwinds at T=5; player 2 is target-free; plastic market (gamma=2)",
        delta_hedge(2.0, false));
    add("delta-hedge-elastic", "the single-hedger scenario with gamma=0.1",
        delta_hedge(0.1, false));
    add("delta-hedge-pair",
        "both players hedge the same call, player 2 a one-tenth fraction "
        "(x2 = 1/20); plastic market (gamma=2)",
        delta_hedge(2.0, true));
    add("delta-hedge-pair-elastic", "the paired hedgers with gamma=0.1",
        delta_hedge(0.1, true));
    return out;
}

}  // namespace detail

inline const std::vector<BuiltinScenario>& builtin_scenarios() {
    static const std::vector<BuiltinScenario> registry = detail::make_builtin_scenarios();
    return registry;
}

inline const BuiltinScenario* find_builtin(std::string_view name) {
    for (const auto& s : builtin_scenarios())
        if (s.name == name) return &s;
    return nullptr;
}

/// The four deterministic scenarios used by the cross-method, deviation and
/// drift-residual acceptance checks.
inline std::vector<const BuiltinScenario*> deterministic_quartet() {
    std::vector<const BuiltinScenario*> out;
    for (const auto& s : builtin_scenarios())
        if (s.in_deterministic_quartet) out.push_back(&s);
    return out;
}

}  // namespace duotrack
