#pragma once

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "duotrack/grid.hpp"
#include "duotrack/scenarios.hpp"
#include "duotrack/targets.hpp"
#include "duotrack/verify.hpp"

namespace duotrack {

/// Locale-independent decimal formatting with 17 significant digits, enough
/// to round-trip any double; keeps CSV output byte-stable across runs.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                   std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

/// Minimal RFC-4180-style writer: comma separators, '\n' line endings, one
/// header row. Values never need quoting here (numeric columns only).
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void header(std::initializer_list<std::string_view> names) {
        bool first = true;
        for (auto n : names) {
            if (!first) os_ << ',';
            os_ << n;
            first = false;
        }
        os_ << '\n';
    }
    void row(std::span<const double> values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) os_ << ',';
            os_ << format_double(values[i]);
        }
        os_ << '\n';
    }

private:
    std::ostream& os_;
};

inline std::string target_kind_name(TargetKind k) {
    switch (k) {
        case TargetKind::zero: return "zero";
        case TargetKind::piecewise_constant: return "piecewise_constant";
        case TargetKind::scaled_bachelier_delta: return "scaled_bachelier_delta";
    }
    return "unknown";
}

inline TargetKind target_kind_from_name(std::string_view name) {
    if (name == "zero") return TargetKind::zero;
    if (name == "piecewise_constant") return TargetKind::piecewise_constant;
    if (name == "scaled_bachelier_delta") return TargetKind::scaled_bachelier_delta;
    throw std::invalid_argument("unknown target kind: " + std::string(name));
}

inline nlohmann::json target_to_json(const TargetSpec& t) {
    nlohmann::json j;
    j["kind"] = target_kind_name(t.kind);
    j["terminal"] = t.terminal;
    if (t.kind == TargetKind::piecewise_constant) {
        j["breakpoints"] = t.breakpoints;
        j["levels"] = t.levels;
    }
    if (t.kind == TargetKind::scaled_bachelier_delta) j["scale"] = t.scale;
    if (t.terminal_random) j["terminal_random"] = true;
    return j;
}

inline TargetSpec target_from_json(const nlohmann::json& j) {
    TargetSpec t;
    t.kind = target_kind_from_name(j.at("kind").get<std::string>());
    t.terminal = j.at("terminal").get<double>();
    if (t.kind == TargetKind::piecewise_constant) {
        t.breakpoints = j.at("breakpoints").get<std::vector<double>>();
        t.levels = j.at("levels").get<std::vector<double>>();
    }
    if (t.kind == TargetKind::scaled_bachelier_delta)
        t.scale = j.at("scale").get<double>();
    t.terminal_random = j.value("terminal_random", false);
    return t;
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& sc) {
    nlohmann::json j;
    j["params"] = {{"lambda", sc.params.lambda},
                   {"gamma", sc.params.gamma},
                   {"sigma", sc.params.sigma},
                   {"horizon", sc.params.horizon}};
    j["x1"] = sc.x1;
    j["x2"] = sc.x2;
    j["target1"] = target_to_json(sc.target1);
    j["target2"] = target_to_json(sc.target2);
    return j;
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    try {
        ScenarioSpec sc;
        const auto& p = j.at("params");
        sc.params.lambda = p.at("lambda").get<double>();
        sc.params.gamma = p.at("gamma").get<double>();
        sc.params.sigma = p.at("sigma").get<double>();
        sc.params.horizon = p.at("horizon").get<double>();
        sc.x1 = j.at("x1").get<double>();
        sc.x2 = j.at("x2").get<double>();
        sc.target1 = target_from_json(j.at("target1"));
        sc.target2 = target_from_json(j.at("target2"));
        sc.validate();
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed scenario document: ") +
                                    e.what());
    }
}

inline nlohmann::json report_to_json(const VerificationReport& rep) {
    nlohmann::json j;
    for (const auto& c : rep.checks) {
        nlohmann::json e;
        e["value"] = c.value;
        e["tolerance"] = c.tolerance;
        e["pass"] = c.pass;
        if (c.skipped) e["skipped"] = true;
        if (!c.note.empty()) e["note"] = c.note;
        j[c.name] = e;
    }
    j["terminal_gaps"]["player1"] = rep.terminal_gap1;
    j["terminal_gaps"]["player2"] = rep.terminal_gap2;
    j["all_pass"] = rep.all_pass();
    return j;
}

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << content;
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace duotrack
