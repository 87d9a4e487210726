#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

// Machine-readable verification reports: a flat list of named checks, each
// carrying the numbers needed to re-derive its verdict, plus free-form
// breakdown values. JSON (schema "stein-embed/1") or CSV.

namespace steinembed::report {

// le:          pass iff value <= tolerance
// abs_diff_le: pass iff |value - target| <= tolerance
enum class CheckKind { le, abs_diff_le };

const char* kind_name(CheckKind k);
CheckKind kind_by_name(const std::string& s);

struct Check {
    std::string name;
    CheckKind kind = CheckKind::le;
    double value = 0.0;
    double target = std::numeric_limits<double>::quiet_NaN();  // abs_diff_le only
    double stderr_ = std::numeric_limits<double>::quiet_NaN(); // informational
    double tolerance = 0.0;
    bool pass = false;
    std::string provenance = "exact";  // exact | mc | paper-formula
    std::string note;

    static Check le(std::string name, double value, double tolerance, std::string provenance,
                    std::string note = "");
    static Check abs_diff(std::string name, double value, double target, double tolerance,
                          std::string provenance, std::string note = "");
    // convenience: z-style check |value - target| <= 4 * stderr
    static Check within_4se(std::string name, double value, double target, double stderr_,
                            std::string provenance, std::string note = "");

    bool recompute_pass() const;
    nlohmann::ordered_json to_json() const;
    static Check from_json(const nlohmann::ordered_json& j);
};

struct Report {
    std::string command;
    nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
    std::uint64_t seed = 0;
    std::vector<Check> checks;
    nlohmann::ordered_json extras = nlohmann::ordered_json::object();
    double wall_clock_s = 0.0;
    bool include_timing = true;

    bool all_pass() const;
    nlohmann::ordered_json to_json() const;
    std::string to_csv() const;
};

}  // namespace steinembed::report
