#include "steinembed/report.hpp"

#include <sstream>
#include <stdexcept>

namespace steinembed::report {

const char* kind_name(CheckKind k) {
    switch (k) {
        case CheckKind::le: return "le";
        case CheckKind::abs_diff_le: return "abs-diff-le";
    }
    return "?";
}

CheckKind kind_by_name(const std::string& s) {
    if (s == "le") return CheckKind::le;
    if (s == "abs-diff-le") return CheckKind::abs_diff_le;
    throw std::invalid_argument("unknown check kind '" + s + "'");
}

Check Check::le(std::string name, double value, double tolerance, std::string provenance,
                std::string note) {
    Check c;
    c.name = std::move(name);
    c.kind = CheckKind::le;
    c.value = value;
    c.tolerance = tolerance;
    c.provenance = std::move(provenance);
    c.note = std::move(note);
    c.pass = c.recompute_pass();
    return c;
}

Check Check::abs_diff(std::string name, double value, double target, double tolerance,
                      std::string provenance, std::string note) {
    Check c;
    c.name = std::move(name);
    c.kind = CheckKind::abs_diff_le;
    c.value = value;
    c.target = target;
    c.tolerance = tolerance;
    c.provenance = std::move(provenance);
    c.note = std::move(note);
    c.pass = c.recompute_pass();
    return c;
}

Check Check::within_4se(std::string name, double value, double target, double stderr_,
                        std::string provenance, std::string note) {
    Check c = abs_diff(std::move(name), value, target, 4.0 * stderr_, std::move(provenance),
                       std::move(note));
    c.stderr_ = stderr_;
    return c;
}

bool Check::recompute_pass() const {
    switch (kind) {
        case CheckKind::le: return value <= tolerance;
        case CheckKind::abs_diff_le: return std::abs(value - target) <= tolerance;
    }
    return false;
}

nlohmann::ordered_json Check::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["kind"] = kind_name(kind);
    j["value"] = value;
    if (!std::isnan(target)) j["target"] = target;
    if (!std::isnan(stderr_)) j["stderr"] = stderr_;
    j["tolerance"] = tolerance;
    j["pass"] = pass;
    j["provenance"] = provenance;
    if (!note.empty()) j["note"] = note;
    return j;
}

Check Check::from_json(const nlohmann::ordered_json& j) {
    Check c;
    c.name = j.at("name").get<std::string>();
    c.kind = kind_by_name(j.at("kind").get<std::string>());
    c.value = j.at("value").get<double>();
    if (j.contains("target")) c.target = j.at("target").get<double>();
    if (j.contains("stderr")) c.stderr_ = j.at("stderr").get<double>();
    c.tolerance = j.at("tolerance").get<double>();
    c.pass = j.at("pass").get<bool>();
    c.provenance = j.at("provenance").get<std::string>();
    if (j.contains("note")) c.note = j.at("note").get<std::string>();
    return c;
}

bool Report::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

nlohmann::ordered_json Report::to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = "stein-embed/1";
    j["command"] = command;
    j["parameters"] = parameters;
    j["seed"] = seed;
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) j["checks"].push_back(c.to_json());
    if (!extras.empty()) j["breakdown"] = extras;
    if (include_timing) j["wall_clock_s"] = wall_clock_s;
    j["pass"] = all_pass();
    return j;
}

std::string Report::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "name,kind,value,target,stderr,tolerance,pass,provenance\n";
    for (const auto& c : checks) {
        os << c.name << ',' << kind_name(c.kind) << ',' << c.value << ',';
        if (!std::isnan(c.target)) os << c.target;
        os << ',';
        if (!std::isnan(c.stderr_)) os << c.stderr_;
        os << ',' << c.tolerance << ',' << (c.pass ? "true" : "false") << ',' << c.provenance
           << '\n';
    }
    return os.str();
}

}  // namespace steinembed::report
