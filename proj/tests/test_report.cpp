#include "doctest.h"
#include "steinembed/report.hpp"

using namespace steinembed::report;

TEST_CASE("check constructors and verdicts") {
    const auto a = Check::le("offdiag", 1e-14, 1e-12, "exact");
    CHECK(a.pass);
    const auto b = Check::le("offdiag", 1e-10, 1e-12, "exact");
    CHECK(!b.pass);

    const auto c = Check::abs_diff("moment", 7.01, 7.0, 0.05, "mc");
    CHECK(c.pass);
    const auto d = Check::within_4se("z", 1.1, 1.0, 0.05, "mc");
    CHECK(d.pass);
    CHECK(d.tolerance == doctest::Approx(0.2));
    const auto e = Check::within_4se("z", 1.5, 1.0, 0.05, "mc");
    CHECK(!e.pass);
}

TEST_CASE("json round trip re-derives the verdicts") {
    Report r;
    r.command = "graph-verify";
    r.seed = 42;
    r.parameters["n"] = 10;
    r.parameters["p"] = 0.5;
    r.checks.push_back(Check::le("identity", 3e-15, 1e-12, "exact"));
    r.checks.push_back(Check::within_4se("eq11", 0.124, 0.125, 0.001, "mc"));
    r.checks.push_back(Check::abs_diff("moment", 4.1, 7.0, 0.1, "paper-formula", "known gap"));
    r.include_timing = false;

    const auto j = r.to_json();
    CHECK(j["schema"] == "stein-embed/1");
    CHECK(j["pass"] == false);
    CHECK(!j.contains("wall_clock_s"));

    for (const auto& cj : j["checks"]) {
        const Check back = Check::from_json(cj);
        CHECK(back.pass == back.recompute_pass());
    }
    CHECK(Check::from_json(j["checks"][0]).pass);
    CHECK(Check::from_json(j["checks"][1]).pass);
    CHECK(!Check::from_json(j["checks"][2]).pass);
}

TEST_CASE("csv projection") {
    Report r;
    r.command = "x";
    r.checks.push_back(Check::le("a", 0.0, 1.0, "exact"));
    r.checks.push_back(Check::within_4se("b", 2.0, 2.0, 0.1, "mc"));
    const std::string csv = r.to_csv();
    CHECK(csv.find("name,kind,value,target,stderr,tolerance,pass,provenance") == 0);
    CHECK(csv.find("\na,le,") != std::string::npos);
    CHECK(csv.find("\nb,abs-diff-le,") != std::string::npos);
    // two data rows plus header
    int lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 3);
}
