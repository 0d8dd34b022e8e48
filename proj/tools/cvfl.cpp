// cvfl <scenario> [--config FILE] [--seed S] [--out DIR] [--parallel N] [--set key=value]...
//
// Exit status: 0 all checks pass, 1 a check failed or the run aborted,
// 2 bad configuration or unknown scenario.

#include <cstdio>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cvfl/config.hpp"
#include "cvfl/scenarios.hpp"

namespace {

std::string joined_names() {
    std::string s;
    for (const auto& n : cvfl::scenario_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-measurement feedback lab"};
    std::string scenario, config_path, out_dir;
    std::uint64_t seed = 0;
    unsigned parallel = 1;
    std::vector<std::string> sets;
    bool list = false;

    app.add_option("scenario", scenario, "one of: " + joined_names());
    app.add_option("--config", config_path, "key = value file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory (default out/<scenario>)");
    app.add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--set", sets, "override a key, key=value (repeatable)");
    app.add_flag("--list", list, "list scenarios and configuration keys");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (list) {
        std::cout << "scenarios: " << joined_names() << "\nkeys:";
        for (const auto& k : cvfl::known_keys()) std::cout << ' ' << k;
        std::cout << '\n';
        return 0;
    }
    if (scenario.empty()) {
        std::cerr << "cvfl: missing scenario (" << joined_names() << ")\n";
        return 2;
    }

    cvfl::RunConfig cfg;
    std::set<std::string> explicit_keys;
    try {
        cfg = cvfl::scenario_defaults(scenario);
        cvfl::KeyValues kv;
        if (!config_path.empty()) kv = cvfl::read_config_file(config_path);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0)
                throw cvfl::Error(cvfl::ErrorCode::configuration,
                                  "--set expects key=value, got '" + s + "'");
            kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : kv) {
            cvfl::apply_setting(cfg, k, v);
            explicit_keys.insert(k);
        }
        if (*seed_opt) {
            cfg.seed = seed;
            explicit_keys.insert("seed");
        }
        cfg.workers = parallel;
    } catch (const cvfl::Error& e) {
        std::cerr << "cvfl: " << e.what() << '\n';
        return 2;
    }
    if (out_dir.empty()) out_dir = "out/" + scenario;

    try {
        const auto r = cvfl::run_scenario(scenario, cfg, explicit_keys, out_dir);
        for (const auto& c : r.checks) {
            std::printf("%s  %-48s value=%-12.6g limit=%-10.4g %s\n", c.pass ? "PASS" : "FAIL",
                        c.name.c_str(), c.value, c.limit, c.detail.c_str());
        }
        std::printf("%s: %s (artifacts in %s)\n", scenario.c_str(),
                    r.passed() ? "all checks passed" : "check failure", out_dir.c_str());
        return r.passed() ? 0 : 1;
    } catch (const cvfl::Error& e) {
        std::cerr << "cvfl: " << cvfl::to_string(e.code()) << ": " << e.what() << '\n';
        const bool config_error = e.code() == cvfl::ErrorCode::configuration ||
                                  e.code() == cvfl::ErrorCode::parameter;
        return config_error ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "cvfl: " << e.what() << '\n';
        return 1;
    }
}
