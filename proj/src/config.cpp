#include "cvfl/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cvfl {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double parse_double(const std::string& key, const std::string& value) {
    const std::string v = lower(value);
    if (v == "inf" || v == "infinity" || v == "+inf") return kInfinity;
    errno = 0;
    char* end = nullptr;
    const double d = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0' || errno == ERANGE) {
        throw Error(ErrorCode::configuration, key + ": '" + value + "' is not a number");
    }
    return d;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long u = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || value[0] == '-' || end == value.c_str() || *end != '\0' ||
        errno == ERANGE) {
        throw Error(ErrorCode::configuration,
                    key + ": '" + value + "' is not a non-negative integer");
    }
    return u;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T>
Setter number(T RunConfig::*field) {
    return [field](RunConfig& c, const std::string& k, const std::string& v) {
        c.*field = static_cast<T>(parse_double(k, v));
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto num = [](auto assign) -> Setter {
            return [assign](RunConfig& c, const std::string& k, const std::string& v) {
                assign(c, parse_double(k, v));
            };
        };
        t["omega"] = num([](RunConfig& c, double d) { c.osc.omega = d; });
        t["kappa"] = num([](RunConfig& c, double d) { c.osc.kappa = d; });
        t["hbar"] = num([](RunConfig& c, double d) { c.osc.hbar = d; });
        t["beta"] = num([](RunConfig& c, double d) { c.osc.beta = d; });
        t["fixed_point"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            const auto s = lower(v);
            if (s == "stable") c.osc.fixed_point = FixedPointKind::stable;
            else if (s == "unstable") c.osc.fixed_point = FixedPointKind::unstable;
            else throw Error(ErrorCode::configuration, k + ": expected stable|unstable");
        };
        t["gamma"] = num([](RunConfig& c, double d) { c.meas.gamma = d; });
        t["eta"] = num([](RunConfig& c, double d) { c.meas.eta = d; });
        t["sigma"] = num([](RunConfig& c, double d) { c.meas.sigma = d; });
        t["mode"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            const auto s = lower(v);
            if (s == "quantum") c.meas.mode = MeasurementMode::quantum;
            else if (s == "classical") c.meas.mode = MeasurementMode::classical;
            else throw Error(ErrorCode::configuration, k + ": expected quantum|classical");
        };
        t["scheme"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            const auto s = lower(v);
            if (s == "none") c.fb.scheme = Scheme::none;
            else if (s == "scheme1" || s == "1") c.fb.scheme = Scheme::scheme1;
            else if (s == "scheme2" || s == "2") c.fb.scheme = Scheme::scheme2;
            else throw Error(ErrorCode::configuration, k + ": expected none|scheme1|scheme2");
        };
        t["k"] = num([](RunConfig& c, double d) { c.fb.k = d; });
        t["tau"] = num([](RunConfig& c, double d) { c.fb.tau = d; });
        t["y0"] = num([](RunConfig& c, double d) { c.fb.reference.y0 = d; });
        t["Omega"] = num([](RunConfig& c, double d) { c.fb.reference.Omega = d; });
        t["phi"] = num([](RunConfig& c, double d) { c.fb.reference.phi = d; });
        t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.seed = parse_unsigned(k, v);
        };
        t["dt"] = number(&RunConfig::dt);
        t["t_end"] = number(&RunConfig::t_end);
        t["n_traj"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.n_traj = parse_unsigned(k, v);
        };
        t["x0"] = num([](RunConfig& c, double d) { c.initial.x = d; });
        t["p0"] = num([](RunConfig& c, double d) { c.initial.p = d; });
        t["vx0"] = num([](RunConfig& c, double d) { c.initial_cov.v_x = d; });
        t["vp0"] = num([](RunConfig& c, double d) { c.initial_cov.v_p = d; });
        t["c0"] = num([](RunConfig& c, double d) { c.initial_cov.c = d; });
        t["temperature"] = number(&RunConfig::temperature);
        t["potential.a"] = num([](RunConfig& c, double d) { c.potential.a = d; });
        t["potential.b"] = num([](RunConfig& c, double d) { c.potential.b = d; });
        t["potential.c"] = num([](RunConfig& c, double d) { c.potential.c = d; });
        t["grid.n"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.grid.nx = c.grid.np = parse_unsigned(k, v);
        };
        t["grid.nx"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.grid.nx = parse_unsigned(k, v);
        };
        t["grid.np"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.grid.np = parse_unsigned(k, v);
        };
        t["grid.half_width"] = num([](RunConfig& c, double d) {
            c.grid.x_min = c.grid.p_min = -d;
            c.grid.x_max = c.grid.p_max = d;
        });
        t["grid.x_min"] = num([](RunConfig& c, double d) { c.grid.x_min = d; });
        t["grid.x_max"] = num([](RunConfig& c, double d) { c.grid.x_max = d; });
        t["grid.p_min"] = num([](RunConfig& c, double d) { c.grid.p_min = d; });
        t["grid.p_max"] = num([](RunConfig& c, double d) { c.grid.p_max = d; });
        t["grid.advection"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.advection = parse_advection(lower(v));
        };
        t["grid.stochastic"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.stochastic = parse_stochastic_scheme(lower(v));
        };
        return t;
    }();
    return table;
}

}  // namespace

OverdampedParams RunConfig::overdamped() const {
    OverdampedParams op;
    op.kappa = osc.kappa;
    op.T = temperature;
    op.sigma = meas.sigma;
    op.gamma = meas.gamma;
    op.potential = potential;
    return op;
}

nlohmann::json RunConfig::echo() const {
    auto num = [](double v) -> nlohmann::json {
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        return v;
    };
    nlohmann::json j;
    j["omega"] = num(osc.omega);
    j["kappa"] = num(osc.kappa);
    j["hbar"] = num(osc.hbar);
    j["beta"] = num(osc.beta);
    j["fixed_point"] = to_string(osc.fixed_point);
    j["gamma"] = num(meas.gamma);
    j["eta"] = num(meas.eta);
    j["sigma"] = num(meas.sigma);
    j["mode"] = to_string(meas.mode);
    j["scheme"] = to_string(fb.scheme);
    j["k"] = num(fb.k);
    j["tau"] = num(fb.tau);
    j["y0"] = num(fb.reference.y0);
    j["Omega"] = fb.reference.Omega ? num(*fb.reference.Omega) : nlohmann::json("omega");
    j["phi"] = num(fb.reference.phi);
    j["seed"] = seed;
    j["dt"] = num(dt);
    j["t_end"] = num(t_end);
    j["n_traj"] = n_traj;
    j["x0"] = num(initial.x);
    j["p0"] = num(initial.p);
    j["vx0"] = num(initial_cov.v_x);
    j["vp0"] = num(initial_cov.v_p);
    j["c0"] = num(initial_cov.c);
    j["temperature"] = num(temperature);
    j["potential.a"] = num(potential.a);
    j["potential.b"] = num(potential.b);
    j["potential.c"] = num(potential.c);
    j["grid.nx"] = grid.nx;
    j["grid.np"] = grid.np;
    j["grid.x_min"] = num(grid.x_min);
    j["grid.x_max"] = num(grid.x_max);
    j["grid.p_min"] = num(grid.p_min);
    j["grid.p_max"] = num(grid.p_max);
    j["grid.advection"] = to_string(advection);
    j["grid.stochastic"] = to_string(stochastic);
    return j;
}

KeyValues parse_key_values(std::string_view text) {
    KeyValues out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::configuration,
                        "line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(std::string_view(stripped).substr(0, eq));
        std::string value = trim(std::string_view(stripped).substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw Error(ErrorCode::configuration,
                        "line " + std::to_string(line_no) + ": empty key or value");
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

KeyValues read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::configuration, "cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) {
        throw Error(ErrorCode::configuration, "unknown configuration key '" + key + "'");
    }
    it->second(cfg, key, value);
}

void apply_settings(RunConfig& cfg, const KeyValues& kv) {
    for (const auto& [k, v] : kv) apply_setting(cfg, k, v);
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : setters()) k.push_back(name);
        return k;
    }();
    return keys;
}

}  // namespace cvfl
