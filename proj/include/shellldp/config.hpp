#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shellldp/diffusion.hpp"
#include "shellldp/dynamics.hpp"
#include "shellldp/noise.hpp"
#include "shellldp/rate.hpp"
#include "shellldp/spectral.hpp"

namespace shellldp {

using json = nlohmann::json;

inline constexpr const char* tool_name = "shellldp";
inline constexpr const char* tool_version = "1.0.0";
inline constexpr int schema_version = 1;

/// Validation failure located by a JSON pointer into the config.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string pointer, const std::string& message)
        : std::runtime_error(message), pointer_(std::move(pointer))
    {
    }
    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

namespace cfg {

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys)
{
    if (!j.is_object()) throw ConfigError(path.empty() ? "/" : path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(child(path, it.key()), "unknown key");
    }
}

inline double number(const json& j, const std::string& path, const char* key, double fallback)
{
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(child(path, key), "expected a number");
    return v.get<double>();
}

inline double number(const json& j, const std::string& path, const char* key)
{
    if (!j.contains(key)) throw ConfigError(child(path, key), "missing required key");
    return number(j, path, key, 0.0);
}

inline std::uint64_t count(const json& j, const std::string& path, const char* key, std::uint64_t fallback)
{
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError(child(path, key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

inline std::string text(const json& j, const std::string& path, const char* key, const std::string& fallback)
{
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) throw ConfigError(child(path, key), "expected a string");
    return v.get<std::string>();
}

inline bool flag(const json& j, const std::string& path, const char* key, bool fallback)
{
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean()) throw ConfigError(child(path, key), "expected true or false");
    return v.get<bool>();
}

inline void check(bool ok, const std::string& pointer, const std::string& message)
{
    if (!ok) throw ConfigError(pointer, message);
}

inline std::vector<double> numbers(const json& v, const std::string& path)
{
    check(v.is_array(), path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        check(v[i].is_number(), path + "/" + std::to_string(i), "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

/// Complex components as numbers (real) or [re, im] pairs.
inline std::vector<cplx> complexes(const json& v, const std::string& path)
{
    check(v.is_array(), path, "expected an array of numbers or [re, im] pairs");
    std::vector<cplx> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        if (v[i].is_number()) out.emplace_back(v[i].get<double>(), 0.0);
        else {
            check(v[i].is_array() && v[i].size() == 2 && v[i][0].is_number() && v[i][1].is_number(), p,
                  "expected a number or [re, im]");
            out.emplace_back(v[i][0].get<double>(), v[i][1].get<double>());
        }
    }
    return out;
}

template <class V>
V shell_vector(const json& v, const std::string& path, std::size_t m)
{
    const auto c = complexes(v, path);
    check(c.size() <= m, path, "more components than shells (m = " + std::to_string(m) + ")");
    V out(m);
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i];
    return out;
}

/// Per-shell list from either `plural` (array of m numbers) or `singular` (scalar for every shell).
inline std::vector<double> per_shell(const json& j, const std::string& path, const char* plural, const char* singular,
                                     std::size_t m, double fallback)
{
    check(!(j.contains(plural) && j.contains(singular)), child(path, plural),
          std::string("give either '") + plural + "' or '" + singular + "', not both");
    if (j.contains(plural)) {
        auto v = numbers(j.at(plural), child(path, plural));
        check(v.size() == m, child(path, plural), "needs one entry per shell (m = " + std::to_string(m) + ")");
        return v;
    }
    return std::vector<double>(m, number(j, path, singular, fallback));
}

} // namespace cfg

/// Sets the value at a dotted path ("solver.steps") from override text; the text is read as
/// JSON when it parses, else as a string.
inline void apply_override(json& root, const std::string& dotted, const std::string& value)
{
    json* node = &root;
    std::size_t start = 0;
    std::string pointer;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("/" + dotted, "empty key in override path");
        pointer += "/" + key;
        if (node->is_null()) *node = json::object();
        if (!node->is_object()) throw ConfigError(pointer, "override path crosses a non-object value");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json parsed = json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? json(value) : parsed;
}

/// 64-bit FNV-1a of the canonical (sorted-key, compact) serialisation.
inline std::string config_hash(const json& j)
{
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return out;
}

struct OutputPaths {
    std::string csv, json, snapshot;
};

/// Parsed and validated experiment configuration. `params` holds the study-specific block,
/// validated by the study runner.
struct ExperimentConfig {
    std::string study;
    std::uint64_t seed = 1;
    ModelParams model;
    CovarianceSpec cov;
    DiffusionFamily diffusion;
    std::optional<DiffusionFamily> diffusion_bar;
    SolverConfig solver;
    ShellState xi;
    Control control;
    json params = json::object();
    OutputPaths output;
    json canonical;
    std::string hash;
};

inline const std::vector<std::string>& study_names()
{
    static const std::vector<std::string> names{"simulate", "skeleton",         "identities", "rate",
                                                "mc-ldp",   "weak-convergence", "increments", "levelset"};
    return names;
}

namespace cfg {

inline ModelParams parse_model(const json& j, const std::string& path)
{
    allow_keys(j, path, {"variant", "a", "b", "mu", "k0", "m"});
    ModelParams p;
    const std::string v = text(j, path, "variant", "GOY");
    if (v == "GOY") p.variant = Variant::GOY;
    else if (v == "Sabra") p.variant = Variant::Sabra;
    else throw ConfigError(child(path, "variant"), "expected \"GOY\" or \"Sabra\"");
    p.a = number(j, path, "a", p.a);
    p.b = number(j, path, "b", p.b);
    p.mu = number(j, path, "mu", p.mu);
    p.k0 = number(j, path, "k0", p.k0);
    p.m = static_cast<int>(count(j, path, "m", static_cast<std::uint64_t>(p.m)));
    check(std::isfinite(p.a) && std::isfinite(p.b), child(path, "a"), "coefficients must be finite");
    check(std::isfinite(p.mu) && p.mu > 1.0, child(path, "mu"), "mu must be > 1");
    check(std::isfinite(p.k0) && p.k0 > 0.0, child(path, "k0"), "k0 must be > 0");
    check(p.m >= 3 && p.m <= 4096, child(path, "m"), "m must lie in [3, 4096]");
    return p;
}

inline CovarianceSpec parse_covariance(const json& j, const std::string& path, const ModelParams& mp)
{
    allow_keys(j, path, {"q", "power"});
    const std::size_t m = static_cast<std::size_t>(mp.m);
    CovarianceSpec c;
    check(!(j.contains("q") && j.contains("power")), child(path, "q"), "give either 'q' or 'power', not both");
    if (j.contains("q")) {
        c.q = numbers(j.at("q"), child(path, "q"));
        check(c.q.size() == m, child(path, "q"), "needs one entry per shell (m = " + std::to_string(m) + ")");
        for (std::size_t i = 0; i < m; ++i)
            check(std::isfinite(c.q[i]) && c.q[i] > 0.0, child(path, "q") + "/" + std::to_string(i), "q must be > 0");
        return c;
    }
    const json pw = j.value("power", json::object());
    const std::string pp = child(path, "power");
    allow_keys(pw, pp, {"amplitude", "exponent"});
    const double amp = number(pw, pp, "amplitude", 1e-2);
    const double ex = number(pw, pp, "exponent", 2.0);
    check(std::isfinite(amp) && amp > 0.0, child(pp, "amplitude"), "amplitude must be > 0");
    check(std::isfinite(ex), child(pp, "exponent"), "exponent must be finite");
    // q_n = amplitude * k_n^{-exponent}
    for (int n = 1; n <= mp.m; ++n) c.q.push_back(amp * std::pow(wavenumber(mp, n), -ex));
    return c;
}

inline DiffusionFamily parse_diffusion(const json& j, const std::string& path, std::size_t m, double horizon)
{
    allow_keys(j, path, {"kind", "gain", "gains", "slope", "slopes", "saturation", "time_amplitude", "gamma"});
    DiffusionFamily f;
    const std::string k = text(j, path, "kind", "constant");
    if (k == "constant") f.kind = DiffusionKind::ConstantDiagonal;
    else if (k == "linear") f.kind = DiffusionKind::LinearDiagonal;
    else if (k == "saturated") f.kind = DiffusionKind::SaturatedNemytskii;
    else throw ConfigError(child(path, "kind"), "expected \"constant\", \"linear\" or \"saturated\"");
    f.gains = per_shell(j, path, "gains", "gain", m, 1.0);
    if (f.kind == DiffusionKind::LinearDiagonal) f.slopes = per_shell(j, path, "slopes", "slope", m, 0.0);
    else check(!j.contains("slope") && !j.contains("slopes"), child(path, "slope"), "slopes apply to kind \"linear\" only");
    f.saturation = number(j, path, "saturation", 1.0);
    f.time_amplitude = number(j, path, "time_amplitude", 0.0);
    f.gamma = number(j, path, "gamma", 1.0);
    f.horizon = horizon;
    try {
        f.validate(m);
    } catch (const DomainError& e) {
        throw ConfigError(path, e.what());
    }
    return f;
}

inline SolverConfig parse_solver(const json& j, const std::string& path)
{
    allow_keys(j, path, {"T", "steps", "nu", "scheme", "monitor_N", "record_every", "step_guard", "alpha"});
    SolverConfig s;
    s.T = number(j, path, "T", 1.0);
    s.steps = count(j, path, "steps", 1024);
    s.nu = number(j, path, "nu", 0.0);
    const std::string sch = text(j, path, "scheme", s.nu > 0.0 ? "ExponentialEM" : "RK4");
    if (sch == "RK4") s.scheme = Scheme::RK4;
    else if (sch == "SemiImplicitEM") s.scheme = Scheme::SemiImplicitEM;
    else if (sch == "ExponentialEM") s.scheme = Scheme::ExponentialEM;
    else throw ConfigError(child(path, "scheme"), "expected \"RK4\", \"SemiImplicitEM\" or \"ExponentialEM\"");
    s.monitor_N = number(j, path, "monitor_N", s.monitor_N);
    s.record_every = count(j, path, "record_every", 1);
    s.step_guard = number(j, path, "step_guard", s.step_guard);
    s.alpha = number(j, path, "alpha", s.alpha);
    check(std::isfinite(s.T) && s.T > 0.0, child(path, "T"), "T must be > 0");
    check(s.steps >= 1, child(path, "steps"), "steps must be >= 1");
    check(std::isfinite(s.nu) && s.nu >= 0.0, child(path, "nu"), "nu must be >= 0");
    check(s.record_every >= 1, child(path, "record_every"), "record_every must be >= 1");
    check(s.step_guard >= 0.0, child(path, "step_guard"), "step_guard must be >= 0");
    check(s.alpha >= 0.0 && s.alpha <= 0.5, child(path, "alpha"), "alpha must lie in [0, 1/2]");
    check(s.monitor_N > 0.0, child(path, "monitor_N"), "monitor_N must be > 0");
    return s;
}

inline Control parse_control(const json& j, const std::string& path, double T, std::size_t m)
{
    allow_keys(j, path, {"cells", "value"});
    const std::size_t cells = count(j, path, "cells", 16);
    check(cells >= 1, child(path, "cells"), "cells must be >= 1");
    RkhsVector v(m);
    if (j.contains("value")) v = shell_vector<RkhsVector>(j.at("value"), child(path, "value"), m);
    return Control::constant(T, cells, v);
}

} // namespace cfg

/// Validates a whole config document (before any computation).
inline ExperimentConfig parse_config(const json& root)
{
    using namespace cfg;
    allow_keys(root, "", {"schema_version", "study", "seed", "model", "covariance", "diffusion", "diffusion_bar",
                          "solver", "initial", "control", "params", "output"});
    ExperimentConfig c;
    const auto ver = count(root, "", "schema_version", schema_version);
    check(ver == static_cast<std::uint64_t>(schema_version), "/schema_version",
          "unsupported schema_version (expected " + std::to_string(schema_version) + ")");
    c.study = text(root, "", "study", "");
    bool known = false;
    for (const auto& s : study_names()) known = known || s == c.study;
    check(known, "/study", "unknown or missing study");
    c.seed = count(root, "", "seed", 1);
    c.model = parse_model(root.value("model", json::object()), "/model");
    const auto m = static_cast<std::size_t>(c.model.m);
    c.cov = parse_covariance(root.value("covariance", json::object()), "/covariance", c.model);
    c.solver = parse_solver(root.value("solver", json::object()), "/solver");
    c.diffusion = parse_diffusion(root.value("diffusion", json::object()), "/diffusion", m, c.solver.T);
    if (root.contains("diffusion_bar"))
        c.diffusion_bar = parse_diffusion(root.at("diffusion_bar"), "/diffusion_bar", m, c.solver.T);

    const json init = root.value("initial", json::object());
    allow_keys(init, "/initial", {"components"});
    c.xi = init.contains("components") ? shell_vector<ShellState>(init.at("components"), "/initial/components", m)
                                       : ShellState(m);
    check(c.xi.all_finite(), "/initial/components", "components must be finite");
    c.control = parse_control(root.value("control", json::object()), "/control", c.solver.T, m);

    c.params = root.value("params", json::object());
    check(c.params.is_object(), "/params", "expected an object");
    const json out = root.value("output", json::object());
    allow_keys(out, "/output", {"csv", "json", "snapshot"});
    c.output.csv = text(out, "/output", "csv", "");
    c.output.json = text(out, "/output", "json", "");
    c.output.snapshot = text(out, "/output", "snapshot", "");
    c.canonical = root;
    c.hash = config_hash(root);
    return c;
}

/// Target block: {"type": "coordinate", "shell", "threshold"} or
/// {"type": "ball", "center", "radius", "alpha"}.
inline Target parse_target(const json& j, const std::string& path, std::size_t m)
{
    using namespace cfg;
    check(j.is_object(), path, "expected an object");
    const std::string type = text(j, path, "type", "coordinate");
    if (type == "coordinate") {
        allow_keys(j, path, {"type", "shell", "threshold"});
        TerminalCoordinate t;
        t.shell = static_cast<int>(count(j, path, "shell", 1));
        check(t.shell >= 1 && static_cast<std::size_t>(t.shell) <= m, child(path, "shell"), "shell out of range");
        t.threshold = number(j, path, "threshold");
        check(std::isfinite(t.threshold), child(path, "threshold"), "threshold must be finite");
        return t;
    }
    if (type == "ball") {
        allow_keys(j, path, {"type", "center", "radius", "alpha"});
        TerminalBall b;
        b.center = j.contains("center") ? shell_vector<ShellState>(j.at("center"), child(path, "center"), m) : ShellState(m);
        b.radius = number(j, path, "radius");
        b.alpha = number(j, path, "alpha", 0.25);
        check(b.radius >= 0.0, child(path, "radius"), "radius must be >= 0");
        check(b.alpha >= 0.0 && b.alpha <= 0.25, child(path, "alpha"), "alpha must lie in [0, 1/4]");
        return b;
    }
    throw ConfigError(child(path, "type"), "expected \"coordinate\" or \"ball\"");
}

inline OptConfig parse_optimizer(const json& j, const std::string& path, std::uint64_t seed)
{
    using namespace cfg;
    allow_keys(j, path, {"restarts", "max_iterations", "max_stages", "gradient_tol", "residual_tol", "penalty_initial",
                         "penalty_growth", "penalty_max", "memory", "init_scale"});
    OptConfig o;
    o.seed = seed;
    o.restarts = count(j, path, "restarts", o.restarts);
    o.max_iterations = count(j, path, "max_iterations", o.max_iterations);
    o.max_stages = count(j, path, "max_stages", o.max_stages);
    o.gradient_tol = number(j, path, "gradient_tol", o.gradient_tol);
    o.residual_tol = number(j, path, "residual_tol", o.residual_tol);
    o.penalty_initial = number(j, path, "penalty_initial", o.penalty_initial);
    o.penalty_growth = number(j, path, "penalty_growth", o.penalty_growth);
    o.penalty_max = number(j, path, "penalty_max", o.penalty_max);
    o.memory = count(j, path, "memory", o.memory);
    o.init_scale = number(j, path, "init_scale", o.init_scale);
    check(o.restarts >= 1, child(path, "restarts"), "restarts must be >= 1");
    check(o.memory >= 1, child(path, "memory"), "memory must be >= 1");
    check(o.gradient_tol > 0.0, child(path, "gradient_tol"), "gradient_tol must be > 0");
    check(o.residual_tol > 0.0, child(path, "residual_tol"), "residual_tol must be > 0");
    check(o.penalty_initial > 0.0, child(path, "penalty_initial"), "penalty_initial must be > 0");
    check(o.penalty_growth > 1.0, child(path, "penalty_growth"), "penalty_growth must be > 1");
    check(o.penalty_max >= o.penalty_initial, child(path, "penalty_max"), "penalty_max must be >= penalty_initial");
    return o;
}

} // namespace shellldp
