#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shellldp/config.hpp"
#include "shellldp/errors.hpp"
#include "shellldp/io.hpp"
#include "shellldp/studies.hpp"

namespace {

using shellldp::json;

constexpr int exit_ok = 0;
constexpr int exit_io = 1;
constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int fail(int code, const std::string& kind, const std::string& message, const std::string& pointer = {})
{
    json err{{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!pointer.empty()) err["pointer"] = pointer;
    std::cerr << err.dump() << '\n';
    return code;
}

json load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw shellldp::ConfigError("", "config file is not valid JSON: " + path);
    return j;
}

// "--solver.steps=4096" or "--solver.steps" "4096"
void apply_overrides(json& root, const std::vector<std::string>& extras)
{
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0 || a.size() <= 2)
            throw shellldp::ConfigError("", "unexpected argument '" + a + "' (overrides look like --key.path=value)");
        const std::string body = a.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) shellldp::apply_override(root, body.substr(0, eq), body.substr(eq + 1));
        else if (i + 1 < extras.size()) shellldp::apply_override(root, body, extras[++i]);
        else throw shellldp::ConfigError("", "override '" + a + "' has no value");
    }
}

int run(const std::string& study, const std::string& config_path, const std::vector<std::string>& extras)
{
    json root = load(config_path);
    if (!root.is_object()) throw shellldp::ConfigError("/", "expected an object");
    apply_overrides(root, extras);
    if (root.contains("study") && root["study"] != study)
        throw shellldp::ConfigError("/study", "config is for study " + root["study"].dump() + ", not \"" + study + "\"");
    root["study"] = study;

    const auto cfg = shellldp::parse_config(root);
    const auto out = shellldp::run_study(cfg);
    try {
        if (!cfg.output.csv.empty()) shellldp::atomic_write(cfg.output.csv, out.csv);
        if (!cfg.output.json.empty()) shellldp::atomic_write(cfg.output.json, out.document.dump(2) + "\n");
        if (!cfg.output.snapshot.empty() && !out.snapshot.empty()) shellldp::atomic_write(cfg.output.snapshot, out.snapshot);
    } catch (const std::exception& e) {
        return fail(exit_io, "io", e.what());
    }
    std::cout << out.summary << '\n';
    if (out.exit_code != 0) return fail(out.exit_code, "numerical", out.summary);
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Shell-model small-noise simulation and large-deviation studies"};
    app.set_version_flag("--version", std::string(shellldp::tool_name) + " " + shellldp::tool_version);
    app.require_subcommand(1);
    std::string config_path;
    for (const auto& name : shellldp::study_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " study");
        sub->add_option("config", config_path, "JSON config file")->required();
        sub->allow_extras();
        sub->footer("Any --dotted.key=value flag overrides that key of the config.\n"
                    "Default thread count: SHELLLDP_THREADS.");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(exit_validation, "usage", e.what());
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        return run(sub->get_name(), config_path, sub->remaining());
    } catch (const shellldp::ConfigError& e) {
        return fail(exit_validation, "validation", e.what(), e.pointer().empty() ? "/" : e.pointer());
    } catch (const shellldp::DomainError& e) {
        return fail(exit_validation, "validation", e.what());
    } catch (const shellldp::NumericalError& e) {
        return fail(exit_numerical, "numerical", e.what());
    } catch (const IoFailure& e) {
        return fail(exit_io, "io", e.what());
    } catch (const std::exception& e) {
        return fail(exit_io, "internal", e.what());
    }
}
