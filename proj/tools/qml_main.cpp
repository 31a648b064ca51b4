#include <qml/cli.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <vector>

namespace {

int usage_error(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stateless quantum reasoning sessions"};
    app.require_subcommand(1);

    qml::cli::RunConfig cfg;
    std::vector<std::string> params;
    double tol_zero = 0, tol_prop = 0;

    auto add_common = [&](CLI::App* cmd, bool script_required) {
        CLI::Option* script = cmd->add_option("script", cfg.script, "scenario file (.qml)");
        if (script_required) script->required();
        cmd->add_option("-p,--param", params, "parameter binding key=value (repeatable)");
        cmd->add_option("--seed", cfg.seed, "outcome sampling seed (default 0, or QML_SEED)");
        cmd->add_option("--tol-zero", tol_zero, "zero threshold override")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--tol-prop", tol_prop, "proportionality tolerance override")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--trace", cfg.trace, "print the derivation trace after the run")
            ->check(CLI::IsMember({"text", "structured"}));
    };

    CLI::App* run = app.add_subcommand("run", "execute a scenario script");
    add_common(run, true);
    run->add_flag("--audit", cfg.audit, "append the oracle audit report");

    CLI::App* audit = app.add_subcommand("audit", "replay a scenario against the oracle");
    add_common(audit, true);

    CLI::App* explore = app.add_subcommand("explore", "interactive step-through");
    add_common(explore, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    CLI::App* active = app.get_subcommands().front();
    if (active->count("--tol-zero")) cfg.tol_zero = tol_zero;
    if (active->count("--tol-prop")) cfg.tol_prop = tol_prop;
    if (!active->count("--seed")) {
        if (const char* env = std::getenv("QML_SEED")) {
            char* end = nullptr;
            unsigned long long v = std::strtoull(env, &end, 10);
            if (end == env || *end != '\0')
                return usage_error("QML_SEED must be an unsigned integer, got '" +
                                   std::string(env) + "'");
            cfg.seed = v;
        }
    }
    for (const std::string& kv : params) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            return usage_error("-p expects key=value, got '" + kv + "'");
        std::string key = kv.substr(0, eq);
        try {
            cfg.bindings[key] = qml::cli::parse_binding_value(key, kv.substr(eq + 1));
        } catch (const qml::Error& e) {
            return usage_error(e.what());
        }
    }

    if (active == run) return qml::cli::cmd_run(cfg, std::cout, std::cerr);
    if (active == audit) return qml::cli::cmd_audit(cfg, std::cout, std::cerr);
    return qml::cli::cmd_explore(cfg, std::cin, std::cout, std::cerr);
}
