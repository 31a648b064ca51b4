#pragma once

// Command implementations behind the qml binary. Kept apart from argument
// parsing so tests can drive them with plain streams.
//
// Exit statuses, disjoint by failure class:
//   0  script ran, every expect held (audit: no FAIL line)
//   1  at least one expect failed, or the audit found a FAIL
//   2  the engine rejected a statement (linearity, impossible outcome, ...)
//   3  the input could not be used at all (parse error, unreadable file)

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "dsl.hpp"
#include "oracle.hpp"

namespace qml::cli {

struct RunConfig {
    std::string script;
    std::map<std::string, Complex> bindings;
    std::uint64_t seed = 0;
    std::optional<double> tol_zero;
    std::optional<double> tol_prop;
    std::string trace; // "", "text", or "structured"
    bool audit = false;
};

inline int exit_status_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::parse:
    case ErrorKind::io:
        return 3;
    default:
        return 2;
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// -p values are closed scalar expressions: 0.6, 3/5, 1+2i, exp(i*0.3), ...
// They go through the same parser and evaluator as scripts.
inline Complex parse_binding_value(const std::string& key, const std::string& text) {
    try {
        dsl::Script s = dsl::parse("param binding_probe = " + text + ";");
        if (s.statements.size() != 1)
            throw ParseError("more than one expression");
        dsl::ScriptRunner probe;
        probe.run(s);
        return *probe.param_value("binding_probe");
    } catch (const Error&) {
        throw ParseError("invalid value for -p " + key + ": '" + text + "'");
    }
}

inline SessionOptions session_options(const RunConfig& cfg) {
    SessionOptions opts;
    opts.seed = cfg.seed;
    if (cfg.tol_zero) opts.tol.zero = *cfg.tol_zero;
    if (cfg.tol_prop) opts.tol.proportional = *cfg.tol_prop;
    return opts;
}

inline void print_trace(const RunConfig& cfg, const Session& s, std::ostream& out) {
    if (cfg.trace == "structured")
        s.structured_trace(out);
    else if (cfg.trace == "text")
        s.text_trace(out);
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        dsl::Script script = dsl::parse(read_file(cfg.script));
        dsl::ScriptRunner runner(session_options(cfg), cfg.bindings);
        runner.run(script);
        for (const std::string& line : runner.outcome().lines) out << line << "\n";
        print_trace(cfg, runner.session(), out);
        int status = runner.outcome().ok() ? 0 : 1;
        if (cfg.audit) {
            AuditReport report = audit(runner.session(), runner.outcome().audit_queries);
            report.render(out);
            if (status == 0 && !report.ok()) status = 1;
        }
        return status;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_status_for(e);
    }
}

inline int cmd_audit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        dsl::Script script = dsl::parse(read_file(cfg.script));
        dsl::ScriptRunner runner(session_options(cfg), cfg.bindings);
        runner.run(script);
        AuditReport report = audit(runner.session(), runner.outcome().audit_queries);
        report.render(out);
        return report.ok() ? 0 : 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_status_for(e);
    }
}

// Interactive step-through. The script (when given) preloads declarations and
// assumptions; afterwards statements come in one line at a time. Before an
// `any` measurement samples, the admissible outcome set is shown, or
// "certain:" when a fact already fixes the result. There is no undo: events
// consume their systems for good, in the engine and here.
inline int cmd_explore(const RunConfig& cfg, std::istream& in, std::ostream& out,
                       std::ostream& err) {
    dsl::SymbolTable syms = dsl::SymbolTable::with_builtins();
    dsl::ScriptRunner runner(session_options(cfg), cfg.bindings);
    try {
        if (!cfg.script.empty()) {
            dsl::Script script = dsl::parse(read_file(cfg.script), syms);
            runner.run(script);
            for (const std::string& line : runner.outcome().lines) out << line << "\n";
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_status_for(e);
    }

    auto list_facts = [&] {
        bool none = true;
        for (const Judgement& f : runner.session().facts()) {
            if (f.status != FactStatus::active) continue;
            out << "F" << f.id << " (" << runner.session().subject_names(f.subject)
                << ") |= " << Session::render_vector(f.vector) << "\n";
            none = false;
        }
        if (none) out << "no active facts\n";
    };

    std::string line;
    while (out << "qml> " << std::flush, std::getline(in, line)) {
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        std::string cmd = line.substr(a, b - a + 1);
        if (cmd == "quit" || cmd == "exit") break;
        if (cmd == "facts") {
            list_facts();
            continue;
        }
        if (cmd == "trace") {
            runner.session().structured_trace(out);
            continue;
        }
        try {
            dsl::Script parsed = dsl::parse(cmd, syms);
            for (const dsl::Statement& st : parsed.statements) {
                if (auto preview = runner.measure_preview(st)) {
                    if (preview->certain) {
                        out << "certain: " << *preview->certain << "\n";
                    } else if (st.any) {
                        out << "admissible: {";
                        for (std::size_t k = 0; k < preview->admissible.size(); ++k)
                            out << (k ? ", " : "") << preview->admissible[k];
                        out << "}\n";
                    }
                }
                for (const std::string& answer : runner.execute(st)) out << answer << "\n";
                const auto& events = runner.session().events();
                if (st.kind == dsl::Statement::Kind::measure && !events.empty() &&
                    events.back().is_measurement()) {
                    const MeasurementEvent& m = events.back().measurement();
                    out << "outcome: " << m.observable.label(m.outcome_index) << "\n";
                }
            }
        } catch (const Error& e) {
            out << "error: " << e.what() << "\n";
        }
    }
    return 0;
}

} // namespace qml::cli
