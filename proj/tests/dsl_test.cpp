#include <catch2/catch_amalgamated.hpp>

#include <qml/dsl.hpp>

#include <cmath>
#include <random>

using namespace qml;
using dsl::Script;
using dsl::ScriptRunner;
using dsl::Statement;

namespace {

const char* prelude =
    "ket k0 = ket(1, 0);\n"
    "ket k1 = ket(0, 1);\n"
    "ket plus = ket(1, 1);\n"
    "ket minus = ket(1, -1);\n"
    "observable Z on qubit = { k0, k1 };\n"
    "observable X on qubit = { plus, minus };\n";

std::string with_prelude(const std::string& body) { return prelude + body; }

// runs the callable and hands back the error message it raised
template <typename F>
std::string message_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

const Judgement* fact_on(const Session& s, std::vector<HandleId> subject, const Ket& v) {
    for (const Judgement& g : s.facts())
        if (g.subject == subject && g.status == FactStatus::active && proportional(g.vector, v))
            return &g;
    return nullptr;
}

Ket qubit_ket(Complex a, Complex b) { return Ket(SpaceShape::single(2), {a, b}); }

} // namespace

TEST_CASE("statements parse into the expected kinds") {
    Script s = dsl::parse("system A : qubit;\nassume A |= ket(1, 0);\n");
    REQUIRE(s.statements.size() == 2);
    CHECK(s.statements[0].kind == Statement::Kind::system_decl);
    CHECK(s.statements[0].name == "A");
    CHECK(s.statements[0].ref == "qubit");
    CHECK(s.statements[1].kind == Statement::Kind::assume);
    CHECK(s.statements[1].names == std::vector<std::string>{"A"});
    CHECK(s.statements[1].pos.line == 2);
}

TEST_CASE("running a script produces session facts") {
    Script s = dsl::parse(with_prelude("system A : qubit;\n"
                                       "system B : qubit;\n"
                                       "assume (A, B) |= tensor(k0, k1);\n"));
    ScriptRunner r;
    r.run(s);
    REQUIRE(r.find_system("A").has_value());
    REQUIRE(r.find_system("B").has_value());
    const Judgement* f = fact_on(r.session(), {*r.find_system("A"), *r.find_system("B")},
                                 tensor(Ket::basis(2, 0), Ket::basis(2, 1)));
    CHECK(f != nullptr);
    CHECK(r.find_observable("Z") != nullptr);
    CHECK(r.find_observable("Z")->label(1) == "k1");
}

TEST_CASE("missing ket expression is rejected at the semicolon") {
    std::string msg = message_of([] { dsl::parse("system A : qubit;\nassume A |= ;\n"); });
    CHECK(msg == "line 2, column 13: unexpected ';', expected a ket expression");
    CHECK_THROWS_AS(dsl::parse("assume A |= ;"), ParseError);
}

TEST_CASE("parse diagnostics carry position and expectation") {
    CHECK(message_of([] { dsl::parse("system A qubit;"); })
              .find("expected ':'") != std::string::npos);
    CHECK(message_of([] { dsl::parse("frobnicate;"); })
              .find("a statement keyword") != std::string::npos);
    CHECK(message_of([] { dsl::parse("system A : qubit"); })
              .find("unexpected end of input") != std::string::npos);
    CHECK(message_of([] { dsl::parse("ket w = ket(1, 0) @;"); })
              .find("unexpected character '@'") != std::string::npos);
    CHECK(message_of([] { dsl::parse("ket w = ket(1 | 0);"); })
              .find("did you mean '|='") != std::string::npos);
    CHECK(message_of([] { dsl::parse("space S dim 1;"); })
              .find("between 2 and 1000000") != std::string::npos);
    std::string bad_byte = message_of([] { return dsl::parse(std::string("ket w = \x01;", 10)); });
    CHECK(bad_byte.find("unexpected byte 0x01") != std::string::npos);
}

TEST_CASE("scope rules reject duplicates, unknowns, and kind mismatches") {
    CHECK(message_of([] { dsl::parse("system A : qubit;\nket A = ket(1, 0);\n"); })
              .find("duplicate identifier 'A'") != std::string::npos);
    CHECK(message_of([] { dsl::parse("assume A |= ket(1, 0);"); })
              .find("unknown system 'A'") != std::string::npos);
    CHECK(message_of([] { dsl::parse("ket k = ket(1, 0);\nassume k |= ket(1, 0);\n"); })
              .find("'k' is a ket, expected a system") != std::string::npos);
    CHECK(message_of([] { dsl::parse("system A : qubit;\nket w = A + A;\n"); })
              .find("only kets and parameters appear in expressions") != std::string::npos);
    CHECK(message_of([] { dsl::parse("operator U = H;\noperator U2 = [[1, 0], [0, 1], [0, 0]];\n"); })
              .find("must be square") != std::string::npos);
    // builtins live in the same scope
    CHECK(message_of([] { dsl::parse("ket H = ket(1, 0);"); })
              .find("duplicate identifier 'H'") != std::string::npos);
}

TEST_CASE("measure and apply introduce fresh names checked at parse time") {
    Script ok = dsl::parse(with_prelude("system A : qubit;\n"
                                        "assume A |= k0;\n"
                                        "apply H to A;\n"
                                        "measure A' with Z -> any as A2;\n"
                                        "query possible A2 with Z;\n"));
    CHECK(ok.statements.size() == 11);

    // the primed name the apply introduced collides with a later declaration
    CHECK(message_of([] {
              dsl::parse("system A : qubit;\napply H to A;\nsystem A' : qubit;\n");
          }).find("duplicate identifier 'A''") != std::string::npos);
    // as-clause arity must match the acted systems
    CHECK(message_of([] {
              dsl::parse("system A : qubit;\nsystem B : qubit;\n"
                         "apply CNOT to (A, B) as C;\n");
          }).find("expected 2 fresh names") != std::string::npos);
    // measure target must be declared before use
    CHECK(message_of([] { dsl::parse("measure A with { } -> any;"); })
              .find("unknown system 'A'") != std::string::npos);
}

TEST_CASE("expression evaluation covers scalars, fractions, and builtins") {
    Script s = dsl::parse(with_prelude("param t;\n"
                                       "param g = 3/5 + 4i/5;\n"
                                       "ket w = exp(i*t)*ket(1/sqrt(2), 1/sqrt(2));\n"
                                       "ket u = g*k0 - 2i*k1;\n"
                                       "system A : qubit;\n"
                                       "assume A |= w;\n"
                                       "query verifies A |= w;\n"));
    ScriptRunner r({}, {{"t", Complex(0.7, 0)}});
    r.run(s);
    REQUIRE(r.outcome().lines.size() == 1);
    CHECK(r.outcome().lines[0] == "verifies(A) = yes");

    const Judgement* f = fact_on(r.session(), {*r.find_system("A")}, qubit_ket(1, 1));
    REQUIRE(f != nullptr);
    Complex amp = std::exp(Complex(0, 0.7)) / std::sqrt(2.0);
    CHECK(std::abs(f->vector.amp(0) - amp) < 1e-15);
    CHECK(std::abs(f->vector.amp(1) - amp) < 1e-15);
}

TEST_CASE("parameter binding rules") {
    Script s = dsl::parse("param a = 2;\nparam b;\n");
    SECTION("defaults apply and bindings override") {
        Script full = dsl::parse("param a = 2;\nparam b;\nket w = ket(a, b);\n"
                                 "system A : qubit;\nassume A |= w;\n");
        ScriptRunner r2({}, {{"b", Complex(0, 1)}});
        r2.run(full);
        const Judgement* f = fact_on(r2.session(), {*r2.find_system("A")},
                                     qubit_ket(Complex(2, 0), Complex(0, 1)));
        CHECK(f != nullptr);
    }
    SECTION("an unbound parameter without default stops the run") {
        ScriptRunner r;
        CHECK(message_of([&] { r.run(s); }).find("parameter 'b' is unbound") !=
              std::string::npos);
    }
    SECTION("binding overrides the default too") {
        ScriptRunner r({}, {{"a", Complex(5, 0)}, {"b", Complex(1, 0)}});
        r.run(s);
        Script full = dsl::parse("param a = 2;\nparam b;\nket w = ket(a, b);\n"
                                 "system A : qubit;\nassume A |= w;\n");
        ScriptRunner r2({}, {{"a", Complex(5, 0)}, {"b", Complex(1, 0)}});
        r2.run(full);
        CHECK(fact_on(r2.session(), {*r2.find_system("A")}, qubit_ket(5, 1)) != nullptr);
    }
    SECTION("bindings must name declared parameters") {
        ScriptRunner r({}, {{"zeta", Complex(1, 0)}});
        CHECK(message_of([&] { r.run(s); }).find("unknown parameter 'zeta'") !=
              std::string::npos);
    }
}

TEST_CASE("type errors in expressions are caught with the statement line") {
    ScriptRunner r;
    Script s = dsl::parse(with_prelude("ket w = k0 + 2;\n"));
    std::string msg = message_of([&] { r.run(s); });
    CHECK(msg.find("line 7") != std::string::npos);
    CHECK(msg.find("scalar and a ket") != std::string::npos);

    CHECK(message_of([] {
              ScriptRunner rr;
              rr.run(dsl::parse(with_prelude("ket w = k0*k1;\n")));
          }).find("use tensor(...)") != std::string::npos);
    CHECK(message_of([] {
              ScriptRunner rr;
              rr.run(dsl::parse("ket w = ket(1, 0)/0;"));
          }).find("division by zero") != std::string::npos);
    CHECK(message_of([] {
              ScriptRunner rr;
              rr.run(dsl::parse(with_prelude("ket w = tensor(k0, 2*k1) + ket(1, 0);\n")));
          }).find("cannot add kets of dimension 4 and 2") != std::string::npos);
    CHECK(message_of([] {
              ScriptRunner rr;
              rr.run(dsl::parse(with_prelude(
                  "ket w on (qubit, qubit) = plus;\n")));
          }).find("spans dimension 4") != std::string::npos);
}

TEST_CASE("measurement statements drive the session") {
    std::string text = with_prelude("system A : qubit;\n"
                                    "assume A |= k0;\n"
                                    "measure A with X -> chosen minus as A2;\n"
                                    "query possible A2 with X;\n");
    Script s = dsl::parse(text);
    ScriptRunner r;
    r.run(s);
    REQUIRE(r.outcome().lines.size() == 1);
    CHECK(r.outcome().lines[0] == "possible(A2 with X) = {minus}");
    REQUIRE(r.outcome().audit_queries.size() == 1);
    CHECK(r.outcome().audit_queries[0].label == "A2 with X");
    CHECK(r.outcome().audit_queries[0].engine_answer == std::vector<std::size_t>{1});
    CHECK(r.session().handle(*r.find_system("A2")).name == "A2");

    SECTION("chosen matches by ray, not by name") {
        // double_minus is proportional to the minus element, so it selects it
        Script s2 = dsl::parse(with_prelude("ket double_minus = ket(2, -2);\n"
                                            "system A : qubit;\n"
                                            "assume A |= k0;\n"
                                            "measure A with X -> chosen double_minus;\n"));
        ScriptRunner r2;
        r2.run(s2);
        CHECK(r2.find_system("A'").has_value());
    }
    SECTION("chosen outside the basis is a binding error") {
        Script s3 = dsl::parse(with_prelude("system A : qubit;\n"
                                            "assume A |= plus;\n"
                                            "measure A with X -> chosen k0;\n"));
        ScriptRunner r3;
        std::string msg = message_of([&] { r3.run(s3); });
        CHECK(msg.find("does not match any element") != std::string::npos);
        CHECK(msg.find("line 9") != std::string::npos);
    }
    SECTION("screened-out chosen outcome surfaces the engine error with its line") {
        Script s4 = dsl::parse(with_prelude("system A : qubit;\n"
                                            "assume A |= k0;\n"
                                            "measure A with Z -> chosen k1;\n"));
        ScriptRunner r4;
        try {
            r4.run(s4);
            FAIL("expected ImpossibleOutcome");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::impossible_outcome);
            CHECK(std::string(e.what()).find("line 9") != std::string::npos);
        }
    }
    SECTION("measuring a consumed system reports the linearity violation") {
        Script s5 = dsl::parse(with_prelude("system A : qubit;\n"
                                            "assume A |= plus;\n"
                                            "measure A with Z -> any as A2;\n"
                                            "measure A with Z -> any as A3;\n"));
        ScriptRunner r5;
        try {
            r5.run(s5);
            FAIL("expected LinearityViolation");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::linearity);
            CHECK(std::string(e.what()).find("line 10") != std::string::npos);
        }
    }
}

TEST_CASE("inline observable literals work in measure and query") {
    Script s = dsl::parse(with_prelude("system A : qubit;\n"
                                       "assume A |= k0;\n"
                                       "query possible A with { plus, minus };\n"
                                       "measure A with { plus, minus } -> any as A2;\n"));
    ScriptRunner r(SessionOptions{});
    r.run(s);
    REQUIRE(r.outcome().lines.size() == 1);
    CHECK(r.outcome().lines[0] == "possible(A with { plus, minus }) = {plus, minus}");
    CHECK(r.outcome().audit_queries[0].observable.label(0) == "plus");
}

TEST_CASE("expect failures accumulate while the run continues") {
    Script s = dsl::parse(with_prelude("system A : qubit;\n"
                                       "system B : qubit;\n"
                                       "assume A |= k0;\n"
                                       "assume B |= k1;\n"
                                       "expect verifies A |= k1;\n"
                                       "expect verifies B |= k1;\n"
                                       "query verifies (A, B) |= tensor(k0, k1);\n"));
    ScriptRunner r;
    r.run(s);
    CHECK_FALSE(r.outcome().ok());
    REQUIRE(r.outcome().failures.size() == 1);
    CHECK(r.outcome().failures[0].pos.line == 11);
    REQUIRE(r.outcome().lines.size() == 3);
    CHECK(r.outcome().lines[0].find("expect FAILED (line 11)") == 0);
    CHECK(r.outcome().lines[1] == "expect ok (line 12): verifies B");
    CHECK(r.outcome().lines[2] == "verifies((A, B)) = yes");
}

TEST_CASE("operators declare by alias or matrix literal") {
    Script s = dsl::parse(with_prelude(
        "operator MYH = H;\n"
        "operator PHASE = [[1, 0], [0, exp(i*3/2)]];\n"
        "system A : qubit;\n"
        "assume A |= k0;\n"
        "apply MYH to A as A1;\n"
        "apply PHASE to A1 as A2;\n"));
    ScriptRunner r;
    r.run(s);
    Complex ph = std::exp(Complex(0, 1.5));
    const Judgement* f = fact_on(r.session(), {*r.find_system("A2")},
                                 qubit_ket(Complex(1, 0), ph));
    CHECK(f != nullptr);

    CHECK(message_of([] {
              ScriptRunner rr;
              rr.run(dsl::parse("operator BAD = [[1, 1], [1, 1]];"));
          }).find("unitar") != std::string::npos);
}

TEST_CASE("non-qubit spaces flow through declarations") {
    Script s = dsl::parse("space trit dim 3;\n"
                          "ket t0 = ket(1, 0, 0);\n"
                          "ket t1 = ket(0, 1, 0);\n"
                          "ket t2 = ket(0, 0, 1);\n"
                          "observable T on trit = { t0, t1, t2 };\n"
                          "system Q : trit;\n"
                          "assume Q |= t2;\n"
                          "query possible Q with T;\n");
    ScriptRunner r;
    r.run(s);
    CHECK(r.outcome().lines[0] == "possible(Q with T) = {t2}");
}

TEST_CASE("pretty printing is canonical and a parse fixpoint") {
    std::string messy = "  # teleport the payload\n"
                        "param  alpha=3/5 ;\n"
                        "ket k0=ket( 1,0 );\n"
                        "ket k1 = ket(0,1);\n"
                        "ket  w = ((alpha*k0)) + ((1-alpha*alpha)/(1-alpha*alpha))*0+k1*(2i) ;\n"
                        "system A:qubit;  # the probe\n"
                        "assume A |= w;\n"
                        "measure A with { k0 ,k1 } -> any;\n"
                        "query possible A' with {k0, k1};\n";
    Script parsed = dsl::parse(messy);
    std::string canon = dsl::pretty_print(parsed);
    // canonical text reparses to the same bytes
    CHECK(dsl::pretty_print(dsl::parse(canon)) == canon);
    // literal lexemes survive, comments stay put, spacing is normalized
    CHECK(canon.find("# teleport the payload\n") != std::string::npos);
    CHECK(canon.find("param alpha = 3/5;") != std::string::npos);
    CHECK(canon.find("ket k0 = ket(1, 0);") != std::string::npos);
    CHECK(canon.find("system A : qubit; # the probe") != std::string::npos);
    CHECK(canon.find("measure A with { k0, k1 } -> any;") != std::string::npos);
    CHECK(canon.find("alpha*k0 + (1 - alpha*alpha)/(1 - alpha*alpha)*0 + k1*2i") !=
          std::string::npos);

    SECTION("statement forms render one canonical way") {
        std::string text = "space tri dim 3;\n"
                           "system A : qubit;\n"
                           "ket k0 = ket(1, 0);\n"
                           "ket k1 = ket(0, 1);\n"
                           "ket pair on (qubit, qubit) = tensor(k0, k1);\n"
                           "operator U = [[1, 0], [0, -1]];\n"
                           "observable Z on qubit = { k0, k1 };\n"
                           "param t = 1 - 2;\n"
                           "assume A |= k0 - -k1;\n"
                           "apply U to A as A1;\n"
                           "apply H to A1;\n"
                           "measure A1' with Z -> chosen k0 as A2;\n"
                           "query possible A2 with Z;\n"
                           "query verifies A2 |= k0;\n"
                           "expect verifies A2 |= exp(i*t)*k0;\n";
        CHECK(dsl::pretty_print(dsl::parse(text)) == text);
    }
    SECTION("expression printing keeps structure without extra parens") {
        std::string text = "param a = 1;\n"
                           "param b = 2;\n"
                           "param c = -(a + b)*a - b/(a*b) + -2i*sqrt(2);\n";
        CHECK(dsl::pretty_print(dsl::parse(text)) == text);
    }
}

TEST_CASE("deep nesting is rejected instead of overflowing") {
    std::string deep = "ket w = ";
    for (int k = 0; k < 400; ++k) deep += '(';
    deep += '1';
    for (int k = 0; k < 400; ++k) deep += ')';
    deep += ';';
    CHECK(message_of([&] { dsl::parse(deep); }).find("nests too deeply") != std::string::npos);

    std::string minus_chain = "ket w = " + std::string(400, '-') + "ket(1, 0);";
    CHECK(message_of([&] { dsl::parse(minus_chain); }).find("nests too deeply") !=
          std::string::npos);
}

TEST_CASE("parser survives arbitrary input") {
    std::mt19937_64 rng(20260817);
    std::string corpus = with_prelude("system A : qubit;\n"
                                      "assume A |= plus;\n"
                                      "measure A with X -> any as A2;\n"
                                      "query possible A2 with Z;\n");
    auto any_byte = [&] { return static_cast<char>(rng() % 256); };
    for (int it = 0; it < 3000; ++it) {
        std::string input;
        switch (it % 3) {
        case 0: { // random bytes
            std::size_t n = rng() % 160;
            for (std::size_t k = 0; k < n; ++k) input += any_byte();
            break;
        }
        case 1: { // mutated corpus
            input = corpus;
            for (int m = 0; m < 6; ++m) input[rng() % input.size()] = any_byte();
            break;
        }
        default: { // spliced corpus fragments
            std::size_t a = rng() % corpus.size(), b = rng() % corpus.size();
            input = corpus.substr(0, a) + corpus.substr(std::min(a, b));
            break;
        }
        }
        try {
            Script s = dsl::parse(input);
            dsl::pretty_print(s); // printing a parsed script must not throw
        } catch (const ParseError&) {
            // rejection with a diagnostic is the expected failure mode
        }
    }
}

TEST_CASE("single statements execute against a persistent runner") {
    dsl::SymbolTable syms = dsl::SymbolTable::with_builtins();
    ScriptRunner r;
    auto feed = [&](const std::string& text) {
        std::vector<std::string> lines;
        for (const Statement& st : dsl::parse(text, syms).statements) {
            auto out = r.execute(st);
            lines.insert(lines.end(), out.begin(), out.end());
        }
        return lines;
    };
    feed("ket k0 = ket(1, 0);");
    feed("ket k1 = ket(0, 1);");
    feed("observable Z on qubit = { k0, k1 };");
    feed("system A : qubit;");
    feed("assume A |= k0;");
    auto lines = feed("query possible A with Z;");
    REQUIRE(lines.size() == 1);
    CHECK(lines[0] == "possible(A with Z) = {k0}");
    // an error leaves the runner usable
    CHECK(message_of([&] { feed("assume A |= ket(0, 0);"); }).find("zero") !=
          std::string::npos);
    CHECK(feed("query verifies A |= k0;")[0] == "verifies(A) = yes");
}
