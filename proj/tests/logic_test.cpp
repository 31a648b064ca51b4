#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "qml/logic.hpp"
#include "testutil.hpp"

using namespace qml;
using testutil::dist_max;

namespace {
Ket qubit(Complex a0, Complex a1) { return Ket(SpaceShape::single(2), {a0, a1}); }
}

TEST_CASE("make_observable normalizes and checks orthonormality") {
    auto z = Observable::make({Ket::basis(2, 0), Ket::basis(2, 1)}, {"k0", "k1"});
    CHECK(z.dim() == 2);
    CHECK(z.label(0) == "k0");

    // unnormalized inputs are fine; elements come out unit-norm
    auto pm = Observable::make({qubit(1, 1), qubit(1, -1)});
    CHECK(pm.element(0).norm() == Catch::Approx(1.0));
    CHECK(std::abs(inner(pm.element(0), pm.element(1))) < 1e-15);
    CHECK(pm.label(1) == "#1");

    // a non-orthogonal pair is rejected, naming the pair and the deviation
    try {
        Observable::make({qubit(1, 0), qubit(1, 1)});
        FAIL("expected ObservableError");
    } catch (const ObservableError& e) {
        std::string msg = e.what();
        CHECK(msg.find("0 and 1") != std::string::npos);
        CHECK(msg.find("0.7071") != std::string::npos);
    }

    CHECK_THROWS_AS(Observable::make({qubit(1, 0)}), ObservableError);            // wrong count
    CHECK_THROWS_AS(Observable::make({qubit(1, 0), Ket::basis(3, 0)}), ObservableError);
    CHECK_THROWS_AS(Observable::make({qubit(1, 0), qubit(0, 0)}), ObservableError);
    CHECK_THROWS_AS(Observable::make({Ket(SpaceShape({2, 2}), {1, 0, 0, 0})}), ObservableError);
    CHECK_THROWS_AS(Observable::make({qubit(1, 0), qubit(0, 1)}, {"onlyone"}), ObservableError);
}

TEST_CASE("near-orthonormal bases inside the tolerance are accepted") {
    Ket a = qubit(1, 1e-10);
    Ket b = qubit(-1e-10, 1);
    auto o = Observable::make({a, b});
    CHECK(o.size() == 2);
}

TEST_CASE("canonicalize sorts the subject and permutes factors") {
    // subject (7,3) with |1>|0> becomes (3,7) with |0>|1>
    auto [subj, vec] = canonicalize({7, 3}, tensor(Ket::basis(2, 1), Ket::basis(2, 0)));
    CHECK(subj == std::vector<HandleId>({3, 7}));
    CHECK(dist_max(vec.amps(), {Complex(0, 0), Complex(1, 0), Complex(0, 0), Complex(0, 0)}) <
          1e-15);

    // idempotent
    auto [subj2, vec2] = canonicalize(subj, vec);
    CHECK(subj2 == subj);
    CHECK(dist_max(vec2.amps(), vec.amps()) == 0.0);
}

TEST_CASE("canonicalize against the index-remap oracle") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 60; ++t) {
        std::vector<std::size_t> dims = {2, 3, 2};
        Ket psi = testutil::random_ket(rng, dims);
        std::vector<HandleId> subject = {11, 4, 9};

        auto [subj, vec] = canonicalize(subject, psi);
        CHECK(subj == std::vector<HandleId>({4, 9, 11}));
        // sorted-position order: factor i of the result is old factor order[i]
        std::vector<std::size_t> order = {1, 2, 0};
        CHECK(dist_max(vec.amps(), testutil::naive_permute(dims, order, psi.amps())) < 1e-15);
        CHECK(std::abs(inner(vec, vec) - inner(psi, psi)) < 1e-12);
    }
}

TEST_CASE("canonicalize rejects malformed subjects") {
    Ket v = tensor(Ket::basis(2, 0), Ket::basis(2, 1));
    CHECK_THROWS_AS(canonicalize({5, 5}, v), SubjectError);
    CHECK_THROWS_AS(canonicalize({5}, v), ShapeError);
    CHECK_THROWS_AS(canonicalize({}, v), SubjectError);
}

TEST_CASE("amplitude serialization round-trips doubles exactly") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> d(-10, 10);
    for (int t = 0; t < 2000; ++t) {
        double x = d(rng) * std::pow(10.0, int(rng() % 19) - 9);
        std::string s = format_double(x);
        double back = std::strtod(s.c_str(), nullptr);
        CHECK(back == x);
    }
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(-0.0) == "-0");
    CHECK(format_complex(Complex(0.6, -0.8)) ==
          "(0.59999999999999998,-0.80000000000000004)");
}

TEST_CASE("observables survive a serialization round trip") {
    std::mt19937_64 rng(33);
    for (int t = 0; t < 20; ++t) {
        Operator u = testutil::random_unitary(rng, 3);
        std::vector<Ket> basis;
        for (std::size_t c = 0; c < 3; ++c) {
            std::vector<Complex> col(3);
            for (std::size_t r = 0; r < 3; ++r) col[r] = u.at(r, c);
            basis.push_back(Ket(SpaceShape::single(3), col));
        }
        auto obs = Observable::make(basis);

        // write every element out as text and read it back bit-identically
        std::vector<Ket> reread;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            std::vector<Complex> amps;
            for (const Complex& a : obs.element(i).amps()) {
                double re = std::strtod(format_double(a.real()).c_str(), nullptr);
                double im = std::strtod(format_double(a.imag()).c_str(), nullptr);
                CHECK(re == a.real());
                CHECK(im == a.imag());
                amps.emplace_back(re, im);
            }
            reread.push_back(Ket(SpaceShape::single(3), amps));
        }
        CHECK_NOTHROW(Observable::make(reread));
    }
}
