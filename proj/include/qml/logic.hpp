#pragma once

// Domain vocabulary: system handles with a single-use discipline, observables
// (orthonormal outcome bases), judgements "subject |= vector", and the two
// event kinds that consume handles. Judgement subjects are kept canonical:
// handle ids ascending, vector factors permuted to match.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "algebra.hpp"
#include "errors.hpp"

namespace qml {

using HandleId = std::uint64_t;
using FactId = std::uint64_t;
using EventId = std::uint64_t;

enum class HandleStatus { live, consumed };

struct SystemHandle {
    HandleId id = 0;
    std::string name;
    std::size_t dim = 2;
    HandleStatus status = HandleStatus::live;
    std::optional<EventId> origin; // empty: declared, not produced by an event
};

// ---------------------------------------------------------------------------
// Observable: an orthonormal basis of a single factor. Input vectors are
// normalized on construction; orthogonality is then required within tol.

class Observable {
public:
    static Observable make(std::vector<Ket> basis, std::vector<std::string> labels = {},
                           double tol = tol_unitary) {
        if (basis.empty())
            throw ObservableError("observable needs at least one basis vector");
        std::size_t dim = basis.front().size();
        for (const Ket& b : basis) {
            if (b.shape().factor_count() != 1)
                throw ObservableError("observable basis vectors must be single-factor kets");
            if (b.size() != dim)
                throw ObservableError("observable basis vectors have mixed dimensions");
        }
        if (basis.size() != dim)
            throw ObservableError("observable over dimension " + std::to_string(dim) + " needs " +
                                  std::to_string(dim) + " basis vectors, got " +
                                  std::to_string(basis.size()));
        if (!labels.empty() && labels.size() != basis.size())
            throw ObservableError("label count does not match basis size");

        std::vector<Ket> normalized;
        normalized.reserve(basis.size());
        for (std::size_t i = 0; i < basis.size(); ++i) {
            if (basis[i].is_zero())
                throw ObservableError("basis vector " + std::to_string(i) + " is zero");
            normalized.push_back(basis[i].normalized());
        }
        for (std::size_t i = 0; i < normalized.size(); ++i) {
            for (std::size_t j = i; j < normalized.size(); ++j) {
                double want = (i == j) ? 1.0 : 0.0;
                double dev = std::abs(std::abs(inner(normalized[i], normalized[j])) - want);
                if (dev > tol)
                    throw ObservableError("basis vectors " + std::to_string(i) + " and " +
                                          std::to_string(j) + " are not orthonormal (deviation " +
                                          std::to_string(dev) + ")");
            }
        }
        return Observable(dim, std::move(normalized), std::move(labels));
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return basis_.size(); }
    const Ket& element(std::size_t i) const { return basis_.at(i); }
    const std::vector<Ket>& basis() const { return basis_; }

    std::string label(std::size_t i) const {
        if (i < labels_.size() && !labels_[i].empty()) return labels_[i];
        return "#" + std::to_string(i);
    }
    const std::vector<std::string>& labels() const { return labels_; }

private:
    Observable(std::size_t dim, std::vector<Ket> basis, std::vector<std::string> labels)
        : dim_(dim), basis_(std::move(basis)), labels_(std::move(labels)) {}

    std::size_t dim_;
    std::vector<Ket> basis_;
    std::vector<std::string> labels_;
};

// ---------------------------------------------------------------------------
// Judgements.

namespace rules {
inline constexpr std::string_view assume = "assume";
inline constexpr std::string_view outcome_definition = "outcome-definition";
inline constexpr std::string_view weak_born = "weak-born";
inline constexpr std::string_view projection = "projection";
inline constexpr std::string_view unitary = "unitary";
inline constexpr std::string_view tensor_product = "tensor";
inline constexpr std::string_view tensor_split = "tensor-split";
inline constexpr std::string_view partial_measurement = "partial-measurement";
} // namespace rules

struct Provenance {
    std::string_view rule = rules::assume;
    std::vector<FactId> parents;
    bool assumed() const { return rule == rules::assume; }
};

enum class FactStatus { active, historical };

struct Judgement {
    FactId id = 0;
    std::vector<HandleId> subject; // canonical: ascending handle ids
    Ket vector;                    // factor f belongs to subject[f]
    Provenance provenance;
    FactStatus status = FactStatus::active;
    // Retrospective facts about already-consumed handles enter as historical
    // records and are exempt from the oracle's soundness check.
    bool born_historical = false;
    // Number of events that precede this fact; the oracle checks it against
    // the replayed state at exactly that point.
    std::size_t check_point = 0;
};

// Sort the subject ascending and permute the vector's factors to match.
// Idempotent; rejects duplicate handles and factor-count mismatches.
inline std::pair<std::vector<HandleId>, Ket> canonicalize(std::vector<HandleId> subject,
                                                          const Ket& v) {
    if (subject.empty())
        throw SubjectError("judgement subject is empty");
    if (subject.size() != v.shape().factor_count())
        throw ShapeError("subject has " + std::to_string(subject.size()) +
                         " handles but the vector has " +
                         std::to_string(v.shape().factor_count()) + " factors");

    std::vector<std::size_t> order(subject.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return subject[a] < subject[b]; });
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
        if (subject[order[i]] == subject[order[i + 1]])
            throw SubjectError("duplicate handle " + std::to_string(subject[order[i]]) +
                               " in subject");

    bool sorted = true;
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i] != i) { sorted = false; break; }
    if (sorted) return {std::move(subject), v};

    std::vector<HandleId> new_subject(subject.size());
    for (std::size_t i = 0; i < order.size(); ++i) new_subject[i] = subject[order[i]];
    return {std::move(new_subject), permute_factors(v, order)};
}

// ---------------------------------------------------------------------------
// Events.

struct MeasurementEvent {
    HandleId in = 0;
    Observable observable;
    std::size_t outcome_index = 0;
    HandleId out = 0;
};

struct UnitaryEvent {
    std::vector<HandleId> ins; // order matches the operator's factor order
    Operator op;
    std::vector<HandleId> outs;
};

struct Event {
    EventId id = 0;
    std::variant<MeasurementEvent, UnitaryEvent> body;

    bool is_measurement() const { return std::holds_alternative<MeasurementEvent>(body); }
    const MeasurementEvent& measurement() const { return std::get<MeasurementEvent>(body); }
    const UnitaryEvent& unitary() const { return std::get<UnitaryEvent>(body); }
};

// ---------------------------------------------------------------------------
// Serialization of amplitudes. 17 significant digits round-trip an IEEE
// double exactly, which keeps trace output bit-stable.

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string format_complex(const Complex& c) {
    return "(" + format_double(c.real()) + "," + format_double(c.imag()) + ")";
}

inline std::string format_amps(const Ket& k) {
    std::string out;
    for (const Complex& a : k.amps()) out += format_complex(a);
    return out;
}

} // namespace qml
