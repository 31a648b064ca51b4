#pragma once

// Independent ground truth for a session: take the assumed judgements as
// literal preparations, replay the event log on a full state vector, and
// check every derived fact against the state it was derived in.
//
// A fact "S verifies phi" is sound when no measurement on S can produce an
// outcome orthogonal to phi. For a unit global state psi that condition has
// a closed form: the probability mass of S outside the ray of phi is
//
//     leak = 1 - |papply(phi_hat, psi)|^2
//
// (the trace of the reduced density matrix times the complement projector),
// so soundness is exactly leak <= tol_zero. No sampling is involved and the
// whole audit is deterministic.
//
// Facts are checked against the replayed state at their check point, the
// number of events that preceded them. Retrospective facts (born historical
// at a measurement of an already-consumed subject) describe a pre-collapse
// state on purpose and are exempt.

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "algebra.hpp"
#include "engine.hpp"
#include "errors.hpp"
#include "logic.hpp"

namespace qml {

struct GlobalState {
    std::vector<HandleId> subject; // ascending; factor f belongs to subject[f]
    Ket psi;                       // unit norm
};

struct Underdetermined {
    std::string reason;
};

using SeedResult = std::variant<GlobalState, Underdetermined>;

inline std::size_t state_position(const GlobalState& st, HandleId h) {
    auto it = std::lower_bound(st.subject.begin(), st.subject.end(), h);
    if (it == st.subject.end() || *it != h)
        throw SubjectError("system " + std::to_string(h) + " is not part of the seeded state");
    return std::size_t(it - st.subject.begin());
}

// Build the initial preparation from the assumed judgements. They must cover
// every declared system exactly once; contradictory assumptions about one
// subject are an error, anything short of a partition is Underdetermined.
inline SeedResult seed_state(const Session& s) {
    std::vector<const Judgement*> assumed;
    for (const Judgement& g : s.facts())
        if (g.provenance.assumed()) assumed.push_back(&g);

    for (std::size_t i = 0; i < assumed.size(); ++i)
        for (std::size_t j = i + 1; j < assumed.size(); ++j)
            if (assumed[i]->subject == assumed[j]->subject)
                throw SeedError("contradictory assumptions about (" +
                                s.subject_names(assumed[i]->subject) + ")");

    std::vector<bool> is_declared(s.handles().size(), false);
    std::size_t declared_count = 0;
    for (const SystemHandle& h : s.handles())
        if (!h.origin) {
            is_declared[h.id] = true;
            ++declared_count;
        }

    std::vector<bool> covered(s.handles().size(), false);
    std::size_t covered_count = 0;
    for (const Judgement* g : assumed)
        for (HandleId h : g->subject) {
            if (!is_declared[h])
                return Underdetermined{"assumption about event-produced system " +
                                       s.handle(h).name};
            if (covered[h])
                return Underdetermined{"system " + s.handle(h).name +
                                       " appears in more than one assumption"};
            covered[h] = true;
            ++covered_count;
        }
    if (covered_count < declared_count) {
        for (const SystemHandle& h : s.handles())
            if (!h.origin && !covered[h.id])
                return Underdetermined{"no assumed preparation for system " + h.name};
    }
    if (assumed.empty()) return Underdetermined{"no assumptions to seed from"};

    std::vector<HandleId> subject;
    std::optional<Ket> vec;
    for (const Judgement* g : assumed) {
        subject.insert(subject.end(), g->subject.begin(), g->subject.end());
        vec = vec ? tensor(*vec, g->vector) : g->vector;
    }
    auto [subj, psi] = canonicalize(std::move(subject), *vec);
    return GlobalState{std::move(subj), psi.normalized()};
}

// Probability that measuring `h` yields (the ray of) `outcome`.
inline double born_probability(const GlobalState& st, HandleId h, const Ket& outcome) {
    std::size_t pos = state_position(st, h);
    Ket o = outcome.normalized();
    if (st.subject.size() == 1) return std::norm(inner(o, st.psi));
    return partial_apply(pos, o, st.psi).norm_sq();
}

inline std::vector<std::size_t> born_support(const GlobalState& st, HandleId h,
                                             const Observable& obs, double tolz = tol_zero) {
    std::vector<std::size_t> support;
    for (std::size_t k = 0; k < obs.size(); ++k)
        if (born_probability(st, h, obs.element(k)) > tolz) support.push_back(k);
    return support;
}

// Advance the state through one recorded event. A measurement whose recorded
// outcome carries no probability is an engine bug, reported as a mismatch.
inline void replay_event(GlobalState& st, const Event& ev) {
    if (ev.is_measurement()) {
        const MeasurementEvent& m = ev.measurement();
        std::size_t pos = state_position(st, m.in);
        const Ket& outcome = m.observable.element(m.outcome_index);
        double p = born_probability(st, m.in, outcome);
        if (p <= tol_zero)
            throw ReplayMismatch("recorded outcome " + m.observable.label(m.outcome_index) +
                                 " of event E" + std::to_string(ev.id) +
                                 " has zero probability in replay");
        Ket post = outcome;
        if (st.subject.size() > 1) {
            std::size_t at[1] = {pos};
            Ket rest = partial_apply(pos, outcome, st.psi);
            post = embed_at(std::span<const std::size_t>(at, 1), outcome, rest);
        }
        st.subject[pos] = m.out;
        auto [subj, psi] = canonicalize(std::move(st.subject), post);
        st.subject = std::move(subj);
        st.psi = psi.normalized();
    } else {
        const UnitaryEvent& u = ev.unitary();
        std::vector<std::size_t> positions(u.ins.size());
        for (std::size_t i = 0; i < u.ins.size(); ++i)
            positions[i] = state_position(st, u.ins[i]);
        Ket moved = apply_operator(u.op, st.psi, positions);
        for (std::size_t i = 0; i < u.ins.size(); ++i)
            st.subject[positions[i]] = u.outs[i];
        auto [subj, psi] = canonicalize(std::move(st.subject), moved);
        st.subject = std::move(subj);
        st.psi = std::move(psi);
    }
}

// Probability mass of `subject` lying off the ray of `phi`; zero (within
// tolerance) means the judgement is sound in this state.
inline double soundness_leak(const GlobalState& st, const std::vector<HandleId>& subject,
                             const Ket& phi) {
    Ket target = phi.normalized();
    if (subject.size() == st.subject.size()) return 1.0 - std::norm(inner(target, st.psi));
    std::vector<std::size_t> positions(subject.size());
    for (std::size_t i = 0; i < subject.size(); ++i)
        positions[i] = state_position(st, subject[i]);
    return 1.0 - partial_apply(positions, target, st.psi).norm_sq();
}

// A recorded possible_outcomes answer, to be checked against the replayed
// Born support at the moment the query ran.
struct PossibilityQuery {
    HandleId handle = 0;
    Observable observable;
    std::vector<std::size_t> engine_answer;
    std::size_t event_time = 0; // events already executed when the query ran
    std::string label;
};

struct AuditReport {
    enum class Status { pass, fail, skip };
    struct Line {
        Status status;
        std::string text;
    };
    std::vector<Line> lines;

    void add(Status st, std::string text) { lines.push_back({st, std::move(text)}); }
    bool ok() const {
        for (const Line& l : lines)
            if (l.status == Status::fail) return false;
        return true;
    }
    std::size_t count(Status st) const {
        std::size_t n = 0;
        for (const Line& l : lines)
            if (l.status == st) ++n;
        return n;
    }
    void render(std::ostream& os) const {
        for (const Line& l : lines) {
            switch (l.status) {
            case Status::pass: os << "PASS "; break;
            case Status::fail: os << "FAIL "; break;
            case Status::skip: os << "SKIP "; break;
            }
            os << l.text << "\n";
        }
    }
};

inline AuditReport audit(const Session& s, const std::vector<PossibilityQuery>& queries = {}) {
    using Status = AuditReport::Status;
    AuditReport rep;

    SeedResult seeded = seed_state(s);
    if (const Underdetermined* u = std::get_if<Underdetermined>(&seeded)) {
        rep.add(Status::skip, "underdetermined: " + u->reason);
        return rep;
    }
    GlobalState st = std::move(std::get<GlobalState>(seeded));
    rep.add(Status::pass, "seeded (" + s.subject_names(st.subject) + ")");

    const std::vector<Event>& events = s.events();
    for (std::size_t t = 0; t <= events.size(); ++t) {
        for (const Judgement& g : s.facts()) {
            if (g.born_historical || g.check_point != t) continue;
            double leak = soundness_leak(st, g.subject, g.vector);
            std::string what = "fact F" + std::to_string(g.id) + " (" +
                               s.subject_names(g.subject) + ") at t=" + std::to_string(t);
            if (leak > tol_zero)
                rep.add(Status::fail, what + ": orthogonal outcomes carry probability " +
                                          format_double(leak));
            else
                rep.add(Status::pass, what);
        }
        for (const PossibilityQuery& q : queries) {
            if (q.event_time != t) continue;
            std::vector<std::size_t> support = born_support(st, q.handle, q.observable);
            std::vector<std::size_t> missing;
            for (std::size_t k : support)
                if (std::find(q.engine_answer.begin(), q.engine_answer.end(), k) ==
                    q.engine_answer.end())
                    missing.push_back(k);
            std::string what = "possible(" + s.handle(q.handle).name + ")" +
                               (q.label.empty() ? "" : " " + q.label) + " at t=" +
                               std::to_string(t);
            if (missing.empty()) {
                rep.add(Status::pass, what);
            } else {
                std::string names;
                for (std::size_t i = 0; i < missing.size(); ++i)
                    names += (i ? ", " : "") + q.observable.label(missing[i]);
                rep.add(Status::fail, what + ": outcomes {" + names +
                                          "} have positive probability but were excluded");
            }
        }
        if (t == events.size()) break;
        try {
            replay_event(st, events[t]);
            rep.add(Status::pass, "replayed E" + std::to_string(t));
        } catch (const ReplayMismatch& e) {
            rep.add(Status::fail, e.what());
            rep.add(Status::skip, "checks after E" + std::to_string(t) + " not reached");
            return rep;
        }
    }
    return rep;
}

} // namespace qml
