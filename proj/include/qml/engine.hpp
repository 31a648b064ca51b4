#pragma once

// The reasoning session. Facts are judgements "these systems verify this
// vector"; events (measurements, unitaries) consume their input handles and
// issue fresh ones, and every derivation fires eagerly at the event that
// enables it. Queries never add facts.
//
// Measurement screens an outcome against every active fact touching the
// measured handle: single-subject facts must not be orthogonal to it, and
// composite facts must leave a nonzero contraction. A single-subject fact
// that coincides with a basis element forces that outcome outright.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "algebra.hpp"
#include "errors.hpp"
#include "logic.hpp"

namespace qml {

struct Tolerances {
    double zero = tol_zero;
    double unitary = tol_unitary;
    double proportional = tol_proportional;
};

struct SessionOptions {
    std::uint64_t seed = 0;
    Tolerances tol;
    // Fault-injection hook for the audit suite: admit every outcome without
    // screening. Never exposed on the command line.
    bool disable_born_screen = false;
};

struct OutcomeChoice {
    static OutcomeChoice any() { return {}; }
    static OutcomeChoice chosen(std::size_t i) {
        OutcomeChoice c;
        c.index = i;
        return c;
    }
    std::optional<std::size_t> index;
};

struct MeasureResult {
    HandleId post = 0;
    std::size_t outcome_index = 0;
    Ket outcome;
    bool was_certain = false;      // forced by a fact matching a basis element
    std::vector<FactId> derived;   // facts added by this event
};

// A successful verification: disjoint active facts whose tensor product is
// proportional to the queried vector. Each fact's provenance continues the
// tree downward.
struct Derivation {
    std::vector<FactId> facts;
};

struct TraceRecord {
    std::optional<EventId> event;
    std::string_view rule;
    std::vector<FactId> parents;
    std::optional<FactId> fact;    // resulting stored fact, if the rule stores one
    std::vector<HandleId> subject;
    Ket vector;
};

class Session {
public:
    explicit Session(SessionOptions opts = {}) : opts_(opts), rng_(opts.seed) {}

    // --- introduction ------------------------------------------------------

    HandleId declare_system(std::size_t dim, std::string name = {}) {
        if (dim < 2)
            throw ShapeError("system dimension must be at least 2");
        HandleId id = handles_.size();
        if (name.empty()) name = "s" + std::to_string(id);
        handles_.push_back(SystemHandle{id, std::move(name), dim, HandleStatus::live, {}});
        return id;
    }

    FactId assume(std::vector<HandleId> subject, const Ket& vector) {
        auto [subj, vec] = canonicalize(std::move(subject), vector);
        require_live(subj, "assume");
        check_dims(subj, vec);
        if (vec.norm() <= opts_.tol.zero)
            throw ZeroVectorError("assumed vector is zero");
        FactId id = add_fact(std::move(subj), std::move(vec), {rules::assume, {}},
                             FactStatus::active, false, events_.size()).first;
        trace_fact({}, rules::assume, {}, id);
        check_invariants();
        return id;
    }

    // --- tensor rule, both directions --------------------------------------

    FactId combine(FactId a, FactId b) {
        const Judgement& fa = fact(a);
        const Judgement& fb = fact(b);
        require_live(fa.subject, "combine");
        require_live(fb.subject, "combine");
        for (HandleId h : fa.subject)
            for (HandleId g : fb.subject)
                if (h == g)
                    throw SubjectError("combine: subjects overlap on handle " +
                                       handle(h).name);

        std::vector<HandleId> subject = fa.subject;
        subject.insert(subject.end(), fb.subject.begin(), fb.subject.end());
        auto [subj, vec] = canonicalize(std::move(subject), tensor(fa.vector, fb.vector));
        FactId id = add_fact(std::move(subj), std::move(vec), {rules::tensor_product, {a, b}},
                             FactStatus::active, false, events_.size()).first;
        trace_fact({}, rules::tensor_product, {a, b}, id);
        check_invariants();
        return id;
    }

    // Split a judgement across a cut. The vector must factor as a tensor
    // product between the two handle groups; otherwise NotAProductState.
    std::pair<FactId, FactId> split(FactId f, std::vector<HandleId> first_part) {
        const Judgement src = fact(f);
        require_live(src.subject, "split");

        std::sort(first_part.begin(), first_part.end());
        if (first_part.empty())
            throw SubjectError("split: the cut must keep at least one handle on each side");
        for (std::size_t i = 0; i + 1 < first_part.size(); ++i)
            if (first_part[i] == first_part[i + 1])
                throw SubjectError("split: duplicate handle in cut");

        std::vector<std::size_t> first_pos, second_pos;
        std::vector<HandleId> second_part;
        for (std::size_t i = 0; i < src.subject.size(); ++i) {
            if (std::binary_search(first_part.begin(), first_part.end(), src.subject[i]))
                first_pos.push_back(i);
            else {
                second_pos.push_back(i);
                second_part.push_back(src.subject[i]);
            }
        }
        if (first_pos.size() != first_part.size())
            throw SubjectError("split: cut names a handle outside the subject");
        if (second_part.empty())
            throw SubjectError("split: the cut must keep at least one handle on each side");

        // view the vector as a (first x second) coefficient matrix
        std::vector<std::size_t> order = first_pos;
        order.insert(order.end(), second_pos.begin(), second_pos.end());
        Ket arranged = permute_factors(src.vector, order);
        std::size_t d1 = 1, d2 = 1;
        std::vector<std::size_t> dims1, dims2;
        for (std::size_t p : first_pos) { d1 *= src.vector.shape().dim(p); dims1.push_back(src.vector.shape().dim(p)); }
        for (std::size_t p : second_pos) { d2 *= src.vector.shape().dim(p); dims2.push_back(src.vector.shape().dim(p)); }

        // rank-1 extraction from the largest pivot
        std::size_t pivot = 0;
        double best = -1;
        for (std::size_t i = 0; i < arranged.size(); ++i)
            if (std::abs(arranged.amp(i)) > best) { best = std::abs(arranged.amp(i)); pivot = i; }
        std::size_t pi = pivot / d2, pj = pivot % d2;

        std::vector<Complex> u(d1), w(d2);
        for (std::size_t i = 0; i < d1; ++i) u[i] = arranged.amp(i * d2 + pj);
        for (std::size_t j = 0; j < d2; ++j) w[j] = arranged.amp(pi * d2 + j) / arranged.amp(pivot);

        double scale = arranged.max_abs();
        for (std::size_t i = 0; i < d1; ++i)
            for (std::size_t j = 0; j < d2; ++j) {
                Complex residual = arranged.amp(i * d2 + j) - u[i] * w[j];
                if (std::abs(residual) > opts_.tol.proportional * scale)
                    throw NotAProductState("judgement does not factor across the requested cut "
                                           "(residual " + format_double(std::abs(residual)) + ")");
            }

        FactId id1 = add_fact(first_part, Ket(SpaceShape(dims1), std::move(u)),
                              {rules::tensor_split, {f}}, FactStatus::active, false,
                              events_.size()).first;
        trace_fact({}, rules::tensor_split, {f}, id1);
        FactId id2 = add_fact(second_part, Ket(SpaceShape(dims2), std::move(w)),
                              {rules::tensor_split, {f}}, FactStatus::active, false,
                              events_.size()).first;
        trace_fact({}, rules::tensor_split, {f}, id2);
        check_invariants();
        return {id1, id2};
    }

    // --- unitary evolution --------------------------------------------------

    // Consumes the input handles and transports every active fact that covers
    // them. Disjoint facts that jointly cover the tuple are first merged by
    // the tensor rule; facts that straddle the boundary without a covering
    // partner lose their handle and simply become historical.
    std::vector<HandleId> apply_unitary(const std::vector<HandleId>& ins, const Operator& u,
                                        std::vector<std::string> names = {}) {
        if (ins.empty())
            throw SubjectError("apply_unitary: no systems given");
        for (std::size_t i = 0; i < ins.size(); ++i)
            for (std::size_t j = i + 1; j < ins.size(); ++j)
                if (ins[i] == ins[j])
                    throw SubjectError("apply_unitary: handle " + handle(ins[i]).name +
                                       " listed twice");
        require_live(ins, "apply_unitary");
        std::size_t dim = 1;
        for (HandleId h : ins) dim *= handle(h).dim;
        if (dim != u.dim())
            throw ShapeError("operator dimension " + std::to_string(u.dim()) +
                             " does not match the acted systems (product " +
                             std::to_string(dim) + ")");
        if (!names.empty() && names.size() != ins.size())
            throw SubjectError("apply_unitary: name count does not match handle count");

        const std::size_t pre_events = events_.size();
        const EventId eid = events_.size();

        // Combine disjoint facts into every minimal cover of the acted tuple.
        std::vector<FactId> to_transport;
        for (const auto& cover : minimal_covers(ins)) {
            if (cover.size() == 1) {
                to_transport.push_back(cover.front());
                continue;
            }
            std::vector<HandleId> subject;
            std::optional<Ket> vec;
            for (FactId fid : cover) {
                const Judgement& g = fact(fid);
                subject.insert(subject.end(), g.subject.begin(), g.subject.end());
                vec = vec ? tensor(*vec, g.vector) : g.vector;
            }
            auto [subj, v] = canonicalize(std::move(subject), *vec);
            auto [cid, fresh] = add_fact(std::move(subj), std::move(v),
                                         {rules::tensor_product, cover}, FactStatus::active,
                                         false, pre_events);
            trace_fact(eid, rules::tensor_product, cover, cid);
            if (fresh) to_transport.push_back(cid);
            else if (std::find(to_transport.begin(), to_transport.end(), cid) ==
                     to_transport.end())
                to_transport.push_back(cid);
        }
        std::sort(to_transport.begin(), to_transport.end());

        // the event itself
        std::vector<HandleId> outs;
        for (std::size_t i = 0; i < ins.size(); ++i) {
            const SystemHandle& h = handle(ins[i]);
            std::string name = names.empty() ? h.name + "'" : std::move(names[i]);
            HandleId out = handles_.size();
            handles_.push_back(SystemHandle{out, std::move(name), h.dim, HandleStatus::live, eid});
            outs.push_back(out);
        }
        events_.push_back(Event{eid, UnitaryEvent{ins, u, outs}});
        for (HandleId h : ins) handles_[h].status = HandleStatus::consumed;

        // successors
        for (FactId fid : to_transport) {
            const Judgement& g = fact(fid);
            std::vector<std::size_t> positions(ins.size());
            for (std::size_t i = 0; i < ins.size(); ++i)
                positions[i] = position_of(g.subject, ins[i]);
            Ket moved = apply_operator(u, g.vector, positions);
            std::vector<HandleId> subject = g.subject;
            for (HandleId& h : subject)
                for (std::size_t i = 0; i < ins.size(); ++i)
                    if (h == ins[i]) h = outs[i];
            auto [subj, v] = canonicalize(std::move(subject), moved);
            FactId nid = add_fact(std::move(subj), std::move(v), {rules::unitary, {fid}},
                                  FactStatus::active, false, events_.size()).first;
            trace_fact(eid, rules::unitary, {fid}, nid);
        }

        demote_facts_touching(ins);
        check_invariants();
        return outs;
    }

    // --- measurement --------------------------------------------------------

    std::vector<std::size_t> possible_outcomes(HandleId h, const Observable& obs) const {
        check_measurable(h, obs);
        return screen_outcomes(h, obs).admissible;
    }

    // The outcome forced by an active fact coinciding with a basis element,
    // if there is one.
    std::optional<std::size_t> forced_outcome(HandleId h, const Observable& obs) const {
        check_measurable(h, obs);
        auto s = screen_outcomes(h, obs);
        if (s.forcing.empty() || s.admissible.empty()) return std::nullopt;
        return s.forced;
    }

    MeasureResult measure(HandleId h, const Observable& obs, OutcomeChoice choice,
                          std::string post_name = {}) {
        check_measurable(h, obs);
        Screen s = screen_outcomes(h, obs);

        if (s.admissible.empty())
            throw NoAdmissibleOutcome("no outcome of this observable is admissible for " +
                                      handle(h).name + ": every basis element contradicts an "
                                      "active fact");

        std::size_t k;
        bool certain = !s.forcing.empty();
        if (choice.index) {
            k = *choice.index;
            if (k >= obs.size())
                throw ShapeError("outcome index " + std::to_string(k) + " out of range");
            if (std::find(s.admissible.begin(), s.admissible.end(), k) == s.admissible.end()) {
                if (certain && k != s.forced)
                    throw ImpossibleOutcome("outcome " + obs.label(k) + " conflicts with a fact "
                                            "that makes " + obs.label(s.forced) +
                                            " certain for " + handle(h).name);
                throw ImpossibleOutcome("outcome " + obs.label(k) + " is orthogonal to what " +
                                        handle(h).name + " verifies");
            }
        } else if (s.admissible.size() == 1) {
            k = s.admissible.front(); // no randomness consumed
        } else {
            k = s.admissible[rng_() % s.admissible.size()];
        }

        const EventId eid = events_.size();
        const Ket outcome = obs.element(k);

        // snapshot before consuming: every fact that mentions h
        struct Affected { FactId id; bool was_active; };
        std::vector<Affected> affected;
        for (const Judgement& g : facts_)
            if (std::binary_search(g.subject.begin(), g.subject.end(), h))
                affected.push_back({g.id, g.status == FactStatus::active});

        const SystemHandle& pre = handle(h);
        std::string name = post_name.empty() ? pre.name + "'" : std::move(post_name);
        HandleId out = handles_.size();
        handles_.push_back(SystemHandle{out, std::move(name), pre.dim, HandleStatus::live, eid});
        events_.push_back(Event{eid, MeasurementEvent{h, obs, k, out}});
        handles_[h].status = HandleStatus::consumed;

        MeasureResult result{out, k, outcome, certain, {}};

        // the outcome itself, as a trace record on the consumed handle
        if (certain)
            trace_.push_back({eid, rules::weak_born, s.forcing, {}, {h}, outcome});
        else
            trace_.push_back({eid, rules::outcome_definition, {}, {}, {h}, outcome});

        // projection: the fresh handle verifies the outcome
        FactId pid = add_fact({out}, outcome, {rules::projection, {}}, FactStatus::active,
                              false, events_.size()).first;
        trace_fact(eid, rules::projection, {}, pid);
        result.derived.push_back(pid);

        // partial measurement on every composite fact that mentioned h
        for (const Affected& a : affected) {
            const Judgement g = fact(a.id); // copy: facts_ may reallocate
            if (g.subject.size() < 2) continue;
            std::size_t pos = position_of(g.subject, h);
            Ket rest = partial_apply(pos, outcome, g.vector);
            if (rest.norm() <= opts_.tol.zero * g.vector.norm())
                continue; // only reachable with the screen disabled
            std::vector<HandleId> rest_subject;
            for (HandleId x : g.subject)
                if (x != h) rest_subject.push_back(x);

            if (a.was_active) {
                FactId did = add_fact(rest_subject, rest, {rules::partial_measurement, {a.id}},
                                      FactStatus::active, false, events_.size()).first;
                trace_fact(eid, rules::partial_measurement, {a.id}, did);
                result.derived.push_back(did);
            } else {
                // Retrospective reading of a fact that was already historical:
                // recorded for audit, never used to license later events.
                FactId did = add_fact(rest_subject, rest, {rules::partial_measurement, {a.id}},
                                      FactStatus::historical, true, events_.size()).first;
                trace_fact(eid, rules::partial_measurement, {a.id}, did);
                result.derived.push_back(did);
                std::size_t at[1] = {pos};
                Ket full = embed_at(std::span<const std::size_t>(at, 1), outcome, rest);
                std::vector<FactId> parents = {did};
                parents.insert(parents.end(), s.forcing.begin(), s.forcing.end());
                FactId tid = add_fact(g.subject, full, {rules::tensor_product, parents},
                                      FactStatus::historical, true, events_.size()).first;
                trace_fact(eid, rules::tensor_product, parents, tid);
                result.derived.push_back(tid);
            }
        }

        demote_facts_touching({h});
        check_invariants();
        return result;
    }

    // --- verification queries ------------------------------------------------

    // Is the vector proportional to an active fact on this subject, or to a
    // tensor product of active facts partitioning it?
    std::optional<Derivation> verifies(std::vector<HandleId> subject, const Ket& v) const {
        auto [subj, vec] = canonicalize(std::move(subject), v);
        for (HandleId h : subj) {
            if (h >= handles_.size())
                throw SubjectError("unknown handle id " + std::to_string(h));
            if (handles_[h].status != HandleStatus::live)
                return std::nullopt; // nothing is derivable about consumed handles
        }
        check_dims(subj, vec);
        if (vec.norm() <= opts_.tol.zero)
            throw ZeroVectorError("queried vector is zero");

        std::vector<FactId> candidates;
        for (const Judgement& g : facts_)
            if (g.status == FactStatus::active && subset_of(g.subject, subj))
                candidates.push_back(g.id);

        std::vector<FactId> chosen;
        std::optional<Derivation> found;
        search_partition(vec, candidates, subj, chosen, found);
        return found;
    }

    // --- accessors -----------------------------------------------------------

    const SystemHandle& handle(HandleId id) const {
        if (id >= handles_.size())
            throw SubjectError("unknown handle id " + std::to_string(id));
        return handles_[id];
    }
    const Judgement& fact(FactId id) const {
        if (id >= facts_.size())
            throw SubjectError("unknown fact id " + std::to_string(id));
        return facts_[id];
    }
    const std::vector<SystemHandle>& handles() const { return handles_; }
    const std::vector<Judgement>& facts() const { return facts_; }
    const std::vector<Event>& events() const { return events_; }
    const std::vector<TraceRecord>& trace() const { return trace_; }
    const Tolerances& tolerances() const { return opts_.tol; }
    std::uint64_t seed() const { return opts_.seed; }

    std::string subject_names(const std::vector<HandleId>& subject) const {
        std::string out;
        for (std::size_t i = 0; i < subject.size(); ++i) {
            if (i) out += ", ";
            out += handle(subject[i]).name;
        }
        return out;
    }

    // One line per derivation, bit-stable across runs with equal input.
    void structured_trace(std::ostream& os) const {
        for (const TraceRecord& r : trace_) {
            os << "event=";
            if (r.event) os << "E" << *r.event;
            else os << "-";
            os << " rule=" << r.rule << " parents=";
            if (r.parents.empty()) os << "-";
            for (std::size_t i = 0; i < r.parents.size(); ++i)
                os << (i ? "," : "") << "F" << r.parents[i];
            os << " fact=";
            if (r.fact) os << "F" << *r.fact;
            else os << "-";
            os << " subject=";
            for (std::size_t i = 0; i < r.subject.size(); ++i)
                os << (i ? "," : "") << r.subject[i];
            os << " vector=" << format_amps(r.vector) << "\n";
        }
    }

    void text_trace(std::ostream& os) const {
        for (const TraceRecord& r : trace_) {
            os << "  ";
            if (r.event) os << "[E" << *r.event << " " << r.rule << "]";
            else os << "[" << r.rule << "]";
            os << " ";
            if (r.fact) os << "F" << *r.fact << ": ";
            os << "(" << subject_names(r.subject) << ") |= " << render_vector(r.vector);
            if (!r.parents.empty()) {
                os << "  from";
                for (FactId p : r.parents) os << " F" << p;
            }
            os << "\n";
        }
    }

    static std::string render_complex(const Complex& c) {
        char buf[64];
        if (c.imag() == 0) std::snprintf(buf, sizeof buf, "%.4g", c.real());
        else if (c.real() == 0) std::snprintf(buf, sizeof buf, "%.4gi", c.imag());
        else std::snprintf(buf, sizeof buf, "%.4g%+.4gi", c.real(), c.imag());
        return buf;
    }

    static std::string render_vector(const Ket& k) {
        std::string out = "[";
        for (std::size_t i = 0; i < k.size(); ++i) {
            if (i) out += ", ";
            out += render_complex(k.amp(i));
        }
        return out + "]";
    }

private:
    struct Screen {
        std::vector<std::size_t> admissible;
        std::size_t forced = 0;
        std::vector<FactId> forcing;
    };

    void check_measurable(HandleId h, const Observable& obs) const {
        const SystemHandle& sh = handle(h);
        if (sh.status != HandleStatus::live)
            throw LinearityViolation("system " + sh.name +
                                     " was already consumed by a measurement or evolution");
        if (obs.dim() != sh.dim)
            throw ShapeError("observable dimension " + std::to_string(obs.dim()) +
                             " does not match system " + sh.name + " (dim " +
                             std::to_string(sh.dim) + ")");
    }

    Screen screen_outcomes(HandleId h, const Observable& obs) const {
        Screen s;
        if (opts_.disable_born_screen) {
            for (std::size_t k = 0; k < obs.size(); ++k) s.admissible.push_back(k);
            return s;
        }

        std::vector<bool> ok(obs.size(), true);
        for (const Judgement& g : facts_) {
            if (g.status != FactStatus::active) continue;
            if (!std::binary_search(g.subject.begin(), g.subject.end(), h)) continue;
            double scale = g.vector.norm();
            if (g.subject.size() == 1) {
                for (std::size_t k = 0; k < obs.size(); ++k)
                    if (ok[k] && std::abs(inner(g.vector, obs.element(k))) <= opts_.tol.zero * scale)
                        ok[k] = false;
                // a fact lying on a basis ray forces that outcome
                for (std::size_t k = 0; k < obs.size(); ++k) {
                    if (proportional(g.vector, obs.element(k), opts_.tol.proportional)) {
                        if (!s.forcing.empty() && s.forced != k) {
                            // two facts force different outcomes: nothing is admissible
                            s.admissible.clear();
                            s.forcing.push_back(g.id);
                            return s;
                        }
                        s.forced = k;
                        s.forcing.push_back(g.id);
                        break;
                    }
                }
            } else {
                std::size_t pos = position_of(g.subject, h);
                for (std::size_t k = 0; k < obs.size(); ++k)
                    if (ok[k] &&
                        partial_apply(pos, obs.element(k), g.vector).norm() <=
                            opts_.tol.zero * scale)
                        ok[k] = false;
            }
        }
        for (std::size_t k = 0; k < obs.size(); ++k) {
            if (!ok[k]) continue;
            if (!s.forcing.empty() && k != s.forced) continue;
            s.admissible.push_back(k);
        }
        return s;
    }

    // --- fact bookkeeping ---------------------------------------------------

    void require_live(const std::vector<HandleId>& subject, const char* who) const {
        for (HandleId h : subject) {
            const SystemHandle& sh = handle(h);
            if (sh.status != HandleStatus::live)
                throw LinearityViolation(std::string(who) + ": system " + sh.name +
                                         " was already consumed by a measurement or evolution");
        }
    }

    void check_dims(const std::vector<HandleId>& subject, const Ket& v) const {
        for (std::size_t i = 0; i < subject.size(); ++i)
            if (v.shape().dim(i) != handle(subject[i]).dim)
                throw ShapeError("factor " + std::to_string(i) + " has dimension " +
                                 std::to_string(v.shape().dim(i)) + " but system " +
                                 handle(subject[i]).name + " has dimension " +
                                 std::to_string(handle(subject[i]).dim));
    }

    static std::size_t position_of(const std::vector<HandleId>& subject, HandleId h) {
        auto it = std::lower_bound(subject.begin(), subject.end(), h);
        if (it == subject.end() || *it != h)
            throw SubjectError("handle not in subject");
        return std::size_t(it - subject.begin());
    }

    static bool subset_of(const std::vector<HandleId>& a, const std::vector<HandleId>& b) {
        return std::includes(b.begin(), b.end(), a.begin(), a.end());
    }

    // Deduplicate up to proportionality on the same subject and status.
    std::pair<FactId, bool> add_fact(std::vector<HandleId> subject, Ket vector, Provenance prov,
                                     FactStatus status, bool born_historical,
                                     std::size_t check_point) {
        for (const Judgement& g : facts_)
            if (g.status == status && g.subject == subject &&
                proportional(g.vector, vector, opts_.tol.proportional))
                return {g.id, false};
        FactId id = facts_.size();
        facts_.push_back(Judgement{id, std::move(subject), std::move(vector), std::move(prov),
                                   status, born_historical, check_point});
        return {id, true};
    }

    void trace_fact(std::optional<EventId> event, std::string_view rule,
                    std::vector<FactId> parents, FactId id) {
        const Judgement& g = fact(id);
        trace_.push_back({event, rule, std::move(parents), id, g.subject, g.vector});
    }

    void demote_facts_touching(const std::vector<HandleId>& consumed) {
        for (Judgement& g : facts_) {
            if (g.status != FactStatus::active) continue;
            for (HandleId h : consumed)
                if (std::binary_search(g.subject.begin(), g.subject.end(), h)) {
                    g.status = FactStatus::historical;
                    break;
                }
        }
    }

    // Inclusion-minimal sets of disjoint active facts whose subjects jointly
    // contain every target handle (members may extend beyond the targets).
    std::vector<std::vector<FactId>> minimal_covers(const std::vector<HandleId>& targets) const {
        std::vector<HandleId> sorted_targets = targets;
        std::sort(sorted_targets.begin(), sorted_targets.end());
        std::vector<FactId> candidates;
        for (const Judgement& g : facts_) {
            if (g.status != FactStatus::active) continue;
            for (HandleId t : sorted_targets)
                if (std::binary_search(g.subject.begin(), g.subject.end(), t)) {
                    candidates.push_back(g.id);
                    break;
                }
        }
        std::vector<std::vector<FactId>> covers;
        std::vector<FactId> chosen;
        std::vector<HandleId> used;
        cover_rec(sorted_targets, candidates, chosen, used, covers);
        return covers;
    }

    void cover_rec(const std::vector<HandleId>& remaining, const std::vector<FactId>& candidates,
                   std::vector<FactId>& chosen, std::vector<HandleId>& used,
                   std::vector<std::vector<FactId>>& covers) const {
        if (remaining.empty()) {
            covers.push_back(chosen);
            return;
        }
        HandleId t = remaining.front();
        for (FactId c : candidates) {
            const Judgement& g = fact(c);
            if (!std::binary_search(g.subject.begin(), g.subject.end(), t)) continue;
            bool overlap = false;
            for (HandleId u : g.subject)
                if (std::binary_search(used.begin(), used.end(), u)) { overlap = true; break; }
            if (overlap) continue;

            std::vector<HandleId> next_remaining;
            for (HandleId r : remaining)
                if (!std::binary_search(g.subject.begin(), g.subject.end(), r))
                    next_remaining.push_back(r);
            std::vector<HandleId> next_used = used;
            next_used.insert(next_used.end(), g.subject.begin(), g.subject.end());
            std::sort(next_used.begin(), next_used.end());

            chosen.push_back(c);
            std::swap(used, next_used);
            cover_rec(next_remaining, candidates, chosen, used, covers);
            std::swap(used, next_used);
            chosen.pop_back();
        }
    }

    // Exact-partition search for verifies.
    void search_partition(const Ket& target, const std::vector<FactId>& candidates,
                          std::vector<HandleId> remaining, std::vector<FactId>& chosen,
                          std::optional<Derivation>& found) const {
        if (found) return;
        if (remaining.empty()) {
            std::vector<HandleId> subject;
            std::optional<Ket> vec;
            for (FactId fid : chosen) {
                const Judgement& g = fact(fid);
                subject.insert(subject.end(), g.subject.begin(), g.subject.end());
                vec = vec ? tensor(*vec, g.vector) : g.vector;
            }
            auto [subj, v] = canonicalize(std::move(subject), *vec);
            if (proportional(v, target, opts_.tol.proportional))
                found = Derivation{chosen};
            return;
        }
        HandleId t = remaining.front();
        for (FactId c : candidates) {
            if (found) return;
            const Judgement& g = fact(c);
            if (!std::binary_search(g.subject.begin(), g.subject.end(), t)) continue;
            if (!subset_of(g.subject, remaining)) continue;
            std::vector<HandleId> next;
            for (HandleId r : remaining)
                if (!std::binary_search(g.subject.begin(), g.subject.end(), r)) next.push_back(r);
            chosen.push_back(c);
            search_partition(target, candidates, std::move(next), chosen, found);
            chosen.pop_back();
        }
    }

    void check_invariants() const {
        for (const Judgement& g : facts_) {
            if (g.subject.empty() || g.subject.size() != g.vector.shape().factor_count())
                throw std::logic_error("internal: fact shape mismatch");
            bool all_live = true;
            for (std::size_t i = 0; i < g.subject.size(); ++i) {
                if (i + 1 < g.subject.size() && g.subject[i] >= g.subject[i + 1])
                    throw std::logic_error("internal: fact subject not canonical");
                if (g.vector.shape().dim(i) != handles_[g.subject[i]].dim)
                    throw std::logic_error("internal: fact factor dimension mismatch");
                if (handles_[g.subject[i]].status != HandleStatus::live) all_live = false;
            }
            if ((g.status == FactStatus::active) != all_live)
                throw std::logic_error("internal: fact status out of step with handle liveness");
        }
    }

    SessionOptions opts_;
    std::mt19937_64 rng_;
    std::vector<SystemHandle> handles_;
    std::vector<Judgement> facts_;
    std::vector<Event> events_;
    std::vector<TraceRecord> trace_;
};

} // namespace qml
