#pragma once

// Random yet always-consistent sessions: assumptions partition the declared
// qubits, events touch live handles only, outcomes are left to the engine's
// sampler. Shared between the unit suite and the acceptance checks.

#include <qml/engine.hpp>
#include <qml/oracle.hpp>

#include "testutil.hpp"

namespace testutil {

struct RandomRun {
    qml::Session session;
    std::vector<qml::PossibilityQuery> queries;
};

inline qml::Observable random_qubit_basis(std::mt19937_64& rng) {
    qml::Ket k = random_ket(rng, {2}).normalized();
    qml::Ket perp(qml::SpaceShape::single(2),
                  {-std::conj(k.amp(1)), std::conj(k.amp(0))});
    return qml::Observable::make({k, perp});
}

inline RandomRun random_run(std::mt19937_64& rng, std::uint64_t engine_seed) {
    using namespace qml;
    RandomRun run{Session(SessionOptions{.seed = engine_seed}), {}};
    Session& s = run.session;

    std::size_t n = 2 + rng() % 2;
    std::vector<HandleId> live;
    for (std::size_t i = 0; i < n; ++i)
        live.push_back(s.declare_system(2, "q" + std::to_string(i)));

    // preparations over a random partition of the declared systems
    std::vector<HandleId> pool = live;
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng() % i]);
    std::size_t at = 0;
    while (at < pool.size()) {
        std::size_t take = 1 + rng() % std::min<std::size_t>(2, pool.size() - at);
        std::vector<HandleId> group(pool.begin() + at, pool.begin() + at + take);
        at += take;
        s.assume(group, random_ket(rng, std::vector<std::size_t>(group.size(), 2)));
    }

    std::size_t n_events = rng() % 7;
    for (std::size_t e = 0; e < n_events && !live.empty(); ++e) {
        std::size_t pick = rng() % live.size();
        HandleId h = live[pick];
        std::size_t roll = rng() % 10;
        if (roll < 5) {
            Observable obs = (roll == 0)
                ? Observable::make({Ket::basis(2, 0), Ket::basis(2, 1)}, {"k0", "k1"})
                : random_qubit_basis(rng);
            if (rng() % 2 == 0)
                run.queries.push_back({h, obs, s.possible_outcomes(h, obs),
                                       s.events().size(), ""});
            auto r = s.measure(h, obs, OutcomeChoice::any());
            live[pick] = r.post;
        } else if (roll < 8 && live.size() >= 2) {
            std::size_t other = rng() % (live.size() - 1);
            if (other >= pick) ++other;
            auto outs = s.apply_unitary({live[pick], live[other]}, random_unitary(rng, 4));
            live[pick] = outs[0];
            live[other] = outs[1];
        } else {
            auto outs = s.apply_unitary({h}, random_unitary(rng, 2));
            live[pick] = outs[0];
        }
    }
    return run;
}

} // namespace testutil
