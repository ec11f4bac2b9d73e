// Brute-force reference for the cache policies, written without reusing any
// of the library's merge code: collect every admissible candidate, keep the
// newest copy per owner, sort by (train_epoch desc, owner asc) and truncate.
#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <vector>

#include "cached_dfl/cache.hpp"

namespace oracle {

using cached_dfl::cache::CachedModel;
using cached_dfl::cache::Epoch;
using cached_dfl::cache::ModelCache;

struct Key {
    std::size_t owner;
    Epoch tau;
    friend bool operator==(const Key&, const Key&) = default;
};

inline std::vector<Key> keys_of(const ModelCache& c) {
    std::vector<Key> out;
    for (const auto& e : c.entries()) out.push_back({e.owner, e.train_epoch});
    return out;
}

inline std::vector<Key> candidates(const ModelCache& mine, const CachedModel& incoming,
                                   const ModelCache& peer, Epoch t) {
    std::vector<Key> all;
    auto admit = [&](std::size_t owner, Epoch tau) {
        if (owner == mine.holder()) return;
        if (t - tau >= mine.tau_max()) return;
        all.push_back({owner, tau});
    };
    for (const auto& e : mine.entries()) admit(e.owner, e.train_epoch);
    admit(incoming.owner, incoming.train_epoch);
    for (const auto& e : peer.entries()) admit(e.owner, e.train_epoch);

    std::vector<Key> best;
    for (const auto& k : all) {
        auto it = std::find_if(best.begin(), best.end(), [&](const Key& b) { return b.owner == k.owner; });
        if (it == best.end()) best.push_back(k);
        else if (k.tau > it->tau) it->tau = k.tau;
    }
    std::sort(best.begin(), best.end(), [](const Key& a, const Key& b) {
        if (a.tau != b.tau) return a.tau > b.tau;
        return a.owner < b.owner;
    });
    return best;
}

inline std::vector<Key> lru(const ModelCache& mine, const CachedModel& incoming, const ModelCache& peer,
                            Epoch t) {
    auto c = candidates(mine, incoming, peer, t);
    if (c.size() > mine.capacity()) c.resize(mine.capacity());
    return c;
}

inline std::vector<Key> group_based(const ModelCache& mine, const CachedModel& incoming,
                                    const ModelCache& peer, Epoch t,
                                    const std::vector<std::size_t>& group_of,
                                    const std::vector<std::size_t>& quotas) {
    const auto c = candidates(mine, incoming, peer, t);
    std::vector<Key> kept;
    for (std::size_t g = 0; g < quotas.size(); ++g) {
        std::size_t n = 0;
        for (const auto& k : c) {
            if (group_of[k.owner] == g && n < quotas[g]) {
                kept.push_back(k);
                ++n;
            }
        }
    }
    std::sort(kept.begin(), kept.end(), [](const Key& a, const Key& b) {
        if (a.tau != b.tau) return a.tau > b.tau;
        return a.owner < b.owner;
    });
    return kept;
}

// Sample count is a function of the owner so that two copies of one owner's
// model only ever differ in their timestamp.
inline CachedModel token(std::size_t owner, Epoch tau, const std::vector<std::size_t>& group_of) {
    CachedModel m;
    m.owner = owner;
    m.train_epoch = tau;
    m.sample_count = 1 + owner % 7;
    m.group = group_of.empty() ? 0 : group_of[owner];
    return m;
}

// Outcome of one randomized update sequence.
struct SequenceResult {
    std::size_t updates = 0;
    std::size_t mismatches = 0;
    std::size_t bound_violations = 0;
};

// Runs `steps` random pairwise updates over a small population whose clock
// advances at random. When `quotas` is empty the plain policy is checked.
inline SequenceResult run_sequence(std::mt19937_64& rng, std::size_t steps,
                                   const std::vector<std::size_t>& quotas) {
    std::uniform_int_distribution<std::size_t> pop_dist(2, 14);
    const std::size_t n = pop_dist(rng);
    const bool grouped = !quotas.empty();
    std::size_t capacity = 0;
    for (auto q : quotas) capacity += q;
    if (!grouped) capacity = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    const Epoch tau_max = std::uniform_int_distribution<Epoch>(1, 6)(rng);

    std::vector<std::size_t> group_of(n);
    for (auto& g : group_of) g = grouped ? std::uniform_int_distribution<std::size_t>(0, quotas.size() - 1)(rng) : 0;
    if (grouped) group_of[0] = quotas.size() - 1;  // make the group count unambiguous

    std::vector<ModelCache> caches;
    for (std::size_t i = 0; i < n; ++i) {
        if (grouped) caches.emplace_back(i, capacity, tau_max, quotas);
        else caches.emplace_back(i, capacity, tau_max);
    }
    // last local-update epoch of every agent
    std::vector<Epoch> trained(n, 0);

    SequenceResult r;
    Epoch t = 0;
    std::uniform_int_distribution<std::size_t> agent(0, n - 1);
    for (std::size_t s = 0; s < steps; ++s) {
        if (std::bernoulli_distribution(0.3)(rng)) {
            t += std::uniform_int_distribution<Epoch>(1, 3)(rng);
            for (auto& tr : trained)
                if (std::bernoulli_distribution(0.8)(rng)) tr = t;
        }
        const std::size_t a = agent(rng);
        std::size_t b = agent(rng);
        if (a == b) b = (b + 1) % n;
        const auto incoming = token(b, trained[b], group_of);
        const std::vector<std::size_t> gm(group_of.begin(), group_of.end());

        const auto before = caches[a];
        const ModelCache got =
            grouped ? cached_dfl::cache::gb_update(before, incoming, caches[b], t, gm, quotas)
                    : cached_dfl::cache::lru_update(before, incoming, caches[b], t);
        const auto want = grouped ? group_based(before, incoming, caches[b], t, group_of, quotas)
                                  : lru(before, incoming, caches[b], t);
        ++r.updates;
        if (keys_of(got) != want) ++r.mismatches;

        for (const auto& e : got.entries()) {
            if (t - e.train_epoch >= tau_max || e.owner == a) ++r.bound_violations;
            if (const auto* old = before.find(e.owner); old && old->train_epoch > e.train_epoch)
                ++r.bound_violations;
        }
        if (got.size() > capacity) ++r.bound_violations;
        caches[a] = got;
    }
    return r;
}

}  // namespace oracle
