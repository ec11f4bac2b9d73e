#include "cached_dfl/cache.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cached_dfl/errors.hpp"

namespace cached_dfl::cache {

ModelCache::ModelCache(AgentId holder, std::size_t capacity, Epoch tau_max,
                       std::optional<std::vector<std::size_t>> quotas)
    : holder_(holder), capacity_(capacity), tau_max_(tau_max), quotas_(std::move(quotas)) {
    if (tau_max < 1) throw ConfigError("staleness bound tau_max must be at least 1");
    if (quotas_) {
        const std::size_t sum = std::accumulate(quotas_->begin(), quotas_->end(), std::size_t{0});
        if (sum != capacity) {
            throw ConfigError("group quotas sum to " + std::to_string(sum) +
                              " but cache size is " + std::to_string(capacity));
        }
    }
}

const CachedModel* ModelCache::find(AgentId owner) const noexcept {
    for (const auto& e : entries_) {
        if (e.owner == owner) return &e;
    }
    return nullptr;
}

void ModelCache::assign(std::vector<CachedModel> entries) {
    std::sort(entries.begin(), entries.end(), fresher);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].owner == holder_) {
            throw std::invalid_argument("cache cannot hold its own holder's model");
        }
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
            if (entries[i].owner == entries[j].owner) {
                throw std::invalid_argument("duplicate cache owner " +
                                            std::to_string(entries[i].owner));
            }
        }
    }
    entries_ = std::move(entries);
}

bool operator==(const ModelCache& a, const ModelCache& b) noexcept {
    if (a.holder_ != b.holder_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
        const auto& x = a.entries_[i];
        const auto& y = b.entries_[i];
        if (x.owner != y.owner || x.train_epoch != y.train_epoch ||
            x.sample_count != y.sample_count || x.params != y.params) {
            return false;
        }
    }
    return true;
}

ModelCache evict_stale(ModelCache cache, Epoch t, Epoch tau_max) {
    if (tau_max < 1) throw ConfigError("staleness bound tau_max must be at least 1");
    auto entries = cache.entries();
    std::erase_if(entries, [&](const CachedModel& e) { return e.staleness(t) >= tau_max; });
    cache.assign(std::move(entries));
    return cache;
}

std::vector<CachedModel> merge_candidates(const ModelCache& mine, const CachedModel& incoming,
                                          const ModelCache& incoming_cache, Epoch t) {
    const Epoch tau_max = mine.tau_max();
    auto fresh = [&](const CachedModel& e) {
        return e.staleness(t) < tau_max && e.owner != mine.holder();
    };

    std::map<AgentId, CachedModel> merged;
    for (const auto& e : mine.entries()) {
        if (fresh(e)) merged.emplace(e.owner, e);
    }
    if (fresh(incoming)) {
        auto it = merged.find(incoming.owner);
        if (it == merged.end()) {
            merged.emplace(incoming.owner, incoming);
        } else if (incoming.train_epoch >= it->second.train_epoch) {
            it->second = incoming;
        }
    }
    for (const auto& e : incoming_cache.entries()) {
        if (!fresh(e)) continue;
        auto it = merged.find(e.owner);
        if (it == merged.end()) {
            merged.emplace(e.owner, e);
        } else if (e.train_epoch > it->second.train_epoch) {
            it->second = e;
        }
    }

    std::vector<CachedModel> out;
    out.reserve(merged.size());
    for (auto& [owner, e] : merged) out.push_back(std::move(e));
    std::sort(out.begin(), out.end(), fresher);
    return out;
}

ModelCache lru_update(const ModelCache& mine, const CachedModel& incoming,
                      const ModelCache& incoming_cache, Epoch t) {
    auto candidates = merge_candidates(mine, incoming, incoming_cache, t);
    if (candidates.size() > mine.capacity()) candidates.resize(mine.capacity());
    ModelCache out = mine;
    out.assign(std::move(candidates));
    return out;
}

ModelCache gb_update(const ModelCache& mine, const CachedModel& incoming,
                     const ModelCache& incoming_cache, Epoch t,
                     std::span<const std::size_t> group_map, std::span<const std::size_t> quotas) {
    if (group_map.empty()) throw ConfigError("group map is empty");
    const std::size_t groups = *std::max_element(group_map.begin(), group_map.end()) + 1;
    if (quotas.size() != groups) {
        throw ConfigError("expected " + std::to_string(groups) + " group quotas, got " +
                          std::to_string(quotas.size()));
    }

    auto candidates = merge_candidates(mine, incoming, incoming_cache, t);
    std::vector<std::size_t> taken(groups, 0);
    std::vector<CachedModel> kept;
    // Candidates are already in canonical order, so a single pass keeps the
    // freshest quotas[g] entries of every group.
    for (auto& e : candidates) {
        if (e.owner >= group_map.size()) {
            throw ConfigError("agent " + std::to_string(e.owner) + " has no group");
        }
        const std::size_t g = group_map[e.owner];
        if (taken[g] < quotas[g]) {
            ++taken[g];
            kept.push_back(std::move(e));
        }
    }
    ModelCache out = mine;
    out.assign(std::move(kept));
    return out;
}

CacheStats cache_stats(std::span<const ModelCache> caches, Epoch t) {
    CacheStats s;
    if (caches.empty()) return s;
    const auto n = static_cast<double>(caches.size());
    double total = 0.0;
    for (const auto& c : caches) total += static_cast<double>(c.size());
    s.count_mean = total / n;
    for (const auto& c : caches) {
        const double d = static_cast<double>(c.size()) - s.count_mean;
        s.count_var += d * d;
    }
    s.count_var /= n;
    if (total == 0.0) return s;

    for (const auto& c : caches) {
        for (const auto& e : c.entries()) s.age_mean += static_cast<double>(e.staleness(t));
    }
    s.age_mean /= total;
    for (const auto& c : caches) {
        for (const auto& e : c.entries()) {
            const double d = static_cast<double>(e.staleness(t)) - s.age_mean;
            s.age_var += d * d;
        }
    }
    s.age_var /= total;
    return s;
}

}  // namespace cached_dfl::cache
