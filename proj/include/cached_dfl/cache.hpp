#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cached_dfl/model.hpp"

namespace cached_dfl::cache {

using AgentId = std::size_t;
using Epoch = std::int64_t;

/// Snapshot of a foreign model. `params` may be null when only cache
/// metadata is simulated.
struct CachedModel {
    AgentId owner = 0;
    std::shared_ptr<const learning::ModelParams> params;
    Epoch train_epoch = 0;
    std::size_t sample_count = 1;
    std::size_t group = 0;

    Epoch staleness(Epoch t) const noexcept { return t - train_epoch; }
};

/// Canonical retention order: newer train_epoch first, then smaller owner.
inline bool fresher(const CachedModel& a, const CachedModel& b) noexcept {
    if (a.train_epoch != b.train_epoch) return a.train_epoch > b.train_epoch;
    return a.owner < b.owner;
}

/// Bounded store of foreign models held by agent `holder`. Entries are kept
/// in canonical order with at most one entry per owner and never one owned
/// by the holder.
class ModelCache {
public:
    ModelCache(AgentId holder, std::size_t capacity, Epoch tau_max,
               std::optional<std::vector<std::size_t>> quotas = std::nullopt);

    AgentId holder() const noexcept { return holder_; }
    std::size_t capacity() const noexcept { return capacity_; }
    Epoch tau_max() const noexcept { return tau_max_; }
    const std::optional<std::vector<std::size_t>>& quotas() const noexcept { return quotas_; }

    const std::vector<CachedModel>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const CachedModel* find(AgentId owner) const noexcept;

    /// Replaces the contents. Entries are re-sorted; duplicate owners or the
    /// holder's own model raise std::invalid_argument.
    void assign(std::vector<CachedModel> entries);

    friend bool operator==(const ModelCache& a, const ModelCache& b) noexcept;

private:
    AgentId holder_;
    std::size_t capacity_;
    Epoch tau_max_;
    std::optional<std::vector<std::size_t>> quotas_;
    std::vector<CachedModel> entries_;
};

/// Drops every entry with t - train_epoch >= tau_max.
ModelCache evict_stale(ModelCache cache, Epoch t, Epoch tau_max);

/// Merge phase shared by both policies: stale entries of either cache are
/// ignored; the peer's own model enters when it is at least as new as the
/// resident copy; a peer-cached copy enters when absent or strictly newer.
/// Returns the candidates in canonical order.
std::vector<CachedModel> merge_candidates(const ModelCache& mine, const CachedModel& incoming,
                                          const ModelCache& incoming_cache, Epoch t);

/// Freshest-version retention with a global capacity.
ModelCache lru_update(const ModelCache& mine, const CachedModel& incoming,
                      const ModelCache& incoming_cache, Epoch t);

/// Per-group quotas: candidates are bucketed by group_map[owner] and each
/// bucket keeps its `quotas[g]` freshest entries. Throws ConfigError when the
/// quota list does not have one slot per group.
ModelCache gb_update(const ModelCache& mine, const CachedModel& incoming,
                     const ModelCache& incoming_cache, Epoch t,
                     std::span<const std::size_t> group_map, std::span<const std::size_t> quotas);

struct CacheStats {
    double count_mean = 0.0;
    double count_var = 0.0;
    double age_mean = 0.0;
    double age_var = 0.0;
};

/// Population mean/variance of entry counts over caches and of staleness
/// over all entries; the age moments are 0 when every cache is empty.
CacheStats cache_stats(std::span<const ModelCache> caches, Epoch t);

}  // namespace cached_dfl::cache
