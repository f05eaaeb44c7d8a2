#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memflow/architecture.hpp"
#include "memflow/cost.hpp"
#include "memflow/tmg.hpp"

namespace memflow {

/// One usable (entry, unroll, variant) option of the pool.
struct ExtendedEntry {
  std::size_t entry;
  std::int64_t unroll;
  std::size_t variant;
  double area_um2;  ///< variant area times unroll
};

/// Unrolled versions of each pool entry. Unrolls larger than the MAC array
/// are dropped.
std::vector<ExtendedEntry> expand_pool(const MemoryPool& pool, const MacModel& mac);

struct ArchSearchConfig {
  double area_budget_um2 = 0.0;
  MacModel mac;
  std::vector<SpatialUnrolling> unrollings;
  std::size_t max_levels_per_operand = 3;  ///< on-chip levels
  double min_shared_utilization = 0.7;
  MemoryPool pool;
};

/// Every hierarchy built from at most three instances of any pool entry,
/// each level serving a nonempty operand subset and replicated along a
/// subset of the spatial loops. Per operand, sizes strictly increase
/// bottom-up and replication shrinks. Levels use their smallest-area
/// variant; hierarchies over the area budget are dropped. Sorted by key.
std::vector<MemoryHierarchy> enumerate_hierarchies(const ArchSearchConfig& cfg, const SpatialUnrolling& s);

/// Index of the smallest-area variant with enough read and write bandwidth,
/// or the highest-bandwidth variant when none suffices.
std::size_t select_variant(const MemoryPoolEntry& e, const Rational& read_bits_per_cycle,
                           const Rational& write_bits_per_cycle);

/// Per-unit read and write bandwidth each physical level needs for the
/// mapping to run without stalls.
struct LevelBandwidth {
  Rational read{0}, write{0};
};
std::vector<LevelBandwidth> required_level_bandwidth(const LoopInfoTable& info, const MemoryHierarchy& h);

/// Picks each on-chip level's variant for the given mapping.
MemoryHierarchy optimize_bandwidth(const MemoryHierarchy& h, const LoopInfoTable& info);

struct DesignPoint {
  std::string key;
  MemoryHierarchy base;       ///< as enumerated
  MemoryHierarchy hierarchy;  ///< variants fixed
  std::size_t unrolling = 0;  ///< index into the config's unrollings
  SearchResult search;
  CostReport cost;
};

/// Search a mapping on `h`, fix variants, re-price. Variant upgrades that
/// would exceed `area_budget` are undone largest first.
std::optional<DesignPoint> price_hierarchy(const MemoryHierarchy& h, const SpatialUnrolling& s, std::size_t unrolling,
                                           const LayerSpec& spec, const MacModel& mac, double area_budget,
                                           const SearchOptions& opts);

struct ExploreResult {
  std::int64_t hierarchies = 0;
  std::int64_t infeasible = 0;
  std::vector<DesignPoint> points;  ///< sorted by key
  std::vector<std::size_t> pareto;  ///< indices into points
};

/// Runs every (unrolling, hierarchy) pair; work items are spread over
/// opts.workers threads and each search runs single-threaded.
ExploreResult explore(const ArchSearchConfig& cfg, const LayerSpec& spec, const SearchOptions& opts);

struct ParetoItem {
  double energy;
  double latency;
  double area;
  std::string key;
};

/// Nondominated items over (energy, latency, area); equal points keep the
/// smallest key. Ordered by energy, then latency, then key.
std::vector<std::size_t> pareto_front(std::span<const ParetoItem> items);

}  // namespace memflow
