#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memflow/architecture.hpp"
#include "memflow/cost.hpp"
#include "memflow/extractor.hpp"
#include "memflow/mapping.hpp"

namespace memflow {

enum class Strategy : std::uint8_t { exhaustive, heuristic, iterative };
std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

/// Per operand: the memory level currently being filled and how many more
/// copies of the data assigned so far would still fit there.
struct Roof {
  std::array<std::size_t, kNumOperands> level{};
  std::array<Rational, kNumOperands> remaining{};
  std::array<bool, kNumOperands> unbounded{};

  /// Remaining capacity rounded down to whole blocks.
  std::int64_t blocks(Operand op) const { return boost::rational_cast<std::int64_t>(remaining[index(op)]); }
};

/// Search state of the blocking generator. Virtual levels are multisets of
/// loop prime factors (sorted); level_end[op][j] is the number of virtual
/// levels inside the operand's levels 0..j, recorded for finished levels.
struct PartialScheme {
  std::vector<std::vector<LoopFactor>> virtual_levels;
  std::vector<LoopFactor> remaining;
  std::array<std::vector<std::size_t>, kNumOperands> level_end;
  Roof roof;

  std::string key() const;
};

/// A complete blocking: every operand's level boundaries fall on virtual
/// level boundaries. Orders inside virtual levels are chosen later.
struct Blocking {
  std::vector<std::vector<LoopFactor>> virtual_levels;
  std::array<std::vector<std::size_t>, kNumOperands> level_end;

  MappingScheme to_mapping(const std::vector<std::vector<LoopFactor>>& ordered, const MemoryHierarchy& h,
                           const SpatialUnrolling& s) const;
  MappingScheme canonical(const MemoryHierarchy& h, const SpatialUnrolling& s) const {
    return to_mapping(virtual_levels, h, s);
  }
};

/// Fixed inputs of one generation run. Output capacity uses the final-sum
/// width only where the level is sure to hold final sums.
class TmgProblem {
 public:
  TmgProblem(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s, bool even_only = false);

  const LayerSpec& spec() const { return spec_; }
  const LayerSpec& padded() const { return padded_; }
  const MemoryHierarchy& hierarchy() const { return h_; }
  const SpatialUnrolling& unrolling() const { return s_; }
  bool even_only() const { return even_only_; }

  /// Temporal loop prime factors of the padded layer, sorted.
  const std::vector<LoopFactor>& lpfs() const { return lpfs_; }

  PartialScheme initial() const;
  /// Elements of `op` held per unit at level j for the given temporal extents.
  std::int64_t data_size(Operand op, std::size_t j, const DimSizes& temporal) const;
  /// True iff adding `comb` on top keeps every on-chip level within capacity.
  bool fits(const PartialScheme& ps, std::span<const LoopFactor> comb) const;
  /// All fitting sub-multisets of the remaining factors that cannot grow.
  std::vector<std::vector<LoopFactor>> maximal_combinations(const PartialScheme& ps) const;
  Roof roof_after(const PartialScheme& ps, std::span<const LoopFactor> comb) const;
  PartialScheme assign(const PartialScheme& ps, std::span<const LoopFactor> comb) const;
  /// Operand whose roof moves next, or nullopt when all roofs are on top.
  std::optional<Operand> advance_choice(const Roof& roof) const;
  PartialScheme advance(const PartialScheme& ps) const;
  PartialScheme advance(const PartialScheme& ps, Operand op) const;
  Blocking finalize(const PartialScheme& ps) const;
  /// Blocking of a partial scheme with the remaining factors placed as one
  /// extra virtual level on the top level of every operand.
  Blocking complete_on_top(const PartialScheme& ps) const;
  /// Moves each cut of the operands in `ops` up over the virtual levels
  /// right above it whose loops are all irrelevant to that operand. Such
  /// loops take no space, so capacities hold. Nullopt if nothing moved or,
  /// in even mode, the result is uneven.
  std::optional<Blocking> absorb(const Blocking& b, OperandSet ops) const;

 private:
  DimSizes extent_of(const PartialScheme& ps, std::size_t vls) const;
  /// Output elements are final sums only once no irrelevant factor can end
  /// up at or above the level.
  int precision_at(const PartialScheme& ps, Operand op, std::size_t j) const;
  Rational capacity_elements(const PartialScheme& ps, Operand op, std::size_t j) const;
  void advance_operand(PartialScheme& ps, Operand op) const;

  LayerSpec spec_, padded_;
  const MemoryHierarchy& h_;
  SpatialUnrolling s_;
  bool even_only_;
  std::vector<LoopFactor> lpfs_;
  std::array<std::vector<DimSizes>, kNumOperands> spatial_through_;  // per op, per level j: slots 0..j
  std::vector<bool> o_ir_spatial_above_;
};

Roof init_roof(const MemoryHierarchy& h, const SpatialUnrolling& s, const LayerSpec& spec);
Roof update_roof(const TmgProblem& p, const PartialScheme& ps, std::span<const LoopFactor> comb);
PartialScheme advance_roof(const TmgProblem& p, const PartialScheme& ps);

/// Every complete blocking reachable by assigning maximal fitting
/// combinations and advancing roofs, each followed by its absorbed variants
/// (see TmgProblem::absorb), deduplicated, in generation order.
std::vector<Blocking> generate_schemes(const TmgProblem& p);
std::vector<Blocking> generate_schemes(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                                       bool even_only = false);

/// Orders tried inside one virtual level by the heuristic: for each operand,
/// its relevant factors innermost and its irrelevant ones on top.
std::vector<std::vector<LoopFactor>> stationary_orders(std::span<const LoopFactor> vl);

struct SearchOptions {
  Strategy strategy = Strategy::heuristic;
  std::size_t beam = 100;
  double min_shared_utilization = 0.7;
  bool even_only = false;
  unsigned workers = 1;
  Objective objective = Objective::energy;
  bool collect_samples = false;
  /// Levels with nonempty temporal content here must match exactly.
  std::optional<MappingScheme> pinned;
};

struct SearchStats {
  std::int64_t blockings = 0;        ///< complete blockings generated
  std::int64_t valid_blockings = 0;  ///< passing capacity and utilization checks
  std::int64_t pruned_blockings = 0; ///< removed by the reuse rule
  std::int64_t evaluated = 0;        ///< complete schedules priced
  std::int64_t partial_evaluated = 0; ///< partial schemes priced (iterative only)
  double energy_min = 0, energy_max = 0;
  std::int64_t latency_min = 0, latency_max = 0;
};

struct Sample {
  double energy_pj;
  std::int64_t latency;
};

struct SearchResult {
  bool found = false;
  MappingScheme mapping;
  std::string mapping_text;
  CostReport cost;
  SearchStats stats;
  std::vector<Sample> samples;
};

SearchResult search(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s, const MacModel& mac,
                    const SearchOptions& opts);

SearchResult search_exhaustive(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                               const MacModel& mac, SearchOptions opts = {});
SearchResult search_heuristic(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                              const MacModel& mac, SearchOptions opts = {});
SearchResult search_iterative(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                              const MacModel& mac, SearchOptions opts = {});

}  // namespace memflow
