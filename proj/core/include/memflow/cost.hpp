#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memflow/architecture.hpp"
#include "memflow/extractor.hpp"
#include "memflow/mapping.hpp"

namespace memflow {

enum class Objective : std::uint8_t { energy, latency, edp };
std::string_view to_string(Objective o);
std::optional<Objective> parse_objective(std::string_view s);

struct LevelEnergy {
  Operand op;
  std::size_t level;
  std::string memory;
  std::int64_t element_reads = 0;
  std::int64_t element_writes = 0;
  std::int64_t word_reads = 0;   ///< bits for the off-chip level
  std::int64_t word_writes = 0;
  double read_pj = 0.0;
  double write_pj = 0.0;

  double total_pj() const { return read_pj + write_pj; }
};

struct EffectiveSize {
  Operand op;
  std::size_t level;
  std::int64_t allocated_bits = 0;
  std::int64_t effective_bits = 0;

  double gatable_fraction() const {
    return allocated_bits == 0 ? 0.0 : 1.0 - static_cast<double>(effective_bits) / static_cast<double>(allocated_bits);
  }
};

struct CostReport {
  double energy_total_pj = 0.0;
  double mac_energy_pj = 0.0;
  std::vector<LevelEnergy> energy_breakdown;
  double area_um2 = 0.0;

  std::int64_t total_macs = 0;
  std::int64_t cycles_mapped = 0;  ///< product of all temporal loops
  std::int64_t latency_ideal = 0;
  std::int64_t stall_spatial = 0;
  std::vector<std::int64_t> stall_temporal;  ///< per physical level
  std::int64_t latency_total = 0;
  double utilization = 0.0;
  double spatial_utilization = 0.0;

  std::vector<EffectiveSize> effective_sizes;

  std::int64_t stall_temporal_total() const;
  double objective(Objective o) const;
};

/// Energy of one level given element-independent word access counts.
double level_energy(std::int64_t reads, std::int64_t writes, const MemoryVariant& v);

/// Fraction of spatial lanes doing useful work: product over unrolled dims of
/// bound / (factor * ceil(bound / factor)).
double spatial_utilization(const SpatialUnrolling& s, const LayerSpec& spec);

/// Traffic seen by one unit of a physical level at one instant.
struct PortDemand {
  std::size_t level;
  bool write;
  std::int64_t bits;
  std::int64_t window;  ///< cycles available before the computation waits
};

/// Stall cycles caused by one instant's demands. Single-port levels without
/// double buffering serve reads and writes on one port in sequence; other
/// levels have independent read and write ports. Stalls of different levels
/// add up. `per_level` (sized to h.levels) is incremented by `count` times
/// each level's stall.
std::int64_t event_stall(const MemoryHierarchy& h, std::span<const PortDemand> demands,
                         std::span<std::int64_t> per_level, std::int64_t count = 1);

/// Cycles a child may take for a transfer: one for the MAC lanes, the full
/// child turnaround when the child is double buffered, else the turnaround
/// divided by the child's top-ir product.
std::int64_t transfer_window(const Transfer& t, const MemoryHierarchy& h, const LoopInfoTable& info);

/// Temporal stall cycles per physical level.
std::vector<std::int64_t> temporal_stalls(const MappingScheme& m, const LoopInfoTable& info,
                                          const MemoryHierarchy& h);

/// Smallest capacity in bits that keeps the level's refill bandwidth
/// unchanged. A run of relevant loops on top lets the level rotate through
/// its slices: two slices suffice, one in use and one being refilled.
std::int64_t effective_memory_size(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level);

/// Full price of a mapping. `info` must be extract(m, spec).
CostReport evaluate_cost(const MappingScheme& m, const LayerSpec& spec, const LoopInfoTable& info,
                         const MemoryHierarchy& h, const SpatialUnrolling& s, const MacModel& mac);
CostReport evaluate_cost(const MappingScheme& m, const LayerSpec& spec, const MemoryHierarchy& h,
                         const SpatialUnrolling& s, const MacModel& mac);

/// Energy-only price, skipping latency and effective sizes.
double energy_only(const MappingScheme& m, const LayerSpec& spec, const LoopInfoTable& info, const MemoryHierarchy& h,
                   const MacModel& mac);

/// Per (operand, level) breakdown as delimiter-separated values with a header.
std::string breakdown_dsv(const CostReport& r, char delim = ',');

}  // namespace memflow
