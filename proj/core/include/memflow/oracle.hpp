#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "memflow/architecture.hpp"
#include "memflow/mapping.hpp"
#include "memflow/workload.hpp"

namespace memflow {

struct OracleOptions {
  std::int64_t max_macs = 1'000'000;
  /// Also replay the recorded transfers against the hierarchy's bandwidths.
  bool replay_latency = false;
};

struct SimLevel {
  std::int64_t reads = 0;   ///< element accesses
  std::int64_t writes = 0;
  std::int64_t peak_occupancy = 0;  ///< elements summed over all units
};

struct SimTrace {
  std::array<std::vector<SimLevel>, kNumOperands> levels;
  std::int64_t macs = 0;            ///< lane-cycles executed, padding included
  std::int64_t compute_cycles = 0;
  std::vector<std::int64_t> stall_per_level;  ///< filled by the latency replay
  std::int64_t total_cycles = 0;

  const SimLevel& at(Operand op, std::size_t j) const { return levels[static_cast<std::size_t>(op)].at(j); }
};

/// Executes the mapping as literal nested loops over cycles and MAC lanes.
/// Every level keeps exactly the tile its blocking dictates; each change of
/// tile moves the tile's distinct elements, counted per unit, with
/// broadcasts and reductions counted once on the parent side. Output
/// partial sums are read back only for elements a parent unit has seen in an
/// earlier period. Throws std::length_error above the MAC cap and
/// std::invalid_argument for malformed mappings.
SimTrace simulate(const MappingScheme& m, const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                  const OracleOptions& opts = {});

}  // namespace memflow
