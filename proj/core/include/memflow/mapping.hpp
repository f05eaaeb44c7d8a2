#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "memflow/architecture.hpp"
#include "memflow/workload.hpp"

namespace memflow {

/// Loop assignment of one operand: temporal loops per memory level
/// (bottom-up, innermost first within a level) and spatial loops per slot.
/// spatial[0] unrolls the MAC lanes, spatial[j+1] replicates memory level j.
struct OperandMapping {
  std::vector<std::vector<LoopFactor>> temporal;
  std::vector<std::vector<LoopFactor>> spatial;

  std::size_t depth() const { return temporal.size(); }
  bool operator==(const OperandMapping&) const = default;
};

/// Memory-centric dataflow: one nested-loop set per operand. The temporal
/// loops of all operands form one common sequence; each operand cuts it into
/// its own levels.
struct MappingScheme {
  std::array<OperandMapping, kNumOperands> operands;

  const OperandMapping& of(Operand op) const { return operands[index(op)]; }
  OperandMapping& of(Operand op) { return operands[index(op)]; }

  bool operator==(const MappingScheme&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Temporal loops of one operand flattened innermost-first.
std::vector<LoopFactor> temporal_sequence(const OperandMapping& m);

/// Per-level cut points into the flattened sequence: cut[j] is one past the
/// last loop of level j.
std::vector<std::size_t> level_cuts(const OperandMapping& m);

/// Product of all loop factors (temporal and spatial) per dimension.
DimSizes mapped_dims(const OperandMapping& m);

/// Layer with each spatially unrolled dimension rounded up to a multiple of
/// its unrolling. Equals `spec` when every spatial factor divides its bound.
LayerSpec padded_layer(const LayerSpec& spec, const SpatialUnrolling& s);

/// Assemble a scheme from a common temporal sequence, per-operand cuts and
/// spatial slots derived from the hierarchy.
MappingScheme build_mapping(std::span<const LoopFactor> sequence,
                            const std::array<std::vector<std::size_t>, kNumOperands>& cuts,
                            const MemoryHierarchy& h, const SpatialUnrolling& s);

/// True iff every physical level shared by several operands cuts the common
/// temporal sequence at the same point for each of them.
bool is_even(const MappingScheme& m, const MemoryHierarchy& h);

struct MappingCheckOptions {
  /// Minimum fill of shared on-chip levels that have loops assigned above
  /// them. Private levels have no minimum.
  double min_shared_utilization = 0.0;
  bool check_capacity = true;
};

/// Checks coverage, common temporal order, level counts, spatial
/// consistency and per-level capacity. Returns violations, empty when valid.
std::vector<std::string> validate_mapping(const MappingScheme& m, const LayerSpec& spec, const MemoryHierarchy& h,
                                          const SpatialUnrolling& s, const MappingCheckOptions& opts = {});

/// All distinct orderings of a multiset of loops, in lexicographic order.
std::vector<std::vector<LoopFactor>> enumerate_permutations(std::span<const LoopFactor> loops);

/// Canonical text form. Levels are listed bottom-up; temporal loops are
/// written "DIM f" innermost first, spatial loops after '/' as "Au|Bu fa|fb".
std::string to_text(const MappingScheme& m);
MappingScheme parse_mapping(std::string_view text);

std::string loops_to_text(std::span<const LoopFactor> loops);
std::string spatial_to_text(std::span<const LoopFactor> loops);

}  // namespace memflow
