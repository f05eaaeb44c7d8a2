#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <boost/rational.hpp>

#include "memflow/mapping.hpp"
#include "memflow/workload.hpp"

namespace memflow {

using Rational = boost::rational<std::int64_t>;

enum class PrPattern : std::uint8_t { none, diagonal_broadcast, fifo_temporal, fifo_spatiotemporal };
std::string_view to_string(PrPattern p);

/// Loop-nest geometry of one operand. Loops are visited bottom-up as
/// slot 0, level 0, slot 1, level 1, ...; the cumulative extents below are
/// what every extracted metric is built from.
class OperandNest {
 public:
  OperandNest(const OperandMapping& m, Operand op, std::int64_t stride_x, std::int64_t stride_y);

  Operand operand() const { return op_; }
  std::size_t depth() const { return depth_; }

  /// Extent of all loops up to and including the temporal loops of level j.
  const DimSizes& through_level(std::size_t j) const { return through_level_[j]; }
  /// Extent of all loops up to and including spatial slot s.
  const DimSizes& through_slot(std::size_t s) const { return through_slot_[s]; }

  std::int64_t footprint(const DimSizes& extent) const;

  std::int64_t temporal_product(std::size_t j) const { return temporal_product_[j]; }
  std::int64_t temporal_ir_product(std::size_t j) const { return temporal_ir_[j]; }
  std::int64_t spatial_product(std::size_t s) const { return spatial_product_[s]; }
  std::int64_t spatial_ir_product(std::size_t s) const { return spatial_ir_[s]; }

  /// Product of temporal loops in levels 0..j.
  std::int64_t turnaround(std::size_t j) const;
  /// Product of temporal loops in levels p..top.
  std::int64_t temporal_from(std::size_t p) const;
  std::int64_t temporal_ir_from(std::size_t p) const;
  /// Number of units of memory level j (spatial slots j+1..depth).
  std::int64_t units(std::size_t j) const;
  std::int64_t duplicate_units(std::size_t j) const;
  /// Product of the irrelevant loops at the top of level j's temporal list.
  std::int64_t top_ir_product(std::size_t j) const { return top_ir_[j]; }
  /// Product of the relevant (r or pr) loops at the top of level j.
  std::int64_t top_r_product(std::size_t j) const { return top_r_[j]; }
  /// Extent of level j without its top run of relevant loops.
  const DimSizes& below_top_r(std::size_t j) const { return below_top_r_[j]; }

  /// Output only: values drained into level j are final sums.
  bool final_at(std::size_t j) const;

 private:
  Operand op_;
  std::size_t depth_;
  std::int64_t stride_x_, stride_y_;
  std::vector<DimSizes> through_level_, through_slot_, below_top_r_;
  std::vector<std::int64_t> temporal_product_, temporal_ir_, spatial_product_, spatial_ir_, top_ir_, top_r_;
};

enum class Direction : std::uint8_t {
  fill,   ///< parent -> child: operand data or partial sums read back
  drain,  ///< child -> parent: Output partial or final sums written back
};

/// One class of level-to-level traffic. The child of parent level p is level
/// p-1, or the MAC lanes when p == 0. Per event the parent-side count is the
/// union over all children of one parent unit (broadcast and spatial
/// reduction are counted once); the child-side count is per child unit.
struct Transfer {
  Operand op;
  std::size_t parent;
  Direction dir;
  std::int64_t events;         ///< per parent unit
  std::int64_t period_cycles;  ///< turnaround of the child (1 for MAC lanes)
  std::int64_t parent_units;
  std::int64_t child_units;    ///< 0 when the child is the MAC array
  std::int64_t parent_elements;
  std::int64_t child_elements;
  int precision_bits;
  bool skips_first_touch;  ///< Output fills skip periods whose sums start at zero

  bool child_is_mac() const { return parent == 0; }
  std::int64_t parent_total() const { return events * parent_units * parent_elements; }
  std::int64_t child_total() const { return events * child_units * child_elements; }
};

struct LevelInfo {
  std::int64_t data_size_unit = 0;
  std::int64_t data_size_total = 0;
  std::int64_t mac_ops = 0;
  std::int64_t turnaround_cycles = 0;
  Rational reuse_temporal{1};
  Rational reuse_spatial{1};
  Rational reuse_total{1};
  std::int64_t unit_count_total = 1;
  std::int64_t unit_count_duplicate = 1;
  std::int64_t unit_count_unique = 1;
  std::int64_t access_read = 0;
  std::int64_t access_write = 0;
  Rational req_bw_no_db{0};  ///< refill bits per cycle per unit
  Rational req_bw_db{0};
  std::int64_t top_ir_product = 1;
  int precision_bits = 0;
  bool final_output = false;
  PrPattern pr_pattern = PrPattern::none;
};

struct LoopInfoTable {
  std::array<std::vector<LevelInfo>, kNumOperands> levels;
  std::vector<Transfer> transfers;
  std::int64_t total_macs = 0;
  std::int64_t cycles = 0;  ///< product of all temporal loops

  const LevelInfo& at(Operand op, std::size_t j) const { return levels[index(op)].at(j); }
};

/// Extract every per-operand per-level metric. The mapping must be valid for
/// `spec` (see validate_mapping); `spec` supplies strides and precisions.
LoopInfoTable extract(const MappingScheme& m, const LayerSpec& spec);

/// All level-to-level transfer classes of one operand.
std::vector<Transfer> operand_transfers(const OperandNest& nest, const Precision& precision);

// Single-metric entry points. Level indices are per operand, 0 = innermost.
std::int64_t data_size_unit(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level);
std::int64_t data_size_total(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level);
std::int64_t mac_ops(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level);
std::int64_t turnaround_cycles(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level);

struct ReuseFactors {
  Rational temporal, spatial, total;
};
ReuseFactors reuse_factors(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level);

struct UnitCounts {
  std::int64_t total, duplicate, unique;
};
UnitCounts unit_counts(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level);

struct AccessCounts {
  std::int64_t reads, writes;
};
AccessCounts access_counts(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level);

/// Refill bandwidth of a level in bits per cycle per unit.
Rational required_bandwidth(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level,
                            bool double_buffered);

PrPattern detect_pr_pattern(const MappingScheme& m, std::size_t level);

}  // namespace memflow
