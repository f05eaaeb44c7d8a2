#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "memflow/workload.hpp"

namespace memflow {

enum class PortType : std::uint8_t { single_port, dual_port };

/// One bandwidth/cost option of a memory macro. Bandwidths are bits per
/// cycle and double as the word width used for access counting.
struct MemoryVariant {
  std::int64_t read_bw_bits = 0;
  std::int64_t write_bw_bits = 0;
  double read_energy_pj = 0.0;
  double write_energy_pj = 0.0;
  double area_um2 = 0.0;

  bool operator==(const MemoryVariant&) const = default;
};

struct MemoryPoolEntry {
  std::string name;
  std::int64_t size_bits = 0;
  std::vector<MemoryVariant> variants;
  std::vector<std::int64_t> allowed_unrolls = {1};
  PortType port = PortType::dual_port;
  bool double_buffer_capable = false;

  bool operator==(const MemoryPoolEntry&) const = default;
};

/// The unbounded off-chip top level. Energies are per bit.
struct OffChipMemory {
  std::string name = "DRAM";
  double read_energy_pj_per_bit = 1.0;
  double write_energy_pj_per_bit = 1.0;
  std::int64_t read_bw_bits = 1 << 20;
  std::int64_t write_bw_bits = 1 << 20;

  bool operator==(const OffChipMemory&) const = default;
};

struct MemoryPool {
  std::vector<MemoryPoolEntry> entries;
  OffChipMemory dram;
};

class OperandSet {
 public:
  constexpr OperandSet() = default;
  constexpr explicit OperandSet(std::uint8_t bits) : bits_(bits & 0x7) {}
  constexpr OperandSet(std::initializer_list<Operand> ops) {
    for (auto op : ops) insert(op);
  }
  constexpr void insert(Operand op) { bits_ |= static_cast<std::uint8_t>(1u << index(op)); }
  constexpr bool contains(Operand op) const { return (bits_ >> index(op)) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return (bits_ & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1); }
  constexpr std::uint8_t bits() const { return bits_; }
  std::string to_string() const;

  bool operator==(const OperandSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

inline constexpr OperandSet kAllOperandSet{0x7};

/// Spatial loops of the PE array. Each loop is one unrolled factor; several
/// loops may share one physical array axis.
struct SpatialUnrolling {
  std::vector<LoopFactor> loops;

  std::int64_t lanes() const;
  DimSizes per_dim() const;

  bool operator==(const SpatialUnrolling&) const = default;
};

struct MacModel {
  std::int64_t rows = 1;
  std::int64_t cols = 1;
  double mac_energy_pj = 1.0;

  std::int64_t size() const { return rows * cols; }
};

/// A physical memory level. `replication` is a bitmask over
/// SpatialUnrolling::loops naming the spatial loops this level is replicated
/// along; `unroll` must equal the product of those loops.
struct MemoryLevel {
  std::string name;
  MemoryPoolEntry entry;
  std::size_t variant = 0;
  std::int64_t unroll = 1;
  OperandSet serves;
  bool double_buffered = false;
  std::uint32_t replication = 0;
  bool off_chip = false;

  const MemoryVariant& active() const { return entry.variants.at(variant); }
  /// Bits per unit; zero means unbounded.
  std::int64_t capacity_bits() const { return off_chip ? 0 : entry.size_bits; }
  bool unbounded() const { return off_chip; }
  bool separate_ports() const { return off_chip || entry.port == PortType::dual_port || double_buffered; }
};

MemoryLevel make_off_chip_level(const OffChipMemory& dram);

/// Physical levels plus, per operand, the bottom-up chain of level indices.
/// Every chain ends at the shared off-chip level.
struct MemoryHierarchy {
  std::string name;
  std::vector<MemoryLevel> levels;
  std::array<std::vector<std::size_t>, kNumOperands> chains;

  std::size_t depth(Operand op) const { return chains[index(op)].size(); }
  const MemoryLevel& level(Operand op, std::size_t j) const { return levels.at(chains[index(op)].at(j)); }
  std::size_t physical(Operand op, std::size_t j) const { return chains[index(op)].at(j); }

  /// Canonical identity string, used for deterministic ordering and dedup.
  std::string key() const;
};

/// Area of all on-chip levels: area of the active variant times unroll.
double total_area(const MemoryHierarchy& h);

/// Structural checks. Returns human-readable violations, empty when valid.
std::vector<std::string> validate_hierarchy(const MemoryHierarchy& h);

/// Same plus consistency with a spatial unrolling and MAC array.
std::vector<std::string> validate_hierarchy(const MemoryHierarchy& h, const SpatialUnrolling& s, const MacModel& mac);

/// Per-operand spatial slots derived from the levels' replication masks.
/// Slot 0 holds the loops unrolled directly over the MAC lanes; slot j+1
/// holds the loops replicating memory level j. Size is depth(op) + 1.
std::vector<std::vector<LoopFactor>> spatial_slots(const MemoryHierarchy& h, const SpatialUnrolling& s, Operand op);

}  // namespace memflow
