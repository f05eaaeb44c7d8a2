#include "memflow/architecture.hpp"

#include <algorithm>
#include <sstream>

namespace memflow {

std::string OperandSet::to_string() const {
  std::string s;
  for (auto op : kAllOperands)
    if (contains(op)) s += memflow::to_string(op);
  return s;
}

std::int64_t SpatialUnrolling::lanes() const {
  std::int64_t n = 1;
  for (const auto& l : loops) n *= l.factor;
  return n;
}

DimSizes SpatialUnrolling::per_dim() const {
  DimSizes d = unit_dims();
  for (const auto& l : loops) d[index(l.dim)] *= l.factor;
  return d;
}

MemoryLevel make_off_chip_level(const OffChipMemory& dram) {
  MemoryLevel top;
  top.name = dram.name;
  top.entry.name = dram.name;
  top.entry.size_bits = 0;
  top.entry.variants = {MemoryVariant{dram.read_bw_bits, dram.write_bw_bits, dram.read_energy_pj_per_bit,
                                      dram.write_energy_pj_per_bit, 0.0}};
  top.entry.allowed_unrolls = {1};
  top.entry.port = PortType::dual_port;
  top.serves = kAllOperandSet;
  top.off_chip = true;
  return top;
}

std::string MemoryHierarchy::key() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    if (l.off_chip) continue;
    os << l.entry.name << ':' << l.entry.size_bits << "/v" << l.variant << "/x" << l.unroll << "/r" << l.replication
       << '/' << l.serves.to_string() << (l.double_buffered ? "/db" : "") << ';';
  }
  for (auto op : kAllOperands) {
    os << to_string(op) << '[';
    for (auto p : chains[index(op)]) os << p << ',';
    os << ']';
  }
  return os.str();
}

double total_area(const MemoryHierarchy& h) {
  double area = 0.0;
  for (const auto& l : h.levels) {
    if (l.off_chip || l.entry.variants.empty()) continue;
    area += l.active().area_um2 * static_cast<double>(l.unroll);
  }
  return area;
}

std::vector<std::string> validate_hierarchy(const MemoryHierarchy& h) {
  std::vector<std::string> errs;
  auto err = [&](const std::string& where, const std::string& what) { errs.push_back(where + ": " + what); };

  std::size_t tops = 0;
  std::size_t top_index = h.levels.size();
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    const auto& l = h.levels[i];
    const std::string where = "level " + std::to_string(i) + " (" + l.name + ")";
    if (l.off_chip) {
      ++tops;
      top_index = i;
      if (l.serves != kAllOperandSet) err(where, "off-chip top level must serve W, I and O");
      if (l.replication != 0 || l.unroll != 1) err(where, "off-chip level cannot be unrolled");
      continue;
    }
    if (l.entry.size_bits <= 0) err(where, "size must be positive");
    if (l.entry.variants.empty()) {
      err(where, "no bandwidth variants");
    } else {
      if (l.variant >= l.entry.variants.size()) err(where, "variant index out of range");
      for (const auto& v : l.entry.variants) {
        if (v.read_bw_bits <= 0 || v.write_bw_bits <= 0) err(where, "bandwidths must be positive");
        if (v.read_energy_pj <= 0 || v.write_energy_pj <= 0) err(where, "access energies must be positive");
        if (v.area_um2 <= 0) err(where, "area must be positive");
      }
    }
    if (std::find(l.entry.allowed_unrolls.begin(), l.entry.allowed_unrolls.end(), l.unroll) ==
        l.entry.allowed_unrolls.end())
      err(where, "unroll " + std::to_string(l.unroll) + " not in allowed unrolls");
    if (l.double_buffered && !l.entry.double_buffer_capable) err(where, "double buffering not supported by entry");
    if (l.serves.empty()) err(where, "serves no operand");
  }
  if (tops != 1) errs.push_back("hierarchy must contain exactly one off-chip top level");

  for (auto op : kAllOperands) {
    const auto& chain = h.chains[index(op)];
    const std::string where = "operand " + std::string(to_string(op));
    if (chain.empty()) {
      err(where, "has no memory levels");
      continue;
    }
    for (std::size_t j = 0; j < chain.size(); ++j) {
      if (chain[j] >= h.levels.size()) {
        err(where, "level reference out of range");
        continue;
      }
      if (!h.levels[chain[j]].serves.contains(op))
        err(where, "chain uses level " + h.levels[chain[j]].name + " which does not serve it");
      if (h.levels[chain[j]].off_chip && j + 1 != chain.size()) err(where, "off-chip level must be outermost");
      if (std::count(chain.begin(), chain.end(), chain[j]) != 1)
        err(where, "level " + h.levels[chain[j]].name + " appears more than once");
    }
    if (tops == 1 && chain.back() != top_index) err(where, "chain must end at the off-chip level");
  }
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    for (auto op : kAllOperands) {
      const auto& chain = h.chains[index(op)];
      const bool in_chain = std::find(chain.begin(), chain.end(), i) != chain.end();
      if (h.levels[i].serves.contains(op) && !in_chain)
        err("level " + std::to_string(i) + " (" + h.levels[i].name + ")",
            "serves " + std::string(to_string(op)) + " but is missing from its chain");
    }
  }
  return errs;
}

std::vector<std::string> validate_hierarchy(const MemoryHierarchy& h, const SpatialUnrolling& s, const MacModel& mac) {
  auto errs = validate_hierarchy(h);
  if (s.lanes() > mac.size())
    errs.push_back("spatial unrolling uses " + std::to_string(s.lanes()) + " lanes, array has " +
                   std::to_string(mac.size()));
  const std::uint32_t all = s.loops.size() >= 32 ? 0xffffffffu : ((1u << s.loops.size()) - 1u);
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    const auto& l = h.levels[i];
    const std::string where = "level " + std::to_string(i) + " (" + l.name + ")";
    if (l.replication & ~all) {
      errs.push_back(where + ": replication references unknown spatial loop");
      continue;
    }
    std::int64_t prod = 1;
    for (std::size_t b = 0; b < s.loops.size(); ++b)
      if (l.replication & (1u << b)) prod *= s.loops[b].factor;
    if (prod != l.unroll)
      errs.push_back(where + ": unroll " + std::to_string(l.unroll) + " differs from replicating loops product " +
                     std::to_string(prod));
  }
  for (auto op : kAllOperands) {
    const auto& chain = h.chains[index(op)];
    for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
      if (chain[j] >= h.levels.size() || chain[j + 1] >= h.levels.size()) continue;
      const auto lo = h.levels[chain[j]].replication;
      const auto hi = h.levels[chain[j + 1]].replication;
      if ((lo & hi) != hi)
        errs.push_back("operand " + std::string(to_string(op)) + ": level " + h.levels[chain[j + 1]].name +
                       " is replicated along loops that " + h.levels[chain[j]].name + " is not");
    }
  }
  return errs;
}

std::vector<std::vector<LoopFactor>> spatial_slots(const MemoryHierarchy& h, const SpatialUnrolling& s, Operand op) {
  const auto& chain = h.chains[index(op)];
  std::vector<std::vector<LoopFactor>> slots(chain.size() + 1);
  const std::uint32_t all = s.loops.size() >= 32 ? 0xffffffffu : ((1u << s.loops.size()) - 1u);
  auto mask_at = [&](std::size_t j) -> std::uint32_t {
    return j < chain.size() ? h.levels[chain[j]].replication : 0u;
  };
  for (std::size_t slot = 0; slot <= chain.size(); ++slot) {
    const std::uint32_t below = slot == 0 ? all : mask_at(slot - 1);
    const std::uint32_t mask = below & ~mask_at(slot);
    for (std::size_t b = 0; b < s.loops.size(); ++b)
      if (mask & (1u << b)) slots[slot].push_back(s.loops[b]);
  }
  return slots;
}

}  // namespace memflow
