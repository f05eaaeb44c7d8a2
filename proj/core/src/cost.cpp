#include "memflow/cost.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace memflow {

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::energy: return "energy";
    case Objective::latency: return "latency";
    case Objective::edp: return "edp";
  }
  return "?";
}

std::optional<Objective> parse_objective(std::string_view s) {
  for (auto o : {Objective::energy, Objective::latency, Objective::edp})
    if (s == to_string(o)) return o;
  return std::nullopt;
}

std::int64_t CostReport::stall_temporal_total() const {
  std::int64_t n = 0;
  for (auto v : stall_temporal) n += v;
  return n;
}

double CostReport::objective(Objective o) const {
  switch (o) {
    case Objective::energy: return energy_total_pj;
    case Objective::latency: return static_cast<double>(latency_total);
    case Objective::edp: return energy_total_pj * static_cast<double>(latency_total);
  }
  return energy_total_pj;
}

double level_energy(std::int64_t reads, std::int64_t writes, const MemoryVariant& v) {
  return static_cast<double>(reads) * v.read_energy_pj + static_cast<double>(writes) * v.write_energy_pj;
}

double spatial_utilization(const SpatialUnrolling& s, const LayerSpec& spec) {
  const auto per_dim = s.per_dim();
  double u = 1.0;
  for (auto d : kAllDims) {
    const auto f = per_dim[index(d)];
    if (f <= 1) continue;
    const auto bound = spec.dim(d);
    u *= static_cast<double>(bound) / static_cast<double>(f * ((bound + f - 1) / f));
  }
  return u;
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

/// Word (or bit, off chip) accesses for one side of a transfer.
std::int64_t side_accesses(const MemoryLevel& level, bool write, std::int64_t events, std::int64_t units,
                           std::int64_t elements, int precision) {
  const std::int64_t bits = elements * precision;
  if (level.off_chip) return events * units * bits;
  const auto& v = level.active();
  return events * units * ceil_div(bits, write ? v.write_bw_bits : v.read_bw_bits);
}

std::vector<LevelEnergy> memory_energy(const MappingScheme& m, const LoopInfoTable& info, const MemoryHierarchy& h) {
  std::vector<LevelEnergy> out;
  std::array<std::size_t, kNumOperands> base{};
  for (auto op : kAllOperands) {
    base[index(op)] = out.size();
    for (std::size_t j = 0; j < m.of(op).depth(); ++j)
      out.push_back(LevelEnergy{op, j, h.level(op, j).name});
  }
  for (const auto& t : info.transfers) {
    const bool fill = t.dir == Direction::fill;
    auto& parent = out[base[index(t.op)] + t.parent];
    const auto& pl = h.level(t.op, t.parent);
    const auto pa = side_accesses(pl, !fill, t.events, t.parent_units, t.parent_elements, t.precision_bits);
    if (fill) {
      parent.element_reads += t.parent_total();
      parent.word_reads += pa;
    } else {
      parent.element_writes += t.parent_total();
      parent.word_writes += pa;
    }
    if (t.child_is_mac()) continue;
    auto& child = out[base[index(t.op)] + t.parent - 1];
    const auto& cl = h.level(t.op, t.parent - 1);
    const auto ca = side_accesses(cl, fill, t.events, t.child_units, t.child_elements, t.precision_bits);
    if (fill) {
      child.element_writes += t.child_total();
      child.word_writes += ca;
    } else {
      child.element_reads += t.child_total();
      child.word_reads += ca;
    }
  }
  for (auto& e : out) {
    const auto& v = h.level(e.op, e.level).active();
    e.read_pj = static_cast<double>(e.word_reads) * v.read_energy_pj;
    e.write_pj = static_cast<double>(e.word_writes) * v.write_energy_pj;
  }
  return out;
}

}  // namespace

std::int64_t event_stall(const MemoryHierarchy& h, std::span<const PortDemand> demands,
                         std::span<std::int64_t> per_level, std::int64_t count) {
  struct Port {
    std::int64_t bits = 0;
    std::int64_t window = 0;
    bool used = false;
  };
  struct LevelPorts {
    Port r, w;
  };
  std::vector<LevelPorts> ports(h.levels.size());
  for (const auto& d : demands) {
    auto& p = d.write ? ports[d.level].w : ports[d.level].r;
    p.bits += d.bits;
    p.window = p.used ? std::min(p.window, d.window) : d.window;
    p.used = true;
  }
  std::int64_t total = 0;
  for (std::size_t i = 0; i < ports.size(); ++i) {
    const auto& lp = ports[i];
    if (!lp.r.used && !lp.w.used) continue;
    const auto& level = h.levels[i];
    const auto& v = level.active();
    const std::int64_t rc = lp.r.used ? ceil_div(lp.r.bits, v.read_bw_bits) : 0;
    const std::int64_t wc = lp.w.used ? ceil_div(lp.w.bits, v.write_bw_bits) : 0;
    std::int64_t stall = 0;
    if (level.separate_ports()) {
      if (lp.r.used) stall = std::max(stall, rc - lp.r.window);
      if (lp.w.used) stall = std::max(stall, wc - lp.w.window);
    } else {
      std::int64_t window = lp.r.used ? lp.r.window : lp.w.window;
      if (lp.r.used && lp.w.used) window = std::min(lp.r.window, lp.w.window);
      stall = std::max<std::int64_t>(0, rc + wc - window);
    }
    if (stall > 0) {
      total += stall;
      if (!per_level.empty()) per_level[i] += stall * count;
    }
  }
  return total;
}

std::int64_t transfer_window(const Transfer& t, const MemoryHierarchy& h, const LoopInfoTable& info) {
  if (t.child_is_mac()) return 1;
  const auto& li = info.at(t.op, t.parent - 1);
  if (h.level(t.op, t.parent - 1).double_buffered) return li.turnaround_cycles;
  return li.turnaround_cycles / li.top_ir_product;
}

std::vector<std::int64_t> temporal_stalls(const MappingScheme& m, const LoopInfoTable& info,
                                          const MemoryHierarchy& h) {
  std::vector<std::int64_t> per_level(h.levels.size(), 0);
  const auto seq = temporal_sequence(m.of(Operand::W));
  const std::size_t n = seq.size();

  struct Class {
    const Transfer* t;
    std::size_t cut;
    std::int64_t window;
  };
  std::vector<Class> classes;
  for (const auto& t : info.transfers) {
    const auto cuts = level_cuts(m.of(t.op));
    classes.push_back({&t, t.parent == 0 ? 0 : cuts[t.parent - 1], transfer_window(t, h, info)});
  }

  std::vector<PortDemand> demands;
  // k: innermost nonzero digit of the cycle counter (n at t=0 and at the end).
  // partial: some Output-irrelevant digit is nonzero.
  auto charge = [&](std::size_t k, bool partial, bool start, bool end, std::int64_t count) {
    if (count == 0) return;
    demands.clear();
    for (const auto& c : classes) {
      if (k < c.cut) continue;
      const auto& t = *c.t;
      const bool fill = t.dir == Direction::fill;
      if (fill && (end || (t.skips_first_touch && !partial))) continue;
      if (!fill && start) continue;
      demands.push_back({h.physical(t.op, t.parent), !fill, t.parent_elements * t.precision_bits, c.window});
      if (!t.child_is_mac())
        demands.push_back({h.physical(t.op, t.parent - 1), fill, t.child_elements * t.precision_bits, c.window});
    }
    event_stall(h, demands, per_level, count);
  };

  charge(n, false, true, false, 1);
  for (std::size_t k = 0; k < n; ++k) {
    std::int64_t all = seq[k].factor - 1, fresh = seq[k].factor - 1;
    const bool k_ir = is_irrelevant(seq[k].dim, Operand::O);
    for (std::size_t i = k + 1; i < n; ++i) {
      all *= seq[i].factor;
      if (!is_irrelevant(seq[i].dim, Operand::O)) fresh *= seq[i].factor;
    }
    if (k_ir) {
      charge(k, true, false, false, all);
    } else {
      charge(k, false, false, false, fresh);
      charge(k, true, false, false, all - fresh);
    }
  }
  charge(n, false, false, true, 1);
  return per_level;
}

std::int64_t effective_memory_size(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  const OperandNest nest(m.of(op), op, spec.stride_x, spec.stride_y);
  if (level >= nest.depth()) throw std::out_of_range("level out of range");
  std::int64_t elements = nest.footprint(nest.through_level(level));
  if (nest.top_r_product(level) > 1)
    elements = std::min(elements, 2 * nest.footprint(nest.below_top_r(level)));
  return elements * spec.precision.bits(op, nest.final_at(level));
}

double energy_only(const MappingScheme& m, const LayerSpec& spec, const LoopInfoTable& info, const MemoryHierarchy& h,
                   const MacModel& mac) {
  double e = static_cast<double>(spec.total_macs()) * mac.mac_energy_pj;
  for (const auto& le : memory_energy(m, info, h)) e += le.total_pj();
  return e;
}

CostReport evaluate_cost(const MappingScheme& m, const LayerSpec& spec, const LoopInfoTable& info,
                         const MemoryHierarchy& h, const SpatialUnrolling& s, const MacModel& mac) {
  CostReport r;
  r.total_macs = spec.total_macs();
  r.mac_energy_pj = static_cast<double>(r.total_macs) * mac.mac_energy_pj;
  r.energy_breakdown = memory_energy(m, info, h);
  r.energy_total_pj = r.mac_energy_pj;
  for (const auto& le : r.energy_breakdown) r.energy_total_pj += le.total_pj();
  r.area_um2 = total_area(h);

  r.cycles_mapped = info.cycles;
  r.latency_ideal = (r.total_macs + mac.size() - 1) / mac.size();
  r.stall_spatial = r.cycles_mapped - r.latency_ideal;
  r.stall_temporal = temporal_stalls(m, info, h);
  r.latency_total = r.cycles_mapped + r.stall_temporal_total();
  r.utilization = static_cast<double>(r.total_macs) /
                  (static_cast<double>(mac.size()) * static_cast<double>(r.latency_total));
  r.spatial_utilization = spatial_utilization(s, spec);

  for (auto op : kAllOperands) {
    const OperandNest nest(m.of(op), op, spec.stride_x, spec.stride_y);
    for (std::size_t j = 0; j < nest.depth(); ++j) {
      if (h.level(op, j).off_chip) continue;
      const auto& li = info.at(op, j);
      EffectiveSize es{op, j};
      es.allocated_bits = li.data_size_unit * li.precision_bits;
      std::int64_t elements = li.data_size_unit;
      if (nest.top_r_product(j) > 1) elements = std::min(elements, 2 * nest.footprint(nest.below_top_r(j)));
      es.effective_bits = elements * li.precision_bits;
      r.effective_sizes.push_back(es);
    }
  }
  return r;
}

CostReport evaluate_cost(const MappingScheme& m, const LayerSpec& spec, const MemoryHierarchy& h,
                         const SpatialUnrolling& s, const MacModel& mac) {
  return evaluate_cost(m, spec, extract(m, spec), h, s, mac);
}

std::string breakdown_dsv(const CostReport& r, char delim) {
  std::ostringstream os;
  os << "operand" << delim << "level" << delim << "memory" << delim << "element_reads" << delim << "element_writes"
     << delim << "word_reads" << delim << "word_writes" << delim << "read_pj" << delim << "write_pj" << delim
     << "total_pj\n";
  os.precision(17);
  for (const auto& e : r.energy_breakdown)
    os << to_string(e.op) << delim << e.level << delim << e.memory << delim << e.element_reads << delim
       << e.element_writes << delim << e.word_reads << delim << e.word_writes << delim << e.read_pj << delim
       << e.write_pj << delim << e.total_pj() << '\n';
  os << "MAC" << delim << delim << delim << r.total_macs << delim << delim << delim << delim << delim << delim
     << r.mac_energy_pj << '\n';
  return os.str();
}

}  // namespace memflow
