#include "memflow/extractor.hpp"

#include <stdexcept>

namespace memflow {

std::string_view to_string(PrPattern p) {
  switch (p) {
    case PrPattern::none: return "none";
    case PrPattern::diagonal_broadcast: return "diagonal_broadcast";
    case PrPattern::fifo_temporal: return "fifo_temporal";
    case PrPattern::fifo_spatiotemporal: return "fifo_spatiotemporal";
  }
  return "?";
}

namespace {

void multiply(DimSizes& e, const LoopFactor& l) { e[index(l.dim)] *= l.factor; }

}  // namespace

OperandNest::OperandNest(const OperandMapping& m, Operand op, std::int64_t stride_x, std::int64_t stride_y)
    : op_(op), depth_(m.temporal.size()), stride_x_(stride_x), stride_y_(stride_y) {
  if (m.spatial.size() != depth_ + 1)
    throw std::invalid_argument("operand mapping needs depth+1 spatial slots");
  through_level_.resize(depth_);
  through_slot_.resize(depth_ + 1);
  below_top_r_.resize(depth_);
  temporal_product_.assign(depth_, 1);
  temporal_ir_.assign(depth_, 1);
  top_ir_.assign(depth_, 1);
  top_r_.assign(depth_, 1);
  spatial_product_.assign(depth_ + 1, 1);
  spatial_ir_.assign(depth_ + 1, 1);

  DimSizes e = unit_dims();
  for (std::size_t s = 0; s <= depth_; ++s) {
    for (const auto& l : m.spatial[s]) {
      multiply(e, l);
      spatial_product_[s] *= l.factor;
      if (is_irrelevant(l.dim, op)) spatial_ir_[s] *= l.factor;
    }
    through_slot_[s] = e;
    if (s == depth_) break;
    const auto& level = m.temporal[s];
    for (const auto& l : level) {
      multiply(e, l);
      temporal_product_[s] *= l.factor;
      if (is_irrelevant(l.dim, op)) temporal_ir_[s] *= l.factor;
    }
    through_level_[s] = e;

    // Outermost run of irrelevant loops, and outermost run of relevant ones.
    DimSizes trimmed = e;
    bool ir_run = true, r_run = true;
    for (auto it = level.rbegin(); it != level.rend(); ++it) {
      const bool ir = is_irrelevant(it->dim, op);
      ir_run = ir_run && ir;
      r_run = r_run && !ir;
      if (ir_run) top_ir_[s] *= it->factor;
      if (r_run) {
        top_r_[s] *= it->factor;
        trimmed[index(it->dim)] /= it->factor;
      }
      if (!ir_run && !r_run) break;
    }
    below_top_r_[s] = trimmed;
  }
}

std::int64_t OperandNest::footprint(const DimSizes& extent) const {
  return memflow::footprint(op_, extent, stride_x_, stride_y_);
}

std::int64_t OperandNest::turnaround(std::size_t j) const {
  std::int64_t n = 1;
  for (std::size_t i = 0; i <= j && i < depth_; ++i) n *= temporal_product_[i];
  return n;
}

std::int64_t OperandNest::temporal_from(std::size_t p) const {
  std::int64_t n = 1;
  for (std::size_t i = p; i < depth_; ++i) n *= temporal_product_[i];
  return n;
}

std::int64_t OperandNest::temporal_ir_from(std::size_t p) const {
  std::int64_t n = 1;
  for (std::size_t i = p; i < depth_; ++i) n *= temporal_ir_[i];
  return n;
}

std::int64_t OperandNest::units(std::size_t j) const {
  std::int64_t n = 1;
  for (std::size_t s = j + 1; s <= depth_; ++s) n *= spatial_product_[s];
  return n;
}

std::int64_t OperandNest::duplicate_units(std::size_t j) const {
  std::int64_t n = 1;
  for (std::size_t s = j + 1; s <= depth_; ++s) n *= spatial_ir_[s];
  return n;
}

bool OperandNest::final_at(std::size_t j) const {
  return op_ == Operand::O && temporal_ir_from(j) == 1 && duplicate_units(j) == 1;
}

std::vector<Transfer> operand_transfers(const OperandNest& nest, const Precision& precision) {
  std::vector<Transfer> out;
  const Operand op = nest.operand();
  for (std::size_t p = 0; p < nest.depth(); ++p) {
    Transfer t{};
    t.op = op;
    t.parent = p;
    t.events = nest.temporal_from(p);
    t.period_cycles = p == 0 ? 1 : nest.turnaround(p - 1);
    t.parent_units = nest.units(p);
    t.child_units = p == 0 ? 0 : nest.units(p - 1);
    t.parent_elements = nest.footprint(nest.through_slot(p));
    t.child_elements = p == 0 ? 0 : nest.footprint(nest.through_level(p - 1));
    t.skips_first_touch = false;
    if (op != Operand::O) {
      t.dir = Direction::fill;
      t.precision_bits = precision.bits(op);
      out.push_back(t);
      continue;
    }
    Transfer drain = t;
    drain.dir = Direction::drain;
    drain.precision_bits = precision.bits(op, nest.final_at(p));
    out.push_back(drain);

    // Partial sums are read back in every child period except those where
    // every irrelevant loop above the child is still at its first index.
    Transfer fill = t;
    fill.dir = Direction::fill;
    fill.events = t.events - t.events / nest.temporal_ir_from(p);
    fill.precision_bits = precision.bits(op, false);
    fill.skips_first_touch = true;
    if (fill.events > 0) out.push_back(fill);
  }
  return out;
}

namespace {

PrPattern pr_pattern_of(const OperandMapping& m, std::size_t level) {
  if (level >= m.temporal.size()) throw std::out_of_range("level out of range");
  auto has = [](const std::vector<LoopFactor>& v, LoopDim d) {
    for (const auto& l : v)
      if (l.dim == d) return true;
    return false;
  };
  const auto& spatial = m.spatial[level];
  const auto& temporal = m.temporal[level];
  constexpr std::array<std::array<LoopDim, 2>, 2> pairs = {{{LoopDim::OX, LoopDim::FX}, {LoopDim::OY, LoopDim::FY}}};
  for (const auto& pr : pairs)
    if (has(spatial, pr[0]) && has(spatial, pr[1])) return PrPattern::diagonal_broadcast;
  for (const auto& pr : pairs)
    if ((has(spatial, pr[0]) && has(temporal, pr[1])) || (has(spatial, pr[1]) && has(temporal, pr[0])))
      return PrPattern::fifo_spatiotemporal;
  for (const auto& pr : pairs)
    if (has(temporal, pr[0]) && has(temporal, pr[1])) return PrPattern::fifo_temporal;
  return PrPattern::none;
}

void add_access(LoopInfoTable& table, const Transfer& t) {
  auto& levels = table.levels[index(t.op)];
  auto& parent = levels[t.parent];
  if (t.dir == Direction::fill) {
    parent.access_read += t.parent_total();
    if (!t.child_is_mac()) levels[t.parent - 1].access_write += t.child_total();
  } else {
    parent.access_write += t.parent_total();
    if (!t.child_is_mac()) levels[t.parent - 1].access_read += t.child_total();
  }
}

}  // namespace

LoopInfoTable extract(const MappingScheme& m, const LayerSpec& spec) {
  LoopInfoTable table;
  bool first = true;
  for (auto op : kAllOperands) {
    const OperandNest nest(m.of(op), op, spec.stride_x, spec.stride_y);
    const std::size_t depth = nest.depth();
    if (depth == 0) throw std::invalid_argument("operand without memory levels");
    auto& levels = table.levels[index(op)];
    levels.resize(depth);
    if (first) {
      std::int64_t macs = 1;
      for (auto v : nest.through_slot(depth)) macs *= v;
      table.total_macs = macs;
      table.cycles = nest.turnaround(depth - 1);
      first = false;
    }
    for (std::size_t j = 0; j < depth; ++j) {
      auto& li = levels[j];
      li.data_size_unit = nest.footprint(nest.through_level(j));
      li.data_size_total = nest.footprint(nest.through_slot(j + 1));
      std::int64_t macs = 1;
      for (auto v : nest.through_slot(j + 1)) macs *= v;
      li.mac_ops = macs;
      li.turnaround_cycles = nest.turnaround(j);
      const std::int64_t feed = nest.footprint(nest.through_slot(j));
      li.reuse_temporal = Rational(nest.temporal_product(j) * feed, li.data_size_unit);
      li.reuse_spatial = Rational(nest.spatial_product(j + 1) * li.data_size_unit, li.data_size_total);
      li.reuse_total = li.reuse_temporal * li.reuse_spatial;
      li.unit_count_total = nest.units(j);
      li.unit_count_duplicate = nest.duplicate_units(j);
      li.unit_count_unique = li.unit_count_total / li.unit_count_duplicate;
      li.top_ir_product = nest.top_ir_product(j);
      li.final_output = nest.final_at(j);
      li.precision_bits = spec.precision.bits(op, li.final_output);
      if (j + 1 < depth) {
        const Rational bits(li.data_size_unit * li.precision_bits);
        li.req_bw_db = bits / li.turnaround_cycles;
        li.req_bw_no_db = bits * li.top_ir_product / li.turnaround_cycles;
      }
      li.pr_pattern = op == Operand::I ? pr_pattern_of(m.of(op), j) : PrPattern::none;
    }
    for (const auto& t : operand_transfers(nest, spec.precision)) {
      add_access(table, t);
      table.transfers.push_back(t);
    }
  }
  return table;
}

namespace {

OperandNest nest_for(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  OperandNest nest(m.of(op), op, spec.stride_x, spec.stride_y);
  if (level >= nest.depth()) throw std::out_of_range("level out of range");
  return nest;
}

}  // namespace

std::int64_t data_size_unit(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  const auto nest = nest_for(m, spec, op, level);
  return nest.footprint(nest.through_level(level));
}

std::int64_t data_size_total(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  const auto nest = nest_for(m, spec, op, level);
  return nest.footprint(nest.through_slot(level + 1));
}

std::int64_t mac_ops(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  const auto nest = nest_for(m, spec, op, level);
  std::int64_t n = 1;
  for (auto v : nest.through_slot(level + 1)) n *= v;
  return n;
}

std::int64_t turnaround_cycles(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  return nest_for(m, spec, op, level).turnaround(level);
}

ReuseFactors reuse_factors(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  const auto& li = extract(m, spec).at(op, level);
  return {li.reuse_temporal, li.reuse_spatial, li.reuse_total};
}

UnitCounts unit_counts(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  const auto nest = nest_for(m, spec, op, level);
  const auto total = nest.units(level);
  const auto dup = nest.duplicate_units(level);
  return {total, dup, total / dup};
}

AccessCounts access_counts(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level) {
  nest_for(m, spec, op, level);
  const auto& li = extract(m, spec).at(op, level);
  return {li.access_read, li.access_write};
}

Rational required_bandwidth(const MappingScheme& m, const LayerSpec& spec, Operand op, std::size_t level,
                            bool double_buffered) {
  nest_for(m, spec, op, level);
  const auto& li = extract(m, spec).at(op, level);
  return double_buffered ? li.req_bw_db : li.req_bw_no_db;
}

PrPattern detect_pr_pattern(const MappingScheme& m, std::size_t level) {
  return pr_pattern_of(m.of(Operand::I), level);
}

}  // namespace memflow
