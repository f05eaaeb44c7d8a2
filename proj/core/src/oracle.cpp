#include "memflow/oracle.hpp"

#include <algorithm>
#include <stdexcept>

#include "memflow/cost.hpp"

namespace memflow {

namespace {

struct OpState {
  Operand op;
  std::size_t depth = 0;
  std::vector<std::size_t> cut;     // loops in levels 0..j
  std::vector<std::int64_t> period;  // cycles per tile of level j
  std::vector<std::int64_t> child_period;  // period of the child of parent p
  std::vector<std::int64_t> units;
  std::vector<std::vector<std::int32_t>> unit;  // [level][lane]
  std::vector<int> slot_of;                     // per spatial loop
  std::int64_t size = 0;

  std::vector<std::vector<std::int32_t>> feed_stamp, res_stamp;
  std::vector<std::vector<std::int64_t>> first;  // Output: first period an element reached a parent unit
  std::vector<std::vector<std::int32_t>> owner;
  std::vector<char> multi_period, multi_unit;

  std::vector<std::int64_t> feed_distinct, feed_touched, res_distinct, res_touched;
  std::vector<std::int64_t> occupancy, peak;

  // Per-period maxima over units, kept for the latency replay.
  std::vector<std::vector<std::int64_t>> feed_cnt, feed_t_cnt, res_cnt, res_t_cnt;
  std::vector<std::vector<std::int64_t>> feed_max, feed_t_max, res_max, res_t_max;
};

std::int64_t element_id(Operand op, const std::array<std::int64_t, kNumDims>& c, const DimSizes& d,
                        std::int64_t sx, std::int64_t sy) {
  auto at = [&](LoopDim x) { return c[index(x)]; };
  auto n = [&](LoopDim x) { return d[index(x)]; };
  switch (op) {
    case Operand::W:
      return ((at(LoopDim::K) * n(LoopDim::C) + at(LoopDim::C)) * n(LoopDim::FY) + at(LoopDim::FY)) *
                 n(LoopDim::FX) +
             at(LoopDim::FX);
    case Operand::O:
      return ((at(LoopDim::B) * n(LoopDim::K) + at(LoopDim::K)) * n(LoopDim::OY) + at(LoopDim::OY)) *
                 n(LoopDim::OX) +
             at(LoopDim::OX);
    case Operand::I: {
      const std::int64_t ix = sx * at(LoopDim::OX) + at(LoopDim::FX);
      const std::int64_t iy = sy * at(LoopDim::OY) + at(LoopDim::FY);
      const std::int64_t nx = sx * (n(LoopDim::OX) - 1) + n(LoopDim::FX);
      const std::int64_t ny = sy * (n(LoopDim::OY) - 1) + n(LoopDim::FY);
      return ((at(LoopDim::B) * n(LoopDim::C) + at(LoopDim::C)) * ny + iy) * nx + ix;
    }
  }
  return 0;
}

std::int64_t tensor_size(Operand op, const DimSizes& d, std::int64_t sx, std::int64_t sy) {
  std::array<std::int64_t, kNumDims> last{};
  for (auto x : kAllDims) last[index(x)] = d[index(x)] - 1;
  return element_id(op, last, d, sx, sy) + 1;
}

void flush_max(std::vector<std::int64_t>& cnt, std::vector<std::int64_t>& out) {
  out.push_back(cnt.empty() ? 0 : *std::max_element(cnt.begin(), cnt.end()));
  std::fill(cnt.begin(), cnt.end(), 0);
}

}  // namespace

SimTrace simulate(const MappingScheme& m, const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                  const OracleOptions& opts) {
  MappingCheckOptions check;
  check.check_capacity = false;
  if (const auto errs = validate_mapping(m, spec, h, s, check); !errs.empty())
    throw std::invalid_argument("invalid mapping: " + errs.front());

  const auto seq = temporal_sequence(m.of(Operand::W));
  const std::size_t n = seq.size();
  std::int64_t cycles = 1;
  for (const auto& l : seq) cycles *= l.factor;
  const std::int64_t lanes = s.lanes();
  if (cycles * lanes > opts.max_macs) throw std::length_error("mapping exceeds the simulation MAC cap");

  const DimSizes dims = mapped_dims(m.of(Operand::W));
  const std::size_t nb = s.loops.size();
  const bool replay = opts.replay_latency;

  std::array<OpState, kNumOperands> ops;
  for (auto op : kAllOperands) {
    auto& st = ops[index(op)];
    const auto& om = m.of(op);
    st.op = op;
    st.depth = om.depth();
    st.size = tensor_size(op, dims, spec.stride_x, spec.stride_y);
    std::size_t c = 0;
    for (const auto& level : om.temporal) {
      c += level.size();
      st.cut.push_back(c);
    }
    for (std::size_t j = 0; j < st.depth; ++j) {
      std::int64_t p = 1;
      for (std::size_t i = 0; i < st.cut[j]; ++i) p *= seq[i].factor;
      st.period.push_back(p);
      st.child_period.push_back(j == 0 ? 1 : st.period[j - 1]);
    }
    // Match each slot's loops to the unrolling's loops in order.
    st.slot_of.assign(nb, -1);
    for (std::size_t k = 0; k < om.spatial.size(); ++k)
      for (const auto& l : om.spatial[k]) {
        std::size_t b = 0;
        while (b < nb && (st.slot_of[b] != -1 || !(s.loops[b] == l))) ++b;
        if (b == nb) throw std::invalid_argument("spatial loop not in the unrolling");
        st.slot_of[b] = static_cast<int>(k);
      }
    for (std::size_t b = 0; b < nb; ++b)
      if (st.slot_of[b] == -1) throw std::invalid_argument("unrolling loop missing from a mapping slot");
  }

  // Coordinate weights follow the Input nest order, innermost first.
  std::vector<std::int64_t> tw(n), sw(nb);
  {
    const auto& st = ops[index(Operand::I)];
    DimSizes w = unit_dims();
    std::size_t begin = 0;
    for (std::size_t k = 0; k <= st.depth; ++k) {
      for (std::size_t b = 0; b < nb; ++b)
        if (st.slot_of[b] == static_cast<int>(k)) {
          sw[b] = w[index(s.loops[b].dim)];
          w[index(s.loops[b].dim)] *= s.loops[b].factor;
        }
      if (k == st.depth) break;
      for (std::size_t i = begin; i < st.cut[k]; ++i) {
        tw[i] = w[index(seq[i].dim)];
        w[index(seq[i].dim)] *= seq[i].factor;
      }
      begin = st.cut[k];
    }
  }

  std::vector<std::array<std::int64_t, kNumDims>> lane_coord(static_cast<std::size_t>(lanes));
  std::vector<std::vector<std::int64_t>> lane_digit(static_cast<std::size_t>(lanes), std::vector<std::int64_t>(nb));
  for (std::int64_t lane = 0; lane < lanes; ++lane) {
    auto& c = lane_coord[static_cast<std::size_t>(lane)];
    c.fill(0);
    std::int64_t rest = lane;
    for (std::size_t b = 0; b < nb; ++b) {
      const auto dgt = rest % s.loops[b].factor;
      rest /= s.loops[b].factor;
      lane_digit[static_cast<std::size_t>(lane)][b] = dgt;
      c[index(s.loops[b].dim)] += dgt * sw[b];
    }
  }

  for (auto& st : ops) {
    st.unit.resize(st.depth);
    for (std::size_t j = 0; j < st.depth; ++j) {
      std::int64_t count = 1;
      st.unit[j].resize(static_cast<std::size_t>(lanes));
      for (std::int64_t lane = 0; lane < lanes; ++lane) {
        std::int64_t u = 0, radix = 1;
        for (std::size_t b = 0; b < nb; ++b)
          if (st.slot_of[b] > static_cast<int>(j)) {
            u += lane_digit[static_cast<std::size_t>(lane)][b] * radix;
            radix *= s.loops[b].factor;
          }
        st.unit[j][static_cast<std::size_t>(lane)] = static_cast<std::int32_t>(u);
        count = radix;
      }
      st.units.push_back(count);
    }
    const bool out = st.op == Operand::O;
    for (std::size_t j = 0; j < st.depth; ++j) {
      const auto cells = static_cast<std::size_t>(st.units[j] * st.size);
      st.feed_stamp.emplace_back(cells, 0);
      st.res_stamp.emplace_back(cells, 0);
      st.first.emplace_back(out ? cells : 0, -1);
      st.owner.emplace_back(out ? static_cast<std::size_t>(st.size) : 0, -1);
      const auto u = static_cast<std::size_t>(replay ? st.units[j] : 0);
      st.feed_cnt.emplace_back(u, 0);
      st.feed_t_cnt.emplace_back(u, 0);
      st.res_cnt.emplace_back(u, 0);
      st.res_t_cnt.emplace_back(u, 0);
    }
    st.multi_period.assign(st.depth, 0);
    st.multi_unit.assign(st.depth, 0);
    st.feed_distinct.assign(st.depth, 0);
    st.feed_touched.assign(st.depth, 0);
    st.res_distinct.assign(st.depth, 0);
    st.res_touched.assign(st.depth, 0);
    st.occupancy.assign(st.depth, 0);
    st.peak.assign(st.depth, 0);
    st.feed_max.resize(st.depth);
    st.feed_t_max.resize(st.depth);
    st.res_max.resize(st.depth);
    st.res_t_max.resize(st.depth);
  }

  auto flush = [&](OpState& st, std::int64_t t, bool final_flush) {
    for (std::size_t j = 0; j < st.depth; ++j) {
      if (final_flush || t % st.period[j] == 0) {
        st.peak[j] = std::max(st.peak[j], st.occupancy[j]);
        st.occupancy[j] = 0;
        if (replay) {
          flush_max(st.res_cnt[j], st.res_max[j]);
          flush_max(st.res_t_cnt[j], st.res_t_max[j]);
        }
      }
      if (replay && (final_flush || t % st.child_period[j] == 0)) {
        flush_max(st.feed_cnt[j], st.feed_max[j]);
        flush_max(st.feed_t_cnt[j], st.feed_t_max[j]);
      }
    }
  };

  std::vector<std::int64_t> digit(n, 0);
  std::array<std::int64_t, kNumDims> tcoord{};
  for (std::int64_t t = 0; t < cycles; ++t) {
    if (t > 0) {
      for (auto& st : ops) flush(st, t, false);
    }
    for (std::int64_t lane = 0; lane < lanes; ++lane) {
      std::array<std::int64_t, kNumDims> c = tcoord;
      for (auto d : kAllDims) c[index(d)] += lane_coord[static_cast<std::size_t>(lane)][index(d)];
      for (auto& st : ops) {
        const std::int64_t e = element_id(st.op, c, dims, spec.stride_x, spec.stride_y);
        const bool out = st.op == Operand::O;
        for (std::size_t p = 0; p < st.depth; ++p) {
          const auto u = st.unit[p][static_cast<std::size_t>(lane)];
          const auto key = static_cast<std::size_t>(u * st.size + e);
          const std::int64_t cp = t / st.child_period[p];
          if (st.feed_stamp[p][key] == cp + 1) continue;
          st.feed_stamp[p][key] = static_cast<std::int32_t>(cp + 1);
          ++st.feed_distinct[p];
          if (replay) ++st.feed_cnt[p][static_cast<std::size_t>(u)];
          if (!out) continue;
          auto& f = st.first[p][key];
          if (f == -1) {
            f = cp;
          } else if (f < cp) {
            ++st.feed_touched[p];
            st.multi_period[p] = 1;
            if (replay) ++st.feed_t_cnt[p][static_cast<std::size_t>(u)];
          }
          auto& o = st.owner[p][static_cast<std::size_t>(e)];
          if (o == -1)
            o = u;
          else if (o != u)
            st.multi_unit[p] = 1;
        }
        for (std::size_t j = 0; j < st.depth; ++j) {
          const auto u = st.unit[j][static_cast<std::size_t>(lane)];
          const auto key = static_cast<std::size_t>(u * st.size + e);
          const std::int64_t cj = t / st.period[j];
          if (st.res_stamp[j][key] == cj + 1) continue;
          st.res_stamp[j][key] = static_cast<std::int32_t>(cj + 1);
          ++st.res_distinct[j];
          ++st.occupancy[j];
          if (replay) ++st.res_cnt[j][static_cast<std::size_t>(u)];
          if (out && j + 1 < st.depth) {
            const auto pu = st.unit[j + 1][static_cast<std::size_t>(lane)];
            const auto f = st.first[j + 1][static_cast<std::size_t>(pu * st.size + e)];
            if (f != -1 && f < cj) {
              ++st.res_touched[j];
              if (replay) ++st.res_t_cnt[j][static_cast<std::size_t>(u)];
            }
          }
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (++digit[i] < seq[i].factor) {
        tcoord[index(seq[i].dim)] += tw[i];
        break;
      }
      digit[i] = 0;
      tcoord[index(seq[i].dim)] -= (seq[i].factor - 1) * tw[i];
    }
  }
  for (auto& st : ops) flush(st, cycles, true);

  SimTrace trace;
  trace.macs = cycles * lanes;
  trace.compute_cycles = cycles;
  for (const auto& st : ops) {
    auto& levels = trace.levels[index(st.op)];
    levels.resize(st.depth);
    const bool out = st.op == Operand::O;
    for (std::size_t j = 0; j < st.depth; ++j) {
      auto& l = levels[j];
      const bool inner = j + 1 < st.depth;
      l.reads = out ? st.feed_touched[j] : st.feed_distinct[j];
      if (out && inner) l.reads += st.res_distinct[j];
      l.writes = out ? st.feed_distinct[j] : 0;
      if (inner) l.writes += out ? st.res_touched[j] : st.res_distinct[j];
      l.peak_occupancy = st.peak[j];
    }
  }
  trace.total_cycles = cycles;
  if (!replay) return trace;

  // Replay: every tile change is a burst on the parent and child ports that
  // must finish within the child's window.
  trace.stall_per_level.assign(h.levels.size(), 0);
  std::vector<PortDemand> demands;
  auto top_ir = [&](Operand op, std::size_t j) {
    std::int64_t p = 1;
    const auto& level = m.of(op).temporal[j];
    for (auto it = level.rbegin(); it != level.rend() && is_irrelevant(it->dim, op); ++it) p *= it->factor;
    return p;
  };
  std::int64_t stall = 0;
  for (std::int64_t t = 0; t <= cycles; ++t) {
    demands.clear();
    for (const auto& st : ops) {
      const bool out = st.op == Operand::O;
      for (std::size_t p = 0; p < st.depth; ++p) {
        const std::int64_t q = st.child_period[p];
        if (t % q != 0) continue;
        const auto c = static_cast<std::size_t>(t / q);
        std::int64_t window = 1;
        if (p > 0)
          window = h.level(st.op, p - 1).double_buffered ? q : q / top_ir(st.op, p - 1);
        const auto parent = h.physical(st.op, p);
        const auto child = p > 0 ? h.physical(st.op, p - 1) : 0;
        if (t < cycles) {
          const auto pe = out ? st.feed_t_max[p][c] : st.feed_max[p][c];
          const int prec = spec.precision.bits(st.op, false);
          if (pe > 0) {
            demands.push_back({parent, false, pe * prec, window});
            if (p > 0) demands.push_back({child, true, (out ? st.res_t_max[p - 1][c] : st.res_max[p - 1][c]) * prec,
                                          window});
          }
        }
        if (out && t > 0) {
          const int prec = spec.precision.bits(st.op, !st.multi_period[p] && !st.multi_unit[p]);
          demands.push_back({parent, true, st.feed_max[p][c - 1] * prec, window});
          if (p > 0) demands.push_back({child, false, st.res_max[p - 1][c - 1] * prec, window});
        }
      }
    }
    stall += event_stall(h, demands, trace.stall_per_level);
  }
  trace.total_cycles = cycles + stall;
  return trace;
}

}  // namespace memflow
