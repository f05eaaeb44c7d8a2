#include "memflow/tmg.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <mutex>
#include <sstream>
#include <set>
#include <thread>
#include <unordered_set>

namespace memflow {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::exhaustive: return "exhaustive";
    case Strategy::heuristic: return "heuristic";
    case Strategy::iterative: return "iterative";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (auto x : {Strategy::exhaustive, Strategy::heuristic, Strategy::iterative})
    if (s == to_string(x)) return x;
  return std::nullopt;
}

std::string PartialScheme::key() const {
  std::string k;
  for (const auto& vl : virtual_levels) {
    for (const auto& l : vl) {
      k += to_string(l.dim);
      k += std::to_string(l.factor);
      k += ',';
    }
    k += '|';
  }
  for (auto op : kAllOperands) {
    k += ';';
    for (auto e : level_end[index(op)]) k += std::to_string(e) + ',';
    k += '@' + std::to_string(roof.level[index(op)]);
  }
  return k;
}

MappingScheme Blocking::to_mapping(const std::vector<std::vector<LoopFactor>>& ordered, const MemoryHierarchy& h,
                                   const SpatialUnrolling& s) const {
  std::vector<LoopFactor> seq;
  std::vector<std::size_t> prefix{0};
  for (const auto& vl : ordered) {
    seq.insert(seq.end(), vl.begin(), vl.end());
    prefix.push_back(seq.size());
  }
  std::array<std::vector<std::size_t>, kNumOperands> cuts;
  for (auto op : kAllOperands)
    for (auto e : level_end[index(op)]) cuts[index(op)].push_back(prefix[e]);
  return build_mapping(seq, cuts, h, s);
}

namespace {

DimSizes times(DimSizes a, const DimSizes& b) {
  for (std::size_t i = 0; i < kNumDims; ++i) a[i] *= b[i];
  return a;
}

}  // namespace

TmgProblem::TmgProblem(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s, bool even_only)
    : spec_(spec), padded_(padded_layer(spec, s)), h_(h), s_(s), even_only_(even_only) {
  DimSizes temporal = padded_.dims;
  const auto per_dim = s.per_dim();
  for (auto d : kAllDims) temporal[index(d)] /= per_dim[index(d)];
  lpfs_ = lpf_factorize(temporal);
  std::sort(lpfs_.begin(), lpfs_.end());
  for (auto op : kAllOperands) {
    const auto slots = spatial_slots(h, s, op);
    DimSizes e = unit_dims();
    for (std::size_t j = 0; j < h.depth(op); ++j) {
      for (const auto& l : slots[j]) e[index(l.dim)] *= l.factor;
      spatial_through_[index(op)].push_back(e);
    }
  }
  const auto slots = spatial_slots(h, s, Operand::O);
  o_ir_spatial_above_.assign(h.depth(Operand::O), false);
  for (std::size_t j = 0; j < h.depth(Operand::O); ++j)
    for (std::size_t k = j + 1; k < slots.size(); ++k)
      for (const auto& l : slots[k])
        if (is_irrelevant(l.dim, Operand::O)) o_ir_spatial_above_[j] = true;
}

std::int64_t TmgProblem::data_size(Operand op, std::size_t j, const DimSizes& temporal) const {
  return footprint(op, times(spatial_through_[index(op)][j], temporal), spec_.stride_x, spec_.stride_y);
}

int TmgProblem::precision_at(const PartialScheme& ps, Operand op, std::size_t j) const {
  if (op != Operand::O) return spec_.precision.bits(op);
  if (o_ir_spatial_above_[j]) return spec_.precision.output_partial;
  // Final iff every Output-irrelevant factor sits below level j. Whatever is
  // not below is in the level's own content, above it, or unassigned.
  const auto& ends = ps.level_end[index(op)];
  const std::size_t start = j == 0 ? 0 : (j - 1 < ends.size() ? ends[j - 1] : ps.virtual_levels.size());
  auto ir = [](const LoopFactor& l) { return is_irrelevant(l.dim, Operand::O); };
  for (std::size_t v = start; v < ps.virtual_levels.size(); ++v)
    if (std::any_of(ps.virtual_levels[v].begin(), ps.virtual_levels[v].end(), ir))
      return spec_.precision.output_partial;
  if (std::any_of(ps.remaining.begin(), ps.remaining.end(), ir)) return spec_.precision.output_partial;
  return spec_.precision.output_final;
}

Rational TmgProblem::capacity_elements(const PartialScheme& ps, Operand op, std::size_t j) const {
  return Rational(h_.level(op, j).capacity_bits(), precision_at(ps, op, j));
}

DimSizes TmgProblem::extent_of(const PartialScheme& ps, std::size_t vls) const {
  DimSizes e = unit_dims();
  for (std::size_t v = 0; v < vls; ++v)
    for (const auto& l : ps.virtual_levels[v]) e[index(l.dim)] *= l.factor;
  return e;
}

PartialScheme TmgProblem::initial() const {
  PartialScheme ps;
  ps.remaining = lpfs_;
  ps.roof = roof_after(ps, {});
  return ps;
}

namespace {

/// Capacity bookkeeping shared by all candidate combinations of one state:
/// levels below an operand's roof are fixed, the rest grow with the comb.
struct FitContext {
  std::vector<std::int64_t> fixed;
  struct Growing {
    Operand op;
    std::size_t level;
    int bits;
  };
  std::vector<Growing> growing;
};

}  // namespace

bool TmgProblem::fits(const PartialScheme& ps, std::span<const LoopFactor> comb) const {
  DimSizes all = extent_of(ps, ps.virtual_levels.size());
  for (const auto& l : comb) all[index(l.dim)] *= l.factor;
  std::vector<std::int64_t> usage(h_.levels.size(), 0);
  for (auto op : kAllOperands) {
    const auto roof = ps.roof.level[index(op)];
    for (std::size_t j = 0; j < h_.depth(op); ++j) {
      const auto phys = h_.physical(op, j);
      if (h_.levels[phys].off_chip) continue;
      const DimSizes ext = j < roof ? extent_of(ps, ps.level_end[index(op)][j]) : all;
      usage[phys] += data_size(op, j, ext) * precision_at(ps, op, j);
    }
  }
  for (std::size_t i = 0; i < usage.size(); ++i)
    if (!h_.levels[i].off_chip && usage[i] > h_.levels[i].capacity_bits()) return false;
  return true;
}

std::vector<std::vector<LoopFactor>> TmgProblem::maximal_combinations(const PartialScheme& ps) const {
  FitContext ctx;
  ctx.fixed.assign(h_.levels.size(), 0);
  for (auto op : kAllOperands) {
    const auto roof = ps.roof.level[index(op)];
    for (std::size_t j = 0; j < h_.depth(op); ++j) {
      const auto phys = h_.physical(op, j);
      if (h_.levels[phys].off_chip) continue;
      if (j < roof)
        ctx.fixed[phys] +=
            data_size(op, j, extent_of(ps, ps.level_end[index(op)][j])) * precision_at(ps, op, j);
      else
        ctx.growing.push_back({op, j, precision_at(ps, op, j)});
    }
  }
  auto ok = [&](const DimSizes& ext) {
    std::vector<std::int64_t> usage = ctx.fixed;
    for (const auto& g : ctx.growing)
      usage[h_.physical(g.op, g.level)] += data_size(g.op, g.level, ext) * g.bits;
    for (std::size_t i = 0; i < usage.size(); ++i)
      if (!h_.levels[i].off_chip && usage[i] > h_.levels[i].capacity_bits()) return false;
    return true;
  };

  std::vector<LoopFactor> types;
  std::vector<int> counts;
  for (const auto& l : ps.remaining) {
    if (!types.empty() && types.back() == l) {
      ++counts.back();
    } else {
      types.push_back(l);
      counts.push_back(1);
    }
  }
  const DimSizes base = extent_of(ps, ps.virtual_levels.size());
  std::vector<std::vector<LoopFactor>> out;
  std::vector<int> chosen(types.size(), 0);

  auto grow = [](DimSizes e, const LoopFactor& l) {
    e[index(l.dim)] *= l.factor;
    return e;
  };
  // Depth-first over factor types; fit is monotone, so a failing count ends
  // the branch.
  auto rec = [&](auto&& self, std::size_t t, const DimSizes& ext) -> void {
    if (t == types.size()) {
      bool any = false;
      for (std::size_t i = 0; i < types.size(); ++i) {
        if (chosen[i] == 0) continue;
        any = true;
      }
      if (!any) return;
      for (std::size_t i = 0; i < types.size(); ++i)
        if (chosen[i] < counts[i] && ok(grow(ext, types[i]))) return;
      std::vector<LoopFactor> comb;
      for (std::size_t i = 0; i < types.size(); ++i)
        for (int c = 0; c < chosen[i]; ++c) comb.push_back(types[i]);
      out.push_back(std::move(comb));
      return;
    }
    DimSizes e = ext;
    for (int c = 0; c <= counts[t]; ++c) {
      if (c > 0) {
        e = grow(e, types[t]);
        if (!ok(e)) break;
      }
      chosen[t] = c;
      self(self, t + 1, e);
    }
    chosen[t] = 0;
  };
  if (ok(base)) rec(rec, 0, base);
  return out;
}

Roof TmgProblem::roof_after(const PartialScheme& ps, std::span<const LoopFactor> comb) const {
  Roof r = ps.roof;
  DimSizes all = extent_of(ps, ps.virtual_levels.size());
  for (const auto& l : comb) all[index(l.dim)] *= l.factor;
  for (auto op : kAllOperands) {
    const auto j = r.level[index(op)];
    const auto& level = h_.level(op, j);
    r.unbounded[index(op)] = level.unbounded();
    if (level.unbounded()) {
      r.remaining[index(op)] = Rational(0);
      continue;
    }
    r.remaining[index(op)] = capacity_elements(ps, op, j) / data_size(op, j, all);
  }
  return r;
}

PartialScheme TmgProblem::assign(const PartialScheme& ps, std::span<const LoopFactor> comb) const {
  PartialScheme next = ps;
  next.roof = roof_after(ps, comb);
  next.virtual_levels.emplace_back(comb.begin(), comb.end());
  for (const auto& l : comb) {
    const auto it = std::find(next.remaining.begin(), next.remaining.end(), l);
    next.remaining.erase(it);
  }
  return next;
}

std::optional<Operand> TmgProblem::advance_choice(const Roof& roof) const {
  std::optional<Operand> best;
  for (auto op : kAllOperands) {
    const auto i = index(op);
    if (roof.unbounded[i]) continue;
    if (!best) {
      best = op;
      continue;
    }
    const auto b = index(*best);
    if (roof.level[i] < roof.level[b] || (roof.level[i] == roof.level[b] && roof.remaining[i] < roof.remaining[b]))
      best = op;
  }
  return best;
}

void TmgProblem::advance_operand(PartialScheme& ps, Operand op) const {
  ps.level_end[index(op)].push_back(ps.virtual_levels.size());
  ++ps.roof.level[index(op)];
}

PartialScheme TmgProblem::advance(const PartialScheme& ps) const {
  const auto choice = advance_choice(ps.roof);
  if (!choice) return ps;
  return advance(ps, *choice);
}

PartialScheme TmgProblem::advance(const PartialScheme& ps, Operand choice) const {
  PartialScheme next = ps;
  advance_operand(next, choice);
  // Even mode: once one operand leaves a level, the others at the same level
  // index or sharing the physical level leave at the same point, passing
  // through with nothing assigned.
  for (bool changed = even_only_; changed;) {
    changed = false;
    for (auto a : kAllOperands)
      for (std::size_t j = 0; j < next.roof.level[index(a)]; ++j) {
        const auto left = h_.physical(a, j);
        for (auto b : kAllOperands) {
          if (b == a) continue;
          const auto& chain = h_.chains[index(b)];
          const auto it = std::find(chain.begin(), chain.end(), left);
          std::size_t must_leave = 0;
          if (it != chain.end())
            must_leave = static_cast<std::size_t>(it - chain.begin()) + 1;
          if (j + 1 < chain.size()) must_leave = std::max(must_leave, j + 1);
          while (next.roof.level[index(b)] < must_leave) {
            advance_operand(next, b);
            changed = true;
          }
        }
      }
  }
  next.roof = roof_after(next, {});
  return next;
}

Blocking TmgProblem::finalize(const PartialScheme& ps) const {
  Blocking b;
  b.virtual_levels = ps.virtual_levels;
  b.level_end = ps.level_end;
  for (auto op : kAllOperands) {
    auto& le = b.level_end[index(op)];
    while (le.size() < h_.depth(op)) le.push_back(ps.virtual_levels.size());
  }
  return b;
}

Blocking TmgProblem::complete_on_top(const PartialScheme& ps) const {
  if (ps.remaining.empty()) return finalize(ps);
  Blocking b;
  b.virtual_levels = ps.virtual_levels;
  b.virtual_levels.push_back(ps.remaining);
  b.level_end = ps.level_end;
  const auto n = ps.virtual_levels.size();
  for (auto op : kAllOperands) {
    auto& le = b.level_end[index(op)];
    while (le.size() + 1 < h_.depth(op)) le.push_back(n);
    le.push_back(n + 1);
  }
  return b;
}

Roof init_roof(const MemoryHierarchy& h, const SpatialUnrolling& s, const LayerSpec& spec) {
  return TmgProblem(spec, h, s).initial().roof;
}

Roof update_roof(const TmgProblem& p, const PartialScheme& ps, std::span<const LoopFactor> comb) {
  return p.roof_after(ps, comb);
}

PartialScheme advance_roof(const TmgProblem& p, const PartialScheme& ps) { return p.advance(ps); }

namespace {

std::string blocking_key(const Blocking& b) {
  PartialScheme ps;
  ps.virtual_levels = b.virtual_levels;
  ps.level_end = b.level_end;
  return ps.key();
}

}  // namespace

std::optional<Blocking> TmgProblem::absorb(const Blocking& b, OperandSet ops) const {
  Blocking out = b;
  bool moved = false;
  for (auto op : kAllOperands) {
    if (!ops.contains(op)) continue;
    auto& le = out.level_end[index(op)];
    for (std::size_t j = le.size() - 1; j-- > 0;) {
      while (le[j] < le[j + 1] && std::all_of(out.virtual_levels[le[j]].begin(), out.virtual_levels[le[j]].end(),
                                               [&](const LoopFactor& l) { return is_irrelevant(l.dim, op); })) {
        ++le[j];
        moved = true;
      }
    }
  }
  if (!moved) return std::nullopt;
  if (even_only_ && !is_even(out.canonical(h_, s_), h_)) return std::nullopt;
  return out;
}

std::vector<Blocking> generate_schemes(const TmgProblem& p) {
  std::vector<Blocking> out;
  std::unordered_set<std::string> seen, emitted;
  auto emit = [&](Blocking b) {
    if (emitted.insert(blocking_key(b)).second) out.push_back(std::move(b));
  };
  const PartialScheme init = p.initial();
  if (!p.fits(init, {})) return out;
  auto rec = [&](auto&& self, const PartialScheme& ps) -> void {
    if (!seen.insert(ps.key()).second) return;
    if (ps.remaining.empty()) {
      const auto b = p.finalize(ps);
      emit(b);
      // roofs that moved on early leave irrelevant loops above a level
      // that could have held them for free
      for (std::uint8_t bits = 1; bits < 8; ++bits)
        if (auto a = p.absorb(b, OperandSet(bits))) emit(std::move(*a));
      return;
    }
    const auto combs = p.maximal_combinations(ps);
    if (combs.empty()) {
      if (!p.advance_choice(ps.roof)) return;
      self(self, p.advance(ps));
      return;
    }
    for (const auto& comb : combs) self(self, p.assign(ps, comb));
  };
  rec(rec, init);
  return out;
}

std::vector<Blocking> generate_schemes(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                                       bool even_only) {
  return generate_schemes(TmgProblem(spec, h, s, even_only));
}

std::vector<std::vector<LoopFactor>> stationary_orders(std::span<const LoopFactor> vl) {
  std::vector<std::vector<LoopFactor>> out;
  for (auto op : kAllOperands) {
    std::vector<LoopFactor> order;
    for (const auto& l : vl)
      if (!is_irrelevant(l.dim, op)) order.push_back(l);
    for (const auto& l : vl)
      if (is_irrelevant(l.dim, op)) order.push_back(l);
    if (std::find(out.begin(), out.end(), order) == out.end()) out.push_back(std::move(order));
  }
  return out;
}

namespace {

struct Best {
  bool has = false;
  double obj = 0.0;
  std::string text;
  MappingScheme mapping;
  CostReport cost;

  void offer(double o, const MappingScheme& m, const CostReport& c) {
    if (has && o > obj) return;
    std::string t = to_text(m);
    if (has && o == obj && t >= text) return;
    has = true;
    obj = o;
    text = std::move(t);
    mapping = m;
    cost = c;
  }
  void merge(const Best& other) {
    if (!other.has) return;
    if (has && (other.obj > obj || (other.obj == obj && other.text >= text))) return;
    *this = other;
  }
};

struct Tally {
  SearchStats stats;
  bool any = false;

  void record(const CostReport& c) {
    if (!any) {
      stats.energy_min = stats.energy_max = c.energy_total_pj;
      stats.latency_min = stats.latency_max = c.latency_total;
      any = true;
    } else {
      stats.energy_min = std::min(stats.energy_min, c.energy_total_pj);
      stats.energy_max = std::max(stats.energy_max, c.energy_total_pj);
      stats.latency_min = std::min(stats.latency_min, c.latency_total);
      stats.latency_max = std::max(stats.latency_max, c.latency_total);
    }
    ++stats.evaluated;
  }
  void merge(const Tally& o) {
    stats.blockings += o.stats.blockings;
    stats.valid_blockings += o.stats.valid_blockings;
    stats.pruned_blockings += o.stats.pruned_blockings;
    stats.partial_evaluated += o.stats.partial_evaluated;
    if (o.any) {
      if (!any) {
        stats.energy_min = o.stats.energy_min;
        stats.energy_max = o.stats.energy_max;
        stats.latency_min = o.stats.latency_min;
        stats.latency_max = o.stats.latency_max;
        any = true;
      } else {
        stats.energy_min = std::min(stats.energy_min, o.stats.energy_min);
        stats.energy_max = std::max(stats.energy_max, o.stats.energy_max);
        stats.latency_min = std::min(stats.latency_min, o.stats.latency_min);
        stats.latency_max = std::max(stats.latency_max, o.stats.latency_max);
      }
    }
    stats.evaluated += o.stats.evaluated;
  }
};

class Runner {
 public:
  Runner(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s, const MacModel& mac,
         const SearchOptions& opts)
      : spec_(spec), h_(h), s_(s), mac_(mac), opts_(opts) {}

  bool pinned_ok(const MappingScheme& m) const {
    if (!opts_.pinned) return true;
    for (auto op : kAllOperands) {
      const auto& want = opts_.pinned->of(op).temporal;
      const auto& have = m.of(op).temporal;
      for (std::size_t j = 0; j < want.size() && j < have.size(); ++j)
        if (!want[j].empty() && want[j] != have[j]) return false;
    }
    return true;
  }

  CostReport price(const MappingScheme& m) const { return evaluate_cost(m, spec_, extract(m, spec_), h_, s_, mac_); }

  bool valid(const MappingScheme& m) const {
    MappingCheckOptions check;
    check.min_shared_utilization = opts_.min_shared_utilization;
    return validate_mapping(m, spec_, h_, s_, check).empty();
  }

  /// Reuse rule: an intermediate W or O level whose loops reuse nothing only
  /// adds a copy. Returns the first such (operand, level).
  std::optional<std::pair<Operand, std::size_t>> useless_level(const MappingScheme& m) const {
    const auto info = extract(m, spec_);
    for (auto op : {Operand::W, Operand::O}) {
      const auto& levels = info.levels[index(op)];
      const auto& loops = m.of(op).temporal;
      for (std::size_t j = 1; j + 1 < levels.size(); ++j)
        if (!loops[j].empty() && levels[j].reuse_total == Rational(1)) return std::pair{op, j};
    }
    return std::nullopt;
  }

  /// Pushes the loops of useless levels one level up, leaving the level as a
  /// pass-through. Energy below and above is unchanged. Returns nullopt if
  /// nothing moved or the result is not a legal scheme.
  std::optional<Blocking> collapse(const Blocking& b) const {
    Blocking out = b;
    bool moved = false;
    while (true) {
      const auto canon = out.canonical(h_, s_);
      const auto hit = useless_level(canon);
      if (!hit) break;
      auto& le = out.level_end[index(hit->first)];
      le[hit->second] = le[hit->second - 1];
      moved = true;
    }
    if (!moved) return std::nullopt;
    const auto canon = out.canonical(h_, s_);
    if (!valid(canon) || (opts_.even_only && !is_even(canon, h_))) return std::nullopt;
    return out;
  }

  template <class Fn>
  void for_each_order(const Blocking& b, bool heuristic, Fn&& fn) const {
    std::vector<std::vector<std::vector<LoopFactor>>> choices;
    for (const auto& vl : b.virtual_levels)
      choices.push_back(heuristic ? stationary_orders(vl) : enumerate_permutations(vl));
    std::vector<std::size_t> idx(choices.size(), 0);
    std::vector<std::vector<LoopFactor>> ordered(choices.size());
    while (true) {
      for (std::size_t v = 0; v < choices.size(); ++v) ordered[v] = choices[v][idx[v]];
      fn(ordered);
      std::size_t v = 0;
      while (v < choices.size() && ++idx[v] == choices[v].size()) idx[v++] = 0;
      if (v == choices.size()) break;
    }
  }

  void process(const Blocking& b, bool heuristic, Best& best, Tally& tally, std::vector<Sample>* samples) const {
    const auto canon = b.canonical(h_, s_);
    if (!valid(canon)) return;
    ++tally.stats.valid_blockings;
    for_each_order(b, heuristic, [&](const std::vector<std::vector<LoopFactor>>& ordered) {
      const auto m = b.to_mapping(ordered, h_, s_);
      if (!pinned_ok(m)) return;
      const auto c = price(m);
      tally.record(c);
      if (samples) samples->push_back({c.energy_total_pj, c.latency_total});
      best.offer(c.objective(opts_.objective), m, c);
    });
  }

  /// Heuristic reduction: blockings with useless levels are replaced by
  /// their collapsed form, then duplicates dropped.
  std::vector<Blocking> reduce(std::vector<Blocking> blockings, SearchStats& stats) const {
    std::vector<Blocking> out;
    std::unordered_set<std::string> seen;
    for (auto& b : blockings) {
      if (auto c = collapse(b)) b = std::move(*c);
      if (seen.insert(blocking_key(b)).second)
        out.push_back(std::move(b));
      else
        ++stats.pruned_blockings;
    }
    return out;
  }

  SearchResult full(bool heuristic) const {
    const TmgProblem p(spec_, h_, s_, opts_.even_only);
    auto blockings = generate_schemes(p);
    SearchStats pre;
    pre.blockings = static_cast<std::int64_t>(blockings.size());
    if (heuristic) blockings = reduce(std::move(blockings), pre);
    const unsigned workers = std::max(1u, opts_.workers);
    std::vector<Best> bests(workers);
    std::vector<Tally> tallies(workers);
    std::vector<std::vector<Sample>> samples(opts_.collect_samples ? blockings.size() : 0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&](unsigned w) {
      try {
        for (std::size_t i = next++; i < blockings.size(); i = next++)
          process(blockings[i], heuristic, bests[w], tallies[w],
                  opts_.collect_samples ? &samples[i] : nullptr);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
      for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    Best best;
    Tally tally;
    for (unsigned w = 0; w < workers; ++w) {
      best.merge(bests[w]);
      tally.merge(tallies[w]);
    }
    SearchResult r;
    r.stats = tally.stats;
    r.stats.blockings = pre.blockings;
    r.stats.pruned_blockings = pre.pruned_blockings;
    for (auto& s : samples) r.samples.insert(r.samples.end(), s.begin(), s.end());
    if (best.has) {
      r.found = true;
      r.mapping = best.mapping;
      r.mapping_text = best.text;
      r.cost = best.cost;
    }
    return r;
  }

  // Beam search over partial schemes. Each step stacks one more virtual
  // level on every kept scheme; the `beam` cheapest results go on.
  SearchResult iterative() const {
    const TmgProblem p(spec_, h_, s_, opts_.even_only);
    SearchResult r;
    Tally tally;
    PartialScheme init = p.initial();
    if (!p.fits(init, {})) return r;

    auto settle = [&](PartialScheme ps) {
      while (!ps.remaining.empty() && p.maximal_combinations(ps).empty() && p.advance_choice(ps.roof))
        ps = p.advance(ps);
      return ps;
    };
    // Remaining factors go on top in the best stationary order.
    auto estimate = [&](const PartialScheme& ps) {
      const auto top = p.complete_on_top(ps);
      auto ordered = top.virtual_levels;
      double obj = std::numeric_limits<double>::infinity();
      for (const auto& order : stationary_orders(ps.remaining)) {
        if (!ps.remaining.empty()) ordered.back() = order;
        const auto c = price(top.to_mapping(ordered, h_, s_));
        ++tally.stats.partial_evaluated;
        obj = std::min(obj, c.objective(opts_.objective));
        if (ps.remaining.empty()) break;
      }
      return obj;
    };
    struct Candidate {
      double obj;
      std::string key;
      PartialScheme ps;
      bool operator<(const Candidate& o) const { return obj != o.obj ? obj < o.obj : key < o.key; }
    };
    std::optional<Blocking> winner;
    Best best;

    auto accept = [&](Blocking b) {
      ++tally.stats.blockings;
      if (!valid(b.canonical(h_, s_))) return;
      ++tally.stats.valid_blockings;
      if (auto c = collapse(b)) {
        ++tally.stats.pruned_blockings;
        b = std::move(*c);
      }
      const auto canon = b.canonical(h_, s_);
      if (!pinned_ok(canon)) return;
      const auto c = price(canon);
      tally.record(c);
      const auto before = best.text;
      best.offer(c.objective(opts_.objective), canon, c);
      if (best.text != before) winner = std::move(b);
    };

    const std::size_t beam = std::max<std::size_t>(opts_.beam, 1);
    std::unordered_set<std::string> seen;
    std::vector<PartialScheme> frontier{settle(init)};
    while (!frontier.empty()) {
      std::set<Candidate> next;
      for (const auto& cur : frontier) {
        if (cur.remaining.empty()) {
          const auto b = p.finalize(cur);
          std::unordered_set<std::string> done{blocking_key(b)};
          accept(b);
          for (std::uint8_t bits = 1; bits < 8; ++bits)
            if (auto a = p.absorb(b, OperandSet(bits)); a && done.insert(blocking_key(*a)).second) accept(*a);
          continue;
        }
        for (const auto& comb : p.maximal_combinations(cur)) {
          auto child = settle(p.assign(cur, comb));
          if (!child.remaining.empty() && p.maximal_combinations(child).empty()) continue;
          auto key = child.key();
          if (!seen.insert(key).second) continue;
          next.insert({estimate(child), std::move(key), std::move(child)});
          if (next.size() > beam) next.erase(std::prev(next.end()));
        }
      }
      frontier.clear();
      for (const auto& c : next) frontier.push_back(c.ps);
    }
    if (winner) {
      const std::string canon_text = best.text;
      for_each_order(*winner, true, [&](const std::vector<std::vector<LoopFactor>>& ordered) {
        const auto m = winner->to_mapping(ordered, h_, s_);
        if (!pinned_ok(m) || to_text(m) == canon_text) return;
        const auto c = price(m);
        tally.record(c);
        best.offer(c.objective(opts_.objective), m, c);
      });
      r.found = true;
      r.mapping = best.mapping;
      r.mapping_text = best.text;
      r.cost = best.cost;
    }
    r.stats = tally.stats;
    return r;
  }

 private:
  const LayerSpec& spec_;
  const MemoryHierarchy& h_;
  const SpatialUnrolling& s_;
  const MacModel& mac_;
  const SearchOptions& opts_;
};

}  // namespace

SearchResult search(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s, const MacModel& mac,
                    const SearchOptions& opts) {
  const Runner runner(spec, h, s, mac, opts);
  switch (opts.strategy) {
    case Strategy::exhaustive: return runner.full(false);
    case Strategy::heuristic: return runner.full(true);
    case Strategy::iterative: return runner.iterative();
  }
  return {};
}

SearchResult search_exhaustive(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                               const MacModel& mac, SearchOptions opts) {
  opts.strategy = Strategy::exhaustive;
  return search(spec, h, s, mac, opts);
}

SearchResult search_heuristic(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                              const MacModel& mac, SearchOptions opts) {
  opts.strategy = Strategy::heuristic;
  return search(spec, h, s, mac, opts);
}

SearchResult search_iterative(const LayerSpec& spec, const MemoryHierarchy& h, const SpatialUnrolling& s,
                              const MacModel& mac, SearchOptions opts) {
  opts.strategy = Strategy::iterative;
  return search(spec, h, s, mac, opts);
}

}  // namespace memflow
