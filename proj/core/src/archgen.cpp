#include "memflow/archgen.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace memflow {

namespace {

std::size_t min_area_variant(const MemoryPoolEntry& e) {
  std::size_t best = 0;
  for (std::size_t v = 1; v < e.variants.size(); ++v)
    if (e.variants[v].area_um2 < e.variants[best].area_um2) best = v;
  return best;
}

/// Replication masks over the unrolling's loops whose product is `unroll`.
std::vector<std::uint32_t> masks_for(const SpatialUnrolling& s, std::int64_t unroll) {
  std::vector<std::uint32_t> out;
  const std::size_t nb = s.loops.size();
  for (std::uint32_t mask = 0; mask < (1u << nb); ++mask) {
    std::int64_t prod = 1;
    for (std::size_t b = 0; b < nb; ++b)
      if (mask & (1u << b)) prod *= s.loops[b].factor;
    if (prod == unroll) out.push_back(mask);
  }
  return out;
}

}  // namespace

std::vector<ExtendedEntry> expand_pool(const MemoryPool& pool, const MacModel& mac) {
  std::vector<ExtendedEntry> out;
  for (std::size_t e = 0; e < pool.entries.size(); ++e) {
    const auto& entry = pool.entries[e];
    for (auto u : entry.allowed_unrolls) {
      if (u < 1 || u > mac.size()) continue;
      for (std::size_t v = 0; v < entry.variants.size(); ++v)
        out.push_back({e, u, v, entry.variants[v].area_um2 * static_cast<double>(u)});
    }
  }
  return out;
}

std::vector<MemoryHierarchy> enumerate_hierarchies(const ArchSearchConfig& cfg, const SpatialUnrolling& s) {
  struct Option {
    std::size_t entry;
    std::int64_t unroll;
    std::vector<std::uint32_t> masks;
    double area;
  };
  std::vector<Option> options;
  for (std::size_t e = 0; e < cfg.pool.entries.size(); ++e) {
    const auto& entry = cfg.pool.entries[e];
    if (entry.variants.empty()) continue;
    const double area = entry.variants[min_area_variant(entry)].area_um2;
    for (auto u : entry.allowed_unrolls) {
      if (u < 1 || u > cfg.mac.size()) continue;
      auto masks = masks_for(s, u);
      if (!masks.empty()) options.push_back({e, u, std::move(masks), area * static_cast<double>(u)});
    }
  }
  // Picks come out in option order, so chains can be checked while assigning.
  std::stable_sort(options.begin(), options.end(), [&](const Option& a, const Option& b) {
    const auto& ea = cfg.pool.entries[a.entry];
    const auto& eb = cfg.pool.entries[b.entry];
    if (ea.size_bits != eb.size_bits) return ea.size_bits < eb.size_bits;
    if (ea.name != eb.name) return ea.name < eb.name;
    return a.unroll > b.unroll;
  });

  const std::size_t max_levels = kNumOperands * cfg.max_levels_per_operand;
  std::map<std::string, MemoryHierarchy> found;
  std::vector<std::size_t> picked;
  std::vector<int> uses(cfg.pool.entries.size(), 0);

  auto build = [&](const std::vector<std::uint8_t>& serves, const std::vector<std::uint32_t>& masks) {
    struct Proto {
      std::size_t option;
      std::uint8_t serves;
      std::uint32_t mask;
    };
    std::vector<Proto> protos;
    for (std::size_t i = 0; i < picked.size(); ++i) protos.push_back({picked[i], serves[i], masks[i]});
    std::sort(protos.begin(), protos.end(), [&](const Proto& a, const Proto& b) {
      const auto& ea = cfg.pool.entries[options[a.option].entry];
      const auto& eb = cfg.pool.entries[options[b.option].entry];
      if (ea.size_bits != eb.size_bits) return ea.size_bits < eb.size_bits;
      if (ea.name != eb.name) return ea.name < eb.name;
      if (options[a.option].unroll != options[b.option].unroll)
        return options[a.option].unroll > options[b.option].unroll;
      if (a.mask != b.mask) return a.mask < b.mask;
      return a.serves < b.serves;
    });
    MemoryHierarchy h;
    std::map<std::string, int> name_uses;
    for (const auto& p : protos) {
      const auto& opt = options[p.option];
      MemoryLevel l;
      l.entry = cfg.pool.entries[opt.entry];
      const int n = ++name_uses[l.entry.name];
      l.name = n == 1 ? l.entry.name : l.entry.name + "#" + std::to_string(n);
      l.variant = min_area_variant(l.entry);
      l.unroll = opt.unroll;
      l.serves = OperandSet(p.serves);
      l.double_buffered = l.entry.double_buffer_capable;
      l.replication = p.mask;
      h.levels.push_back(std::move(l));
    }
    for (auto op : kAllOperands) {
      auto& chain = h.chains[index(op)];
      for (std::size_t i = 0; i < h.levels.size(); ++i)
        if (h.levels[i].serves.contains(op)) chain.push_back(i);
      if (chain.empty() || chain.size() > cfg.max_levels_per_operand) return;
      for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
        const auto& lo = h.levels[chain[j]];
        const auto& hi = h.levels[chain[j + 1]];
        if (lo.entry.size_bits >= hi.entry.size_bits) return;
        if ((lo.replication & hi.replication) != hi.replication) return;
      }
    }
    h.levels.push_back(make_off_chip_level(cfg.pool.dram));
    for (auto op : kAllOperands) h.chains[index(op)].push_back(h.levels.size() - 1);
    if (total_area(h) > cfg.area_budget_um2) return;
    if (!validate_hierarchy(h, s, cfg.mac).empty()) return;
    h.name = h.key();
    found.emplace(h.name, std::move(h));
  };

  std::vector<std::uint8_t> serves;
  std::vector<std::uint32_t> masks;
  struct ChainTip {
    std::size_t count = 0;
    std::int64_t size = 0;
    std::uint32_t mask = ~0u;
  };
  std::array<ChainTip, kNumOperands> tips{};
  auto assign = [&](auto&& self, std::size_t i) -> void {
    if (i == picked.size()) {
      for (const auto& t : tips)
        if (t.count == 0) return;
      build(serves, masks);
      return;
    }
    const auto& opt = options[picked[i]];
    const auto size = cfg.pool.entries[opt.entry].size_bits;
    for (std::uint8_t sub = 1; sub < 8; ++sub)
      for (auto mask : opt.masks) {
        bool ok = true;
        for (std::size_t k = 0; k < kNumOperands && ok; ++k)
          if (sub & (1u << k))
            ok = tips[k].count < cfg.max_levels_per_operand && tips[k].size < size && (tips[k].mask & mask) == mask;
        if (!ok) continue;
        const auto saved = tips;
        for (std::size_t k = 0; k < kNumOperands; ++k)
          if (sub & (1u << k)) tips[k] = {tips[k].count + 1, size, mask};
        serves[i] = sub;
        masks[i] = mask;
        self(self, i + 1);
        tips = saved;
      }
  };
  auto choose = [&](auto&& self, std::size_t from, double area) -> void {
    if (!picked.empty()) {
      serves.assign(picked.size(), 0);
      masks.assign(picked.size(), 0);
      assign(assign, 0);
    }
    if (picked.size() == max_levels) return;
    for (std::size_t o = from; o < options.size(); ++o) {
      const auto& opt = options[o];
      if (uses[opt.entry] == 3 || area + opt.area > cfg.area_budget_um2) continue;
      ++uses[opt.entry];
      picked.push_back(o);
      self(self, o, area + opt.area);
      picked.pop_back();
      --uses[opt.entry];
    }
  };
  choose(choose, 0, 0.0);

  std::vector<MemoryHierarchy> out;
  for (auto& [key, h] : found) out.push_back(std::move(h));
  return out;
}

std::size_t select_variant(const MemoryPoolEntry& e, const Rational& read_bits_per_cycle,
                           const Rational& write_bits_per_cycle) {
  std::optional<std::size_t> best;
  std::size_t widest = 0;
  for (std::size_t v = 0; v < e.variants.size(); ++v) {
    const auto& var = e.variants[v];
    const auto& w = e.variants[widest];
    if (var.read_bw_bits + var.write_bw_bits > w.read_bw_bits + w.write_bw_bits) widest = v;
    if (Rational(var.read_bw_bits) < read_bits_per_cycle || Rational(var.write_bw_bits) < write_bits_per_cycle)
      continue;
    if (!best || var.area_um2 < e.variants[*best].area_um2) best = v;
  }
  return best.value_or(widest);
}

std::vector<LevelBandwidth> required_level_bandwidth(const LoopInfoTable& info, const MemoryHierarchy& h) {
  std::vector<LevelBandwidth> out(h.levels.size());
  for (const auto& t : info.transfers) {
    const auto window = transfer_window(t, h, info);
    const bool fill = t.dir == Direction::fill;
    auto& parent = out[h.physical(t.op, t.parent)];
    auto& ps = fill ? parent.read : parent.write;
    ps = std::max(ps, Rational(t.parent_elements * t.precision_bits, window));
    if (t.child_is_mac()) continue;
    auto& child = out[h.physical(t.op, t.parent - 1)];
    auto& cs = fill ? child.write : child.read;
    cs = std::max(cs, Rational(t.child_elements * t.precision_bits, window));
  }
  return out;
}

MemoryHierarchy optimize_bandwidth(const MemoryHierarchy& h, const LoopInfoTable& info) {
  MemoryHierarchy out = h;
  const auto need = required_level_bandwidth(info, h);
  for (std::size_t i = 0; i < out.levels.size(); ++i) {
    auto& l = out.levels[i];
    if (l.off_chip) continue;
    l.variant = select_variant(l.entry, need[i].read, need[i].write);
  }
  return out;
}

std::optional<DesignPoint> price_hierarchy(const MemoryHierarchy& h, const SpatialUnrolling& s, std::size_t unrolling,
                                           const LayerSpec& spec, const MacModel& mac, double area_budget,
                                           const SearchOptions& opts) {
  auto result = search(spec, h, s, mac, opts);
  if (!result.found) return std::nullopt;
  const auto info = extract(result.mapping, spec);
  MemoryHierarchy fixed = optimize_bandwidth(h, info);
  if (total_area(fixed) > area_budget) {
    std::vector<std::pair<double, std::size_t>> raises;
    for (std::size_t i = 0; i < fixed.levels.size(); ++i) {
      const auto& l = fixed.levels[i];
      if (l.off_chip || l.variant == h.levels[i].variant) continue;
      raises.emplace_back(-(l.active().area_um2 - h.levels[i].active().area_um2) * static_cast<double>(l.unroll), i);
    }
    std::sort(raises.begin(), raises.end());
    for (const auto& [delta, i] : raises) {
      if (total_area(fixed) <= area_budget) break;
      fixed.levels[i].variant = h.levels[i].variant;
    }
  }
  DesignPoint p;
  p.key = h.key() + "|" + spatial_to_text(s.loops);
  p.base = h;
  p.cost = evaluate_cost(result.mapping, spec, info, fixed, s, mac);
  p.hierarchy = std::move(fixed);
  p.unrolling = unrolling;
  p.search = std::move(result);
  return p;
}

ExploreResult explore(const ArchSearchConfig& cfg, const LayerSpec& spec, const SearchOptions& opts) {
  struct Item {
    std::size_t unrolling;
    MemoryHierarchy h;
  };
  std::vector<Item> items;
  for (std::size_t u = 0; u < cfg.unrollings.size(); ++u)
    for (auto& h : enumerate_hierarchies(cfg, cfg.unrollings[u])) items.push_back({u, std::move(h)});

  SearchOptions inner = opts;
  inner.workers = 1;
  inner.collect_samples = false;
  inner.min_shared_utilization = cfg.min_shared_utilization;
  std::vector<std::optional<DesignPoint>> slots(items.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto work = [&] {
    try {
      for (std::size_t i = next++; i < items.size(); i = next++)
        slots[i] = price_hierarchy(items[i].h, cfg.unrollings[items[i].unrolling], items[i].unrolling, spec, cfg.mac,
                                   cfg.area_budget_um2, inner);
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  };
  const unsigned workers = std::max(1u, opts.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExploreResult r;
  r.hierarchies = static_cast<std::int64_t>(items.size());
  for (auto& s : slots) {
    if (s)
      r.points.push_back(std::move(*s));
    else
      ++r.infeasible;
  }
  std::sort(r.points.begin(), r.points.end(), [](const DesignPoint& a, const DesignPoint& b) { return a.key < b.key; });
  std::vector<ParetoItem> pi;
  for (const auto& p : r.points)
    pi.push_back({p.cost.energy_total_pj, static_cast<double>(p.cost.latency_total), p.cost.area_um2, p.key});
  r.pareto = pareto_front(pi);
  return r;
}

std::vector<std::size_t> pareto_front(std::span<const ParetoItem> items) {
  auto dominates = [](const ParetoItem& a, const ParetoItem& b) {
    return a.energy <= b.energy && a.latency <= b.latency && a.area <= b.area &&
           (a.energy < b.energy || a.latency < b.latency || a.area < b.area);
  };
  auto same = [](const ParetoItem& a, const ParetoItem& b) {
    return a.energy == b.energy && a.latency == b.latency && a.area == b.area;
  };
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    bool keep = true;
    for (std::size_t j = 0; j < items.size() && keep; ++j) {
      if (i == j) continue;
      if (dominates(items[j], items[i])) keep = false;
      if (same(items[j], items[i]) && (items[j].key < items[i].key || (items[j].key == items[i].key && j < i)))
        keep = false;
    }
    if (keep) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = items[a];
    const auto& y = items[b];
    if (x.energy != y.energy) return x.energy < y.energy;
    if (x.latency != y.latency) return x.latency < y.latency;
    return x.key < y.key;
  });
  return out;
}

}  // namespace memflow
