#include <algorithm>
#include <random>
#include <set>
#include <tuple>

#include "doctest.h"
#include "fixtures.hpp"
#include "memflow/archgen.hpp"

using namespace memflow;
using D = LoopDim;

namespace {

MemoryPoolEntry entry(const std::string& name, std::int64_t bits, std::vector<std::int64_t> unrolls,
                      std::vector<MemoryVariant> variants) {
  MemoryPoolEntry e;
  e.name = name;
  e.size_bits = bits;
  e.allowed_unrolls = std::move(unrolls);
  e.variants = std::move(variants);
  return e;
}

MemoryPool tiny_pool() {
  MemoryPool p;
  p.entries.push_back(entry("small", 256, {1, 4}, {{16, 16, 0.5, 0.6, 300.0}, {8, 8, 0.4, 0.5, 200.0}}));
  p.entries.push_back(entry("mid", 1024, {1, 2}, {{32, 32, 1.0, 1.2, 900.0}}));
  p.entries.push_back(entry("big", 8192, {1}, {{64, 64, 2.0, 2.5, 5000.0}}));
  return p;
}

// Level choice of the independent count: (entry, unroll, mask, serves).
using Tuple = std::tuple<std::size_t, std::int64_t, std::uint32_t, std::uint8_t>;

std::size_t brute_count(const ArchSearchConfig& cfg, const SpatialUnrolling& s) {
  const auto& pool = cfg.pool;
  std::vector<Tuple> choices;
  std::vector<double> areas;
  for (std::size_t e = 0; e < pool.entries.size(); ++e) {
    double a = pool.entries[e].variants[0].area_um2;
    for (const auto& v : pool.entries[e].variants) a = std::min(a, v.area_um2);
    for (auto u : pool.entries[e].allowed_unrolls) {
      if (u > cfg.mac.size()) continue;
      for (std::uint32_t mask = 0; mask < (1u << s.loops.size()); ++mask) {
        std::int64_t prod = 1;
        for (std::size_t b = 0; b < s.loops.size(); ++b)
          if (mask & (1u << b)) prod *= s.loops[b].factor;
        if (prod != u) continue;
        for (std::uint8_t sub = 1; sub < 8; ++sub) {
          choices.emplace_back(e, u, mask, sub);
          areas.push_back(a * static_cast<double>(u));
        }
      }
    }
  }

  std::size_t count = 0;
  std::vector<std::size_t> pick;
  auto legal = [&]() {
    for (auto op : kAllOperands) {
      std::vector<Tuple> chain;
      for (auto i : pick)
        if (std::get<3>(choices[i]) & (1u << index(op))) chain.push_back(choices[i]);
      if (chain.empty() || chain.size() > cfg.max_levels_per_operand) return false;
      std::sort(chain.begin(), chain.end(), [&](const Tuple& a, const Tuple& b) {
        return pool.entries[std::get<0>(a)].size_bits < pool.entries[std::get<0>(b)].size_bits;
      });
      for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
        if (pool.entries[std::get<0>(chain[j])].size_bits >= pool.entries[std::get<0>(chain[j + 1])].size_bits)
          return false;
        const auto lo = std::get<2>(chain[j]), hi = std::get<2>(chain[j + 1]);
        if ((lo & hi) != hi) return false;
      }
    }
    return true;
  };
  // multisets of choices, at most three levels per pool entry
  auto rec = [&](auto&& self, std::size_t from, double area) -> void {
    if (!pick.empty() && legal()) ++count;
    if (pick.size() == kNumOperands * cfg.max_levels_per_operand) return;
    for (std::size_t c = from; c < choices.size(); ++c) {
      const auto e = std::get<0>(choices[c]);
      const auto used = std::count_if(pick.begin(), pick.end(), [&](std::size_t i) { return std::get<0>(choices[i]) == e; });
      if (used == 3 || area + areas[c] > cfg.area_budget_um2) continue;
      pick.push_back(c);
      self(self, c, area + areas[c]);
      pick.pop_back();
    }
  };
  rec(rec, 0, 0.0);
  return count;
}

ArchSearchConfig tiny_config(double budget) {
  ArchSearchConfig cfg;
  cfg.pool = tiny_pool();
  cfg.mac = MacModel{2, 2, 1.0};
  cfg.area_budget_um2 = budget;
  cfg.max_levels_per_operand = 2;
  return cfg;
}

}  // namespace

TEST_SUITE("archgen") {
  TEST_CASE("pool expansion") {
    const auto pool = memflow::testing::rf_sample_pool();
    CHECK(expand_pool(pool, MacModel{8, 8, 1.0}).size() == 9);
    CHECK(expand_pool(pool, MacModel{2, 2, 1.0}).size() == 3);
    for (const auto& x : expand_pool(pool, MacModel{8, 8, 1.0}))
      CHECK(x.area_um2 == doctest::Approx(pool.entries[x.entry].variants[x.variant].area_um2 * x.unroll));
  }

  TEST_CASE("variant selection") {
    const auto e = entry("rf", 2048, {1}, {{8, 8, 1, 1, 10}, {16, 16, 1, 1, 20}, {64, 64, 1, 1, 40}});
    CHECK(select_variant(e, Rational(12), Rational(0)) == 1);
    CHECK(select_variant(e, Rational(0), Rational(0)) == 0);
    CHECK(select_variant(e, Rational(100), Rational(0)) == 2);
    CHECK(select_variant(e, Rational(1), Rational(17)) == 2);
    // cheapest among the sufficient ones
    const auto odd = entry("rf", 2048, {1}, {{64, 64, 1, 1, 5}, {16, 16, 1, 1, 20}});
    CHECK(select_variant(odd, Rational(12), Rational(0)) == 0);
  }

  TEST_CASE("budget limits") {
    const auto s = parse_spatial_unrolling("Ku|Cu 2|2");
    CHECK(enumerate_hierarchies(tiny_config(0.0), s).empty());
    // room for one small register file only; it must serve everything
    const auto one = enumerate_hierarchies(tiny_config(250.0), s);
    REQUIRE(one.size() == 1);
    CHECK(one[0].levels.size() == 2);
    CHECK(one[0].levels[0].serves == kAllOperandSet);
  }

  TEST_CASE("enumeration matches an independent count") {
    const auto s = parse_spatial_unrolling("Ku|Cu 2|2");
    for (double budget : {250.0, 1500.0, 7000.0, 20000.0}) {
      const auto cfg = tiny_config(budget);
      const auto hs = enumerate_hierarchies(cfg, s);
      CHECK(hs.size() == brute_count(cfg, s));
      std::set<std::string> keys;
      for (const auto& h : hs) {
        CHECK(total_area(h) <= budget + 1e-9);
        CHECK(validate_hierarchy(h, s, cfg.mac).empty());
        keys.insert(h.key());
      }
      CHECK(keys.size() == hs.size());
      CHECK(std::is_sorted(hs.begin(), hs.end(),
                           [](const MemoryHierarchy& a, const MemoryHierarchy& b) { return a.key() < b.key(); }));
    }
  }

  TEST_CASE("pareto front") {
    std::vector<ParetoItem> items = {{1, 5, 1, "a"}, {2, 2, 1, "b"}, {3, 3, 1, "c"}, {1, 5, 1, "0"}, {5, 1, 9, "d"}};
    const auto f = pareto_front(items);
    REQUIRE(f.size() == 3);
    CHECK(items[f[0]].key == "0");
    CHECK(items[f[1]].key == "b");
    CHECK(items[f[2]].key == "d");

    // order independent and idempotent
    std::mt19937_64 rng(2);
    for (int it = 0; it < 50; ++it) {
      std::vector<ParetoItem> pts;
      std::uniform_int_distribution<int> v(0, 6);
      for (int i = 0; i < 20; ++i) pts.push_back({double(v(rng)), double(v(rng)), double(v(rng)), std::to_string(i)});
      std::vector<std::string> a, b, c;
      for (auto i : pareto_front(pts)) a.push_back(pts[i].key);
      auto shuffled = pts;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (auto i : pareto_front(shuffled)) b.push_back(shuffled[i].key);
      CHECK(a == b);
      std::vector<ParetoItem> front;
      for (auto i : pareto_front(pts)) front.push_back(pts[i]);
      for (auto i : pareto_front(front)) c.push_back(front[i].key);
      CHECK(a == c);
      for (const auto& p : pts) {
        bool dominated = false;
        for (auto i : pareto_front(pts)) {
          const auto& q = pts[i];
          if (q.energy <= p.energy && q.latency <= p.latency && q.area <= p.area) dominated = true;
        }
        CHECK(dominated);
      }
    }
  }

  TEST_CASE("pricing a hierarchy") {
    const auto s = parse_spatial_unrolling("Ku|Cu 2|2");
    auto cfg = tiny_config(20000.0);
    LayerSpec spec;
    spec.dim(D::K) = 4;
    spec.dim(D::C) = 4;
    spec.dim(D::OX) = 4;
    SearchOptions o;
    o.min_shared_utilization = 0.0;
    std::size_t priced = 0;
    for (const auto& h : enumerate_hierarchies(cfg, s)) {
      const auto p = price_hierarchy(h, s, 0, spec, cfg.mac, cfg.area_budget_um2, o);
      if (!p) continue;
      ++priced;
      CHECK(total_area(p->hierarchy) <= cfg.area_budget_um2 + 1e-9);
      CHECK(p->cost.energy_total_pj > 0.0);
      CHECK(p->cost.latency_total >= p->cost.latency_ideal);
      CHECK(p->hierarchy.levels.size() == h.levels.size());
      if (priced > 10) break;
    }
    CHECK(priced > 0);
  }

  TEST_CASE("bandwidth-driven variants") {
    const auto d = memflow::testing::output_tile_demo();
    const auto info = extract(d.mapping, d.spec);
    const auto bw = required_level_bandwidth(info, d.hierarchy);
    CHECK(bw.size() == d.hierarchy.levels.size());
    const auto opt = optimize_bandwidth(d.hierarchy, info);
    for (std::size_t i = 0; i < opt.levels.size(); ++i) {
      if (opt.levels[i].off_chip) continue;
      CHECK(opt.levels[i].variant == select_variant(opt.levels[i].entry, bw[i].read, bw[i].write));
    }
  }
}
