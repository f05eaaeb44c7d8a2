#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "memflow/extractor.hpp"

using namespace memflow;
using D = LoopDim;

TEST_SUITE("extractor") {
  TEST_CASE("output tiles") {
    const auto d = memflow::testing::output_tile_demo();
    CHECK(data_size_unit(d.mapping, d.spec, Operand::O, 0) == 16);
    CHECK(data_size_unit(d.mapping, d.spec, Operand::O, 1) == 5408);
    CHECK(data_size_total(d.mapping, d.spec, Operand::O, 1) == 5408);
    CHECK(unit_counts(d.mapping, d.spec, Operand::W, 0).duplicate == 26);
    const auto u = unit_counts(d.mapping, d.spec, Operand::W, 0);
    CHECK(u.total == 130);
    CHECK(u.unique == 5);
  }

  TEST_CASE("sliding window reuse") {
    const auto d = memflow::testing::fifo_demo(3);
    const auto r = reuse_factors(d.mapping, d.spec, Operand::I, 0);
    CHECK(r.total == Rational(2));
    CHECK(data_size_unit(d.mapping, d.spec, Operand::I, 0) == 6);
    CHECK(mac_ops(d.mapping, d.spec, Operand::I, 0) == 12);
    CHECK(detect_pr_pattern(d.mapping, 0) == PrPattern::fifo_spatiotemporal);

    const auto flat = memflow::testing::fifo_demo(1);
    CHECK(reuse_factors(flat.mapping, flat.spec, Operand::I, 0).total == Rational(1));
  }

  TEST_CASE("refill bandwidth") {
    const auto d = memflow::testing::window_demo(true);
    const auto info = extract(d.mapping, d.spec);
    const auto& w = info.at(Operand::W, 0);
    CHECK(w.data_size_unit == 6);
    CHECK(w.turnaround_cycles == 120);
    CHECK(w.top_ir_product == 5);
    CHECK(w.req_bw_no_db == Rational(1, 4));
    CHECK(w.req_bw_db == Rational(1, 20));
    CHECK(w.req_bw_no_db / w.req_bw_db == Rational(w.top_ir_product));
    CHECK(required_bandwidth(d.mapping, d.spec, Operand::W, 0, false) == Rational(1, 4));
  }

  TEST_CASE("pattern names") {
    CHECK(to_string(PrPattern::none) == "none");
    CHECK(detect_pr_pattern(memflow::testing::window_demo(false).mapping, 0) == PrPattern::none);
  }

  TEST_CASE("metric invariants on random mappings") {
    std::mt19937_64 rng(21);
    for (int it = 0; it < 300; ++it) {
      const auto rc = memflow::testing::random_case(rng);
      const auto info = extract(rc.mapping, rc.spec);
      std::int64_t lanes = rc.spatial.lanes();
      CHECK(info.total_macs == info.cycles * lanes);
      for (auto op : kAllOperands) {
        const auto& lv = info.levels[index(op)];
        REQUIRE(lv.size() == rc.hierarchy.depth(op));
        for (std::size_t j = 0; j < lv.size(); ++j) {
          const auto& l = lv[j];
          CHECK(l.reuse_total == l.reuse_temporal * l.reuse_spatial);
          CHECK(l.unit_count_total == l.unit_count_duplicate * l.unit_count_unique);
          CHECK(l.reuse_total >= Rational(1));
          if (j + 1 < lv.size()) {
            CHECK(lv[j + 1].mac_ops >= l.mac_ops);
            CHECK(lv[j + 1].turnaround_cycles >= l.turnaround_cycles);
          }
        }
        // the top level holds the whole padded operand
        CHECK(lv.back().turnaround_cycles == info.cycles);
      }
      // every MAC reads one weight from the innermost level, broadcasts counted once
      const OperandNest w(rc.mapping.of(Operand::W), Operand::W, rc.spec.stride_x, rc.spec.stride_y);
      CHECK(info.at(Operand::W, 0).access_read * w.spatial_ir_product(0) == info.total_macs);
    }
  }

  TEST_CASE("single metric entry points agree with the table") {
    std::mt19937_64 rng(5);
    for (int it = 0; it < 50; ++it) {
      const auto rc = memflow::testing::random_case(rng);
      const auto info = extract(rc.mapping, rc.spec);
      for (auto op : kAllOperands)
        for (std::size_t j = 0; j < rc.hierarchy.depth(op); ++j) {
          const auto& l = info.at(op, j);
          CHECK(data_size_unit(rc.mapping, rc.spec, op, j) == l.data_size_unit);
          CHECK(data_size_total(rc.mapping, rc.spec, op, j) == l.data_size_total);
          CHECK(turnaround_cycles(rc.mapping, rc.spec, op, j) == l.turnaround_cycles);
          const auto a = access_counts(rc.mapping, rc.spec, op, j);
          CHECK(a.reads == l.access_read);
          CHECK(a.writes == l.access_write);
        }
    }
  }
}
