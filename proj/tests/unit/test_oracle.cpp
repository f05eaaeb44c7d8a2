#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "memflow/oracle.hpp"

using namespace memflow;
using D = LoopDim;

TEST_SUITE("oracle") {
  TEST_CASE("every MAC reads a weight") {
    LayerSpec s;
    s.dim(D::K) = 3;
    s.dim(D::C) = 4;
    s.dim(D::OX) = 2;
    const auto h = memflow::testing::single_buffer(1 << 16);
    const std::vector<LoopFactor> seq = {{D::K, 3}, {D::C, 4}, {D::OX, 2}};
    const auto m = build_mapping(seq, {std::vector<std::size_t>{3, 3}, {3, 3}, {3, 3}}, h, {});
    const auto t = simulate(m, s, h, {});
    CHECK(t.macs == 24);
    CHECK(t.at(Operand::W, 0).reads == 24);
    // the buffer is filled once from DRAM
    CHECK(t.at(Operand::W, 0).writes == 12);
    CHECK(t.at(Operand::W, 1).reads == 12);
    CHECK(t.at(Operand::W, 0).peak_occupancy == 12);
  }

  TEST_CASE("sliding window fetches each input once") {
    const auto d = memflow::testing::fifo_demo(3);
    const auto t = simulate(d.mapping, d.spec, d.hierarchy, d.spatial);
    CHECK(t.at(Operand::I, 0).writes == 6);
    CHECK(t.at(Operand::I, 1).reads == 6);
    CHECK(t.macs == 12);
    CHECK(t.compute_cycles == 3);
  }

  TEST_CASE("traffic is conserved on random mappings") {
    std::mt19937_64 rng(51);
    memflow::testing::RandomCaseOptions o;
    o.max_macs = 20'000;
    for (int it = 0; it < 150; ++it) {
      const auto rc = memflow::testing::random_case(rng, o);
      const auto t = simulate(rc.mapping, rc.spec, rc.hierarchy, rc.spatial);
      std::int64_t cycles = 1;
      for (const auto& lv : rc.mapping.of(Operand::W).temporal)
        for (const auto& l : lv) cycles *= l.factor;
      CHECK(t.compute_cycles == cycles);
      CHECK(t.macs == cycles * rc.spatial.lanes());
      for (auto op : kAllOperands) {
        const auto depth = rc.hierarchy.depth(op);
        for (std::size_t j = 0; j < depth; ++j) {
          const auto& l = t.at(op, j);
          CHECK(l.reads >= 0);
          CHECK(l.writes >= 0);
          if (!rc.hierarchy.level(op, j).off_chip) {
            // the fill of level j never exceeds what its units can hold
            const auto& lv = rc.hierarchy.level(op, j);
            const int bits = op == Operand::O ? rc.spec.precision.output_final : rc.spec.precision.bits(op);
            CHECK(l.peak_occupancy * bits <= lv.capacity_bits() * lv.unroll);
          }
        }
        // W and I only flow down: every write below is a read above
        if (op != Operand::O)
          for (std::size_t j = 0; j + 1 < depth; ++j) CHECK(t.at(op, j).writes >= t.at(op, j + 1).reads);
        // the top level holds the whole operand
        if (op != Operand::O) CHECK(t.at(op, depth - 1).writes == 0);
      }
    }
  }

  TEST_CASE("MAC cap") {
    const auto d = memflow::testing::output_tile_demo();
    OracleOptions o;
    o.max_macs = 1000;
    CHECK_THROWS_AS(simulate(d.mapping, d.spec, d.hierarchy, d.spatial, o), std::length_error);
  }

  TEST_CASE("malformed mappings are rejected") {
    auto d = memflow::testing::fifo_demo(3);
    d.mapping.of(Operand::W).temporal.pop_back();
    CHECK_THROWS_AS(simulate(d.mapping, d.spec, d.hierarchy, d.spatial), std::invalid_argument);
  }
}
