#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "memflow/mapping.hpp"
#include "memflow/tmg.hpp"

using namespace memflow;
using D = LoopDim;

TEST_SUITE("mapping") {
  TEST_CASE("permutation counts") {
    CHECK(enumerate_permutations(std::vector<LoopFactor>{{D::C, 2}, {D::OX, 2}}).size() == 2);
    CHECK(enumerate_permutations(std::vector<LoopFactor>{{D::C, 2}, {D::C, 2}}).size() == 1);
    CHECK(enumerate_permutations(std::vector<LoopFactor>{{D::K, 2}, {D::C, 3}, {D::OX, 5}}).size() == 6);
    CHECK(enumerate_permutations(std::vector<LoopFactor>{}).size() == 1);
    const auto p = enumerate_permutations(std::vector<LoopFactor>{{D::K, 2}, {D::C, 3}, {D::K, 2}});
    CHECK(p.size() == 3);
    CHECK(std::is_sorted(p.begin(), p.end()));
  }

  TEST_CASE("even and uneven schemes") {
    const auto uneven = memflow::testing::output_tile_demo(false);
    const auto even = memflow::testing::output_tile_demo(true);
    CHECK_FALSE(is_even(uneven.mapping, uneven.hierarchy));
    CHECK(is_even(even.mapping, even.hierarchy));

    // everything in one level
    auto h = memflow::testing::single_buffer(1 << 20);
    LayerSpec s;
    s.dim(D::K) = 4;
    s.dim(D::C) = 3;
    const auto seq = lpf_factorize(s);
    const auto n = seq.size();
    const auto m = build_mapping(seq, {std::vector<std::size_t>{n, n}, {n, n}, {n, n}}, h, {});
    CHECK(is_even(m, h));
  }

  TEST_CASE("evenness ignores order inside virtual levels") {
    for (const auto& in : memflow::testing::regression_suite()) {
      if (in.name != "desk_a/kc" && in.name != "desk_c/ck") continue;
      const auto& h = in.arch.hierarchy;
      for (const auto& b : generate_schemes(in.spec, h, in.arch.spatial)) {
        const bool even = is_even(b.canonical(h, in.arch.spatial), h);
        auto ordered = b.virtual_levels;
        for (auto& vl : ordered) std::reverse(vl.begin(), vl.end());
        CHECK(is_even(b.to_mapping(ordered, h, in.arch.spatial), h) == even);
      }
    }
  }

  TEST_CASE("validation") {
    const auto demo = memflow::testing::output_tile_demo();
    CHECK(validate_mapping(demo.mapping, demo.spec, demo.hierarchy, demo.spatial).empty());

    auto half = demo.mapping;
    for (auto op : kAllOperands) {
      auto& top = half.of(op).temporal.back();
      top.back() = {D::K, 8};
    }
    CHECK_FALSE(validate_mapping(half, demo.spec, demo.hierarchy, demo.spatial).empty());

    auto swapped = demo.mapping;
    auto& l1 = swapped.of(Operand::I).temporal[1];
    std::swap(l1[0], l1[1]);
    CHECK_FALSE(validate_mapping(swapped, demo.spec, demo.hierarchy, demo.spatial).empty());

    auto too_deep = demo.mapping;
    too_deep.of(Operand::W).temporal.insert(too_deep.of(Operand::W).temporal.begin(), std::vector<LoopFactor>{});
    CHECK_FALSE(validate_mapping(too_deep, demo.spec, demo.hierarchy, demo.spatial).empty());

    // W register file holds 224 16-bit values; 5*16*48 does not fit
    auto big = demo.mapping;
    const std::vector<LoopFactor> seq = {{D::FX, 5}, {D::K, 16}, {D::C, 48}, {D::OX, 13}, {D::OX, 2}, {D::K, 16}};
    big = build_mapping(seq, {std::vector<std::size_t>{3, 6}, {1, 4, 6}, {2, 4, 6}}, demo.hierarchy, demo.spatial);
    CHECK_FALSE(validate_mapping(big, demo.spec, demo.hierarchy, demo.spatial).empty());
    MappingCheckOptions loose;
    loose.check_capacity = false;
    CHECK(validate_mapping(big, demo.spec, demo.hierarchy, demo.spatial, loose).empty());
  }

  TEST_CASE("shared level utilization threshold") {
    const auto demo = memflow::testing::output_tile_demo();
    MappingCheckOptions strict;
    strict.min_shared_utilization = 0.7;
    // the buffer holds far less than 70% of 884736 bits
    CHECK_FALSE(validate_mapping(demo.mapping, demo.spec, demo.hierarchy, demo.spatial, strict).empty());
  }

  TEST_CASE("text round trip") {
    std::mt19937_64 rng(11);
    for (int it = 0; it < 200; ++it) {
      const auto rc = memflow::testing::random_case(rng);
      const auto text = to_text(rc.mapping);
      const auto back = parse_mapping(text);
      CHECK(back == rc.mapping);
      CHECK(to_text(back) == text);
    }
  }

  TEST_CASE("text form") {
    const auto demo = memflow::testing::output_tile_demo();
    const auto text = to_text(demo.mapping);
    CHECK(text.rfind("memflow-mapping v1\n", 0) == 0);
    CHECK(text.find("L0 FX 5, K 16 / FYu|OYu|OYu 5|13|2") != std::string::npos);
    CHECK(spatial_to_text(demo.spatial.loops) == "FYu|OYu|OYu 5|13|2");
    CHECK(loops_to_text(std::vector<LoopFactor>{{D::C, 2}, {D::OX, 2}}) == "C 2, OX 2");
  }

  TEST_CASE("parse errors carry a line") {
    const std::string bad = "memflow-mapping v1\nW\n  mac -\n  L0 Q 5\n";
    try {
      parse_mapping(bad);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
    CHECK_THROWS_AS(parse_mapping("not a mapping"), ParseError);
  }

  TEST_CASE("padding") {
    LayerSpec s;
    s.dim(D::OX) = 13;
    s.dim(D::K) = 3;
    const auto p = padded_layer(s, parse_spatial_unrolling("OXu|Ku 14|2"));
    CHECK(p.dim(D::OX) == 14);
    CHECK(p.dim(D::K) == 4);
    CHECK(padded_layer(s, {}) == s);
  }

  TEST_CASE("cuts and sequences") {
    const auto demo = memflow::testing::output_tile_demo();
    const auto& i = demo.mapping.of(Operand::I);
    CHECK(level_cuts(i) == std::vector<std::size_t>{1, 4, 6});
    CHECK(temporal_sequence(i) == temporal_sequence(demo.mapping.of(Operand::W)));
    CHECK(mapped_dims(i) == demo.spec.dims);
  }
}
