#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "memflow/io.hpp"

namespace memflow::testing {

std::string data_path(const std::string& rel);

LayerSpec alexnet_conv2();
Architecture eyeriss_like();
std::vector<LayerSpec> desk_layers();
MemoryPool rf_sample_pool();
MemoryPool desk_pool();

/// Small fixed architecture used by the search regression suite: an 8x8
/// array with per-operand register files, an optional shared buffer and DRAM.
Architecture desk_arch(const std::string& unrolling, bool shared_buffer, std::int64_t rf_bits,
                       std::int64_t buffer_bits);

/// 8x8 arrays for the unrolling sensitivity study. The shared kinds keep
/// every level shared by W, I and O; the separate kinds give each operand
/// its own levels, with some operands read straight from DRAM.
enum class SharingKind { shared_rf_glb, shared_glb, separate_a, separate_b };
std::string_view to_string(SharingKind k);
Architecture sharing_arch(const std::string& unrolling, SharingKind kind);

/// One (layer, architecture) pair of the regression suite.
struct Instance {
  std::string name;
  LayerSpec spec;
  Architecture arch;
};
std::vector<Instance> regression_suite();

/// Random layer, hierarchy, unrolling and mapping with level sizes set to
/// exactly what the mapping needs.
struct RandomCase {
  LayerSpec spec;
  MemoryHierarchy hierarchy;
  SpatialUnrolling spatial;
  MacModel mac;
  MappingScheme mapping;
  bool even = false;
};

struct RandomCaseOptions {
  std::int64_t max_macs = 100'000;
  std::size_t max_depth = 3;  ///< levels per operand, DRAM included
  bool allow_padding = true;
  bool allow_double_buffer = true;
  bool small_bandwidths = false;
};

RandomCase random_case(std::mt19937_64& rng, const RandomCaseOptions& opts = {});

/// One on-chip level serving W, I and O, plus DRAM.
MemoryHierarchy single_buffer(std::int64_t bits, bool double_buffered = false);

/// A fixed mapping used by the worked examples.
struct Demo {
  LayerSpec spec;
  MemoryHierarchy hierarchy;
  SpatialUnrolling spatial;
  MappingScheme mapping;
};

/// AlexNet CONV2 on the Eyeriss-like array. Output tiles hold 16 elements
/// per PE and 5408 in the global buffer. `even` makes Input cut its register
/// file at the same point as W and O.
Demo output_tile_demo(bool even = false);
/// (FX fx) at the buffer over (OXu 4) at the lanes.
Demo fifo_demo(std::int64_t fx);
/// 1-bit weights; W level holds 6 elements, turns around in 120 cycles and
/// has an irrelevant loop of 5 on top.
Demo window_demo(bool double_buffered);

}  // namespace memflow::testing
