#include "fixtures.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#ifndef MEMFLOW_DATA_DIR
#error "MEMFLOW_DATA_DIR must be defined"
#endif

namespace memflow::testing {

std::string data_path(const std::string& rel) { return std::string(MEMFLOW_DATA_DIR) + "/" + rel; }

LayerSpec alexnet_conv2() { return workloads_from_json(read_json_file(data_path("workloads/alexnet_conv2.json")))[0]; }

Architecture eyeriss_like() { return architecture_from_json(read_json_file(data_path("arch/eyeriss_like.json"))); }

std::vector<LayerSpec> desk_layers() { return workloads_from_json(read_json_file(data_path("workloads/desk.json"))); }

MemoryPool rf_sample_pool() { return pool_from_json(read_json_file(data_path("pools/rf_sample.json"))); }

MemoryPool desk_pool() { return pool_from_json(read_json_file(data_path("pools/desk_pool.json"))); }

namespace {

// Register file sample scaled by capacity: energy with sqrt(size), area ~linear.
MemoryPoolEntry scaled_entry(const std::string& name, std::int64_t bits, std::size_t variant) {
  static const MemoryVariant base[] = {
      {8, 8, 0.88, 0.98, 4740.06}, {16, 16, 0.99, 1.39, 4825.56}, {64, 64, 2.52, 3.49, 7457.82}};
  const double s = static_cast<double>(bits) / 2048.0;
  MemoryVariant v = base[variant];
  v.read_energy_pj *= std::sqrt(s);
  v.write_energy_pj *= std::sqrt(s);
  v.area_um2 *= std::pow(s, 0.9);
  MemoryPoolEntry e;
  e.name = name;
  e.size_bits = bits;
  e.variants = {v};
  return e;
}

}  // namespace

Architecture desk_arch(const std::string& unrolling, bool shared_buffer, std::int64_t rf_bits,
                       std::int64_t buffer_bits) {
  Architecture a;
  a.name = "desk";
  a.mac = {8, 8, 0.5};
  a.spatial = parse_spatial_unrolling(unrolling);
  const std::uint32_t all = (1u << a.spatial.loops.size()) - 1u;
  auto& h = a.hierarchy;
  const char* rf_names[] = {"W_RF", "I_RF", "O_RF"};
  for (auto op : kAllOperands) {
    MemoryLevel l;
    l.name = rf_names[index(op)];
    l.entry = scaled_entry(l.name, rf_bits, 1);
    l.unroll = a.spatial.lanes();
    l.entry.allowed_unrolls = {l.unroll};
    l.serves = {op};
    l.replication = all;
    h.levels.push_back(l);
  }
  MemoryLevel buf;
  buf.name = "GLB";
  buf.entry = scaled_entry("GLB", buffer_bits, 2);
  buf.serves = shared_buffer ? kAllOperandSet : OperandSet{Operand::I, Operand::O};
  h.levels.push_back(buf);
  OffChipMemory dram;
  dram.read_energy_pj_per_bit = dram.write_energy_pj_per_bit = 10.0;
  dram.read_bw_bits = dram.write_bw_bits = 128;
  h.levels.push_back(make_off_chip_level(dram));
  for (auto op : kAllOperands)
    for (std::size_t i = 0; i < h.levels.size(); ++i)
      if (h.levels[i].serves.contains(op)) h.chains[index(op)].push_back(i);
  return a;
}

Architecture sharing_arch(const std::string& unrolling, SharingKind kind) {
  Architecture a;
  a.name = std::string(to_string(kind));
  a.mac = {8, 8, 0.5};
  a.spatial = parse_spatial_unrolling(unrolling);
  const std::uint32_t all = (1u << a.spatial.loops.size()) - 1u;
  auto& h = a.hierarchy;
  auto add = [&](const std::string& name, std::int64_t bits, std::size_t variant, OperandSet serves, bool per_pe) {
    MemoryLevel l;
    l.name = name;
    l.entry = scaled_entry(name, bits, variant);
    if (per_pe) {
      l.unroll = a.spatial.lanes();
      l.entry.allowed_unrolls = {l.unroll};
      l.replication = all;
    }
    l.serves = serves;
    h.levels.push_back(l);
  };
  switch (kind) {
    case SharingKind::shared_rf_glb:
      add("RF", 3 * 512, 1, kAllOperandSet, true);
      add("GLB", 65536, 2, kAllOperandSet, false);
      break;
    case SharingKind::shared_glb:
      add("GLB", 65536, 2, kAllOperandSet, false);
      break;
    case SharingKind::separate_a:
      add("O_RF", 512, 1, {Operand::O}, true);
      add("I_BUF", 32768, 2, {Operand::I}, false);
      add("O_BUF", 32768, 2, {Operand::O}, false);
      break;
    case SharingKind::separate_b:
      add("O_RF", 512, 1, {Operand::O}, true);
      add("W_BUF", 32768, 2, {Operand::W}, false);
      add("O_BUF", 32768, 2, {Operand::O}, false);
      break;
  }
  OffChipMemory dram;
  dram.read_energy_pj_per_bit = dram.write_energy_pj_per_bit = 10.0;
  dram.read_bw_bits = dram.write_bw_bits = 128;
  h.levels.push_back(make_off_chip_level(dram));
  for (auto op : kAllOperands)
    for (std::size_t i = 0; i < h.levels.size(); ++i)
      if (h.levels[i].serves.contains(op)) h.chains[index(op)].push_back(i);
  return a;
}

std::string_view to_string(SharingKind k) {
  switch (k) {
    case SharingKind::shared_rf_glb: return "shared_rf_glb";
    case SharingKind::shared_glb: return "shared_glb";
    case SharingKind::separate_a: return "separate_a";
    case SharingKind::separate_b: return "separate_b";
  }
  return "?";
}

std::int64_t buffer_bits_for(const LayerSpec& spec, bool shared) {
  std::int64_t bits = operand_size(spec, Operand::I) * spec.precision.bits(Operand::I, true) +
                      operand_size(spec, Operand::O) * spec.precision.bits(Operand::O, true);
  if (shared) bits += operand_size(spec, Operand::W) * spec.precision.bits(Operand::W, true);
  return std::bit_floor(static_cast<std::uint64_t>(bits / 2));
}

std::vector<Instance> regression_suite() {
  struct Cfg {
    const char* tag;
    const char* unrolling;
    bool shared;
    std::int64_t rf;
  };
  const Cfg cfgs[] = {{"kc", "Ku|Cu 8|8", true, 512},
                      {"oxk", "OXu|Ku 8|8", false, 512},
                      {"ck", "Cu|Ku 4|8", true, 256},
                      {"oyoxk", "OYu|OXu|Ku 2|2|8", false, 1024}};
  std::vector<Instance> out;
  for (const auto& layer : desk_layers())
    for (const auto& c : cfgs) {
      auto arch = desk_arch(c.unrolling, c.shared, c.rf, buffer_bits_for(layer, c.shared));
      out.push_back({layer.name + "/" + c.tag, layer, std::move(arch)});
    }
  return out;
}

namespace {

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

int coin(std::mt19937_64& rng, int n = 2) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

LayerSpec random_layer(std::mt19937_64& rng, std::int64_t max_macs) {
  static const std::vector<std::int64_t> sizes = {1, 2, 3, 4, 5, 6, 8};
  for (;;) {
    LayerSpec spec;
    spec.name = "random";
    for (auto d : kAllDims) spec.dim(d) = pick(rng, sizes);
    spec.dim(LoopDim::B) = coin(rng, 4) == 0 ? 2 : 1;
    if (coin(rng, 3) == 0) spec.dim(LoopDim::FX) = spec.dim(LoopDim::FY) = 1;
    if (coin(rng, 4) == 0) spec.stride_x = 2;
    if (coin(rng, 4) == 0) spec.stride_y = 2;
    static const std::vector<Precision> precs = {{8, 8, 24, 8}, {16, 16, 16, 16}, {4, 8, 16, 8}};
    spec.precision = pick(rng, precs);
    if (spec.total_macs() <= max_macs && spec.total_macs() >= 8) return spec;
  }
}

SpatialUnrolling random_unrolling(std::mt19937_64& rng, const LayerSpec& spec, bool allow_padding) {
  SpatialUnrolling s;
  const int n = coin(rng, 3);
  for (int i = 0; i < n; ++i) {
    const auto d = pick(rng, std::vector<LoopDim>(kAllDims.begin(), kAllDims.end()));
    const auto bound = spec.dim(d);
    std::vector<std::int64_t> fs;
    for (std::int64_t f = 2; f <= std::max<std::int64_t>(bound, 2) && f <= 4; ++f)
      if (bound % f == 0 || (allow_padding && f < bound)) fs.push_back(f);
    if (fs.empty()) continue;
    // several loops on one dimension must still fit its bound
    std::int64_t used = 1;
    for (const auto& l : s.loops)
      if (l.dim == d) used *= l.factor;
    const auto f = pick(rng, fs);
    if (used * f > std::max<std::int64_t>(bound, 2) * 2) continue;
    s.loops.push_back({d, f});
  }
  return s;
}

MemoryPoolEntry random_entry(std::mt19937_64& rng, const std::string& name, bool small_bw, bool allow_db) {
  MemoryPoolEntry e;
  e.name = name;
  e.size_bits = 1;
  MemoryVariant v;
  static const std::vector<std::int64_t> bws = {1, 2, 4, 8, 16, 32, 64};
  static const std::vector<std::int64_t> small = {1, 2, 3, 4, 8};
  v.read_bw_bits = small_bw ? pick(rng, small) : pick(rng, bws);
  v.write_bw_bits = small_bw ? pick(rng, small) : pick(rng, bws);
  v.read_energy_pj = 0.5 + coin(rng, 20) * 0.25;
  v.write_energy_pj = 0.5 + coin(rng, 20) * 0.3;
  v.area_um2 = 100.0 + coin(rng, 100);
  e.variants = {v};
  e.port = coin(rng) ? PortType::single_port : PortType::dual_port;
  e.double_buffer_capable = allow_db && coin(rng) == 0;
  return e;
}

}  // namespace

RandomCase random_case(std::mt19937_64& rng, const RandomCaseOptions& opts) {
  RandomCase rc;
  rc.spec = random_layer(rng, opts.max_macs);
  rc.spatial = random_unrolling(rng, rc.spec, opts.allow_padding);
  rc.mac = {std::max<std::int64_t>(rc.spatial.lanes(), 1), 1, 1.0};

  const std::uint32_t all = rc.spatial.loops.empty() ? 0u : (1u << rc.spatial.loops.size()) - 1u;
  auto submask = [&](std::uint32_t mask) {
    std::uint32_t m = 0;
    for (std::size_t b = 0; b < rc.spatial.loops.size(); ++b)
      if ((mask >> b) & 1u && coin(rng)) m |= 1u << b;
    return m;
  };

  // Level groups by index: which operands share a physical level.
  auto& h = rc.hierarchy;
  h.name = "random";
  const std::size_t depth_max = std::max<std::size_t>(2, opts.max_depth);
  std::array<std::size_t, kNumOperands> depth{};
  for (auto op : kAllOperands) depth[index(op)] = 2 + (depth_max > 2 ? coin(rng, static_cast<int>(depth_max) - 1) : 0);
  std::array<std::uint32_t, kNumOperands> mask{};
  for (auto& m : mask) m = all;
  for (std::size_t j = 0; j + 1 < depth_max; ++j) {
    std::vector<Operand> ops;
    for (auto op : kAllOperands)
      if (j + 1 < depth[index(op)]) ops.push_back(op);
    if (ops.empty()) continue;
    std::vector<std::vector<Operand>> groups;
    switch (coin(rng, 3)) {
      case 0:
        for (auto op : ops) groups.push_back({op});
        break;
      case 1:
        groups.push_back(ops);
        break;
      default:
        groups.push_back({ops.front()});
        if (ops.size() > 1) groups.push_back(std::vector<Operand>(ops.begin() + 1, ops.end()));
    }
    for (const auto& g : groups) {
      std::uint32_t common = all;
      for (auto op : g) common &= mask[index(op)];
      MemoryLevel l;
      l.name = "L" + std::to_string(j) + "_" + std::to_string(h.levels.size());
      l.entry = random_entry(rng, l.name, opts.small_bandwidths, opts.allow_double_buffer);
      l.replication = submask(common);
      l.unroll = 1;
      for (std::size_t b = 0; b < rc.spatial.loops.size(); ++b)
        if ((l.replication >> b) & 1u) l.unroll *= rc.spatial.loops[b].factor;
      l.entry.allowed_unrolls = {l.unroll};
      l.double_buffered = l.entry.double_buffer_capable && coin(rng) == 0;
      for (auto op : g) {
        l.serves.insert(op);
        mask[index(op)] = l.replication;
      }
      h.levels.push_back(l);
    }
  }
  OffChipMemory dram;
  dram.read_energy_pj_per_bit = 2.0;
  dram.write_energy_pj_per_bit = 2.5;
  if (opts.small_bandwidths) {
    dram.read_bw_bits = 1 + coin(rng, 8);
    dram.write_bw_bits = 1 + coin(rng, 8);
  }
  h.levels.push_back(make_off_chip_level(dram));
  for (auto op : kAllOperands)
    for (std::size_t i = 0; i < h.levels.size(); ++i)
      if (h.levels[i].serves.contains(op)) h.chains[index(op)].push_back(i);

  // Common temporal sequence over the padded layer, then per-operand cuts.
  const auto padded = padded_layer(rc.spec, rc.spatial);
  DimSizes temporal = padded.dims;
  const auto per_dim = rc.spatial.per_dim();
  for (auto d : kAllDims) temporal[index(d)] /= per_dim[index(d)];
  auto seq = lpf_factorize(temporal);
  std::shuffle(seq.begin(), seq.end(), rng);
  const std::size_t n = seq.size();
  rc.even = coin(rng) == 0;
  std::vector<std::size_t> shared_cuts(depth_max, n);
  {
    std::vector<std::size_t> c(depth_max - 1);
    for (auto& x : c) x = std::uniform_int_distribution<std::size_t>(0, n)(rng);
    std::sort(c.begin(), c.end());
    for (std::size_t j = 0; j + 1 < depth_max; ++j) shared_cuts[j] = c[j];
  }
  std::array<std::vector<std::size_t>, kNumOperands> cuts;
  for (auto op : kAllOperands) {
    const auto d = depth[index(op)];
    auto& c = cuts[index(op)];
    if (rc.even) {
      c.assign(shared_cuts.begin(), shared_cuts.begin() + static_cast<std::ptrdiff_t>(d - 1));
    } else {
      c.resize(d - 1);
      for (auto& x : c) x = std::uniform_int_distribution<std::size_t>(0, n)(rng);
      std::sort(c.begin(), c.end());
    }
    c.push_back(n);
  }
  rc.mapping = build_mapping(seq, cuts, h, rc.spatial);
  rc.even = is_even(rc.mapping, h);

  // Size every on-chip level to exactly what the mapping needs.
  const auto info = extract(rc.mapping, rc.spec);
  std::vector<std::int64_t> need(h.levels.size(), 0);
  for (auto op : kAllOperands)
    for (std::size_t j = 0; j + 1 < h.depth(op); ++j) {
      const auto& li = info.at(op, j);
      need[h.physical(op, j)] += li.data_size_unit * li.precision_bits;
    }
  for (std::size_t i = 0; i < h.levels.size(); ++i)
    if (!h.levels[i].off_chip) h.levels[i].entry.size_bits = std::max<std::int64_t>(need[i], 1);
  return rc;
}

MemoryHierarchy single_buffer(std::int64_t bits, bool double_buffered) {
  MemoryHierarchy h;
  MemoryLevel l;
  l.name = "BUF";
  l.entry.name = "BUF";
  l.entry.size_bits = bits;
  l.entry.variants = {{64, 64, 1.0, 1.0, 100.0}};
  l.entry.double_buffer_capable = double_buffered;
  l.double_buffered = double_buffered;
  l.serves = kAllOperandSet;
  h.levels.push_back(l);
  h.levels.push_back(make_off_chip_level({}));
  for (auto op : kAllOperands) h.chains[index(op)] = {0, 1};
  return h;
}

Demo output_tile_demo(bool even) {
  using D = LoopDim;
  auto a = eyeriss_like();
  Demo d{alexnet_conv2(), a.hierarchy, a.spatial, {}};
  const std::vector<LoopFactor> seq = {{D::FX, 5}, {D::K, 16}, {D::C, 48}, {D::OX, 13}, {D::OX, 2}, {D::K, 16}};
  const std::array<std::vector<std::size_t>, kNumOperands> cuts = {
      std::vector<std::size_t>{2, 6}, {even ? 2u : 1u, 4, 6}, {2, 4, 6}};
  d.mapping = build_mapping(seq, cuts, d.hierarchy, d.spatial);
  return d;
}

Demo fifo_demo(std::int64_t fx) {
  Demo d;
  d.spec.dim(LoopDim::OX) = 4;
  d.spec.dim(LoopDim::FX) = fx;
  d.hierarchy = single_buffer(1 << 16);
  d.spatial = parse_spatial_unrolling("OXu 4");
  std::vector<LoopFactor> seq;
  if (fx > 1) seq.push_back({LoopDim::FX, fx});
  const std::size_t n = seq.size();
  d.mapping = build_mapping(seq, {std::vector<std::size_t>{n, n}, {n, n}, {n, n}}, d.hierarchy, d.spatial);
  return d;
}

Demo window_demo(bool double_buffered) {
  using D = LoopDim;
  Demo d;
  d.spec.dim(D::OX) = 4;
  d.spec.dim(D::K) = 6;
  d.spec.dim(D::OY) = 5;
  d.spec.precision = {1, 1, 1, 1};
  d.hierarchy = single_buffer(1 << 16, double_buffered);
  const std::vector<LoopFactor> seq = {{D::OX, 4}, {D::K, 6}, {D::OY, 5}};
  d.mapping = build_mapping(seq, {std::vector<std::size_t>{3, 3}, {3, 3}, {3, 3}}, d.hierarchy, d.spatial);
  return d;
}

}  // namespace memflow::testing
