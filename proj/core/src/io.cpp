#include "memflow/io.hpp"

#include <fstream>
#include <sstream>

namespace memflow {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw InputError("", where, what); }

const Json& field(const Json& j, const std::string& key, const std::string& at) {
  if (!j.is_object()) fail(at, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) fail(at + "/" + key, "missing field '" + key + "'");
  return *it;
}

std::int64_t as_int(const Json& j, const std::string& at) {
  if (!j.is_number_integer()) fail(at, "expected an integer");
  return j.get<std::int64_t>();
}

double as_double(const Json& j, const std::string& at) {
  if (!j.is_number()) fail(at, "expected a number");
  return j.get<double>();
}

std::string as_string(const Json& j, const std::string& at) {
  if (!j.is_string()) fail(at, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const Json& j, const std::string& at) {
  if (!j.is_boolean()) fail(at, "expected true or false");
  return j.get<bool>();
}

template <class F>
auto opt(const Json& j, const std::string& key, const std::string& at, F&& conv, decltype(conv(j, at)) fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : conv(*it, at + "/" + key);
}

std::pair<std::int64_t, std::int64_t> int_pair(const Json& j, const std::string& at) {
  if (!j.is_array() || j.size() != 2) fail(at, "expected [read, write]");
  return {as_int(j[0], at + "/0"), as_int(j[1], at + "/1")};
}

std::pair<double, double> double_pair(const Json& j, const std::string& at) {
  if (!j.is_array() || j.size() != 2) fail(at, "expected [read, write]");
  return {as_double(j[0], at + "/0"), as_double(j[1], at + "/1")};
}

void check_schema(const Json& j, std::string_view schema) {
  const auto it = j.find("schema");
  if (it != j.end() && (!it->is_string() || it->get<std::string>() != schema))
    fail("/schema", "expected schema '" + std::string(schema) + "'");
}

LayerSpec layer_from_json(const Json& j, const std::string& at) {
  LayerSpec spec;
  spec.name = opt(j, "name", at, as_string, std::string("layer"));
  const auto& dims = field(j, "dims", at);
  if (!dims.is_object()) fail(at + "/dims", "expected an object");
  for (const auto& [key, value] : dims.items()) {
    const auto d = parse_dim(key);
    if (!d) fail(at + "/dims/" + key, "unknown loop dimension '" + key + "'");
    spec.dim(*d) = as_int(value, at + "/dims/" + key);
  }
  if (const auto it = j.find("stride"); it != j.end()) {
    const auto [sx, sy] = int_pair(*it, at + "/stride");
    spec.stride_x = sx;
    spec.stride_y = sy;
  }
  if (const auto it = j.find("precision"); it != j.end()) {
    const auto p = at + "/precision";
    spec.precision.weight = static_cast<int>(as_int(field(*it, "W", p), p + "/W"));
    spec.precision.input = static_cast<int>(as_int(field(*it, "I", p), p + "/I"));
    spec.precision.output_partial = static_cast<int>(as_int(field(*it, "O_partial", p), p + "/O_partial"));
    spec.precision.output_final = static_cast<int>(as_int(field(*it, "O_final", p), p + "/O_final"));
  }
  try {
    validate_layer(spec);
  } catch (const std::invalid_argument& e) {
    fail(at, e.what());
  }
  return spec;
}

MemoryPoolEntry entry_from_json(const Json& j, const std::string& at) {
  MemoryPoolEntry e;
  e.name = as_string(field(j, "name", at), at + "/name");
  e.size_bits = as_int(field(j, "size_bits", at), at + "/size_bits");
  if (e.size_bits <= 0) fail(at + "/size_bits", "size must be positive");
  const auto& vars = field(j, "variants", at);
  if (!vars.is_array() || vars.empty()) fail(at + "/variants", "expected a nonempty list");
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto v = at + "/variants/" + std::to_string(i);
    MemoryVariant mv;
    std::tie(mv.read_bw_bits, mv.write_bw_bits) = int_pair(field(vars[i], "bw_bits", v), v + "/bw_bits");
    std::tie(mv.read_energy_pj, mv.write_energy_pj) = double_pair(field(vars[i], "energy_pj", v), v + "/energy_pj");
    mv.area_um2 = as_double(field(vars[i], "area_um2", v), v + "/area_um2");
    if (mv.read_bw_bits <= 0 || mv.write_bw_bits <= 0) fail(v + "/bw_bits", "bandwidths must be positive");
    if (mv.read_energy_pj <= 0 || mv.write_energy_pj <= 0) fail(v + "/energy_pj", "energies must be positive");
    if (mv.area_um2 <= 0) fail(v + "/area_um2", "area must be positive");
    e.variants.push_back(mv);
  }
  if (const auto it = j.find("unrolls"); it != j.end()) {
    if (!it->is_array() || it->empty()) fail(at + "/unrolls", "expected a nonempty list");
    e.allowed_unrolls.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto u = as_int((*it)[i], at + "/unrolls/" + std::to_string(i));
      if (u < 1) fail(at + "/unrolls/" + std::to_string(i), "unroll must be positive");
      e.allowed_unrolls.push_back(u);
    }
  }
  const auto port = opt(j, "port", at, as_string, std::string("dual"));
  if (port == "single")
    e.port = PortType::single_port;
  else if (port == "dual")
    e.port = PortType::dual_port;
  else
    fail(at + "/port", "port must be 'single' or 'dual'");
  e.double_buffer_capable = opt(j, "double_buffer", at, as_bool, false);
  return e;
}

OffChipMemory dram_from_json(const Json& j, const std::string& at) {
  OffChipMemory d;
  d.name = opt(j, "name", at, as_string, std::string("DRAM"));
  std::tie(d.read_energy_pj_per_bit, d.write_energy_pj_per_bit) =
      double_pair(field(j, "energy_pj_per_bit", at), at + "/energy_pj_per_bit");
  if (const auto it = j.find("bw_bits"); it != j.end())
    std::tie(d.read_bw_bits, d.write_bw_bits) = int_pair(*it, at + "/bw_bits");
  if (d.read_energy_pj_per_bit <= 0 || d.write_energy_pj_per_bit <= 0)
    fail(at + "/energy_pj_per_bit", "energies must be positive");
  if (d.read_bw_bits <= 0 || d.write_bw_bits <= 0) fail(at + "/bw_bits", "bandwidths must be positive");
  return d;
}

MacModel mac_from_json(const Json& j, const std::string& at) {
  MacModel m;
  m.rows = as_int(field(j, "rows", at), at + "/rows");
  m.cols = as_int(field(j, "cols", at), at + "/cols");
  m.mac_energy_pj = as_double(field(j, "energy_pj", at), at + "/energy_pj");
  if (m.rows < 1 || m.cols < 1) fail(at, "array dimensions must be positive");
  if (m.mac_energy_pj <= 0) fail(at + "/energy_pj", "MAC energy must be positive");
  return m;
}

SpatialUnrolling spatial_from_json(const Json& j, const std::string& at) {
  try {
    return parse_spatial_unrolling(as_string(j, at));
  } catch (const std::invalid_argument& e) {
    fail(at, e.what());
  }
}

Json rational(const Rational& r) { return to_string(r); }

Json variant_json(const MemoryVariant& v) {
  Json j;
  j["bw_bits"] = {v.read_bw_bits, v.write_bw_bits};
  j["energy_pj"] = {v.read_energy_pj, v.write_energy_pj};
  j["area_um2"] = v.area_um2;
  return j;
}

Json dram_json(const OffChipMemory& d) {
  Json j;
  j["name"] = d.name;
  j["energy_pj_per_bit"] = {d.read_energy_pj_per_bit, d.write_energy_pj_per_bit};
  j["bw_bits"] = {d.read_bw_bits, d.write_bw_bits};
  return j;
}

Json mac_json(const MacModel& m) {
  Json j;
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  j["energy_pj"] = m.mac_energy_pj;
  return j;
}

}  // namespace

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

Json read_json_file(const std::string& path) {
  const auto text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(path, "byte " + std::to_string(e.byte), e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path, "", "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

SpatialUnrolling parse_spatial_unrolling(std::string_view text) {
  SpatialUnrolling s;
  const auto body = text.substr(0, text.find_last_not_of(" \t\r\n") + 1);
  if (body.empty() || body == "-") return s;
  const auto sp = body.find(' ');
  if (sp == std::string_view::npos) throw std::invalid_argument("expected 'Au|Bu fa|fb'");
  auto split = [](std::string_view v) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= v.size(); ++i)
      if (i == v.size() || v[i] == '|') {
        parts.push_back(v.substr(start, i - start));
        start = i + 1;
      }
    return parts;
  };
  const auto names = split(body.substr(0, sp));
  auto rest = body.substr(sp + 1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  const auto factors = split(rest);
  if (names.size() != factors.size()) throw std::invalid_argument("spatial dimension and factor counts differ");
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto n = names[i];
    if (n.empty() || n.back() != 'u') throw std::invalid_argument("spatial loop names end in 'u'");
    n.remove_suffix(1);
    const auto d = parse_dim(n);
    if (!d) throw std::invalid_argument("unknown loop dimension '" + std::string(n) + "'");
    std::int64_t f = 0;
    try {
      std::size_t used = 0;
      f = std::stoll(std::string(factors[i]), &used);
      if (used != factors[i].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad spatial factor '" + std::string(factors[i]) + "'");
    }
    if (f < 2) throw std::invalid_argument("spatial factors must be >= 2");
    s.loops.push_back({*d, f});
  }
  return s;
}

std::vector<LayerSpec> workloads_from_json(const Json& j) {
  check_schema(j, kWorkloadSchema);
  std::vector<LayerSpec> out;
  if (const auto it = j.find("layers"); it != j.end()) {
    if (!it->is_array() || it->empty()) fail("/layers", "expected a nonempty list");
    for (std::size_t i = 0; i < it->size(); ++i) out.push_back(layer_from_json((*it)[i], "/layers/" + std::to_string(i)));
  } else {
    out.push_back(layer_from_json(j, ""));
  }
  return out;
}

MemoryPool pool_from_json(const Json& j) {
  check_schema(j, kPoolSchema);
  MemoryPool pool;
  const auto& entries = field(j, "entries", "");
  if (!entries.is_array()) fail("/entries", "expected a list");
  for (std::size_t i = 0; i < entries.size(); ++i)
    pool.entries.push_back(entry_from_json(entries[i], "/entries/" + std::to_string(i)));
  pool.dram = dram_from_json(field(j, "dram", ""), "/dram");
  return pool;
}

Architecture architecture_from_json(const Json& j, const MemoryPool* pool) {
  check_schema(j, kArchSchema);
  Architecture a;
  a.name = opt(j, "name", "", as_string, std::string("architecture"));
  a.mac = mac_from_json(field(j, "mac", ""), "/mac");
  a.spatial = spatial_from_json(field(j, "spatial", ""), "/spatial");
  auto& h = a.hierarchy;
  h.name = a.name;
  const auto& levels = field(j, "levels", "");
  if (!levels.is_array()) fail("/levels", "expected a list");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto at = "/levels/" + std::to_string(i);
    const auto& lj = levels[i];
    MemoryLevel l;
    if (const auto it = lj.find("pool_entry"); it != lj.end()) {
      const auto name = as_string(*it, at + "/pool_entry");
      if (!pool) fail(at + "/pool_entry", "no memory pool given to resolve '" + name + "'");
      const auto e = std::find_if(pool->entries.begin(), pool->entries.end(),
                                  [&](const MemoryPoolEntry& x) { return x.name == name; });
      if (e == pool->entries.end()) fail(at + "/pool_entry", "pool has no entry '" + name + "'");
      l.entry = *e;
    } else {
      l.entry = entry_from_json(field(lj, "entry", at), at + "/entry");
    }
    l.name = opt(lj, "name", at, as_string, l.entry.name);
    l.variant = static_cast<std::size_t>(opt(lj, "variant", at, as_int, std::int64_t{0}));
    l.unroll = opt(lj, "unroll", at, as_int, std::int64_t{1});
    const auto serves = as_string(field(lj, "serves", at), at + "/serves");
    for (char c : serves) {
      const auto op = parse_operand(std::string_view(&c, 1));
      if (!op) fail(at + "/serves", "operands are written as letters from 'WIO'");
      l.serves.insert(*op);
    }
    l.double_buffered = opt(lj, "double_buffered", at, as_bool, false);
    if (const auto it = lj.find("replicate"); it != lj.end()) {
      if (!it->is_array()) fail(at + "/replicate", "expected a list of spatial loop indices");
      for (std::size_t k = 0; k < it->size(); ++k) {
        const auto b = as_int((*it)[k], at + "/replicate/" + std::to_string(k));
        if (b < 0 || b >= static_cast<std::int64_t>(a.spatial.loops.size()) || b >= 32)
          fail(at + "/replicate/" + std::to_string(k), "spatial loop index out of range");
        l.replication |= 1u << b;
      }
    }
    h.levels.push_back(std::move(l));
  }
  h.levels.push_back(make_off_chip_level(dram_from_json(field(j, "dram", ""), "/dram")));
  for (auto op : kAllOperands)
    for (std::size_t i = 0; i < h.levels.size(); ++i)
      if (h.levels[i].serves.contains(op)) h.chains[index(op)].push_back(i);
  if (const auto errs = validate_hierarchy(h, a.spatial, a.mac); !errs.empty()) fail("/levels", errs.front());
  return a;
}

ArchSearchConfig search_config_from_json(const Json& j, const MemoryPool& pool) {
  check_schema(j, kSearchSchema);
  ArchSearchConfig cfg;
  cfg.pool = pool;
  cfg.area_budget_um2 = as_double(field(j, "area_budget_um2", ""), "/area_budget_um2");
  if (cfg.area_budget_um2 < 0) fail("/area_budget_um2", "budget must not be negative");
  cfg.mac = mac_from_json(field(j, "mac", ""), "/mac");
  const auto& un = field(j, "unrollings", "");
  if (!un.is_array() || un.empty()) fail("/unrollings", "expected a nonempty list");
  for (std::size_t i = 0; i < un.size(); ++i) {
    const auto at = "/unrollings/" + std::to_string(i);
    cfg.unrollings.push_back(spatial_from_json(un[i], at));
    if (cfg.unrollings.back().lanes() > cfg.mac.size()) fail(at, "unrolling exceeds the MAC array");
  }
  cfg.max_levels_per_operand =
      static_cast<std::size_t>(opt(j, "max_levels_per_operand", "", as_int, std::int64_t{3}));
  if (cfg.max_levels_per_operand < 1) fail("/max_levels_per_operand", "must be at least 1");
  cfg.min_shared_utilization = opt(j, "min_shared_utilization", "", as_double, 0.7);
  return cfg;
}

Json to_json(const LayerSpec& spec) {
  Json j;
  j["name"] = spec.name;
  Json dims = Json::object();
  for (auto d : kAllDims) dims[std::string(to_string(d))] = spec.dim(d);
  j["dims"] = dims;
  j["stride"] = {spec.stride_x, spec.stride_y};
  j["precision"] = {{"W", spec.precision.weight},
                    {"I", spec.precision.input},
                    {"O_partial", spec.precision.output_partial},
                    {"O_final", spec.precision.output_final}};
  return j;
}

Json to_json(const MemoryPoolEntry& e) {
  Json j;
  j["name"] = e.name;
  j["size_bits"] = e.size_bits;
  j["variants"] = Json::array();
  for (const auto& v : e.variants) j["variants"].push_back(variant_json(v));
  j["unrolls"] = e.allowed_unrolls;
  j["port"] = e.port == PortType::single_port ? "single" : "dual";
  j["double_buffer"] = e.double_buffer_capable;
  return j;
}

Json to_json(const MemoryPool& pool) {
  Json j;
  j["schema"] = kPoolSchema;
  j["entries"] = Json::array();
  for (const auto& e : pool.entries) j["entries"].push_back(to_json(e));
  j["dram"] = dram_json(pool.dram);
  return j;
}

Json to_json(const MemoryHierarchy& h, const SpatialUnrolling& s) {
  Json j;
  j["key"] = h.key();
  j["area_um2"] = total_area(h);
  j["levels"] = Json::array();
  for (const auto& l : h.levels) {
    if (l.off_chip) {
      OffChipMemory d;
      d.name = l.name;
      d.read_energy_pj_per_bit = l.active().read_energy_pj;
      d.write_energy_pj_per_bit = l.active().write_energy_pj;
      d.read_bw_bits = l.active().read_bw_bits;
      d.write_bw_bits = l.active().write_bw_bits;
      j["dram"] = dram_json(d);
      continue;
    }
    Json lj;
    lj["name"] = l.name;
    lj["entry"] = to_json(l.entry);
    lj["variant"] = l.variant;
    lj["unroll"] = l.unroll;
    lj["serves"] = l.serves.to_string();
    lj["double_buffered"] = l.double_buffered;
    Json rep = Json::array();
    for (std::size_t b = 0; b < s.loops.size(); ++b)
      if (l.replication & (1u << b)) rep.push_back(b);
    lj["replicate"] = rep;
    j["levels"].push_back(lj);
  }
  return j;
}

Json to_json(const Architecture& a) {
  Json j;
  j["schema"] = kArchSchema;
  j["name"] = a.name;
  j["mac"] = mac_json(a.mac);
  j["spatial"] = spatial_to_text(a.spatial.loops);
  const auto h = to_json(a.hierarchy, a.spatial);
  j["levels"] = h["levels"];
  if (h.contains("dram")) j["dram"] = h["dram"];
  return j;
}

Json to_json(const CostReport& r) {
  Json j;
  j["energy_total_pj"] = r.energy_total_pj;
  j["mac_energy_pj"] = r.mac_energy_pj;
  j["energy_breakdown"] = Json::array();
  for (const auto& e : r.energy_breakdown) {
    Json ej;
    ej["operand"] = to_string(e.op);
    ej["level"] = e.level;
    ej["memory"] = e.memory;
    ej["element_reads"] = e.element_reads;
    ej["element_writes"] = e.element_writes;
    ej["word_reads"] = e.word_reads;
    ej["word_writes"] = e.word_writes;
    ej["read_pj"] = e.read_pj;
    ej["write_pj"] = e.write_pj;
    j["energy_breakdown"].push_back(ej);
  }
  j["area_um2"] = r.area_um2;
  j["total_macs"] = r.total_macs;
  j["cycles_mapped"] = r.cycles_mapped;
  j["latency_ideal"] = r.latency_ideal;
  j["stall_spatial"] = r.stall_spatial;
  j["stall_temporal"] = r.stall_temporal;
  j["latency_total"] = r.latency_total;
  j["utilization"] = r.utilization;
  j["spatial_utilization"] = r.spatial_utilization;
  j["effective_sizes"] = Json::array();
  for (const auto& e : r.effective_sizes) {
    Json ej;
    ej["operand"] = to_string(e.op);
    ej["level"] = e.level;
    ej["allocated_bits"] = e.allocated_bits;
    ej["effective_bits"] = e.effective_bits;
    ej["gatable_fraction"] = e.gatable_fraction();
    j["effective_sizes"].push_back(ej);
  }
  return j;
}

Json to_json(const LoopInfoTable& info) {
  Json j;
  j["total_macs"] = info.total_macs;
  j["cycles"] = info.cycles;
  for (auto op : kAllOperands) {
    Json levels = Json::array();
    for (const auto& li : info.levels[index(op)]) {
      Json l;
      l["data_size_unit"] = li.data_size_unit;
      l["data_size_total"] = li.data_size_total;
      l["mac_ops"] = li.mac_ops;
      l["turnaround_cycles"] = li.turnaround_cycles;
      l["reuse_temporal"] = rational(li.reuse_temporal);
      l["reuse_spatial"] = rational(li.reuse_spatial);
      l["reuse_total"] = rational(li.reuse_total);
      l["unit_count_total"] = li.unit_count_total;
      l["unit_count_duplicate"] = li.unit_count_duplicate;
      l["unit_count_unique"] = li.unit_count_unique;
      l["access_read"] = li.access_read;
      l["access_write"] = li.access_write;
      l["req_bw_no_db"] = rational(li.req_bw_no_db);
      l["req_bw_db"] = rational(li.req_bw_db);
      l["top_ir_product"] = li.top_ir_product;
      l["precision_bits"] = li.precision_bits;
      l["final_output"] = li.final_output;
      l["pr_pattern"] = to_string(li.pr_pattern);
      levels.push_back(l);
    }
    j[std::string(to_string(op))] = levels;
  }
  return j;
}

Json to_json(const SearchStats& s) {
  Json j;
  j["blockings"] = s.blockings;
  j["valid_blockings"] = s.valid_blockings;
  j["pruned_blockings"] = s.pruned_blockings;
  j["evaluated"] = s.evaluated;
  j["partial_evaluated"] = s.partial_evaluated;
  j["energy_min_pj"] = s.energy_min;
  j["energy_max_pj"] = s.energy_max;
  j["latency_min"] = s.latency_min;
  j["latency_max"] = s.latency_max;
  return j;
}

Json to_json(const SimTrace& t) {
  Json j;
  j["macs"] = t.macs;
  j["compute_cycles"] = t.compute_cycles;
  j["total_cycles"] = t.total_cycles;
  j["stall_per_level"] = t.stall_per_level;
  for (auto op : kAllOperands) {
    Json levels = Json::array();
    for (const auto& l : t.levels[index(op)])
      levels.push_back({{"reads", l.reads}, {"writes", l.writes}, {"peak_occupancy", l.peak_occupancy}});
    j[std::string(to_string(op))] = levels;
  }
  return j;
}

Json to_json(const ArchSearchConfig& cfg) {
  Json j;
  j["schema"] = kSearchSchema;
  j["area_budget_um2"] = cfg.area_budget_um2;
  j["mac"] = mac_json(cfg.mac);
  j["unrollings"] = Json::array();
  for (const auto& u : cfg.unrollings) j["unrollings"].push_back(spatial_to_text(u.loops));
  j["max_levels_per_operand"] = cfg.max_levels_per_operand;
  j["min_shared_utilization"] = cfg.min_shared_utilization;
  return j;
}

}  // namespace memflow
