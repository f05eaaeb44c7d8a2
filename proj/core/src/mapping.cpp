#include "memflow/mapping.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "memflow/extractor.hpp"

namespace memflow {

std::vector<LoopFactor> temporal_sequence(const OperandMapping& m) {
  std::vector<LoopFactor> seq;
  for (const auto& level : m.temporal) seq.insert(seq.end(), level.begin(), level.end());
  return seq;
}

std::vector<std::size_t> level_cuts(const OperandMapping& m) {
  std::vector<std::size_t> cuts;
  std::size_t n = 0;
  for (const auto& level : m.temporal) {
    n += level.size();
    cuts.push_back(n);
  }
  return cuts;
}

DimSizes mapped_dims(const OperandMapping& m) {
  DimSizes d = unit_dims();
  for (const auto& level : m.temporal)
    for (const auto& l : level) d[index(l.dim)] *= l.factor;
  for (const auto& slot : m.spatial)
    for (const auto& l : slot) d[index(l.dim)] *= l.factor;
  return d;
}

LayerSpec padded_layer(const LayerSpec& spec, const SpatialUnrolling& s) {
  LayerSpec out = spec;
  const auto per_dim = s.per_dim();
  for (auto d : kAllDims) {
    const auto f = per_dim[index(d)];
    out.dim(d) = (spec.dim(d) + f - 1) / f * f;
  }
  return out;
}

MappingScheme build_mapping(std::span<const LoopFactor> sequence,
                            const std::array<std::vector<std::size_t>, kNumOperands>& cuts,
                            const MemoryHierarchy& h, const SpatialUnrolling& s) {
  MappingScheme m;
  for (auto op : kAllOperands) {
    auto& om = m.of(op);
    const auto& c = cuts[index(op)];
    om.temporal.resize(c.size());
    std::size_t begin = 0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      om.temporal[j].assign(sequence.begin() + static_cast<std::ptrdiff_t>(begin),
                            sequence.begin() + static_cast<std::ptrdiff_t>(c[j]));
      begin = c[j];
    }
    om.spatial = spatial_slots(h, s, op);
  }
  return m;
}

bool is_even(const MappingScheme& m, const MemoryHierarchy& h) {
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    std::optional<std::size_t> cut;
    for (auto op : kAllOperands) {
      const auto& chain = h.chains[index(op)];
      const auto it = std::find(chain.begin(), chain.end(), i);
      if (it == chain.end()) continue;
      const auto j = static_cast<std::size_t>(it - chain.begin());
      const auto cuts = level_cuts(m.of(op));
      if (j >= cuts.size()) return false;
      if (cut && *cut != cuts[j]) return false;
      cut = cuts[j];
    }
  }
  // Levels at the same index also cut together, unless one of them is the
  // operand's outermost level.
  std::size_t depth = 0;
  for (auto op : kAllOperands) depth = std::max(depth, m.of(op).depth());
  for (std::size_t j = 0; j + 1 < depth; ++j) {
    std::optional<std::size_t> cut;
    for (auto op : kAllOperands) {
      const auto cuts = level_cuts(m.of(op));
      if (j + 1 >= cuts.size()) continue;
      if (cut && *cut != cuts[j]) return false;
      cut = cuts[j];
    }
  }
  return true;
}

std::vector<std::string> validate_mapping(const MappingScheme& m, const LayerSpec& spec, const MemoryHierarchy& h,
                                          const SpatialUnrolling& s, const MappingCheckOptions& opts) {
  std::vector<std::string> errs;
  const LayerSpec target = padded_layer(spec, s);
  for (auto op : kAllOperands) {
    const auto& om = m.of(op);
    const std::string name(to_string(op));
    if (om.depth() != h.depth(op)) {
      errs.push_back(name + ": mapping has " + std::to_string(om.depth()) + " levels, hierarchy has " +
                     std::to_string(h.depth(op)));
      continue;
    }
    if (om.spatial.size() != om.depth() + 1) {
      errs.push_back(name + ": expected " + std::to_string(om.depth() + 1) + " spatial slots");
      continue;
    }
    if (om.spatial != spatial_slots(h, s, op))
      errs.push_back(name + ": spatial loops do not match the hierarchy's replication");
    for (const auto& level : om.temporal)
      for (const auto& l : level)
        if (l.factor < 2) errs.push_back(name + ": loop factors must be >= 2");
    const auto dims = mapped_dims(om);
    for (auto d : kAllDims)
      if (dims[index(d)] != target.dim(d))
        errs.push_back(name + ": loops over " + std::string(to_string(d)) + " cover " +
                       std::to_string(dims[index(d)]) + ", layer needs " + std::to_string(target.dim(d)));
  }
  if (!errs.empty()) return errs;

  const auto reference = temporal_sequence(m.of(Operand::W));
  for (auto op : {Operand::I, Operand::O})
    if (temporal_sequence(m.of(op)) != reference)
      errs.push_back(std::string(to_string(op)) + ": temporal loop order differs from W");
  if (!errs.empty() || !opts.check_capacity) return errs;

  std::vector<OperandNest> nests;
  for (auto op : kAllOperands) nests.emplace_back(m.of(op), op, spec.stride_x, spec.stride_y);
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    const auto& level = h.levels[i];
    if (level.unbounded()) continue;
    std::int64_t used = 0;
    bool loops_above = false;
    for (auto op : kAllOperands) {
      const auto& chain = h.chains[index(op)];
      const auto it = std::find(chain.begin(), chain.end(), i);
      if (it == chain.end()) continue;
      const auto j = static_cast<std::size_t>(it - chain.begin());
      const auto& nest = nests[index(op)];
      used += nest.footprint(nest.through_level(j)) * spec.precision.bits(op, nest.final_at(j));
      if (nest.temporal_from(j + 1) > 1) loops_above = true;
    }
    const auto cap = level.capacity_bits();
    if (used > cap)
      errs.push_back("level " + level.name + ": needs " + std::to_string(used) + " bits, has " + std::to_string(cap));
    else if (level.serves.size() > 1 && loops_above &&
             static_cast<double>(used) < opts.min_shared_utilization * static_cast<double>(cap))
      errs.push_back("level " + level.name + ": shared level utilization below threshold");
  }
  return errs;
}

std::vector<std::vector<LoopFactor>> enumerate_permutations(std::span<const LoopFactor> loops) {
  std::vector<LoopFactor> v(loops.begin(), loops.end());
  std::sort(v.begin(), v.end());
  std::vector<std::vector<LoopFactor>> out;
  do {
    out.push_back(v);
  } while (std::next_permutation(v.begin(), v.end()));
  return out;
}

std::string loops_to_text(std::span<const LoopFactor> loops) {
  if (loops.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < loops.size(); ++i) {
    if (i) s += ", ";
    s += to_string(loops[i].dim);
    s += ' ';
    s += std::to_string(loops[i].factor);
  }
  return s;
}

std::string spatial_to_text(std::span<const LoopFactor> loops) {
  if (loops.empty()) return "-";
  std::string dims, factors;
  for (std::size_t i = 0; i < loops.size(); ++i) {
    if (i) {
      dims += '|';
      factors += '|';
    }
    dims += to_string(loops[i].dim);
    dims += 'u';
    factors += std::to_string(loops[i].factor);
  }
  return dims + ' ' + factors;
}

std::string to_text(const MappingScheme& m) {
  std::ostringstream os;
  os << "memflow-mapping v1\n";
  for (auto op : kAllOperands) {
    const auto& om = m.of(op);
    os << to_string(op) << '\n';
    os << "  mac " << spatial_to_text(om.spatial.empty() ? std::span<const LoopFactor>{} : om.spatial[0]) << '\n';
    for (std::size_t j = 0; j < om.temporal.size(); ++j) {
      os << "  L" << j << ' ' << loops_to_text(om.temporal[j]);
      if (j + 1 < om.spatial.size() && !om.spatial[j + 1].empty()) os << " / " << spatial_to_text(om.spatial[j + 1]);
      os << '\n';
    }
  }
  return os.str();
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

std::int64_t parse_int(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(line, "bad integer '" + std::string(s) + "'");
  return v;
}

LoopDim parse_dim_or_throw(std::string_view s, std::size_t line) {
  const auto d = parse_dim(s);
  if (!d) throw ParseError(line, "unknown loop dimension '" + std::string(s) + "'");
  return *d;
}

std::vector<LoopFactor> parse_temporal(std::string_view s, std::size_t line) {
  std::vector<LoopFactor> out;
  s = trim(s);
  if (s == "-") return out;
  for (auto item : split(s, ',')) {
    const auto sp = item.find(' ');
    if (sp == std::string_view::npos) throw ParseError(line, "expected 'DIM factor', got '" + std::string(item) + "'");
    out.push_back({parse_dim_or_throw(trim(item.substr(0, sp)), line), parse_int(trim(item.substr(sp + 1)), line)});
  }
  return out;
}

std::vector<LoopFactor> parse_spatial(std::string_view s, std::size_t line) {
  std::vector<LoopFactor> out;
  s = trim(s);
  if (s == "-") return out;
  const auto sp = s.find(' ');
  if (sp == std::string_view::npos) throw ParseError(line, "expected 'Au|Bu fa|fb'");
  const auto dims = split(s.substr(0, sp), '|');
  const auto factors = split(trim(s.substr(sp + 1)), '|');
  if (dims.size() != factors.size()) throw ParseError(line, "spatial dimension and factor counts differ");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    auto d = dims[i];
    if (d.empty() || d.back() != 'u') throw ParseError(line, "spatial loop names end in 'u'");
    d.remove_suffix(1);
    out.push_back({parse_dim_or_throw(d, line), parse_int(factors[i], line)});
  }
  return out;
}

}  // namespace

MappingScheme parse_mapping(std::string_view text) {
  MappingScheme m;
  std::array<bool, kNumOperands> seen{};
  OperandMapping* cur = nullptr;
  std::size_t line_no = 0;
  bool header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "memflow-mapping v1") throw ParseError(line_no, "expected header 'memflow-mapping v1'");
      header = true;
      continue;
    }
    if (const auto op = parse_operand(line)) {
      if (seen[index(*op)]) throw ParseError(line_no, "operand listed twice");
      seen[index(*op)] = true;
      cur = &m.of(*op);
      continue;
    }
    if (!cur) throw ParseError(line_no, "level line before operand header");
    const auto sp = line.find(' ');
    const auto tag = line.substr(0, sp);
    const auto rest = sp == std::string_view::npos ? std::string_view{"-"} : trim(line.substr(sp + 1));
    if (tag == "mac") {
      if (!cur->spatial.empty()) throw ParseError(line_no, "'mac' must be the first line of an operand");
      cur->spatial.push_back(parse_spatial(rest, line_no));
      continue;
    }
    if (tag.size() < 2 || tag.front() != 'L') throw ParseError(line_no, "expected 'mac' or 'L<index>'");
    if (cur->spatial.empty()) throw ParseError(line_no, "missing 'mac' line");
    const auto j = parse_int(tag.substr(1), line_no);
    if (j != static_cast<std::int64_t>(cur->temporal.size())) throw ParseError(line_no, "levels must be consecutive");
    const auto slash = rest.find('/');
    cur->temporal.push_back(parse_temporal(rest.substr(0, slash), line_no));
    cur->spatial.push_back(slash == std::string_view::npos ? std::vector<LoopFactor>{}
                                                           : parse_spatial(rest.substr(slash + 1), line_no));
  }
  if (!header) throw ParseError(line_no, "empty mapping");
  for (auto op : kAllOperands)
    if (!seen[index(op)]) throw ParseError(line_no, "missing operand " + std::string(to_string(op)));
  return m;
}

}  // namespace memflow
