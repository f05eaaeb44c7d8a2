#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "memflow/io.hpp"

namespace fs = std::filesystem;
using namespace memflow;

namespace {

constexpr std::string_view kMetaSchema = "memflow.meta/1";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string out_dir;
  unsigned workers = 1;
  std::string layer;
};

struct SearchFlags {
  std::string strategy = "heuristic";
  std::size_t beam = 100;
  std::optional<double> min_util;
  std::string objective = "energy";
  bool even_only = false;
};

// Inputs carry their file name into error records.
template <class F>
auto in_file(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const InputError& e) {
    throw e.in_file(path);
  } catch (const ParseError& e) {
    throw InputError(path, "line " + std::to_string(e.line()), e.what());
  }
}

std::vector<LayerSpec> load_layers(const std::string& path, const std::string& only) {
  auto layers = in_file(path, [&] { return workloads_from_json(read_json_file(path)); });
  if (only.empty()) return layers;
  std::vector<LayerSpec> out;
  for (auto& l : layers)
    if (l.name == only) out.push_back(l);
  if (out.empty()) throw InputError(path, "/layers", "no layer named '" + only + "'");
  return out;
}

std::optional<MemoryPool> load_pool(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return in_file(path, [&] { return pool_from_json(read_json_file(path)); });
}

Architecture load_arch(const std::string& path, const std::optional<MemoryPool>& pool) {
  return in_file(path, [&] { return architecture_from_json(read_json_file(path), pool ? &*pool : nullptr); });
}

MappingScheme load_mapping(const std::string& path) {
  return in_file(path, [&] { return parse_mapping(read_text_file(path)); });
}

SearchOptions search_options(const SearchFlags& f, unsigned workers) {
  SearchOptions o;
  const auto s = parse_strategy(f.strategy);
  if (!s) throw UsageError("unknown strategy '" + f.strategy + "'");
  o.strategy = *s;
  const auto obj = parse_objective(f.objective);
  if (!obj) throw UsageError("unknown objective '" + f.objective + "'");
  o.objective = *obj;
  if (f.beam < 1) throw UsageError("beam must be at least 1");
  o.beam = f.beam;
  if (f.min_util) {
    if (*f.min_util < 0 || *f.min_util > 1) throw UsageError("min-util must lie in [0, 1]");
    o.min_shared_utilization = *f.min_util;
  }
  o.even_only = f.even_only;
  o.workers = std::max(1u, workers);
  return o;
}

Json search_json(const SearchOptions& o) {
  Json j;
  j["strategy"] = to_string(o.strategy);
  j["beam"] = o.beam;
  j["min_shared_utilization"] = o.min_shared_utilization;
  j["objective"] = to_string(o.objective);
  j["even_only"] = o.even_only;
  return j;
}

Json layers_json(const std::vector<LayerSpec>& layers) {
  Json j = Json::array();
  for (const auto& l : layers) j.push_back(to_json(l));
  return j;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

class Output {
 public:
  explicit Output(const Common& c) : dir_(c.out_dir), workers_(c.workers) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }

  void file(const std::string& name, const std::string& content) {
    if (dir_.empty()) return;
    write_text_file((fs::path(dir_) / name).string(), content);
  }

  // Without an output directory the result goes to stdout.
  void result(const Json& j) {
    if (dir_.empty())
      std::cout << dump(j);
    else
      file("result.json", dump(j));
  }

  // Timestamp and wall time stay out of the result so reruns compare equal.
  void meta(const std::string& command, double wall) {
    if (dir_.empty()) return;
    Json j;
    j["schema"] = kMetaSchema;
    j["command"] = command;
    j["timestamp"] = utc_now();
    j["wall_seconds"] = wall;
    j["workers"] = workers_;
    file("meta.json", dump(j));
  }

 private:
  std::string dir_;
  unsigned workers_;
};

Json layer_record(const LayerSpec& spec, const SearchResult& r) {
  Json j;
  j["layer"] = spec.name;
  j["found"] = r.found;
  if (r.found) {
    j["mapping"] = r.mapping_text;
    j["cost"] = to_json(r.cost);
    j["loop_info"] = to_json(extract(r.mapping, spec));
  }
  j["stats"] = to_json(r.stats);
  return j;
}

std::string samples_csv(const std::vector<Sample>& samples) {
  std::ostringstream os;
  os << "energy_pj,latency_cycles\n";
  os << std::setprecision(17);
  for (const auto& s : samples) os << s.energy_pj << ',' << s.latency << '\n';
  return os.str();
}

void error_record(const std::string& kind, const std::string& message, const std::string& file = {},
                  const std::string& location = {}) {
  Json e;
  e["kind"] = kind;
  e["message"] = message;
  if (!file.empty()) e["file"] = file;
  if (!location.empty()) e["location"] = location;
  Json j;
  j["error"] = e;
  std::cerr << j.dump() << '\n';
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string workload, arch, pool, mapping;
  bool simulate = false;
};

int run_evaluate(const Common& c, const EvaluateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto layers = load_layers(a.workload, c.layer);
  if (layers.size() != 1) throw UsageError("evaluate needs exactly one layer; pick one with --layer");
  const auto& spec = layers.front();
  const auto pool = load_pool(a.pool);
  const auto arch = load_arch(a.arch, pool);
  const auto m = load_mapping(a.mapping);

  Json res;
  res["schema"] = kResultSchema;
  res["command"] = "evaluate";
  Json cfg;
  cfg["workload"] = layers_json(layers);
  cfg["architecture"] = to_json(arch);
  cfg["mapping"] = to_text(m);
  cfg["simulate"] = a.simulate;
  res["config"] = cfg;

  Json rec;
  rec["layer"] = spec.name;
  rec["mapping"] = to_text(m);
  const auto errs = validate_mapping(m, spec, arch.hierarchy, arch.spatial);
  rec["valid"] = errs.empty();
  if (!errs.empty()) {
    rec["errors"] = errs;
  } else {
    const auto info = extract(m, spec);
    rec["cost"] = to_json(evaluate_cost(m, spec, info, arch.hierarchy, arch.spatial, arch.mac));
    rec["loop_info"] = to_json(info);
    if (a.simulate) rec["trace"] = to_json(simulate(m, spec, arch.hierarchy, arch.spatial));
  }
  res["layers"] = Json::array({rec});

  Output out(c);
  out.result(res);
  out.meta("evaluate", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  if (errs.empty()) return 0;
  error_record("invalid_mapping", errs.front(), a.mapping);
  return 3;
}

// ---- schedule -------------------------------------------------------------

struct ScheduleArgs {
  std::string workload, arch, pool, pin;
  bool samples = false;
};

int run_schedule(const Common& c, const ScheduleArgs& a, const SearchFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto layers = load_layers(a.workload, c.layer);
  const auto pool = load_pool(a.pool);
  const auto arch = load_arch(a.arch, pool);
  auto opts = search_options(f, c.workers);
  opts.collect_samples = a.samples;
  if (!a.pin.empty()) opts.pinned = load_mapping(a.pin);

  Json res;
  res["schema"] = kResultSchema;
  res["command"] = "schedule";
  Json cfg;
  cfg["workload"] = layers_json(layers);
  cfg["architecture"] = to_json(arch);
  cfg["search"] = search_json(opts);
  if (opts.pinned) cfg["pinned"] = to_text(*opts.pinned);
  res["config"] = cfg;
  res["layers"] = Json::array();

  Output out(c);
  for (const auto& spec : layers) {
    const auto r = search(spec, arch.hierarchy, arch.spatial, arch.mac, opts);
    res["layers"].push_back(layer_record(spec, r));
    if (a.samples) out.file("samples_" + spec.name + ".csv", samples_csv(r.samples));
  }
  out.result(res);
  out.meta("schedule", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// ---- explore / pareto ------------------------------------------------------

Json point_json(const std::string& layer, const DesignPoint& p, const ArchSearchConfig& cfg) {
  Json j;
  j["layer"] = layer;
  j["key"] = p.key;
  j["unrolling"] = spatial_to_text(cfg.unrollings[p.unrolling].loops);
  j["area_um2"] = p.cost.area_um2;
  j["energy_pj"] = p.cost.energy_total_pj;
  j["latency_cycles"] = p.cost.latency_total;
  j["utilization"] = p.cost.utilization;
  j["mapping"] = p.search.mapping_text;
  return j;
}

std::vector<ParetoItem> pareto_items(const Json& points, const std::string& file) {
  std::vector<ParetoItem> items;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const auto at = "/points/" + std::to_string(i);
    try {
      items.push_back({p.at("energy_pj").get<double>(), p.at("latency_cycles").get<double>(),
                       p.at("area_um2").get<double>(), p.at("key").get<std::string>()});
    } catch (const Json::exception& e) {
      throw InputError(file, at, e.what());
    }
  }
  return items;
}

// Front per layer; layers keep their first-appearance order.
Json pareto_json(const Json& points, const std::string& file) {
  std::vector<std::string> order;
  std::map<std::string, Json> by_layer;
  for (const auto& p : points) {
    const auto layer = p.value("layer", std::string());
    if (!by_layer.count(layer)) {
      order.push_back(layer);
      by_layer[layer] = Json::array();
    }
    by_layer[layer].push_back(p);
  }
  Json j;
  j["schema"] = kParetoSchema;
  j["points"] = Json::array();
  for (const auto& layer : order) {
    const auto& group = by_layer[layer];
    const auto items = pareto_items(group, file);
    for (auto i : pareto_front(items)) j["points"].push_back(group[i]);
  }
  return j;
}

std::string points_csv(const Json& points) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "layer,key,unrolling,area_um2,energy_pj,latency_cycles,utilization\n";
  for (const auto& p : points)
    os << p["layer"].get<std::string>() << ",\"" << p["key"].get<std::string>() << "\","
       << p["unrolling"].get<std::string>() << ',' << p["area_um2"].get<double>() << ','
       << p["energy_pj"].get<double>() << ',' << p["latency_cycles"].get<std::int64_t>() << ','
       << p["utilization"].get<double>() << '\n';
  return os.str();
}

struct ExploreArgs {
  std::string workload, pool, search;
  std::optional<double> budget;
};

int run_explore(const Common& c, const ExploreArgs& a, const SearchFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto layers = load_layers(a.workload, c.layer);
  const auto pool = *load_pool(a.pool);
  auto cfg = in_file(a.search, [&] { return search_config_from_json(read_json_file(a.search), pool); });
  if (a.budget) {
    if (*a.budget < 0) throw UsageError("budget must not be negative");
    cfg.area_budget_um2 = *a.budget;
  }
  if (f.min_util) cfg.min_shared_utilization = *f.min_util;
  auto opts = search_options(f, c.workers);
  opts.min_shared_utilization = cfg.min_shared_utilization;

  Json res;
  res["schema"] = kResultSchema;
  res["command"] = "explore";
  Json rc;
  rc["workload"] = layers_json(layers);
  rc["search_config"] = to_json(cfg);
  rc["search"] = search_json(opts);
  res["config"] = rc;
  res["layers"] = Json::array();

  Json points;
  points["schema"] = kPointsSchema;
  points["points"] = Json::array();
  for (const auto& spec : layers) {
    const auto r = explore(cfg, spec, opts);
    Json rec;
    rec["layer"] = spec.name;
    rec["hierarchies"] = r.hierarchies;
    rec["infeasible"] = r.infeasible;
    rec["found"] = !r.points.empty();
    const DesignPoint* best = nullptr;
    for (const auto& p : r.points) {
      points["points"].push_back(point_json(spec.name, p, cfg));
      const double o = p.cost.objective(opts.objective), b = best ? best->cost.objective(opts.objective) : 0.0;
      if (!best || o < b || (o == b && p.key < best->key)) best = &p;
    }
    if (best) {
      Json bj;
      bj["key"] = best->key;
      bj["architecture"] = to_json(best->hierarchy, cfg.unrollings[best->unrolling]);
      bj["unrolling"] = spatial_to_text(cfg.unrollings[best->unrolling].loops);
      bj["mapping"] = best->search.mapping_text;
      bj["cost"] = to_json(best->cost);
      bj["loop_info"] = to_json(extract(best->search.mapping, spec));
      bj["stats"] = to_json(best->search.stats);
      rec["best"] = bj;
    }
    res["layers"].push_back(rec);
  }

  Output out(c);
  out.file("points.json", dump(points));
  out.file("points.csv", points_csv(points["points"]));
  out.file("pareto.json", dump(pareto_json(points["points"], "points.json")));
  out.result(res);
  out.meta("explore", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int run_pareto(const Common& c, const std::string& points_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto j = in_file(points_path, [&] { return read_json_file(points_path); });
  if (j.value("schema", std::string()) != kPointsSchema)
    throw InputError(points_path, "/schema", "expected schema '" + std::string(kPointsSchema) + "'");
  if (!j.contains("points") || !j["points"].is_array())
    throw InputError(points_path, "/points", "expected a list of points");
  const auto front = pareto_json(j["points"], points_path);
  Output out(c);
  if (c.out_dir.empty())
    std::cout << dump(front);
  else
    out.file("pareto.json", dump(front));
  out.meta("pareto", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-o,--out", c.out_dir, "Output directory (stdout when omitted)");
  sub->add_option("-j,--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--layer", c.layer, "Only this layer of the workload file");
}

void add_search(CLI::App* sub, SearchFlags& f) {
  sub->add_option("-s,--strategy", f.strategy, "exhaustive | heuristic | iterative")->capture_default_str();
  sub->add_option("--beam", f.beam, "Beam width of the iterative search")->capture_default_str();
  sub->add_option("--min-util", f.min_util, "Minimum utilization of shared levels");
  sub->add_option("--objective", f.objective, "energy | latency | edp")->capture_default_str();
  sub->add_flag("--even-only", f.even_only, "Only even blockings");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory hierarchy and dataflow design space explorer"};
  app.require_subcommand(1);
  Common common;
  SearchFlags flags;

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Cost of a fixed mapping on a fixed architecture");
  evaluate->add_option("-w,--workload", ev.workload, "Workload file")->required();
  evaluate->add_option("-a,--arch", ev.arch, "Architecture file")->required();
  evaluate->add_option("-p,--pool", ev.pool, "Memory pool for pool_entry references");
  evaluate->add_option("-m,--mapping", ev.mapping, "Mapping text file")->required();
  evaluate->add_flag("--simulate", ev.simulate, "Also replay the loop nest and report traced counts");
  add_common(evaluate, common);

  ScheduleArgs sc;
  auto* schedule = app.add_subcommand("schedule", "Search the best mapping on a fixed architecture");
  schedule->add_option("-w,--workload", sc.workload, "Workload file")->required();
  schedule->add_option("-a,--arch", sc.arch, "Architecture file")->required();
  schedule->add_option("-p,--pool", sc.pool, "Memory pool for pool_entry references");
  schedule->add_option("--pin", sc.pin, "Mapping whose nonempty levels are kept fixed");
  schedule->add_flag("--samples", sc.samples, "Write energy/latency of every evaluated schedule (CSV)");
  add_common(schedule, common);
  add_search(schedule, flags);

  ExploreArgs ex;
  auto* explore_cmd = app.add_subcommand("explore", "Generate hierarchies from a pool and schedule each");
  explore_cmd->add_option("-w,--workload", ex.workload, "Workload file")->required();
  explore_cmd->add_option("-p,--pool", ex.pool, "Memory pool file")->required();
  explore_cmd->add_option("-c,--search", ex.search, "Architecture search config file")->required();
  explore_cmd->add_option("--budget", ex.budget, "Area budget in um2 (overrides the config)");
  add_common(explore_cmd, common);
  add_search(explore_cmd, flags);

  std::string points_path;
  auto* pareto = app.add_subcommand("pareto", "Nondominated design points of a points file");
  pareto->add_option("points", points_path, "points.json written by explore")->required();
  add_common(pareto, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_record("usage", e.what());
    return 2;
  }

  try {
    if (*evaluate) return run_evaluate(common, ev);
    if (*schedule) return run_schedule(common, sc, flags);
    if (*explore_cmd) return run_explore(common, ex, flags);
    if (*pareto) return run_pareto(common, points_path);
  } catch (const InputError& e) {
    error_record("input", e.what(), e.file(), e.location());
    return 2;
  } catch (const UsageError& e) {
    error_record("usage", e.what());
    return 2;
  } catch (const std::exception& e) {
    error_record("runtime", e.what());
    return 1;
  }
  return 0;
}
