#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "memflow/archgen.hpp"
#include "memflow/architecture.hpp"
#include "memflow/cost.hpp"
#include "memflow/extractor.hpp"
#include "memflow/oracle.hpp"
#include "memflow/tmg.hpp"
#include "memflow/workload.hpp"

namespace memflow {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kWorkloadSchema = "memflow.workload/1";
inline constexpr std::string_view kPoolSchema = "memflow.pool/1";
inline constexpr std::string_view kArchSchema = "memflow.arch/1";
inline constexpr std::string_view kSearchSchema = "memflow.search/1";
inline constexpr std::string_view kResultSchema = "memflow.result/1";
inline constexpr std::string_view kPointsSchema = "memflow.points/1";
inline constexpr std::string_view kParetoSchema = "memflow.pareto/1";

/// Bad input. `location` is a JSON pointer, a line number or a byte offset.
class InputError : public std::runtime_error {
 public:
  InputError(std::string file, std::string location, const std::string& what)
      : std::runtime_error(what), file_(std::move(file)), location_(std::move(location)) {}
  const std::string& file() const { return file_; }
  const std::string& location() const { return location_; }
  InputError in_file(std::string file) const { return InputError(std::move(file), location_, what()); }

 private:
  std::string file_, location_;
};

/// PE array, spatial unrolling and hierarchy of a fixed architecture.
struct Architecture {
  std::string name;
  MacModel mac;
  SpatialUnrolling spatial;
  MemoryHierarchy hierarchy;
};

Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
/// Two-space indented with a trailing newline.
std::string dump(const Json& j);

/// "FYu|OYu|OYu 5|13|2"; "-" is the empty unrolling.
SpatialUnrolling parse_spatial_unrolling(std::string_view text);

std::vector<LayerSpec> workloads_from_json(const Json& j);
MemoryPool pool_from_json(const Json& j);
/// Levels may name a pool entry ("pool_entry") instead of inlining one.
Architecture architecture_from_json(const Json& j, const MemoryPool* pool = nullptr);
ArchSearchConfig search_config_from_json(const Json& j, const MemoryPool& pool);

Json to_json(const LayerSpec& spec);
Json to_json(const MemoryPoolEntry& e);
Json to_json(const MemoryPool& pool);
Json to_json(const MemoryHierarchy& h, const SpatialUnrolling& s);
Json to_json(const Architecture& a);
Json to_json(const CostReport& r);
Json to_json(const LoopInfoTable& info);
Json to_json(const SearchStats& s);
Json to_json(const SimTrace& t);
Json to_json(const ArchSearchConfig& cfg);

std::string to_string(const Rational& r);

}  // namespace memflow
