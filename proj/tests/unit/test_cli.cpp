#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "fixtures.hpp"
#include "memflow/io.hpp"

#ifdef MEMFLOW_CLI

using namespace memflow;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(MEMFLOW_CLI) + " " + args + " 2>/dev/null";
  Run r{-1, {}};
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("memflow_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string data(const std::string& rel) { return memflow::testing::data_path(rel); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("bad input exits with 2") {
    CHECK(run("schedule -w /nonexistent.json -a " + data("arch/eyeriss_like.json")).code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("schedule -w " + data("workloads/desk.json")).code == 2);
    const auto dir = scratch("bad");
    std::ofstream(dir / "broken.json") << "{\"schema\": \"memflow.workload/1\", \"layers\": [";
    CHECK(run("schedule -w " + (dir / "broken.json").string() + " -a " + data("arch/eyeriss_like.json")).code == 2);
  }

  TEST_CASE("evaluate reproduces the scheduled cost") {
    const auto dir = scratch("eval");
    const auto w = data("workloads/desk.json");
    const auto a = data("arch/eyeriss_like.json");
    const auto s = run("schedule -w " + w + " --layer desk_a -a " + a + " -o " + (dir / "s").string());
    REQUIRE(s.code == 0);
    const auto res = read_json_file((dir / "s" / "result.json").string());
    const auto& layer = res["layers"][0];
    REQUIRE(layer["found"].get<bool>());
    write_text_file((dir / "m.txt").string(), layer["mapping"].get<std::string>());
    const auto e = run("evaluate -w " + w + " --layer desk_a -a " + a + " -m " + (dir / "m.txt").string());
    REQUIRE(e.code == 0);
    const auto ev = Json::parse(e.out);
    CHECK(ev["layers"][0]["valid"].get<bool>());
    CHECK(ev["layers"][0]["cost"]["energy_total_pj"].get<double>() ==
          doctest::Approx(layer["cost"]["energy_total_pj"].get<double>()));
  }

  TEST_CASE("invalid mapping exits with 3") {
    const auto dir = scratch("invalid");
    const auto d = memflow::testing::output_tile_demo();
    auto m = d.mapping;
    m.of(Operand::W).temporal.back().pop_back();
    write_text_file((dir / "m.txt").string(), to_text(m));
    const auto e = run("evaluate -w " + data("workloads/alexnet_conv2.json") + " -a " +
                       data("arch/eyeriss_like.json") + " -m " + (dir / "m.txt").string());
    CHECK(e.code == 3);
  }
}

#endif
