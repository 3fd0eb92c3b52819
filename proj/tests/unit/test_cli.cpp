#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "fedcore/config.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace fedcore;
using testing::raised;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"schema_version": 1, "seed": 4, "rounds": 1,
  "data": {"kind": "duplicates", "clients": 1, "distinct_per_client": 4, "replicas": 5},
  "federation": {"active_ratio": 1.0},
  "selector": {"kind": "random", "ratio": 0.5}})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string(FEDCORE_CLI) + " " + args + " 2> " + err.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config parses with defaults filled in") {
    const auto cfg = RunConfig::parse(kMinimal);
    CHECK(cfg.seed == 4);
    CHECK(cfg.simulation.rounds == 1);
    CHECK(cfg.simulation.selector.kind == SelectorKind::kRandom);
    CHECK(cfg.simulation.selector.intra.min_cluster_size == 5);
    CHECK(cfg.simulation.selector.inter.min_cluster_size == 2);
    CHECK(cfg.lora.rank == 8);
    CHECK(RunConfig::parse(cfg.dump()).dump() == cfg.dump());
  }

  TEST_CASE("config rejects bad documents") {
    auto edit = [](auto&& f) {
      auto j = nlohmann::json::parse(kMinimal);
      f(j);
      return j.dump();
    };
    const std::string cases[] = {
        edit([](auto& j) { j["colour"] = 1; }),
        edit([](auto& j) { j["selector"]["kind"] = "kmeans"; }),
        edit([](auto& j) { j["selector"]["ratoi"] = 0.5; }),
        edit([](auto& j) { j["schema_version"] = 2; }),
        edit([](auto& j) { j.erase("schema_version"); }),
        edit([](auto& j) { j["rounds"] = "three"; }),
        edit([](auto& j) { j["seed"] = -1; }),
        "{not json",
    };
    for (const auto& text : cases) CHECK(raised([&] { RunConfig::parse(text); }) == ErrorKind::kConfiguration);
    CHECK(raised([] { RunConfig::load("/nonexistent/fedcore.json"); }).has_value());
  }

  TEST_CASE("semantic validation") {
    auto cfg = RunConfig::parse(kMinimal);
    cfg.simulation.selector.ratio = 0.0;
    CHECK(raised([&] { cfg.validate(); }).has_value());
    auto archives = RunConfig::parse(R"({"schema_version": 1,
      "data": {"kind": "archives", "clients": ["missing_0.fca"], "heldout": "missing_h.fca"}})", "/nonexistent");
    CHECK(raised([&] { archives.validate(); }).has_value());
  }

  TEST_CASE("errors exit with code 1 and JSON on stderr") {
    TempDir dir("fedcore_cli_errors");
    auto j = nlohmann::json::parse(kMinimal);
    j["selector"]["kind"] = "kmeans";
    write(dir.path / "bad.json", j.dump());
    CHECK(cli("run --config " + (dir.path / "bad.json").string(), dir.path / "err.txt") == 1);
    const auto err = nlohmann::json::parse(slurp(dir.path / "err.txt"));
    CHECK(err["error"]["kind"] == "configuration");
    CHECK(!err["error"]["message"].get<std::string>().empty());

    CHECK(cli("run", dir.path / "err2.txt") == 1);
    CHECK(nlohmann::json::parse(slurp(dir.path / "err2.txt"))["error"]["kind"] == "usage");
  }

  TEST_CASE("minimal run writes one round and reruns byte for byte") {
    TempDir dir("fedcore_cli_run");
    write(dir.path / "c.json", kMinimal);
    for (const char* out : {"a", "b"}) {
      const auto args = "run --config " + (dir.path / "c.json").string() + " --out " + (dir.path / out).string() +
                        " --log-level error";
      REQUIRE(cli(args, dir.path / "err.txt") == 0);
    }
    std::istringstream lines(slurp(dir.path / "a" / "run.jsonl"));
    std::string line;
    int records = 0;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      CHECK(rec.contains("heldout_accuracy"));
      ++records;
    }
    CHECK(records == 1);
    for (const char* f : {"run.jsonl", "summary.json", "metrics.csv"}) {
      CHECK(fs::exists(dir.path / "a" / f));
      CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
    }
  }

  TEST_CASE("seed flag overrides the config") {
    TempDir dir("fedcore_cli_seed");
    write(dir.path / "c.json", kMinimal);
    const auto base = "synth --config " + (dir.path / "c.json").string() + " --log-level error --out ";
    REQUIRE(cli(base + (dir.path / "s4").string(), dir.path / "e") == 0);
    REQUIRE(cli(base + (dir.path / "s5").string() + " --seed 5", dir.path / "e") == 0);
    REQUIRE(cli(base + (dir.path / "s4b").string() + " --seed 4", dir.path / "e") == 0);
    CHECK(slurp(dir.path / "s4" / "client_0.fca") != slurp(dir.path / "s5" / "client_0.fca"));
    CHECK(slurp(dir.path / "s4" / "client_0.fca") == slurp(dir.path / "s4b" / "client_0.fca"));
  }
}
