#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nfsr/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = nfsr::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nfsr_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("help text matches the golden files") {
  const fs::path golden(NFSR_GOLDEN_DIR);
  const std::vector<std::pair<std::string, std::vector<std::string>>> cases{
      {"help.txt", {"--help"}},
      {"help_synth.txt", {"synth", "--help"}},
      {"help_train.txt", {"train", "--help"}},
      {"help_eval.txt", {"eval", "--help"}},
  };
  for (const auto& [file, args] : cases) {
    const Outcome o = run(args);
    INFO(file);
    CHECK(o.code == 0);
    CHECK(o.out == slurp(golden / file));
  }
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == 2);
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({"synth", "--scenes", "0", "--seed", "1", "--out", scratch("zero").string()}).code == 2);
  CHECK(run({"synth", "--seed", "1"}).code == 2);
  const Outcome missing = run({"train", "--data", scratch("absent").string(), "--channel", "mag",
                               "--seed", "1", "--out", scratch("absent_out").string()});
  CHECK(missing.code == 3);
  CHECK_FALSE(missing.err.empty());
  CHECK(run({"nf2ff", "--in", scratch("absent_map").string(), "--cut", "E", "--out",
             scratch("cut.csv").string()})
            .code == 3);
}

TEST_CASE("synth is deterministic and nf2ff reads its own maps") {
  const fs::path a = scratch("a"), b = scratch("b");
  for (const auto& dir : {a, b})
    REQUIRE(run({"synth", "--scenes", "3", "--seed", "21", "--grid", "24", "--out", dir.string()}).code ==
            0);
  CHECK(slurp(a / "arrays.bin") == slurp(b / "arrays.bin"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));

  const fs::path map = scratch("map");
  REQUIRE(run({"synth-map", "--seed", "5", "--profile", "planar_array", "--grid", "40", "--out",
               map.string()})
              .code == 0);
  const fs::path cut = scratch("cut.csv");
  const Outcome o = run({"nf2ff", "--in", map.string(), "--cut", "H", "--out", cut.string()});
  CHECK(o.code == 0);
  CHECK(slurp(cut).rfind("angle_deg,level_db\n", 0) == 0);

  const fs::path svg = scratch("plot.svg");
  CHECK(run({"plot", "--overlay", cut.string() + "," + cut.string(), "--out", svg.string()}).code == 0);
  CHECK(slurp(svg).find("</svg>") != std::string::npos);
}
