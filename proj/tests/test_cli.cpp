#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "peeler/synth.hpp"

using namespace peeler;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("peeler_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"detect"}).code == 1);
  CHECK(cli({"synth", "--archetype", "nope", "--out", "/tmp/x"}).code == 1);
  CHECK(cli({"detect", "--trace", "t", "--disable", "everything"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("data errors exit 2") {
  TempDir tmp;
  CHECK(cli({"detect", "--trace", tmp / "missing.trace"}).code == 2);
  std::ofstream(tmp / "bad.trace") << "not a trace\n";
  const auto r = cli({"detect", "--trace", tmp / "bad.trace"});
  CHECK(r.code == 2);
  CHECK(r.err.find("error") == 0);
  CHECK(cli({"eval", "--corpus", tmp / "nothing"}).code == 2);
}

TEST_CASE("synth then detect") {
  TempDir tmp;
  REQUIRE(cli({"synth", "--archetype", "crypto:post-overwrite", "--seed", "4", "--commands", "--out", tmp / "a.trace"}).code ==
          0);
  REQUIRE(cli({"synth", "--archetype", "crypto:post-overwrite", "--seed", "4", "--commands", "--out", tmp / "b.trace"}).code ==
          0);
  CHECK(slurp(tmp / "a.trace") == slurp(tmp / "b.trace"));

  const auto r = cli({"detect", "--trace", tmp / "a.trace", "--json-report", tmp / "r.json"});
  CHECK(r.code == 0);
  CHECK(r.out.find("ransomware") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(tmp / "r.json"));
  CHECK(j["verdict"] == "ransomware");

  const auto quiet = cli({"detect", "--trace", tmp / "a.trace", "--disable", "rules", "--disable", "fileio"});
  CHECK(quiet.code == 0);
  CHECK(quiet.out.find("benign") != std::string::npos);
  CHECK(cli({"detect", "--trace", tmp / "a.trace", "--window-ms", "0"}).code == 1);
}

TEST_CASE("corpus, train, eval and bench") {
  TempDir tmp;
  const auto corpus = tmp / "corpus";
  REQUIRE(cli({"synth", "--corpus", corpus}).code == 0);
  REQUIRE(fs::exists(fs::path(corpus) / kCorpusIndexName));

  const auto t1 = cli({"train", "--corpus", corpus, "--out", tmp / "m1.pm", "--seed", "3", "--train-frac", "0.2"});
  CHECK(t1.code == 0);
  CHECK(cli({"train", "--corpus", corpus, "--out", tmp / "m2.pm", "--seed", "3", "--fraction", "0.2"}).code == 0);
  CHECK(slurp(tmp / "m1.pm") == slurp(tmp / "m2.pm"));
  CHECK(cli({"train", "--corpus", corpus, "--out", tmp / "m3.pm", "--fraction", "0"}).code == 1);

  const auto e = cli({"eval", "--corpus", corpus, "--repeats", "1", "--summary", tmp / "s.json", "--latency-table",
                      tmp / "lat.tsv"});
  CHECK(e.code == 0);
  const auto s = nlohmann::json::parse(slurp(tmp / "s.json"));
  CHECK(s["accuracy"].get<double>() >= 0.0);
  CHECK(fs::file_size(tmp / "lat.tsv") > 0);

  REQUIRE(cli({"synth", "--archetype", "benign:desktop", "--seed", "2", "--out", tmp / "d.trace"}).code == 0);
  const auto b = cli({"bench", "--trace", tmp / "d.trace", "--model", tmp / "m1.pm"});
  CHECK(b.code == 0);
  CHECK(b.out.find("events/s") != std::string::npos);
  const auto d = cli({"detect", "--trace", tmp / "d.trace", "--model", tmp / "m1.pm", "--threshold", "1.5"});
  CHECK(d.code == 1);
}
