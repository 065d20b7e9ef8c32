#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "fav/bench.hpp"
#include "fav/cli.hpp"
#include "fav/error.hpp"

using namespace fav;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"fav"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(int(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fav_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config text is a fixed point") {
  RunConfig rc = RunConfig::parse("preset=desk\ncommand=train\nclasses=0,1\nlr=0.0005\nsuperpixels=9\nvariant=sppp+lla\n");
  const std::string text = rc.serialize();
  CHECK(RunConfig::parse(text).serialize() == text);
  CHECK(rc.classes == std::vector<int>{0, 1});
  CHECK(rc.model.sppp.slic.superpixels == 9);

  // preset is applied first regardless of where it appears
  const RunConfig late = RunConfig::parse("dim=32\npreset=desk\n");
  CHECK(late.model.dim == 32);
}

TEST_CASE("unknown or malformed keys are rejected") {
  CHECK_THROWS_AS(RunConfig::parse("epoch=3\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("epochs=three\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("just text\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("preset=huge\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("format=png\n"), ConfigError);
}

TEST_CASE("exit codes") {
  const fs::path out = scratch("codes");
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"--help"}).out.find("Exit codes") != std::string::npos);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"bench", "--set", "bogus=1"}).code == kExitConfig);
  CHECK(cli({"bench", "--variant", "vit"}).code == kExitConfig);
  CHECK(cli({"bench", "--set", "image_width=30"}).code == kExitConfig);
  CHECK(cli({"train", "--format", "cifar10"}).code == kExitConfig);
  CHECK(cli({"train", "--data", (out / "nowhere").string(), "--out", out.string()}).code == kExitData);
  CHECK(cli({"eval", "--format", "synthetic", "--checkpoint", (out / "none.fav").string(), "--set", "classes=0,1"}).code ==
        kExitData);
  const Run diverge = cli({"train", "--format", "synthetic", "--out", out.string(), "--max-steps", "3", "--set",
                           "lr=1e300", "--set", "train_limit=8", "--set", "test_limit=2", "--set", "batch_size=4"});
  CHECK(diverge.code == kExitNumeric);
  CHECK(diverge.err.find("non-finite") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("gradcheck on the desk preset") {
  const Run ok = cli({"gradcheck", "--preset", "desk"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("module=model.sppp+lla") != std::string::npos);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  CHECK(cli({"gradcheck", "--tolerance", "1e-300"}).code == kExitAcceptance);
}

TEST_CASE("training is reproducible and evaluation reads the checkpoint") {
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  const std::initializer_list<std::string> common{"--format", "synthetic", "--epochs", "2", "--seed", "4",
                                                  "--set", "train_limit=24", "--set", "test_limit=8",
                                                  "--set", "batch_size=8", "--set", "image_height=16",
                                                  "--set", "image_width=16", "--set", "superpixels=4"};
  auto train = [&](const fs::path& dir) {
    std::vector<std::string> v{"train", "--out", dir.string()};
    v.insert(v.end(), common.begin(), common.end());
    std::vector<const char*> argv{"fav"};
    for (const auto& s : v) argv.push_back(s.c_str());
    std::ostringstream o, e;
    return run_cli(int(argv.size()), argv.data(), o, e);
  };
  REQUIRE(train(a) == kExitOk);
  REQUIRE(train(b) == kExitOk);
  const std::string metrics = slurp(a / "metrics.txt");
  CHECK(metrics == slurp(b / "metrics.txt"));
  CHECK(metrics.find("epoch=2 train_loss=") != std::string::npos);
  auto without_out = [](std::string cfg) {
    const auto at = cfg.find("\nout=");
    return cfg.erase(at, cfg.find('\n', at + 1) - at);
  };
  CHECK(without_out(slurp(a / "run.cfg")) == without_out(slurp(b / "run.cfg")));
  CHECK(fs::exists(a / "timing.txt"));

  const RunConfig saved = RunConfig::load((a / "run.cfg").string());
  CHECK(saved.model.classes == 2);
  const Run eval = cli({"eval", "--config", (a / "run.cfg").string(), "--checkpoint", (a / "model.fav").string()});
  CHECK(eval.code == kExitOk);
  const auto last = metrics.substr(metrics.rfind("test_acc=") + 9);
  CHECK(eval.out.find("accuracy=" + last.substr(0, last.find('\n'))) != std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("bench writes the table and the records") {
  const fs::path out = scratch("bench");
  const Run r = cli({"bench", "--variants", "baseline,sppp+lla", "--preset", "desk", "--out", out.string(), "--set",
                     "bench_images=2", "--set", "bench_repeats=2"});
  REQUIRE(r.code == kExitOk);
  const auto rows = parse_records(slurp(out / "bench.records"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].score_entries == 2u * 4u * 65u * 65u);
  CHECK(rows[1].score_entries == 2u * 4u * 8u * (rows[1].tokens + 1));
  CHECK(r.out.find(reduced_fraction(rows[0].score_entries, rows[1].score_entries)) != std::string::npos);
  CHECK(slurp(out / "bench.txt") == r.out);
  fs::remove_all(out);
}

TEST_CASE("segment and tokenize reports") {
  const fs::path out = scratch("inspect");
  const Run seg = cli({"segment", "--format", "synthetic", "--out", out.string(), "--set", "superpixels=4"});
  REQUIRE(seg.code == kExitOk);
  std::istringstream grid(slurp(out / "segment.txt"));
  std::size_t h = 0, w = 0, regions = 0;
  grid >> h >> w >> regions;
  CHECK(h == 32);
  CHECK(w == 32);
  std::size_t count = 0;
  for (int label; grid >> label; ++count) CHECK((label >= 0 && std::size_t(label) < regions));
  CHECK(count == h * w);

  const Run tok = cli({"tokenize", "--format", "synthetic", "--out", out.string(), "--set", "superpixels=4"});
  REQUIRE(tok.code == kExitOk);
  const std::string report = slurp(out / "tokens.txt");
  CHECK(report.find("patches=64") != std::string::npos);
  CHECK(report.find("norm=") != std::string::npos);
  CHECK(report.find("centroid=") != std::string::npos);
  CHECK(cli({"segment", "--format", "synthetic", "--image", "100000"}).code == kExitConfig);
  fs::remove_all(out);
}
