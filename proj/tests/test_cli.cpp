#include "doctest.h"

#include "checks.hpp"
#include "commands.hpp"
#include "run_config.hpp"

#include "mddm/checkpoint.hpp"
#include "mddm/errors.hpp"
#include "mddm/rdf.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace mddm;
using namespace mddm::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mddm_cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

// Small, fast configuration for workflow tests.
RunConfig small_config() {
  RunConfig c;
  c.load_text(R"(
seed = 5
[md]
n = 27
anneal_steps = 300
equil_steps = 300
cutoff = 1.4
[denoiser]
layers = 1
hidden = 4
k = 4
conv_hidden = 4
out_hidden = 8
[train]
epochs = 3
augmentations = 2
checkpoint_every = 0
[schedule]
steps = 20
[sample]
trace_steps = 20, 10, 0
)",
              "test");
  return c;
}

}  // namespace

TEST_CASE("run config layering and printing") {
  RunConfig c;
  CHECK(c.get_size("train.epochs") == 800);
  c.load_text("[train]\nepochs = 12 # comment\n\n[md]\nshift = force\n", "text");
  c.set("seed=9");
  CHECK(c.get_size("train.epochs") == 12);
  CHECK(c.md().shift == CutoffShift::kForce);
  CHECK(c.seed() == 9);
  CHECK_THROWS_AS(c.set("nope.key=1"), UsageError);
  CHECK_THROWS_AS(c.set("train.epochs"), UsageError);
  CHECK_THROWS_AS(c.load_text("[train\n", "x"), UsageError);
  c.set("train.epochs", "ten");
  CHECK_THROWS_AS(c.training(), UsageError);

  // The printed configuration reads back to the same values.
  RunConfig d;
  d.set("seed", "9");
  d.set("md.shift", "force");
  RunConfig e;
  e.load_text(d.dump(true), "dump");
  CHECK(e.dump() == d.dump());
  CHECK(d.dump(true).find("# base seed") != std::string::npos);

  const Axis a{1.0, 15.0, 10};
  CHECK(a.at(0) == 1.0);
  CHECK(a.at(9) == 15.0);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("sweep planning") {
  RunConfig c;
  CHECK(plan_sweep(c).size() == 8);
  c.set("sweep.test_count", "25");
  const auto plan = plan_sweep(c);
  REQUIRE(plan.size() == 33);
  for (std::size_t i = 8; i < plan.size(); ++i) {
    CHECK(plan[i].second == Split::kTest);
    CHECK(plan[i].first.k >= 1.0);
    CHECK(plan[i].first.k <= 15.0);
    CHECK(plan[i].first.temperature >= 0.01);
    CHECK(plan[i].first.temperature <= 0.05);
  }
  CHECK(plan_sweep(c).at(20).first == plan[20].first);
  // Full-size grid over the published ranges is planned without running anything.
  for (const char* axis : {"sweep.k.count", "sweep.phi.count", "sweep.T.count"}) c.set(axis, "10");
  CHECK(plan_sweep(c).size() == 1025);
}

TEST_CASE("full-scale sweep warns before running") {
  TempDir dir;
  RunConfig c;
  for (const char* axis : {"sweep.k.count", "sweep.phi.count", "sweep.T.count"}) c.set(axis, "10");
  std::ostringstream log;
  GenDataOptions opts{dir.path / "out", false, 1, true};
  CHECK(cmd_gen_data(c, opts, log) == kExitOk);
  CHECK(log.str().find("warning: 1000 simulations") != std::string::npos);
  CHECK(log.str().find("1000 grid conditions") != std::string::npos);
  CHECK(!fs::exists(dir.path / "out"));
}

TEST_CASE("data generation, training, sampling and evaluation") {
  TempDir dir;
  RunConfig config = small_config();
  std::ostringstream log;

  SUBCASE("LAMMPS emission writes one script and table per grid point") {
    CHECK(cmd_gen_data(config, {dir.path / "lmp", true, 1, false}, log) == kExitOk);
    std::size_t points = 0;
    for (const auto& e : fs::directory_iterator(dir.path / "lmp")) {
      if (!e.is_directory()) continue;
      ++points;
      CHECK(fs::exists(e.path() / "in.opp"));
      CHECK(fs::exists(e.path() / "custom.table"));
    }
    CHECK(points == 8);
    CHECK(!fs::exists(dir.path / "lmp" / "manifest.json"));
    CHECK(fs::exists(dir.path / "lmp" / "config.txt"));
  }

  SUBCASE("full workflow") {
    config.set("sweep.test_count", "1");
    REQUIRE(cmd_gen_data(config, {dir.path / "data", false, 2, false}, log) == kExitOk);
    const auto dataset = load_dataset(dir.path / "data" / "manifest.json");
    REQUIRE(dataset.size() == 9);
    CHECK(load_dataset(dir.path / "data" / "manifest.json", Split::kTest).size() == 1);
    CHECK(fs::exists(dir.path / "data" / "config.txt"));

    // Parallel and serial generation agree bit for bit.
    REQUIRE(cmd_gen_data(config, {dir.path / "data1", false, 1, false}, log) == kExitOk);
    CHECK(slurp(dir.path / "data" / "conf_0003.bin") == slurp(dir.path / "data1" / "conf_0003.bin"));

    TrainOptions topts{dir.path / "data" / "manifest.json", dir.path / "unc", false, 2};
    REQUIRE(cmd_train(config, topts, log) == kExitOk);
    CHECK(count_lines(dir.path / "unc" / "loss.csv") == 1 + 3);
    const Checkpoint ck = load_checkpoint(dir.path / "unc" / "model.ckpt");
    CHECK(ck.meta.n_particles == 27);
    CHECK(ck.meta.epochs_completed == 3);
    CHECK(ck.schedule_steps == 20);
    CHECK(!ck.params.config.conditional());
    CHECK(load_dataset(dir.path / "unc" / "reference" / "manifest.json").size() == 1);
    topts.record = 100;
    CHECK_THROWS_AS(cmd_train(config, topts, log), UsageError);

    TrainOptions copts{dir.path / "data" / "manifest.json", dir.path / "cond", true, std::nullopt};
    REQUIRE(cmd_train(config, copts, log) == kExitOk);
    CHECK(load_checkpoint(dir.path / "cond" / "model.ckpt").params.config.conditional());

    SampleOptions sopts;
    sopts.checkpoint = dir.path / "unc" / "model.ckpt";
    sopts.out = dir.path / "s1";
    sopts.count = 3;
    sopts.trace = true;
    REQUIRE(cmd_sample(config, sopts, log) == kExitOk);
    sopts.out = dir.path / "s2";
    sopts.jobs = 3;
    REQUIRE(cmd_sample(config, sopts, log) == kExitOk);
    for (const char* f : {"sample_0000.bin", "sample_0001.bin", "sample_0002.bin"}) {
      CHECK(slurp(dir.path / "s1" / f) == slurp(dir.path / "s2" / f));
      const Conformation c = load_conformation(dir.path / "s1" / f);
      CHECK_NOTHROW(c.validate());
      CHECK(c.size() == 27);
    }
    for (const char* f : {"sample_0001_t20.bin", "sample_0001_t10.bin", "sample_0001_t0.bin"}) {
      CHECK(fs::exists(dir.path / "s1" / f));
    }
    CHECK(!fs::exists(dir.path / "s1" / "sample_0001_t5.bin"));
    // Trace files hold physical coordinates; the t = 0 entry is the returned sample.
    CHECK(load_conformation(dir.path / "s1" / "sample_0001_t0.bin").coords ==
          load_conformation(dir.path / "s1" / "sample_0001.bin").coords);

    sopts.condition = Condition{1.0, 0.0, 0.01};
    CHECK_THROWS_AS(cmd_sample(config, sopts, log), UsageError);
    sopts.checkpoint = dir.path / "cond" / "model.ckpt";
    sopts.out = dir.path / "sc";
    sopts.count = 2;
    sopts.trace = false;
    REQUIRE(cmd_sample(config, sopts, log) == kExitOk);
    sopts.condition.reset();
    CHECK_THROWS_AS(cmd_sample(config, sopts, log), UsageError);

    // eval: identical sets give zeros in the conditional columns.
    std::ostringstream table;
    EvalOptions eopts{dir.path / "data" / "manifest.json", dir.path / "data" / "manifest.json",
                      dir.path / "pairs.csv", dir.path / "summary.csv"};
    CHECK(cmd_eval(config, eopts, table) == kExitOk);
    const std::string text = table.str();
    CHECK(text.find("Unconditional") != std::string::npos);
    CHECK(text.find("Conditional (Train)") != std::string::npos);
    CHECK(text.find("Conditional (Test)") != std::string::npos);
    CHECK(text.find("0.0000") != std::string::npos);
    CHECK(count_lines(dir.path / "pairs.csv") == 1 + 9);
    const std::string summary = slurp(dir.path / "summary.csv");
    CHECK(summary.find("\"Conditional (Train)\",0.0000,8,0") != std::string::npos);
    CHECK(summary.find("\"Conditional (Test)\",0.0000,1,0") != std::string::npos);

    // Unconditional samples pair with the single saved reference.
    std::ostringstream t2;
    eopts = {dir.path / "s1" / "manifest.json", dir.path / "unc" / "reference" / "manifest.json", std::nullopt,
             dir.path / "s2.csv"};
    CHECK(cmd_eval(config, eopts, t2) == kExitOk);
    CHECK(slurp(dir.path / "s2.csv").find("\"Unconditional\",") != std::string::npos);
    CHECK(slurp(dir.path / "s2.csv").find(",3,0") != std::string::npos);

    // A condition absent from the references is listed as missing and excluded.
    std::ostringstream t3;
    eopts = {dir.path / "sc" / "manifest.json", dir.path / "unc" / "reference" / "manifest.json", std::nullopt,
             dir.path / "s3.csv"};
    const auto unc_ref = load_dataset(dir.path / "unc" / "reference" / "manifest.json");
    const bool matches = unc_ref.front().conformation.condition == Condition{1.0, 0.0, 0.01};
    const int code = cmd_eval(config, eopts, t3);
    if (!matches) {
      CHECK(code == kExitFailure);
      CHECK(t3.str().find("missing reference") != std::string::npos);
      CHECK(slurp(dir.path / "s3.csv").find("\"Conditional (Train)\",,0,2") != std::string::npos);
    }

    // rdf command
    RdfOptions ropts{dir.path / "s1" / "sample_0000.bin", dir.path / "g.csv", std::nullopt, 0};
    config.set("rdf.bins", "40");
    REQUIRE(cmd_rdf(config, ropts, log) == kExitOk);
    CHECK(count_lines(dir.path / "g.csv") == 1 + 40);
    CHECK(!fs::exists(dir.path / "g.svg"));
    ropts.svg = dir.path / "g.svg";
    REQUIRE(cmd_rdf(config, ropts, log) == kExitOk);
    CHECK(slurp(dir.path / "g.svg").rfind("<svg", 0) == 0);
    std::ifstream in(dir.path / "g.csv");
    std::string line, last;
    while (std::getline(in, line)) last = line;
    const double r_last = std::stod(last.substr(0, last.find(',')));
    const double r_max = 1.5, width = r_max / 40;
    CHECK(r_last == doctest::Approx(r_max - width / 2).epsilon(1e-9));
  }
}

TEST_CASE("conditional training refuses records without conditions") {
  TempDir dir;
  RunConfig config = small_config();
  std::mt19937_64 rng(1);
  DatasetEntry e;
  e.conformation.box = PeriodicBox::cubic(3.0);
  e.conformation.coords = Points::Random(27, 3).array().abs() * 2.9;
  e.record.file = "a.bin";
  save_dataset(dir.path, {e});
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_train(config, {dir.path / "manifest.json", dir.path / "out", true, std::nullopt}, log),
                  UsageError);
  CHECK(cmd_train(config, {dir.path / "manifest.json", dir.path / "out", false, std::nullopt}, log) == kExitOk);
}

TEST_CASE("rdf reads LAMMPS dumps") {
  TempDir dir;
  {
    std::ofstream out(dir.path / "x.atom");
    out << "ITEM: TIMESTEP\n0\nITEM: NUMBER OF ATOMS\n2\nITEM: BOX BOUNDS pp pp pp\n0 4\n0 4\n0 4\n"
           "ITEM: ATOMS id type xs ys zs\n1 1 0.1 0.1 0.1\n2 1 0.3 0.1 0.1\n";
  }
  const Conformation c = load_any_conformation(dir.path / "x.atom");
  CHECK(c.size() == 2);
  CHECK(c.coords(1, 0) == doctest::Approx(1.2));
  CHECK_THROWS_AS(load_any_conformation(dir.path / "x.atom", 1), UsageError);
  CHECK_THROWS_AS(load_any_conformation(dir.path / "missing.bin"), IoError);
}

TEST_CASE("verify command") {
  RunConfig config;
  std::ostringstream out;
  CHECK(cmd_verify(config, {{"uniformity"}, std::nullopt}, out) == kExitOk);
  CHECK(out.str().find("PASS uniformity") != std::string::npos);
  CHECK(out.str().find("FAIL") == std::string::npos);
  CHECK_THROWS_AS(cmd_verify(config, {{"bogus"}, std::nullopt}, out), UsageError);

  TempDir dir;
  std::ostringstream out2;
  CHECK(cmd_verify(config, {{"gradients", "geometry"}, dir.path / "v.json"}, out2) == kExitOk);
  const std::string json = slurp(dir.path / "v.json");
  CHECK(json.find("\"suite\": \"gradients\"") != std::string::npos);
  CHECK(json.find("\"passed\": true") != std::string::npos);

  CHECK(checks::suite_names().size() == 7);
  CHECK_THROWS_AS(checks::run_suite("bogus"), std::invalid_argument);
}
