// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits 0 unless something throws; --strict also fails on any FAIL line.

#include "checks.hpp"
#include "run_config.hpp"

#include "mddm/checkpoint.hpp"
#include "mddm/diffusion.hpp"
#include "mddm/io.hpp"
#include "mddm/md.hpp"
#include "mddm/rdf.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

using namespace mddm;

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int id;
  bool passed;
  std::string detail;
};

std::vector<Outcome> g_outcomes;

void report(int id, bool passed, const std::string& detail) {
  g_outcomes.push_back({id, passed, detail});
  std::cout << (passed ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void suite_criterion(int id, const std::string& suite) {
  const checks::SuiteResult r = checks::run_suite(suite, 0);
  std::string detail = suite + " suite";
  for (const checks::Check& c : r.checks) {
    detail += "; " + std::string(c.passed ? "" : "FAILED ") + c.name + " [" + c.detail + "]";
  }
  report(id, r.passed(), detail);
}

Conformation in_box(const Points& x, const PeriodicBox& box) {
  Conformation c;
  c.box = box;
  c.coords = x;
  return c;
}

EpochCallback progress(const std::string& label, std::size_t every) {
  const auto t0 = std::chrono::steady_clock::now();
  return [=](const EpochReport& r, const DenoiserParams<float>&) {
    if (r.epoch % every == 0) {
      std::cerr << label << " epoch " << r.epoch << " loss " << fmt(r.mean_loss) << " (" << fmt(elapsed_s(t0), 3)
                << " s)" << std::endl;
    }
  };
}

// Criteria 7 and 8: one N = 256 reference, 48 symmetry images, 800 epochs.
void unconditional(const fs::path& out) {
  MDConfig mc;
  mc.n_particles = 256;
  mc.temperature = 0.03;
  const OPPParams potential{5.0, 1.0};
  const AnnealResult md = run_anneal(mc, potential);
  if (md.aborted) {
    report(7, false, "reference MD aborted: " + md.reason);
    report(8, false, "no trained model");
    return;
  }
  const Conformation& ref = md.final;
  save_conformation(out / "unconditional_reference.bin", ref);

  TrainConfig tc;
  tc.epochs = 800;
  tc.seed = 1;
  const DiffusionSchedule schedule = build_schedule();
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult trained = train(augment(ref), tc, DenoiserConfig{}, schedule, progress("unconditional", 50));
  const double train_s = elapsed_s(t0);
  Checkpoint ck;
  ck.params = trained.params;
  ck.meta = {trained.loss_history.size(), tc.seed, ref.size(), ref.box.lengths(), trained.diverged};
  save_checkpoint(out / "unconditional.ckpt", ck);
  if (trained.diverged) {
    report(7, false, "training diverged: " + trained.diagnostic);
    report(8, false, "no trained model");
    return;
  }

  const RDFVector g_ref = compute_rdf(ref);
  const std::size_t ref_peak = first_peak_bin(g_ref);
  std::vector<std::pair<std::size_t, double>> trace;  // (t, RDF-MSE)
  std::vector<double> mses;
  std::vector<std::size_t> peaks;
  for (std::uint64_t i = 0; i < 4; ++i) {
    Rng rng(100 + i);
    TraceCallback cb;
    if (i == 0) {
      cb = [&](std::size_t t, const Points& x) {
        if (t <= 490 && t % 10 == 0) trace.push_back({t, rdf_mse(compute_rdf(in_box(x, ref.box)), g_ref)});
      };
    }
    const Conformation s = sample<float>(std::nullopt, trained.params, schedule, ref.box, ref.size(), rng, cb);
    save_conformation(out / ("unconditional_sample_" + std::to_string(i) + ".bin"), s);
    const RDFVector g = compute_rdf(s);
    mses.push_back(rdf_mse(g, g_ref));
    peaks.push_back(first_peak_bin(g));
  }
  std::string others;
  for (std::size_t i = 1; i < mses.size(); ++i) {
    others += " " + fmt(mses[i]) + "/bin " + std::to_string(peaks[i]);
  }
  const bool peak_ok = (peaks[0] > ref_peak ? peaks[0] - ref_peak : ref_peak - peaks[0]) <= 1;
  report(7, mses[0] < 0.10 && peak_ok,
         "N = 256, 48 images, 800 epochs (" + fmt(train_s / 60, 3) + " min, final loss " +
             fmt(trained.loss_history.back()) + "); sample RDF-MSE " + fmt(mses[0]) + " (< 0.10), first peak bin " +
             std::to_string(peaks[0]) + " vs reference " + std::to_string(ref_peak) +
             " (within 1); further samples MSE/peak:" + others);

  // trace runs t = 490, 480, ..., 0
  bool monotone = true;
  std::string worst;
  double worst_ratio = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double ratio = trace[i].second / trace[i - 1].second;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst = "t=" + std::to_string(trace[i - 1].first) + "->" + std::to_string(trace[i].first);
    }
    monotone = monotone && ratio <= 1.1;
  }
  const double at490 = trace.front().second, at0 = trace.back().second;
  report(8, at0 < at490 && monotone,
         "RDF-MSE at t=490 " + fmt(at490) + ", t=100 " + fmt(trace[trace.size() - 11].second) + ", t=10 " +
             fmt(trace[trace.size() - 2].second) + ", t=0 " + fmt(at0) + "; largest step-to-step ratio " +
             fmt(worst_ratio) + " at " + worst + " (<= 1.1, checked every 10 steps)");
}

// Criterion 9: conditional model on a 2 x 2 x 2 sweep at N = 216.
void conditional(const fs::path& out, std::size_t epochs, std::size_t n_aug) {
  cli::RunConfig config;  // sweep ranges and MD settings from the CLI defaults
  MDConfig base = config.md();
  base.n_particles = 216;
  const cli::Axis ka = config.get_axis("sweep.k"), pa = config.get_axis("sweep.phi"), ta = config.get_axis("sweep.T");
  std::vector<Condition> conditions;
  for (std::size_t a = 0; a < ka.count; ++a)
    for (std::size_t b = 0; b < pa.count; ++b)
      for (std::size_t c = 0; c < ta.count; ++c) conditions.push_back({ka.at(a), pa.at(b), ta.at(c)});

  std::vector<Conformation> refs;
  std::vector<Conformation> data;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    MDConfig mc = base;
    mc.temperature = conditions[i].temperature;
    mc.seed = cli::derive_seed(0, i);
    const AnnealResult r = run_anneal(mc, OPPParams{conditions[i].k, conditions[i].phi});
    if (r.aborted) {
      report(9, false, "reference MD aborted for condition " + std::to_string(i) + ": " + r.reason);
      return;
    }
    refs.push_back(r.final);
    save_conformation(out / ("conditional_reference_" + std::to_string(i) + ".bin"), r.final);
    std::vector<Conformation> images = augment(r.final);
    images.resize(n_aug);
    data.insert(data.end(), images.begin(), images.end());
    std::cerr << "conditional reference " << i << " done" << std::endl;
  }

  TrainConfig tc;
  tc.epochs = epochs;
  tc.seed = 2;
  DenoiserConfig dc;
  dc.n_global = 4;
  const DiffusionSchedule schedule = build_schedule();
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult trained = train(data, tc, dc, schedule, progress("conditional", 10));
  const double train_s = elapsed_s(t0);
  Checkpoint ck;
  ck.params = trained.params;
  ck.meta = {trained.loss_history.size(), tc.seed, 216, refs.front().box.lengths(), trained.diverged};
  save_checkpoint(out / "conditional.ckpt", ck);
  if (trained.diverged) {
    report(9, false, "training diverged: " + trained.diagnostic);
    return;
  }

  std::vector<RDFVector> g_ref;
  for (const Conformation& r : refs) g_ref.push_back(compute_rdf(r));
  const std::size_t n = conditions.size();
  double diag_sum = 0.0;
  std::size_t discriminating = 0;
  std::string per;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(200 + i);
    const Conformation s = sample<float>(conditions[i], trained.params, schedule, refs[i].box, 216, rng);
    save_conformation(out / ("conditional_sample_" + std::to_string(i) + ".bin"), s);
    const RDFVector g = compute_rdf(s);
    const double own = rdf_mse(g, g_ref[i]);
    std::size_t beaten = 0;
    for (std::size_t j = 0; j < n; ++j) beaten += j != i && rdf_mse(g, g_ref[j]) > own;
    diag_sum += own;
    const bool ok = 2 * beaten >= n - 1;
    discriminating += ok;
    per += " " + fmt(own, 3) + "(" + std::to_string(beaten) + "/" + std::to_string(n - 1) + ")";
  }
  const double mean = diag_sum / static_cast<double>(n);
  report(9, mean < 0.3 && discriminating == n,
         "8 conditions, N = 216, " + std::to_string(n_aug) + " images each, " + std::to_string(epochs) + " epochs (" +
             fmt(train_s / 60, 3) + " min, final loss " + fmt(trained.loss_history.back()) +
             "); mean own-condition RDF-MSE " + fmt(mean) + " (< 0.3); samples beating at least half of the other "
             "references: " + std::to_string(discriminating) + "/" + std::to_string(n) +
             "; per sample MSE(beaten):" + per);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  bool strict = false;
  std::vector<int> only;
  std::string out_dir = "acceptance_artifacts";
  std::size_t c9_epochs = 100, c9_aug = 24;
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_option("--out", out_dir, "directory for references, checkpoints and samples");
  app.add_option("--c9-epochs", c9_epochs, "epochs for the conditional model");
  app.add_option("--c9-augmentations", c9_aug, "symmetry images per conditional reference");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](int id) { return selected.empty() || selected.count(id) > 0; };
  try {
    fs::create_directories(out_dir);
    const std::pair<int, const char*> suites[] = {{1, "uniformity"}, {2, "posterior"}, {3, "geometry"},
                                                  {4, "gradients"},  {5, "invariance"}, {6, "md"}};
    for (auto [id, suite] : suites)
      if (want(id)) suite_criterion(id, suite);
    if (want(7) || want(8)) unconditional(out_dir);
    if (want(9)) conditional(out_dir, c9_epochs, c9_aug);
    if (want(10)) suite_criterion(10, "formats");
  } catch (const std::exception& e) {
    std::cout << "ERROR: " << e.what() << std::endl;
    return 2;
  }
  std::size_t failed = 0;
  for (const Outcome& o : g_outcomes) failed += !o.passed;
  std::cout << g_outcomes.size() - failed << "/" << g_outcomes.size() << " criteria passed" << std::endl;
  std::ofstream report_file(fs::path(out_dir) / "report.txt");
  for (const Outcome& o : g_outcomes) {
    report_file << (o.passed ? "PASS" : "FAIL") << " criterion " << o.id << ": " << o.detail << '\n';
  }
  return strict && failed > 0 ? 1 : 0;
}
