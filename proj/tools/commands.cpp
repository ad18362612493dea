#include "commands.hpp"

#include "checks.hpp"

#include "mddm/checkpoint.hpp"
#include "mddm/diffusion.hpp"
#include "mddm/errors.hpp"
#include "mddm/md.hpp"
#include "mddm/rdf.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace mddm::cli {
namespace {

namespace fs = std::filesystem;

std::string numbered(const std::string& stem, std::size_t i, const std::string& ext) {
  std::ostringstream s;
  s << stem << std::setw(4) << std::setfill('0') << i << ext;
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Effective configuration beside every output set.
void write_config(const fs::path& dir, const RunConfig& config) {
  write_text(dir / "config.txt", config.dump(true));
}

std::string describe(const Condition& c) {
  std::ostringstream s;
  s << "k=" << c.k << " phi=" << c.phi << " T=" << c.temperature;
  return s.str();
}

bool same_condition(const Condition& a, const Condition& b) {
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)}); };
  return close(a.k, b.k) && close(a.phi, b.phi) && close(a.temperature, b.temperature);
}

}  // namespace

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---- gen-data ----

std::vector<std::pair<Condition, Split>> plan_sweep(const RunConfig& config) {
  const Axis k = config.get_axis("sweep.k");
  const Axis phi = config.get_axis("sweep.phi");
  const Axis temp = config.get_axis("sweep.T");
  if (temp.lo <= 0.0) throw UsageError("sweep.T.lo must be positive");
  std::vector<std::pair<Condition, Split>> plan;
  for (std::size_t a = 0; a < k.count; ++a)
    for (std::size_t b = 0; b < phi.count; ++b)
      for (std::size_t c = 0; c < temp.count; ++c) plan.push_back({{k.at(a), phi.at(b), temp.at(c)}, Split::kTrain});

  std::mt19937_64 rng(derive_seed(config.seed(), 0xfeedULL));
  auto uniform = [&](const Axis& ax) { return std::uniform_real_distribution<double>(ax.lo, ax.hi)(rng); };
  const std::size_t n_test = config.get_size("sweep.test_count");
  for (std::size_t i = 0; i < n_test; ++i) {
    const double kv = uniform(k), pv = uniform(phi), tv = uniform(temp);
    plan.push_back({{kv, pv, tv}, Split::kTest});
  }
  return plan;
}

int cmd_gen_data(const RunConfig& config, const GenDataOptions& opts, std::ostream& log) {
  const auto plan = plan_sweep(config);
  const MDConfig base = config.md();
  const std::size_t steps_per_run = base.anneal_steps + base.equil_steps;
  const double work = static_cast<double>(plan.size()) * static_cast<double>(steps_per_run) *
                      static_cast<double>(base.n_particles);
  if (!opts.emit_lammps && work > 2e9) {
    log << "warning: " << plan.size() << " simulations of " << base.n_particles << " particles x " << steps_per_run
        << " steps is full scale; expect many hours at desk scale\n";
  }

  if (opts.dry_run) {
    std::size_t n_test = 0;
    for (const auto& p : plan) n_test += p.second == Split::kTest;
    log << "plan: " << plan.size() - n_test << " grid conditions (train) + " << n_test << " random conditions (test)\n";
    return kExitOk;
  }
  ensure_dir(opts.out);
  write_config(opts.out, config);

  if (opts.emit_lammps) {
    LammpsScriptParams sp;
    sp.num_steps = config.get_size("lammps.steps");
    sp.dump_every = config.get_size("lammps.dump_every");
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const Condition& c = plan[i].first;
      const fs::path dir = opts.out / numbered("point_", i, "");
      ensure_dir(dir);
      sp.potential = {c.k, c.phi};
      sp.temperature = c.temperature;
      write_text(dir / "in.opp", emit_lammps_script(sp));
      write_text(dir / sp.table_path, write_table_file(tabulate(sp.potential)));
    }
    log << "wrote " << plan.size() << " LAMMPS scripts and tables under " << opts.out.string() << '\n';
    return kExitOk;
  }

  std::vector<std::optional<AnnealResult>> results(plan.size());
  std::mutex log_mutex;
  parallel_for(plan.size(), opts.jobs, [&](std::size_t i) {
    MDConfig mc = base;
    mc.temperature = plan[i].first.temperature;
    mc.seed = derive_seed(config.seed(), i);
    AnnealResult r = run_anneal(mc, OPPParams{plan[i].first.k, plan[i].first.phi});
    {
      std::lock_guard lock(log_mutex);
      log << "[" << i + 1 << "/" << plan.size() << "] " << describe(plan[i].first)
          << (r.aborted ? " skipped: " + r.reason : " done") << '\n';
    }
    results[i] = std::move(r);
  });

  std::vector<DatasetEntry> entries;
  std::ostringstream skipped;
  skipped << "index,k,phi,T,reason\n" << std::setprecision(17);
  std::size_t n_skipped = 0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const AnnealResult& r = *results[i];
    const Condition& c = plan[i].first;
    if (r.aborted) {
      ++n_skipped;
      skipped << i << ',' << c.k << ',' << c.phi << ',' << c.temperature << ",\"" << r.reason << "\"\n";
      continue;
    }
    DatasetEntry e;
    e.conformation = r.final;
    e.record.file = numbered("conf_", i, ".bin");
    e.record.condition = c;
    e.record.split = plan[i].second;
    entries.push_back(std::move(e));
  }
  save_dataset(opts.out, entries);
  if (n_skipped > 0) write_text(opts.out / "skipped.csv", skipped.str());
  log << "wrote " << entries.size() << " conformations (" << n_skipped << " skipped) to "
      << (opts.out / "manifest.json").string() << '\n';
  return kExitOk;
}

// ---- train ----

int cmd_train(const RunConfig& config, const TrainOptions& opts, std::ostream& log) {
  const auto train_split = load_dataset(opts.manifest, Split::kTrain);
  if (train_split.empty()) throw UsageError("dataset has no train-split records: " + opts.manifest.string());
  const std::size_t n_aug = config.get_size("train.augmentations");
  if (n_aug < 1 || n_aug > 48) throw UsageError("train.augmentations must be in 1..48");
  const DenoiserConfig dconfig = config.denoiser(opts.conditional);
  const TrainConfig tconfig = config.training();
  const DiffusionSchedule schedule = config.schedule();

  auto images = [&](const Conformation& c) {
    std::vector<Conformation> all = augment(c);
    all.resize(n_aug);
    return all;
  };

  std::vector<Conformation> data;
  std::vector<DatasetEntry> reference;
  if (opts.conditional) {
    if (opts.record) throw UsageError("--record applies to unconditional training only");
    for (const DatasetEntry& e : train_split) {
      if (!e.conformation.condition) {
        throw UsageError("conditional training needs condition metadata; record " + e.record.file + " has none");
      }
      for (Conformation& c : images(e.conformation)) data.push_back(std::move(c));
    }
  } else {
    const std::size_t pick = opts.record ? *opts.record : derive_seed(config.seed(), 0) % train_split.size();
    if (pick >= train_split.size()) {
      throw UsageError("--record " + std::to_string(pick) + " out of range (" + std::to_string(train_split.size()) +
                       " train records)");
    }
    const DatasetEntry& chosen = train_split[pick];
    log << "training on record " << pick << " (" << chosen.record.file << ")\n";
    data = images(chosen.conformation);
    for (Conformation& c : data) c.condition.reset();
    DatasetEntry ref = chosen;
    ref.record.file = "reference.bin";
    ref.record.augmentation = 0;
    reference.push_back(ref);
  }
  const std::size_t n_particles = data.front().size();
  for (const Conformation& c : data) {
    if (c.size() != n_particles || !(c.box == data.front().box)) {
      throw UsageError("training conformations must share particle count and box");
    }
  }

  ensure_dir(opts.out);
  write_config(opts.out, config);
  if (!reference.empty()) save_dataset(opts.out / "reference", reference);

  auto make_checkpoint = [&](const DenoiserParams<float>& p, std::size_t epochs, bool diverged) {
    Checkpoint ck;
    ck.params = p;
    ck.schedule_steps = schedule.steps;
    ck.schedule_offset = schedule.offset;
    ck.meta.epochs_completed = epochs;
    ck.meta.seed = tconfig.seed;
    ck.meta.n_particles = n_particles;
    ck.meta.box_lengths = data.front().box.lengths();
    ck.meta.diverged = diverged;
    return ck;
  };

  std::ofstream loss(opts.out / "loss.csv");
  if (!loss) throw IoError("cannot write " + (opts.out / "loss.csv").string());
  loss << "epoch,loss,learning_rate\n" << std::setprecision(10);
  const std::size_t every = config.get_size("train.checkpoint_every");
  log << "training " << (opts.conditional ? "conditional" : "unconditional") << " model: " << data.size()
      << " conformations, " << parameter_count(dconfig) << " parameters, " << tconfig.epochs << " epochs\n";

  const TrainResult result =
      train(data, tconfig, dconfig, schedule, [&](const EpochReport& r, const DenoiserParams<float>& p) {
        loss << r.epoch << ',' << r.mean_loss << ',' << r.learning_rate << '\n';
        loss.flush();
        if (every > 0 && r.epoch % every == 0) {
          save_checkpoint(opts.out / "model.ckpt", make_checkpoint(p, r.epoch, false));
          log << "epoch " << r.epoch << " loss " << r.mean_loss << '\n';
        }
      });

  if (result.diverged) {
    save_checkpoint(opts.out / "diverged.ckpt", make_checkpoint(result.params, result.loss_history.size(), true));
    log << "training diverged: " << result.diagnostic << "\nlast finite parameters saved to "
        << (opts.out / "diverged.ckpt").string() << '\n';
    return kExitFailure;
  }
  save_checkpoint(opts.out / "model.ckpt", make_checkpoint(result.params, tconfig.epochs, false));
  log << "final loss " << result.loss_history.back() << "; checkpoint " << (opts.out / "model.ckpt").string() << '\n';
  return kExitOk;
}

// ---- sample ----

int cmd_sample(const RunConfig& config, const SampleOptions& opts, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  const bool conditional = ck.params.config.conditional();
  if (opts.condition && !conditional) throw UsageError("condition given but the checkpoint is unconditional");
  if (!opts.condition && conditional) throw UsageError("conditional checkpoint needs --k, --phi and --T");
  if (ck.meta.n_particles == 0 || ck.meta.box_lengths.empty()) {
    throw LoadError("checkpoint lacks system size metadata: " + opts.checkpoint.string());
  }
  if (opts.count == 0) throw UsageError("--count must be positive");
  const DiffusionSchedule schedule = build_schedule(ck.schedule_steps, ck.schedule_offset);
  const PeriodicBox box(ck.meta.box_lengths);
  std::set<std::size_t> trace_steps;
  if (opts.trace) {
    for (std::size_t t : config.get_sizes("sample.trace_steps")) {
      if (t > schedule.steps) throw UsageError("sample.trace_steps entry exceeds the schedule length");
      trace_steps.insert(t);
    }
  }

  ensure_dir(opts.out);
  write_config(opts.out, config);
  std::vector<DatasetEntry> entries(opts.count);
  std::vector<std::vector<ManifestRecord>> traces(opts.count);
  std::mutex log_mutex;
  parallel_for(opts.count, opts.jobs, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(config.seed(), i);
    Rng rng(seed);
    TraceCallback trace;
    if (opts.trace) {
      trace = [&, i, seed](std::size_t t, const Points& x) {
        if (!trace_steps.count(t)) return;
        Conformation c;
        c.box = box;
        c.coords = x;
        c.condition = opts.condition;
        c.provenance = {Source::kSampled, seed, static_cast<std::int64_t>(t)};
        ManifestRecord rec;
        rec.file = numbered("sample_", i, "_t" + std::to_string(t) + ".bin");
        rec.condition = opts.condition;
        save_conformation(opts.out / rec.file, c);
        traces[i].push_back(rec);
      };
    }
    Conformation c = sample<float>(opts.condition, ck.params, schedule, box, ck.meta.n_particles, rng, trace);
    c.provenance = {Source::kSampled, seed, 0};
    entries[i].conformation = std::move(c);
    entries[i].record.file = numbered("sample_", i, ".bin");
    entries[i].record.condition = opts.condition;
    std::lock_guard lock(log_mutex);
    log << "sample " << i << " done\n";
  });
  save_dataset(opts.out, entries);
  if (opts.trace) {
    DatasetManifest m;
    for (const auto& list : traces) m.records.insert(m.records.end(), list.begin(), list.end());
    ensure_dir(opts.out / "trace");
    // Trace files live beside the samples; the trace manifest refers to them relatively.
    for (ManifestRecord& r : m.records) r.file = "../" + r.file;
    save_manifest(opts.out / "trace", m);
  }
  log << "wrote " << opts.count << " samples to " << (opts.out / "manifest.json").string() << '\n';
  return kExitOk;
}

// ---- eval ----

int cmd_eval(const RunConfig& config, const EvalOptions& opts, std::ostream& out) {
  const std::size_t bins = config.get_size("rdf.bins");
  const auto generated = load_dataset(opts.generated);
  const auto reference = load_dataset(opts.reference);
  if (generated.empty()) throw UsageError("generated set is empty");
  if (reference.empty()) throw UsageError("reference set is empty");

  std::vector<RDFVector> ref_rdf;
  for (const auto& r : reference) ref_rdf.push_back(compute_rdf(r.conformation, bins));

  // Unconditional samples compare against the single reference, or the one reference without a condition.
  std::optional<std::size_t> uncond_ref;
  if (reference.size() == 1) {
    uncond_ref = 0;
  } else {
    std::vector<std::size_t> bare;
    for (std::size_t j = 0; j < reference.size(); ++j)
      if (!reference[j].conformation.condition) bare.push_back(j);
    if (bare.size() == 1) uncond_ref = bare.front();
  }

  const char* kColumns[] = {"Unconditional", "Conditional (Train)", "Conditional (Test)"};
  struct Row {
    std::string generated, reference;
    std::optional<Condition> condition;
    int column = -1;
    double mse = 0.0;
  };
  std::vector<Row> rows;
  std::array<std::size_t, 3> missing{};
  std::ostringstream pairs;
  pairs << "generated,reference,column,k,phi,T,rdf_mse\n" << std::setprecision(10);
  for (const auto& g : generated) {
    Row row;
    row.generated = g.record.file;
    row.condition = g.conformation.condition;
    std::optional<std::size_t> match;
    if (!row.condition) {
      row.column = 0;
      match = uncond_ref;
    } else {
      for (std::size_t j = 0; j < reference.size() && !match; ++j) {
        const auto& rc = reference[j].conformation.condition;
        if (rc && same_condition(*rc, *row.condition)) match = j;
      }
      row.column = match && reference[*match].record.split == Split::kTest ? 2 : 1;
    }
    if (!match) {
      ++missing[static_cast<std::size_t>(row.column)];
      out << "missing reference for " << g.record.file
          << (row.condition ? " (" + describe(*row.condition) + ")" : std::string(" (unconditional)")) << '\n';
      continue;
    }
    row.reference = reference[*match].record.file;
    row.mse = rdf_mse(compute_rdf(g.conformation, bins), ref_rdf[*match]);
    pairs << row.generated << ',' << row.reference << ",\"" << kColumns[row.column] << "\",";
    if (row.condition) {
      pairs << row.condition->k << ',' << row.condition->phi << ',' << row.condition->temperature;
    } else {
      pairs << ",,";
    }
    pairs << ',' << row.mse << '\n';
    rows.push_back(row);
  }

  std::array<double, 3> sum{};
  std::array<std::size_t, 3> count{};
  for (const Row& r : rows) {
    sum[static_cast<std::size_t>(r.column)] += r.mse;
    ++count[static_cast<std::size_t>(r.column)];
  }
  auto mean_text = [&](std::size_t c) {
    if (count[c] == 0) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << sum[c] / static_cast<double>(count[c]);
    return s.str();
  };
  out << std::left << std::setw(10) << "" << std::setw(16) << kColumns[0] << std::setw(22) << kColumns[1]
      << kColumns[2] << '\n';
  out << std::setw(10) << "RDF-MSE" << std::setw(16) << mean_text(0) << std::setw(22) << mean_text(1) << mean_text(2)
      << '\n';
  out << std::setw(10) << "pairs" << std::setw(16) << count[0] << std::setw(22) << count[1] << count[2] << '\n';
  out << std::setw(10) << "missing" << std::setw(16) << missing[0] << std::setw(22) << missing[1] << missing[2]
      << '\n'
      << std::right;

  if (opts.csv) write_text(*opts.csv, pairs.str());
  if (opts.summary_csv) {
    std::ostringstream s;
    s << "column,mean_rdf_mse,pairs,missing\n";
    for (std::size_t c = 0; c < 3; ++c) {
      s << '"' << kColumns[c] << "\"," << (count[c] ? mean_text(c) : "") << ',' << count[c] << ',' << missing[c]
        << '\n';
    }
    write_text(*opts.summary_csv, s.str());
  }
  return rows.empty() ? kExitFailure : kExitOk;
}

// ---- rdf ----

Conformation load_any_conformation(const fs::path& path, std::size_t snapshot) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char head[5] = {};
  in.read(head, 5);
  if (std::string(head, static_cast<std::size_t>(in.gcount())) != "ITEM:") return load_conformation(path);
  in.clear();
  in.seekg(0);
  const auto snaps = parse_lammps_dump(in);
  if (snapshot >= snaps.size()) {
    throw UsageError("snapshot " + std::to_string(snapshot) + " requested but the dump has " +
                     std::to_string(snaps.size()));
  }
  return snaps[snapshot];
}

std::string rdf_svg(const std::vector<double>& r, const std::vector<double>& g, const std::string& title) {
  const double W = 640, H = 400, ml = 60, mr = 20, mt = 40, mb = 50;
  const double x_max = r.empty() ? 1.0 : r.back() + (r.size() > 1 ? r[1] - r[0] : 1.0) / 2;
  double y_max = 1.0;
  for (double v : g) y_max = std::max(y_max, v);
  y_max *= 1.1;
  auto sx = [&](double x) { return ml + (W - ml - mr) * x / x_max; };
  auto sy = [&](double y) { return H - mb - (H - mt - mb) * y / y_max; };
  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << sy(0) << "\" x2=\"" << W - mr << "\" y2=\"" << sy(0)
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << sy(0) << "\" x2=\"" << ml << "\" y2=\"" << mt << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << sy(1) << "\" x2=\"" << W - mr << "\" y2=\"" << sy(1)
    << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_max * i / 5, yv = y_max * i / 5;
    s << "<text x=\"" << sx(xv) << "\" y=\"" << H - mb + 18 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << xv << "</text>\n";
    s << "<text x=\"" << ml - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << yv << "</text>\n";
  }
  s << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">r</text>\n";
  s << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">g(r)</text>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < r.size(); ++i) s << sx(r[i]) << ',' << sy(g[i]) << ' ';
  s << "\"/>\n</svg>\n";
  return s.str();
}

int cmd_rdf(const RunConfig& config, const RdfOptions& opts, std::ostream& log) {
  const Conformation c = load_any_conformation(opts.input, opts.snapshot);
  const RDFVector g = compute_rdf(c, config.get_size("rdf.bins"));
  std::ostringstream csv;
  csv << "r_center,g\n" << std::setprecision(10);
  std::vector<double> r(g.n_bins());
  for (std::size_t b = 0; b < g.n_bins(); ++b) {
    r[b] = g.bin_center(b);
    csv << r[b] << ',' << g.values[b] << '\n';
  }
  write_text(opts.csv, csv.str());
  if (opts.svg) write_text(*opts.svg, rdf_svg(r, g.values, opts.input.filename().string()));
  log << "first peak at r = " << (first_peak_bin(g) < g.n_bins() ? g.bin_center(first_peak_bin(g)) : 0.0)
      << "; wrote " << opts.csv.string() << '\n';
  return kExitOk;
}

// ---- verify ----

int cmd_verify(const RunConfig& config, const VerifyOptions& opts, std::ostream& out) {
  std::vector<std::string> suites = opts.suites;
  if (suites.empty() || (suites.size() == 1 && suites.front() == "all")) suites = checks::suite_names();
  for (const std::string& s : suites) {
    const auto& names = checks::suite_names();
    if (std::find(names.begin(), names.end(), s) == names.end()) throw UsageError("unknown suite '" + s + "'");
  }
  nlohmann::json summary;
  summary["seed"] = config.seed();
  summary["suites"] = nlohmann::json::array();
  bool all = true;
  for (const std::string& name : suites) {
    const checks::SuiteResult r = checks::run_suite(name, config.seed());
    nlohmann::json js{{"suite", name}, {"passed", r.passed()}, {"checks", nlohmann::json::array()}};
    for (const checks::Check& c : r.checks) {
      out << (c.passed ? "PASS " : "FAIL ") << name << ": " << c.name << " (" << c.detail << ")\n";
      js["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    all = all && r.passed();
    summary["suites"].push_back(js);
  }
  summary["passed"] = all;
  if (opts.json) write_text(*opts.json, summary.dump(2) + "\n");
  out << (all ? "all checks passed" : "some checks failed") << '\n';
  return all ? kExitOk : kExitFailure;
}

}  // namespace mddm::cli
