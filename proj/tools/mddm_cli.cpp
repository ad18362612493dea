#include "commands.hpp"
#include "run_config.hpp"

#include "mddm/errors.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

using namespace mddm;
using namespace mddm::cli;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "configuration file (key = value, [section] headers)");
  cmd->add_option("--set", c.sets, "override one key, e.g. --set train.epochs=100")->take_all();
  cmd->add_option("--seed", c.seed, "base seed (overrides the config key)");
}

RunConfig resolve(const Common& c) {
  RunConfig config;
  if (!c.config_file.empty()) config.load_file(c.config_file);
  for (const std::string& s : c.sets) config.set(s);
  if (c.seed) config.set("seed", std::to_string(*c.seed));
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic-boundary diffusion model for particle self-assembly"};
  app.require_subcommand(1);
  Common common;

  auto* print = app.add_subcommand("print-config", "print the effective configuration with descriptions");
  add_common(print, common);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "run reference MD over a parameter sweep");
  add_common(gen_cmd, common);
  gen_cmd->add_option("-o,--out", gen.out, "output directory")->required();
  gen_cmd->add_flag("--emit-lammps", gen.emit_lammps, "write LAMMPS scripts and tables instead of simulating");
  gen_cmd->add_flag("--dry-run", gen.dry_run, "print the plan without running or writing anything");
  gen_cmd->add_option("-j,--jobs", gen.jobs, "concurrent simulations")->check(CLI::PositiveNumber);

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "train a denoiser on a dataset");
  add_common(train_cmd, common);
  train_cmd->add_option("-d,--data", tr.manifest, "dataset manifest.json")->required();
  train_cmd->add_option("-o,--out", tr.out, "output directory")->required();
  train_cmd->add_flag("--conditional", tr.conditional, "train on the whole train split with conditions");
  train_cmd->add_option("--record", tr.record, "unconditional: train-split record index (default: chosen by seed)");

  SampleOptions sm;
  double k = 0, phi = 0, temp = 0;
  auto* sample_cmd = app.add_subcommand("sample", "generate conformations from a checkpoint");
  add_common(sample_cmd, common);
  sample_cmd->add_option("-m,--model", sm.checkpoint, "checkpoint file")->required();
  sample_cmd->add_option("-o,--out", sm.out, "output directory")->required();
  sample_cmd->add_option("-n,--count", sm.count, "number of samples");
  auto* k_opt = sample_cmd->add_option("--k", k, "condition: OPP wavenumber");
  auto* phi_opt = sample_cmd->add_option("--phi", phi, "condition: OPP phase");
  auto* t_opt = sample_cmd->add_option("--T", temp, "condition: temperature");
  k_opt->needs(phi_opt, t_opt);
  phi_opt->needs(k_opt, t_opt);
  t_opt->needs(k_opt, phi_opt);
  sample_cmd->add_flag("--trace", sm.trace, "also save x_t at the steps listed in sample.trace_steps");
  sample_cmd->add_option("-j,--jobs", sm.jobs, "concurrent samples")->check(CLI::PositiveNumber);

  EvalOptions ev;
  std::string eval_csv, eval_summary;
  auto* eval_cmd = app.add_subcommand("eval", "RDF-MSE of generated conformations against references");
  add_common(eval_cmd, common);
  eval_cmd->add_option("-g,--generated", ev.generated, "generated manifest.json")->required();
  eval_cmd->add_option("-r,--reference", ev.reference, "reference manifest.json")->required();
  eval_cmd->add_option("--csv", eval_csv, "per-pair CSV output");
  eval_cmd->add_option("--summary-csv", eval_summary, "per-column summary CSV output");

  RdfOptions rd;
  std::string svg;
  auto* rdf_cmd = app.add_subcommand("rdf", "radial distribution function of one conformation");
  add_common(rdf_cmd, common);
  rdf_cmd->add_option("input", rd.input, "native conformation file or LAMMPS dump")->required();
  rdf_cmd->add_option("-o,--out", rd.csv, "CSV output")->required();
  rdf_cmd->add_option("--svg", svg, "also write an SVG plot");
  rdf_cmd->add_option("--snapshot", rd.snapshot, "snapshot index in a dump");

  VerifyOptions vf;
  std::string json_out;
  auto* verify_cmd = app.add_subcommand("verify", "run verification suites");
  add_common(verify_cmd, common);
  verify_cmd->add_option("-s,--suite", vf.suites, "suite name or 'all' (repeatable)");
  verify_cmd->add_option("--json", json_out, "machine-readable summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig config = resolve(common);
    if (*print) {
      std::cout << config.dump(true);
      return kExitOk;
    }
    if (*gen_cmd) return cmd_gen_data(config, gen, std::cerr);
    if (*train_cmd) return cmd_train(config, tr, std::cerr);
    if (*sample_cmd) {
      if (*k_opt) sm.condition = Condition{k, phi, temp};
      return cmd_sample(config, sm, std::cerr);
    }
    if (*eval_cmd) {
      if (!eval_csv.empty()) ev.csv = eval_csv;
      if (!eval_summary.empty()) ev.summary_csv = eval_summary;
      return cmd_eval(config, ev, std::cout);
    }
    if (*rdf_cmd) {
      if (!svg.empty()) rd.svg = svg;
      return cmd_rdf(config, rd, std::cerr);
    }
    if (*verify_cmd) {
      if (!json_out.empty()) vf.json = json_out;
      return cmd_verify(config, vf, std::cout);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const LoadError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidInput& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
