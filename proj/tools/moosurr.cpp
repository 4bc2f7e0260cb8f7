// Command-line front end: train, experiment, pareto-scan, explain, gnf.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moosurr/harness.hpp"
#include "moosurr/serialize.hpp"

namespace fs = std::filesystem;
using namespace moosurr;

namespace {

constexpr int kFatal = 1;

// A bare path is taken to be a CSV schema file.
std::string as_reference(const std::string& dataset) {
  for (const char* scheme : {"synthetic:", "csv:", "idx:"}) {
    if (dataset.rfind(scheme, 0) == 0) return dataset;
  }
  return "csv:" + dataset;
}

int exit_code_for(std::size_t failed) { return static_cast<int>(std::min<std::size_t>(failed, 100)); }

void print_table(const ResultsTable& table) {
  for (const auto& r : table.rows) {
    std::cout << r.method << '\t' << r.metric << '\t' << format_number(r.mean);
    if (r.stddev) std::cout << " +- " << format_number(*r.stddev);
    std::cout << "\t(n=" << r.n << ")\n";
  }
}

void report_failures(const ExperimentResult& result) {
  for (const auto& run : result.runs) {
    if (!run.result) std::cerr << "run " << run.method << " seed " << run.seed << " failed: " << run.error << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint training of a black-box MLP and a linear surrogate"};
  app.require_subcommand(1);
  std::string format = "csv";

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one method on one dataset");
  std::string dataset;
  std::string method = "MOO";
  std::uint64_t seed = 0;
  std::string out = "results";
  TrainConfig config;
  bool with_gnf = false;
  train_cmd->add_option("--dataset", dataset, "Dataset reference or schema file")->required();
  train_cmd->add_option("--method", method, "MOO, STL, UNI, RND, GS:<alpha>, JSEP, JDIST, LINEAR");
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--out", out, "Output directory");
  train_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  train_cmd->add_option("--epochs", config.max_epochs);
  train_cmd->add_option("--batch-size", config.batch_size);
  train_cmd->add_flag("--full-batch", config.full_batch);
  train_cmd->add_option("--hidden", config.hidden, "Hidden layer widths")->delimiter(',');
  train_cmd->add_option("--lr-theta", config.lr_theta);
  train_cmd->add_option("--lr-phi", config.lr_phi);
  train_cmd->add_flag("--gnf", with_gnf, "Also report GNF with local surrogates");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run a method x seed grid from a spec file");
  std::string spec_path;
  std::string out_override;
  exp_cmd->add_option("--spec", spec_path)->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("--out", out_override, "Overrides the spec's output directory");
  exp_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

  // pareto-scan
  auto* scan_cmd = app.add_subcommand("pareto-scan", "GS alpha grid plus MOO, with dominance flags");
  scan_cmd->add_option("--spec", spec_path)->required()->check(CLI::ExistingFile);
  scan_cmd->add_option("--out", out_override, "Overrides the spec's output directory");

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "Print a surrogate's ranked feature importance");
  std::string surrogate_path;
  explain_cmd->add_option("--surrogate", surrogate_path)->required()->check(CLI::ExistingFile);

  // gnf
  auto* gnf_cmd = app.add_subcommand("gnf", "Neighborhood fidelity of a trained black-box");
  std::string model_path;
  GnfSettings gnf_settings;
  std::string mode = "local";
  gnf_cmd->add_option("--dataset", dataset, "Dataset reference or schema file")->required();
  gnf_cmd->add_option("--model", model_path, "Black-box checkpoint")->required()->check(CLI::ExistingFile);
  gnf_cmd->add_option("--surrogate", surrogate_path, "Global surrogate (mode global)")->check(CLI::ExistingFile);
  gnf_cmd->add_option("--seed", seed, "Seed the model was trained with");
  gnf_cmd->add_option("--mode", mode)->check(CLI::IsMember({"local", "global"}));
  gnf_cmd->add_option("--points", gnf_settings.points);
  gnf_cmd->add_option("--neighbors", gnf_settings.neighbors);
  gnf_cmd->add_option("--sigma2", gnf_settings.sigma2);
  gnf_cmd->add_option("--fit-samples", gnf_settings.fit_samples);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      ExperimentSpec spec;
      spec.dataset = as_reference(dataset);
      spec.name = dataset_label(spec.dataset);
      spec.methods.push_back({method, config_for_tag(method, config)});
      spec.seeds = {seed};
      if (with_gnf) {
        spec.metrics.push_back("gnf");
        spec.gnf.enabled = true;
      }
      spec.output_dir = out;
      const ExperimentResult result = run_experiment(spec, format);
      print_table(result.table);
      report_failures(result);
      return exit_code_for(result.failed);
    }
    if (*exp_cmd) {
      ExperimentSpec spec = load_experiment_spec(spec_path);
      if (!out_override.empty()) spec.output_dir = out_override;
      const ExperimentResult result = run_experiment(spec, format);
      print_table(result.table);
      report_failures(result);
      std::cout << "wrote " << (spec.output_dir / ("results." + format)).string() << '\n';
      return exit_code_for(result.failed);
    }
    if (*scan_cmd) {
      ExperimentSpec spec = load_experiment_spec(spec_path);
      if (!out_override.empty()) spec.output_dir = out_override;
      const Dataset data = resolve_dataset(spec.dataset, spec.base_dir);
      const auto points = pareto_scan(spec, data);
      const std::string csv = scatter_to_csv(points);
      write_text_file(spec.output_dir / "scatter.csv", csv);
      std::cout << csv;
      return 0;
    }
    if (*explain_cmd) {
      std::vector<std::string> names;
      const LinearSurrogate g = surrogate_from_json(read_text_file(surrogate_path), &names);
      std::cout << importance_to_text(explain(g, names), g.bias);
      return 0;
    }
    if (*gnf_cmd) {
      const Dataset data = dataset_for_seed(resolve_dataset(as_reference(dataset)), seed);
      TrainResult trained;
      trained.black_box = mlp_from_json(read_text_file(model_path));
      gnf_settings.local = mode == "local";
      if (!gnf_settings.local) {
        if (surrogate_path.empty()) throw std::invalid_argument("--mode global needs --surrogate");
        trained.surrogate = surrogate_from_json(read_text_file(surrogate_path));
      }
      std::cout << format_number(evaluate_gnf(trained, data, gnf_settings, seed)) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFatal;
  }
  return 0;
}
