#include "regnn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "regnn/experiment.hpp"
#include "regnn/oracle.hpp"
#include "regnn/text.hpp"

namespace regnn::cli {

namespace fs = std::filesystem;
using experiment::ExperimentConfig;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

// Resolves the config file plus command-line overrides.
ExperimentConfig resolve(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : experiment::load_config(g.config_path);
  if (g.seed) c.train.seed = *g.seed;
  if (!g.out_dir.empty()) c.output.directory = g.out_dir;
  c.validate();
  return c;
}

wireless::NetworkModel network_for(const ExperimentConfig& c, const std::string& path) {
  return path.empty() ? experiment::make_network(c) : wireless::load_network(path);
}

std::string in_dir(const ExperimentConfig& c, const std::string& name) {
  fs::create_directories(c.output.directory);
  return (fs::path(c.output.directory) / name).string();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random edge graph neural networks for wireless power allocation", "regnn"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed; overrides train.seed");
  app.add_option("--out", g.out_dir, "Output directory; overrides output.directory");
  app.add_flag("--quiet", g.quiet, "Print nothing on success");

  auto* gen = app.add_subcommand("gen-network", "Generate the configured topology and write network.json");

  std::string train_network;
  auto* train_cmd = app.add_subcommand("train", "Run primal-dual training");
  train_cmd->add_option("--network", train_network, "Train on this topology file instead of generating one")
      ->check(CLI::ExistingFile);

  std::string checkpoint, eval_network;
  std::optional<std::size_t> eval_samples;
  auto* eval_cmd = app.add_subcommand("eval", "Paired per-draw evaluation of REGNN and the baselines");
  eval_cmd->add_option("--checkpoint", checkpoint, "Filter tensor checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--network", eval_network, "Topology file (default: generate from config)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--samples", eval_samples, "Fading draws (default: output.eval_samples)");

  std::string transfer_checkpoint;
  experiment::TransferOptions transfer;
  auto* transfer_cmd = app.add_subcommand("transfer", "Evaluate a checkpoint on fresh networks of other sizes");
  transfer_cmd->add_option("--checkpoint", transfer_checkpoint, "Filter tensor checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  transfer_cmd->add_option("--sizes", transfer.sizes, "Network sizes m'")->required()->delimiter(',');
  transfer_cmd->add_option("--networks", transfer.networks, "Networks per size")->capture_default_str();
  transfer_cmd->add_option("--samples", transfer.samples, "Fading draws per network")->capture_default_str();
  transfer_cmd->add_option("--density", transfer.density_factor, "Density factor r")->capture_default_str();

  std::string baseline_network;
  std::optional<std::size_t> baseline_samples;
  auto* baseline_cmd = app.add_subcommand("baseline", "Evaluate WMMSE, equal power and random selection only");
  baseline_cmd->add_option("--network", baseline_network, "Topology file (default: generate from config)")
      ->check(CLI::ExistingFile);
  baseline_cmd->add_option("--samples", baseline_samples, "Fading draws (default: output.eval_samples)");

  oracle::OracleOptions oracle_opts;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Run the reference-implementation checks");
  oracle_cmd->add_option("--m", oracle_opts.m, "Nodes per instance (2..10)")
      ->check(CLI::Range(2, 10))
      ->capture_default_str();
  oracle_cmd->add_option("--instances", oracle_opts.instances, "Random instances per check")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const ExperimentConfig cfg = resolve(g);
    const std::uint64_t seed = cfg.seed();
    const std::uint64_t hash = experiment::config_hash(cfg);
    std::ostream* log = g.quiet ? nullptr : &out;

    if (gen->parsed()) {
      const wireless::NetworkModel net = experiment::make_network(cfg);
      const std::string path = in_dir(cfg, "network.json");
      wireless::save_network(net, path);
      if (log) *log << "wrote " << path << " (m=" << net.m << ", n=" << net.n << ")\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      std::optional<wireless::NetworkModel> net;
      if (!train_network.empty()) net = wireless::load_network(train_network);
      const auto a = experiment::run_train(cfg, cfg.output.directory, net);
      if (log) {
        *log << "wrote " << a.checkpoint << ", " << a.metrics_csv << ", " << a.run_header << ", " << a.network
             << "\n";
        if (!a.result.report.records.empty()) {
          const auto& r = a.result.report.records.back();
          *log << "final: iteration " << r.iteration << ", sum-rate " << format_double(r.sum_rate)
               << " nats, mean power " << format_double(r.mean_power) << " W\n";
        }
      }
      return 0;
    }

    if (eval_cmd->parsed()) {
      const gnn::FilterTensor A = gnn::load_checkpoint(checkpoint);
      const wireless::NetworkModel net = network_for(cfg, eval_network);
      const auto draws = experiment::paired_evaluation(A, net, cfg.problem_spec(net.m),
                                                       eval_samples.value_or(cfg.output.eval_samples), seed);
      const std::string path = in_dir(cfg, "eval.csv");
      write_file(path, experiment::eval_csv(draws, seed, hash));
      if (log) {
        const auto mu = experiment::means(draws);
        *log << "wrote " << path << "\nmean sum-rate (nats): regnn " << format_double(mu.regnn_sampled)
             << ", regnn-threshold " << format_double(mu.regnn_threshold) << ", wmmse " << format_double(mu.wmmse)
             << ", equal " << format_double(mu.equal) << ", random " << format_double(mu.random) << "\n";
      }
      return 0;
    }

    if (transfer_cmd->parsed()) {
      const gnn::FilterTensor A = gnn::load_checkpoint(transfer_checkpoint);
      const auto rows = experiment::run_transfer(A, cfg, transfer);
      const std::string path = in_dir(cfg, "transfer.csv");
      write_file(path, experiment::transfer_csv(rows, seed, hash));
      if (log) {
        *log << "wrote " << path << "\n";
        for (const auto& r : rows)
          *log << "m'=" << r.m << " " << r.policy << ": " << format_double(r.mean) << " nats\n";
      }
      return 0;
    }

    if (baseline_cmd->parsed()) {
      const wireless::NetworkModel net = network_for(cfg, baseline_network);
      const auto draws = experiment::baseline_evaluation(net, cfg.problem_spec(net.m),
                                                         baseline_samples.value_or(cfg.output.eval_samples), seed);
      const std::string path = in_dir(cfg, "baseline.csv");
      write_file(path, experiment::baseline_csv(draws, seed, hash));
      if (log) *log << "wrote " << path << "\n";
      return 0;
    }

    if (oracle_cmd->parsed()) {
      oracle_opts.seed = seed;
      const oracle::OracleReport report = oracle::run_oracle_checks(oracle_opts);
      for (const auto& c : report.checks) {
        if (log || !c.passed()) {
          std::ostream& o = c.passed() ? out : err;
          o << (c.passed() ? "ok   " : "FAIL ") << c.name << ": " << c.instances << " instances, max residual "
            << format_double(c.max_residual) << " (tolerance " << format_double(c.tolerance) << ")";
          if (!c.passed()) {
            o << ", failing seeds:";
            for (std::uint64_t s : c.failing_seeds) o << ' ' << s;
          }
          o << "\n";
        }
      }
      return report.passed() ? 0 : 1;
    }
  } catch (const experiment::ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace regnn::cli
