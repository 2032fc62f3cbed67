#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfrl/commands.hpp"
#include "mfrl/config.hpp"
#include "mfrl/error.hpp"

namespace {

struct Options {
  std::string config;
  std::string checkpoint;
  std::string which = "swa";
  std::string out;
  std::optional<std::uint64_t> seed;
};

mfrl::ExperimentConfig resolve(const Options& opt) {
  mfrl::ExperimentConfig config = mfrl::load_config(opt.config);
  if (opt.seed) config.set_seed(*opt.seed);
  if (!opt.out.empty()) config.out = opt.out;
  config.validate();
  return config;
}

std::optional<std::filesystem::path> checkpoint_path(const Options& opt) {
  if (opt.checkpoint.empty()) return std::nullopt;
  return std::filesystem::path(opt.checkpoint);
}

void report(const mfrl::CommandOutput& out) {
  std::printf("%s\n", out.summary.c_str());
  for (const auto& f : out.files) std::printf("wrote %s\n", f.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot learning on a frozen, weight-averaged representation"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "Experiment config (key = value lines)")->required();
    cmd->add_option("--out", opt.out, "Output directory (overrides out)");
    cmd->add_option("--seed", opt.seed, "Seed (overrides seed)");
  };
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", opt.checkpoint, "Checkpoint written by train");
    cmd->add_option("--which", opt.which, "Parameter set to use")->check(CLI::IsMember({"sgd", "swa"}));
  };

  auto* train = app.add_subcommand("train", "Train the representation; writes checkpoint.bin and train_log.csv");
  auto* evaluate = app.add_subcommand("evaluate", "Few-shot evaluation; writes metrics.json, results.csv, reliability.csv");
  auto* spectrum = app.add_subcommand("spectrum", "Singular values of meta-test features; writes spectrum.csv");
  auto* sweep = app.add_subcommand("sweep", "SWA learning-rate x length grid; writes sweep.csv");
  auto* compare = app.add_subcommand("compare-averaging", "No averaging vs EMA vs SWA; writes averaging.csv");
  for (auto* cmd : {train, evaluate, spectrum, sweep, compare}) add_common(cmd);
  add_model(evaluate);
  add_model(spectrum);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(mfrl::ExitCode::kConfig);
  }

  try {
    const mfrl::ExperimentConfig config = resolve(opt);
    if (*train) {
      report(mfrl::cmd_train(config));
    } else if (*evaluate) {
      report(mfrl::cmd_evaluate(config, checkpoint_path(opt), mfrl::parse_which(opt.which)));
    } else if (*spectrum) {
      report(mfrl::cmd_spectrum(config, checkpoint_path(opt), mfrl::parse_which(opt.which)));
    } else if (*sweep) {
      report(mfrl::cmd_sweep(config));
    } else if (*compare) {
      report(mfrl::cmd_compare_averaging(config));
    }
  } catch (const mfrl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
