#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "csi/cli/commands.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablation;
  std::optional<double> train_fraction;
  std::optional<int> threads;
  std::optional<std::string> out;
};

csi::RunConfig resolve(const Overrides& o) {
  csi::RunConfig c = o.config.empty() ? csi::RunConfig{} : csi::load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.ablation) c.ablations = {csi::parse_ablation(*o.ablation)};
  if (o.train_fraction) c.train_fraction = *o.train_fraction;
  if (o.threads) c.threads = *o.threads;
  if (o.out) c.out_dir = *o.out;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fake-news detection from text, response timing and user behavior"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run config (JSON)");
    sub->add_option("--seed", o.seed, "global seed");
    sub->add_option("--ablation", o.ablation, "ci, ci-t or csi");
    sub->add_option("--train-fraction", o.train_fraction, "share of the training pool to use");
    sub->add_option("--threads", o.threads, "worker threads for per-article work");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic benchmark");
  auto* feat = app.add_subcommand("featurize", "export user features and bin sequences");
  auto* train = app.add_subcommand("train", "train one checkpoint per fold");
  auto* eval = app.add_subcommand("evaluate", "metrics, ablation table, score correlations");
  auto* analyze = app.add_subcommand("analyze", "cohort CDFs, clustering, projections");
  auto* pipe = app.add_subcommand("pipeline", "all stages");
  for (auto* s : {gen, feat, train, eval, analyze, pipe}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto cfg = resolve(o);
    csi::Manifest m;
    if (*gen) {
      m = csi::cmd_generate(cfg);
    } else if (*feat) {
      m = csi::cmd_featurize(cfg);
    } else if (*train) {
      m = csi::cmd_train(cfg, nullptr, &std::cerr);
    } else if (*eval) {
      const auto report = csi::cmd_evaluate(cfg, !o.ablation.has_value());
      for (const auto& ev : report.ablations)
        std::cerr << csi::to_string(ev.ablation) << " accuracy " << ev.summary.accuracy.mean << " +- "
                  << ev.summary.accuracy.std << ", f1 " << ev.summary.f1.mean << '\n';
      m = report.manifest;
    } else if (*analyze) {
      m = csi::cmd_analyze(cfg);
    } else if (*pipe) {
      m = csi::cmd_pipeline(cfg, &std::cerr).manifest;
    }
    csi::print_manifest(m, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
