#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csi/analysis/behavior.hpp"
#include "csi/analysis/clustering.hpp"
#include "csi/analysis/csv.hpp"
#include "csi/analysis/metrics.hpp"
#include "csi/analysis/report.hpp"
#include "csi/cli/run_config.hpp"
#include "csi/data/dataset.hpp"
#include "csi/data/split.hpp"
#include "csi/features/features.hpp"
#include "csi/features/text.hpp"
#include "csi/model/checkpoint.hpp"
#include "csi/model/network.hpp"
#include "csi/model/train.hpp"
#include "csi/synth/generator.hpp"

namespace csi {

namespace fs = std::filesystem;

/// Files written by a command, in write order.
struct Manifest {
  std::vector<std::string> files;
  void add(const std::string& f) { files.push_back(f); }
  void merge(const Manifest& o) { files.insert(files.end(), o.files.begin(), o.files.end()); }
};

inline void print_manifest(const Manifest& m, std::ostream& out) {
  for (const auto& f : m.files) out << f << '\n';
}

namespace detail {

inline std::string out_path(const RunConfig& c, const std::string& rel) { return (fs::path(c.out_dir) / rel).string(); }

inline void require_out_dir(const RunConfig& c) {
  if (!fs::is_directory(c.out_dir)) throw IoError("output directory does not exist: " + c.out_dir);
}

inline std::string ensure_subdir(const RunConfig& c, const std::string& rel) {
  require_out_dir(c);
  const auto p = fs::path(c.out_dir) / rel;
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
  return p.string();
}

inline std::string engagements_path(const RunConfig& c) {
  return c.engagements.empty() ? out_path(c, "data/engagements.jsonl") : c.engagements;
}
inline std::string labels_path(const RunConfig& c) { return c.labels.empty() ? out_path(c, "data/labels.csv") : c.labels; }
inline std::string ground_truth_path(const RunConfig& c) {
  return c.ground_truth.empty() ? out_path(c, "data/ground_truth.jsonl") : c.ground_truth;
}

inline std::string ablation_tag(Ablation a) {
  switch (a) {
    case Ablation::CI: return "ci";
    case Ablation::CIt: return "ci-t";
    case Ablation::CSI: return "csi";
  }
  return "csi";
}

inline std::string checkpoint_name(Ablation a, int fold) {
  return ablation_tag(a) + (fold < 0 ? std::string("_split") : "_fold" + std::to_string(fold)) + ".json";
}

inline std::uint64_t split_seed(const RunConfig& c) { return derive_seed(c.seed, "split"); }

inline std::uint64_t train_seed(const RunConfig& c, int fold) {
  return derive_seed(c.seed, "train/fold" + std::to_string(fold));
}

}  // namespace detail

/// Dataset with labels attached, plus optional text vectors.
struct LoadedData {
  Dataset ds;
  std::optional<TextVectors> text;
  std::vector<std::string> warnings;

  const TextVectors* text_ptr() const { return text ? &*text : nullptr; }
};

inline LoadedData load_data(const RunConfig& c) {
  LoadedData d{load_engagements(detail::engagements_path(c)), std::nullopt, {}};
  d.ds = load_labels(detail::labels_path(c), std::move(d.ds), &d.warnings);
  if (!c.text_vectors.empty()) d.text = TextVectors::load(c.text_vectors, c.features.text_dim);
  return d;
}

/// The splits the protocol calls for, with train subsampling applied.
/// Fold numbers are -1 for a single split.
inline std::vector<std::pair<int, Split>> resolve_splits(const RunConfig& c, const Dataset& ds) {
  std::vector<std::pair<int, Split>> out;
  if (c.protocol == Protocol::KFold) {
    auto folds = kfold(ds, c.folds, detail::split_seed(c));
    for (std::size_t f = 0; f < folds.size(); ++f) out.emplace_back(static_cast<int>(f), std::move(folds[f]));
  } else {
    out.emplace_back(-1, split_dataset(ds, {}, detail::split_seed(c)));
  }
  if (c.train_fraction < 1.0)
    for (auto& [fold, s] : out)
      s = subsample_train(s, ds, c.train_fraction, derive_seed(c.seed, "subsample/fold" + std::to_string(fold)));
  return out;
}

// ---------------------------------------------------------------- generate

inline Manifest cmd_generate(const RunConfig& c) {
  const auto dir = detail::ensure_subdir(c, "data");
  GenConfig g = c.generator;
  g.seed = c.seed;
  const auto files = write_generated(generate(g), dir);
  Manifest m;
  m.add(files.engagements);
  m.add(files.labels);
  m.add(files.ground_truth);
  return m;
}

// ---------------------------------------------------------------- featurize

inline Manifest cmd_featurize(const RunConfig& c) {
  const auto data = load_data(c);
  const auto& ds = data.ds;
  const auto splits = resolve_splits(c, ds);
  const auto fset = build_sequences(ds, splits.front().second, c.features, data.text_ptr());
  const auto dir = detail::ensure_subdir(c, "features");

  CsvTable users;
  users.header = {"user_id"};
  for (std::size_t k = 0; k < c.features.rank_capture_user; ++k) users.header.push_back("x_u" + std::to_string(k + 1));
  for (std::size_t k = 0; k < c.features.rank_score_user; ++k) users.header.push_back("y" + std::to_string(k + 1));
  for (std::size_t i = 0; i < ds.num_users(); ++i) {
    std::vector<std::string> row{ds.user_id(i)};
    for (double v : fset.users.capture.row(i)) row.push_back(format_double(v));
    for (double v : fset.users.score.row(i)) row.push_back(format_double(v));
    users.rows.push_back(std::move(row));
  }
  CsvTable bins;
  bins.header = {"article_id", "bin", "eta", "delta_t", "n_users"};
  for (std::size_t j = 0; j < ds.num_articles(); ++j)
    for (const auto& b : fset.sequences[j].bins)
      bins.rows.push_back({ds.article_id(j), std::to_string(b.index), std::to_string(b.eta), format_double(b.delta_t),
                           std::to_string(fset.masks[j].size())});

  Manifest m;
  const auto up = (fs::path(dir) / "user_features.csv").string();
  const auto bp = (fs::path(dir) / "sequences.csv").string();
  write_csv(up, users);
  write_csv(bp, bins);
  m.add(up);
  m.add(bp);
  return m;
}

// ---------------------------------------------------------------- train

struct TrainedRun {
  Ablation ablation;
  int fold;
  std::string checkpoint;
  TrainResult result;
};

inline Manifest cmd_train(const RunConfig& c, std::vector<TrainedRun>* runs = nullptr, std::ostream* progress = nullptr) {
  const auto data = load_data(c);
  const auto& ds = data.ds;
  const auto splits = resolve_splits(c, ds);
  const auto dir = detail::ensure_subdir(c, "checkpoints");
  std::map<Ablation, CsvTable> logs;
  for (auto a : c.ablations) logs[a].header = {"fold", "epoch", "train_loss", "val_loss", "val_accuracy"};

  Manifest m;
  for (const auto& [fold, split] : splits) {
    const auto fset = build_sequences(ds, split, c.features, data.text_ptr());
    for (auto a : c.ablations) {
      ModelConfig mc = c.model;
      mc.ablation = a;
      mc.seed = detail::train_seed(c, fold);
      const auto shape = ModelShape::from(mc, c.features);
      const auto train = make_inputs(fset, ds, split.train, a, c.features);
      const auto val = make_inputs(fset, ds, split.validation, a, c.features);
      TrainOptions opt;
      opt.threads = c.threads;
      TrainResult tr;
      try {
        tr = train_model(train, val, fset.users.score, mc, shape, opt);
      } catch (const TrainingError& e) {
        std::string what = e.what();
        const auto colon = what.find(": ");
        if (colon != std::string::npos) what = what.substr(colon + 2);
        throw TrainingError(to_string(a) + " fold " + std::to_string(fold) + ": " + what, e.epoch());
      }
      const auto path = (fs::path(dir) / detail::checkpoint_name(a, fold)).string();
      save_checkpoint(make_checkpoint(mc, c.features, tr, fset.users, ds, split, detail::split_seed(c), fold), path);
      m.add(path);
      for (const auto& e : tr.log)
        logs[a].rows.push_back({std::to_string(fold), std::to_string(e.epoch), format_double(e.train_loss),
                                format_double(e.val_loss), format_double(e.val_accuracy)});
      if (progress)
        *progress << to_string(a) << " fold " << fold << ": " << tr.log.size() << " epochs, best " << tr.best_epoch
                  << '\n';
      if (runs) runs->push_back({a, fold, path, std::move(tr)});
    }
  }
  for (auto a : c.ablations) {
    const auto path = detail::out_path(c, "training_log_" + detail::ablation_tag(a) + ".csv");
    write_csv(path, logs[a]);
    m.add(path);
  }
  return m;
}

// ---------------------------------------------------------------- evaluate

struct FoldEvaluation {
  int fold = -1;
  Metrics metrics;
};

struct AblationEvaluation {
  Ablation ablation;
  std::vector<FoldEvaluation> folds;
  MetricsSummary summary;
};

struct EvalReport {
  std::vector<AblationEvaluation> ablations;
  std::vector<CorrelationRow> correlations;
  Manifest manifest;
};

/// A loaded checkpoint together with predictions over every article.
struct ModelView {
  Checkpoint ck;
  Split split;
  FeatureSet features;
  std::vector<ArticleInput> inputs;  // all articles, in index order
  Prediction pred;
};

inline ModelView load_model_view(const std::string& path, const LoadedData& data, int threads) {
  ModelView v;
  v.ck = load_checkpoint(path);
  v.split = checkpoint_split(v.ck, data.ds);
  v.features = apply_feature_table(data.ds, v.ck.users, v.ck.features, data.text_ptr());
  std::vector<std::size_t> all(data.ds.num_articles());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  v.inputs = make_inputs(v.features, data.ds, all, v.ck.model.ablation, v.ck.features);
  v.pred = predict(v.ck.params, v.ck.model, v.inputs, v.ck.users.score, threads);
  return v;
}

/// Checkpoints for an ablation: the configured one if set, else every
/// `<ablation>_*.json` under out_dir/checkpoints, sorted by name.
inline std::vector<std::string> find_checkpoints(const RunConfig& c, Ablation a) {
  std::vector<std::string> out;
  const auto dir = fs::path(c.out_dir) / "checkpoints";
  if (!fs::is_directory(dir)) return out;
  const auto prefix = detail::ablation_tag(a) + "_";
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && e.path().extension() == ".json") {
      const auto rest = name.substr(prefix.size());
      if (rest.rfind("fold", 0) == 0 || rest == "split.json") out.push_back(e.path().string());
    }
  }
  std::sort(out.begin(), out.end(), [](const std::string& x, const std::string& y) {
    return x.size() != y.size() ? x.size() < y.size() : x < y;
  });
  return out;
}

inline std::vector<std::pair<Ablation, std::vector<std::string>>> checkpoint_sets(const RunConfig& c,
                                                                                    bool all_ablations) {
  std::vector<std::pair<Ablation, std::vector<std::string>>> out;
  if (!c.checkpoint.empty()) {
    const auto ck = load_checkpoint(c.checkpoint);
    out.push_back({ck.model.ablation, {c.checkpoint}});
    return out;
  }
  for (auto a : {Ablation::CI, Ablation::CIt, Ablation::CSI}) {
    if (!all_ablations && std::find(c.ablations.begin(), c.ablations.end(), a) == c.ablations.end()) continue;
    auto files = find_checkpoints(c, a);
    if (!files.empty()) out.push_back({a, std::move(files)});
  }
  if (out.empty()) throw IoError("no checkpoints found under " + (fs::path(c.out_dir) / "checkpoints").string());
  return out;
}

inline EvalReport cmd_evaluate(const RunConfig& c, bool all_ablations = true) {
  detail::require_out_dir(c);
  const auto data = load_data(c);
  const auto& ds = data.ds;
  EvalReport report;
  const auto sets = checkpoint_sets(c, all_ablations);

  std::vector<std::string> fold_names;
  for (const auto& [a, files] : sets) {
    AblationEvaluation ev{a, {}, {}};
    CsvTable table;
    table.header = {"fold", "accuracy", "precision", "recall", "f1"};
    CsvTable articles;
    articles.header = {"article_id", "fold", "l_hat", "p", "label"};
    std::vector<std::optional<double>> article_p(ds.num_articles());
    std::optional<ModelView> reference;
    for (const auto& path : files) {
      auto view = load_model_view(path, data, c.threads);
      std::vector<int> pred, truth;
      for (auto j : view.split.test) {
        const auto& r = view.pred.articles[j];
        pred.push_back(hard_label(r.l_hat));
        truth.push_back(*ds.label(j));
        article_p[j] = r.p;
        articles.rows.push_back({ds.article_id(j), std::to_string(view.ck.fold), format_double(r.l_hat),
                                 format_double(r.p), std::to_string(*ds.label(j))});
      }
      if (truth.empty()) throw SizeError("checkpoint " + path + " has an empty test split");
      const auto m = classification_metrics(pred, truth);
      ev.folds.push_back({view.ck.fold, m});
      table.rows.push_back({std::to_string(view.ck.fold), format_double(m.accuracy), format_double(m.precision),
                            format_double(m.recall), format_double(m.f1)});
      if (!reference) reference = std::move(view);
    }
    std::vector<Metrics> ms;
    for (const auto& f : ev.folds) ms.push_back(f.metrics);
    ev.summary = summarize(ms);
    table.rows.push_back({"mean", format_double(ev.summary.accuracy.mean), format_double(ev.summary.precision.mean),
                          format_double(ev.summary.recall.mean), format_double(ev.summary.f1.mean)});
    table.rows.push_back({"std", format_double(ev.summary.accuracy.std), format_double(ev.summary.precision.std),
                          format_double(ev.summary.recall.std), format_double(ev.summary.f1.std)});
    const auto tag = detail::ablation_tag(a);
    const auto mp = detail::out_path(c, "metrics_" + tag + ".csv");
    write_csv(mp, table);
    report.manifest.add(mp);
    std::sort(articles.rows.begin(), articles.rows.end());
    const auto ap = detail::out_path(c, "articles_" + tag + ".csv");
    write_csv(ap, articles);
    report.manifest.add(ap);

    if (uses_score(a)) {
      const auto proxy = fake_fraction(ds);
      const auto& users = reference->pred.users;
      CsvTable ut;
      ut.header = {"user_id", "s", "ell"};
      ScoreReportInput in;
      for (std::size_t i = 0; i < ds.num_users(); ++i) {
        ut.rows.push_back({ds.user_id(i), format_double(users[i].s),
                           proxy.ell[i] ? format_double(*proxy.ell[i]) : std::string("nan")});
        in.s.push_back(users[i].s);
        in.y_tilde.push_back(users[i].y_tilde);
      }
      in.article_p = article_p;
      const auto up = detail::out_path(c, "user_scores.csv");
      write_csv(up, ut);
      report.manifest.add(up);
      report.correlations =
          score_vs_fraction_report(ds, in, proxy, {c.max_pairs, derive_seed(c.seed, "analysis/pairs")});
      CsvTable ct;
      ct.header = {"statistic", "r", "p", "n"};
      for (const auto& row : report.correlations)
        ct.rows.push_back(
            {row.statistic, format_double(row.value.r), format_double(row.value.p), std::to_string(row.value.n)});
      const auto cp = detail::out_path(c, "correlations.csv");
      write_csv(cp, ct);
      report.manifest.add(cp);
    }
    report.ablations.push_back(std::move(ev));
  }

  if (report.ablations.size() > 1) {
    CsvTable t;
    t.header = {"ablation", "accuracy_mean", "accuracy_std", "f1_mean", "f1_std", "folds"};
    for (const auto& ev : report.ablations)
      t.rows.push_back({to_string(ev.ablation), format_double(ev.summary.accuracy.mean),
                        format_double(ev.summary.accuracy.std), format_double(ev.summary.f1.mean),
                        format_double(ev.summary.f1.std), std::to_string(ev.folds.size())});
    const auto p = detail::out_path(c, "ablation.csv");
    write_csv(p, t);
    report.manifest.add(p);
  }
  return report;
}

// ---------------------------------------------------------------- analyze

inline CsvTable cdf_table(const std::vector<CdfSeries>& series) {
  CsvTable t;
  t.header = {"value", "cumfrac", "cohort", "class"};
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.values.size(); ++k)
      t.rows.push_back({format_double(s.values[k]), format_double(s.fractions[k]), s.cohort, s.article_class});
  return t;
}

/// Cohort CDFs, article clustering and projections from the reference
/// (first) checkpoint of the Score-enabled ablation, or of the first
/// ablation found when none uses Score. Degenerate CDF series are reported
/// on `warn` and skipped.
inline Manifest cmd_analyze(const RunConfig& c, std::ostream& warn = std::cerr) {
  detail::require_out_dir(c);
  const auto data = load_data(c);
  const auto& ds = data.ds;
  const auto sets = checkpoint_sets(c, true);
  const auto* chosen = &sets.front();
  for (const auto& s : sets)
    if (uses_score(s.first)) chosen = &s;
  const auto view = load_model_view(chosen->second.front(), data, c.threads);
  const auto dir = detail::ensure_subdir(c, "analysis");
  Manifest m;

  std::vector<double> s;
  for (const auto& u : view.pred.users) s.push_back(u.s);
  const auto cohorts = extreme_cohorts(s, c.cohort_size);
  std::vector<CdfSeries> lags, acts;
  for (const auto& [name, members] : {std::pair{std::string("top"), cohorts.top}, std::pair{std::string("bottom"), cohorts.bottom}})
    for (int cls : {0, 1}) {
      try {
        lags.push_back(lag_cdf(ds, members, cls, name));
      } catch (const DegenerateInputError& e) {
        warn << "warning: " << e.what() << '\n';
      }
      try {
        acts.push_back(activity_cdf(ds, members, cls, name));
      } catch (const DegenerateInputError& e) {
        warn << "warning: " << e.what() << '\n';
      }
    }
  const auto lp = (fs::path(dir) / "lag_cdf.csv").string();
  const auto ap = (fs::path(dir) / "activity_cdf.csv").string();
  write_csv(lp, cdf_table(lags));
  write_csv(ap, cdf_table(acts));
  m.add(lp);
  m.add(ap);

  CsvTable ct;
  ct.header = {"user_id", "cohort", "s"};
  for (auto u : cohorts.top) ct.rows.push_back({ds.user_id(u), "top", format_double(s[u])});
  for (auto u : cohorts.bottom) ct.rows.push_back({ds.user_id(u), "bottom", format_double(s[u])});
  const auto cp = (fs::path(dir) / "cohorts.csv").string();
  write_csv(cp, ct);
  m.add(cp);

  const auto labeled = ds.labeled_articles();
  if (labeled.size() >= c.cluster_k) {
    Matrix v(labeled.size(), view.ck.model.repr_dim);
    std::vector<int> labels;
    for (std::size_t r = 0; r < labeled.size(); ++r) {
      const auto& vj = view.pred.articles[labeled[r]].v;
      std::copy(vj.begin(), vj.end(), v.row(r).begin());
      labels.push_back(*ds.label(labeled[r]));
    }
    const auto cl = cluster_articles(v, labels, c.cluster_k, derive_seed(c.seed, "analysis/cluster"),
                                     parse_cluster_method(c.cluster_method));
    CsvTable pt;
    pt.header = {"article_id", "mu1", "mu2", "cluster", "label"};
    for (std::size_t r = 0; r < labeled.size(); ++r)
      pt.rows.push_back({ds.article_id(labeled[r]), format_double(cl.projection(r, 0)), format_double(cl.projection(r, 1)),
                         std::to_string(cl.assignment[r]), std::to_string(labels[r])});
    CsvTable tt;
    tt.header = {"cluster", "true", "fake"};
    for (std::size_t k = 0; k < cl.contingency.size(); ++k)
      tt.rows.push_back({std::to_string(k), std::to_string(cl.contingency[k][0]), std::to_string(cl.contingency[k][1])});
    const auto pp = (fs::path(dir) / "clusters.csv").string();
    const auto tp = (fs::path(dir) / "contingency.csv").string();
    write_csv(pp, pt);
    write_csv(tp, tt);
    m.add(pp);
    m.add(tp);
  } else {
    warn << "warning: " << labeled.size() << " labeled articles, fewer than k=" << c.cluster_k
         << "; clustering skipped\n";
  }

  if (uses_score(view.ck.model.ablation)) {
    const auto proxy = fake_fraction(ds);
    Matrix y(ds.num_users(), view.ck.model.user_dim);
    for (std::size_t i = 0; i < ds.num_users(); ++i)
      std::copy(view.pred.users[i].y_tilde.begin(), view.pred.users[i].y_tilde.end(), y.row(i).begin());
    const auto proj = projection_2d(y);
    CsvTable ut;
    ut.header = {"user_id", "mu1", "mu2", "s", "ell"};
    for (std::size_t i = 0; i < ds.num_users(); ++i)
      ut.rows.push_back({ds.user_id(i), format_double(proj(i, 0)), format_double(proj(i, 1)), format_double(s[i]),
                         proxy.ell[i] ? format_double(*proxy.ell[i]) : std::string("nan")});
    const auto up = (fs::path(dir) / "user_projection.csv").string();
    write_csv(up, ut);
    m.add(up);
  }
  return m;
}

// ---------------------------------------------------------------- pipeline

struct PipelineReport {
  Manifest manifest;
  EvalReport evaluation;
  std::map<std::string, double> seconds;
};

inline void write_run_report(const RunConfig& c, const PipelineReport& r, const std::string& path) {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(nlohmann::json(c).dump());
  j["seed"] = c.seed;
  auto abl = nlohmann::ordered_json::array();
  for (const auto& ev : r.evaluation.ablations) {
    nlohmann::ordered_json a;
    a["ablation"] = to_string(ev.ablation);
    auto folds = nlohmann::ordered_json::array();
    for (const auto& f : ev.folds)
      folds.push_back({{"fold", f.fold},
                       {"accuracy", f.metrics.accuracy},
                       {"precision", f.metrics.precision},
                       {"recall", f.metrics.recall},
                       {"f1", f.metrics.f1}});
    a["folds"] = folds;
    a["accuracy_mean"] = ev.summary.accuracy.mean;
    a["accuracy_std"] = ev.summary.accuracy.std;
    a["f1_mean"] = ev.summary.f1.mean;
    a["f1_std"] = ev.summary.f1.std;
    abl.push_back(a);
  }
  j["ablations"] = abl;
  auto corr = nlohmann::ordered_json::array();
  for (const auto& row : r.evaluation.correlations)
    corr.push_back({{"statistic", row.statistic},
                    {"r", detail::nan_as_null(row.value.r)},
                    {"p", detail::nan_as_null(row.value.p)},
                    {"n", row.value.n}});
  j["correlations"] = corr;
  j["manifest"] = r.manifest.files;
  j["seconds"] = r.seconds;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

/// generate (unless an engagement file is configured) -> featurize -> train
/// -> evaluate -> analyze, then report.json.
inline PipelineReport cmd_pipeline(const RunConfig& c, std::ostream* progress = nullptr) {
  detail::require_out_dir(c);
  PipelineReport r;
  auto timed = [&](const std::string& stage, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    r.seconds[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (progress) *progress << stage << " done\n";
  };
  if (c.engagements.empty()) timed("generate", [&] { r.manifest.merge(cmd_generate(c)); });
  timed("featurize", [&] { r.manifest.merge(cmd_featurize(c)); });
  timed("train", [&] { r.manifest.merge(cmd_train(c, nullptr, progress)); });
  timed("evaluate", [&] {
    r.evaluation = cmd_evaluate(c);
    r.manifest.merge(r.evaluation.manifest);
  });
  timed("analyze", [&] { r.manifest.merge(cmd_analyze(c)); });
  const auto rp = detail::out_path(c, "report.json");
  r.manifest.add(rp);
  write_run_report(c, r, rp);
  return r;
}

}  // namespace csi
