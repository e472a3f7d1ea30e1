#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "csi/error.hpp"
#include "csi/features/features.hpp"
#include "csi/model/config.hpp"
#include "csi/synth/generator.hpp"

namespace csi {

enum class Protocol { KFold, Split };

struct RunConfig {
  std::uint64_t seed = 42;

  // Empty paths fall back to the files `generate` writes under out_dir/data.
  std::string engagements;
  std::string labels;
  std::string ground_truth;
  std::string text_vectors;
  std::string checkpoint;
  std::string out_dir = "out";

  FeatureConfig features;
  ModelConfig model;
  GenConfig generator;

  Protocol protocol = Protocol::KFold;
  std::size_t folds = 5;
  double train_fraction = 1.0;
  std::vector<Ablation> ablations{Ablation::CI, Ablation::CIt, Ablation::CSI};

  std::size_t cluster_k = 5;
  std::string cluster_method = "spectral";
  std::size_t cohort_size = 25;
  std::size_t max_pairs = 100000;

  int threads = 1;

  void validate() const {
    features.validate();
    model.validate();
    generator.validate();
    if (folds < 2) throw ConfigError("protocol.folds must be >= 2");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must lie in (0, 1]");
    if (ablations.empty()) throw ConfigError("at least one ablation is required");
    if (cluster_k < 1) throw ConfigError("analysis.k must be >= 1");
    if (cohort_size < 1) throw ConfigError("analysis.cohort_size must be >= 1");
    if (max_pairs < 1) throw ConfigError("analysis.max_pairs must be >= 1");
    if (cluster_method != "kmeans" && cluster_method != "spectral")
      throw ConfigError("analysis.method must be kmeans or spectral");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (out_dir.empty()) throw ConfigError("paths.out_dir must not be empty");
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

/// Accepts only the keys that a default-constructed T serializes to.
template <class T>
T get_strict(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const nlohmann::json known = T{};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  return j.get<T>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  std::vector<std::string> abl;
  for (auto a : c.ablations) abl.push_back(to_string(a));
  j = nlohmann::json{
      {"seed", c.seed},
      {"paths",
       {{"engagements", c.engagements},
        {"labels", c.labels},
        {"ground_truth", c.ground_truth},
        {"text_vectors", c.text_vectors},
        {"checkpoint", c.checkpoint},
        {"out_dir", c.out_dir}}},
      {"features", c.features},
      {"model", c.model},
      {"generator", c.generator},
      {"protocol",
       {{"mode", c.protocol == Protocol::KFold ? "kfold" : "split"},
        {"folds", c.folds},
        {"train_fraction", c.train_fraction}}},
      {"ablations", abl},
      {"analysis",
       {{"k", c.cluster_k}, {"method", c.cluster_method}, {"cohort_size", c.cohort_size}, {"max_pairs", c.max_pairs}}},
      {"threads", c.threads}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"seed", "paths", "features", "model", "generator", "protocol", "ablations", "analysis", "threads"},
                         "run config");
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      detail::reject_unknown(p, {"engagements", "labels", "ground_truth", "text_vectors", "checkpoint", "out_dir"}, "paths");
      c.engagements = p.value("engagements", c.engagements);
      c.labels = p.value("labels", c.labels);
      c.ground_truth = p.value("ground_truth", c.ground_truth);
      c.text_vectors = p.value("text_vectors", c.text_vectors);
      c.checkpoint = p.value("checkpoint", c.checkpoint);
      c.out_dir = p.value("out_dir", c.out_dir);
    }
    if (j.contains("features")) c.features = detail::get_strict<FeatureConfig>(j["features"], "features");
    if (j.contains("model")) c.model = detail::get_strict<ModelConfig>(j["model"], "model");
    if (j.contains("generator")) c.generator = detail::get_strict<GenConfig>(j["generator"], "generator");
    if (j.contains("protocol")) {
      const auto& p = j["protocol"];
      detail::reject_unknown(p, {"mode", "folds", "train_fraction"}, "protocol");
      const auto mode = p.value("mode", std::string("kfold"));
      if (mode != "kfold" && mode != "split") throw ConfigError("protocol.mode must be kfold or split");
      c.protocol = mode == "kfold" ? Protocol::KFold : Protocol::Split;
      c.folds = p.value("folds", c.folds);
      c.train_fraction = p.value("train_fraction", c.train_fraction);
    }
    if (j.contains("ablations")) {
      c.ablations.clear();
      for (const auto& a : j["ablations"]) c.ablations.push_back(parse_ablation(a.get<std::string>()));
    }
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      detail::reject_unknown(a, {"k", "method", "cohort_size", "max_pairs"}, "analysis");
      c.cluster_k = a.value("k", c.cluster_k);
      c.cluster_method = a.value("method", c.cluster_method);
      c.cohort_size = a.value("cohort_size", c.cohort_size);
      c.max_pairs = a.value("max_pairs", c.max_pairs);
    }
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  } catch (const UsageError& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace csi
