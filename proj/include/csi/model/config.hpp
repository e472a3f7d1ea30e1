#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "csi/error.hpp"
#include "csi/features/features.hpp"

namespace csi {

/// Feature channels the Capture LSTM sees, and whether Score feeds Integrate.
///   CI   : x_t = (x_tau), no user path
///   CI-t : x_t = (eta, delta_t, x_tau), no user path
///   CSI  : x_t = (eta, delta_t, x_u, x_tau), Score enabled
enum class Ablation { CI, CIt, CSI };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::CI: return "CI";
    case Ablation::CIt: return "CI-t";
    case Ablation::CSI: return "CSI";
  }
  return "CSI";
}

/// Case-insensitive: "ci", "ci-t", "csi".
inline Ablation parse_ablation(std::string name) {
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (name == "ci") return Ablation::CI;
  if (name == "ci-t" || name == "cit") return Ablation::CIt;
  if (name == "csi") return Ablation::CSI;
  throw UsageError("unknown ablation '" + name + "' (expected ci, ci-t or csi)");
}

inline bool uses_score(Ablation a) { return a == Ablation::CSI; }

inline std::size_t input_dim(Ablation a, const FeatureConfig& f) {
  switch (a) {
    case Ablation::CI: return f.text_dim;
    case Ablation::CIt: return 2 + f.text_dim;
    case Ablation::CSI: return f.raw_dim();
  }
  return f.raw_dim();
}

/// Selects the ablation's channels from a full (eta, delta_t, x_u, x_tau) vector.
inline Vector select_channels(const Vector& full, Ablation a, const FeatureConfig& f) {
  const std::size_t rc = f.rank_capture_user;
  switch (a) {
    case Ablation::CSI: return full;
    case Ablation::CIt: {
      Vector out{full[0], full[1]};
      out.insert(out.end(), full.begin() + static_cast<std::ptrdiff_t>(2 + rc), full.end());
      return out;
    }
    case Ablation::CI: return Vector(full.begin() + static_cast<std::ptrdiff_t>(2 + rc), full.end());
  }
  return full;
}

struct ModelConfig {
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 50;
  std::size_t repr_dim = 50;   // d_v
  std::size_t user_dim = 100;  // rows of W_u
  double lambda_reg = 0.01;
  double dropout_p = 0.2;
  double lr = 0.001;
  int epochs = 100;
  int min_steps = 500;  // epochs are extended until this many Adam steps are possible
  std::size_t batch_size = 32;
  int patience = 10;
  double score_weight_init = 3.0;  // initial classifier weight on p_j, kept >= 0 in training
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::CSI;

  void validate() const {
    if (embed_dim < 1 || hidden_dim < 1 || repr_dim < 1 || user_dim < 1) throw ConfigError("model dims must be >= 1");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");
    if (!(lambda_reg >= 0.0)) throw ConfigError("lambda_reg must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (min_steps < 0) throw ConfigError("min_steps must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(score_weight_init >= 0.0) || !std::isfinite(score_weight_init))
      throw ConfigError("score_weight_init must be finite and >= 0");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim},   {"hidden_dim", c.hidden_dim}, {"repr_dim", c.repr_dim},
                     {"user_dim", c.user_dim},     {"lambda_reg", c.lambda_reg}, {"dropout_p", c.dropout_p},
                     {"lr", c.lr},                 {"epochs", c.epochs}, {"min_steps", c.min_steps},         {"batch_size", c.batch_size},
                     {"patience", c.patience},     {"score_weight_init", c.score_weight_init}, {"seed", c.seed},             {"ablation", to_string(c.ablation)}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.repr_dim = j.value("repr_dim", d.repr_dim);
  c.user_dim = j.value("user_dim", d.user_dim);
  c.lambda_reg = j.value("lambda_reg", d.lambda_reg);
  c.dropout_p = j.value("dropout_p", d.dropout_p);
  c.lr = j.value("lr", d.lr);
  c.epochs = j.value("epochs", d.epochs);
  c.min_steps = j.value("min_steps", d.min_steps);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.patience = j.value("patience", d.patience);
  c.score_weight_init = j.value("score_weight_init", d.score_weight_init);
  c.seed = j.value("seed", d.seed);
  c.ablation = parse_ablation(j.value("ablation", std::string("CSI")));
}

}  // namespace csi
