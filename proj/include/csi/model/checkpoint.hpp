#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csi/data/dataset.hpp"
#include "csi/data/split.hpp"
#include "csi/error.hpp"
#include "csi/features/features.hpp"
#include "csi/model/config.hpp"
#include "csi/model/params.hpp"
#include "csi/model/train.hpp"

namespace csi {

inline constexpr int kCheckpointSchema = 1;

/// Everything needed to reproduce predictions for one trained fold.
struct Checkpoint {
  ModelConfig model;
  FeatureConfig features;
  ModelParams params;
  UserFeatureTable users;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  std::uint64_t split_seed = 0;
  int fold = -1;  // -1 for a single split
  std::vector<std::string> user_ids;
  std::vector<std::string> train_ids, validation_ids, test_ids;

  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

inline Matrix json_matrix(const nlohmann::json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows) throw ParseError("checkpoint: " + what + " has wrong row count", 0);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != cols) throw ParseError("checkpoint: " + what + " has wrong column count", 0);
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

inline nlohmann::json nan_as_null(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }

inline double null_as_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline std::vector<std::string> ids_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (auto j : idx) out.push_back(ds.article_id(j));
  return out;
}

}  // namespace detail

inline Checkpoint make_checkpoint(const ModelConfig& mc, const FeatureConfig& fc, const TrainResult& tr,
                                  const UserFeatureTable& users, const Dataset& ds, const Split& split,
                                  std::uint64_t split_seed, int fold) {
  Checkpoint c;
  c.model = mc;
  c.features = fc;
  c.params = tr.params;
  c.users = users;
  c.log = tr.log;
  c.best_epoch = tr.best_epoch;
  c.split_seed = split_seed;
  c.fold = fold;
  c.user_ids = ds.user_ids();
  c.train_ids = detail::ids_of(ds, split.train);
  c.validation_ids = detail::ids_of(ds, split.validation);
  c.test_ids = detail::ids_of(ds, split.test);
  return c;
}

/// Resolves the stored article ids against `ds`; throws ValidationError if
/// the dataset does not match the one the checkpoint was trained on.
inline Split checkpoint_split(const Checkpoint& c, const Dataset& ds) {
  if (c.user_ids != ds.user_ids()) throw ValidationError("checkpoint users do not match the dataset");
  auto resolve = [&](const std::vector<std::string>& ids) {
    std::vector<std::size_t> out;
    for (const auto& id : ids) {
      auto j = ds.find_article(id);
      if (!j) throw ValidationError("checkpoint article '" + id + "' not in dataset");
      out.push_back(*j);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  return {resolve(c.train_ids), resolve(c.validation_ids), resolve(c.test_ids)};
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json j;
  j["schema_version"] = kCheckpointSchema;
  j["model_config"] = c.model;
  j["feature_config"] = c.features;
  nlohmann::json params;
  c.params.for_each([&](std::string_view name, std::span<const double> s) {
    params[std::string(name)] = std::vector<double>(s.begin(), s.end());
  });
  params["w_a"] = detail::matrix_json(c.params.w_a);
  params["lstm_w_x"] = detail::matrix_json(c.params.lstm.w_x);
  params["lstm_w_h"] = detail::matrix_json(c.params.lstm.w_h);
  params["w_r"] = detail::matrix_json(c.params.w_r);
  params["w_u"] = detail::matrix_json(c.params.w_u);
  j["params"] = params;
  nlohmann::json users;
  users["ids"] = c.user_ids;
  users["capture"] = detail::matrix_json(c.users.capture);
  users["score"] = detail::matrix_json(c.users.score);
  users["eta_mean"] = c.users.eta_mean;
  users["eta_std"] = c.users.eta_std;
  users["dt_mean"] = c.users.dt_mean;
  users["dt_std"] = c.users.dt_std;
  j["user_features"] = users;
  auto log = nlohmann::json::array();
  for (const auto& e : c.log) {
    nlohmann::json row;
    row["epoch"] = e.epoch;
    row["train_loss"] = e.train_loss;
    row["val_loss"] = detail::nan_as_null(e.val_loss);
    row["val_accuracy"] = detail::nan_as_null(e.val_accuracy);
    log.push_back(row);
  }
  j["training_log"] = log;
  j["best_epoch"] = c.best_epoch;
  nlohmann::json split;
  split["seed"] = c.split_seed;
  split["fold"] = c.fold;
  split["train"] = c.train_ids;
  split["validation"] = c.validation_ids;
  split["test"] = c.test_ids;
  j["split"] = split;
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("schema_version")) throw VersionError("checkpoint has no schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kCheckpointSchema)
    throw VersionError("checkpoint schema " + j["schema_version"].dump() + " is not supported (expected " +
                       std::to_string(kCheckpointSchema) + ")");
  try {
    Checkpoint c;
    c.model = j.at("model_config").get<ModelConfig>();
    c.features = j.at("feature_config").get<FeatureConfig>();
    c.model.validate();
    c.features.validate();
    const auto shape = ModelShape::from(c.model, c.features);
    c.params = ModelParams::zeros(shape);
    const auto& params = j.at("params");
    c.params.w_a = detail::json_matrix(params.at("w_a"), shape.embed_dim, shape.input_dim, "w_a");
    c.params.lstm.w_x = detail::json_matrix(params.at("lstm_w_x"), 4 * shape.hidden_dim, shape.embed_dim, "lstm_w_x");
    c.params.lstm.w_h = detail::json_matrix(params.at("lstm_w_h"), 4 * shape.hidden_dim, shape.hidden_dim, "lstm_w_h");
    c.params.w_r = detail::json_matrix(params.at("w_r"), shape.repr_dim, shape.hidden_dim, "w_r");
    c.params.w_u = detail::json_matrix(params.at("w_u"), shape.user_dim, shape.score_input_dim, "w_u");
    c.params.for_each([&](std::string_view name, std::span<double> dst) {
      const auto& v = params.at(std::string(name));
      if (v.is_array() && !v.empty() && v.front().is_array()) return;  // matrix, already read
      if (!v.is_array() || v.size() != dst.size())
        throw ParseError("checkpoint: parameter " + std::string(name) + " has wrong size", 0);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = v[k].get<double>();
    });
    if (!c.params.all_finite()) throw ParseError("checkpoint: non-finite parameter", 0);

    const auto& users = j.at("user_features");
    c.user_ids = users.at("ids").get<std::vector<std::string>>();
    c.users.capture = detail::json_matrix(users.at("capture"), c.user_ids.size(), c.features.rank_capture_user, "capture");
    c.users.score = detail::json_matrix(users.at("score"), c.user_ids.size(), c.features.rank_score_user, "score");
    c.users.eta_mean = users.at("eta_mean").get<double>();
    c.users.eta_std = users.at("eta_std").get<double>();
    c.users.dt_mean = users.at("dt_mean").get<double>();
    c.users.dt_std = users.at("dt_std").get<double>();

    for (const auto& row : j.at("training_log")) {
      EpochLog e;
      e.epoch = row.at("epoch").get<int>();
      e.train_loss = row.at("train_loss").get<double>();
      e.val_loss = detail::null_as_nan(row.at("val_loss"));
      e.val_accuracy = detail::null_as_nan(row.at("val_accuracy"));
      c.log.push_back(e);
    }
    c.best_epoch = j.at("best_epoch").get<int>();
    const auto& split = j.at("split");
    c.split_seed = split.at("seed").get<std::uint64_t>();
    c.fold = split.at("fold").get<int>();
    c.train_ids = split.at("train").get<std::vector<std::string>>();
    c.validation_ids = split.at("validation").get<std::vector<std::string>>();
    c.test_ids = split.at("test").get<std::vector<std::string>>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << checkpoint_to_json(c).dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint ") + path + ": " + e.what(), 0);
  }
  return checkpoint_from_json(j);
}

}  // namespace csi
