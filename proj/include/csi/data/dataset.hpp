#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "csi/error.hpp"

namespace csi {

/// One (user, article, time, text) event. `line` is the 1-based line of the
/// source file the record came from, 0 when constructed in memory.
struct Engagement {
  std::string user_id;
  std::string article_id;
  std::int64_t t = 0;
  std::string text;
  std::size_t line = 0;

  bool operator==(const Engagement&) const = default;
};

/// Engagements sorted by (article_id, t), with dense indices for users and
/// articles assigned in lexicographic id order. Labels: 0 true, 1 fake.
class Dataset {
 public:
  Dataset() = default;

  /// Validates every record, builds the id maps and sorts.
  explicit Dataset(std::vector<Engagement> engagements) : engagements_(std::move(engagements)) {
    std::map<std::string, std::size_t> users, articles;
    for (const auto& e : engagements_) {
      if (e.user_id.empty() || e.article_id.empty())
        throw ValidationError("engagement with empty user_id or article_id" +
                              (e.line ? " at line " + std::to_string(e.line) : std::string{}));
      if (e.t < 0) throw ValidationError("engagement with negative timestamp");
      users.emplace(e.user_id, 0);
      articles.emplace(e.article_id, 0);
    }
    for (auto& [id, idx] : users) {
      idx = user_ids_.size();
      user_ids_.push_back(id);
    }
    for (auto& [id, idx] : articles) {
      idx = article_ids_.size();
      article_ids_.push_back(id);
    }
    user_index_ = std::move(users);
    article_index_ = std::move(articles);
    std::stable_sort(engagements_.begin(), engagements_.end(), [](const Engagement& a, const Engagement& b) {
      return std::tie(a.article_id, a.t, a.line) < std::tie(b.article_id, b.t, b.line);
    });
    eng_user_.resize(engagements_.size());
    eng_article_.resize(engagements_.size());
    article_begin_.assign(article_ids_.size() + 1, 0);
    for (std::size_t k = 0; k < engagements_.size(); ++k) {
      eng_user_[k] = user_index_.at(engagements_[k].user_id);
      eng_article_[k] = article_index_.at(engagements_[k].article_id);
      ++article_begin_[eng_article_[k] + 1];
    }
    for (std::size_t j = 0; j < article_ids_.size(); ++j) article_begin_[j + 1] += article_begin_[j];
    labels_.assign(article_ids_.size(), std::nullopt);
    validate();
  }

  std::size_t num_users() const noexcept { return user_ids_.size(); }
  std::size_t num_articles() const noexcept { return article_ids_.size(); }
  std::size_t num_engagements() const noexcept { return engagements_.size(); }

  const std::vector<Engagement>& engagements() const noexcept { return engagements_; }
  const std::string& user_id(std::size_t i) const { return user_ids_.at(i); }
  const std::string& article_id(std::size_t j) const { return article_ids_.at(j); }
  const std::vector<std::string>& user_ids() const noexcept { return user_ids_; }
  const std::vector<std::string>& article_ids() const noexcept { return article_ids_; }

  std::optional<std::size_t> find_user(const std::string& id) const {
    auto it = user_index_.find(id);
    return it == user_index_.end() ? std::nullopt : std::optional{it->second};
  }
  std::optional<std::size_t> find_article(const std::string& id) const {
    auto it = article_index_.find(id);
    return it == article_index_.end() ? std::nullopt : std::optional{it->second};
  }

  /// User index of engagement k (in sorted order).
  std::size_t engagement_user(std::size_t k) const { return eng_user_[k]; }
  std::size_t engagement_article(std::size_t k) const { return eng_article_[k]; }

  /// Half-open range of engagement positions belonging to article j.
  std::pair<std::size_t, std::size_t> article_range(std::size_t j) const {
    return {article_begin_[j], article_begin_[j + 1]};
  }

  /// Distinct users that engaged article j, ascending.
  std::vector<std::size_t> article_users(std::size_t j) const {
    auto [b, e] = article_range(j);
    std::vector<std::size_t> out(eng_user_.begin() + static_cast<std::ptrdiff_t>(b),
                                 eng_user_.begin() + static_cast<std::ptrdiff_t>(e));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  const std::vector<std::optional<int>>& labels() const noexcept { return labels_; }
  std::optional<int> label(std::size_t j) const { return labels_.at(j); }
  void set_label(std::size_t j, int label) {
    if (label != 0 && label != 1) throw ValidationError("label must be 0 or 1");
    labels_.at(j) = label;
  }

  std::vector<std::size_t> labeled_articles() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < labels_.size(); ++j)
      if (labels_[j]) out.push_back(j);
    return out;
  }

  void validate() const {
    for (std::size_t j = 0; j < article_ids_.size(); ++j)
      if (article_begin_[j + 1] == article_begin_[j])
        throw ValidationError("article " + article_ids_[j] + " has no engagements");
  }

 private:
  std::vector<Engagement> engagements_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> article_ids_;
  std::map<std::string, std::size_t> user_index_;
  std::map<std::string, std::size_t> article_index_;
  std::vector<std::size_t> eng_user_;
  std::vector<std::size_t> eng_article_;
  std::vector<std::size_t> article_begin_;
  std::vector<std::optional<int>> labels_;
};

/// Parses one JSON engagement record. Exactly the keys user_id, article_id,
/// t and text are accepted.
inline Engagement parse_engagement(const std::string& text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object", line);
  for (const auto& [key, _] : j.items())
    if (key != "user_id" && key != "article_id" && key != "t" && key != "text")
      throw ParseError("unexpected key '" + key + "'", line);
  Engagement e;
  e.line = line;
  auto str_field = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing ") + key, line);
    if (!it->is_string()) throw ParseError(std::string(key) + " is not a string", line);
    return it->get<std::string>();
  };
  e.user_id = str_field("user_id");
  e.article_id = str_field("article_id");
  e.text = str_field("text");
  if (e.user_id.empty()) throw ParseError("empty user_id", line);
  if (e.article_id.empty()) throw ParseError("empty article_id", line);
  auto t = j.find("t");
  if (t == j.end()) throw ParseError("missing t", line);
  if (!t->is_number_integer()) throw ParseError("t is not an integer", line);
  e.t = t->get<std::int64_t>();
  if (e.t < 0) throw ParseError("t is negative", line);
  return e;
}

inline std::string serialize_engagement(const Engagement& e) {
  nlohmann::ordered_json j;
  j["user_id"] = e.user_id;
  j["article_id"] = e.article_id;
  j["t"] = e.t;
  j["text"] = e.text;
  return j.dump();
}

inline std::vector<Engagement> read_engagement_stream(std::istream& in) {
  std::vector<Engagement> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_engagement(line, line_no));
  }
  return out;
}

inline Dataset load_engagements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read engagement file: " + path);
  return Dataset(read_engagement_stream(in));
}

/// Writes the engagements, one JSON object per line, in dataset order.
inline void save_engagements(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write engagement file: " + path);
  for (const auto& e : ds.engagements()) out << serialize_engagement(e) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

/// Attaches labels from a headerless `article_id,label` CSV. Unknown
/// article ids are skipped and reported through `warnings`.
inline Dataset load_labels(std::istream& in, Dataset ds, std::vector<std::string>* warnings = nullptr) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ParseError("expected article_id,label", line_no);
    const std::string id = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    if (id.empty()) throw ParseError("empty article_id", line_no);
    if (value != "0" && value != "1") throw ParseError("label '" + value + "' is not 0 or 1", line_no);
    auto j = ds.find_article(id);
    if (!j) {
      if (warnings) warnings->push_back("line " + std::to_string(line_no) + ": unknown article '" + id + "' skipped");
      continue;
    }
    ds.set_label(*j, value == "1" ? 1 : 0);
  }
  return ds;
}

inline Dataset load_labels(const std::string& path, Dataset ds, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read label file: " + path);
  return load_labels(in, std::move(ds), warnings);
}

inline void save_labels(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write label file: " + path);
  for (std::size_t j = 0; j < ds.num_articles(); ++j)
    if (auto l = ds.label(j)) out << ds.article_id(j) << ',' << *l << '\n';
}

}  // namespace csi
