#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "csi/core/rng.hpp"
#include "csi/core/tensor.hpp"
#include "csi/error.hpp"

namespace csi {

inline constexpr std::uint64_t kDefaultTextSeed = 0x7e47ULL;

/// Lowercased runs of alphanumerics. Bytes >= 0x80 count as token characters
/// so UTF-8 words (e.g. pre-segmented Chinese) survive intact.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Adds the signed-hash counts of `text` into `acc`.
inline void hash_tokens_into(std::string_view text, std::uint64_t seed, Vector& acc) {
  const std::uint64_t bucket_basis = splitmix64(seed ^ 0x62756b74ULL);
  const std::uint64_t sign_basis = splitmix64(seed ^ 0x7369676eULL);
  for (const auto& tok : tokenize(text)) {
    const std::uint64_t h = splitmix64(fnv1a64(tok, bucket_basis));
    const std::uint64_t s = splitmix64(fnv1a64(tok, sign_basis));
    acc[h % acc.size()] += (s >> 63) ? -1.0 : 1.0;
  }
}

inline void l2_normalize(Vector& v) {
  const double n = norm2(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

/// Signed feature hashing summed over all texts, then L2-normalized.
/// Returns the zero vector when no tokens are present.
inline Vector embed_text(const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed = kDefaultTextSeed) {
  if (dim < 1) throw ParameterError("embed_text: dim must be >= 1");
  Vector acc(dim, 0.0);
  for (const auto& t : texts) hash_tokens_into(t, seed, acc);
  l2_normalize(acc);
  return acc;
}

/// Externally computed per-engagement text vectors, keyed by the 1-based line
/// of the engagement in its source file. File format: one record per line,
/// `<line> <v1> ... <vdim>` separated by whitespace.
class TextVectors {
 public:
  TextVectors() = default;
  explicit TextVectors(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }

  void insert(std::size_t line, Vector v) {
    if (v.size() != dim_) throw ShapeError("TextVectors: vector for line " + std::to_string(line) + " has wrong dim");
    vectors_[line] = std::move(v);
  }

  const Vector* find(std::size_t line) const {
    auto it = vectors_.find(line);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  static TextVectors load(const std::string& path, std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read text-vector file: " + path);
    TextVectors tv(dim);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream ss(line);
      long long key;
      if (!(ss >> key)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        throw ParseError("expected engagement line number", line_no);
      }
      if (key < 1) throw ParseError("engagement line number must be >= 1", line_no);
      Vector v;
      double x;
      while (ss >> x) v.push_back(x);
      if (!ss.eof()) throw ParseError("malformed float", line_no);
      if (v.size() != dim)
        throw ParseError("expected " + std::to_string(dim) + " floats, found " + std::to_string(v.size()), line_no);
      tv.insert(static_cast<std::size_t>(key), std::move(v));
    }
    return tv;
  }

 private:
  std::size_t dim_ = 0;
  std::map<std::size_t, Vector> vectors_;
};

}  // namespace csi
