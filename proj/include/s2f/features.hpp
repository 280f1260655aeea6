#pragma once

// Frozen-branch feature vectors: a built-in block-statistics extractor and a
// table of precomputed vectors keyed by (subject, domain, view).

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "s2f/data_model.hpp"
#include "s2f/error.hpp"
#include "s2f/imaging.hpp"
#include "s2f/linalg.hpp"
#include "s2f/text.hpp"

namespace s2f {

enum class FeatureSource { baseline, precomputed };

struct FeatureVector {
  Vector values;
  FeatureSource source = FeatureSource::precomputed;

  std::size_t dim() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

inline constexpr std::size_t kBaselineImageSize = 64;
inline constexpr std::size_t kBaselineBlock = 8;
inline constexpr std::size_t kBaselineDim = 2 * (kBaselineImageSize / kBaselineBlock) * (kBaselineImageSize / kBaselineBlock);

/// Per-block (mean, population std) over an 8x8 grid of 8x8 blocks of the
/// 64x64 image, blocks in row-major order, then L2-normalized.
inline FeatureVector extract_baseline(const ImageGray& input) {
  const ImageGray img = (input.width == kBaselineImageSize && input.height == kBaselineImageSize)
                            ? input
                            : resize_bilinear(input, kBaselineImageSize, kBaselineImageSize);
  constexpr std::size_t grid = kBaselineImageSize / kBaselineBlock;
  constexpr double count = kBaselineBlock * kBaselineBlock;
  FeatureVector out{Vector(kBaselineDim), FeatureSource::baseline};
  for (std::size_t by = 0; by < grid; ++by) {
    for (std::size_t bx = 0; bx < grid; ++bx) {
      double sum = 0.0;
      bool uniform = true;
      const double first = img.at(bx * kBaselineBlock, by * kBaselineBlock);
      for (std::size_t y = 0; y < kBaselineBlock; ++y)
        for (std::size_t x = 0; x < kBaselineBlock; ++x) {
          const double v = img.at(bx * kBaselineBlock + x, by * kBaselineBlock + y);
          sum += v;
          uniform = uniform && v == first;
        }
      // A uniform block keeps its exact value and zero spread; summation
      // rounding would otherwise leave a ~1e-16 residue.
      const double mean = uniform ? first : sum / count;
      double ss = 0.0;
      for (std::size_t y = 0; y < kBaselineBlock; ++y)
        for (std::size_t x = 0; x < kBaselineBlock; ++x) {
          const double d = img.at(bx * kBaselineBlock + x, by * kBaselineBlock + y) - mean;
          ss += d * d;
        }
      const std::size_t slot = 2 * (by * grid + bx);
      out.values[slot] = mean;
      out.values[slot + 1] = uniform ? 0.0 : std::sqrt(ss / count);
    }
  }
  normalize_l2(out.values);
  return out;
}

class FeatureTable {
 public:
  FeatureTable() = default;

  /// Rows keep insertion order for output; keys must be unique.
  void insert(SampleKey key, FeatureVector vec) {
    if (vec.dim() == 0) fail(ErrorCode::DimMismatch, "feature row " + key.str() + " is empty");
    if (!rows_.empty() && vec.dim() != dim_)
      fail(ErrorCode::DimMismatch, "feature row " + key.str() + " has dim " + std::to_string(vec.dim()) +
                                       ", table has " + std::to_string(dim_));
    if (!all_finite(vec.values)) fail(ErrorCode::NonFinite, "feature row " + key.str() + " has a non-finite value");
    if (index_.contains(key)) fail(ErrorCode::DuplicateKey, "feature row " + key.str() + " appears twice");
    dim_ = vec.dim();
    index_.emplace(key, rows_.size());
    rows_.push_back({std::move(key), std::move(vec)});
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  bool contains(const SampleKey& key) const { return index_.contains(key); }

  const FeatureVector& at(const SampleKey& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) fail(ErrorCode::UnresolvedSample, "no feature row for " + key.str());
    return rows_[it->second].second;
  }

  /// Position of `key` in row order; used for dense per-row caches.
  std::size_t index_of(const SampleKey& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) fail(ErrorCode::UnresolvedSample, "no feature row for " + key.str());
    return it->second;
  }

  const std::vector<std::pair<SampleKey, FeatureVector>>& rows() const { return rows_; }

  /// Dimension of rows in one domain, or nullopt if the domain is absent.
  std::optional<std::size_t> domain_dim(Domain d) const {
    for (const auto& [k, v] : rows_)
      if (k.domain == d) return v.dim();
    return std::nullopt;
  }

 private:
  std::vector<std::pair<SampleKey, FeatureVector>> rows_;
  std::map<SampleKey, std::size_t> index_;
  std::size_t dim_ = 0;
};

inline std::string feature_table_to_csv(const FeatureTable& table) {
  std::string out = "subject_id,domain,view";
  for (std::size_t i = 0; i < table.dim(); ++i) out += ",f" + std::to_string(i);
  out += '\n';
  for (const auto& [key, vec] : table.rows()) {
    out += key.subject_id;
    out += ',';
    out += to_string(key.domain);
    out += ',';
    out += to_string(key.view);
    for (double v : vec.values) {
      out += ',';
      out += text::format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline FeatureTable parse_feature_table(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty()) fail(ErrorCode::ParseError, "feature table: empty file");
  const auto header = text::split(rows.front());
  if (header.size() < 4 || header[0] != "subject_id" || header[1] != "domain" || header[2] != "view")
    fail(ErrorCode::ParseError, "feature table: header must start with subject_id,domain,view,f0");
  FeatureTable table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i]);
    const std::string where = "feature table line " + std::to_string(i + 1);
    if (f.size() < 4) fail(ErrorCode::ParseError, where + ": no feature values");
    FeatureVector vec;
    vec.values.reserve(f.size() - 3);
    for (std::size_t j = 3; j < f.size(); ++j) vec.values.push_back(text::parse_double(f[j], where));
    SampleKey key{std::string(text::trim(f[0])), parse_domain(text::trim(f[1])), parse_view(text::trim(f[2]))};
    try {
      table.insert(std::move(key), std::move(vec));
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  if (table.size() == 0) fail(ErrorCode::ParseError, "feature table: no rows");
  return table;
}

inline FeatureTable load_feature_table(const std::filesystem::path& path) {
  return parse_feature_table(text::read_file(path));
}

/// The face branch is frozen: the stored vector is returned unchanged.
inline const FeatureVector& face_embedding(const Sample& sample, const FeatureTable& table) {
  if (sample.key.domain != Domain::face)
    fail(ErrorCode::WrongDomain, sample.key.str() + " is not a face sample");
  return table.at(sample.key);
}

/// Extractor-backed variant: loads the referenced image and runs the
/// baseline extractor.
inline FeatureVector face_embedding(const Sample& sample) {
  if (sample.key.domain != Domain::face)
    fail(ErrorCode::WrongDomain, sample.key.str() + " is not a face sample");
  if (is_feature_ref(sample.image_ref))
    fail(ErrorCode::UnresolvedSample, sample.key.str() + " has no image file");
  return extract_baseline(load_image(sample.image_ref));
}

/// Runs the baseline extractor over every manifest sample. Collects all
/// image failures before reporting so the message lists every bad path.
inline FeatureTable extract_manifest(const Manifest& manifest, std::size_t image_size = kBaselineImageSize) {
  FeatureTable table;
  std::string errors;
  for (const auto& s : manifest.samples()) {
    try {
      if (is_feature_ref(s.image_ref))
        fail(ErrorCode::UnresolvedSample, s.key.str() + " is feature-backed, not an image");
      ImageGray img = load_image(s.image_ref);
      if (image_size != kBaselineImageSize) img = resize_bilinear(img, image_size, image_size);
      table.insert(s.key, extract_baseline(img));
    } catch (const Error& e) {
      errors += std::string(errors.empty() ? "" : "; ") + e.what();
    }
  }
  if (!errors.empty()) fail(ErrorCode::MissingFile, "feature extraction failed: " + errors);
  return table;
}

}  // namespace s2f
