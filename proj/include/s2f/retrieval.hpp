#pragma once

// Exact gallery search: squared Euclidean distance, e^-d confidence, and
// deterministic top-k ranking.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2f/error.hpp"
#include "s2f/linalg.hpp"
#include "s2f/model.hpp"
#include "s2f/text.hpp"

namespace s2f {

inline constexpr std::string_view kDistractorSubject = "distractor";

inline double squared_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    fail(ErrorCode::DimMismatch, "squared_distance between dims " + std::to_string(u.size()) + " and " +
                                     std::to_string(v.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return s;
}

/// e^-delta for a squared distance delta >= 0.
inline double confidence(double delta) {
  if (!std::isfinite(delta) || delta < 0.0)
    fail(ErrorCode::InvalidArgument, "confidence needs a finite distance >= 0");
  return std::exp(-delta);
}

struct GalleryEntry {
  std::string gallery_id;
  std::string subject_id;
  std::string view;
  Embedding embedding;

  bool operator==(const GalleryEntry&) const = default;
};

class GalleryIndex {
 public:
  GalleryIndex() = default;

  const std::vector<GalleryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t dim() const { return dim_; }

  bool contains(std::string_view id) const { return find(id) != nullptr; }

  const GalleryEntry* find(std::string_view id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                               [](const GalleryEntry& e, std::string_view key) { return e.gallery_id < key; });
    return it != entries_.end() && it->gallery_id == id ? &*it : nullptr;
  }

 private:
  friend GalleryIndex build_index(std::vector<GalleryEntry> entries);
  friend GalleryIndex merge_galleries(const GalleryIndex& a, const GalleryIndex& b);

  std::vector<GalleryEntry> entries_;  // sorted by gallery_id
  std::size_t dim_ = 0;
};

/// Entries are stored sorted by gallery_id, so query results never depend
/// on input order.
inline GalleryIndex build_index(std::vector<GalleryEntry> entries) {
  if (entries.empty()) fail(ErrorCode::InvalidArgument, "gallery must not be empty");
  const std::size_t dim = entries.front().embedding.size();
  if (dim == 0) fail(ErrorCode::DimMismatch, "gallery embeddings must be non-empty");
  for (const auto& e : entries) {
    if (e.embedding.size() != dim)
      fail(ErrorCode::DimMismatch, "gallery entry " + e.gallery_id + " has dim " +
                                       std::to_string(e.embedding.size()) + ", expected " + std::to_string(dim));
    if (!all_finite(e.embedding)) fail(ErrorCode::NonFinite, "gallery entry " + e.gallery_id + " is non-finite");
  }
  std::sort(entries.begin(), entries.end(),
            [](const GalleryEntry& a, const GalleryEntry& b) { return a.gallery_id < b.gallery_id; });
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].gallery_id == entries[i - 1].gallery_id)
      fail(ErrorCode::DuplicateGalleryId, "gallery id " + entries[i].gallery_id + " appears twice");
  GalleryIndex index;
  index.entries_ = std::move(entries);
  index.dim_ = dim;
  return index;
}

/// Union of two galleries. Either side may be empty.
inline GalleryIndex merge_galleries(const GalleryIndex& a, const GalleryIndex& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim() != b.dim())
    fail(ErrorCode::DimMismatch, "cannot merge galleries of dims " + std::to_string(a.dim()) + " and " +
                                     std::to_string(b.dim()));
  GalleryIndex out;
  out.dim_ = a.dim();
  out.entries_.reserve(a.size() + b.size());
  std::merge(a.entries_.begin(), a.entries_.end(), b.entries_.begin(), b.entries_.end(),
             std::back_inserter(out.entries_),
             [](const GalleryEntry& x, const GalleryEntry& y) { return x.gallery_id < y.gallery_id; });
  for (std::size_t i = 1; i < out.entries_.size(); ++i)
    if (out.entries_[i].gallery_id == out.entries_[i - 1].gallery_id)
      fail(ErrorCode::IdCollision, "gallery id " + out.entries_[i].gallery_id + " exists in both galleries");
  return out;
}

struct RankedItem {
  std::string gallery_id;
  std::string subject_id;
  double distance = 0.0;
  double confidence = 1.0;
};

struct RankedList {
  std::string query_id;
  std::size_t k = 0;
  std::vector<RankedItem> items;
};

/// Exhaustive scan, ascending squared distance, ties by gallery_id.
inline RankedList query(const GalleryIndex& index, std::span<const double> probe, std::size_t k,
                        std::string query_id = {}) {
  if (k == 0) fail(ErrorCode::InvalidArgument, "k must be >= 1");
  if (probe.size() != index.dim())
    fail(ErrorCode::DimMismatch, "probe dim " + std::to_string(probe.size()) + " != gallery dim " +
                                     std::to_string(index.dim()));
  if (!all_finite(probe)) fail(ErrorCode::NonFinite, "probe has a non-finite value");
  const auto& entries = index.entries();
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    scored.emplace_back(squared_distance(probe, entries[i].embedding), i);
  // Entries are id-sorted, so index order is the lexicographic tie-break.
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end());
  RankedList out{std::move(query_id), k, {}};
  out.items.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& e = entries[scored[r].second];
    out.items.push_back({e.gallery_id, e.subject_id, scored[r].first, confidence(scored[r].first)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

/// Header `gallery_id,subject_id,view,e0..e{d-1}`.
inline std::string gallery_to_csv(std::span<const GalleryEntry> entries) {
  const std::size_t dim = entries.empty() ? 0 : entries.front().embedding.size();
  std::string out = "gallery_id,subject_id,view";
  for (std::size_t i = 0; i < dim; ++i) out += ",e" + std::to_string(i);
  out += '\n';
  for (const auto& e : entries) {
    out += e.gallery_id + "," + e.subject_id + "," + e.view;
    for (double v : e.embedding) {
      out += ',';
      out += text::format_double(v);
    }
    out += '\n';
  }
  return out;
}

/// Rows in file order; duplicate and dimension checks happen in build_index.
inline std::vector<GalleryEntry> parse_gallery_csv(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty()) fail(ErrorCode::ParseError, "embedding CSV: empty file");
  const auto header = text::split(rows.front());
  if (header.size() < 4 || header[0] != "gallery_id" || header[1] != "subject_id" || header[2] != "view")
    fail(ErrorCode::ParseError, "embedding CSV: header must start with gallery_id,subject_id,view,e0");
  std::vector<GalleryEntry> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i]);
    const std::string where = "embedding CSV line " + std::to_string(i + 1);
    if (f.size() != header.size())
      fail(ErrorCode::DimMismatch, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                       std::to_string(f.size()));
    GalleryEntry e{std::string(text::trim(f[0])), std::string(text::trim(f[1])), std::string(text::trim(f[2])), {}};
    if (e.gallery_id.empty()) fail(ErrorCode::ParseError, where + ": empty gallery_id");
    for (std::size_t j = 3; j < f.size(); ++j) e.embedding.push_back(text::parse_double(f[j], where));
    if (!all_finite(e.embedding)) fail(ErrorCode::NonFinite, where + ": non-finite value");
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<GalleryEntry> load_gallery_csv(const std::filesystem::path& path) {
  return parse_gallery_csv(text::read_file(path));
}

inline nlohmann::json ranked_list_to_json(const RankedList& list) {
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t r = 0; r < list.items.size(); ++r) {
    const auto& it = list.items[r];
    items.push_back({{"rank", r + 1},
                     {"gallery_id", it.gallery_id},
                     {"subject_id", it.subject_id},
                     {"distance", it.distance},
                     {"confidence", it.confidence}});
  }
  return {{"query_id", list.query_id}, {"k", list.k}, {"items", std::move(items)}};
}

}  // namespace s2f
