#pragma once

// Paired skull/face catalog, exhaustive triplet enumeration and splitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2f/error.hpp"
#include "s2f/random.hpp"
#include "s2f/text.hpp"

namespace s2f {

enum class Domain { face, skull };
enum class View { front, side };

inline constexpr std::array<View, 2> kViews = {View::front, View::side};

constexpr std::string_view to_string(Domain d) { return d == Domain::face ? "face" : "skull"; }
constexpr std::string_view to_string(View v) { return v == View::front ? "front" : "side"; }

inline Domain parse_domain(std::string_view s) {
  if (s == "face") return Domain::face;
  if (s == "skull") return Domain::skull;
  fail(ErrorCode::ParseError, "unknown domain '" + std::string(s) + "'");
}

inline View parse_view(std::string_view s) {
  if (s == "front") return View::front;
  if (s == "side") return View::side;
  fail(ErrorCode::ParseError, "unknown view '" + std::string(s) + "'");
}

/// Image references with this prefix name a feature-table row instead of a
/// file; they are resolved later against a FeatureTable.
inline constexpr std::string_view kFeatureRefPrefix = "feature:";

inline bool is_feature_ref(std::string_view ref) { return ref.starts_with(kFeatureRefPrefix); }

/// Identifies one image: (subject, domain, view).
struct SampleKey {
  std::string subject_id;
  Domain domain = Domain::face;
  View view = View::front;

  auto operator<=>(const SampleKey&) const = default;
  bool operator==(const SampleKey&) const = default;

  std::string str() const {
    return subject_id + "/" + std::string(to_string(domain)) + "/" + std::string(to_string(view));
  }
};

struct Sample {
  SampleKey key;
  std::string image_ref;

  bool operator==(const Sample&) const = default;
};

struct SubjectRecord {
  std::string subject_id;
  std::map<View, std::string> face_images;
  std::map<View, std::string> skull_images;

  const std::map<View, std::string>& images(Domain d) const {
    return d == Domain::face ? face_images : skull_images;
  }

  bool complete() const {
    for (View v : kViews)
      if (!face_images.contains(v) || !skull_images.contains(v)) return false;
    return true;
  }

  Sample sample(Domain d, View v) const { return {{subject_id, d, v}, images(d).at(v)}; }
};

class Manifest {
 public:
  /// Validates uniqueness and completeness of every record.
  explicit Manifest(std::vector<SubjectRecord> subjects) : subjects_(std::move(subjects)) {
    if (subjects_.empty()) fail(ErrorCode::InsufficientSubjects, "manifest has no subjects");
    std::set<std::string> seen;
    for (const auto& s : subjects_) {
      if (s.subject_id.empty()) fail(ErrorCode::ParseError, "empty subject_id");
      if (!seen.insert(s.subject_id).second)
        fail(ErrorCode::DuplicateSample, "subject " + s.subject_id + " appears more than once");
      if (!s.complete())
        fail(ErrorCode::IncompleteSubject,
             "subject " + s.subject_id + " lacks one of face/skull x front/side");
    }
  }

  const std::vector<SubjectRecord>& subjects() const { return subjects_; }
  std::size_t size() const { return subjects_.size(); }

  /// All samples in manifest order: subject, then domain (face, skull), then view.
  std::vector<Sample> samples() const {
    std::vector<Sample> out;
    out.reserve(4 * subjects_.size());
    for (const auto& s : subjects_)
      for (Domain d : {Domain::face, Domain::skull})
        for (View v : kViews) out.push_back(s.sample(d, v));
    return out;
  }

  /// FNV-1a over the canonical JSON form; used as triplet provenance.
  std::uint64_t content_hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : to_json().dump()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& s : subjects_) {
      nlohmann::json rec;
      rec["subject_id"] = s.subject_id;
      for (View v : kViews) {
        rec["face"][std::string(to_string(v))] = s.face_images.at(v);
        rec["skull"][std::string(to_string(v))] = s.skull_images.at(v);
      }
      arr.push_back(std::move(rec));
    }
    return arr;
  }

 private:
  std::vector<SubjectRecord> subjects_;
};

enum class FileCheck { require_files, skip };

/// Parses a manifest document. Relative image paths are resolved against
/// `base_dir`; `feature:` references are kept verbatim.
inline Manifest parse_manifest(std::string_view contents, const std::filesystem::path& base_dir,
                               FileCheck check = FileCheck::require_files) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(contents);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }
  if (!doc.is_array()) fail(ErrorCode::ParseError, "manifest: top level must be a list of subjects");

  std::vector<SubjectRecord> records;
  std::set<std::string> ids;
  std::vector<std::string> missing;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("subject_id") || !entry["subject_id"].is_string())
      fail(ErrorCode::ParseError, "manifest: every subject needs a string subject_id");
    SubjectRecord rec;
    rec.subject_id = entry["subject_id"].get<std::string>();
    if (!ids.insert(rec.subject_id).second)
      fail(ErrorCode::DuplicateSample, "manifest: (" + rec.subject_id + ", *, *) appears twice");
    for (Domain d : {Domain::face, Domain::skull}) {
      const std::string dname(to_string(d));
      if (!entry.contains(dname)) continue;
      const auto& views = entry[dname];
      if (!views.is_object())
        fail(ErrorCode::ParseError, "manifest: " + rec.subject_id + "." + dname + " must be an object");
      auto& target = d == Domain::face ? rec.face_images : rec.skull_images;
      for (const auto& [vname, ref] : views.items()) {
        if (!ref.is_string())
          fail(ErrorCode::ParseError, "manifest: image reference must be a string");
        std::string path = ref.get<std::string>();
        if (!is_feature_ref(path)) {
          std::filesystem::path p(path);
          if (p.is_relative()) p = base_dir / p;
          path = p.lexically_normal().string();
          if (check == FileCheck::require_files && !std::filesystem::exists(p))
            missing.push_back(path);
        }
        target.emplace(parse_view(vname), std::move(path));
      }
    }
    records.push_back(std::move(rec));
  }
  if (!missing.empty()) {
    std::string msg = "manifest references missing files:";
    for (const auto& m : missing) msg += " " + m;
    fail(ErrorCode::MissingFile, msg);
  }
  return Manifest(std::move(records));
}

/// The duplicate-key check above only sees subject ids; JSON objects with a
/// repeated domain or view key are collapsed by the parser, so this scanner
/// rejects them on the raw text before parsing.
inline void reject_duplicate_json_keys(std::string_view contents) {
  try {
    std::vector<std::set<std::string>> stack;
    nlohmann::json::parser_callback_t cb = [&](int, nlohmann::json::parse_event_t ev,
                                               nlohmann::json& parsed) {
      using E = nlohmann::json::parse_event_t;
      if (ev == E::object_start) stack.emplace_back();
      else if (ev == E::object_end) stack.pop_back();
      else if (ev == E::key && !stack.back().insert(parsed.get<std::string>()).second)
        fail(ErrorCode::DuplicateSample, "manifest: key '" + parsed.get<std::string>() +
                                             "' repeated within one object");
      return true;
    };
    [[maybe_unused]] auto parsed_doc = nlohmann::json::parse(contents, cb);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }
}

inline Manifest load_manifest(const std::filesystem::path& path,
                              FileCheck check = FileCheck::require_files) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::MissingFile, "manifest " + path.string());
  const std::string contents = text::read_file(path);
  reject_duplicate_json_keys(contents);
  return parse_manifest(contents, path.parent_path(), check);
}

/// Writes a manifest whose image references are emitted as stored.
inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  text::write_file(path, m.to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Triplets

struct Triplet {
  Sample anchor;    // skull
  Sample positive;  // face, same subject
  Sample negative;  // face, other subject

  bool valid() const {
    return anchor.key.domain == Domain::skull && positive.key.domain == Domain::face &&
           negative.key.domain == Domain::face &&
           anchor.key.subject_id == positive.key.subject_id &&
           anchor.key.subject_id != negative.key.subject_id;
  }

  auto tie() const {
    return std::tie(anchor.key, positive.key, negative.key);
  }
  bool operator==(const Triplet& o) const { return tie() == o.tie(); }
  bool operator<(const Triplet& o) const { return tie() < o.tie(); }
};

struct TripletSet {
  std::vector<Triplet> triplets;
  std::uint64_t manifest_hash = 0;
  std::string mode = "exhaustive";

  std::size_t size() const { return triplets.size(); }
  bool empty() const { return triplets.empty(); }
};

/// Every (anchor view, positive view, negative subject, negative view) for
/// each subject in manifest order: 4 anchor-positive pairs times 2(n-1)
/// negatives, 8 n (n-1) triplets in total.
inline TripletSet enumerate_triplets(const Manifest& manifest) {
  const auto& subjects = manifest.subjects();
  if (subjects.size() < 2)
    fail(ErrorCode::InsufficientSubjects,
         "need at least 2 subjects to form negatives, got " + std::to_string(subjects.size()));
  TripletSet out;
  out.manifest_hash = manifest.content_hash();
  out.triplets.reserve(8 * subjects.size() * (subjects.size() - 1));
  for (const auto& subject : subjects)
    for (View av : kViews)
      for (View pv : kViews)
        for (const auto& other : subjects) {
          if (other.subject_id == subject.subject_id) continue;
          for (View nv : kViews)
            out.triplets.push_back({subject.sample(Domain::skull, av),
                                    subject.sample(Domain::face, pv),
                                    other.sample(Domain::face, nv)});
        }
  return out;
}

/// Seeded uniform shuffle, then the first floor(fraction * size) go to train.
inline std::pair<TripletSet, TripletSet> split_triplets(const TripletSet& set, double train_fraction,
                                                        std::uint64_t seed) {
  if (set.empty()) fail(ErrorCode::InvalidArgument, "cannot split an empty triplet set");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "train fraction must lie in (0,1)");
  std::vector<std::size_t> order(set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span(order));
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(set.size())));

  TripletSet train{{}, set.manifest_hash, set.mode + "/train"};
  TripletSet val{{}, set.manifest_hash, set.mode + "/val"};
  train.triplets.reserve(n_train);
  val.triplets.reserve(set.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : val).triplets.push_back(set.triplets[order[i]]);
  return {std::move(train), std::move(val)};
}

/// Leakage-free alternative: subjects (not triplets) are shuffled and split;
/// a triplet goes to a side only if its anchor and negative subjects both
/// belong to that side. Cross-side triplets are dropped.
inline std::pair<TripletSet, TripletSet> split_triplets_by_subject(const TripletSet& set,
                                                                   double train_fraction,
                                                                   std::uint64_t seed) {
  if (set.empty()) fail(ErrorCode::InvalidArgument, "cannot split an empty triplet set");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "train fraction must lie in (0,1)");
  std::vector<std::string> subjects;
  for (const auto& t : set.triplets)
    if (subjects.empty() || subjects.back() != t.anchor.key.subject_id)
      subjects.push_back(t.anchor.key.subject_id);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  Rng rng(seed);
  rng.shuffle(std::span(subjects));
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(subjects.size())));
  if (n_train < 2 || subjects.size() - n_train < 2)
    fail(ErrorCode::InsufficientSubjects, "subject-disjoint split needs at least 2 subjects per side");
  const std::set<std::string> train_subjects(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_train));

  TripletSet train{{}, set.manifest_hash, set.mode + "/train-subjects"};
  TripletSet val{{}, set.manifest_hash, set.mode + "/val-subjects"};
  for (const auto& t : set.triplets) {
    const bool a = train_subjects.contains(t.anchor.key.subject_id);
    const bool n = train_subjects.contains(t.negative.key.subject_id);
    if (a && n) train.triplets.push_back(t);
    else if (!a && !n) val.triplets.push_back(t);
  }
  return {std::move(train), std::move(val)};
}

inline constexpr std::string_view kTripletCsvHeader =
    "anchor_subject,anchor_view,positive_view,negative_subject,negative_view";

inline std::string triplets_to_csv(const TripletSet& set) {
  std::string out(kTripletCsvHeader);
  out += '\n';
  for (const auto& t : set.triplets) {
    out += t.anchor.key.subject_id;
    out += ',';
    out += to_string(t.anchor.key.view);
    out += ',';
    out += to_string(t.positive.key.view);
    out += ',';
    out += t.negative.key.subject_id;
    out += ',';
    out += to_string(t.negative.key.view);
    out += '\n';
  }
  return out;
}

/// Image references are not part of the CSV; samples come back keyed only.
inline TripletSet triplets_from_csv(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty() || text::trim(rows.front()) != kTripletCsvHeader)
    fail(ErrorCode::ParseError, "triplet CSV: expected header '" + std::string(kTripletCsvHeader) + "'");
  TripletSet set;
  set.mode = "csv";
  std::set<Triplet> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = text::split(rows[i]);
    if (f.size() != 5)
      fail(ErrorCode::ParseError, "triplet CSV line " + std::to_string(i + 1) + ": expected 5 fields");
    Triplet t{{{std::string(f[0]), Domain::skull, parse_view(f[1])}, {}},
              {{std::string(f[0]), Domain::face, parse_view(f[2])}, {}},
              {{std::string(f[3]), Domain::face, parse_view(f[4])}, {}}};
    if (!t.valid())
      fail(ErrorCode::ParseError, "triplet CSV line " + std::to_string(i + 1) +
                                      ": negative subject equals anchor subject");
    if (!seen.insert(t).second)
      fail(ErrorCode::DuplicateKey, "triplet CSV line " + std::to_string(i + 1) + ": duplicate triplet");
    set.triplets.push_back(std::move(t));
  }
  return set;
}

}  // namespace s2f
