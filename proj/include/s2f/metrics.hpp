#pragma once

// Ranking quality: Recall@k, truncated mAP@k and MRR@k, and their k-sweeps.

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2f/error.hpp"
#include "s2f/retrieval.hpp"
#include "s2f/text.hpp"

namespace s2f {

/// query_id -> relevant gallery ids
using Judgments = std::map<std::string, std::set<std::string>>;

namespace detail {

inline const std::set<std::string>& relevant_for(const Judgments& j, const std::string& query_id) {
  auto it = j.find(query_id);
  if (it == j.end()) fail(ErrorCode::MissingQuery, "no relevance judgments for query " + query_id);
  if (it->second.empty()) fail(ErrorCode::EmptyRelevant, "query " + query_id + " has no relevant items");
  return it->second;
}

inline void check_k(std::size_t k) {
  if (k == 0) fail(ErrorCode::InvalidArgument, "k must be >= 1");
}

template <typename PerQuery>
double mean_over_queries(std::span<const RankedList> ranked, PerQuery&& per_query) {
  if (ranked.empty()) fail(ErrorCode::InvalidArgument, "no queries to evaluate");
  double sum = 0.0;
  for (const auto& r : ranked) sum += per_query(r);
  return sum / static_cast<double>(ranked.size());
}

}  // namespace detail

/// |relevant in top k| / |relevant| for one ranking.
inline double recall_at_k(const RankedList& ranked, const std::set<std::string>& relevant, std::size_t k) {
  detail::check_k(k);
  if (relevant.empty()) fail(ErrorCode::EmptyRelevant, "query " + ranked.query_id + " has no relevant items");
  const std::size_t n = std::min(k, ranked.items.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) hits += relevant.contains(ranked.items[r].gallery_id);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

/// Sum of precision@r over relevant hits at r <= k, divided by
/// min(|relevant|, k).
inline double average_precision_at_k(const RankedList& ranked, const std::set<std::string>& relevant, std::size_t k) {
  detail::check_k(k);
  if (relevant.empty()) fail(ErrorCode::EmptyRelevant, "query " + ranked.query_id + " has no relevant items");
  const std::size_t n = std::min(k, ranked.items.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (relevant.contains(ranked.items[r].gallery_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(std::min(relevant.size(), k));
}

/// 1-based rank of the first relevant item, or 0 if none is listed.
inline std::size_t first_relevant_rank(const RankedList& ranked, const std::set<std::string>& relevant) {
  for (std::size_t r = 0; r < ranked.items.size(); ++r)
    if (relevant.contains(ranked.items[r].gallery_id)) return r + 1;
  return 0;
}

inline double reciprocal_rank_at_k(const RankedList& ranked, const std::set<std::string>& relevant, std::size_t k) {
  detail::check_k(k);
  const std::size_t rank = first_relevant_rank(ranked, relevant);
  return rank != 0 && rank <= k ? 1.0 / static_cast<double>(rank) : 0.0;
}

inline double recall_at_k(std::span<const RankedList> ranked, const Judgments& judgments, std::size_t k) {
  return detail::mean_over_queries(ranked, [&](const RankedList& r) {
    return recall_at_k(r, detail::relevant_for(judgments, r.query_id), k);
  });
}

inline double map_at_k(std::span<const RankedList> ranked, const Judgments& judgments, std::size_t k) {
  return detail::mean_over_queries(ranked, [&](const RankedList& r) {
    return average_precision_at_k(r, detail::relevant_for(judgments, r.query_id), k);
  });
}

inline double mrr_at_k(std::span<const RankedList> ranked, const Judgments& judgments, std::size_t k) {
  return detail::mean_over_queries(ranked, [&](const RankedList& r) {
    return reciprocal_rank_at_k(r, detail::relevant_for(judgments, r.query_id), k);
  });
}

struct QueryProbe {
  std::string query_id;
  Embedding embedding;
};

struct QueryOutcome {
  std::string query_id;
  std::size_t first_relevant_rank = 0;  // over the full gallery ranking
  std::size_t num_relevant = 0;
};

struct MetricsReport {
  std::size_t k_max = 0;
  std::size_t gallery_size = 0;
  std::vector<double> recall;  // index k-1
  std::vector<double> map;
  std::vector<double> mrr;
  std::vector<QueryOutcome> queries;
};

/// Ranks the full gallery for every probe, then sweeps k = 1..k_max.
inline MetricsReport evaluate(const GalleryIndex& index, std::span<const QueryProbe> queries,
                              const Judgments& judgments, std::size_t k_max) {
  detail::check_k(k_max);
  if (queries.empty()) fail(ErrorCode::InvalidArgument, "no queries to evaluate");
  if (index.empty()) fail(ErrorCode::InvalidArgument, "gallery is empty");
  std::vector<RankedList> ranked;
  ranked.reserve(queries.size());
  MetricsReport report;
  report.k_max = k_max;
  report.gallery_size = index.size();
  for (const auto& q : queries) {
    const auto& rel = detail::relevant_for(judgments, q.query_id);
    for (const auto& id : rel)
      if (!index.contains(id))
        fail(ErrorCode::InvalidArgument, "query " + q.query_id + " judges " + id + " relevant, not in gallery");
    ranked.push_back(query(index, q.embedding, index.size(), q.query_id));
    report.queries.push_back({q.query_id, first_relevant_rank(ranked.back(), rel), rel.size()});
  }
  for (std::size_t k = 1; k <= k_max; ++k) {
    report.recall.push_back(recall_at_k(ranked, judgments, k));
    report.map.push_back(map_at_k(ranked, judgments, k));
    report.mrr.push_back(mrr_at_k(ranked, judgments, k));
  }
  return report;
}

/// Relevant items of each query are the gallery entries of the same subject.
inline Judgments judgments_by_subject(const GalleryIndex& index, std::span<const GalleryEntry> queries) {
  std::map<std::string, std::set<std::string>> by_subject;
  for (const auto& e : index.entries())
    if (e.subject_id != kDistractorSubject) by_subject[e.subject_id].insert(e.gallery_id);
  Judgments j;
  for (const auto& q : queries) {
    auto it = by_subject.find(q.subject_id);
    if (it == by_subject.end())
      fail(ErrorCode::EmptyRelevant, "query " + q.gallery_id + ": subject " + q.subject_id + " absent from gallery");
    j[q.gallery_id] = it->second;
  }
  return j;
}

/// Two-column CSV `query_id,gallery_id`, one relevant pair per row.
inline Judgments parse_judgments_csv(std::string_view contents) {
  const auto rows = text::lines(contents);
  if (rows.empty() || text::trim(rows.front()) != "query_id,gallery_id")
    fail(ErrorCode::ParseError, "judgments CSV: expected header query_id,gallery_id");
  Judgments j;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i]);
    if (f.size() != 2) fail(ErrorCode::ParseError, "judgments CSV line " + std::to_string(i + 1) + ": expected 2 fields");
    j[std::string(text::trim(f[0]))].insert(std::string(text::trim(f[1])));
  }
  return j;
}

inline std::string curves_to_csv(const MetricsReport& r) {
  std::string out = "k,recall,map,mrr\n";
  for (std::size_t k = 1; k <= r.k_max; ++k)
    out += std::to_string(k) + "," + text::format_double(r.recall[k - 1]) + "," + text::format_double(r.map[k - 1]) +
           "," + text::format_double(r.mrr[k - 1]) + "\n";
  return out;
}

/// Summary at k_max plus per-query first-relevant ranks.
inline nlohmann::json metrics_summary_json(const MetricsReport& r) {
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& q : r.queries)
    ranks.push_back({{"query_id", q.query_id}, {"first_relevant_rank", q.first_relevant_rank},
                     {"num_relevant", q.num_relevant}});
  return {{"k", r.k_max},
          {"gallery_size", r.gallery_size},
          {"num_queries", r.queries.size()},
          {"recall", r.recall.back()},
          {"map", r.map.back()},
          {"mrr", r.mrr.back()},
          {"queries", std::move(ranks)}};
}

}  // namespace s2f
