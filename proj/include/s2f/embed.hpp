#pragma once

// Turns a feature table into gallery-format embeddings: skull rows go
// through the trained head, face rows pass through unchanged.

#include <optional>
#include <vector>

#include "s2f/data_model.hpp"
#include "s2f/features.hpp"
#include "s2f/model.hpp"
#include "s2f/retrieval.hpp"

namespace s2f {

struct EmbedFilter {
  std::optional<Domain> domain;
  std::optional<View> view;

  bool accepts(const SampleKey& k) const {
    return (!domain || *domain == k.domain) && (!view || *view == k.view);
  }
};

/// gallery_id is the sample key "subject/domain/view".
inline std::vector<GalleryEntry> embed_features(const ProjectionHead& head, const FeatureTable& features,
                                                const EmbedFilter& filter = {}) {
  head.validate();
  if (head.d_in() != features.dim())
    fail(ErrorCode::DimMismatch, "checkpoint d_in " + std::to_string(head.d_in()) + " != feature dim " +
                                     std::to_string(features.dim()));
  std::vector<GalleryEntry> out;
  for (const auto& [key, vec] : features.rows()) {
    if (!filter.accepts(key)) continue;
    Embedding e = key.domain == Domain::skull ? forward(head, vec.values) : vec.values;
    out.push_back({key.str(), key.subject_id, std::string(to_string(key.view)), std::move(e)});
  }
  return out;
}

}  // namespace s2f
