#pragma once

// Synthetic paired identities from a linear latent model. Face and skull
// features are two fixed linear views of one latent vector per subject, so
// an affine head can represent the skull-to-face alignment exactly.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "s2f/data_model.hpp"
#include "s2f/error.hpp"
#include "s2f/features.hpp"
#include "s2f/linalg.hpp"
#include "s2f/random.hpp"
#include "s2f/retrieval.hpp"

namespace s2f {

struct SynthConfig {
  std::size_t num_subjects = 40;
  std::size_t latent_dim = 16;
  std::size_t feature_dim = 64;
  double noise_sigma = 0.05;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_subjects < 2) fail(ErrorCode::InvalidArgument, "synth needs at least 2 subjects");
    if (latent_dim == 0 || feature_dim == 0) fail(ErrorCode::InvalidArgument, "synth dims must be >= 1");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
      fail(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  }
};

struct SynthMixing {
  Matrix face;   // feature_dim x latent_dim
  Matrix skull;  // feature_dim x latent_dim
};

/// Mixing entries ~ N(0, 1/feature_dim) and latents ~ N(0, I/latent_dim),
/// which keeps E||A z||^2 = 1.
inline SynthMixing synth_mixing(const SynthConfig& cfg) {
  Rng rng(cfg.seed);
  SynthMixing m{Matrix(cfg.feature_dim, cfg.latent_dim), Matrix(cfg.feature_dim, cfg.latent_dim)};
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
  for (double& v : m.face.data) v = rng.normal(0.0, sd);
  for (double& v : m.skull.data) v = rng.normal(0.0, sd);
  return m;
}

namespace detail {

inline Vector draw_latent(Rng& rng, std::size_t dim) {
  Vector z(dim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : z) v = rng.normal(0.0, sd);
  return z;
}

inline Vector observe(const Matrix& mix, const Vector& z, double sigma, Rng& noise) {
  Vector f(mix.rows);
  for (std::size_t r = 0; r < mix.rows; ++r) f[r] = dot(mix.row(r), z) + sigma * noise.normal();
  return f;
}

inline std::string subject_name(std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i + 1);
  const std::size_t width = std::max<std::size_t>(2, std::to_string(n).size());
  return "S" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace detail

struct SynthData {
  Manifest manifest;
  FeatureTable features;
};

/// Feature-backed catalog: every image reference is `feature:<key>`.
inline SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  const SynthMixing mix = synth_mixing(cfg);
  Rng latent_rng(stage_seed(cfg.seed, 1000));
  Rng noise_rng(stage_seed(cfg.seed, 2000));
  std::vector<SubjectRecord> records;
  FeatureTable table;
  for (std::size_t i = 0; i < cfg.num_subjects; ++i) {
    SubjectRecord rec;
    rec.subject_id = detail::subject_name(i, cfg.num_subjects);
    const Vector z = detail::draw_latent(latent_rng, cfg.latent_dim);
    for (Domain d : {Domain::face, Domain::skull}) {
      const Matrix& m = d == Domain::face ? mix.face : mix.skull;
      for (View v : kViews) {
        SampleKey key{rec.subject_id, d, v};
        (d == Domain::face ? rec.face_images : rec.skull_images)[v] = std::string(kFeatureRefPrefix) + key.str();
        table.insert(key, {detail::observe(m, z, cfg.noise_sigma, noise_rng), FeatureSource::precomputed});
      }
    }
    records.push_back(std::move(rec));
  }
  return {Manifest(std::move(records)), std::move(table)};
}

/// Extra face-only identities in the same face space (same mixing matrix),
/// labelled as distractors, for mixed-gallery runs.
inline std::vector<GalleryEntry> generate_distractors(const SynthConfig& cfg, std::size_t count,
                                                      std::uint64_t distractor_seed) {
  cfg.validate();
  const SynthMixing mix = synth_mixing(cfg);
  Rng rng(distractor_seed);
  std::vector<GalleryEntry> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Vector z = detail::draw_latent(rng, cfg.latent_dim);
    std::string digits = std::to_string(i + 1);
    out.push_back({"D" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits,
                   std::string(kDistractorSubject), "front", detail::observe(mix.face, z, cfg.noise_sigma, rng)});
  }
  return out;
}

}  // namespace s2f
