#pragma once

// Trainable skull-branch head: affine map (optionally with one ReLU hidden
// layer) from frozen feature space into the face embedding space.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "s2f/error.hpp"
#include "s2f/linalg.hpp"
#include "s2f/random.hpp"

namespace s2f {

using Embedding = Vector;

struct HiddenLayer {
  Matrix weight;  // d_out x d_hidden
  Vector bias;    // d_out

  bool operator==(const HiddenLayer&) const = default;
};

/// Without `hidden`: e = W x + b.
/// With `hidden`:    e = W2 relu(W x + b) + b2, where W is d_hidden x d_in.
/// If normalize_output is set the result is scaled to unit L2 norm.
struct ProjectionHead {
  Matrix weight;
  Vector bias;
  std::optional<HiddenLayer> hidden;
  bool normalize_output = false;

  std::size_t d_in() const { return weight.cols; }
  std::size_t d_out() const { return hidden ? hidden->weight.rows : weight.rows; }

  std::size_t parameter_count() const {
    std::size_t n = weight.data.size() + bias.size();
    if (hidden) n += hidden->weight.data.size() + hidden->bias.size();
    return n;
  }

  void validate() const {
    if (weight.rows == 0 || weight.cols == 0 || bias.size() != weight.rows ||
        weight.data.size() != weight.rows * weight.cols)
      fail(ErrorCode::DimMismatch, "head: weight/bias shapes inconsistent");
    if (hidden && (hidden->weight.cols != weight.rows || hidden->bias.size() != hidden->weight.rows ||
                   hidden->weight.data.size() != hidden->weight.rows * hidden->weight.cols ||
                   hidden->weight.rows == 0))
      fail(ErrorCode::DimMismatch, "head: hidden layer shapes inconsistent");
    if (!all_finite(weight.data) || !all_finite(bias) ||
        (hidden && (!all_finite(hidden->weight.data) || !all_finite(hidden->bias))))
      fail(ErrorCode::NonFinite, "head: non-finite parameter");
  }

  bool operator==(const ProjectionHead&) const = default;
};

/// Identity init sets W = I, b = 0; otherwise W ~ N(0, 1/d_in), b = 0.
/// A nonzero `d_hidden` adds a second layer initialized the same way.
inline ProjectionHead init_head(std::size_t d_in, std::size_t d_out, std::uint64_t seed, bool identity_init,
                                std::size_t d_hidden = 0) {
  if (d_in == 0 || d_out == 0) fail(ErrorCode::InvalidArgument, "head dims must be >= 1");
  if (identity_init && d_hidden != 0)
    fail(ErrorCode::InvalidArgument, "identity init is only defined for a single affine layer");
  if (identity_init && d_in != d_out)
    fail(ErrorCode::InvalidArgument, "identity init needs d_in == d_out, got " + std::to_string(d_in) + " and " +
                                         std::to_string(d_out));
  ProjectionHead head;
  const std::size_t first_rows = d_hidden ? d_hidden : d_out;
  if (identity_init) {
    head.weight = Matrix::identity(d_in);
  } else {
    Rng rng(seed);
    head.weight = Matrix(first_rows, d_in);
    const double sd = std::sqrt(1.0 / static_cast<double>(d_in));
    for (double& w : head.weight.data) w = rng.normal(0.0, sd);
    if (d_hidden) {
      HiddenLayer h{Matrix(d_out, d_hidden), Vector(d_out, 0.0)};
      const double sd2 = std::sqrt(1.0 / static_cast<double>(d_hidden));
      for (double& w : h.weight.data) w = rng.normal(0.0, sd2);
      head.hidden = std::move(h);
    }
  }
  head.bias.assign(first_rows, 0.0);
  return head;
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardTrace {
  Vector pre;        // first-layer output W x + b
  Vector activated;  // relu(pre) when a hidden layer exists
  Vector raw;        // output before optional normalization
  Embedding out;
};

inline ForwardTrace forward_trace(const ProjectionHead& head, std::span<const double> feat) {
  if (feat.size() != head.d_in())
    fail(ErrorCode::DimMismatch, "forward: feature dim " + std::to_string(feat.size()) + " != head d_in " +
                                     std::to_string(head.d_in()));
  ForwardTrace t;
  t.pre = affine(head.weight, feat, head.bias);
  if (head.hidden) {
    t.activated = t.pre;
    for (double& v : t.activated) v = v > 0.0 ? v : 0.0;
    t.raw = affine(head.hidden->weight, t.activated, head.hidden->bias);
  } else {
    t.raw = t.pre;
  }
  t.out = t.raw;
  if (head.normalize_output) normalize_l2(t.out);
  return t;
}

inline Embedding forward(const ProjectionHead& head, std::span<const double> feat) {
  return forward_trace(head, feat).out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointFormat = "s2f-checkpoint";

struct ModelCheckpoint {
  ProjectionHead head;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();  // training config snapshot

  bool operator==(const ModelCheckpoint&) const = default;
};

/// JSON text; doubles are written in shortest round-trip form, so
/// save -> load reproduces every parameter bit for bit.
inline std::string save_checkpoint(const ModelCheckpoint& ckpt) {
  const auto& h = ckpt.head;
  h.validate();
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["d_in"] = h.d_in();
  j["d_out"] = h.d_out();
  j["d_hidden"] = h.hidden ? h.weight.rows : 0;
  j["normalize_output"] = h.normalize_output;
  j["seed"] = ckpt.seed;
  j["config"] = ckpt.config;
  j["weight"] = h.weight.data;
  j["bias"] = h.bias;
  if (h.hidden) {
    j["weight2"] = h.hidden->weight.data;
    j["bias2"] = h.hidden->bias;
  }
  return j.dump(1) + "\n";
}

inline ModelCheckpoint load_checkpoint(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Corrupt, std::string("checkpoint does not parse: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    fail(ErrorCode::Corrupt, "not a checkpoint document");
  if (!j.contains("version") || !j["version"].is_number_integer())
    fail(ErrorCode::Corrupt, "checkpoint has no version");
  if (j["version"].get<int>() != kCheckpointVersion)
    fail(ErrorCode::BadVersion, "checkpoint version " + j["version"].dump() + ", expected " +
                                    std::to_string(kCheckpointVersion));
  ModelCheckpoint ckpt;
  try {
    const auto d_in = j.at("d_in").get<std::size_t>();
    const auto d_out = j.at("d_out").get<std::size_t>();
    const auto d_hidden = j.at("d_hidden").get<std::size_t>();
    const std::size_t first = d_hidden ? d_hidden : d_out;
    auto& h = ckpt.head;
    h.weight = Matrix(first, d_in);
    h.weight.data = j.at("weight").get<std::vector<double>>();
    h.bias = j.at("bias").get<Vector>();
    if (d_hidden) {
      HiddenLayer hl{Matrix(d_out, d_hidden), {}};
      hl.weight.data = j.at("weight2").get<std::vector<double>>();
      hl.bias = j.at("bias2").get<Vector>();
      h.hidden = std::move(hl);
    }
    h.normalize_output = j.at("normalize_output").get<bool>();
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.config = j.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Corrupt, std::string("checkpoint field error: ") + e.what());
  }
  try {
    ckpt.head.validate();
  } catch (const Error& e) {
    fail(ErrorCode::Corrupt, std::string("checkpoint parameters inconsistent: ") + e.what());
  }
  return ckpt;
}

}  // namespace s2f
