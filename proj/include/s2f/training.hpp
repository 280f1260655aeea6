#pragma once

// Triplet hinge loss over (skull anchor, face positive, face negative),
// its analytic gradient through the head, and a mini-batch gradient
// descent loop.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2f/data_model.hpp"
#include "s2f/error.hpp"
#include "s2f/features.hpp"
#include "s2f/linalg.hpp"
#include "s2f/model.hpp"
#include "s2f/random.hpp"
#include "s2f/text.hpp"

namespace s2f {

/// `squared` is ||u - v||^2, the distance used throughout scoring;
/// `euclidean` is its square root, kept for sensitivity runs.
enum class DistanceKind { squared, euclidean };

inline DistanceKind parse_distance_kind(std::string_view s) {
  if (s == "squared") return DistanceKind::squared;
  if (s == "euclidean") return DistanceKind::euclidean;
  fail(ErrorCode::InvalidArgument, "unknown distance '" + std::string(s) + "'");
}

constexpr std::string_view to_string(DistanceKind k) {
  return k == DistanceKind::squared ? "squared" : "euclidean";
}

inline double distance(std::span<const double> u, std::span<const double> v, DistanceKind kind) {
  if (u.size() != v.size())
    fail(ErrorCode::DimMismatch, "distance between dims " + std::to_string(u.size()) + " and " +
                                     std::to_string(v.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return kind == DistanceKind::squared ? s : std::sqrt(s);
}

/// Hinge argument d(a,p) - d(a,n) + alpha; the triplet is active iff > 0.
inline double hinge_argument(std::span<const double> e_a, std::span<const double> e_p,
                             std::span<const double> e_n, double alpha,
                             DistanceKind kind = DistanceKind::squared) {
  return distance(e_a, e_p, kind) - distance(e_a, e_n, kind) + alpha;
}

inline double triplet_loss(std::span<const double> e_a, std::span<const double> e_p, std::span<const double> e_n,
                           double alpha, DistanceKind kind = DistanceKind::squared) {
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "margin alpha must be > 0");
  const double h = hinge_argument(e_a, e_p, e_n, alpha, kind);
  return h > 0.0 ? h : 0.0;
}

/// Gradient with the same shapes as the head parameters.
struct HeadGradient {
  Matrix weight;
  Vector bias;
  Matrix weight2;  // empty without a hidden layer
  Vector bias2;

  static HeadGradient zeros_like(const ProjectionHead& head) {
    HeadGradient g{Matrix(head.weight.rows, head.weight.cols), Vector(head.bias.size(), 0.0), {}, {}};
    if (head.hidden) {
      g.weight2 = Matrix(head.hidden->weight.rows, head.hidden->weight.cols);
      g.bias2.assign(head.hidden->bias.size(), 0.0);
    }
    return g;
  }

  bool is_zero() const {
    auto zero = [](std::span<const double> v) {
      for (double x : v)
        if (x != 0.0) return false;
      return true;
    };
    return zero(weight.data) && zero(bias) && zero(weight2.data) && zero(bias2);
  }
};

namespace detail {

/// dL/d(out) for an active triplet. For the unsquared distance the
/// subgradient at zero distance is taken as 0.
inline Vector output_gradient(std::span<const double> e_a, std::span<const double> e_p,
                              std::span<const double> e_n, DistanceKind kind) {
  Vector g(e_a.size());
  if (kind == DistanceKind::squared) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (e_n[i] - e_p[i]);
    return g;
  }
  const double dp = distance(e_a, e_p, DistanceKind::euclidean);
  const double dn = distance(e_a, e_n, DistanceKind::euclidean);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gp = dp > 0.0 ? (e_a[i] - e_p[i]) / dp : 0.0;
    const double gn = dn > 0.0 ? (e_a[i] - e_n[i]) / dn : 0.0;
    g[i] = gp - gn;
  }
  return g;
}

/// Backpropagates dL/d(out) through the head, adding `scale` times the
/// parameter gradient into `acc`.
inline void accumulate_backward(const ProjectionHead& head, const ForwardTrace& t, std::span<const double> feat,
                                Vector g, double scale, HeadGradient& acc) {
  if (head.normalize_output) {
    const double n = std::sqrt(squared_norm(t.raw));
    if (n == 0.0) return;
    const double proj = dot(t.out, g);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] - t.out[i] * proj) / n;
  }
  Vector g_pre;
  if (head.hidden) {
    const auto& w2 = head.hidden->weight;
    g_pre.assign(w2.cols, 0.0);
    for (std::size_t r = 0; r < w2.rows; ++r) {
      const double gr = g[r];
      if (gr == 0.0) continue;
      acc.bias2[r] += scale * gr;
      double* grow = acc.weight2.data.data() + r * w2.cols;
      const double* wrow = w2.data.data() + r * w2.cols;
      for (std::size_t c = 0; c < w2.cols; ++c) {
        grow[c] += scale * gr * t.activated[c];
        g_pre[c] += wrow[c] * gr;
      }
    }
    for (std::size_t c = 0; c < g_pre.size(); ++c)
      if (!(t.pre[c] > 0.0)) g_pre[c] = 0.0;
  } else {
    g_pre = std::move(g);
  }
  const std::size_t cols = head.weight.cols;
  for (std::size_t r = 0; r < head.weight.rows; ++r) {
    const double gr = g_pre[r];
    if (gr == 0.0) continue;
    acc.bias[r] += scale * gr;
    double* grow = acc.weight.data.data() + r * cols;
    const double sg = scale * gr;
    for (std::size_t c = 0; c < cols; ++c) grow[c] += sg * feat[c];
  }
}

}  // namespace detail

/// Parameter gradient of the single-triplet loss. Zero everywhere when the
/// hinge is inactive (argument <= 0).
inline HeadGradient loss_gradient(const ProjectionHead& head, std::span<const double> feat_a,
                                  std::span<const double> e_p, std::span<const double> e_n, double alpha,
                                  DistanceKind kind = DistanceKind::squared) {
  const ForwardTrace t = forward_trace(head, feat_a);
  if (e_p.size() != t.out.size() || e_n.size() != t.out.size())
    fail(ErrorCode::DimMismatch, "loss_gradient: face embedding dim differs from head output dim");
  HeadGradient g = HeadGradient::zeros_like(head);
  if (!(hinge_argument(t.out, e_p, e_n, alpha, kind) > 0.0)) return g;
  detail::accumulate_backward(head, t, feat_a, detail::output_gradient(t.out, e_p, e_n, kind), 1.0, g);
  return g;
}

/// head <- head - lr * g
inline void apply_gradient(ProjectionHead& head, const HeadGradient& g, double lr) {
  for (std::size_t i = 0; i < head.weight.data.size(); ++i) head.weight.data[i] -= lr * g.weight.data[i];
  for (std::size_t i = 0; i < head.bias.size(); ++i) head.bias[i] -= lr * g.bias[i];
  if (head.hidden) {
    for (std::size_t i = 0; i < head.hidden->weight.data.size(); ++i)
      head.hidden->weight.data[i] -= lr * g.weight2.data[i];
    for (std::size_t i = 0; i < head.hidden->bias.size(); ++i) head.hidden->bias[i] -= lr * g.bias2[i];
  }
}

struct TrainConfig {
  double alpha = 0.2;
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool shuffle = true;
  DistanceKind distance = DistanceKind::squared;
  /// Margin added to the ranking test in accuracy; 0 is the plain ranking test.
  double accuracy_margin = 0.0;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) fail(ErrorCode::InvalidArgument, "alpha must be > 0");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      fail(ErrorCode::InvalidArgument, "learning_rate must be >= 0");
    if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
    if (!(accuracy_margin >= 0.0)) fail(ErrorCode::InvalidArgument, "accuracy_margin must be >= 0");
  }

  nlohmann::json to_json() const {
    return {{"alpha", alpha},       {"learning_rate", learning_rate}, {"epochs", epochs},
            {"batch_size", batch_size}, {"seed", seed},               {"shuffle", shuffle},
            {"distance", std::string(to_string(distance))}, {"accuracy_margin", accuracy_margin}};
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::optional<double> validation_accuracy;
  double wall_seconds = 0.0;
};

/// Triplets resolved to row indices of a FeatureTable.
struct ResolvedTriplet {
  std::size_t anchor, positive, negative;
};

inline std::vector<ResolvedTriplet> resolve_triplets(std::span<const Triplet> triplets, const FeatureTable& features) {
  std::vector<ResolvedTriplet> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) {
    if (!t.valid()) fail(ErrorCode::InvalidArgument, "malformed triplet anchored at " + t.anchor.key.str());
    out.push_back({features.index_of(t.anchor.key), features.index_of(t.positive.key),
                   features.index_of(t.negative.key)});
  }
  return out;
}

namespace detail {

/// Lazily computes head embeddings for skull rows, once per row.
class AnchorCache {
 public:
  AnchorCache(const ProjectionHead& head, const FeatureTable& features)
      : head_(head), features_(features), cache_(features.size()) {}

  const Embedding& get(std::size_t row) {
    auto& slot = cache_[row];
    if (!slot) slot = forward(head_, features_.rows()[row].second.values);
    return *slot;
  }

 private:
  const ProjectionHead& head_;
  const FeatureTable& features_;
  std::vector<std::optional<Embedding>> cache_;
};

inline double accuracy_resolved(const ProjectionHead& head, std::span<const ResolvedTriplet> triplets,
                                const FeatureTable& features, double margin, DistanceKind kind) {
  if (triplets.empty()) fail(ErrorCode::InvalidArgument, "accuracy over an empty triplet set");
  AnchorCache anchors(head, features);
  std::size_t correct = 0;
  for (const auto& t : triplets) {
    const auto& e_a = anchors.get(t.anchor);
    const double dp = distance(e_a, features.rows()[t.positive].second.values, kind);
    const double dn = distance(e_a, features.rows()[t.negative].second.values, kind);
    if (dp + margin < dn) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(triplets.size());
}

}  // namespace detail

/// Fraction of triplets with d(a,p) + margin < d(a,n); margin 0 is the
/// plain ranking test.
inline double triplet_accuracy(const ProjectionHead& head, std::span<const Triplet> triplets,
                               const FeatureTable& features, double margin = 0.0,
                               DistanceKind kind = DistanceKind::squared) {
  const auto resolved = resolve_triplets(triplets, features);
  return detail::accuracy_resolved(head, resolved, features, margin, kind);
}

inline void check_head_matches(const ProjectionHead& head, const FeatureTable& features) {
  head.validate();
  if (head.d_in() != features.dim())
    fail(ErrorCode::DimMismatch, "head d_in " + std::to_string(head.d_in()) + " != feature dim " +
                                     std::to_string(features.dim()));
  if (head.d_out() != features.dim())
    fail(ErrorCode::DimMismatch, "head d_out " + std::to_string(head.d_out()) +
                                     " must equal the frozen face embedding dim " + std::to_string(features.dim()));
}

/// Mini-batch gradient descent on the mean triplet loss. Each epoch
/// reshuffles the training order (if enabled) from a generator seeded once
/// with cfg.seed; gradients are reduced in triplet order, so the result is
/// bit-reproducible. Epoch loss is the mean of per-triplet losses seen
/// during that epoch; train accuracy is measured after the epoch's last step.
inline std::pair<ModelCheckpoint, TrainReport> train(const TrainConfig& cfg, const TripletSet& triplets,
                                                      const FeatureTable& features, ProjectionHead head,
                                                      const TripletSet* validation = nullptr) {
  cfg.validate();
  if (triplets.empty()) fail(ErrorCode::InvalidArgument, "no training triplets");
  check_head_matches(head, features);
  const auto start = std::chrono::steady_clock::now();
  const auto resolved = resolve_triplets(triplets.triplets, features);
  std::vector<ResolvedTriplet> resolved_val;
  if (validation && !validation->empty()) resolved_val = resolve_triplets(validation->triplets, features);

  std::vector<std::size_t> order(resolved.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);
  const auto& rows = features.rows();
  TrainReport report;
  HeadGradient grad = HeadGradient::zeros_like(head);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_n = 1.0 / static_cast<double>(end - begin);
      grad = HeadGradient::zeros_like(head);
      bool any_active = false;
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& t = resolved[order[i]];
        const auto& feat = rows[t.anchor].second.values;
        const auto& e_p = rows[t.positive].second.values;
        const auto& e_n = rows[t.negative].second.values;
        const ForwardTrace tr = forward_trace(head, feat);
        const double h = hinge_argument(tr.out, e_p, e_n, cfg.alpha, cfg.distance);
        if (!std::isfinite(h))
          fail(ErrorCode::Diverged, "non-finite loss at epoch " + std::to_string(epoch) + ", triplet anchored at " +
                                        rows[t.anchor].first.str() + "; lower the learning rate");
        if (h > 0.0) {
          batch_loss += h;
          any_active = true;
          detail::accumulate_backward(head, tr, feat, detail::output_gradient(tr.out, e_p, e_n, cfg.distance),
                                      inv_n, grad);
        }
      }
      loss_sum += batch_loss;
      if (any_active && cfg.learning_rate != 0.0) apply_gradient(head, grad, cfg.learning_rate);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(stats.mean_loss) || !all_finite(head.weight.data))
      fail(ErrorCode::Diverged, "training diverged at epoch " + std::to_string(epoch) + "; lower the learning rate");
    stats.train_accuracy = detail::accuracy_resolved(head, resolved, features, cfg.accuracy_margin, cfg.distance);
    report.epochs.push_back(stats);
  }
  if (!resolved_val.empty())
    report.validation_accuracy =
        detail::accuracy_resolved(head, resolved_val, features, cfg.accuracy_margin, cfg.distance);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ModelCheckpoint ckpt{std::move(head), cfg.seed, cfg.to_json()};
  return {std::move(ckpt), std::move(report)};
}

inline std::string train_report_to_csv(const TrainReport& report) {
  std::string out = "epoch,mean_loss,train_accuracy\n";
  for (const auto& e : report.epochs)
    out += std::to_string(e.epoch) + "," + text::format_double(e.mean_loss) + "," +
           text::format_double(e.train_accuracy) + "\n";
  return out;
}

}  // namespace s2f
