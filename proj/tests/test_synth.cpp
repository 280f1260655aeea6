#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "s2f/synth.hpp"
#include "s2f/training.hpp"

using namespace s2f;

TEST(Synth, ZeroNoiseViewsIdentical) {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  const SynthData d = generate(cfg);
  for (const auto& s : d.manifest.subjects())
    for (Domain dom : {Domain::face, Domain::skull})
      EXPECT_EQ(d.features.at({s.subject_id, dom, View::front}), d.features.at({s.subject_id, dom, View::side}));
}

TEST(Synth, Deterministic) {
  const SynthConfig cfg;
  const SynthData a = generate(cfg), b = generate(cfg);
  EXPECT_EQ(feature_table_to_csv(a.features), feature_table_to_csv(b.features));
  EXPECT_EQ(a.manifest.to_json(), b.manifest.to_json());
  SynthConfig other = cfg;
  other.seed = 2;
  EXPECT_NE(feature_table_to_csv(generate(other).features), feature_table_to_csv(a.features));
}

TEST(Synth, DefaultsAndManifestValidity) {
  const SynthData d = generate(SynthConfig{});
  EXPECT_EQ(d.manifest.size(), 40u);
  EXPECT_EQ(d.features.size(), 160u);
  EXPECT_EQ(d.features.dim(), 64u);
  const Manifest reparsed = parse_manifest(d.manifest.to_json().dump(), ".");
  EXPECT_EQ(reparsed.size(), 40u);
  EXPECT_EQ(enumerate_triplets(reparsed).size(), 12480u);
  for (const auto& s : d.manifest.samples()) EXPECT_TRUE(d.features.contains(s.key));
  EXPECT_THROW(generate(SynthConfig{1, 16, 64, 0.05, 1}), Error);
}

TEST(Synth, DistinctSkullsWithoutNoise) {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  const SynthData d = generate(cfg);
  const auto& subj = d.manifest.subjects();
  for (std::size_t i = 0; i < subj.size(); ++i)
    for (std::size_t j = i + 1; j < subj.size(); ++j)
      EXPECT_GT(squared_distance(d.features.at({subj[i].subject_id, Domain::skull, View::front}).values,
                                 d.features.at({subj[j].subject_id, Domain::skull, View::front}).values),
                1e-6);
}

// Least-squares alignment W = F S^+ of skull onto face features is an
// exact affine head for noiseless data; with it every triplet ranks right.
TEST(Synth, LinearHeadAchievesPerfectAccuracy) {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  const SynthData d = generate(cfg);
  const auto& subj = d.manifest.subjects();
  Eigen::MatrixXd S(64, subj.size()), F(64, subj.size());
  for (std::size_t i = 0; i < subj.size(); ++i) {
    const auto& s = d.features.at({subj[i].subject_id, Domain::skull, View::front}).values;
    const auto& f = d.features.at({subj[i].subject_id, Domain::face, View::front}).values;
    S.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(s.data(), 64);
    F.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(f.data(), 64);
  }
  // Minimum-norm solution of W S = F.
  const Eigen::MatrixXd W = S.transpose().completeOrthogonalDecomposition().solve(F.transpose()).transpose();
  EXPECT_LT((W * S - F).norm(), 1e-9);
  ProjectionHead head = init_head(64, 64, 0, true);
  for (Eigen::Index r = 0; r < 64; ++r)
    for (Eigen::Index c = 0; c < 64; ++c) head.weight(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = W(r, c);
  const auto set = enumerate_triplets(d.manifest);
  EXPECT_EQ(triplet_accuracy(head, set.triplets, d.features), 1.0);
}

TEST(Synth, DistractorsShareFaceSpace) {
  const SynthConfig cfg;
  const auto a = generate_distractors(cfg, 445, 7);
  ASSERT_EQ(a.size(), 445u);
  EXPECT_EQ(a.front().gallery_id, "D0001");
  EXPECT_EQ(a.front().subject_id, "distractor");
  EXPECT_EQ(a.front().embedding.size(), 64u);
  EXPECT_EQ(build_index(a).size(), 445u);
  EXPECT_EQ(a, generate_distractors(cfg, 445, 7));
}
