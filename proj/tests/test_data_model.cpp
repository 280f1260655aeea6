#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "s2f/data_model.hpp"

namespace fs = std::filesystem;
using namespace s2f;

namespace {

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("s2f_dm_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                 ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void touch(const fs::path& p) { std::ofstream(p) << "x"; }

std::string subject_json(const std::string& id) {
  return R"({"subject_id":")" + id + R"(","face":{"front":")" + id + R"(_ff.pgm","side":")" + id +
         R"(_fs.pgm"},"skull":{"front":")" + id + R"(_sf.pgm","side":")" + id + R"(_ss.pgm"}})";
}

void touch_subject(const fs::path& dir, const std::string& id) {
  for (const char* s : {"_ff.pgm", "_fs.pgm", "_sf.pgm", "_ss.pgm"}) touch(dir / (id + s));
}

}  // namespace

TEST(LoadManifest, FortySubjects) {
  TempDir tmp;
  std::string doc = "[";
  for (int i = 0; i < 40; ++i) {
    const std::string id = "S" + std::to_string(i);
    touch_subject(tmp.path(), id);
    doc += (i ? "," : "") + subject_json(id);
  }
  doc += "]";
  std::ofstream(tmp.path() / "m.json") << doc;
  const Manifest m = load_manifest(tmp.path() / "m.json");
  EXPECT_EQ(m.size(), 40u);
  EXPECT_EQ(m.samples().size(), 160u);
  EXPECT_EQ(m.subjects()[3].subject_id, "S3");
  EXPECT_EQ(fs::path(m.subjects()[0].face_images.at(View::front)), tmp.path() / "S0_ff.pgm");
}

TEST(LoadManifest, SingleSubject) {
  TempDir tmp;
  touch_subject(tmp.path(), "S01");
  std::ofstream(tmp.path() / "m.json") << "[" << subject_json("S01") << "]";
  EXPECT_EQ(load_manifest(tmp.path() / "m.json").size(), 1u);
}

TEST(LoadManifest, DuplicateSampleRejected) {
  TempDir tmp;
  touch_subject(tmp.path(), "S01");
  std::ofstream(tmp.path() / "m.json") << "[" << subject_json("S01") << "," << subject_json("S01") << "]";
  try {
    load_manifest(tmp.path() / "m.json");
    FAIL() << "expected DuplicateSample";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateSample);
  }
  // Same view twice inside one record.
  std::ofstream(tmp.path() / "m2.json")
      << R"([{"subject_id":"S01","face":{"front":"S01_ff.pgm","front":"S01_fs.pgm","side":"S01_fs.pgm"},)"
         R"("skull":{"front":"S01_sf.pgm","side":"S01_ss.pgm"}}])";
  try {
    load_manifest(tmp.path() / "m2.json");
    FAIL() << "expected DuplicateSample";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateSample);
  }
}

TEST(LoadManifest, ErrorPaths) {
  TempDir tmp;
  auto code_of = [&](const std::string& doc) {
    std::ofstream(tmp.path() / "m.json", std::ios::trunc) << doc;
    try {
      load_manifest(tmp.path() / "m.json");
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;  // sentinel: no error
  };
  EXPECT_EQ(code_of("[{"), ErrorCode::ParseError);
  EXPECT_EQ(code_of(R"({"subject_id":"S"})"), ErrorCode::ParseError);
  EXPECT_EQ(code_of("[" + subject_json("S01") + "]"), ErrorCode::MissingFile);
  touch_subject(tmp.path(), "S02");
  EXPECT_EQ(code_of(R"([{"subject_id":"S02","face":{"front":"S02_ff.pgm","side":"S02_fs.pgm"},"skull":{"front":"S02_sf.pgm"}}])"),
            ErrorCode::IncompleteSubject);
  EXPECT_EQ(code_of("[]"), ErrorCode::InsufficientSubjects);
}

TEST(LoadManifest, FeatureReferencesSkipFileCheck) {
  const Manifest m = oracle::feature_manifest(3);
  const Manifest back = parse_manifest(m.to_json().dump(), "/nonexistent");
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.content_hash(), m.content_hash());
}

TEST(EnumerateTriplets, FortySubjects) {
  EXPECT_EQ(enumerate_triplets(oracle::feature_manifest(40)).size(), 12480u);
}

TEST(EnumerateTriplets, OneSubjectHasNoNegatives) {
  try {
    enumerate_triplets(oracle::feature_manifest(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientSubjects);
  }
}

TEST(EnumerateTriplets, MatchesBruteForceForSmallN) {
  for (std::size_t n = 2; n <= 10; ++n) {
    const Manifest m = oracle::feature_manifest(n);
    const TripletSet set = enumerate_triplets(m);
    std::vector<std::string> ids;
    for (const auto& s : m.subjects()) ids.push_back(s.subject_id);
    const auto expected = oracle::brute_force_triplets(ids);
    std::set<std::tuple<std::string, int, int, std::string, int>> got;
    for (const auto& t : set.triplets) {
      ASSERT_TRUE(t.valid());
      got.emplace(t.anchor.key.subject_id, static_cast<int>(t.anchor.key.view), static_cast<int>(t.positive.key.view),
                  t.negative.key.subject_id, static_cast<int>(t.negative.key.view));
    }
    EXPECT_EQ(got.size(), set.size()) << "duplicates for n=" << n;
    EXPECT_EQ(got, expected) << "n=" << n;
    EXPECT_EQ(set.size(), 8 * n * (n - 1));
  }
  EXPECT_EQ(enumerate_triplets(oracle::feature_manifest(2)).size(), 16u);
}

TEST(EnumerateTriplets, DeterministicOrder) {
  const auto set = enumerate_triplets(oracle::feature_manifest(3));
  const auto& first = set.triplets.front();
  EXPECT_EQ(first.anchor.key.subject_id, "P100");
  EXPECT_EQ(first.anchor.key.view, View::front);
  EXPECT_EQ(first.positive.key.view, View::front);
  EXPECT_EQ(first.negative.key.subject_id, "P101");
  EXPECT_EQ(first.negative.key.view, View::front);
  EXPECT_EQ(set.triplets[1].negative.key.view, View::side);
  EXPECT_EQ(set.triplets[2].negative.key.subject_id, "P102");
  EXPECT_EQ(set.triplets, enumerate_triplets(oracle::feature_manifest(3)).triplets);
}

TEST(SplitTriplets, SeventyThirty) {
  const auto set = enumerate_triplets(oracle::feature_manifest(40));
  const auto [train, val] = split_triplets(set, 0.7, 5);
  EXPECT_EQ(train.size(), 8736u);
  EXPECT_EQ(val.size(), 3744u);
}

TEST(SplitTriplets, ExactHalving) {
  const auto set = enumerate_triplets(oracle::feature_manifest(2));
  const auto [train, val] = split_triplets(set, 0.5, 1);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(val.size(), 8u);
}

TEST(SplitTriplets, SameSeedSamePartition) {
  TripletSet ten = enumerate_triplets(oracle::feature_manifest(2));
  ten.triplets.resize(10);
  const auto a = split_triplets(ten, 0.7, 7);
  const auto b = split_triplets(ten, 0.7, 7);
  EXPECT_EQ(a.first.triplets, b.first.triplets);
  EXPECT_EQ(a.second.triplets, b.second.triplets);
  EXPECT_EQ(a.first.size(), 7u);
}

TEST(SplitTriplets, PartitionProperty) {
  const auto full = enumerate_triplets(oracle::feature_manifest(6));  // 240 triplets
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    TripletSet set = full;
    set.triplets.resize(1 + rng.below(full.size()));
    const double frac = rng.uniform(0.01, 0.99);
    const auto [train, val] = split_triplets(set, frac, rng.next_u64());
    ASSERT_EQ(train.size(), static_cast<std::size_t>(std::floor(frac * static_cast<double>(set.size()))));
    ASSERT_EQ(train.size() + val.size(), set.size());
    std::vector<Triplet> uni = train.triplets;
    uni.insert(uni.end(), val.triplets.begin(), val.triplets.end());
    std::sort(uni.begin(), uni.end());
    ASSERT_EQ(std::adjacent_find(uni.begin(), uni.end()), uni.end()) << "train and val overlap";
    std::vector<Triplet> in = set.triplets;
    std::sort(in.begin(), in.end());
    ASSERT_EQ(uni, in);
  }
}

TEST(SplitTriplets, RejectsBadInput) {
  EXPECT_THROW(split_triplets(TripletSet{}, 0.7, 1), Error);
  const auto set = enumerate_triplets(oracle::feature_manifest(2));
  EXPECT_THROW(split_triplets(set, 1.0, 1), Error);
  EXPECT_THROW(split_triplets(set, 0.0, 1), Error);
}

TEST(SplitTriplets, SubjectDisjointModeHasNoLeakage) {
  const auto set = enumerate_triplets(oracle::feature_manifest(10));
  const auto [train, val] = split_triplets_by_subject(set, 0.7, 3);
  std::set<std::string> train_subjects, val_subjects;
  for (const auto& t : train.triplets) {
    train_subjects.insert(t.anchor.key.subject_id);
    train_subjects.insert(t.negative.key.subject_id);
  }
  for (const auto& t : val.triplets) {
    val_subjects.insert(t.anchor.key.subject_id);
    val_subjects.insert(t.negative.key.subject_id);
  }
  EXPECT_EQ(train_subjects.size(), 7u);
  EXPECT_EQ(val_subjects.size(), 3u);
  for (const auto& s : val_subjects) EXPECT_FALSE(train_subjects.contains(s));
  EXPECT_EQ(train.size(), 8u * 7 * 6);
  EXPECT_EQ(val.size(), 8u * 3 * 2);
}

TEST(TripletCsv, RoundTripAndHeader) {
  const auto set = enumerate_triplets(oracle::feature_manifest(3));
  const std::string csv = triplets_to_csv(set);
  EXPECT_TRUE(csv.starts_with("anchor_subject,anchor_view,positive_view,negative_subject,negative_view\n"));
  EXPECT_TRUE(csv.find("P100,front,front,P101,front\n") != std::string::npos);
  const auto back = triplets_from_csv(csv);
  EXPECT_EQ(back.triplets, set.triplets);
  EXPECT_THROW(triplets_from_csv("a,b\n"), Error);
  EXPECT_THROW(triplets_from_csv(std::string(kTripletCsvHeader) + "\nP1,front,front,P1,side\n"), Error);
}
