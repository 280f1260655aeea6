// s2f: command-line driver for the skull-to-face retrieval pipeline.
//
//   synth -> triplets -> (features) -> train -> embed -> evaluate / query
//
// Every stage reads and writes plain files, so each can be rerun alone.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "s2f/s2f.hpp"

namespace fs = std::filesystem;
using namespace s2f;

namespace {

struct Options {
  std::uint64_t seed = 1;

  // synth
  SynthConfig synth;
  std::size_t distractors = 0;

  // triplets
  std::string manifest;
  double split = 0.7;
  bool subject_disjoint = false;
  bool check_files = true;

  // features
  std::string extractor = "baseline";
  std::string precomputed;
  std::size_t image_size = kBaselineImageSize;

  // train
  std::string train_triplets;
  std::string val_triplets;
  std::string features;
  TrainConfig train;
  std::string distance = "squared";
  std::size_t hidden = 0;
  bool normalize_output = false;
  bool identity_init = false;
  std::string report;

  // embed
  std::string checkpoint;
  std::string domain = "all";
  std::string view = "all";

  // query / evaluate
  std::string gallery;
  std::string probes;
  std::string probe_id;
  std::vector<double> vector;
  std::size_t k = 10;
  bool table = false;
  std::string queries;
  std::string judgments;
  std::string distractor_gallery;
  std::size_t k_max = 30;

  std::string out;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::Diverged: return 1;
    default: return 2;
  }
}

void report_error(std::string_view code, std::string_view message) {
  nlohmann::json rec{{"error", code}, {"message", message}};
  std::cerr << rec.dump() << "\n" << "s2f: " << message << "\n";
}

std::string require_out(const Options& o) {
  if (o.out.empty()) fail(ErrorCode::InvalidArgument, "--out is required");
  return o.out;
}

GalleryIndex load_index(const std::string& path) { return build_index(load_gallery_csv(path)); }

// --- commands --------------------------------------------------------------

void cmd_synth(const Options& o) {
  const fs::path dir = require_out(o);
  SynthConfig cfg = o.synth;
  cfg.seed = stage_seed(o.seed, seed_offset::synth);
  const SynthData data = generate(cfg);
  save_manifest(data.manifest, dir / "manifest.json");
  text::write_file(dir / "features.csv", feature_table_to_csv(data.features));
  std::cout << data.manifest.size() << " subjects, " << data.features.size() << " feature rows (dim "
            << data.features.dim() << ")\n";
  if (o.distractors > 0) {
    const auto d = generate_distractors(cfg, o.distractors, stage_seed(o.seed, seed_offset::distractors));
    text::write_file(dir / "distractors.csv", gallery_to_csv(d));
    std::cout << d.size() << " distractor faces\n";
  }
}

void cmd_triplets(const Options& o) {
  const fs::path dir = require_out(o);
  const Manifest m = load_manifest(o.manifest, o.check_files ? FileCheck::require_files : FileCheck::skip);
  const TripletSet all = enumerate_triplets(m);
  const auto seed = stage_seed(o.seed, seed_offset::split);
  auto [train, val] = o.subject_disjoint ? split_triplets_by_subject(all, o.split, seed)
                                         : split_triplets(all, o.split, seed);
  text::write_file(dir / "triplets.csv", triplets_to_csv(all));
  text::write_file(dir / "train.csv", triplets_to_csv(train));
  text::write_file(dir / "val.csv", triplets_to_csv(val));
  std::cout << all.size() << " triplets (" << train.size() << " train / " << val.size() << " val)\n";
}

void cmd_features(const Options& o) {
  const std::string out = require_out(o);
  FeatureTable table;
  if (o.extractor == "precomputed") {
    if (o.precomputed.empty()) fail(ErrorCode::InvalidArgument, "--precomputed <table.csv> is required");
    table = load_feature_table(o.precomputed);
  } else if (o.extractor == "baseline") {
    const Manifest m = load_manifest(o.manifest, FileCheck::skip);
    table = extract_manifest(m, o.image_size);
  } else {
    fail(ErrorCode::InvalidArgument, "unknown extractor '" + o.extractor + "'");
  }
  text::write_file(out, feature_table_to_csv(table));
  std::cout << table.size() << " feature rows (dim " << table.dim() << ")\n";
}

void cmd_train(const Options& o) {
  const std::string out = require_out(o);
  const FeatureTable features = load_feature_table(o.features);
  const TripletSet train_set = triplets_from_csv(text::read_file(o.train_triplets));
  std::optional<TripletSet> val_set;
  if (!o.val_triplets.empty()) val_set = triplets_from_csv(text::read_file(o.val_triplets));

  TrainConfig cfg = o.train;
  cfg.seed = stage_seed(o.seed, seed_offset::train);
  cfg.distance = parse_distance_kind(o.distance);
  ProjectionHead head =
      init_head(features.dim(), features.dim(), stage_seed(o.seed, seed_offset::init), o.identity_init, o.hidden);
  head.normalize_output = o.normalize_output;

  auto [ckpt, report] = train(cfg, train_set, features, std::move(head), val_set ? &*val_set : nullptr);
  ckpt.seed = o.seed;
  text::write_file(out, save_checkpoint(ckpt));
  if (!o.report.empty()) text::write_file(o.report, train_report_to_csv(report));
  const auto& last = report.epochs.empty() ? EpochStats{} : report.epochs.back();
  std::printf("epochs %zu  final loss %.6g  train accuracy %.4f", report.epochs.size(), last.mean_loss,
              last.train_accuracy);
  if (report.validation_accuracy) std::printf("  validation accuracy %.4f", *report.validation_accuracy);
  std::printf("  (%.2fs)\n", report.wall_seconds);
}

void cmd_embed(const Options& o) {
  const std::string out = require_out(o);
  const ModelCheckpoint ckpt = load_checkpoint(text::read_file(o.checkpoint));
  const FeatureTable features = load_feature_table(o.features);
  EmbedFilter filter;
  if (o.domain != "all") filter.domain = parse_domain(o.domain);
  if (o.view != "all") filter.view = parse_view(o.view);
  const auto rows = embed_features(ckpt.head, features, filter);
  text::write_file(out, gallery_to_csv(rows));
  std::cout << rows.size() << " embeddings written\n";
}

void cmd_query(const Options& o) {
  const GalleryIndex index = load_index(o.gallery);
  Embedding probe;
  std::string query_id = o.probe_id;
  if (!o.vector.empty()) {
    probe = o.vector;
    if (query_id.empty()) query_id = "vector";
  } else {
    if (o.probe_id.empty()) fail(ErrorCode::InvalidArgument, "give --probe-id or --vector");
    const auto source = o.probes.empty() ? load_gallery_csv(o.gallery) : load_gallery_csv(o.probes);
    auto it = std::find_if(source.begin(), source.end(), [&](const auto& e) { return e.gallery_id == o.probe_id; });
    if (it == source.end()) fail(ErrorCode::MissingQuery, "unknown probe id " + o.probe_id);
    probe = it->embedding;
  }
  const RankedList ranked = query(index, probe, o.k, query_id);
  const std::string doc = ranked_list_to_json(ranked).dump(2) + "\n";
  if (!o.out.empty()) text::write_file(o.out, doc);
  if (o.table) {
    std::printf("%-5s %-24s %-14s %-14s %s\n", "rank", "gallery_id", "subject", "distance", "confidence");
    for (std::size_t r = 0; r < ranked.items.size(); ++r) {
      const auto& it = ranked.items[r];
      std::printf("%-5zu %-24s %-14s %-14.6g %.6g\n", r + 1, it.gallery_id.c_str(), it.subject_id.c_str(),
                  it.distance, it.confidence);
    }
  } else if (o.out.empty()) {
    std::cout << doc;
  }
}

void cmd_evaluate(const Options& o) {
  const fs::path dir = require_out(o);
  GalleryIndex index = load_index(o.gallery);
  if (!o.distractor_gallery.empty()) index = merge_galleries(index, load_index(o.distractor_gallery));
  const auto query_rows = load_gallery_csv(o.queries);
  const Judgments judgments =
      o.judgments.empty() ? judgments_by_subject(index, query_rows) : parse_judgments_csv(text::read_file(o.judgments));
  std::vector<QueryProbe> probes;
  probes.reserve(query_rows.size());
  for (const auto& q : query_rows) probes.push_back({q.gallery_id, q.embedding});
  const MetricsReport report = evaluate(index, probes, judgments, o.k_max);
  text::write_file(dir / "metrics.json", metrics_summary_json(report).dump(2) + "\n");
  text::write_file(dir / "curves.csv", curves_to_csv(report));
  std::printf("gallery %zu  queries %zu  recall@%zu %.4f  map@%zu %.4f  mrr@%zu %.4f\n", report.gallery_size,
              probes.size(), o.k_max, report.recall.back(), o.k_max, report.map.back(), o.k_max, report.mrr.back());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-domain skull-to-face metric learning and retrieval"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML config file mirroring the command-line flags");
  Options o;
  app.add_option("--seed", o.seed, "Global seed; stage seeds derive from it by fixed offsets")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic paired catalog and feature table");
  synth->add_option("--subjects", o.synth.num_subjects)->capture_default_str();
  synth->add_option("--latent-dim", o.synth.latent_dim)->capture_default_str();
  synth->add_option("--feature-dim", o.synth.feature_dim)->capture_default_str();
  synth->add_option("--noise", o.synth.noise_sigma, "Per-coordinate Gaussian noise std")->capture_default_str();
  synth->add_option("--distractors", o.distractors, "Also write N distractor faces")->capture_default_str();
  synth->add_option("--out", o.out, "Output directory")->required();

  auto* triplets = app.add_subcommand("triplets", "Enumerate and split training triplets");
  triplets->add_option("--manifest", o.manifest)->required();
  triplets->add_option("--split", o.split, "Train fraction")->capture_default_str();
  triplets->add_flag("--subject-disjoint", o.subject_disjoint, "Split by subject instead of by triplet");
  triplets->add_flag("!--no-file-check", o.check_files, "Do not require image files to exist");
  triplets->add_option("--out", o.out, "Output directory")->required();

  auto* features = app.add_subcommand("features", "Extract or validate frozen feature vectors");
  features->add_option("--manifest", o.manifest);
  features->add_option("--extractor", o.extractor, "baseline | precomputed")->capture_default_str();
  features->add_option("--precomputed", o.precomputed, "Feature table to validate and pass through");
  features->add_option("--image-size", o.image_size)->capture_default_str();
  features->add_option("--out", o.out, "Output feature CSV")->required();

  auto* trainc = app.add_subcommand("train", "Train the skull head with triplet loss");
  trainc->add_option("--train", o.train_triplets, "Training triplet CSV")->required();
  trainc->add_option("--val", o.val_triplets, "Validation triplet CSV");
  trainc->add_option("--features", o.features)->required();
  trainc->add_option("--alpha", o.train.alpha, "Margin")->capture_default_str();
  trainc->add_option("--lr", o.train.learning_rate)->capture_default_str();
  trainc->add_option("--epochs", o.train.epochs)->capture_default_str();
  trainc->add_option("--batch-size", o.train.batch_size)->capture_default_str();
  trainc->add_flag("!--no-shuffle", o.train.shuffle);
  trainc->add_option("--distance", o.distance, "squared | euclidean")->capture_default_str();
  trainc->add_option("--accuracy-margin", o.train.accuracy_margin)->capture_default_str();
  trainc->add_option("--hidden", o.hidden, "Hidden layer width (0 = single affine layer)")->capture_default_str();
  trainc->add_flag("--normalize-output", o.normalize_output);
  trainc->add_flag("--identity-init", o.identity_init);
  trainc->add_option("--report", o.report, "Per-epoch CSV");
  trainc->add_option("--out", o.out, "Checkpoint path")->required();

  auto* embed = app.add_subcommand("embed", "Export embeddings in gallery format");
  embed->add_option("--checkpoint", o.checkpoint)->required();
  embed->add_option("--features", o.features)->required();
  embed->add_option("--domain", o.domain, "face | skull | all")->capture_default_str();
  embed->add_option("--view", o.view, "front | side | all")->capture_default_str();
  embed->add_option("--out", o.out)->required();

  auto* queryc = app.add_subcommand("query", "Top-k retrieval for one probe");
  queryc->add_option("--gallery", o.gallery)->required();
  queryc->add_option("--probes", o.probes, "Embedding CSV holding the probe (default: the gallery)");
  queryc->add_option("--probe-id", o.probe_id);
  queryc->add_option("--vector", o.vector, "Probe embedding given inline")->delimiter(',');
  queryc->add_option("-k", o.k)->capture_default_str();
  queryc->add_flag("--table", o.table, "Print a human-readable table");
  queryc->add_option("--out", o.out, "Write ranked JSON here instead of stdout");

  auto* evalc = app.add_subcommand("evaluate", "Recall / mAP / MRR over k = 1..k-max");
  evalc->add_option("--gallery", o.gallery)->required();
  evalc->add_option("--queries", o.queries)->required();
  evalc->add_option("--judgments", o.judgments, "CSV query_id,gallery_id (default: same subject)");
  evalc->add_option("--distractors", o.distractor_gallery, "Extra gallery merged in for the mixed run");
  evalc->add_option("--k-max", o.k_max)->capture_default_str();
  evalc->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("InvalidArgument", e.what());
    return 2;
  }

  try {
    if (*synth) cmd_synth(o);
    else if (*triplets) cmd_triplets(o);
    else if (*features) cmd_features(o);
    else if (*trainc) cmd_train(o);
    else if (*embed) cmd_embed(o);
    else if (*queryc) cmd_query(o);
    else if (*evalc) cmd_evaluate(o);
  } catch (const Error& e) {
    report_error(to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    report_error("Internal", e.what());
    return 1;
  }
  return 0;
}
