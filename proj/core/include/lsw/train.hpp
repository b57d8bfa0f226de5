#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lsw/model.hpp"

namespace lsw {

// Defaults are tuned for the synthetic datasets this engine trains on: a few
// dozen fixed pairs per fold. batch_size 8 fits the 64-tile memory budget.
// Training starts near a plateau where balanced batches almost cancel, so the
// learning rate must survive two regimes: tiny noisy gradients before the
// classes separate and near-zero gradients after the loss bottoms out. With a
// short second-moment horizon (beta2 0.9) the Adam denominator collapses in
// the second regime and the next nonzero gradient catapults the weights into
// saturation; 3e-3 with beta2 0.99 rides out both regimes. augment stays off
// by default: redrawing transforms every epoch jitters the gradient enough to
// stall separation on sets this small.
struct TrainConfig {
  std::size_t epochs = 120;
  std::size_t folds = 5;
  std::size_t batch_size = 8;
  double learning_rate = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  bool augment = false;
  std::size_t tiles_per_site = 1;
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct FoldAssignment {
  std::vector<std::string> sites;    // caller order
  std::vector<std::size_t> fold_of;  // parallel to sites
  std::size_t k = 0;
};

// Random permutation by seed, then round-robin: fold sizes differ by at most 1.
FoldAssignment kfold_split(std::span<const std::string> sites, std::size_t k,
                           std::uint64_t seed);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

// (tp/(tp+fn) + tn/(tn+fp)) / 2; throws when either class is absent.
double balanced_accuracy(const ConfusionCounts& c);

struct MetricsRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_bal_acc = 0.0;
  double eval_bal_acc = 0.0;
};

// One site's scenes, time-ascending, restricted to the model bands.
struct SiteData {
  std::string site_id;
  int label = 0;
  std::vector<RasterScene> scenes;
  PixelRect bbox{0, 0, 0, 0};  // scar bounds in scene pixels, label 1 only
};

// Reads truth.csv plus per-site scene directories under dataset_dir. A
// positive row with empty bbox fields falls back to the catalog entry of the
// same name via bbox_from_catalog.
std::vector<SiteData> load_sites(const std::filesystem::path& dataset_dir);

// Positive sites yield tiles_per_site event pairs plus the same number of
// pre-event negatives; negative sites yield tiles_per_site negatives.
std::vector<TilePair> draw_site_pairs(const SiteData& site, std::size_t tile,
                                      std::size_t tiles_per_site, std::uint64_t seed);

// Throws when any training pair originates from an eval site.
void validate_grouping(std::span<const TilePair> train_pairs,
                       std::span<const std::string> eval_sites);

// Trains on a fixed pair set: the same pairs every epoch, reshuffled (and
// re-augmented when cfg.augment is set). One metrics record per epoch.
std::vector<MetricsRecord> train(Network<float>& net, std::span<const TilePair> train_pairs,
                                 std::span<const TilePair> eval_pairs, const TrainConfig& cfg);

ConfusionCounts evaluate(const Network<float>& net, std::span<const TilePair> pairs);

struct FoldResult {
  std::size_t fold = 0;
  double score = 0.0;  // eval balanced accuracy of the trained network
  std::vector<MetricsRecord> metrics;
  std::vector<std::string> eval_sites;
};

struct CrossValResult {
  FoldAssignment assignment;
  std::vector<FoldResult> folds;
  double mean_score = 0.0;
};

// Fresh network per fold (derived seed), grouped by site. jobs > 1 runs folds
// on separate threads; results are identical to the sequential order.
CrossValResult cross_validate(std::span<const SiteData> sites, const NetworkConfig& net_cfg,
                              const TrainConfig& cfg, std::size_t jobs = 1);

// Comma-separated epoch rows plus a summary line per fold. Accuracies are
// per-tile, noted in the header. No timing information goes in here.
void write_metrics_csv(const std::filesystem::path& path, const CrossValResult& result);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records);

}  // namespace lsw
