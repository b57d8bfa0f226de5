#include "lsw/train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "lsw/catalog.hpp"

namespace lsw {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

bool both_classes(std::span<const TilePair> pairs) {
  bool pos = false, neg = false;
  for (const auto& p : pairs) (p.label == 1 ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be at least 1");
  if (folds < 2) throw ValidationError("train config: folds must be at least 2");
  if (batch_size < 1) throw ValidationError("train config: batch_size must be at least 1");
  if (tiles_per_site < 1) throw ValidationError("train config: tiles_per_site must be at least 1");
  if (!(learning_rate > 0.0)) throw ValidationError("train config: learning_rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ValidationError("train config: betas must lie in [0,1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("train config: epsilon must be positive");
}

FoldAssignment kfold_split(std::span<const std::string> sites, std::size_t k,
                           std::uint64_t seed) {
  if (k < 2) throw ValidationError("kfold_split: k must be at least 2, got " + std::to_string(k));
  if (k > sites.size()) {
    throw ValidationError("kfold_split: k=" + std::to_string(k) + " exceeds " +
                          std::to_string(sites.size()) + " sites");
  }
  std::set<std::string> unique(sites.begin(), sites.end());
  if (unique.size() != sites.size()) {
    throw ValidationError("kfold_split: duplicate site ids");
  }
  FoldAssignment out;
  out.sites.assign(sites.begin(), sites.end());
  out.fold_of.resize(sites.size());
  out.k = k;
  std::vector<std::size_t> perm(sites.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i) out.fold_of[perm[i]] = i % k;
  return out;
}

double balanced_accuracy(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) {
    throw ValidationError("balanced_accuracy: no positive examples, metric undefined");
  }
  if (c.tn + c.fp == 0) {
    throw ValidationError("balanced_accuracy: no negative examples, metric undefined");
  }
  const double tpr = (double)c.tp / (double)(c.tp + c.fn);
  const double tnr = (double)c.tn / (double)(c.tn + c.fp);
  return (tpr + tnr) / 2.0;
}

std::vector<SiteData> load_sites(const std::filesystem::path& dataset_dir) {
  const auto truth_path = dataset_dir / "truth.csv";
  std::ifstream tf(truth_path);
  if (!tf) throw IoError(truth_path.string() + ": cannot open");
  std::string line;
  if (!std::getline(tf, line) || line != "site_id;label;bbox_x;bbox_y;bbox_w;bbox_h") {
    throw ValidationError(truth_path.string() + ": bad or missing header");
  }

  CatalogParseResult catalog;
  const auto catalog_path = dataset_dir / "catalog.csv";
  if (std::filesystem::exists(catalog_path)) {
    std::ifstream cf(catalog_path);
    std::stringstream ss;
    ss << cf.rdbuf();
    catalog = parse_catalog(ss.str());
  }

  std::vector<SiteData> sites;
  std::size_t line_no = 1;
  while (std::getline(tf, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ';')) fields.push_back(field);
    while (fields.size() < 6) fields.push_back({});
    if (fields.size() != 6 || fields[0].empty()) {
      throw ValidationError(truth_path.string() + ":" + std::to_string(line_no) +
                            ": expected site_id;label;bbox_x;bbox_y;bbox_w;bbox_h");
    }
    SiteData site;
    site.site_id = fields[0];
    if (fields[1] != "0" && fields[1] != "1") {
      throw ValidationError(truth_path.string() + ":" + std::to_string(line_no) +
                            ": label must be 0 or 1");
    }
    site.label = fields[1] == "1" ? 1 : 0;

    const auto site_dir = dataset_dir / site.site_id;
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(site_dir, ec)) {
      if (e.path().extension() == ".lsrs") files.push_back(e.path());
    }
    if (ec) throw IoError(site_dir.string() + ": cannot list directory: " + ec.message());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      site.scenes.push_back(select_scene_bands(load_raster(f), kModelBands));
    }
    if (site.scenes.size() < 2) {
      throw ValidationError(site_dir.string() + ": site needs at least 2 scenes, found " +
                            std::to_string(site.scenes.size()));
    }
    std::stable_sort(site.scenes.begin(), site.scenes.end(),
                     [](const RasterScene& a, const RasterScene& b) {
                       return a.timestamp < b.timestamp;
                     });

    if (site.label == 1) {
      if (!fields[2].empty()) {
        std::size_t vals[4];
        for (int i = 0; i < 4; ++i) {
          const auto& s = fields[(std::size_t)(2 + i)];
          auto [p, e2] = std::from_chars(s.data(), s.data() + s.size(), vals[i]);
          if (e2 != std::errc() || p != s.data() + s.size()) {
            throw ValidationError(truth_path.string() + ":" + std::to_string(line_no) +
                                  ": bad bbox field '" + s + "'");
          }
        }
        site.bbox = PixelRect{vals[0], vals[1], vals[2], vals[3]};
      } else {
        const CatalogEntry* match = nullptr;
        for (const auto& e : catalog.entries) {
          if (e.location_name == site.site_id) match = &e;
        }
        if (!match) {
          throw ValidationError(truth_path.string() + ":" + std::to_string(line_no) +
                                ": positive site '" + site.site_id +
                                "' has no bbox and no catalog entry");
        }
        site.bbox = bbox_from_catalog(*match, site.scenes.back());
      }
    }
    sites.push_back(std::move(site));
  }
  if (sites.empty()) throw ValidationError(truth_path.string() + ": no sites listed");
  return sites;
}

std::vector<TilePair> draw_site_pairs(const SiteData& site, std::size_t tile,
                                      std::size_t tiles_per_site, std::uint64_t seed) {
  std::vector<TilePair> pairs;
  if (site.label == 1) {
    if (site.scenes.size() < 2) {
      throw ValidationError("site '" + site.site_id + "': positive site needs 2 scenes");
    }
    const auto& before = site.scenes[site.scenes.size() - 2];
    const auto& after = site.scenes.back();
    for (std::size_t t = 0; t < tiles_per_site; ++t) {
      pairs.push_back(
          sample_window(before, after, site.bbox, tile, derive_seed(seed, t), site.site_id));
    }
    if (site.scenes.size() >= 3) {
      auto negs = build_negative_pairs(
          std::span<const RasterScene>(site.scenes.data(), site.scenes.size() - 1), tile,
          tiles_per_site, derive_seed(seed, 0xBADBEEF), site.site_id);
      for (auto& p : negs) pairs.push_back(std::move(p));
    }
  } else {
    pairs = build_negative_pairs(site.scenes, tile, tiles_per_site,
                                 derive_seed(seed, 0xBADBEEF), site.site_id);
  }
  return pairs;
}

void validate_grouping(std::span<const TilePair> train_pairs,
                       std::span<const std::string> eval_sites) {
  const std::set<std::string> eval(eval_sites.begin(), eval_sites.end());
  for (const auto& p : train_pairs) {
    if (eval.count(p.source_site)) {
      throw ValidationError("grouping violation: training pair drawn from eval site '" +
                            p.source_site + "'");
    }
  }
}

ConfusionCounts evaluate(const Network<float>& net, std::span<const TilePair> pairs) {
  if (pairs.empty()) throw ValidationError("evaluate: no pairs");
  ConfusionCounts c;
  const std::size_t batch = 8;
  for (std::size_t i = 0; i < pairs.size(); i += batch) {
    const std::size_t n = std::min(batch, pairs.size() - i);
    auto x = tensorize_pairs<float>(pairs.subspan(i, n));
    auto probs = net.forward(nullptr, x);
    for (std::size_t j = 0; j < n; ++j) {
      const int predicted = probs->values()[j] >= 0.5f ? 1 : 0;
      const int actual = pairs[i + j].label;
      if (actual == 1) {
        (predicted == 1 ? c.tp : c.fn)++;
      } else {
        (predicted == 0 ? c.tn : c.fp)++;
      }
    }
  }
  return c;
}

std::vector<MetricsRecord> train(Network<float>& net, std::span<const TilePair> train_pairs,
                                 std::span<const TilePair> eval_pairs, const TrainConfig& cfg) {
  cfg.validate();
  if (train_pairs.empty()) throw ValidationError("train: training set is empty");
  if (!both_classes(train_pairs)) throw ValidationError("train: training set has a single class");
  if (eval_pairs.empty()) throw ValidationError("train: eval set is empty");
  if (!both_classes(eval_pairs)) throw ValidationError("train: eval set has a single class");

  AdamState state;
  state.learning_rate = cfg.learning_rate;
  state.beta1 = cfg.beta1;
  state.beta2 = cfg.beta2;
  state.epsilon = cfg.epsilon;
  Adam<float> opt(net.named_parameters(), std::move(state));

  std::vector<MetricsRecord> records;
  records.reserve(cfg.epochs);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng(derive_seed(cfg.master_seed, 0xE70000 + epoch));
    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    epoch_rng.shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    ConfusionCounts train_counts;
    std::size_t batch_index = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - at);
      std::vector<TilePair> batch;
      batch.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        const TilePair& src = train_pairs[order[at + j]];
        if (cfg.augment) {
          batch.push_back(dihedral_augment(src, {(int)epoch_rng.uniform_below(8)}));
        } else {
          batch.push_back(src);
        }
      }
      auto x = tensorize_pairs<float>(batch);
      auto y = labels_tensor<float>(batch);
      Tape<float> tape;
      auto probs = net.forward(&tape, x);
      auto loss = bce_loss(&tape, probs, y, Reduction::mean);
      const double loss_value = (double)loss.scalar();
      if (!std::isfinite(loss_value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      }
      loss_sum += loss_value * (double)n;
      for (std::size_t j = 0; j < n; ++j) {
        const int predicted = probs->values()[j] >= 0.5f ? 1 : 0;
        if (batch[j].label == 1) {
          (predicted == 1 ? train_counts.tp : train_counts.fn)++;
        } else {
          (predicted == 0 ? train_counts.tn : train_counts.fp)++;
        }
      }
      opt.zero_grad();
      backward(loss, tape);
      opt.step();
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / (double)train_pairs.size();
    rec.train_bal_acc = balanced_accuracy(train_counts);
    rec.eval_bal_acc = balanced_accuracy(evaluate(net, eval_pairs));
    records.push_back(rec);
  }
  return records;
}

CrossValResult cross_validate(std::span<const SiteData> sites, const NetworkConfig& net_cfg,
                              const TrainConfig& cfg, std::size_t jobs) {
  cfg.validate();
  net_cfg.validate();
  std::vector<std::string> ids;
  ids.reserve(sites.size());
  for (const auto& s : sites) ids.push_back(s.site_id);

  CrossValResult result;
  result.assignment = kfold_split(ids, cfg.folds, derive_seed(cfg.master_seed, 0xF01D));
  result.folds.resize(cfg.folds);

  auto run_fold = [&](std::size_t f) {
    FoldResult& fr = result.folds[f];
    fr.fold = f;
    std::vector<std::size_t> train_idx, eval_idx;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      (result.assignment.fold_of[i] == f ? eval_idx : train_idx).push_back(i);
    }
    for (std::size_t i : eval_idx) fr.eval_sites.push_back(sites[i].site_id);

    const std::uint64_t fold_stream = derive_seed(cfg.master_seed, 0x7A00 + f);
    std::vector<TilePair> eval_pairs;
    for (std::size_t i : eval_idx) {
      auto drawn = draw_site_pairs(sites[i], net_cfg.tile_size, cfg.tiles_per_site,
                                   derive_seed(fold_stream, 0xEA000000 + i));
      for (auto& p : drawn) eval_pairs.push_back(std::move(p));
    }
    if (!both_classes(eval_pairs)) {
      throw ValidationError("cross_validate: fold " + std::to_string(f) +
                            " eval set has a single class");
    }

    NetworkConfig fold_net_cfg = net_cfg;
    fold_net_cfg.init_seed = derive_seed(cfg.master_seed, 0xA0 + f);
    Network<float> net(fold_net_cfg);

    // Training pairs are drawn once and reused every epoch. The optimizer only
    // pulls the network out of its initial constant-output regime when the
    // epoch-to-epoch gradient stays coherent; redrawing windows each epoch
    // buries the class signal in sampling noise. Only positive sites feed the
    // training set: each contributes matching event and pre-event pairs, so
    // the classes stay exactly balanced per site. Negative sites still rotate
    // through the eval folds as unseen locations.
    std::vector<TilePair> train_pairs;
    for (std::size_t i : train_idx) {
      if (sites[i].label != 1) continue;
      auto drawn = draw_site_pairs(sites[i], net_cfg.tile_size, cfg.tiles_per_site,
                                   derive_seed(fold_stream, i));
      for (auto& p : drawn) train_pairs.push_back(std::move(p));
    }
    validate_grouping(train_pairs, fr.eval_sites);

    TrainConfig fold_cfg = cfg;
    fold_cfg.master_seed = fold_stream;
    fr.metrics = train(net, train_pairs, eval_pairs, fold_cfg);
    fr.score = balanced_accuracy(evaluate(net, eval_pairs));
  };

  if (jobs <= 1) {
    for (std::size_t f = 0; f < cfg.folds; ++f) run_fold(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(cfg.folds);
    auto worker = [&] {
      for (std::size_t f = next.fetch_add(1); f < cfg.folds; f = next.fetch_add(1)) {
        try {
          run_fold(f);
        } catch (...) {
          errors[f] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(jobs, cfg.folds); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  double sum = 0.0;
  for (const auto& fr : result.folds) sum += fr.score;
  result.mean_score = sum / (double)cfg.folds;
  return result;
}

namespace {

constexpr std::string_view kMetricsPreamble =
    "# accuracies are per-tile: each row aggregates the sampled tile pairs, not sites\n"
    "# columns: epoch,train_loss,train_bal_acc,eval_bal_acc\n";

void append_records(std::string& out, std::span<const MetricsRecord> records) {
  for (const auto& r : records) {
    out += std::to_string(r.epoch);
    out += ',';
    out += format_double(r.train_loss);
    out += ',';
    out += format_double(r.train_bal_acc);
    out += ',';
    out += format_double(r.eval_bal_acc);
    out += '\n';
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path.string() + ": cannot open for write");
  f << text;
  if (!f) throw IoError(path.string() + ": write failed");
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const CrossValResult& result) {
  std::string out(kMetricsPreamble);
  for (const auto& fr : result.folds) {
    out += "# fold " + std::to_string(fr.fold) + " eval sites:";
    for (const auto& s : fr.eval_sites) {
      out += ' ';
      out += s;
    }
    out += '\n';
    append_records(out, fr.metrics);
    out += "summary fold " + std::to_string(fr.fold) + ": eval_bal_acc " +
           format_double(fr.score) + '\n';
  }
  out += "summary mean: eval_bal_acc " + format_double(result.mean_score) + '\n';
  write_text(path, out);
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records) {
  std::string out(kMetricsPreamble);
  append_records(out, records);
  if (!records.empty()) {
    out += "summary: eval_bal_acc " + format_double(records.back().eval_bal_acc) + '\n';
  }
  write_text(path, out);
}

}  // namespace lsw
