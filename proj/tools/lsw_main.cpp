// Command line front end for the landslide detection pipeline. Subcommands
// mirror the stages: synth (make a dataset), prepare (catalog + scenes into
// tile pairs), train, cv, eval, predict. Exit codes: 0 success, 1 usage,
// 2 data or validation problem, 3 numerical abort.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lsw/catalog.hpp"
#include "lsw/model.hpp"
#include "lsw/pairs.hpp"
#include "lsw/raster.hpp"
#include "lsw/rng.hpp"
#include "lsw/synth.hpp"
#include "lsw/train.hpp"

namespace fs = std::filesystem;
using namespace lsw;

namespace {

enum LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };
int g_log_level = kInfo;

bool read_log_level_env() {
  const char* e = std::getenv("LSW_LOG");
  if (!e || !*e) return true;
  const std::string_view s(e);
  if (s == "quiet") g_log_level = kQuiet;
  else if (s == "info") g_log_level = kInfo;
  else if (s == "debug") g_log_level = kDebug;
  else return false;
  return true;
}

void log_at(int level, const char* fmt, ...) {
  if (g_log_level < level) return;
  va_list args;
  va_start(args, fmt);
  std::vprintf(fmt, args);
  va_end(args);
  std::printf("\n");
}

#define LOG_INFO(...) log_at(kInfo, __VA_ARGS__)
#define LOG_DEBUG(...) log_at(kDebug, __VA_ARGS__)

// Timing lines start with '#' so two runs stay comparable after dropping them.
class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  void report(const char* name) const {
    if (g_log_level >= kInfo) std::printf("# %s: %.2f s\n", name, seconds());
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Shortest round-trip decimal form, so logs are bit-stable across runs.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + path.string());
  return text;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

// Expands `--config FILE` into --key=value tokens. The file is flat key=value
// text mirroring the flag names; keys already given on the command line keep
// their explicit values.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) file = args[i].substr(9);
  }
  if (file.empty()) return args;

  std::vector<std::string> given;
  for (const auto& a : args) {
    if (a.rfind("--", 0) != 0) continue;
    given.push_back(a.substr(0, a.find('=')));
  }

  std::istringstream in(read_text_file(file));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("config " + file + " line " + std::to_string(line_no) +
                            ": expected key=value");
    const std::string key = "--" + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(given.begin(), given.end(), key) != given.end()) continue;
    args.push_back(key + "=" + value);
  }
  return args;
}

struct SynthOptions {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t size = 96;
  std::string out;
  std::uint64_t seed = 0;
};

void run_synth(const SynthOptions& opt) {
  Stopwatch sw;
  const DatasetLayout layout =
      generate_dataset(opt.out, opt.positives, opt.negatives, opt.size, opt.seed);
  LOG_INFO("wrote %zu sites to %s", layout.site_ids.size(), opt.out.c_str());
  sw.report("synth");
}

struct PrepareOptions {
  std::string catalog;
  std::string scenes;
  std::size_t tile = 64;
  std::size_t tiles_per_site = 1;
  std::string out;
  std::uint64_t seed = 0;
};

// One site directory of co-registered scenes, already reduced to model bands.
struct SiteScenes {
  std::string name;
  std::vector<RasterScene> scenes;  // ascending timestamp
};

std::vector<SiteScenes> load_scene_tree(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("scene directory " + root.string() + " not found");
  std::vector<SiteScenes> sites;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".lsrs")
        files.push_back(entry.path());
    }
    if (files.empty()) continue;
    std::sort(files.begin(), files.end());
    SiteScenes site;
    site.name = dir.filename().string();
    for (const auto& f : files)
      site.scenes.push_back(select_scene_bands(load_raster(f), kModelBands));
    std::stable_sort(site.scenes.begin(), site.scenes.end(),
                     [](const RasterScene& a, const RasterScene& b) {
                       return a.timestamp < b.timestamp;
                     });
    sites.push_back(std::move(site));
  }
  if (sites.empty())
    throw ValidationError("scene directory " + root.string() + " has no site subdirectories");
  return sites;
}

void run_prepare(const PrepareOptions& opt) {
  Stopwatch sw;
  const CatalogParseResult parsed = parse_catalog(read_text_file(opt.catalog));
  for (const auto& diag : parsed.diagnostics) {
    std::fprintf(stderr, "warning: catalog line %zu: %s\n", diag.line, diag.message.c_str());
  }
  std::map<std::string, const CatalogEntry*> by_name;
  for (const auto& entry : parsed.entries) by_name[entry.location_name] = &entry;

  const std::vector<SiteScenes> sites = load_scene_tree(opt.scenes);
  std::size_t matched = 0;
  std::vector<TilePair> pairs;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const SiteScenes& site = sites[s];
    const std::uint64_t site_seed = derive_seed(opt.seed, s);
    const auto it = by_name.find(site.name);
    if (it == by_name.end()) {
      // No catalog row: a background site, usable for negatives only.
      auto negs = build_negative_pairs(site.scenes, opt.tile, opt.tiles_per_site,
                                       derive_seed(site_seed, 0x4E), site.name);
      pairs.insert(pairs.end(), std::make_move_iterator(negs.begin()),
                   std::make_move_iterator(negs.end()));
      continue;
    }
    ++matched;
    const CatalogEntry& entry = *it->second;
    const std::int64_t event_ts = days_from_civil(entry.event_date) * 86400;
    const RasterScene* before = nullptr;
    const RasterScene* after = nullptr;
    std::vector<RasterScene> pre_event;
    for (const auto& scene : site.scenes) {
      if (scene.timestamp < event_ts) {
        before = &scene;
        pre_event.push_back(scene);
      } else if (!after) {
        after = &scene;
      }
    }
    if (!before || !after)
      throw ValidationError("site " + site.name + " lacks scenes on both sides of the event date");
    const PixelRect bbox = bbox_from_catalog(entry, *after);
    for (std::size_t t = 0; t < opt.tiles_per_site; ++t) {
      pairs.push_back(
          sample_window(*before, *after, bbox, opt.tile, derive_seed(site_seed, t), site.name));
    }
    if (pre_event.size() >= 2) {
      auto negs = build_negative_pairs(pre_event, opt.tile, opt.tiles_per_site,
                                       derive_seed(site_seed, 0x4E), site.name);
      pairs.insert(pairs.end(), std::make_move_iterator(negs.begin()),
                   std::make_move_iterator(negs.end()));
    }
  }
  if (pairs.empty()) throw ValidationError("prepare produced no pairs");
  std::size_t n_pos = 0;
  for (const auto& p : pairs) n_pos += (std::size_t)(p.label == 1);
  save_pair_dataset(opt.out, pairs);
  LOG_INFO("prepared %zu pairs (%zu positive, %zu negative) from %zu sites (%zu in catalog)",
           pairs.size(), n_pos, pairs.size() - n_pos, sites.size(), matched);
  sw.report("prepare");
}

struct TrainOptions {
  std::string data;
  std::string eval_data;
  std::string out;
  std::string metrics;
  TrainConfig cfg;
  std::uint64_t seed = 0;
};

void print_records_debug(std::span<const MetricsRecord> records) {
  for (const auto& r : records) {
    LOG_DEBUG("epoch %zu loss %s train %s eval %s", r.epoch, fmt_double(r.train_loss).c_str(),
              fmt_double(r.train_bal_acc).c_str(), fmt_double(r.eval_bal_acc).c_str());
  }
}

void run_train(TrainOptions opt) {
  Stopwatch sw;
  const std::vector<TilePair> pairs = load_pair_dataset(opt.data);
  if (pairs.empty()) throw ValidationError("pair dataset " + opt.data + " is empty");
  const std::vector<TilePair> eval_pairs =
      opt.eval_data.empty() ? pairs : load_pair_dataset(opt.eval_data);
  NetworkConfig net_cfg = NetworkConfig::defaults(pairs[0].before.width);
  net_cfg.init_seed = derive_seed(opt.seed, 0x171);
  opt.cfg.master_seed = opt.seed;
  Network<float> net(net_cfg);
  const std::vector<MetricsRecord> records = train(net, pairs, eval_pairs, opt.cfg);
  save_network(net, opt.out);
  if (!opt.metrics.empty()) write_metrics_csv(opt.metrics, records);
  print_records_debug(records);
  const MetricsRecord& last = records.back();
  LOG_INFO("trained %zu epochs on %zu pairs: train_bal_acc %s eval_bal_acc %s", records.size(),
           pairs.size(), fmt_double(last.train_bal_acc).c_str(),
           fmt_double(last.eval_bal_acc).c_str());
  LOG_INFO("checkpoint written to %s", opt.out.c_str());
  sw.report("train");
}

struct CvOptions {
  std::string data;
  std::string metrics;
  std::size_t tile = 64;
  std::size_t jobs = 1;
  TrainConfig cfg;
  std::uint64_t seed = 0;
};

void run_cv(CvOptions opt) {
  Stopwatch sw;
  const std::vector<SiteData> sites = load_sites(opt.data);
  NetworkConfig net_cfg = NetworkConfig::defaults(opt.tile);
  opt.cfg.master_seed = opt.seed;
  const CrossValResult result = cross_validate(sites, net_cfg, opt.cfg, opt.jobs);
  for (const auto& fold : result.folds) {
    print_records_debug(fold.metrics);
    std::printf("fold %zu: %s\n", fold.fold, fmt_double(fold.score).c_str());
  }
  std::printf("mean: %s\n", fmt_double(result.mean_score).c_str());
  if (!opt.metrics.empty()) write_metrics_csv(opt.metrics, result);
  sw.report("cv");
}

struct EvalOptions {
  std::string checkpoint;
  std::string data;
};

void run_eval(const EvalOptions& opt) {
  Stopwatch sw;
  const Network<float> net = load_network<float>(opt.checkpoint);
  const std::vector<TilePair> pairs = load_pair_dataset(opt.data);
  const ConfusionCounts counts = evaluate(net, pairs);
  std::printf("tp %zu fp %zu tn %zu fn %zu\n", counts.tp, counts.fp, counts.tn, counts.fn);
  std::printf("balanced_accuracy %s\n", fmt_double(balanced_accuracy(counts)).c_str());
  sw.report("eval");
}

struct PredictOptions {
  std::string checkpoint;
  std::string before;
  std::string after;
};

void run_predict(const PredictOptions& opt) {
  const Network<float> net = load_network<float>(opt.checkpoint);
  TilePair pair;
  const RasterScene before = load_raster(opt.before);
  const RasterScene after = load_raster(opt.after);
  pair.before = select_bands(before, kModelBands);
  pair.after = select_bands(after, kModelBands);
  pair.before_timestamp = before.timestamp;
  pair.after_timestamp = after.timestamp;
  pair.source_site = "cli";
  const Prediction pred = net.predict(pair);
  std::printf("label=%d p=%s\n", pred.label, fmt_double(pred.probability).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  if (!read_log_level_env()) {
    std::fprintf(stderr, "error: usage: LSW_LOG must be quiet, info or debug\n");
    return 1;
  }

  CLI::App app{"landslide detection from bitemporal satellite tiles", "lsw"};
  app.require_subcommand(1);

  const TrainConfig train_defaults;
  std::string config_file;

  SynthOptions synth_opt;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic site dataset");
  synth_cmd->add_option("--config", config_file, "flat key=value file; explicit flags win");
  synth_cmd->add_option("--positives", synth_opt.positives, "sites with a landslide")->required();
  synth_cmd->add_option("--negatives", synth_opt.negatives, "sites without a landslide")
      ->required();
  synth_cmd->add_option("--size", synth_opt.size, "scene edge in pixels")->capture_default_str();
  synth_cmd->add_option("--out", synth_opt.out, "output dataset directory")->required();
  synth_cmd->add_option("--seed", synth_opt.seed, "master seed")->capture_default_str();
  synth_cmd->callback([&] { run_synth(synth_opt); });

  PrepareOptions prep_opt;
  CLI::App* prep_cmd = app.add_subcommand("prepare", "cut tile pairs from catalog and scenes");
  prep_cmd->add_option("--config", config_file, "flat key=value file; explicit flags win");
  prep_cmd->add_option("--catalog", prep_opt.catalog, "catalog csv file")->required();
  prep_cmd->add_option("--scenes", prep_opt.scenes, "directory of per-site scene directories")
      ->required();
  prep_cmd->add_option("--tile", prep_opt.tile, "tile edge in pixels")->capture_default_str();
  prep_cmd->add_option("--tiles-per-site", prep_opt.tiles_per_site, "window draws per site")
      ->capture_default_str();
  prep_cmd->add_option("--out", prep_opt.out, "output pair directory")->required();
  prep_cmd->add_option("--seed", prep_opt.seed, "master seed")->capture_default_str();
  prep_cmd->callback([&] { run_prepare(prep_opt); });

  TrainOptions train_opt;
  train_opt.cfg = train_defaults;
  CLI::App* train_cmd = app.add_subcommand("train", "train on a prepared pair dataset");
  train_cmd->add_option("--config", config_file, "flat key=value file; explicit flags win");
  train_cmd->add_option("--data", train_opt.data, "pair dataset directory")->required();
  train_cmd->add_option("--eval-data", train_opt.eval_data,
                        "pair dataset used for the eval column (defaults to --data)");
  train_cmd->add_option("--epochs", train_opt.cfg.epochs, "training epochs")
      ->capture_default_str()
      ->check(CLI::Range((std::size_t)1, std::numeric_limits<std::size_t>::max()));
  train_cmd->add_option("--batch-size", train_opt.cfg.batch_size, "examples per optimizer step")
      ->capture_default_str();
  train_cmd->add_option("--lr", train_opt.cfg.learning_rate, "adam learning rate")
      ->capture_default_str();
  train_cmd->add_flag("--augment,!--no-augment", train_opt.cfg.augment,
                      "random dihedral transform per example per epoch");
  train_cmd->add_option("--out", train_opt.out, "checkpoint file")->required();
  train_cmd->add_option("--metrics", train_opt.metrics, "metrics csv file");
  train_cmd->add_option("--seed", train_opt.seed, "master seed")->capture_default_str();
  train_cmd->callback([&] { run_train(train_opt); });

  CvOptions cv_opt;
  cv_opt.cfg = train_defaults;
  CLI::App* cv_cmd = app.add_subcommand("cv", "grouped k-fold cross-validation on a site dataset");
  cv_cmd->add_option("--config", config_file, "flat key=value file; explicit flags win");
  cv_cmd->add_option("--data", cv_opt.data, "site dataset directory")->required();
  cv_cmd->add_option("--folds", cv_opt.cfg.folds, "number of folds")->capture_default_str();
  cv_cmd->add_option("--epochs", cv_opt.cfg.epochs, "training epochs per fold")
      ->capture_default_str()
      ->check(CLI::Range((std::size_t)1, std::numeric_limits<std::size_t>::max()));
  cv_cmd->add_option("--batch-size", cv_opt.cfg.batch_size, "examples per optimizer step")
      ->capture_default_str();
  cv_cmd->add_option("--lr", cv_opt.cfg.learning_rate, "adam learning rate")
      ->capture_default_str();
  cv_cmd->add_option("--tile", cv_opt.tile, "tile edge in pixels")->capture_default_str();
  cv_cmd->add_option("--tiles-per-site", cv_opt.cfg.tiles_per_site, "window draws per site")
      ->capture_default_str();
  cv_cmd->add_flag("--augment,!--no-augment", cv_opt.cfg.augment,
                   "random dihedral transform per example per epoch");
  cv_cmd->add_option("--jobs", cv_opt.jobs, "folds trained in parallel")->capture_default_str();
  cv_cmd->add_option("--metrics", cv_opt.metrics, "metrics csv file");
  cv_cmd->add_option("--seed", cv_opt.seed, "master seed")->capture_default_str();
  cv_cmd->callback([&] { run_cv(cv_opt); });

  EvalOptions eval_opt;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a pair dataset");
  eval_cmd->add_option("--config", config_file, "flat key=value file; explicit flags win");
  eval_cmd->add_option("--checkpoint", eval_opt.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_opt.data, "pair dataset directory")->required();
  eval_cmd->callback([&] { run_eval(eval_opt); });

  PredictOptions pred_opt;
  CLI::App* pred_cmd = app.add_subcommand("predict", "classify one before/after tile pair");
  pred_cmd->add_option("--config", config_file, "flat key=value file; explicit flags win");
  pred_cmd->add_option("--checkpoint", pred_opt.checkpoint, "checkpoint file")->required();
  pred_cmd->add_option("--before", pred_opt.before, "before tile (.lsrs)")->required();
  pred_cmd->add_option("--after", pred_opt.after, "after tile (.lsrs)")->required();
  pred_cmd->callback([&] { run_predict(pred_opt); });

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11's vector overload pops from the back
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: numeric: %s\n", e.what());
    return 3;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: validation: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: io: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 3;
  }
  return 0;
}
