// orient: command-line front end for corpus generation, training,
// inference, correction, benchmarking and metric computation.
//
// Exit codes: 0 success, 2 input or configuration error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orient.hpp"
#include "orient/config_file.hpp"

namespace fs = std::filesystem;
using orient::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int verbose = 0;

  // synth
  std::size_t count = 0;
  std::string out;
  std::string synth_cfg_path;
  std::string languages = "en";

  // train
  std::string manifest;
  std::string history;
  std::string test_manifest;
  double train_frac = 0.8;
  double val_frac = 0.1;
  double lr = 0;
  int epochs = 0;
  int patience = -1;
  int batch_size = 0;
  int threads = 0;
  int max_tiles = 0;
  std::string head_mode;
  std::string cropping_mode;

  // classify / correct / bench
  std::string ckpt;
  std::string image;
  std::string in;
  bool oracle = false;
  std::string engine;
  std::string conditions = "ideal,rotated,corrected";
  std::string endpoint;
  std::string auth_env;
  double timeout = 0;
  int retries = -1;
  int workers = 0;

  // metrics
  std::string gt;
  std::string pred;
  std::string level = "char";
  std::string csv;
};

json load_file_config(const Options& o) {
  if (o.config_path.empty()) return json::object();
  json j = orient::read_config_file(o.config_path);
  if (!j.is_object()) throw orient::InputError("config file must hold a table/object");
  for (const auto& [k, v] : j.items()) {
    if (k != "seed" && k != "train" && k != "synth" && k != "engine") {
      throw orient::InputError("unknown top-level config key '" + k + "' (expected seed, train, synth, engine)");
    }
  }
  return j;
}

std::uint64_t effective_seed(const Options& o, const json& file) {
  if (o.seed_set) return o.seed;
  if (file.contains("seed")) {
    if (!file["seed"].is_number_integer()) throw orient::InputError("config key 'seed' must be an integer");
    return file["seed"].get<std::uint64_t>();
  }
  return 0;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw orient::InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void log(const Options& o, const std::string& msg) {
  if (o.verbose > 0) std::cerr << msg << '\n';
}

int cmd_synth(const Options& o) {
  if (o.count < 4) throw orient::InputError("need at least 4 samples");
  const json file = load_file_config(o);
  orient::SynthConfig cfg;
  if (file.contains("synth")) orient::apply_json(file["synth"], cfg);
  if (!o.synth_cfg_path.empty()) orient::apply_json(orient::read_config_file(o.synth_cfg_path), cfg);
  cfg.validate();
  const std::uint64_t seed = effective_seed(o, file);
  const auto languages = split_csv(o.languages);

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw orient::InputError("cannot create output directory " + dir.string());

  const auto uprights = orient::synth_uprights(o.count, seed, cfg, languages);
  const auto records = orient::make_rotation_dataset(uprights, seed, dir);
  orient::write_manifest(dir / "manifest.jsonl", records);
  write_json_file(dir / "config.json",
                  {{"command", "synth"}, {"seed", seed}, {"count", o.count}, {"languages", languages},
                   {"synth", orient::to_json(cfg)}});

  std::array<std::size_t, 4> per_class{};
  for (const auto& r : records) ++per_class[static_cast<std::size_t>(r.rotation_class.label())];
  std::cout << "wrote " << records.size() << " records to " << (dir / "manifest.jsonl").string() << " (per class "
            << per_class[0] << '/' << per_class[1] << '/' << per_class[2] << '/' << per_class[3] << ")\n";
  return kExitOk;
}

std::vector<orient::LabeledImage> load_images(const std::vector<orient::SampleRecord>& records) {
  std::vector<orient::LabeledImage> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({orient::read_image(r.image_file()), r.rotation_class});
  return out;
}

int cmd_train(const Options& o) {
  const json file = load_file_config(o);
  orient::TrainConfig cfg;
  if (file.contains("train")) orient::apply_json(file["train"], cfg);
  cfg.seed = effective_seed(o, file);
  if (o.lr > 0) cfg.learning_rate = o.lr;
  if (o.epochs > 0) cfg.max_epochs = o.epochs;
  if (o.patience >= 0) cfg.patience = o.patience;
  if (o.batch_size > 0) cfg.batch_size = o.batch_size;
  if (o.threads > 0) cfg.threads = o.threads;
  if (o.max_tiles > 0) cfg.max_tiles = o.max_tiles;
  if (!o.head_mode.empty()) cfg.head_mode = orient::parse_head_mode(o.head_mode);
  if (!o.cropping_mode.empty()) cfg.cropping_mode = orient::parse_cropping_mode(o.cropping_mode);
  cfg.validate();

  const auto records = orient::load_manifest(o.manifest);
  const auto parts = orient::split(records, o.train_frac, o.val_frac, cfg.seed);
  for (const auto& w : parts.warnings) std::cerr << "warning: " << w << '\n';
  std::array<std::size_t, 4> val_per_class{};
  for (const auto& r : parts.val) ++val_per_class[static_cast<std::size_t>(r.rotation_class.label())];
  for (std::size_t c = 0; c < 4; ++c) {
    if (val_per_class[c] < 2) {
      throw orient::InputError("validation split needs at least 2 samples of every class (class " +
                               std::to_string(c) + " has " + std::to_string(val_per_class[c]) + ")");
    }
  }
  if (!o.test_manifest.empty()) orient::write_manifest(o.test_manifest, parts.test);

  const json effective{{"command", "train"},
                       {"manifest", o.manifest},
                       {"train_frac", o.train_frac},
                       {"val_frac", o.val_frac},
                       {"train", orient::to_json(cfg)}};
  log(o, effective.dump());

  orient::TrainHooks hooks;
  hooks.on_epoch = [&](const orient::EpochStats& s) {
    std::cerr << "epoch " << s.epoch << " train_loss " << s.train_loss << " val_acc " << s.val_acc << '\n';
  };
  const auto result = orient::train(load_images(parts.train), load_images(parts.val), cfg, hooks);
  const fs::path ckpt_path(o.out);
  orient::save_checkpoint(orient::make_checkpoint(result, cfg), ckpt_path);

  const fs::path history = o.history.empty() ? fs::path(o.out + ".history.csv") : fs::path(o.history);
  std::ofstream hist(history, std::ios::binary);
  if (!hist) throw orient::InputError("cannot write " + history.string());
  orient::write_history_csv(hist, result.history);
  write_json_file(o.out + ".config.json", effective);

  std::printf("best_val_acc=%.2f best_epoch=%d epochs_run=%zu\n", result.best_val_acc, result.best_epoch,
              result.history.size());
  return kExitOk;
}

void print_label(orient::RotationClass c) { std::printf("label=%d angle=%d\n", c.label(), c.angle_deg()); }

int cmd_classify(const Options& o) {
  const auto ckpt = orient::load_checkpoint(o.ckpt);
  print_label(orient::classify_rotation(ckpt, orient::read_image(o.image)));
  return kExitOk;
}

int cmd_correct(const Options& o) {
  const auto ckpt = orient::load_checkpoint(o.ckpt);
  const auto fix = orient::correct_image(ckpt, orient::read_image(o.in));
  orient::write_png(fix.image, o.out);
  print_label(fix.predicted);
  return kExitOk;
}

orient::OcrEngineSpec engine_spec(const Options& o, const json& file) {
  orient::OcrEngineSpec spec;
  if (file.contains("engine")) {
    const json& e = file["engine"];
    if (!e.is_object()) throw orient::InputError("engine config must be a table/object");
    for (const auto& [k, v] : e.items()) {
      try {
        if (k == "kind") {
          spec.kind = orient::parse_engine_kind(v.get<std::string>());
        } else if (k == "endpoint") {
          spec.endpoint = v.get<std::string>();
        } else if (k == "auth_env") {
          spec.auth_env = v.get<std::string>();
        } else if (k == "prompt") {
          spec.prompt = v.get<std::string>();
        } else if (k == "timeout_s") {
          spec.timeout_s = v.get<double>();
        } else if (k == "max_retries") {
          spec.max_retries = v.get<int>();
        } else if (k == "backoff_s") {
          spec.backoff_s = v.get<double>();
        } else if (k == "corruption") {
          spec.corruption = v.get<std::array<double, 4>>();
        } else {
          throw orient::InputError("unknown engine config key '" + k + "'");
        }
      } catch (const json::exception&) {
        throw orient::InputError("engine config key '" + k + "' has the wrong type");
      }
    }
  }
  if (!o.engine.empty()) spec.kind = orient::parse_engine_kind(o.engine);
  if (!o.endpoint.empty()) spec.endpoint = o.endpoint;
  if (!o.auth_env.empty()) spec.auth_env = o.auth_env;
  if (o.timeout > 0) spec.timeout_s = o.timeout;
  if (o.retries >= 0) spec.max_retries = o.retries;
  spec.validate();
  return spec;
}

int cmd_bench(const Options& o) {
  const json file = load_file_config(o);
  const auto spec = engine_spec(o, file);
  const auto conditions = orient::parse_conditions(o.conditions);
  if (o.oracle == !o.ckpt.empty()) throw orient::InputError("bench needs exactly one of --ckpt or --oracle");
  const auto records = orient::load_manifest(o.manifest);

  std::unique_ptr<orient::RotationClassifier> classifier;
  if (o.oracle) {
    classifier = std::make_unique<orient::OracleClassifier>();
  } else {
    classifier = std::make_unique<orient::ModelClassifier>(orient::load_checkpoint(o.ckpt));
  }
  const auto engine = orient::make_engine(spec);

  orient::BenchOptions opts;
  opts.workers = o.workers > 0 ? o.workers : 1;
  opts.config_echo = {{"manifest", o.manifest},
                      {"checkpoint", o.oracle ? std::string("oracle") : o.ckpt},
                      {"seed", effective_seed(o, file)},
                      {"prompt", spec.prompt}};
  const auto report = orient::run_bench(records, *classifier, *engine, conditions, opts);

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw orient::InputError("cannot create output directory " + dir.string());
  write_json_file(dir / "report.json", orient::to_json(report));
  std::ofstream csv(dir / "report.csv", std::ios::binary);
  if (!csv) throw orient::InputError("cannot write " + (dir / "report.csv").string());
  orient::write_report_csv(csv, report);

  int status = kExitOk;
  for (const auto& cr : report.conditions) {
    const auto& all = cr.by_language.at("all");
    std::printf("%-9s samples=%zu excluded=%zu", orient::to_string(cr.condition), all.samples, all.excluded);
    for (const char* m : {"anls_char", "anls_word", "cer", "wer"}) {
      const auto it = all.metrics.find(m);
      if (it != all.metrics.end()) std::printf(" %s=%.2f", m, it->second);
    }
    std::printf("\n");
    if (cr.failed_wholesale()) {
      std::cerr << "condition " << orient::to_string(cr.condition) << " failed for every sample\n";
      status = kExitRuntime;
    }
  }
  if (report.confusion) std::printf("rotation_accuracy=%.2f\n", report.confusion->accuracy);
  return status;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw orient::InputError("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int cmd_metrics(const Options& o) {
  const auto level = orient::parse_level(o.level);
  const auto gt = read_lines(o.gt);
  const auto pred = read_lines(o.pred);
  if (gt.size() != pred.size()) {
    throw orient::InputError("line count mismatch: " + std::to_string(gt.size()) + " ground-truth lines vs " +
                             std::to_string(pred.size()) + " predicted lines");
  }
  if (gt.empty()) throw orient::InputError("no lines to score");

  std::ostringstream out;
  out.precision(10);
  out << "line,level,anls,wer,cer,similarity\n";
  double sums[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    double v[4];
    try {
      v[0] = orient::normalized_lev_distance(gt[i], pred[i], level);
      v[1] = orient::wer(gt[i], pred[i]);
      v[2] = orient::cer(gt[i], pred[i]);
      v[3] = orient::similarity_ratio(gt[i], pred[i], level);
    } catch (const orient::InputError& e) {
      throw orient::InputError("line " + std::to_string(i + 1) + ": " + e.what());
    }
    out << (i + 1) << ',' << orient::to_string(level);
    for (int k = 0; k < 4; ++k) {
      out << ',' << v[k];
      sums[k] += v[k];
    }
    out << '\n';
  }
  out << "mean," << orient::to_string(level);
  for (double s : sums) out << ',' << s / static_cast<double>(gt.size());
  out << '\n';

  std::cout << out.str();
  if (!o.csv.empty()) {
    std::ofstream f(o.csv, std::ios::binary);
    if (!f) throw orient::InputError("cannot write " + o.csv);
    f << out.str();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document rotation detection, correction and OCR benchmarking"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "Config file (TOML, or JSON by .json extension)");
  app.add_option("--seed", o.seed, "Seed for all randomness")->each([&](const std::string&) { o.seed_set = true; });
  app.add_flag("-v,--verbose", o.verbose, "Log the effective config and progress");

  auto* synth = app.add_subcommand("synth", "Generate a rotation-balanced synthetic corpus");
  synth->add_option("--count", o.count, "Number of documents")->required();
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--cfg", o.synth_cfg_path, "Synth config file (overrides [synth] of --config)");
  synth->add_option("--languages", o.languages, "Comma-separated language codes, cycled over documents");

  auto* train = app.add_subcommand("train", "Train a rotation classifier");
  train->add_option("--manifest", o.manifest, "Corpus manifest (JSONL)")->required();
  train->add_option("--out", o.out, "Checkpoint path")->required();
  train->add_option("--history", o.history, "History CSV path (default <out>.history.csv)");
  train->add_option("--test-manifest", o.test_manifest, "Write the held-out test split here");
  train->add_option("--train-frac", o.train_frac, "Training fraction of each stratum");
  train->add_option("--val-frac", o.val_frac, "Validation fraction of each stratum");
  train->add_option("--lr", o.lr, "Learning rate");
  train->add_option("--epochs", o.epochs, "Maximum epochs");
  train->add_option("--patience", o.patience, "Early-stopping patience in epochs");
  train->add_option("--batch-size", o.batch_size, "Mini-batch size");
  train->add_option("--threads", o.threads, "Worker threads per batch");
  train->add_option("--max-tiles", o.max_tiles, "Local tile cap for dynamic cropping");
  train->add_option("--head-mode", o.head_mode, "multi_layer or single_layer");
  train->add_option("--cropping-mode", o.cropping_mode, "dynamic or global_only");

  auto* classify = app.add_subcommand("classify", "Predict the rotation class of an image");
  classify->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  classify->add_option("--image", o.image, "Input image (PNG or JPEG)")->required();

  auto* correct = app.add_subcommand("correct", "Rotate an image upright");
  correct->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  correct->add_option("--in", o.in, "Input image (PNG or JPEG)")->required();
  correct->add_option("--out", o.out, "Output PNG")->required();

  auto* bench = app.add_subcommand("bench", "Run the ideal/rotated/corrected OCR benchmark");
  bench->add_option("--manifest", o.manifest, "Corpus manifest with gt_text")->required();
  bench->add_option("--ckpt", o.ckpt, "Checkpoint for the corrected condition");
  bench->add_flag("--oracle", o.oracle, "Use ground-truth labels instead of a model");
  bench->add_option("--engine", o.engine, "mock or http");
  bench->add_option("--conditions", o.conditions, "Comma-separated subset of ideal,rotated,corrected");
  bench->add_option("--out", o.out, "Report directory")->required();
  bench->add_option("--endpoint", o.endpoint, "HTTP OCR endpoint URL");
  bench->add_option("--auth-env", o.auth_env, "Env var holding the bearer token");
  bench->add_option("--timeout", o.timeout, "Per-attempt timeout in seconds");
  bench->add_option("--retries", o.retries, "Maximum retries per request");
  bench->add_option("--workers", o.workers, "Samples processed concurrently");

  auto* metrics = app.add_subcommand("metrics", "Score predicted text lines against ground truth");
  metrics->add_option("--gt", o.gt, "Ground-truth text file, one sample per line")->required();
  metrics->add_option("--pred", o.pred, "Predicted text file, aligned with --gt")->required();
  metrics->add_option("--level", o.level, "word or char");
  metrics->add_option("--csv", o.csv, "Also write the table to this CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*classify) return cmd_classify(o);
    if (*correct) return cmd_correct(o);
    if (*bench) return cmd_bench(o);
    if (*metrics) return cmd_metrics(o);
  } catch (const orient::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInput;
}
