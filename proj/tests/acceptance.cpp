// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "orient.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace fs = std::filesystem;
using namespace orient;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ImageBuffer random_image(Rng& rng, int w, int h) {
  ImageBuffer img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
  return img;
}

// 1. Tokens per crop.
Outcome tokens() {
  const int full = EncoderConfig::full_scale(24).tokens();
  const int desk = EncoderConfig::desk().tokens();
  const auto pe = ModelParams<float>(EncoderConfig::full_scale(1), HeadMode::single_layer);
  ImageBuffer crop(336, 336, kWhite);
  const auto embedded = patch_embed(crop, pe.encoder);
  const bool ok = full == 577 && desk == 65 && embedded.rows() == 577 && embedded.cols() == 1024;
  return {ok, "full scale " + std::to_string(full) + " (embedded " + std::to_string(embedded.rows()) + "x" +
                  std::to_string(embedded.cols()) + "), desk " + std::to_string(desk)};
}

// 2. Tiling fuzz.
Outcome tiling() {
  Rng rng = derive_rng(2024, "acceptance-tiling");
  std::size_t bad = 0;
  int max_tiles_seen = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int w = uniform_int(rng, 1, 8000);
    const int h = uniform_int(rng, 1, 8000);
    const auto plan = plan_tiling(w, h);
    max_tiles_seen = std::max(max_tiles_seen, plan.tiles());
    bool ok = plan.tiles() <= kMaxTiles && plan.crop_count() == plan.tiles() + 1 && plan == plan_tiling(w, h);
    ok = ok && plan.scaled_w >= 1 && plan.scaled_h >= 1 && plan.scaled_w <= plan.canvas_w() &&
         plan.scaled_h <= plan.canvas_h();
    const auto rects = tile_rects(plan);
    long long area = 0;
    for (std::size_t i = 0; i < rects.size() && ok; ++i) {
      const auto& a = rects[i];
      ok = a.w == kFullTilePx && a.h == kFullTilePx && a.x >= 0 && a.y >= 0 && a.x + a.w <= plan.canvas_w() &&
           a.y + a.h <= plan.canvas_h();
      area += static_cast<long long>(a.w) * a.h;
      for (std::size_t j = 0; j < i && ok; ++j) {
        const auto& b = rects[j];
        const bool overlap = a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
        ok = !overlap;
      }
    }
    // Disjoint rectangles inside the canvas whose areas add up to it cover it.
    ok = ok && rects.size() == static_cast<std::size_t>(plan.tiles()) &&
         area == static_cast<long long>(plan.canvas_w()) * plan.canvas_h();
    bad += !ok;
  }

  // Pixel-level check on real crops: tiles put back in place rebuild the canvas.
  std::size_t bad_pixels = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto img = random_image(rng, uniform_int(rng, 1, 700), uniform_int(rng, 1, 700));
    const auto plan = plan_tiling(img.width(), img.height());
    const auto crops = extract_crops(img, plan);
    const auto canvas =
        pad_to(resize_bilinear(img, plan.scaled_w, plan.scaled_h), plan.canvas_w(), plan.canvas_h(), kWhite);
    ImageBuffer rebuilt(plan.canvas_w(), plan.canvas_h(), Rgb{0, 0, 0});
    std::vector<std::uint8_t> hits(static_cast<std::size_t>(plan.canvas_w()) * plan.canvas_h(), 0);
    const int T = plan.tile_px;
    for (int i = 0; i < plan.tiles(); ++i) {
      const auto& tile = crops[static_cast<std::size_t>(i)];
      if (tile.width() != T || tile.height() != T) {
        ++bad_pixels;
        continue;
      }
      const int r0 = (i / plan.cols) * T;
      const int c0 = (i % plan.cols) * T;
      for (int r = 0; r < T; ++r) {
        for (int c = 0; c < T; ++c) {
          rebuilt.set_pixel(r0 + r, c0 + c, tile.pixel(r, c));
          ++hits[static_cast<std::size_t>(r0 + r) * plan.canvas_w() + c0 + c];
        }
      }
    }
    bad_pixels += static_cast<std::size_t>(std::count_if(hits.begin(), hits.end(), [](auto v) { return v != 1; }));
    if (!(rebuilt == canvas) || crops.back().width() != T || crops.back().height() != T) ++bad_pixels;
  }
  return {bad == 0 && bad_pixels == 0, "10000 plans, " + std::to_string(bad) + " violations, max tiles " +
                                           std::to_string(max_tiles_seen) + "; 150 pixel reassemblies, " +
                                           std::to_string(bad_pixels) + " mismatches"};
}

// 3. Rotation group and oracle correction.
Outcome rotation_group() {
  Rng rng = derive_rng(7, "acceptance-rotation");
  const OracleClassifier oracle;
  std::size_t bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto img = random_image(rng, uniform_int(rng, 1, 97), uniform_int(rng, 1, 97));
    for (int k = 0; k < 4; ++k) {
      if (!(rotate_quarter(rotate_quarter(img, k), (4 - k) % 4) == img)) ++bad;
    }
    for (const auto cls : RotationClass::all()) {
      SampleRecord rec;
      rec.id = "r" + std::to_string(i);
      rec.rotation_class = cls;
      const auto fixed = correct_image(oracle, apply_rotation_class(img, cls), &rec);
      if (!(fixed.image == img) || fixed.predicted != cls) ++bad;
    }
  }
  return {bad == 0, "100 images x 4 turns, 400 oracle corrections, " + std::to_string(bad) + " mismatches"};
}

// 4. Gradient fidelity.
Outcome gradients() {
  const auto cfg = EncoderConfig::tiny();
  Rng rng = derive_rng(4, "acceptance-grad");
  const auto img = random_image(rng, 28, 56);
  const PreparedSample sample{crops_for(img, CroppingMode::dynamic, cfg.tile_px, kMaxTiles),
                              RotationClass::from_label(2)};
  ModelParams<double> params(cfg, HeadMode::multi_layer);
  params.init(rng);
  const auto full = grad_check(params, sample, 1e-4);

  HeadParams<double> head(cfg.dim);
  head.init(rng);
  Vec<double> h(cfg.dim);
  for (int i = 0; i < cfg.dim; ++i) h(i) = uniform_real(rng, -2.0, 2.0);
  double head_err = 0;
  std::size_t head_checked = 0;
  for (const auto label : RotationClass::all()) {
    const auto mask = dropout_mask<double>(cfg.dim, kHeadDropout, rng);
    const auto res = head_grad_check(head, h, mask, label, 1e-5);
    head_err = std::max(head_err, res.max_rel_error);
    head_checked += res.checked;
  }
  const bool ok = full.checked == params.parameter_count() && full.max_rel_error < 1e-4 && head_err < 1e-6;
  return {ok, "full model " + std::to_string(full.checked) + " entries over " + std::to_string(sample.crops.size()) +
                  " crops, max rel err " + fmt("%.3g", full.max_rel_error) + " (" + full.worst_tensor +
                  "); head " + std::to_string(head_checked) + " entries, max rel err " + fmt("%.3g", head_err)};
}

struct Corpus {
  std::vector<SampleRecord> train, val, test;
};

std::vector<LabeledImage> load_labeled(const std::vector<SampleRecord>& records) {
  std::vector<LabeledImage> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({read_image(r.image_file()), r.rotation_class});
  return out;
}

double test_accuracy(const Checkpoint& ckpt, const std::vector<LabeledImage>& test) {
  std::size_t correct = 0;
  for (const auto& s : test) correct += classify_rotation(ckpt, s.image) == s.label;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

struct Variant {
  std::string name;
  HeadMode head;
  CroppingMode cropping;
  double test_acc = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  double seconds = 0;
  std::optional<Checkpoint> ckpt;
};

class TrainingRuns {
 public:
  TrainingRuns(fs::path work, std::uint64_t seed) : work_(std::move(work)), seed_(seed) {}

  const Corpus& corpus() {
    if (corpus_) return *corpus_;
    // 5,600 pages split 5:1:1 per (class, language) stratum: 4,000 / 800 / 800.
    const auto uprights = synth_uprights(5600, seed_, SynthConfig{}, {"en", "hi"});
    const auto records = make_rotation_dataset(uprights, seed_, work_ / "train_corpus");
    write_manifest(work_ / "train_corpus" / "manifest.jsonl", records);
    auto parts = split(records, 5.0 / 7.0, 1.0 / 7.0, seed_);
    corpus_ = Corpus{std::move(parts.train), std::move(parts.val), std::move(parts.test)};
    test_images_ = load_labeled(corpus_->test);
    return *corpus_;
  }

  const std::vector<LabeledImage>& test_images() {
    corpus();
    return test_images_;
  }

  Variant& variant(const std::string& name, HeadMode head, CroppingMode cropping) {
    for (auto& v : variants_) {
      if (v.name == name) return v;
    }
    const auto& c = corpus();
    TrainConfig cfg;
    cfg.seed = seed_;
    cfg.head_mode = head;
    cfg.cropping_mode = cropping;
    cfg.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto start = std::chrono::steady_clock::now();
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochStats& s) {
      std::fprintf(stderr, "  [%s] epoch %d train_loss %.4f val_acc %.2f\n", name.c_str(), s.epoch, s.train_loss,
                   s.val_acc);
    };
    const auto result = train(load_labeled(c.train), load_labeled(c.val), cfg, hooks);
    Variant v;
    v.name = name;
    v.head = head;
    v.cropping = cropping;
    v.ckpt = make_checkpoint(result, cfg);
    v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.epochs_run = static_cast<int>(result.history.size());
    v.best_epoch = result.best_epoch;
    v.test_acc = test_accuracy(*v.ckpt, test_images());
    save_checkpoint(*v.ckpt, work_ / (name + ".ckpt"));
    std::fprintf(stderr, "  [%s] test accuracy %.2f after %d epochs (%.0f s)\n", name.c_str(), v.test_acc,
                 v.epochs_run, v.seconds);
    variants_.push_back(std::move(v));
    return variants_.back();
  }

  std::uint64_t seed() const { return seed_; }

 private:
  fs::path work_;
  std::uint64_t seed_;
  std::optional<Corpus> corpus_;
  std::vector<LabeledImage> test_images_;
  std::deque<Variant> variants_;  // stable references
};

// 5. Desk-scale training.
Outcome desk_training(TrainingRuns& runs) {
  const auto& c = runs.corpus();
  std::array<std::size_t, 4> per{};
  for (const auto& r : c.test) ++per[static_cast<std::size_t>(r.rotation_class.label())];
  const bool sizes = c.train.size() == 4000 && c.val.size() == 800 && c.test.size() == 800 &&
                     per == std::array<std::size_t, 4>{200, 200, 200, 200};

  TrainConfig untrained_cfg;
  untrained_cfg.seed = runs.seed();
  const Checkpoint untrained{init_model(untrained_cfg), untrained_cfg, 0.0, 0};
  const double chance = test_accuracy(untrained, runs.test_images());

  const auto& full = runs.variant("full", HeadMode::multi_layer, CroppingMode::dynamic);
  const bool ok = sizes && full.test_acc >= 90.0 && full.epochs_run <= 35 && chance >= 15.0 && chance <= 35.0;
  return {ok, "split " + std::to_string(c.train.size()) + "/" + std::to_string(c.val.size()) + "/" +
                  std::to_string(c.test.size()) + ", test acc " + fmt("%.2f", full.test_acc) + " (best epoch " +
                  std::to_string(full.best_epoch) + " of " + std::to_string(full.epochs_run) + ", " +
                  fmt("%.0f", full.seconds) + " s), untrained " + fmt("%.2f", chance)};
}

// 6. Ablation ordering.
Outcome ablations(TrainingRuns& runs) {
  const double full = runs.variant("full", HeadMode::multi_layer, CroppingMode::dynamic).test_acc;
  const double single = runs.variant("single_layer", HeadMode::single_layer, CroppingMode::dynamic).test_acc;
  const double global = runs.variant("global_only", HeadMode::multi_layer, CroppingMode::global_only).test_acc;
  const bool ok = full >= single - 1.0 && full >= global - 1.0;
  return {ok, "full " + fmt("%.2f", full) + ", single_layer " + fmt("%.2f", single) + ", global_only " +
                  fmt("%.2f", global)};
}

// Plain full-table edit distance.
std::size_t dp_levenshtein(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

// 7. Metric oracles.
Outcome metric_oracles() {
  Rng rng = derive_rng(77, "acceptance-metrics");
  const std::u32string alphabet = U"abcde कख";
  auto random_text = [&] {
    std::u32string s(static_cast<std::size_t>(uniform_int(rng, 0, 40)), U' ');
    for (auto& c : s) c = alphabet[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(alphabet.size()) - 1))];
    return s;
  };
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_text();
    const auto b = random_text();
    bad += levenshtein(a, b) != dp_levenshtein(a, b);
  }
  const auto kitten = levenshtein(std::string("kitten"), std::string("sitting"));
  const double w = wer("the cat sat", "the cat");
  const double sim = similarity_ratio("abcd", "bcde");
  Logits<double> zero = Logits<double>::Zero();
  const double ce = softmax_cross_entropy(zero, RotationClass::from_label(1)).loss;
  const bool ok = bad == 0 && kitten == 3 && w == 1.0 / 3.0 && sim == 0.75 && std::abs(ce - std::log(4.0)) <= 1e-9;
  return {ok, "1000 pairs, " + std::to_string(bad) + " disagreements; kitten/sitting " + std::to_string(kitten) +
                  ", wer " + fmt("%.17g", w) + ", similarity " + fmt("%.17g", sim) + ", uniform CE - ln4 " +
                  fmt("%.3g", ce - std::log(4.0))};
}

// 8. Orchestration with the mock engine and an oracle classifier.
Outcome orchestration(const fs::path& work, std::uint64_t seed) {
  auto run_once = [&](const std::string& dir, int workers) {
    const auto uprights = synth_uprights(400, seed, SynthConfig{}, {"en", "hi"});
    auto records = make_rotation_dataset(uprights, seed, work / dir);
    write_manifest(work / dir / "manifest.jsonl", records);
    records = load_manifest(work / dir / "manifest.jsonl");
    const OracleClassifier oracle;
    const MockOcrEngine engine(OcrEngineSpec{});
    BenchOptions opts;
    opts.workers = workers;
    opts.config_echo = {{"seed", seed}};
    const auto report = run_bench(records, oracle, engine, {Condition::ideal, Condition::rotated, Condition::corrected},
                                  opts);
    return std::make_pair(report, records);
  };
  const auto [report, records] = run_once("bench_a", 1);
  const auto [again, records_b] = run_once("bench_b", 3);

  const auto* ideal = report.find(Condition::ideal);
  const auto* rotated = report.find(Condition::rotated);
  const auto* corrected = report.find(Condition::corrected);
  const bool same = ideal && corrected && ideal->by_language == corrected->by_language &&
                    ideal->samples == corrected->samples && ideal->by_language.size() == 3;

  std::size_t long_docs = 0, zero_anls = 0, non_upright = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& s = rotated->samples[i];
    if (!records[i].rotation_class.is_upright()) ++non_upright;
    if (utf8_code_points(*records[i].gt_text).size() < 50 || records[i].rotation_class.is_upright()) continue;
    ++long_docs;
    if (!s.ok || !(s.values.at("anls_char") > 0.0)) ++zero_anls;
  }
  std::ostringstream a, b;
  a << to_json(report).dump(2);
  b << to_json(again).dump(2);
  std::ostringstream ca, cb;
  write_report_csv(ca, report);
  write_report_csv(cb, again);
  const bool identical = a.str() == b.str() && ca.str() == cb.str();
  const bool ok = same && long_docs > 0 && zero_anls == 0 && identical;
  return {ok, std::string("corrected == ideal: ") + (same ? "yes" : "no") + "; rotated non-upright docs >= 50 chars " +
                  std::to_string(long_docs) + ", with zero char distance " + std::to_string(zero_anls) +
                  "; report bytes identical across runs: " + (identical ? "yes" : "no")};
}

class StubServer {
 public:
  explicit StubServer(httplib::Server::Handler handler) {
    server_.Post("/ocr", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/ocr"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

// 9. Persistence and the HTTP client.
Outcome persistence(const fs::path& work, TrainingRuns* runs) {
  std::vector<std::string> notes;
  bool ok = true;

  // Checkpoint: the trained model when available, otherwise a fresh one.
  Checkpoint ckpt;
  if (runs) {
    ckpt = *runs->variant("full", HeadMode::multi_layer, CroppingMode::dynamic).ckpt;
  } else {
    TrainConfig cfg;
    ckpt = Checkpoint{init_model(cfg), cfg, 0.0, 0};
  }
  save_checkpoint(ckpt, work / "roundtrip.ckpt");
  const auto back = load_checkpoint(work / "roundtrip.ckpt");
  const auto ea = ckpt.params.encoder.tensors.flat();
  const auto eb = back.params.encoder.tensors.flat();
  const auto ha = ckpt.params.head_tensors().flat();
  const auto hb = back.params.head_tensors().flat();
  const bool ckpt_ok = ea.size() == eb.size() && ha.size() == hb.size() &&
                       std::memcmp(ea.data(), eb.data(), ea.size_bytes()) == 0 &&
                       std::memcmp(ha.data(), hb.data(), ha.size_bytes()) == 0 &&
                       back.train_config == ckpt.train_config && serialize_checkpoint(back) == serialize_checkpoint(ckpt);
  ok = ok && ckpt_ok;
  notes.push_back(std::string("checkpoint ") + (ckpt_ok ? "bit-exact" : "MISMATCH"));

  // Manifest.
  const auto uprights = synth_uprights(12, 5, SynthConfig{}, {"en", "hi"});
  const auto records = make_rotation_dataset(uprights, 5, work / "manifest_rt");
  write_manifest(work / "manifest_rt" / "a.jsonl", records);
  const auto loaded = load_manifest(work / "manifest_rt" / "a.jsonl");
  write_manifest(work / "manifest_rt" / "b.jsonl", loaded);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool manifest_ok = loaded == records && slurp(work / "manifest_rt" / "a.jsonl") ==
                                                    slurp(work / "manifest_rt" / "b.jsonl");
  ok = ok && manifest_ok;
  notes.push_back(std::string("manifest ") + (manifest_ok ? "round-trips" : "MISMATCH"));

  // HTTP client against scripted stubs.
  auto spec_for = [](const std::string& url) {
    OcrEngineSpec s;
    s.kind = EngineKind::http;
    s.endpoint = url;
    s.timeout_s = 5;
    s.backoff_s = 0.01;
    return s;
  };
  const ImageBuffer page = uprights[0].image;
  {
    std::string got_image;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
      got_image = nlohmann::json::parse(req.body).at("image").get<std::string>();
      res.set_content(R"({"text":"hello"})", "application/json");
    });
    const auto r = HttpOcrEngine(spec_for(server.url())).recognize_image(page);
    const auto png = encode_png(page);
    const bool good = r.text == "hello" && r.retries == 0 &&
                      got_image == httplib::detail::base64_encode(std::string(png.begin(), png.end()));
    ok = ok && good;
    notes.push_back(std::string("success ") + (good ? "ok" : "FAILED"));
  }
  {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
      if (calls++ < 2) {
        res.status = 503;
        return;
      }
      res.set_content(R"({"text":"third time"})", "application/json");
    });
    const auto r = HttpOcrEngine(spec_for(server.url())).recognize_image(page);
    const bool good = r.text == "third time" && r.retries == 2 && calls == 3;
    ok = ok && good;
    notes.push_back(std::string("retry-then-success ") + (good ? "ok" : "FAILED"));
  }
  {
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      res.set_content(R"({"text":"late"})", "application/json");
    });
    auto spec = spec_for(server.url());
    spec.timeout_s = 0.2;
    spec.max_retries = 1;
    const auto start = std::chrono::steady_clock::now();
    bool timed_out = false;
    try {
      HttpOcrEngine(spec).recognize_image(page);
    } catch (const OcrTimeoutError&) {
      timed_out = true;
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool good = timed_out && elapsed < 0.2 * 2 + 0.3;
    ok = ok && good;
    notes.push_back("timeout " + std::string(good ? "ok" : "FAILED") + " (" + fmt("%.2f", elapsed) + " s)");
  }
  {
    bool good = true;
    for (const char* body : {"not json", R"({"txt":"x"})", R"({"text":null})"}) {
      StubServer server([&](const httplib::Request&, httplib::Response& res) { res.set_content(body, "application/json"); });
      try {
        HttpOcrEngine(spec_for(server.url())).recognize_image(page);
        good = false;
      } catch (const OcrMalformedResponse&) {
      }
    }
    ok = ok && good;
    notes.push_back(std::string("malformed ") + (good ? "ok" : "FAILED"));
  }

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : ", ") + n;
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::string work_dir = (fs::temp_directory_path() / "orient-acceptance").string();
  std::uint64_t seed = 20240917;
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "Scratch directory (recreated)");
  app.add_option("--seed", seed, "Seed for corpora and training");
  app.add_option("--only", only, "Run just these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);

  TrainingRuns runs(work, seed);
  auto wants = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
  const bool trained = wants(5) || wants(6);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"token count", tokens},
      {"tiling invariants", tiling},
      {"rotation group", rotation_group},
      {"gradient fidelity", gradients},
      {"desk-scale training", [&] { return desk_training(runs); }},
      {"ablation ordering", [&] { return ablations(runs); }},
      {"metric oracles", metric_oracles},
      {"orchestration recovery", [&] { return orchestration(work, seed); }},
      {"persistence and interface", [&] { return persistence(work, trained ? &runs : nullptr); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!wants(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
