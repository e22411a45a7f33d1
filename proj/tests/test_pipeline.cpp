#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <sstream>
#include <thread>

#include "orient/bench.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include "support.hpp"

using namespace orient;
using orient::testing::random_image;
using orient::testing::TempDir;

namespace {

SampleRecord text_record(const std::string& id, std::string text) {
  SampleRecord r;
  r.id = id;
  r.gt_text = std::move(text);
  return r;
}

std::size_t differing(const std::u32string& a, const std::u32string& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) n += a[i] != b[i];
  return n;
}

// Local scripted HTTP server on an ephemeral port.
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

OcrEngineSpec http_spec(const std::string& url) {
  OcrEngineSpec s;
  s.kind = EngineKind::http;
  s.endpoint = url;
  s.timeout_s = 5;
  s.backoff_s = 0.01;
  return s;
}

class FixedClassifier final : public RotationClassifier {
 public:
  explicit FixedClassifier(RotationClass c) : c_(c) {}
  RotationClass classify(const ImageBuffer&, const SampleRecord*) const override { return c_; }
  std::string name() const override { return "fixed"; }

 private:
  RotationClass c_;
};

// Oracle except for one record, which is read as upright.
class OneMistakeClassifier final : public RotationClassifier {
 public:
  explicit OneMistakeClassifier(std::string id) : id_(std::move(id)) {}
  RotationClass classify(const ImageBuffer&, const SampleRecord* r) const override {
    if (r->id == id_) return RotationClass::from_label(r->rotation_class.label() == 1 ? 0 : 1);
    return r->rotation_class;
  }
  std::string name() const override { return "one-mistake"; }

 private:
  std::string id_;
};

class FailingEngine final : public OcrEngine {
 public:
  explicit FailingEngine(std::set<std::string> bad) : bad_(std::move(bad)) {}
  OcrResult recognize(const SampleRecord& r, const ImageBuffer& img, RotationClass presented) const override {
    if (bad_.empty() || bad_.count(r.id)) throw OcrStatusError(503, "unavailable");
    return MockOcrEngine({}).recognize(r, img, presented);
  }
  nlohmann::json describe() const override { return {{"kind", "failing"}}; }

 private:
  std::set<std::string> bad_;
};

// Small corpus on disk shared by the bench tests.
class BenchCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("bench");
    records_ = make_rotation_dataset(synth_uprights(24, 5, SynthConfig{}, {"en", "hi"}), 5, dir_->path());
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static TempDir* dir_;
  static std::vector<SampleRecord> records_;
};
TempDir* BenchCorpus::dir_ = nullptr;
std::vector<SampleRecord> BenchCorpus::records_;

const std::vector<Condition> kAll{Condition::ideal, Condition::rotated, Condition::corrected};

}  // namespace

TEST(MockOcr, UprightIsExactAndOthersAreCorrupted) {
  const auto r = text_record("a", "the quick brown fox jumps over the lazy dog");
  const OcrEngineSpec spec;
  EXPECT_EQ(mock_ocr(r, RotationClass::upright(), spec), *r.gt_text);
  for (int label : {0, 2, 3}) {
    const auto cls = RotationClass::from_label(label);
    const auto out = mock_ocr(r, cls, spec);
    EXPECT_EQ(out, mock_ocr(r, cls, spec));
    const auto cp = utf8_code_points(out);
    ASSERT_EQ(cp.size(), r.gt_text->size() + 10);
    EXPECT_EQ(cp.substr(cp.size() - 10), cp.substr(cp.size() - 20, 10));
  }
  EXPECT_NE(mock_ocr(r, RotationClass::from_label(0), spec), mock_ocr(r, RotationClass::from_label(2), spec));
  EXPECT_NE(mock_ocr(r, RotationClass::from_label(0), spec), mock_ocr(text_record("b", *r.gt_text), RotationClass::from_label(0), spec));
}

TEST(MockOcr, ShortTextRepeatsWholeText) {
  OcrEngineSpec spec;
  spec.corruption = {0, 0, 0, 0};
  EXPECT_EQ(mock_ocr(text_record("s", "abc"), RotationClass::from_label(3), spec), "abcabc");
  SampleRecord no_text;
  no_text.id = "n";
  EXPECT_THROW(mock_ocr(no_text, RotationClass::upright(), spec), InputError);
}

TEST(MockOcr, SubstitutionRateMatchesSpec) {
  Rng rng(1);
  std::string text;
  for (int i = 0; i < 10000; ++i) text += static_cast<char>('a' + uniform_int(rng, 0, 25));
  const auto gt = utf8_code_points(text);
  const OcrEngineSpec spec;
  for (auto [label, q] : {std::pair{0, 0.5}, std::pair{2, 0.5}, std::pair{3, 0.4}}) {
    const auto out = utf8_code_points(mock_ocr(text_record("long", text), RotationClass::from_label(label), spec));
    const double rate = static_cast<double>(differing(gt, out.substr(0, gt.size()))) / 10000.0;
    EXPECT_NEAR(rate, q, 0.05) << label;
  }
}

TEST(MockOcr, CountsCodePoints) {
  OcrEngineSpec spec;
  spec.corruption = {1, 0, 1, 1};
  const std::string dev = "\xe0\xa4\x95\xe0\xa4\x96\xe0\xa4\x97";  // three code points
  const auto out = utf8_code_points(mock_ocr(text_record("d", dev), RotationClass::from_label(0), spec));
  ASSERT_EQ(out.size(), 6u);
  for (int i = 0; i < 3; ++i) EXPECT_NE(mock_substitution_alphabet().find(out[static_cast<std::size_t>(i)]), std::u32string::npos);
}

TEST(EngineSpec, Validation) {
  OcrEngineSpec s;
  EXPECT_NO_THROW(s.validate());
  s.corruption[1] = 1.5;
  EXPECT_THROW(s.validate(), InputError);
  s = OcrEngineSpec{};
  s.kind = EngineKind::http;
  EXPECT_THROW(s.validate(), InputError);
  s.endpoint = "https://example.com/ocr";
  EXPECT_THROW(make_engine(s), InputError);
  EXPECT_EQ(parse_endpoint("http://h:1/a/b").path, "/a/b");
  EXPECT_EQ(parse_endpoint("http://h:1").scheme_host_port, "http://h:1");
  EXPECT_THROW(parse_endpoint("h:1/x"), InputError);
  EXPECT_EQ(parse_engine_kind("http"), EngineKind::http);
  EXPECT_THROW(parse_engine_kind("cloud"), InputError);
}

TEST(HttpOcr, SuccessSendsPromptImageAndToken) {
  std::string seen_prompt, seen_auth, seen_image;
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    seen_prompt = body.at("prompt");
    seen_image = body.at("image");
    seen_auth = req.get_header_value("Authorization");
    res.set_content(R"({"text":"hello\nworld"})", "application/json");
  });
  ::setenv("ORIENT_TEST_TOKEN", "s3cret", 1);
  auto spec = http_spec(server.url());
  spec.auth_env = "ORIENT_TEST_TOKEN";
  Rng rng(2);
  const auto img = random_image(rng, 9, 7);
  const auto res = HttpOcrEngine(spec).recognize_image(img);
  EXPECT_EQ(res.text, "hello\nworld");
  EXPECT_EQ(res.retries, 0);
  EXPECT_EQ(seen_prompt, kOcrPrompt);
  EXPECT_EQ(seen_auth, "Bearer s3cret");
  // The image travels as base64 PNG and decodes back to the same pixels.
  std::string raw;
  {
    static const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    unsigned buf = 0;
    int bits = 0;
    for (char c : seen_image) {
      if (c == '=') break;
      buf = (buf << 6) | static_cast<unsigned>(alphabet.find(c));
      bits += 6;
      if (bits >= 8) {
        bits -= 8;
        raw += static_cast<char>((buf >> bits) & 0xff);
      }
    }
  }
  EXPECT_EQ(decode_image(std::vector<std::uint8_t>(raw.begin(), raw.end())), img);

  ::unsetenv("ORIENT_TEST_TOKEN");
  EXPECT_THROW(HttpOcrEngine(spec).recognize_image(img), InputError);
}

TEST(HttpOcr, RetriesServerErrorsThenSucceeds) {
  std::atomic<int> calls{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ < 2) {
      res.status = 500;
      return;
    }
    res.set_content(R"({"text":"ok"})", "application/json");
  });
  const auto res = HttpOcrEngine(http_spec(server.url())).recognize_image(ImageBuffer(3, 3));
  EXPECT_EQ(res.text, "ok");
  EXPECT_EQ(res.retries, 2);
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpOcr, StatusErrors) {
  std::atomic<int> calls{0};
  int status = 500;
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = status;
  });
  try {
    HttpOcrEngine(http_spec(server.url())).recognize_image(ImageBuffer(3, 3));
    FAIL();
  } catch (const OcrStatusError& e) {
    EXPECT_EQ(e.status(), 500);
  }
  EXPECT_EQ(calls.load(), 3);

  calls = 0;
  status = 403;
  try {
    HttpOcrEngine(http_spec(server.url())).recognize_image(ImageBuffer(3, 3));
    FAIL();
  } catch (const OcrStatusError& e) {
    EXPECT_EQ(e.status(), 403);
  }
  EXPECT_EQ(calls.load(), 1);
}

TEST(HttpOcr, MalformedBody) {
  for (const char* body : {"not json", R"({"txt":"x"})", R"({"text":3})", "[]"}) {
    StubServer server([&](const httplib::Request&, httplib::Response& res) { res.set_content(body, "application/json"); });
    try {
      HttpOcrEngine(http_spec(server.url())).recognize_image(ImageBuffer(3, 3));
      FAIL() << body;
    } catch (const OcrMalformedResponse& e) {
      EXPECT_STREQ(e.what(), "malformed OCR response");
    }
  }
}

TEST(HttpOcr, TimeoutIsBounded) {
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(R"({"text":"late"})", "application/json");
  });
  auto spec = http_spec(server.url());
  spec.timeout_s = 0.2;
  spec.max_retries = 1;
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(HttpOcrEngine(spec).recognize_image(ImageBuffer(3, 3)), OcrTimeoutError);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(elapsed, 0.2 * 2 + 0.3);
}

TEST(HttpOcr, UnreachableEndpointIsAnEngineError) {
  // Nothing listens on port 1, so connections are refused.
  auto spec = http_spec("http://127.0.0.1:1/ocr");
  spec.max_retries = 1;
  EXPECT_THROW(HttpOcrEngine(spec).recognize_image(ImageBuffer(3, 3)), OcrError);
}

TEST(Confusion, Examples) {
  using P = std::pair<RotationClass, RotationClass>;
  auto c = [](int l) { return RotationClass::from_label(l); };
  const auto diag = confusion_and_accuracy({P{c(0), c(0)}, P{c(1), c(1)}, P{c(3), c(3)}});
  EXPECT_EQ(diag.accuracy, 100.0);
  EXPECT_EQ(diag.matrix[3][3], 1u);
  const auto wrong = confusion_and_accuracy({P{c(0), c(2)}, P{c(0), c(2)}, P{c(0), c(2)}});
  EXPECT_EQ(wrong.matrix[0][2], 3u);
  EXPECT_EQ(wrong.accuracy, 0.0);
  const auto mixed = confusion_and_accuracy({P{c(0), c(0)}, P{c(1), c(1)}, P{c(2), c(2)}, P{c(3), c(3)},
                                             P{c(0), c(0)}, P{c(1), c(1)}, P{c(2), c(0)}, P{c(3), c(1)}});
  EXPECT_EQ(mixed.accuracy, 75.0);
  EXPECT_EQ(mixed.total, 8u);
  for (std::size_t t = 0; t < 4; ++t) {
    std::size_t row = 0;
    for (auto v : mixed.matrix[t]) row += v;
    EXPECT_EQ(row, 2u);
  }
  EXPECT_THROW(confusion_and_accuracy({}), InputError);
}

TEST(Conditions, Parsing) {
  EXPECT_EQ(parse_conditions("corrected,ideal,ideal"), (std::vector<Condition>{Condition::ideal, Condition::corrected}));
  EXPECT_THROW(parse_conditions(""), InputError);
  EXPECT_THROW(parse_conditions("ideal,upside"), InputError);
}

TEST(CorrectImage, FullClassPredictionGrid) {
  Rng rng(3);
  const auto upright = random_image(rng, 7, 4);
  for (auto truth : RotationClass::all()) {
    const auto shown = apply_rotation_class(upright, truth);
    for (auto guess : RotationClass::all()) {
      const auto fix = correct_image(FixedClassifier(guess), shown);
      EXPECT_EQ(fix.predicted, guess);
      EXPECT_EQ(fix.image == upright, guess == truth) << truth.label() << "/" << guess.label();
      // What the OCR engine sees is the upright page at the residual class.
      const auto presented = RotationClass::from_clockwise_turns(truth.clockwise_turns() + correction_turns(guess));
      EXPECT_EQ(apply_rotation_class(upright, presented), fix.image);
    }
  }
  EXPECT_EQ(correct_image(FixedClassifier(RotationClass::upright()), upright).image, upright);
  EXPECT_THROW(correct_image(OracleClassifier(), upright), InputError);
}

TEST(ClassifyRotation, DeterministicAndModeChecked) {
  TrainConfig cfg;
  cfg.encoder = EncoderConfig::tiny();
  const Checkpoint ckpt{init_model(cfg), cfg, 0.0, 0};
  Rng rng(4);
  const auto img = random_image(rng, 40, 90);
  const auto a = classify_rotation(ckpt, img, CroppingMode::dynamic);
  EXPECT_EQ(a, classify_rotation(ckpt, img));
  try {
    classify_rotation(ckpt, img, CroppingMode::global_only);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("config mismatch"), std::string::npos);
  }
  const auto fix = correct_image(ckpt, img);
  EXPECT_EQ(fix.predicted, a);
  EXPECT_EQ(fix.image, rotate_quarter(img, correction_turns(a)));
}

TEST(ClassifyRotation, TrainedModelMemorizesItsTrainingSet) {
  TempDir dir("memorize");
  const auto recs = make_rotation_dataset(synth_uprights(64, 21, SynthConfig{}), 21, dir.path());
  std::vector<LabeledImage> samples;
  for (const auto& r : recs) samples.push_back({read_image(r.image_file()), r.rotation_class});
  TrainConfig cfg;
  cfg.seed = 21;
  cfg.batch_size = 8;
  const auto prepared = prepare_samples(samples, cfg);

  // Train until the checkpoint classifies every training image, with a
  // budget well past the usual epoch cap: 64 samples give few steps per
  // epoch, and the initial plateau lasts about 150 steps.
  Trainer<float> trainer(cfg, init_model(cfg));
  Rng order_rng(21);
  std::vector<const PreparedSample*> order;
  for (const auto& p : prepared) order.push_back(&p);
  double acc = 0;
  int epoch = 0;
  std::uint64_t step = 0;
  while (epoch++ < 100 && acc < 99.0) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t i = 0; i < order.size(); i += 8) {
      trainer.step(std::span<const PreparedSample* const>(order.data() + i, 8), step++);
    }
    const Checkpoint ckpt{trainer.params(), cfg, 0.0, epoch};
    std::size_t correct = 0;
    for (const auto& s : samples) correct += classify_rotation(ckpt, s.image) == s.label;
    acc = 100.0 * static_cast<double>(correct) / 64.0;
  }
  EXPECT_GE(acc, 99.0) << "after " << epoch << " epochs";
}

TEST(ClassifyRotation, UntrainedModelIsNearChance) {
  TempDir dir("chance");
  const auto recs = make_rotation_dataset(synth_uprights(200, 22, SynthConfig{}), 22, dir.path());
  TrainConfig cfg;
  cfg.seed = 22;
  const Checkpoint ckpt{init_model(cfg), cfg, 0.0, 0};
  std::vector<std::pair<RotationClass, RotationClass>> pairs;
  for (const auto& r : recs) pairs.emplace_back(r.rotation_class, classify_rotation(ckpt, read_image(r.image_file())));
  const auto s = confusion_and_accuracy(pairs);
  EXPECT_GE(s.accuracy, 15.0);
  EXPECT_LE(s.accuracy, 35.0);
}

TEST_F(BenchCorpus, OracleCorrectionRecoversIdeal) {
  const auto report = run_bench(records_, OracleClassifier(), MockOcrEngine({}), kAll);
  const auto* ideal = report.find(Condition::ideal);
  const auto* rotated = report.find(Condition::rotated);
  const auto* corrected = report.find(Condition::corrected);
  ASSERT_TRUE(ideal && rotated && corrected);
  EXPECT_EQ(corrected->by_language, ideal->by_language);
  EXPECT_EQ(corrected->samples, ideal->samples);
  EXPECT_EQ(ideal->by_language.size(), 3u);  // en, hi, all
  const auto& all = ideal->by_language.at("all");
  EXPECT_EQ(all.samples, 24u);
  EXPECT_EQ(all.excluded, 0u);
  for (const char* k : {"anls_word", "anls_char", "wer", "cer"}) EXPECT_EQ(all.metrics.at(k), 0.0) << k;
  for (const char* k : {"similarity_word", "similarity_char"}) EXPECT_EQ(all.metrics.at(k), 100.0) << k;

  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& o = rotated->samples[i];
    if (records_[i].rotation_class.is_upright()) {
      EXPECT_EQ(o.values, ideal->samples[i].values);
    } else if (utf8_code_points(*records_[i].gt_text).size() >= 50) {
      EXPECT_GT(o.values.at("anls_char"), 0.0) << o.id;
    }
  }
  ASSERT_TRUE(report.confusion);
  EXPECT_EQ(report.confusion->accuracy, 100.0);
  EXPECT_EQ(report.confusion->total, 24u);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(report.confusion->matrix[t][t], 6u);
}

TEST_F(BenchCorpus, SingleMistakeChangesThatSample) {
  const std::string victim = records_[5].id;
  ASSERT_GE(utf8_code_points(*records_[5].gt_text).size(), 50u);
  const auto report = run_bench(records_, OneMistakeClassifier(victim), MockOcrEngine({}), kAll);
  const auto* ideal = report.find(Condition::ideal);
  const auto* corrected = report.find(Condition::corrected);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    EXPECT_EQ(corrected->samples[i].values == ideal->samples[i].values, records_[i].id != victim) << records_[i].id;
  }
  EXPECT_NEAR(report.confusion->accuracy, 100.0 * 23 / 24, 1e-12);
}

TEST_F(BenchCorpus, UprightGuessEqualsRotated) {
  const auto report = run_bench(records_, FixedClassifier(RotationClass::upright()), MockOcrEngine({}),
                                {Condition::rotated, Condition::corrected});
  EXPECT_EQ(report.find(Condition::corrected)->samples, report.find(Condition::rotated)->samples);
  EXPECT_EQ(report.find(Condition::ideal), nullptr);
  EXPECT_EQ(report.confusion->accuracy, 25.0);
}

TEST_F(BenchCorpus, ReportIsDeterministicAcrossWorkers) {
  const auto a = to_json(run_bench(records_, OracleClassifier(), MockOcrEngine({}), kAll)).dump();
  BenchOptions opt;
  opt.workers = 4;
  const auto b = to_json(run_bench(records_, OracleClassifier(), MockOcrEngine({}), kAll, opt)).dump();
  EXPECT_EQ(a, b);
}

TEST_F(BenchCorpus, EngineFailuresAreExcludedAndCounted) {
  const auto report = run_bench(records_, OracleClassifier(), FailingEngine({records_[0].id, records_[3].id}),
                                {Condition::ideal});
  const auto& cr = *report.find(Condition::ideal);
  EXPECT_EQ(cr.by_language.at("all").excluded, 2u);
  EXPECT_EQ(cr.by_language.at("all").metrics.at("anls_char"), 0.0);
  EXPECT_FALSE(cr.samples[0].ok);
  EXPECT_NE(cr.samples[0].error.find("unavailable"), std::string::npos);
  EXPECT_FALSE(cr.failed_wholesale());
  EXPECT_FALSE(report.confusion);

  const auto dead = run_bench(records_, OracleClassifier(), FailingEngine({}), {Condition::rotated});
  EXPECT_TRUE(dead.find(Condition::rotated)->failed_wholesale());
  EXPECT_TRUE(dead.find(Condition::rotated)->by_language.at("all").metrics.empty());
}

TEST_F(BenchCorpus, CsvLayout) {
  const auto report = run_bench(records_, OracleClassifier(), MockOcrEngine({}), kAll);
  std::ostringstream out;
  write_report_csv(out, report);
  const std::string csv = out.str();
  EXPECT_EQ(csv.rfind("condition,language,metric,value\n", 0), 0u);
  EXPECT_NE(csv.find("\nideal,all,anls_char,0\n"), std::string::npos);
  EXPECT_NE(csv.find("\ncorrected,hi,samples,12\n"), std::string::npos);
  EXPECT_NE(csv.find("\nrotation,all,accuracy,100\n\ntrue\\pred,0,1,2,3\n0,6,0,0,0\n"), std::string::npos);
  const auto j = to_json(report);
  EXPECT_EQ(j["confusion"]["matrix"][2][2], 6);
  EXPECT_EQ(j["config"]["classifier"], "oracle");
  EXPECT_EQ(j["conditions"]["rotated"]["languages"]["en"]["samples"], 12);
}

TEST_F(BenchCorpus, RejectsRecordsWithoutText) {
  auto recs = records_;
  recs[1].gt_text.reset();
  EXPECT_THROW(run_bench(recs, OracleClassifier(), MockOcrEngine({}), kAll), InputError);
  EXPECT_THROW(run_bench({}, OracleClassifier(), MockOcrEngine({}), kAll), InputError);
}
