#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "orient/checkpoint.hpp"
#include "orient/dataset.hpp"
#include "orient/error.hpp"
#include "orient/image.hpp"
#include "orient/metrics.hpp"
#include "orient/model.hpp"
#include "orient/ocr.hpp"
#include "orient/tiling.hpp"

namespace orient {

// Model inference path: crops -> encoder -> pooled CLS -> head (eval) -> argmax.
inline RotationClass classify_rotation(const Checkpoint& ckpt, const ImageBuffer& image, CroppingMode cropping_mode) {
  if (cropping_mode != ckpt.train_config.cropping_mode) {
    throw InputError(std::string("config mismatch: checkpoint was trained with ") +
                     to_string(ckpt.train_config.cropping_mode) + " cropping");
  }
  const auto crops = crops_for(image, cropping_mode, ckpt.encoder_config().tile_px, ckpt.train_config.max_tiles);
  return predict(model_forward(crops, ckpt.params, Mode::eval, nullptr));
}

inline RotationClass classify_rotation(const Checkpoint& ckpt, const ImageBuffer& image) {
  return classify_rotation(ckpt, image, ckpt.train_config.cropping_mode);
}

// Anything that labels an image's orientation. The record is available
// for test doubles that look up the ground truth.
class RotationClassifier {
 public:
  virtual ~RotationClassifier() = default;
  virtual RotationClass classify(const ImageBuffer& image, const SampleRecord* record) const = 0;
  virtual std::string name() const = 0;
};

class ModelClassifier final : public RotationClassifier {
 public:
  explicit ModelClassifier(Checkpoint ckpt, std::string name = "model") : ckpt_(std::move(ckpt)), name_(std::move(name)) {}
  RotationClass classify(const ImageBuffer& image, const SampleRecord*) const override {
    return classify_rotation(ckpt_, image);
  }
  std::string name() const override { return name_; }
  const Checkpoint& checkpoint() const noexcept { return ckpt_; }

 private:
  Checkpoint ckpt_;
  std::string name_;
};

// Returns the recorded label; needs the record.
class OracleClassifier final : public RotationClassifier {
 public:
  RotationClass classify(const ImageBuffer&, const SampleRecord* record) const override {
    if (!record) throw InputError("oracle classifier needs the sample record");
    return record->rotation_class;
  }
  std::string name() const override { return "oracle"; }
};

struct Correction {
  ImageBuffer image;
  RotationClass predicted;
};

inline Correction correct_image(const RotationClassifier& classifier, const ImageBuffer& image,
                                const SampleRecord* record = nullptr) {
  const RotationClass predicted = classifier.classify(image, record);
  return {rotate_quarter(image, correction_turns(predicted)), predicted};
}

inline Correction correct_image(const Checkpoint& ckpt, const ImageBuffer& image) {
  const RotationClass predicted = classify_rotation(ckpt, image);
  return {rotate_quarter(image, correction_turns(predicted)), predicted};
}

using ConfusionMatrix = std::array<std::array<std::size_t, 4>, 4>;  // [true][predicted]

struct ConfusionSummary {
  ConfusionMatrix matrix{};
  double accuracy = 0.0;  // percent
  std::size_t total = 0;
};

inline ConfusionSummary confusion_and_accuracy(const std::vector<std::pair<RotationClass, RotationClass>>& pairs) {
  if (pairs.empty()) throw InputError("confusion_and_accuracy: no pairs");
  ConfusionSummary s;
  std::size_t trace = 0;
  for (const auto& [truth, pred] : pairs) {
    ++s.matrix[static_cast<std::size_t>(truth.label())][static_cast<std::size_t>(pred.label())];
    trace += truth == pred ? 1 : 0;
  }
  s.total = pairs.size();
  s.accuracy = 100.0 * static_cast<double>(trace) / static_cast<double>(pairs.size());
  return s;
}

enum class Condition { ideal, rotated, corrected };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::ideal: return "ideal";
    case Condition::rotated: return "rotated";
    default: return "corrected";
  }
}

inline Condition parse_condition(const std::string& s) {
  if (s == "ideal") return Condition::ideal;
  if (s == "rotated") return Condition::rotated;
  if (s == "corrected") return Condition::corrected;
  throw InputError("unknown condition '" + s + "' (expected ideal, rotated or corrected)");
}

inline std::vector<Condition> parse_conditions(const std::string& csv) {
  std::vector<Condition> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Condition c = parse_condition(item);
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  if (out.empty()) throw InputError("no benchmark conditions given");
  std::sort(out.begin(), out.end());
  return out;
}

// Metric names as they appear in reports, in report order.
inline const std::vector<std::string>& bench_metric_names() {
  static const std::vector<std::string> names{"anls_word",       "anls_char",       "wer", "cer",
                                              "similarity_word", "similarity_char", "field_accuracy"};
  return names;
}

struct SampleOutcome {
  std::string id;
  std::string language;
  bool ok = false;
  std::string error;
  int retries = 0;
  std::map<std::string, double> values;  // unscaled, [0,1] except wer/cer
  friend bool operator==(const SampleOutcome&, const SampleOutcome&) = default;
};

struct GroupMetrics {
  std::size_t samples = 0;
  std::size_t excluded = 0;
  std::map<std::string, double> metrics;  // x100 means over included samples
  friend bool operator==(const GroupMetrics&, const GroupMetrics&) = default;
};

struct ConditionReport {
  Condition condition = Condition::ideal;
  std::map<std::string, GroupMetrics> by_language;  // includes "all"
  std::vector<SampleOutcome> samples;
  bool failed_wholesale() const { return !samples.empty() && by_language.at("all").excluded == samples.size(); }
};

struct EvalReport {
  std::vector<ConditionReport> conditions;
  std::optional<ConfusionSummary> confusion;  // from the corrected pass
  std::size_t sample_count = 0;
  nlohmann::json config;

  const ConditionReport* find(Condition c) const {
    for (const auto& r : conditions) {
      if (r.condition == c) return &r;
    }
    return nullptr;
  }
};

struct BenchOptions {
  int workers = 1;  // concurrent samples; results are reduced in manifest order
  nlohmann::json config_echo = nlohmann::json::object();
};

namespace detail {

inline std::map<std::string, double> text_metrics(const SampleRecord& r, const std::string& ocr) {
  const std::string& gt = *r.gt_text;
  std::map<std::string, double> v{{"anls_word", normalized_lev_distance(gt, ocr, Level::word)},
                                  {"anls_char", normalized_lev_distance(gt, ocr, Level::character)},
                                  {"wer", wer(gt, ocr)},
                                  {"cer", cer(gt, ocr)},
                                  {"similarity_word", similarity_ratio(gt, ocr, Level::word)},
                                  {"similarity_char", similarity_ratio(gt, ocr, Level::character)}};
  if (r.fields) v["field_accuracy"] = field_accuracy({{ocr, *r.fields}}) / 100.0;
  return v;
}

inline GroupMetrics aggregate(const std::vector<const SampleOutcome*>& outcomes) {
  GroupMetrics g;
  g.samples = outcomes.size();
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto* o : outcomes) {
    if (!o->ok) {
      ++g.excluded;
      continue;
    }
    for (const auto& [k, v] : o->values) {
      sums[k].first += v;
      ++sums[k].second;
    }
  }
  for (const auto& [k, s] : sums) g.metrics[k] = 100.0 * s.first / static_cast<double>(s.second);
  return g;
}

template <class F>
void for_each_index(std::size_t n, int workers, F&& f) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Runs the requested conditions over the corpus. Engine failures exclude
// the sample from that condition's means and are counted.
inline EvalReport run_bench(const std::vector<SampleRecord>& records, const RotationClassifier& classifier,
                            const OcrEngine& engine, std::vector<Condition> conditions,
                            const BenchOptions& options = {}) {
  if (records.empty()) throw InputError("run_bench: empty corpus");
  for (const auto& r : records) {
    if (!r.gt_text) throw InputError("run_bench: record " + r.id + " has no gt_text");
    if (split_words(*r.gt_text).empty()) throw InputError("run_bench: record " + r.id + " has empty gt_text");
  }
  std::sort(conditions.begin(), conditions.end());
  conditions.erase(std::unique(conditions.begin(), conditions.end()), conditions.end());

  const std::size_t n = records.size();
  std::vector<std::vector<SampleOutcome>> outcomes(conditions.size(), std::vector<SampleOutcome>(n));
  std::vector<std::optional<RotationClass>> predictions(n);

  detail::for_each_index(n, options.workers, [&](std::size_t i) {
    const SampleRecord& rec = records[i];
    const ImageBuffer stored = read_image(rec.image_file());
    for (std::size_t c = 0; c < conditions.size(); ++c) {
      ImageBuffer shown;
      RotationClass presented;
      switch (conditions[c]) {
        case Condition::ideal:
          shown = rotate_quarter(stored, correction_turns(rec.rotation_class));
          presented = RotationClass::upright();
          break;
        case Condition::rotated:
          shown = stored;
          presented = rec.rotation_class;
          break;
        case Condition::corrected: {
          Correction fix = correct_image(classifier, stored, &rec);
          predictions[i] = fix.predicted;
          shown = std::move(fix.image);
          presented = RotationClass::from_clockwise_turns(rec.rotation_class.clockwise_turns() +
                                                          correction_turns(fix.predicted));
          break;
        }
      }
      SampleOutcome& out = outcomes[c][i];
      out.id = rec.id;
      out.language = rec.language;
      try {
        const OcrResult res = engine.recognize(rec, shown, presented);
        out.retries = res.retries;
        out.values = detail::text_metrics(rec, res.text);
        out.ok = true;
      } catch (const OcrError& e) {
        out.error = e.what();
      }
    }
  });

  EvalReport report;
  report.sample_count = n;
  report.config = options.config_echo;
  report.config["engine"] = engine.describe();
  report.config["classifier"] = classifier.name();
  nlohmann::json cond_names = nlohmann::json::array();
  for (Condition c : conditions) cond_names.push_back(to_string(c));
  report.config["conditions"] = cond_names;

  for (std::size_t c = 0; c < conditions.size(); ++c) {
    ConditionReport cr;
    cr.condition = conditions[c];
    cr.samples = std::move(outcomes[c]);
    std::map<std::string, std::vector<const SampleOutcome*>> groups;
    for (const auto& o : cr.samples) {
      groups[o.language].push_back(&o);
      groups["all"].push_back(&o);
    }
    for (const auto& [lang, members] : groups) cr.by_language[lang] = detail::aggregate(members);
    report.conditions.push_back(std::move(cr));
  }

  if (std::find(conditions.begin(), conditions.end(), Condition::corrected) != conditions.end()) {
    std::vector<std::pair<RotationClass, RotationClass>> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(records[i].rotation_class, *predictions[i]);
    report.confusion = confusion_and_accuracy(pairs);
  }
  return report;
}

inline nlohmann::json to_json(const ConfusionSummary& s) {
  return {{"matrix", s.matrix}, {"accuracy", s.accuracy}, {"total", s.total}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json conds = nlohmann::json::object();
  for (const auto& cr : r.conditions) {
    nlohmann::json langs = nlohmann::json::object();
    for (const auto& [lang, g] : cr.by_language) {
      langs[lang] = {{"samples", g.samples}, {"excluded", g.excluded}, {"metrics", g.metrics}};
    }
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : cr.samples) {
      nlohmann::json js{{"id", s.id}, {"language", s.language}, {"ok", s.ok}, {"retries", s.retries}};
      if (s.ok) {
        js["values"] = s.values;
      } else {
        js["error"] = s.error;
      }
      samples.push_back(std::move(js));
    }
    conds[to_string(cr.condition)] = {{"languages", std::move(langs)}, {"samples", std::move(samples)}};
  }
  nlohmann::json out{{"config", r.config}, {"sample_count", r.sample_count}, {"conditions", std::move(conds)}};
  if (r.confusion) out["confusion"] = to_json(*r.confusion);
  return out;
}

// Flat condition,language,metric,value rows (x100 scale), then the
// confusion matrix as a 4x4 block.
inline void write_report_csv(std::ostream& out, const EvalReport& r) {
  const auto old_precision = out.precision(17);
  out << "condition,language,metric,value\n";
  for (const auto& cr : r.conditions) {
    for (const auto& [lang, g] : cr.by_language) {
      for (const auto& name : bench_metric_names()) {
        const auto it = g.metrics.find(name);
        if (it != g.metrics.end()) out << to_string(cr.condition) << ',' << lang << ',' << name << ',' << it->second << '\n';
      }
      out << to_string(cr.condition) << ',' << lang << ",samples," << g.samples << '\n';
      out << to_string(cr.condition) << ',' << lang << ",excluded," << g.excluded << '\n';
    }
  }
  if (r.confusion) {
    out << "rotation,all,accuracy," << r.confusion->accuracy << "\n\n";
    out << "true\\pred,0,1,2,3\n";
    for (std::size_t t = 0; t < 4; ++t) {
      out << t;
      for (std::size_t p = 0; p < 4; ++p) out << ',' << r.confusion->matrix[t][p];
      out << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace orient
