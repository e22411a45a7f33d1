#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "orient/error.hpp"
#include "orient/image.hpp"
#include "orient/image_io.hpp"
#include "orient/rng.hpp"
#include "orient/synth.hpp"

namespace orient {

namespace fs = std::filesystem;

// One manifest entry. image_path is kept exactly as written in the
// manifest; relative paths resolve against base_dir.
struct SampleRecord {
  std::string id;
  std::string image_path;
  RotationClass rotation_class;
  std::string language = "en";
  std::optional<std::string> gt_text;
  std::optional<FieldMap> fields;
  fs::path base_dir;  // not serialized

  fs::path image_file() const {
    const fs::path p(image_path);
    return p.is_absolute() ? p : base_dir / p;
  }

  friend bool operator==(const SampleRecord& a, const SampleRecord& b) {
    return std::tie(a.id, a.image_path, a.rotation_class, a.language, a.gt_text, a.fields) ==
           std::tie(b.id, b.image_path, b.rotation_class, b.language, b.gt_text, b.fields);
  }
};

// An upright page before rotation assignment.
struct UprightSample {
  std::string id;
  ImageBuffer image;
  std::string language = "en";
  std::optional<std::string> gt_text;
  std::optional<FieldMap> fields;
};

inline bool valid_field_keys(const FieldMap& fields) {
  const auto& keys = field_keys();
  if (fields.size() != keys.size()) return false;
  return std::all_of(keys.begin(), keys.end(), [&](const std::string& k) { return fields.count(k) == 1; });
}

inline void check_unique_ids(const std::vector<std::string>& ids) {
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw InputError("duplicate id: " + id);
  }
}

// Labels for n items: a seeded permutation of the items, then classes
// 0,1,2,3 round-robin along it. Counts differ by at most one.
inline std::vector<RotationClass> assign_rotations(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = derive_rng(seed, "rotation-assignment");
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<RotationClass> out(n);
  for (std::size_t i = 0; i < n; ++i) out[order[i]] = RotationClass::from_label(static_cast<int>(i % 4));
  return out;
}

// Rotates every upright by its assigned class and writes
// out_dir/images/<id>.png. Records come back in input order.
inline std::vector<SampleRecord> make_rotation_dataset(const std::vector<UprightSample>& uprights, std::uint64_t seed,
                                                       const fs::path& out_dir) {
  if (uprights.empty()) throw InputError("make_rotation_dataset: no images");
  std::vector<std::string> ids;
  ids.reserve(uprights.size());
  for (const auto& u : uprights) ids.push_back(u.id);
  check_unique_ids(ids);

  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw InputError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  const auto labels = assign_rotations(uprights.size(), seed);
  std::vector<SampleRecord> records;
  records.reserve(uprights.size());
  for (std::size_t i = 0; i < uprights.size(); ++i) {
    const auto& u = uprights[i];
    SampleRecord r;
    r.id = u.id;
    r.image_path = "images/" + u.id + ".png";
    r.rotation_class = labels[i];
    r.language = u.language;
    r.gt_text = u.gt_text;
    r.fields = u.fields;
    r.base_dir = out_dir;
    write_png(apply_rotation_class(u.image, labels[i]), r.image_file());
    records.push_back(std::move(r));
  }
  return records;
}

// Synthetic uprights with ids doc00000, doc00001, ...; languages cycle in
// the given order. Each page seeds from (seed, id), so generation order
// does not matter.
inline std::vector<UprightSample> synth_uprights(std::size_t count, std::uint64_t seed, const SynthConfig& cfg,
                                                 const std::vector<std::string>& languages = {"en"}) {
  if (languages.empty()) throw InputError("synth_uprights: no languages");
  std::vector<UprightSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "doc%05zu", i);
    const std::string id = buf;
    const std::string& lang = languages[i % languages.size()];
    SynthDocument doc = synth_document(mix_seed(seed, fnv1a(id)), cfg, lang);
    out.push_back({id, std::move(doc.image), lang, std::move(doc.text), std::move(doc.fields)});
  }
  return out;
}

inline nlohmann::json record_to_json(const SampleRecord& r) {
  nlohmann::json j{{"id", r.id},
                   {"image_path", r.image_path},
                   {"rotation_class", r.rotation_class.label()},
                   {"language", r.language}};
  if (r.gt_text) j["gt_text"] = *r.gt_text;
  if (r.fields) j["fields"] = *r.fields;
  return j;
}

inline void write_manifest(const fs::path& path, const std::vector<SampleRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write manifest " + path.string());
  // Relative image paths are rebased so they resolve from the new manifest's directory.
  const fs::path target_dir = fs::absolute(path).parent_path().lexically_normal();
  for (const auto& r : records) {
    nlohmann::json j = record_to_json(r);
    const fs::path image(r.image_path);
    if (!r.base_dir.empty() && image.is_relative()) {
      const fs::path abs = fs::absolute(r.base_dir / image).lexically_normal();
      const fs::path rel = abs.lexically_relative(target_dir);
      j["image_path"] = rel.empty() ? abs.generic_string() : rel.generic_string();
    }
    out << j.dump() << '\n';
  }
  if (!out) throw InputError("failed writing manifest " + path.string());
}

namespace detail {

inline SampleRecord record_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw InputError("expected a JSON object");
  static const std::set<std::string> known{"id", "image_path", "rotation_class", "language", "gt_text", "fields"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw InputError("unknown key '" + k + "'");
  }
  auto need_string = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string()) throw InputError(std::string("missing or non-string '") + key + "'");
    return j[key].get<std::string>();
  };
  SampleRecord r;
  r.base_dir = base_dir;
  r.id = need_string("id");
  if (r.id.empty()) throw InputError("empty id");
  r.image_path = need_string("image_path");
  if (!j.contains("rotation_class") || !j["rotation_class"].is_number_integer()) {
    throw InputError("missing or non-integer 'rotation_class'");
  }
  const auto label = j["rotation_class"].get<std::int64_t>();
  if (label < 0 || label > 3) throw InputError("unknown rotation label " + std::to_string(label));
  r.rotation_class = RotationClass::from_label(static_cast<int>(label));
  if (j.contains("language")) r.language = need_string("language");
  if (j.contains("gt_text") && !j["gt_text"].is_null()) r.gt_text = need_string("gt_text");
  if (j.contains("fields") && !j["fields"].is_null()) {
    const auto& f = j["fields"];
    if (!f.is_object()) throw InputError("'fields' must be an object");
    FieldMap fields;
    for (const auto& [k, v] : f.items()) {
      if (!v.is_string()) throw InputError("field '" + k + "' must be a string");
      fields[k] = v.get<std::string>();
    }
    if (!valid_field_keys(fields)) throw InputError("'fields' must have exactly the keys address, company, date, total");
    r.fields = std::move(fields);
  }
  return r;
}

}  // namespace detail

// Parses a JSONL manifest. Blank lines are skipped; every problem is
// reported with its 1-based line number.
inline std::vector<SampleRecord> load_manifest(const fs::path& path, bool check_images = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<SampleRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.string() + " line " + std::to_string(line_no) + ": ";
    SampleRecord r;
    try {
      r = detail::record_from_json(nlohmann::json::parse(line), base);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + "malformed JSON (" + e.what() + ")");
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
    if (!ids.insert(r.id).second) throw InputError(where + "duplicate id " + r.id);
    if (check_images && !fs::is_regular_file(r.image_file())) {
      throw InputError(where + "missing image file " + r.image_file().string());
    }
    records.push_back(std::move(r));
  }
  return records;
}

struct SplitResult {
  std::vector<SampleRecord> train, val, test;
  std::vector<std::string> warnings;
};

// Stratified by (rotation class, language): each stratum is shuffled with
// its own seeded stream and cut proportionally. Partitions keep input
// order. Strata too small to feed all three partitions go to train.
inline SplitResult split(const std::vector<SampleRecord>& records, double train_frac, double val_frac,
                         std::uint64_t seed) {
  if (!(train_frac > 0) || !(val_frac > 0) || !(train_frac + val_frac < 1.0)) {
    throw InputError("split: fractions must be positive and sum to less than 1");
  }
  std::map<std::pair<int, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) {
    strata[{records[i].rotation_class.label(), records[i].language}].push_back(i);
  }
  std::vector<int> part(records.size(), 0);
  SplitResult out;
  for (auto& [key, idx] : strata) {
    const std::string name = "class " + std::to_string(key.first) + "/" + key.second;
    if (idx.size() < 3) {
      out.warnings.push_back("stratum " + name + " has " + std::to_string(idx.size()) +
                             " records; all assigned to train");
      continue;
    }
    Rng rng = derive_rng(seed, "split:" + name);
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * train_frac));
    const auto n_val = static_cast<std::size_t>(std::llround(n * val_frac));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      part[idx[k]] = k < n_train ? 0 : (k < n_train + n_val ? 1 : 2);
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    (part[i] == 0 ? out.train : part[i] == 1 ? out.val : out.test).push_back(records[i]);
  }
  return out;
}

// Upright source of a record, reconstructed losslessly from its stored file.
inline ImageBuffer load_upright(const SampleRecord& r) {
  return rotate_quarter(read_image(r.image_file()), correction_turns(r.rotation_class));
}

}  // namespace orient
