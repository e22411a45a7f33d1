#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "orient/error.hpp"

namespace orient {

enum class Level { word, character };

inline const char* to_string(Level l) { return l == Level::word ? "word" : "char"; }

inline Level parse_level(std::string_view s) {
  if (s == "word") return Level::word;
  if (s == "char" || s == "character") return Level::character;
  throw InputError("unknown level '" + std::string(s) + "' (expected word or char)");
}

// Decodes UTF-8 into code points; malformed sequences become U+FFFD.
inline std::u32string utf8_code_points(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      out += U'�';
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
      out += U'�';
      break;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((cc & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out += U'�';
      ++i;
      continue;
    }
    out += cp;
    i += static_cast<std::size_t>(len);
  }
  return out;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Splits on runs of ASCII whitespace.
inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) words.emplace_back(s.substr(start, i - start));
  }
  return words;
}

// Unit-cost edit distance over any random-access sequences.
template <class SeqA, class SeqB>
std::size_t levenshtein(const SeqA& a, const SeqB& b) {
  const std::size_t n = std::size(a);
  const std::size_t m = std::size(b);
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// levenshtein / max(|a|, |b|), 0 when both are empty.
template <class SeqA, class SeqB>
double normalized_lev_distance(const SeqA& a, const SeqB& b) {
  const std::size_t longest = std::max(std::size(a), std::size(b));
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

inline double normalized_lev_distance(std::string_view a, std::string_view b, Level level) {
  if (level == Level::word) return normalized_lev_distance(split_words(a), split_words(b));
  return normalized_lev_distance(utf8_code_points(a), utf8_code_points(b));
}

// Per-sample values and their mean on the x100 scale.
struct MetricReport {
  Level level = Level::character;
  double mean_value = 0.0;  // x100
  std::vector<double> per_sample;  // unscaled
  std::size_t count = 0;
};

inline MetricReport make_report(Level level, std::vector<double> values) {
  MetricReport r;
  r.level = level;
  r.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean_value = values.empty() ? 0.0 : 100.0 * sum / static_cast<double>(values.size());
  r.per_sample = std::move(values);
  return r;
}

using TextPair = std::pair<std::string, std::string>;  // (ground truth, OCR output)

// Mean normalized edit distance x100; lower is better despite the ANLS name.
inline MetricReport anls_report(const std::vector<TextPair>& pairs, Level level) {
  if (pairs.empty()) throw InputError("anls_report: no text pairs");
  std::vector<double> values;
  values.reserve(pairs.size());
  for (const auto& [gt, ocr] : pairs) values.push_back(normalized_lev_distance(gt, ocr, level));
  return make_report(level, std::move(values));
}

// Word edits divided by the reference word count; can exceed 1.
inline double wer(std::string_view ref, std::string_view hyp) {
  const auto r = split_words(ref);
  if (r.empty()) throw InputError("empty reference");
  return static_cast<double>(levenshtein(r, split_words(hyp))) / static_cast<double>(r.size());
}

// Code-point edits (whitespace included) divided by reference length.
inline double cer(std::string_view ref, std::string_view hyp) {
  const auto r = utf8_code_points(ref);
  if (r.empty()) throw InputError("empty reference");
  return static_cast<double>(levenshtein(r, utf8_code_points(hyp))) / static_cast<double>(r.size());
}

// Lowercase, trim, collapse whitespace runs to one space.
inline std::string normalize_for_matching(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

using FieldDoc = std::pair<std::string, std::map<std::string, std::string>>;  // (prediction, ground-truth fields)

// Share of company/date/address/total values found in the prediction after
// normalization, each field worth 25%, averaged over documents, x100.
inline double field_accuracy(const std::vector<FieldDoc>& docs) {
  static const char* const keys[] = {"company", "date", "address", "total"};
  if (docs.empty()) throw InputError("field_accuracy: no documents");
  double sum = 0.0;
  for (const auto& [pred, fields] : docs) {
    const std::string norm_pred = normalize_for_matching(pred);
    int matched = 0;
    for (const char* k : keys) {
      const auto it = fields.find(k);
      if (it == fields.end()) throw InputError(std::string("field_accuracy: missing field ") + k);
      if (norm_pred.find(normalize_for_matching(it->second)) != std::string::npos) ++matched;
    }
    sum += matched / 4.0;
  }
  return 100.0 * sum / static_cast<double>(docs.size());
}

namespace detail {

struct Block {
  std::size_t a, b, size;
};

// Longest common block of a[alo,ahi) and b[blo,bhi); ties go to the
// earliest start in a, then in b.
template <class T>
Block longest_match(const std::vector<T>& a, std::size_t alo, std::size_t ahi, std::size_t blo, std::size_t bhi,
                    const std::unordered_map<T, std::vector<std::size_t>>& b2j) {
  Block best{alo, blo, 0};
  std::unordered_map<std::size_t, std::size_t> j2len, next;
  for (std::size_t i = alo; i < ahi; ++i) {
    next.clear();
    const auto it = b2j.find(a[i]);
    if (it != b2j.end()) {
      for (std::size_t j : it->second) {
        if (j < blo) continue;
        if (j >= bhi) break;
        std::size_t k = 1;
        if (j > 0) {
          const auto p = j2len.find(j - 1);
          if (p != j2len.end()) k = p->second + 1;
        }
        next[j] = k;
        if (k > best.size) best = {i + 1 - k, j + 1 - k, k};
      }
    }
    std::swap(j2len, next);
  }
  return best;
}

template <class T>
std::size_t matched_elements(const std::vector<T>& a, const std::vector<T>& b) {
  std::unordered_map<T, std::vector<std::size_t>> b2j;
  for (std::size_t j = 0; j < b.size(); ++j) b2j[b[j]].push_back(j);
  std::size_t total = 0;
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::pair<std::size_t, std::size_t>>> stack{
      {{0, a.size()}, {0, b.size()}}};
  while (!stack.empty()) {
    const auto [ar, br] = stack.back();
    stack.pop_back();
    const Block m = longest_match(a, ar.first, ar.second, br.first, br.second, b2j);
    if (m.size == 0) continue;
    total += m.size;
    if (ar.first < m.a && br.first < m.b) stack.push_back({{ar.first, m.a}, {br.first, m.b}});
    if (m.a + m.size < ar.second && m.b + m.size < br.second) {
      stack.push_back({{m.a + m.size, ar.second}, {m.b + m.size, br.second}});
    }
  }
  return total;
}

}  // namespace detail

// Ratcliff-Obershelp gestalt ratio 2M / (|a| + |b|) over sequences. The
// block search is not symmetric; pass the ground truth first.
template <class T>
double similarity_ratio(const std::vector<T>& gt, const std::vector<T>& other) {
  const std::size_t total = gt.size() + other.size();
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(detail::matched_elements(gt, other)) / static_cast<double>(total);
}

inline double similarity_ratio(std::string_view gt, std::string_view other, Level level = Level::character) {
  if (level == Level::word) return similarity_ratio(split_words(gt), split_words(other));
  const auto a = utf8_code_points(gt);
  const auto b = utf8_code_points(other);
  return similarity_ratio(std::vector<char32_t>(a.begin(), a.end()), std::vector<char32_t>(b.begin(), b.end()));
}

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"level", to_string(r.level)}, {"mean", r.mean_value}, {"count", r.count}, {"per_sample", r.per_sample}};
}

// Rows of sample_id,level,value followed by a mean footer (x100 scale).
inline void write_metric_csv(std::ostream& out, const MetricReport& r, const std::vector<std::string>& ids) {
  if (ids.size() != r.per_sample.size()) throw InputError("write_metric_csv: id count does not match samples");
  const auto old_precision = out.precision(17);
  out << "sample_id,level,value\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << to_string(r.level) << ',' << r.per_sample[i] << '\n';
  out << "mean," << to_string(r.level) << ',' << r.mean_value << '\n';
  out.precision(old_precision);
}

}  // namespace orient
