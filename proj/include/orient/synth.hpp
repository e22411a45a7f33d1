#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orient/error.hpp"
#include "orient/image.hpp"
#include "orient/rng.hpp"

namespace orient {

struct IntRange {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const RealRange&, const RealRange&) = default;
};

// Receipt-style field values; keys are exactly company, date, address, total.
using FieldMap = std::map<std::string, std::string>;

inline const std::array<std::string, 4>& field_keys() {
  static const std::array<std::string, 4> keys{"address", "company", "date", "total"};
  return keys;
}

// Layout distributions for the synthetic page renderer. Canvas height is
// width * aspect, so the tiling grid stays predictable.
struct SynthConfig {
  IntRange canvas_w{96, 136};
  RealRange aspect{1.9, 2.1};
  IntRange margin_left{4, 10};
  IntRange margin_right{4, 10};
  IntRange margin_top{4, 10};
  IntRange margin_bottom{18, 34};
  IntRange line_height{6, 9};
  IntRange line_gap{4, 7};
  IntRange glyph_w{2, 4};
  RealRange line_fill{0.45, 1.0};
  double descender_prob = 0.6;
  double header_prob = 0.5;
  double fields_prob = 0.5;
  int noise_amplitude = 10;

  void validate() const {
    auto bad = [](IntRange r, int min_lo) { return r.lo < min_lo || r.hi < r.lo; };
    if (bad(canvas_w, 8) || bad(margin_left, 0) || bad(margin_right, 0) || bad(margin_top, 0) ||
        bad(margin_bottom, 0) || bad(line_height, 3) || bad(line_gap, 0) || bad(glyph_w, 1)) {
      throw InputError("synth config: every range needs lo <= hi within sane bounds");
    }
    if (!(aspect.lo > 0 && aspect.hi >= aspect.lo)) throw InputError("synth config: bad aspect range");
    if (!(line_fill.lo > 0 && line_fill.hi >= line_fill.lo && line_fill.hi <= 1.0)) {
      throw InputError("synth config: line_fill must lie in (0, 1]");
    }
    if (!(descender_prob > 0 && descender_prob < 1)) throw InputError("synth config: descender_prob must be in (0, 1)");
    if (header_prob < 0 || header_prob > 1 || fields_prob < 0 || fields_prob > 1) {
      throw InputError("synth config: probabilities must be in [0, 1]");
    }
    if (noise_amplitude < 0 || noise_amplitude > 127) throw InputError("synth config: noise amplitude out of range");
  }

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct SynthDocument {
  ImageBuffer image;  // upright
  std::string text;   // rendered lines joined with '\n'
  std::optional<FieldMap> fields;
};

namespace detail {

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}


inline bool is_devanagari(const std::string& language) { return language == "hi" || language == "mr" || language == "ne"; }

inline std::u32string random_word(Rng& rng, const std::string& language, int min_len, int max_len) {
  const int n = uniform_int(rng, min_len, max_len);
  std::u32string w;
  for (int i = 0; i < n; ++i) {
    if (is_devanagari(language)) {
      w += static_cast<char32_t>(0x0915 + uniform_int(rng, 0, 0x0939 - 0x0915));
    } else {
      w += static_cast<char32_t>(U'a' + uniform_int(rng, 0, 25));
    }
  }
  return w;
}

inline std::u32string ascii_u32(const std::string& s) { return {s.begin(), s.end()}; }

inline std::string to_utf8(const std::u32string& s) {
  std::string out;
  for (char32_t c : s) append_utf8(out, c);
  return out;
}

inline FieldMap random_fields(Rng& rng) {
  auto word = [&](int lo, int hi) { return to_utf8(random_word(rng, "en", lo, hi)); };
  FieldMap f;
  f["company"] = word(3, 7) + " " + word(4, 8) + " sdn bhd";
  char date[16];
  std::snprintf(date, sizeof date, "%02d/%02d/%04d", uniform_int(rng, 1, 28), uniform_int(rng, 1, 12),
                uniform_int(rng, 2015, 2024));
  f["date"] = date;
  f["address"] = std::to_string(uniform_int(rng, 1, 199)) + " jalan " + word(4, 8) + " " + word(4, 9);
  char total[16];
  std::snprintf(total, sizeof total, "%d.%02d", uniform_int(rng, 1, 400), uniform_int(rng, 0, 99));
  f["total"] = total;
  return f;
}

}  // namespace detail

// Renders an upright page of glyph blobs: left-aligned lines with ragged
// right edges, optional header bar, descender marks, smaller top than
// bottom margin, and additive noise. Each character of the returned text is
// one blob, so the text is what an ideal OCR engine would read.
inline SynthDocument synth_document(std::uint64_t seed, const SynthConfig& cfg, const std::string& language = "en") {
  cfg.validate();
  Rng rng(mix_seed(seed, 0x5d0c));

  const int w = uniform_int(rng, cfg.canvas_w.lo, cfg.canvas_w.hi);
  const int h = std::max(8, static_cast<int>(std::lround(w * uniform_real(rng, cfg.aspect.lo, cfg.aspect.hi))));
  const int ml = uniform_int(rng, cfg.margin_left.lo, cfg.margin_left.hi);
  const int mr = uniform_int(rng, cfg.margin_right.lo, cfg.margin_right.hi);
  int mt = uniform_int(rng, cfg.margin_top.lo, cfg.margin_top.hi);
  int mb = uniform_int(rng, cfg.margin_bottom.lo, cfg.margin_bottom.hi);
  if (mb <= mt) mb = mt + 1;
  const int line_h = uniform_int(rng, cfg.line_height.lo, cfg.line_height.hi);
  const int gap = uniform_int(rng, cfg.line_gap.lo, cfg.line_gap.hi);
  const int text_w = w - ml - mr;
  if (text_w < cfg.glyph_w.hi * 2 || h - mt - mb < line_h * 2) {
    throw InputError("canvas too small for one line of text");
  }

  const int ink_base = uniform_int(rng, 10, 70);
  const Rgb ink{static_cast<std::uint8_t>(ink_base), static_cast<std::uint8_t>(ink_base + uniform_int(rng, 0, 20)),
                static_cast<std::uint8_t>(ink_base + uniform_int(rng, 0, 50))};
  ImageBuffer img(w, h, kWhite);
  auto fill_rect = [&](int x0, int y0, int x1, int y1, Rgb c) {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, w);
    y1 = std::min(y1, h);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) img.set_pixel(y, x, c);
    }
  };

  SynthDocument doc;
  int y = mt;
  if (bernoulli(rng, cfg.header_prob)) {
    const int bar_h = line_h + 4;
    const int bar_w = static_cast<int>(text_w * uniform_real(rng, 0.5, 0.9));
    const Rgb bar{static_cast<std::uint8_t>(ink[0] / 2), static_cast<std::uint8_t>(ink[1] / 2),
                  static_cast<std::uint8_t>(ink[2] / 2)};
    fill_rect(ml, y, ml + bar_w, y + bar_h, bar);
    y += bar_h + gap;
  }

  // Source paragraphs: receipt fields first when present, then filler words.
  std::vector<std::u32string> pending_lines;
  if (!detail::is_devanagari(language) && bernoulli(rng, cfg.fields_prob)) {
    doc.fields = detail::random_fields(rng);
    for (const char* k : {"company", "address", "date"}) pending_lines.push_back(detail::ascii_u32((*doc.fields)[k]));
    pending_lines.push_back(detail::ascii_u32("total " + (*doc.fields)["total"]));
  }

  const int xheight = std::max(2, (line_h * 3) / 5);
  const int desc = std::max(2, line_h / 2);
  std::vector<std::string> rendered;
  std::size_t next_pending = 0;
  bool truncated = false;
  while (y + line_h + desc <= h - mb) {
    const int budget = std::max(cfg.glyph_w.hi * 2, static_cast<int>(text_w * uniform_real(rng, cfg.line_fill.lo, cfg.line_fill.hi)));
    const bool descenders = bernoulli(rng, cfg.descender_prob);
    const int baseline = y + line_h;
    std::u32string line_text;
    int x = ml;

    // Words come from the pending field lines first (rendered verbatim,
    // wrapping only at word boundaries), then random filler.
    std::vector<std::u32string> words;
    if (next_pending < pending_lines.size()) {
      const auto& src = pending_lines[next_pending++];
      std::u32string cur;
      for (char32_t c : src) {
        if (c == U' ') {
          if (!cur.empty()) words.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!cur.empty()) words.push_back(cur);
    }
    const bool fixed_words = !words.empty();
    std::size_t wi = 0;
    while (true) {
      std::u32string word;
      if (fixed_words) {
        if (wi >= words.size()) break;
        word = words[wi];
      } else {
        word = detail::random_word(rng, language, 1, 8);
      }
      std::vector<int> widths;
      int word_px = 0;
      for (std::size_t i = 0; i < word.size(); ++i) {
        widths.push_back(uniform_int(rng, cfg.glyph_w.lo, cfg.glyph_w.hi));
        word_px += widths.back() + (i + 1 < word.size() ? 1 : 0);
      }
      const int limit = fixed_words ? text_w : budget;
      if (x - ml + word_px > limit) {
        if (x == ml && !fixed_words) break;
        if (x > ml) break;
        // A single fixed word wider than the line: truncate it.
        truncated = true;
        int keep_px = 0;
        std::size_t keep = 0;
        while (keep < word.size() && keep_px + widths[keep] + 1 <= text_w) keep_px += widths[keep++] + 1;
        word.resize(std::max<std::size_t>(keep, 1));
        widths.resize(word.size());
      }
      if (!line_text.empty()) line_text += U' ';
      const int word_x0 = x;
      for (std::size_t i = 0; i < word.size(); ++i) {
        const int gw = widths[i];
        const bool tall = bernoulli(rng, 0.3);
        fill_rect(x, tall ? y : baseline - xheight, x + gw, baseline, ink);
        if (descenders && bernoulli(rng, 0.3)) fill_rect(x, baseline, x + std::max(1, gw - 1), baseline + desc, ink);
        x += gw + 1;
      }
      if (detail::is_devanagari(language)) fill_rect(word_x0, baseline - xheight, x - 1, baseline - xheight + 1, ink);
      line_text += word;
      ++wi;
      x += uniform_int(rng, 3, 5);
      if (fixed_words && wi < words.size() && x - ml >= text_w) break;
    }
    if (fixed_words && wi < words.size()) {
      // Push the unrendered remainder back as the next line.
      std::u32string rest;
      for (std::size_t i = wi; i < words.size(); ++i) {
        if (!rest.empty()) rest += U' ';
        rest += words[i];
      }
      pending_lines.insert(pending_lines.begin() + static_cast<std::ptrdiff_t>(next_pending), rest);
    }
    if (!line_text.empty()) rendered.push_back(detail::to_utf8(line_text));
    y = baseline + desc + gap;
  }
  if (rendered.empty()) throw InputError("canvas too small for one line of text");
  if (doc.fields && (truncated || next_pending < pending_lines.size())) doc.fields.reset();

  for (std::size_t i = 0; i < rendered.size(); ++i) {
    if (i) doc.text += '\n';
    doc.text += rendered[i];
  }

  if (cfg.noise_amplitude > 0) {
    for (auto& v : img.data()) {
      const int n = uniform_int(rng, -cfg.noise_amplitude, cfg.noise_amplitude);
      v = static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + n, 0, 255));
    }
  }
  doc.image = std::move(img);
  return doc;
}

}  // namespace orient
