#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "orient/error.hpp"

namespace orient {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kWhite{255, 255, 255};

// Row-major RGB raster. data().size() == width * height * 3 always holds.
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;

  ImageBuffer(int width, int height, Rgb fill = kWhite) : width_(width), height_(height) {
    check_dims(width, height);
    data_.resize(static_cast<std::size_t>(width) * height * kChannels);
    for (std::size_t i = 0; i < data_.size(); i += kChannels) {
      data_[i] = fill[0];
      data_[i + 1] = fill[1];
      data_[i + 2] = fill[2];
    }
  }

  ImageBuffer(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != static_cast<std::size_t>(width) * height * kChannels) {
      throw InputError("image data length does not match width*height*3");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int row, int col, int ch = 0) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * kChannels + ch;
  }

  std::uint8_t& at(int row, int col, int ch) noexcept { return data_[index(row, col, ch)]; }
  std::uint8_t at(int row, int col, int ch) const noexcept { return data_[index(row, col, ch)]; }

  Rgb pixel(int row, int col) const noexcept {
    const auto i = index(row, col);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }

  void set_pixel(int row, int col, Rgb px) noexcept {
    const auto i = index(row, col);
    data_[i] = px[0];
    data_[i + 1] = px[1];
    data_[i + 2] = px[2];
  }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  static void check_dims(int w, int h) {
    if (w < 1 || h < 1) throw InputError("image dimensions must be positive");
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// The four canonical orientations. Label order follows the classifier's
// output layout: 0 -> -90, 1 -> 0, 2 -> +90, 3 -> 180 degrees. Positive
// angles are clockwise.
class RotationClass {
 public:
  constexpr RotationClass() = default;

  static constexpr RotationClass from_label(int label) {
    if (label < 0 || label > 3) throw InputError("rotation label out of range: " + std::to_string(label));
    return RotationClass(label);
  }

  static constexpr RotationClass from_angle(int degrees) {
    switch (degrees) {
      case -90: case 270: return RotationClass(0);
      case 0: return RotationClass(1);
      case 90: case -270: return RotationClass(2);
      case 180: case -180: return RotationClass(3);
      default: throw InputError("not a canonical rotation angle: " + std::to_string(degrees));
    }
  }

  static constexpr RotationClass from_clockwise_turns(int turns) {
    constexpr std::array<int, 4> label_of_turns{1, 2, 3, 0};
    return RotationClass(label_of_turns[static_cast<std::size_t>(((turns % 4) + 4) % 4)]);
  }

  static constexpr RotationClass upright() { return RotationClass(1); }

  constexpr int label() const noexcept { return label_; }

  constexpr int angle_deg() const noexcept {
    constexpr std::array<int, 4> angles{-90, 0, 90, 180};
    return angles[static_cast<std::size_t>(label_)];
  }

  constexpr int clockwise_turns() const noexcept {
    constexpr std::array<int, 4> turns{3, 0, 1, 2};
    return turns[static_cast<std::size_t>(label_)];
  }

  constexpr bool is_upright() const noexcept { return label_ == 1; }

  friend constexpr bool operator==(RotationClass, RotationClass) = default;

  static constexpr std::array<RotationClass, 4> all() {
    return {RotationClass(0), RotationClass(1), RotationClass(2), RotationClass(3)};
  }

 private:
  explicit constexpr RotationClass(int label) : label_(label) {}
  int label_ = 1;
};

// Lossless clockwise rotation by turns_cw quarter turns.
// One clockwise turn maps output (r', c') to input (H-1-c', r').
inline ImageBuffer rotate_quarter(const ImageBuffer& img, int turns_cw) {
  const int turns = ((turns_cw % 4) + 4) % 4;
  if (turns == 0) return img;
  const int w = img.width();
  const int h = img.height();
  const int out_w = (turns == 2) ? w : h;
  const int out_h = (turns == 2) ? h : w;
  std::vector<std::uint8_t> out(img.data().size());
  const auto src = img.data();
  std::size_t o = 0;
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      int sr = 0;
      int sc = 0;
      switch (turns) {
        case 1: sr = h - 1 - c; sc = r; break;
        case 2: sr = h - 1 - r; sc = w - 1 - c; break;
        default: sr = c; sc = w - 1 - r; break;
      }
      const std::size_t s = img.index(sr, sc);
      out[o++] = src[s];
      out[o++] = src[s + 1];
      out[o++] = src[s + 2];
    }
  }
  return ImageBuffer(out_w, out_h, std::move(out));
}

inline ImageBuffer apply_rotation_class(const ImageBuffer& img, RotationClass cls) {
  return rotate_quarter(img, cls.clockwise_turns());
}

// Quarter turns that undo apply_rotation_class(., cls).
constexpr int correction_turns(RotationClass cls) noexcept {
  return (4 - cls.clockwise_turns()) % 4;
}

// Bilinear resampling with half-pixel sample centres, edge-clamped.
inline ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw InputError("resize target must be at least 1x1");
  if (out_w == img.width() && out_h == img.height()) return img;
  const int w = img.width();
  const int h = img.height();
  const double sx = static_cast<double>(w) / out_w;
  const double sy = static_cast<double>(h) / out_h;

  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int n_out, int n_in, double scale) {
    std::vector<Tap> t(static_cast<std::size_t>(n_out));
    for (int o = 0; o < n_out; ++o) {
      double pos = (o + 0.5) * scale - 0.5;
      pos = std::clamp(pos, 0.0, static_cast<double>(n_in - 1));
      const int i0 = static_cast<int>(std::floor(pos));
      const int i1 = std::min(i0 + 1, n_in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, pos - i0};
    }
    return t;
  };
  const auto xt = taps(out_w, w, sx);
  const auto yt = taps(out_h, h, sy);

  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_w) * out_h * 3);
  const auto src = img.data();
  std::size_t o = 0;
  for (int r = 0; r < out_h; ++r) {
    const Tap& ty = yt[static_cast<std::size_t>(r)];
    for (int c = 0; c < out_w; ++c) {
      const Tap& tx = xt[static_cast<std::size_t>(c)];
      for (int k = 0; k < 3; ++k) {
        const double p00 = src[img.index(ty.i0, tx.i0, k)];
        const double p01 = src[img.index(ty.i0, tx.i1, k)];
        const double p10 = src[img.index(ty.i1, tx.i0, k)];
        const double p11 = src[img.index(ty.i1, tx.i1, k)];
        const double top = p00 + (p01 - p00) * tx.f;
        const double bot = p10 + (p11 - p10) * tx.f;
        const double v = top + (bot - top) * ty.f;
        out[o++] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return ImageBuffer(out_w, out_h, std::move(out));
}

// Anchors img at the top-left of an out_w x out_h canvas filled with `fill`.
inline ImageBuffer pad_to(const ImageBuffer& img, int out_w, int out_h, Rgb fill = kWhite) {
  if (out_w < img.width() || out_h < img.height()) throw InputError("pad target smaller than source");
  if (out_w == img.width() && out_h == img.height()) return img;
  ImageBuffer out(out_w, out_h, fill);
  const auto src = img.data();
  auto dst = out.data();
  const std::size_t row_bytes = static_cast<std::size_t>(img.width()) * 3;
  for (int r = 0; r < img.height(); ++r) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(img.index(r, 0)), row_bytes,
                dst.begin() + static_cast<std::ptrdiff_t>(out.index(r, 0)));
  }
  return out;
}

// Copies the w x h window whose top-left corner is (row, col).
inline ImageBuffer crop(const ImageBuffer& img, int col, int row, int w, int h) {
  if (col < 0 || row < 0 || col + w > img.width() || row + h > img.height()) {
    throw InputError("crop window outside image");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h * 3);
  const auto src = img.data();
  const std::size_t row_bytes = static_cast<std::size_t>(w) * 3;
  for (int r = 0; r < h; ++r) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(img.index(row + r, col)), row_bytes,
                out.begin() + static_cast<std::ptrdiff_t>(r * row_bytes));
  }
  return ImageBuffer(w, h, std::move(out));
}

}  // namespace orient
