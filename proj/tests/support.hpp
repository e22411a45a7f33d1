#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "orient/image.hpp"
#include "orient/rng.hpp"

namespace orient::testing {

inline ImageBuffer random_image(Rng& rng, int w, int h) {
  ImageBuffer img(w, h);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(byte(rng));
  return img;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("orient-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace orient::testing
