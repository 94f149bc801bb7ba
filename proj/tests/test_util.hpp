#pragma once

#include "blicomb/types.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <unistd.h>

namespace testutil {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("blicomb_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    const auto p = file(name);
    std::ofstream(p) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline blicomb::Matrix random_matrix(blicomb::Index rows, blicomb::Index cols, std::mt19937_64& rng,
                                     double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  blicomb::Matrix m(rows, cols);
  for (blicomb::Index i = 0; i < rows; ++i)
    for (blicomb::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline blicomb::BilingualDictionary identity_dict(blicomb::Index n) {
  blicomb::BilingualDictionary d;
  for (blicomb::Index i = 0; i < n; ++i) d.add(i, i);
  return d;
}

}  // namespace testutil
