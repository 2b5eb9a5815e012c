#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "geokey/error.hpp"

// Checks that `expr` throws geokey::Error with the given code.
#define CHECK_ERROR(expr, ec)                                   \
  do {                                                          \
    bool thrown_ = false;                                       \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const geokey::Error& e_) {                         \
      thrown_ = true;                                           \
      CHECK_MESSAGE(e_.code() == (ec), "got ", e_.what());      \
    }                                                           \
    CHECK_MESSAGE(thrown_, #expr " did not throw");             \
  } while (0)

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("geokey-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
