#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "epiq/data/series.hpp"

namespace fixture {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("epiq_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline epiq::data::CountySeries series(std::string fips, std::vector<double> deaths, std::vector<double> cases = {},
                                       std::string state = "S") {
  epiq::data::CountySeries s;
  s.fips = std::move(fips);
  s.state = std::move(state);
  s.start = epiq::Date::from_ymd(2020, 3, 2);  // a Monday
  if (cases.empty()) cases.assign(deaths.size(), 0.0);
  s.daily_deaths = std::move(deaths);
  s.daily_cases = std::move(cases);
  s.mobility.assign(s.daily_deaths.size(), std::nullopt);
  return s;
}

}  // namespace fixture
