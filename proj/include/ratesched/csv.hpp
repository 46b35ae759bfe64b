#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ratesched {

// Minimal CSV writer with fixed float formatting so identical runs produce
// byte-identical files.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  }

  void header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i) out_ << ',';
      out_ << names[i];
    }
    out_ << '\n';
  }

  CsvWriter& field(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    sep();
    out_ << buf;
    return *this;
  }
  CsvWriter& field(int v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& field(std::uint64_t v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& field(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

}  // namespace ratesched
