#pragma once

#include <map>
#include <string>
#include <vector>

#include "mimn/common.hpp"

namespace mimn {

// Plain key=value configuration with [section] headers and '#' comments.
// Keys are addressed as "section.key". Insertion order is preserved so the
// echoed file is stable.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Canonical serialization, grouped by section in first-use order.
  std::string echo() const;
  void write_file(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

}  // namespace mimn
