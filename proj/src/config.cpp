#include "mimn/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mimn {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      MIMN_CHECK(t.back() == ']', "config line " + std::to_string(lineno) +
                                      ": unterminated section header: " + t);
      section = trim(t.substr(1, t.size() - 2));
      MIMN_CHECK(!section.empty(), "config line " + std::to_string(lineno) + ": empty section");
      continue;
    }
    size_t eq = t.find('=');
    MIMN_CHECK(eq != std::string::npos,
               "config line " + std::to_string(lineno) + ": expected key = value, got: " + t);
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    MIMN_CHECK(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
    cfg.set(section.empty() ? key : section + "." + key, value);
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  MIMN_CHECK(in.good(), "cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) order_.push_back(key);
  values_[key] = value;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    fail("config: '" + key + "' is not a number: " + it->second);
  }
}

long Config::get_long(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stol(it->second);
  } catch (...) {
    fail("config: '" + key + "' is not an integer: " + it->second);
  }
}

int Config::get_int(const std::string& key, int fallback) const {
  return static_cast<int>(get_long(key, fallback));
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail("config: '" + key + "' is not a boolean: " + it->second);
}

std::string Config::echo() const {
  std::ostringstream out;
  std::string section;
  for (const std::string& key : order_) {
    size_t dot = key.find('.');
    std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (sec != section) {
      if (!out.str().empty()) out << "\n";
      if (!sec.empty()) out << "[" << sec << "]\n";
      section = sec;
    }
    out << name << " = " << values_.at(key) << "\n";
  }
  return out.str();
}

void Config::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  MIMN_CHECK(out.good(), "cannot write config: " + path);
  out << echo();
  MIMN_CHECK(out.good(), "config write failed: " + path);
}

}  // namespace mimn
