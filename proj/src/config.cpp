#include "spdhg/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spdhg {

namespace {

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, long line,
                       const std::string& what) {
  throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text,
                             const std::string& origin) {
  ConfigFile cfg;
  cfg.text_ = text;
  std::istringstream in(text);
  std::string raw;
  long lineno = 0;
  Section* current = nullptr;
  while (std::getline(in, raw)) {
    ++lineno;
    const size_t hash = raw.find_first_of("#;");
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, lineno, "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail(origin, lineno, "empty section name");
      for (const Section& s : cfg.sections_)
        if (s.name == name) fail(origin, lineno, "duplicate section [" + name + "]");
      cfg.sections_.push_back({name, {}});
      current = &cfg.sections_.back();
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
    if (current == nullptr) fail(origin, lineno, "key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, lineno, "empty key");
    for (const auto& [k, v] : current->entries)
      if (k == key)
        fail(origin, lineno, "duplicate key '" + key + "' in [" + current->name + "]");
    current->entries.emplace_back(key, value);
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

const ConfigFile::Section* ConfigFile::find(const std::string& name) const {
  for (const Section& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

const std::string* ConfigFile::lookup(const std::string& section,
                                      const std::string& key) const {
  const Section* s = find(section);
  if (s == nullptr) return nullptr;
  for (const auto& [k, v] : s->entries)
    if (k == key) return &v;
  return nullptr;
}

bool ConfigFile::has_section(const std::string& section) const {
  return find(section) != nullptr;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return lookup(section, key) != nullptr;
}

std::string ConfigFile::get(const std::string& section,
                            const std::string& key) const {
  const std::string* v = lookup(section, key);
  if (v == nullptr)
    throw std::invalid_argument("missing key '" + key + "' in [" + section + "]");
  return *v;
}

std::string ConfigFile::get_or(const std::string& section,
                               const std::string& key,
                               const std::string& fallback) const {
  const std::string* v = lookup(section, key);
  return v == nullptr ? fallback : *v;
}

double ConfigFile::get_double(const std::string& section,
                              const std::string& key, double fallback) const {
  const std::string* v = lookup(section, key);
  if (v == nullptr) return fallback;
  double out = 0.0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size())
    throw std::invalid_argument("bad number '" + *v + "' for '" + key +
                                "' in [" + section + "]");
  return out;
}

long ConfigFile::get_long(const std::string& section, const std::string& key,
                          long fallback) const {
  const std::string* v = lookup(section, key);
  if (v == nullptr) return fallback;
  long out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size())
    throw std::invalid_argument("bad integer '" + *v + "' for '" + key +
                                "' in [" + section + "]");
  return out;
}

std::uint64_t ConfigFile::get_u64(const std::string& section,
                                  const std::string& key,
                                  std::uint64_t fallback) const {
  const std::string* v = lookup(section, key);
  if (v == nullptr) return fallback;
  std::uint64_t out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size())
    throw std::invalid_argument("bad unsigned integer '" + *v + "' for '" +
                                key + "' in [" + section + "]");
  return out;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  const std::string* v = lookup(section, key);
  if (v == nullptr) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw std::invalid_argument("bad boolean '" + *v + "' for '" + key +
                              "' in [" + section + "]");
}

std::vector<std::string> ConfigFile::get_list(const std::string& section,
                                              const std::string& key) const {
  std::vector<std::string> out;
  const std::string* v = lookup(section, key);
  if (v == nullptr) return out;
  std::string item;
  std::istringstream in(*v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> ConfigFile::sections() const {
  std::vector<std::string> out;
  out.reserve(sections_.size());
  for (const Section& s : sections_) out.push_back(s.name);
  return out;
}

std::vector<std::string> ConfigFile::keys(const std::string& section) const {
  std::vector<std::string> out;
  const Section* s = find(section);
  if (s == nullptr) return out;
  out.reserve(s->entries.size());
  for (const auto& [k, v] : s->entries) out.push_back(k);
  return out;
}

}  // namespace spdhg
