#pragma once

// Flat INI-style configuration: "[section]" headers and "key = value" lines,
// '#' or ';' comments, duplicate keys rejected. Section order is preserved so
// solver entries run in the order written.

#include <string>
#include <vector>

namespace spdhg {

class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text,
                          const std::string& origin = "<config>");
  static ConfigFile load(const std::string& path);

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;

  // Missing keys throw std::invalid_argument naming section and key.
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long get_long(const std::string& section, const std::string& key,
                long fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  // Comma-separated list; empty value -> empty list.
  std::vector<std::string> get_list(const std::string& section,
                                    const std::string& key) const;

  std::vector<std::string> sections() const;  // in file order
  std::vector<std::string> keys(const std::string& section) const;
  const std::string& text() const { return text_; }

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  const Section* find(const std::string& name) const;
  const std::string* lookup(const std::string& section,
                            const std::string& key) const;

  std::string text_;
  std::vector<Section> sections_;
};

}  // namespace spdhg
