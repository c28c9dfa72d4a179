#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fpdhf {

/// Flat key=value text with optional [section] headers. Lines starting with
/// '#' or ';' are comments. Keys before the first header belong to the
/// unnamed section "". Order of sections and keys is preserved.
class KeyValueConfig {
 public:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };

  /// Throws std::runtime_error naming `source` and the line on syntax errors.
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  const std::vector<Section>& sections() const { return sections_; }
  const Section* find_section(const std::string& name) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;

  /// Inserts or replaces; creates the section when missing.
  void set(const std::string& section, const std::string& key, const std::string& value);

  /// Applies "key=value" or "section.key=value" (section is everything
  /// before the last '.' of the key). Bare keys go to `default_section`.
  void apply_override(const std::string& assignment, const std::string& default_section);

  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_long(const std::string& section, const std::string& key, long fallback) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;

  std::string to_string() const;

 private:
  std::vector<Section> sections_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace fpdhf
