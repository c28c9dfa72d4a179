#include "fpdhf/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fpdhf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& value, const char* type) {
  throw std::runtime_error("config: [" + section + "] " + key + " = '" + value +
                           "' is not a valid " + type);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  std::string current;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error(source + ":" + std::to_string(lineno) + ": unterminated section header");
      current = trim(t.substr(1, t.size() - 2));
      if (!cfg.find_section(current)) cfg.sections_.push_back({current, {}});
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": empty key");
    cfg.set(current, key, trim(t.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open config file");
  return parse(in, path.string());
}

const KeyValueConfig::Section* KeyValueConfig::find_section(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

std::optional<std::string> KeyValueConfig::get(const std::string& section,
                                               const std::string& key) const {
  const Section* s = find_section(section);
  if (!s) return std::nullopt;
  for (const auto& [k, v] : s->entries)
    if (k == key) return v;
  return std::nullopt;
}

void KeyValueConfig::set(const std::string& section, const std::string& key,
                         const std::string& value) {
  Section* target = nullptr;
  for (auto& s : sections_)
    if (s.name == section) target = &s;
  if (!target) {
    sections_.push_back({section, {}});
    target = &sections_.back();
  }
  for (auto& [k, v] : target->entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  target->entries.emplace_back(key, value);
}

void KeyValueConfig::apply_override(const std::string& assignment,
                                    const std::string& default_section) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::runtime_error("override '" + assignment + "' is not of the form key=value");
  const std::string lhs = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto dot = lhs.rfind('.');
  if (dot == std::string::npos) {
    set(default_section, lhs, value);
  } else {
    set(lhs.substr(0, dot), lhs.substr(dot + 1), value);
  }
}

double KeyValueConfig::get_double(const std::string& section, const std::string& key,
                                  double fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) bad_value(section, key, *v, "number");
    return d;
  } catch (const std::invalid_argument&) {
    bad_value(section, key, *v, "number");
  } catch (const std::out_of_range&) {
    bad_value(section, key, *v, "number");
  }
}

long KeyValueConfig::get_long(const std::string& section, const std::string& key,
                              long fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) bad_value(section, key, *v, "integer");
  return out;
}

std::string KeyValueConfig::get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

std::string KeyValueConfig::to_string() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : sections_) {
    if (!s.name.empty()) {
      if (!first) out << '\n';
      out << '[' << s.name << "]\n";
    }
    for (const auto& [k, v] : s.entries) out << k << " = " << v << '\n';
    first = false;
  }
  return out.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace fpdhf
