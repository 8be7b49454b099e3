#include "lsef/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lsef/error.hpp"
#include "lsef/random.hpp"

namespace lsef {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

ConfigMap parse_config(std::string_view text) {
  ConfigMap out;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']' && line.size() > 2, ErrorKind::configuration,
              "config line " + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string_view::npos, ErrorKind::configuration,
            "config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorKind::configuration,
            "config line " + std::to_string(line_no) + ": empty key");
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    require(!out.count(full), ErrorKind::configuration,
            "config line " + std::to_string(line_no) + ": duplicate key " + full);
    out[std::move(full)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_text(const ConfigMap& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t config_fingerprint(const ConfigMap& cfg) { return fnv1a64(canonical_text(cfg)); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ConfigMap merge(ConfigMap base, const ConfigMap& over) {
  for (const auto& [k, v] : over) base[k] = v;
  return base;
}

std::string get_string(const ConfigMap& cfg, const std::string& key, const std::string& fallback) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

double get_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  const char* begin = it->second.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  require(end != begin && *end == '\0' && errno == 0, ErrorKind::configuration,
          "config key " + key + ": '" + it->second + "' is not a number");
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc{} && ptr == s.data() + s.size() && !s.empty(), ErrorKind::configuration,
          what + ": '" + s + "' is not a non-negative integer");
  return v;
}

std::uint64_t get_u64(const ConfigMap& cfg, const std::string& key, std::uint64_t fallback) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : parse_u64(it->second, "config key " + key);
}

bool get_bool(const ConfigMap& cfg, const std::string& key, bool fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  const auto& s = it->second;
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  fail(ErrorKind::configuration, "config key " + key + ": '" + s + "' is not a boolean");
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  while (true) {
    const auto pos = text.find(sep);
    const auto item = trim(text.substr(0, pos));
    if (!item.empty()) out.emplace_back(item);
    if (pos == std::string_view::npos) break;
    text = text.substr(pos + 1);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace lsef
