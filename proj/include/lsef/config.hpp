#pragma once

// Plain-text configuration: "[section]" headers and "key = value" lines,
// flattened to "section.key". '#' starts a comment. Later keys override
// earlier ones.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lsef {

using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::string_view text);
ConfigMap load_config_file(const std::string& path);

// Sorted "key=value" lines; identical maps give identical text.
std::string canonical_text(const ConfigMap& cfg);
std::uint64_t config_fingerprint(const ConfigMap& cfg);
std::string hex64(std::uint64_t v);

// Entries of `over` replace those of `base`.
ConfigMap merge(ConfigMap base, const ConfigMap& over);

// Typed access; a missing key returns the fallback, a malformed value is a
// configuration error naming the key.
std::string get_string(const ConfigMap& cfg, const std::string& key, const std::string& fallback);
double get_double(const ConfigMap& cfg, const std::string& key, double fallback);
std::uint64_t get_u64(const ConfigMap& cfg, const std::string& key, std::uint64_t fallback);
bool get_bool(const ConfigMap& cfg, const std::string& key, bool fallback);
std::uint64_t parse_u64(const std::string& text, const std::string& what);
std::vector<std::string> split_list(std::string_view text, char sep = ',');

std::string format_double(double v);  // round-trip exact

}  // namespace lsef
