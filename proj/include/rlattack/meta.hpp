#pragma once

// Side-car metadata files: one "key=value" per line, keys sorted.

#include <filesystem>
#include <map>
#include <string>

namespace rlattack {

using MetaMap = std::map<std::string, std::string>;

void save_meta(const MetaMap& meta, const std::filesystem::path& path);
MetaMap load_meta(const std::filesystem::path& path);
const std::string& meta_get(const MetaMap& meta, const std::string& key);

// Shortest round-trip decimal, independent of the global locale.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace rlattack
