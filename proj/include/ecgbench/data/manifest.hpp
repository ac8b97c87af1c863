#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ecgbench/data/record.hpp"

namespace ecgbench::data {

namespace fs = std::filesystem;

/// A list of record references. `#`-prefixed lines carry `key: value`
/// metadata; every other non-blank line is one entry. An entry is a record
/// path, optionally followed by a tab and a window index (partition manifests
/// reference single slices). Relative paths resolve against the manifest's
/// directory.
struct Manifest {
  struct Entry {
    std::string path;
    std::optional<std::size_t> window;
  };

  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Entry> entries;

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    return std::nullopt;
  }

  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : meta)
      if (k == key) {
        v = value;
        return;
      }
    meta.emplace_back(key, value);
  }
};

inline Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    if (line.front() == '#') {
      const std::string body = detail::trim(line.substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;
      m.meta.emplace_back(detail::trim(body.substr(0, colon)), detail::trim(body.substr(colon + 1)));
      continue;
    }
    Manifest::Entry e;
    const auto tab = line.find('\t');
    e.path = line.substr(0, tab);
    if (tab != std::string::npos) {
      const std::string w = detail::trim(line.substr(tab + 1));
      try {
        std::size_t used = 0;
        e.window = std::stoul(w, &used);
        if (used != w.size()) throw std::invalid_argument(w);
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad window index '" + w + "'");
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void write_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& [k, v] : m.meta) os << "# " << k << ": " << v << '\n';
  for (const auto& e : m.entries) {
    os << e.path;
    if (e.window) os << '\t' << *e.window;
    os << '\n';
  }
}

/// Entry path made absolute against the manifest's directory.
inline fs::path resolve(const fs::path& manifest_path, const std::string& entry) {
  const fs::path p(entry);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

/// Entry path as written into a manifest located at `manifest_path`.
inline std::string relative_entry(const fs::path& manifest_path, const fs::path& target) {
  const fs::path base = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  return fs::relative(fs::absolute(target), fs::absolute(base)).generic_string();
}

}  // namespace ecgbench::data
