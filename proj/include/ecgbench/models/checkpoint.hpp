#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ecgbench/data/record.hpp"
#include "ecgbench/models/params.hpp"

namespace ecgbench::models {

namespace fs = std::filesystem;

// <stem>.ckpt is a text manifest:
//   # key: value            metadata (seed, version, ...)
//   config <field> <value>  model config echo
//   payload <file>          sibling payload name
//   param <name> <d0,d1,..> learnable array, in payload order
//   buffer <name> <dims>    non-learnable state, after all params
// <stem>.f32 holds the arrays back to back as little-endian f32.

struct Checkpoint {
  ModelParams<float> params;
  std::vector<std::pair<std::string, std::string>> meta;

  std::string get(const std::string& key, const std::string& fallback = "") const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    return fallback;
  }
};

namespace detail {

inline std::string dims(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

inline Shape parse_dims(const std::string& s) {
  Shape out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(std::stoull(item));
  return out;
}

}  // namespace detail

/// Writes the manifest and payload; returns the manifest path.
template <class T>
fs::path save_checkpoint(const ModelParams<T>& p, const fs::path& stem,
                         const std::vector<std::pair<std::string, std::string>>& meta = {}) {
  fs::path manifest = stem;
  manifest.replace_extension(".ckpt");
  fs::path payload = stem;
  payload.replace_extension(".f32");
  std::ofstream os(manifest, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + manifest.string());
  for (const auto& [k, v] : meta) os << "# " << k << ": " << v << '\n';
  for (const auto& [k, v] : p.config.fields()) os << "config " << k << ' ' << v << '\n';
  os << "payload " << payload.filename().string() << '\n';
  std::ofstream ps(payload, std::ios::binary);
  if (!ps) throw std::runtime_error("cannot write checkpoint payload " + payload.string());
  auto emit = [&](const char* kind, const std::string& name, const Array<T>& a) {
    os << kind << ' ' << name << ' ' << detail::dims(a.shape()) << '\n';
    const Array<float> f = a.template cast<float>();
    data::detail::write_le_floats(ps, f.values());
  };
  for (const auto& n : p.names) emit("param", n, p.at(n));
  for (const auto& n : p.buffer_names) emit("buffer", n, p.buffer(n));
  return manifest;
}

inline Checkpoint load_checkpoint(const fs::path& path) {
  fs::path manifest = path;
  if (manifest.extension() != ".ckpt") manifest.replace_extension(".ckpt");
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot read checkpoint " + manifest.string());
  Checkpoint ck;
  std::map<std::string, std::string> fields;
  std::vector<std::tuple<bool, std::string, Shape>> table;
  std::string payload_name, line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        ck.meta.emplace_back(data::detail::trim(line.substr(1, colon - 1)), data::detail::trim(line.substr(colon + 1)));
      }
      continue;
    }
    std::istringstream ls(line);
    std::string kind, name, rest;
    ls >> kind >> name;
    std::getline(ls, rest);
    rest = data::detail::trim(rest);
    if (kind == "config") {
      fields[name] = rest;
    } else if (kind == "payload") {
      payload_name = name;
    } else if (kind == "param" || kind == "buffer") {
      table.emplace_back(kind == "param", name, detail::parse_dims(rest));
    } else {
      throw std::runtime_error(manifest.string() + ": unknown line '" + line + "'");
    }
  }
  ck.params.config = ModelConfig::from_fields(fields);
  if (payload_name.empty()) throw std::runtime_error(manifest.string() + ": no payload line");
  const std::string bytes = data::detail::read_file(manifest.parent_path() / payload_name);
  std::size_t expected = 0;
  for (const auto& [learn, name, shape] : table) expected += diff::element_count(shape) * 4;
  if (bytes.size() != expected) {
    throw std::runtime_error(manifest.string() + ": payload holds " + std::to_string(bytes.size()) +
                             " bytes, table expects " + std::to_string(expected));
  }
  std::size_t off = 0;
  for (const auto& [learn, name, shape] : table) {
    const std::size_t n = diff::element_count(shape);
    Array<float> a(shape, data::detail::read_le_floats(bytes.data() + off, n));
    off += n * 4;
    if (learn) {
      ck.params.add(name, std::move(a));
    } else {
      ck.params.add_buffer(name, std::move(a));
    }
  }
  return ck;
}

}  // namespace ecgbench::models
