#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgbench/data/label_space.hpp"
#include "ecgbench/diffcore/array.hpp"

namespace ecgbench::data {

inline constexpr int kSamplingRate = 500;
inline constexpr double kMinDurationSeconds = 5.0;
inline constexpr double kMaxDurationSeconds = 120.0;

/// Raised when a record file is malformed or violates the record invariants.
class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One multi-lead recording. `samples` is lead-major, shape (n_leads, T).
struct ECGRecord {
  std::string record_id;
  int fs = kSamplingRate;
  int n_leads = 12;
  diff::Array<float> samples;
  LabelVector labels{};

  std::size_t n_samples() const { return samples.rank() == 2 ? samples.dim(1) : 0; }
  double duration() const { return static_cast<double>(n_samples()) / fs; }
  std::vector<int> label_indices() const {
    std::vector<int> out;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      if (labels[c]) out.push_back(static_cast<int>(c) + 1);
    return out;
  }
};

inline void validate(const ECGRecord& r) {
  const std::string who = "record '" + r.record_id + "': ";
  if (r.fs != kSamplingRate) {
    throw RecordError(who + "sampling rate " + std::to_string(r.fs) + " Hz, expected 500");
  }
  if (r.n_leads != 9 && r.n_leads != 12) {
    throw RecordError(who + "lead count " + std::to_string(r.n_leads) + ", expected 9 or 12");
  }
  if (r.samples.rank() != 2 || r.samples.dim(0) != static_cast<std::size_t>(r.n_leads)) {
    throw RecordError(who + "sample array shape " + diff::to_string(r.samples.shape()) +
                      " does not hold " + std::to_string(r.n_leads) + " lead rows");
  }
  if (r.duration() < kMinDurationSeconds || r.duration() > kMaxDurationSeconds) {
    throw RecordError(who + "duration " + std::to_string(r.duration()) +
                      " s outside [5, 120] s");
  }
  bool any = false;
  for (auto v : r.labels) any = any || v;
  if (!any) throw RecordError(who + "no positive label");
}

namespace detail {

inline void write_le_floats(std::ostream& os, std::span<const float> v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
  } else {
    for (float f : v) {
      auto u = std::bit_cast<std::uint32_t>(f);
      u = ((u & 0xffu) << 24) | ((u & 0xff00u) << 8) | ((u >> 8) & 0xff00u) | (u >> 24);
      os.write(reinterpret_cast<const char*>(&u), 4);
    }
  }
}

inline std::vector<float> read_le_floats(const char* bytes, std::size_t count) {
  std::vector<float> out(count);
  std::memcpy(out.data(), bytes, count * sizeof(float));
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& f : out) {
      auto u = std::bit_cast<std::uint32_t>(f);
      u = ((u & 0xffu) << 24) | ((u & 0xff00u) << 8) | ((u >> 8) & 0xff00u) | (u >> 24);
      f = std::bit_cast<float>(u);
    }
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw RecordError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

struct Header {
  std::string record_id;
  int fs = 0;
  int n_leads = 0;
  std::size_t n_samples = 0;
  std::vector<int> labels;
};

inline Header parse_header(const std::string& text, const std::string& origin) {
  Header h;
  bool seen_id = false, seen_fs = false, seen_leads = false, seen_n = false, seen_labels = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw RecordError(origin + ": malformed header line '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "record_id") {
        h.record_id = val;
        seen_id = true;
      } else if (key == "fs") {
        h.fs = std::stoi(val);
        seen_fs = true;
      } else if (key == "n_leads") {
        h.n_leads = std::stoi(val);
        seen_leads = true;
      } else if (key == "n_samples") {
        h.n_samples = std::stoull(val);
        seen_n = true;
      } else if (key == "labels") {
        std::istringstream ls(val);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
          tok = trim(tok);
          if (!tok.empty()) h.labels.push_back(std::stoi(tok));
        }
        seen_labels = true;
      }
    } catch (const std::logic_error&) {
      throw RecordError(origin + ": bad value for '" + key + "': '" + val + "'");
    }
  }
  if (!seen_id || !seen_fs || !seen_leads || !seen_n || !seen_labels) {
    throw RecordError(origin + ": header must define record_id, fs, n_leads, n_samples, labels");
  }
  return h;
}

inline std::string format_header(const ECGRecord& r) {
  std::ostringstream os;
  os << "record_id=" << r.record_id << '\n'
     << "fs=" << r.fs << '\n'
     << "n_leads=" << r.n_leads << '\n'
     << "n_samples=" << r.n_samples() << '\n'
     << "labels=";
  const auto idx = r.label_indices();
  for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? "," : "") << idx[i];
  os << '\n';
  return os.str();
}

inline ECGRecord assemble(const Header& h, const char* payload, std::size_t payload_bytes,
                          const std::string& origin) {
  if (h.n_leads <= 0 || h.n_samples == 0) {
    throw RecordError(origin + ": empty record (n_leads=" + std::to_string(h.n_leads) +
                      ", n_samples=" + std::to_string(h.n_samples) + ")");
  }
  const std::size_t expected = static_cast<std::size_t>(h.n_leads) * h.n_samples * sizeof(float);
  if (payload_bytes != expected) {
    throw RecordError(origin + ": payload holds " + std::to_string(payload_bytes) +
                      " bytes, expected " + std::to_string(expected) + " (" +
                      std::to_string(h.n_leads) + " leads x " + std::to_string(h.n_samples) +
                      " samples x 4)");
  }
  ECGRecord r;
  r.record_id = h.record_id;
  r.fs = h.fs;
  r.n_leads = h.n_leads;
  r.samples = diff::Array<float>(
      diff::Shape{static_cast<std::size_t>(h.n_leads), h.n_samples},
      read_le_floats(payload, static_cast<std::size_t>(h.n_leads) * h.n_samples));
  for (int l : h.labels) {
    if (l < 1 || l > static_cast<int>(kNumClasses)) {
      throw RecordError(origin + ": unknown label index " + std::to_string(l) +
                        " (valid: 1..19)");
    }
    r.labels[static_cast<std::size_t>(l - 1)] = 1;
  }
  validate(r);
  return r;
}

}  // namespace detail

enum class RecordLayout {
  two_file,   // <stem>.hdr + <stem>.f32
  container,  // <stem>.ecg: u32 LE header length, header, payload
};

/// Reads a record from a `.hdr` (with sibling `.f32`) or `.ecg` container.
inline ECGRecord load_record(const std::filesystem::path& path) {
  const std::string origin = path.string();
  if (path.extension() == ".ecg") {
    const std::string bytes = detail::read_file(path);
    if (bytes.size() < 4) throw RecordError(origin + ": truncated container");
    std::uint32_t hlen = 0;
    for (int i = 3; i >= 0; --i) hlen = (hlen << 8) | static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)]);
    if (4 + static_cast<std::size_t>(hlen) > bytes.size()) {
      throw RecordError(origin + ": header length " + std::to_string(hlen) + " exceeds file size");
    }
    const auto h = detail::parse_header(bytes.substr(4, hlen), origin);
    return detail::assemble(h, bytes.data() + 4 + hlen, bytes.size() - 4 - hlen, origin);
  }
  std::filesystem::path hdr = path;
  if (hdr.extension() == ".f32") hdr.replace_extension(".hdr");
  if (hdr.extension() != ".hdr") throw RecordError(origin + ": expected a .hdr, .f32 or .ecg path");
  std::filesystem::path payload = hdr;
  payload.replace_extension(".f32");
  const auto h = detail::parse_header(detail::read_file(hdr), hdr.string());
  if (!std::filesystem::exists(payload)) throw RecordError(origin + ": missing payload " + payload.string());
  const std::string bytes = detail::read_file(payload);
  return detail::assemble(h, bytes.data(), bytes.size(), payload.string());
}

/// Writes `r` and returns the path a manifest should reference.
inline std::filesystem::path save_record(const ECGRecord& r, const std::filesystem::path& stem,
                                         RecordLayout layout = RecordLayout::two_file) {
  validate(r);
  const std::string header = detail::format_header(r);
  std::filesystem::path out = stem;
  if (layout == RecordLayout::container) {
    out.replace_extension(".ecg");
    std::ofstream os(out, std::ios::binary);
    if (!os) throw RecordError("cannot write " + out.string());
    const auto hlen = static_cast<std::uint32_t>(header.size());
    const char len[4] = {static_cast<char>(hlen & 0xff), static_cast<char>((hlen >> 8) & 0xff),
                         static_cast<char>((hlen >> 16) & 0xff), static_cast<char>(hlen >> 24)};
    os.write(len, 4);
    os << header;
    detail::write_le_floats(os, r.samples.values());
    return out;
  }
  out.replace_extension(".hdr");
  {
    std::ofstream os(out, std::ios::binary);
    if (!os) throw RecordError("cannot write " + out.string());
    os << header;
  }
  std::filesystem::path payload = stem;
  payload.replace_extension(".f32");
  std::ofstream os(payload, std::ios::binary);
  if (!os) throw RecordError("cannot write " + payload.string());
  detail::write_le_floats(os, r.samples.values());
  return out;
}

}  // namespace ecgbench::data
