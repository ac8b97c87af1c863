#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ecgbench/data/record.hpp"

namespace ecgbench::training {

struct EpochEntry {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_macro_f1 = 0;
  double val_hamming = 0;
  double seconds = 0;  // 0 unless wall time was recorded
};

/// One entry per completed epoch.
struct RunLog {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<EpochEntry> entries;
  std::size_t best_epoch = 0;  // 0 when empty
};

inline constexpr const char* kRunLogHeader = "epoch,train_loss,val_macro_f1,val_hamming,seconds,best";

inline std::string format_runlog(const RunLog& log) {
  std::string out;
  for (const auto& [k, v] : log.meta) out += "# " + k + ": " + v + "\n";
  out += std::string(kRunLogHeader) + "\n";
  char buf[256];
  for (const auto& e : log.entries) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.3f,%d\n", e.epoch, e.train_loss, e.val_macro_f1,
                  e.val_hamming, e.seconds, e.epoch == log.best_epoch ? 1 : 0);
    out += buf;
  }
  return out;
}

inline void write_runlog(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write run log " + path.string());
  os << format_runlog(log);
}

inline RunLog read_runlog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read run log " + path.string());
  RunLog log;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        log.meta.emplace_back(data::detail::trim(line.substr(1, colon - 1)), data::detail::trim(line.substr(colon + 1)));
      }
      continue;
    }
    if (!header) {
      if (line != kRunLogHeader) throw std::runtime_error(path.string() + ": unexpected run log header '" + line + "'");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string f[6];
    for (auto& s : f) std::getline(ls, s, ',');
    EpochEntry e;
    try {
      e.epoch = std::stoull(f[0]);
      e.train_loss = std::stod(f[1]);
      e.val_macro_f1 = std::stod(f[2]);
      e.val_hamming = std::stod(f[3]);
      e.seconds = std::stod(f[4]);
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ": malformed run log row '" + line + "'");
    }
    if (f[5] == "1") log.best_epoch = e.epoch;
    log.entries.push_back(e);
  }
  if (!header) throw std::runtime_error(path.string() + ": missing run log header");
  return log;
}

}  // namespace ecgbench::training
