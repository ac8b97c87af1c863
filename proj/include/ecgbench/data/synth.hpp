#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgbench/data/record.hpp"
#include "ecgbench/util/rng.hpp"

namespace ecgbench::data {

/// Desk-scale surrogate dataset description.
struct SynthConfig {
  std::vector<int> classes;  // 1-based label indices
  std::size_t records_per_class = 60;
  double duration_s = 10.0;
  int n_leads = 12;
  double cooccurrence = 0.2;  // probability of one extra label per record
  double noise = 0.1;         // white-noise standard deviation
  std::uint64_t seed = 0;

  /// Classes 1..k with optional exclusions.
  static std::vector<int> first_classes(int k, const std::vector<int>& exclude = {}) {
    if (k < 1 || k > static_cast<int>(kNumClasses)) {
      throw std::invalid_argument("class count " + std::to_string(k) + " outside 1..19");
    }
    std::vector<int> out;
    for (int c = 1; c <= k; ++c)
      if (std::find(exclude.begin(), exclude.end(), c) == exclude.end()) out.push_back(c);
    return out;
  }

  void validate() const {
    if (classes.empty()) throw std::invalid_argument("synth: no classes");
    if (classes.size() > kNumClasses) {
      throw std::invalid_argument("synth: " + std::to_string(classes.size()) +
                                  " classes requested, label space has 19");
    }
    for (int c : classes) {
      if (c < 1 || c > static_cast<int>(kNumClasses)) {
        throw std::invalid_argument("synth: class " + std::to_string(c) + " outside 1..19");
      }
    }
    if (n_leads != 9 && n_leads != 12) throw std::invalid_argument("synth: n_leads must be 9 or 12");
    if (duration_s < kMinDurationSeconds || duration_s > kMaxDurationSeconds) {
      throw std::invalid_argument("synth: duration must lie in [5, 120] s");
    }
    if (cooccurrence < 0 || cooccurrence > 1) throw std::invalid_argument("synth: cooccurrence must lie in [0, 1]");
    if (noise < 0) throw std::invalid_argument("synth: noise must be non-negative");
  }

  std::string describe() const {
    std::ostringstream os;
    os << "classes=";
    for (std::size_t i = 0; i < classes.size(); ++i) os << (i ? "," : "") << classes[i];
    os << " records_per_class=" << records_per_class << " duration_s=" << duration_s
       << " n_leads=" << n_leads << " cooccurrence=" << cooccurrence << " noise=" << noise
       << " seed=" << seed;
    return os.str();
  }
};

/// Fixed per-class waveform signature: a pulse train with class-specific
/// period and shape plus a class-specific sinusoid, projected onto the leads
/// with a class-specific gain pattern.
struct ClassSignature {
  double period_s;
  double pulse_width_s;
  bool biphasic;
  double sine_hz;
  std::vector<double> lead_gain;

  static ClassSignature of(int cls, int n_leads) {
    ClassSignature s;
    s.period_s = 0.40 + 0.045 * cls;
    s.pulse_width_s = 0.012 + 0.004 * (cls % 4);
    s.biphasic = cls % 2 == 0;
    s.sine_hz = 1.5 + 1.3 * (cls - 1);
    for (int l = 0; l < n_leads; ++l) {
      const double phase = 1.7 * cls * (l + 1) + 0.9 * cls;
      const double mag = 0.35 + 0.65 * std::abs(std::cos(phase));
      s.lead_gain.push_back(std::sin(2.3 * phase + cls) >= 0 ? mag : -mag);
    }
    return s;
  }

  /// Unit-lead waveform at time t for pulse phase offset and sine phase.
  double waveform(double t, double pulse_offset, double sine_phase) const {
    // distance to the nearest pulse centre
    double u = std::fmod(t - pulse_offset, period_s);
    if (u < 0) u += period_s;
    if (u > period_s / 2) u -= period_s;
    const double z = u / pulse_width_s;
    const double pulse = biphasic ? -1.6487 * z * std::exp(-0.5 * z * z) : std::exp(-0.5 * z * z);
    return 1.5 * pulse + 0.5 * std::sin(2 * std::numbers::pi * sine_hz * t + sine_phase);
  }
};

/// Generates records_per_class records for each configured class. A record's
/// signal is the sum of its positive classes' signatures plus white noise.
inline std::vector<ECGRecord> synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = substream(cfg.seed, "synth");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t T = static_cast<std::size_t>(std::llround(cfg.duration_s * kSamplingRate));
  const std::size_t leads = static_cast<std::size_t>(cfg.n_leads);

  std::vector<ClassSignature> sigs;
  for (int c : cfg.classes) sigs.push_back(ClassSignature::of(c, cfg.n_leads));

  std::vector<ECGRecord> out;
  std::size_t serial = 0;
  for (std::size_t k = 0; k < cfg.classes.size(); ++k) {
    for (std::size_t r = 0; r < cfg.records_per_class; ++r) {
      std::vector<std::size_t> present{k};
      if (cfg.classes.size() > 1 && unit(rng) < cfg.cooccurrence) {
        std::uniform_int_distribution<std::size_t> pick(0, cfg.classes.size() - 2);
        std::size_t other = pick(rng);
        if (other >= k) ++other;
        present.push_back(other);
      }
      ECGRecord rec;
      std::ostringstream id;
      id << "synth" << std::setw(5) << std::setfill('0') << serial++;
      rec.record_id = id.str();
      rec.fs = kSamplingRate;
      rec.n_leads = cfg.n_leads;
      std::vector<float> samples(leads * T, 0.0f);
      for (auto p : present) {
        rec.labels[static_cast<std::size_t>(cfg.classes[p] - 1)] = 1;
        const auto& sig = sigs[p];
        const double offset = unit(rng) * sig.period_s;
        const double sphase = unit(rng) * 2 * std::numbers::pi;
        for (std::size_t i = 0; i < T; ++i) {
          const double w = sig.waveform(static_cast<double>(i) / kSamplingRate, offset, sphase);
          for (std::size_t l = 0; l < leads; ++l) samples[l * T + i] += static_cast<float>(sig.lead_gain[l] * w);
        }
      }
      if (cfg.noise > 0) {
        for (auto& v : samples) v += static_cast<float>(cfg.noise * gauss(rng));
      }
      rec.samples = diff::Array<float>(diff::Shape{leads, T}, std::move(samples));
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace ecgbench::data
