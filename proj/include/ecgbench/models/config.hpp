#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecgbench::models {

enum class Paradigm { resnet1d, bilstm, transformer, mamba2 };

inline constexpr std::array<Paradigm, 4> kParadigms{Paradigm::resnet1d, Paradigm::bilstm, Paradigm::transformer,
                                                    Paradigm::mamba2};

inline std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::resnet1d: return "resnet1d";
    case Paradigm::bilstm: return "bilstm";
    case Paradigm::transformer: return "transformer";
    case Paradigm::mamba2: return "mamba2";
  }
  return "?";
}

inline Paradigm parse_paradigm(const std::string& s) {
  for (auto p : kParadigms)
    if (to_string(p) == s) return p;
  throw std::invalid_argument("unknown model '" + s + "' (expected resnet1d, bilstm, transformer or mamba2)");
}

struct ModelConfig {
  Paradigm paradigm = Paradigm::resnet1d;
  std::size_t n_leads = 12;
  std::size_t n_classes = 19;
  std::size_t seq_len = 300;
  // Miniature configs (gradient checks) may use any lead count.
  bool relaxed = false;

  // resnet1d
  std::vector<std::size_t> widths{64, 128, 256, 512};
  std::size_t kernel = 7;
  std::size_t blocks_per_stage = 2;

  // bilstm
  std::size_t lstm_layers = 2;
  std::size_t hidden = 128;
  double lstm_dropout = 0.5;

  // transformer and mamba2 share d_model and head_dim
  std::size_t d_model = 128;
  std::size_t head_dim = 8;
  std::size_t patch = 3;
  std::size_t tf_layers = 2;
  std::size_t ffn = 256;
  std::size_t head_hidden = 64;
  double tf_dropout = 0.1;

  // mamba2
  std::size_t d_state = 64;
  std::size_t conv_kernel = 4;
  std::size_t expansion = 2;
  std::size_t chunk = 30;
  std::size_t mamba_layers = 2;
  double mamba_dropout = 0.2;

  std::size_t d_inner() const { return d_model * expansion; }
  std::size_t ssd_heads() const { return d_inner() / head_dim; }
  std::size_t attn_heads() const { return d_model / head_dim; }
  std::size_t n_patches() const { return seq_len / patch; }

  static ModelConfig defaults(Paradigm p, std::size_t n_leads = 12) {
    ModelConfig c;
    c.paradigm = p;
    c.n_leads = n_leads;
    c.validate();
    return c;
  }

  /// Under 1k parameters, sequence length 30, for finite-difference checks.
  static ModelConfig miniature(Paradigm p, std::size_t n_leads = 2) {
    ModelConfig c;
    c.paradigm = p;
    c.n_leads = n_leads;
    c.relaxed = true;
    c.seq_len = 30;
    c.widths = {4, 4, 4, 4};
    c.kernel = 3;
    c.blocks_per_stage = 1;
    c.hidden = 4;
    c.d_model = 8;
    c.head_dim = 4;
    c.tf_layers = 1;
    c.ffn = 8;
    c.head_hidden = 8;
    c.d_state = 4;
    c.chunk = 10;
    c.mamba_layers = 1;
    c.validate();
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
    if (!relaxed) {
      if (n_leads != 9 && n_leads != 12) fail("n_leads must be 9 or 12, got " + std::to_string(n_leads));
      if (n_classes != 19) fail("n_classes must be 19");
    }
    if (n_leads == 0 || seq_len == 0) fail("empty input shape");
    switch (paradigm) {
      case Paradigm::resnet1d:
        if (widths.size() != 4) fail("resnet1d needs 4 stage widths");
        if (kernel % 2 == 0) fail("resnet1d kernel must be odd");
        break;
      case Paradigm::bilstm:
        if (lstm_layers == 0 || hidden == 0) fail("bilstm needs layers and hidden > 0");
        break;
      case Paradigm::transformer:
        if (d_model % head_dim != 0) fail("d_model not divisible by head_dim");
        if (seq_len % patch != 0) {
          fail("sequence length " + std::to_string(seq_len) + " not divisible by patch " + std::to_string(patch));
        }
        break;
      case Paradigm::mamba2:
        if (d_inner() % head_dim != 0) fail("d_model*expansion not divisible by head_dim");
        if (seq_len % chunk != 0) {
          fail("sequence length " + std::to_string(seq_len) + " not divisible by chunk " + std::to_string(chunk));
        }
        break;
    }
  }

  /// Stable key=value echo of every field relevant to `paradigm`.
  std::map<std::string, std::string> fields() const {
    std::map<std::string, std::string> f;
    auto put = [&](const char* k, auto v) {
      std::ostringstream os;
      os << v;
      f[k] = os.str();
    };
    put("paradigm", to_string(paradigm));
    put("n_leads", n_leads);
    put("n_classes", n_classes);
    put("seq_len", seq_len);
    put("relaxed", relaxed ? 1 : 0);
    switch (paradigm) {
      case Paradigm::resnet1d: {
        std::ostringstream w;
        for (std::size_t i = 0; i < widths.size(); ++i) w << (i ? "," : "") << widths[i];
        f["widths"] = w.str();
        put("kernel", kernel);
        put("blocks_per_stage", blocks_per_stage);
        break;
      }
      case Paradigm::bilstm:
        put("lstm_layers", lstm_layers);
        put("hidden", hidden);
        put("lstm_dropout", lstm_dropout);
        break;
      case Paradigm::transformer:
        put("d_model", d_model);
        put("head_dim", head_dim);
        put("patch", patch);
        put("tf_layers", tf_layers);
        put("ffn", ffn);
        put("head_hidden", head_hidden);
        put("tf_dropout", tf_dropout);
        break;
      case Paradigm::mamba2:
        put("d_model", d_model);
        put("head_dim", head_dim);
        put("d_state", d_state);
        put("conv_kernel", conv_kernel);
        put("expansion", expansion);
        put("chunk", chunk);
        put("mamba_layers", mamba_layers);
        put("mamba_dropout", mamba_dropout);
        break;
    }
    return f;
  }

  static ModelConfig from_fields(const std::map<std::string, std::string>& f) {
    auto get = [&](const char* k) -> const std::string& {
      auto it = f.find(k);
      if (it == f.end()) throw std::invalid_argument(std::string("model config: missing field ") + k);
      return it->second;
    };
    auto num = [&](const char* k) { return static_cast<std::size_t>(std::stoull(get(k))); };
    ModelConfig c;
    c.paradigm = parse_paradigm(get("paradigm"));
    c.n_leads = num("n_leads");
    c.n_classes = num("n_classes");
    c.seq_len = num("seq_len");
    c.relaxed = num("relaxed") != 0;
    switch (c.paradigm) {
      case Paradigm::resnet1d: {
        c.widths.clear();
        std::istringstream w(get("widths"));
        std::string item;
        while (std::getline(w, item, ',')) c.widths.push_back(std::stoull(item));
        c.kernel = num("kernel");
        c.blocks_per_stage = num("blocks_per_stage");
        break;
      }
      case Paradigm::bilstm:
        c.lstm_layers = num("lstm_layers");
        c.hidden = num("hidden");
        c.lstm_dropout = std::stod(get("lstm_dropout"));
        break;
      case Paradigm::transformer:
        c.d_model = num("d_model");
        c.head_dim = num("head_dim");
        c.patch = num("patch");
        c.tf_layers = num("tf_layers");
        c.ffn = num("ffn");
        c.head_hidden = num("head_hidden");
        c.tf_dropout = std::stod(get("tf_dropout"));
        break;
      case Paradigm::mamba2:
        c.d_model = num("d_model");
        c.head_dim = num("head_dim");
        c.d_state = num("d_state");
        c.conv_kernel = num("conv_kernel");
        c.expansion = num("expansion");
        c.chunk = num("chunk");
        c.mamba_layers = num("mamba_layers");
        c.mamba_dropout = std::stod(get("mamba_dropout"));
        break;
    }
    c.validate();
    return c;
  }
};

}  // namespace ecgbench::models
