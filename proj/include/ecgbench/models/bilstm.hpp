#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ecgbench/models/params.hpp"

namespace ecgbench::models {

// Gate order within the 4H axis: input, forget, cell candidate, output.

template <class T>
void bilstm_init(Initializer<T>& init, const ModelConfig& c) {
  const std::size_t H = c.hidden;
  for (std::size_t l = 0; l < c.lstm_layers; ++l) {
    const std::size_t in = l == 0 ? c.n_leads : 2 * H;
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string n = "lstm.l" + std::to_string(l) + "." + dir;
      init.weight(n + ".wx", {in, 4 * H}, H);
      init.weight(n + ".wh", {H, 4 * H}, H);
      Array<T> b(Shape{4 * H}, T(0));
      for (std::size_t j = H; j < 2 * H; ++j) b.mutable_data()[j] = T(1);
      init.p.add(n + ".b", std::move(b));
    }
  }
  init.linear("fc", 2 * H, c.n_classes);
}

/// One cell update from the input pre-activation xg = x Wx + b (B, 4H).
template <class T>
std::pair<Var<T>, Var<T>> lstm_step(Var<T> xg, Var<T> h, Var<T> c, Var<T> wh) {
  const std::size_t H = h.dim(1);
  Var<T> g = diff::add(xg, diff::matmul(h, wh));
  Var<T> i = diff::sigmoid(diff::slice(g, 1, 0, H));
  Var<T> fg = diff::sigmoid(diff::slice(g, 1, H, H));
  Var<T> cand = diff::tanh(diff::slice(g, 1, 2 * H, H));
  Var<T> o = diff::sigmoid(diff::slice(g, 1, 3 * H, H));
  Var<T> c_next = diff::add(diff::mul(fg, c), diff::mul(i, cand));
  Var<T> h_next = diff::mul(o, diff::tanh(c_next));
  return {h_next, c_next};
}

/// Cell applied to x (B, in) with the parameters under `prefix`.
template <class T>
std::pair<Var<T>, Var<T>> lstm_cell(Forward<T>& f, Var<T> x, Var<T> h, Var<T> c, const std::string& prefix) {
  Var<T> xg = diff::add(diff::matmul(x, f(prefix + ".wx")), f(prefix + ".b"));
  return lstm_step(xg, h, c, f(prefix + ".wh"));
}

/// Whole recurrence over pre-activations proj (L, B, 4H) as one tape node,
/// walking time backwards when `reverse`. Returns every hidden state (L, B, H)
/// in time order. Gate activations and cell states are kept for backward.
template <class T>
Var<T> lstm_scan(Var<T> proj, Var<T> wh, bool reverse) {
  const std::size_t L = proj.dim(0), B = proj.dim(1), H = wh.dim(0);
  if (proj.shape() != Shape{L, B, 4 * H} || wh.shape() != Shape{H, 4 * H}) {
    throw diff::ShapeError("lstm_scan: inconsistent shapes " + diff::to_string(proj.shape()) + " and " +
                           diff::to_string(wh.shape()));
  }
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  using MMap = Eigen::Map<Mat>;
  using Row = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto b = static_cast<Eigen::Index>(B), h = static_cast<Eigen::Index>(H);
  const std::size_t step = B * H;
  const Array<T> pv = proj.value(), whv = wh.value();
  const CMap W(whv.data(), h, 4 * h);
  auto time_at = [=](std::size_t k) { return reverse ? L - 1 - k : k; };

  // act holds the activated gates (i, f, g, o); tc holds tanh of the cell state
  Array<T> hs(Shape{L, B, H});
  Array<T> act(Shape{L, B, 4 * H}), cs(Shape{L, B, H}), tc(Shape{L, B, H});
  {
    const Mat zero = Mat::Zero(b, h);
    for (std::size_t k = 0; k < L; ++k) {
      const std::size_t t = time_at(k);
      const CMap hp(k == 0 ? zero.data() : hs.data() + time_at(k - 1) * step, b, h);
      const CMap cp(k == 0 ? zero.data() : cs.data() + time_at(k - 1) * step, b, h);
      MMap g(act.mutable_data() + t * 4 * step, b, 4 * h);
      MMap c(cs.mutable_data() + t * step, b, h), tcv(tc.mutable_data() + t * step, b, h);
      MMap out(hs.mutable_data() + t * step, b, h);
      g = CMap(pv.data() + t * 4 * step, b, 4 * h);
      g.noalias() += hp * W;
      // row by row through aligned buffers, so every row takes the same
      // vectorized path and results do not depend on the batch position
      for (Eigen::Index r = 0; r < b; ++r) {
        Row gr = g.row(r).transpose().array();
        gr.head(2 * h) = gr.head(2 * h).logistic();
        gr.segment(2 * h, h) = gr.segment(2 * h, h).tanh();
        gr.tail(h) = gr.tail(h).logistic();
        Row cr = gr.segment(h, h) * cp.row(r).transpose().array() + gr.head(h) * gr.segment(2 * h, h);
        Row tr = cr.tanh();
        g.row(r) = gr.transpose().matrix();
        c.row(r) = cr.transpose().matrix();
        tcv.row(r) = tr.transpose().matrix();
        out.row(r) = (gr.tail(h) * tr).transpose().matrix();
      }
    }
  }

  const int ip = proj.id, iw = wh.id;
  return proj.tape->record(
      hs, {ip, iw},
      [=](Tape<T>& tp, std::span<const T> gy) {
        std::vector<T> dproj(pv.size()), dwh(whv.size(), T(0));
        MMap dW(dwh.data(), h, 4 * h);
        const Mat zero = Mat::Zero(b, h);
        Mat dh(b, h), dc = Mat::Zero(b, h), carry = Mat::Zero(b, h);
        for (std::size_t k = L; k-- > 0;) {
          const std::size_t t = time_at(k);
          const CMap a(act.data() + t * 4 * step, b, 4 * h), tcv(tc.data() + t * step, b, h);
          const CMap cp(k == 0 ? zero.data() : cs.data() + time_at(k - 1) * step, b, h);
          const auto i = a.leftCols(h).array(), f = a.middleCols(h, h).array(), cand = a.middleCols(2 * h, h).array(),
                     o = a.rightCols(h).array();
          MMap dg(dproj.data() + t * 4 * step, b, 4 * h);
          dh.array() = CMap(gy.data() + t * step, b, h).array() + carry.array();
          dc.array() += dh.array() * o * (1 - tcv.array().square());
          dg.leftCols(h).array() = dc.array() * cand * i * (1 - i);
          dg.middleCols(h, h).array() = dc.array() * cp.array() * f * (1 - f);
          dg.middleCols(2 * h, h).array() = dc.array() * i * (1 - cand.square());
          dg.rightCols(h).array() = dh.array() * tcv.array() * o * (1 - o);
          dc.array() *= f;
          carry.noalias() = dg * W.transpose();
          if (k > 0) dW.noalias() += CMap(hs.data() + time_at(k - 1) * step, b, h).transpose() * dg;
        }
        tp.accumulate(ip, dproj);
        tp.accumulate(iw, dwh);
      },
      "lstm_scan");
}

/// Runs one direction over a time-major sequence (L, B, in). Returns the
/// per-step hidden states in time order and the final state of the scan.
template <class T>
std::pair<Var<T>, Var<T>> lstm_direction(Forward<T>& f, Var<T> seq, const std::string& prefix, bool reverse) {
  const std::size_t L = seq.dim(0), B = seq.dim(1);
  const std::size_t H = f.params.at(prefix + ".wh").dim(0);
  Var<T> proj = diff::add(diff::reshape(diff::matmul(diff::reshape(seq, Shape{L * B, seq.dim(2)}), f(prefix + ".wx")),
                                        Shape{L, B, 4 * H}),
                          f(prefix + ".b"));
  Var<T> hs = lstm_scan(proj, f(prefix + ".wh"), reverse);
  Var<T> last = diff::reshape(diff::slice(hs, 0, reverse ? 0 : L - 1, 1), Shape{B, H});
  return {hs, last};
}

template <class T>
Var<T> bilstm_forward(Forward<T>& f, Var<T> x) {
  const ModelConfig& c = f.params.config;
  check_input(c, x, "bilstm");
  Var<T> seq = diff::permute(x, {2, 0, 1});  // (L, B, leads)
  Var<T> last_fwd = seq, last_bwd = seq;
  for (std::size_t l = 0; l < c.lstm_layers; ++l) {
    const std::string n = "lstm.l" + std::to_string(l);
    const bool top = l + 1 == c.lstm_layers;
    auto [fs, fh] = lstm_direction(f, seq, n + ".fwd", false);
    auto [bs, bh] = lstm_direction(f, seq, n + ".bwd", true);
    last_fwd = fh;  // state after step L
    last_bwd = bh;  // state after consuming step 1
    if (!top) seq = dropout(f, diff::concat(std::vector<Var<T>>{fs, bs}, 2), c.lstm_dropout);
  }
  Var<T> rep = diff::concat(std::vector<Var<T>>{last_fwd, last_bwd}, 1);
  return linear(f, rep, "fc");
}

}  // namespace ecgbench::models
