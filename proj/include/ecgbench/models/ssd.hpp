#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ecgbench/models/params.hpp"

namespace ecgbench::models {

// Scan parameters under a prefix n:
//   n.dt.w (D, H), n.dt.b (H)   dt = softplus(u W + b)
//   n.B.w (D, N), n.C.w (D, N)  input and readout maps
//   n.A_log (H)                 a = -exp(A_log) < 0
//   n.D (D)                     per-channel skip
// Heads split the D channels into H groups of P = D/H.

template <class T>
struct SsdInputs {
  Var<T> dt;  // (B, L, H)
  Var<T> b;   // (B, L, N)
  Var<T> c;   // (B, L, N)
  Var<T> a;   // (H)
  Var<T> d;   // (D)
};

template <class T>
SsdInputs<T> ssd_inputs(Forward<T>& f, Var<T> u, const std::string& n) {
  return {diff::log1p_exp(linear(f, u, n + ".dt")), linear(f, u, n + ".B", false), linear(f, u, n + ".C", false),
          diff::neg(diff::exp(f(n + ".A_log"))), f(n + ".D")};
}

/// Reference recurrence, one step at a time:
///   h_t = exp(a dt_t) h_{t-1} + dt_t (u_t outer B_t),  y_t = h_t C_t + D u_t.
template <class T>
Var<T> ssd_scan_sequential(const SsdInputs<T>& in, Var<T> u) {
  const std::size_t Bn = u.dim(0), L = u.dim(1), D = u.dim(2);
  const std::size_t H = in.dt.dim(2), N = in.b.dim(2), P = D / H;
  Tape<T>& tape = *u.tape;
  auto time_major = [](Var<T> v) { return diff::permute(v, {1, 0, 2}); };
  Var<T> ut = time_major(u), dtt = time_major(in.dt), bt = time_major(in.b), ct = time_major(in.c);
  Var<T> h = tape.constant(Array<T>(Shape{Bn, H, P, N}, T(0)));
  std::vector<Var<T>> ys;
  ys.reserve(L);
  for (std::size_t t = 0; t < L; ++t) {
    Var<T> u_t = diff::reshape(diff::slice(ut, 0, t, 1), Shape{Bn, H, P});
    Var<T> dt_t = diff::reshape(diff::slice(dtt, 0, t, 1), Shape{Bn, H});
    Var<T> b_t = diff::reshape(diff::slice(bt, 0, t, 1), Shape{Bn, 1, N});
    Var<T> c_t = diff::reshape(diff::slice(ct, 0, t, 1), Shape{Bn, N, 1});
    Var<T> decay = diff::expand(diff::expand(diff::exp(diff::mul(dt_t, in.a)), 2, P), 3, N);
    Var<T> xu = diff::reshape(diff::mul(u_t, diff::expand(dt_t, 2, P)), Shape{Bn, H * P, 1});
    Var<T> inject = diff::reshape(diff::bmm(xu, b_t), Shape{Bn, H, P, N});
    h = diff::add(diff::mul(h, decay), inject);
    Var<T> y_t = diff::bmm(diff::reshape(h, Shape{Bn, H * P, N}), c_t);
    ys.push_back(diff::reshape(y_t, Shape{1, Bn, D}));
  }
  Var<T> y = diff::permute(diff::concat(ys, 0), {1, 0, 2});
  return diff::add(y, diff::mul(u, in.d));
}

/// Blockwise form of the same recurrence, as one tape node. Within a chunk of
/// length Q with S = inclusive cumsum of a*dt:
///   y_i = sum_{j<=i} exp(S_i - S_j) (C_i . B_j) dt_j u_j + exp(S_i) C_i h_in
/// and the state carried to the next chunk is
///   h_out = exp(S_Q) h_in + sum_j exp(S_Q - S_j) dt_j (u_j outer B_j).
/// Only the chunk-entry states are kept for the backward pass, which walks the
/// chunks in reverse carrying dL/dh.
template <class T>
Var<T> ssd_scan_chunked(const SsdInputs<T>& in, Var<T> u, std::size_t chunk) {
  const std::size_t Bn = u.dim(0), L = u.dim(1), D = u.dim(2);
  const std::size_t H = in.dt.dim(2), N = in.b.dim(2);
  if (chunk == 0 || L % chunk != 0) {
    throw diff::ShapeError("ssd_scan_chunked: length " + std::to_string(L) + " not divisible by chunk " +
                           std::to_string(chunk));
  }
  if (H == 0 || D % H != 0 || in.dt.shape() != Shape{Bn, L, H} || in.b.shape() != Shape{Bn, L, N} ||
      in.c.shape() != Shape{Bn, L, N} || in.a.shape() != Shape{H} || in.d.shape() != Shape{D}) {
    throw diff::ShapeError("ssd_scan_chunked: inconsistent input shapes");
  }
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Stride = Eigen::OuterStride<>;
  using CMap = Eigen::Map<const Mat, 0, Stride>;
  using MMap = Eigen::Map<Mat, 0, Stride>;
  using Idx = Eigen::Index;
  const std::size_t P = D / H, Q = chunk, nc = L / Q;
  const Idx q = static_cast<Idx>(Q), p = static_cast<Idx>(P), n = static_cast<Idx>(N);
  const Array<T> uv = u.value(), dtv = in.dt.value(), bv = in.b.value(), cv = in.c.value(), av = in.a.value(),
                 dv = in.d.value();

  // views of one (batch, chunk[, head]) block
  auto rows_of = [=](const Array<T>& a, std::size_t b, std::size_t c, std::size_t width) {
    return CMap(a.data() + (b * L + c * Q) * width, q, static_cast<Idx>(width), Stride(static_cast<Idx>(width)));
  };
  auto head_of = [=](const T* base, std::size_t b, std::size_t c, std::size_t h) {
    return CMap(base + (b * L + c * Q) * D + h * P, q, p, Stride(static_cast<Idx>(D)));
  };
  // S (inclusive cumsum of a*dt) and dt for one head of one chunk
  auto prefix = [=](std::size_t b, std::size_t c, std::size_t h, std::vector<T>& S, std::vector<T>& dt) {
    T acc = 0;
    for (std::size_t i = 0; i < Q; ++i) {
      dt[i] = dtv[(b * L + c * Q + i) * H + h];
      acc += av[h] * dt[i];
      S[i] = acc;
    }
  };
  auto state_at = [=](auto* base, std::size_t b, std::size_t c, std::size_t h) {
    return base + (((b * nc + c) * H + h) * P) * N;
  };

  Array<T> y(Shape{Bn, L, D});
  Array<T> states(Shape{Bn, nc, H, P, N});  // h entering each chunk
  {
    T* yp = y.mutable_data();
    T* sp = states.mutable_data();
    Mat G(q, q), M(q, q), R(q, p);
    std::vector<T> S(Q), dt(Q);
    for (std::size_t b = 0; b < Bn; ++b)
      for (std::size_t c = 0; c < nc; ++c) {
        const CMap Bc = rows_of(bv, b, c, N), Cc = rows_of(cv, b, c, N);
        G.noalias() = Cc * Bc.transpose();
        for (std::size_t h = 0; h < H; ++h) {
          prefix(b, c, h, S, dt);
          for (Idx i = 0; i < q; ++i)
            for (Idx j = 0; j < q; ++j) M(i, j) = j <= i ? std::exp(S[i] - S[j]) * G(i, j) * dt[j] : T(0);
          const CMap X = head_of(uv.data(), b, c, h);
          MMap Y(yp + (b * L + c * Q) * D + h * P, q, p, Stride(static_cast<Idx>(D)));
          Eigen::Map<Mat> hin(state_at(sp, b, c, h), p, n);
          if (c == 0) hin.setZero();
          Y.noalias() = M * X;
          R.noalias() = Cc * hin.transpose();
          for (Idx i = 0; i < q; ++i) {
            const T e = std::exp(S[i]);
            for (Idx k = 0; k < p; ++k) Y(i, k) += e * R(i, k) + dv[h * P + k] * X(i, k);
          }
          if (c + 1 < nc) {
            Eigen::Map<Mat> hout(state_at(sp, b, c + 1, h), p, n);
            Mat Bw = Bc;
            for (Idx j = 0; j < q; ++j) Bw.row(j) *= std::exp(S[Q - 1] - S[j]) * dt[j];
            hout.noalias() = X.transpose() * Bw;
            hout += std::exp(S[Q - 1]) * hin;
          }
        }
      }
  }

  const int iu = u.id, idt = in.dt.id, ib = in.b.id, ic = in.c.id, ia = in.a.id, id = in.d.id;
  return u.tape->record(
      std::move(y), {iu, idt, ib, ic, ia, id},
      [=](Tape<T>& t, std::span<const T> g) {
        std::vector<T> du(uv.size(), T(0)), ddt(dtv.size(), T(0)), db(bv.size(), T(0)), dc(cv.size(), T(0)),
            da(H, T(0)), dd(D, T(0));
        Mat G(q, q), M(q, q), E(q, q), dM(q, q), dG(q, q), R(q, p), dR(q, p), XL(q, n), Bw(q, n);
        Mat lam(static_cast<Idx>(H) * p, n), dhin(p, n);
        std::vector<T> S(Q), dt(Q), dS(Q), ddt_loc(Q), w(Q);
        for (std::size_t b = 0; b < Bn; ++b) {
          lam.setZero();
          for (std::size_t cc = nc; cc-- > 0;) {
            const CMap Bc = rows_of(bv, b, cc, N), Cc = rows_of(cv, b, cc, N);
            MMap dBc(db.data() + (b * L + cc * Q) * N, q, n, Stride(n));
            MMap dCc(dc.data() + (b * L + cc * Q) * N, q, n, Stride(n));
            G.noalias() = Cc * Bc.transpose();
            dG.setZero();
            for (std::size_t h = 0; h < H; ++h) {
              prefix(b, cc, h, S, dt);
              const CMap X = head_of(uv.data(), b, cc, h);
              const CMap dY = head_of(g.data(), b, cc, h);
              MMap dX(du.data() + (b * L + cc * Q) * D + h * P, q, p, Stride(static_cast<Idx>(D)));
              const Eigen::Map<const Mat> hin(state_at(states.data(), b, cc, h), p, n);
              auto lam_h = lam.block(static_cast<Idx>(h) * p, 0, p, n);
              for (Idx i = 0; i < q; ++i)
                for (Idx j = 0; j < q; ++j) {
                  E(i, j) = j <= i ? std::exp(S[i] - S[j]) : T(0);
                  M(i, j) = E(i, j) * G(i, j) * dt[j];
                }
              std::fill(dS.begin(), dS.end(), T(0));
              std::fill(ddt_loc.begin(), ddt_loc.end(), T(0));

              // skip path
              for (Idx i = 0; i < q; ++i)
                for (Idx k = 0; k < p; ++k) {
                  dX(i, k) += dv[h * P + k] * dY(i, k);
                  dd[h * P + k] += dY(i, k) * X(i, k);
                }

              // intra-chunk quadratic form
              dM.noalias() = dY * X.transpose();
              dX.noalias() += M.transpose() * dY;
              for (Idx i = 0; i < q; ++i)
                for (Idx j = 0; j <= i; ++j) {
                  const T dm = dM(i, j);
                  dG(i, j) += dm * E(i, j) * dt[j];
                  ddt_loc[j] += dm * E(i, j) * G(i, j);
                  const T dmm = dm * M(i, j);
                  dS[i] += dmm;
                  dS[j] -= dmm;
                }

              // incoming-state readout exp(S_i) C_i h_in
              R.noalias() = Cc * hin.transpose();
              for (Idx i = 0; i < q; ++i) {
                const T e = std::exp(S[i]);
                T acc = 0;
                for (Idx k = 0; k < p; ++k) {
                  dR(i, k) = e * dY(i, k);
                  acc += dY(i, k) * R(i, k);
                }
                dS[i] += e * acc;
              }
              dCc.noalias() += dR * hin;
              dhin.noalias() = dR.transpose() * Cc;

              // outgoing state (the last chunk's is unused)
              if (cc + 1 < nc) {
                const T eq = std::exp(S[Q - 1]);
                dhin += eq * lam_h;
                dS[Q - 1] += eq * (lam_h.array() * hin.array()).sum();
                for (std::size_t j = 0; j < Q; ++j) w[j] = std::exp(S[Q - 1] - S[j]) * dt[j];
                XL.noalias() = X * lam_h;
                Bw = Bc;
                for (Idx j = 0; j < q; ++j) Bw.row(j) *= w[j];
                dX.noalias() += Bw * lam_h.transpose();
                for (Idx j = 0; j < q; ++j) {
                  dBc.row(j) += w[j] * XL.row(j);
                  const T dw = XL.row(j).dot(Bc.row(j));
                  ddt_loc[j] += dw * std::exp(S[Q - 1] - S[j]);
                  dS[Q - 1] += dw * w[j];
                  dS[j] -= dw * w[j];
                }
              }
              lam_h = dhin;

              // S = cumsum(a * dt)
              T tail = 0;
              for (std::size_t k = Q; k-- > 0;) {
                tail += dS[k];
                ddt_loc[k] += av[h] * tail;
                da[h] += tail * dt[k];
              }
              for (std::size_t k = 0; k < Q; ++k) ddt[(b * L + cc * Q + k) * H + h] += ddt_loc[k];
            }
            dCc.noalias() += dG * Bc;
            dBc.noalias() += dG.transpose() * Cc;
          }
        }
        t.accumulate(iu, du);
        t.accumulate(idt, ddt);
        t.accumulate(ib, db);
        t.accumulate(ic, dc);
        t.accumulate(ia, da);
        t.accumulate(id, dd);
      },
      "ssd_scan_chunked");
}

}  // namespace ecgbench::models
