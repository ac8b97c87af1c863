#pragma once

#include <Eigen/Core>

#include "ecgbench/diffcore/tape.hpp"

namespace ecgbench::diff {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MutMap = Eigen::Map<RowMat<T>>;

}  // namespace detail

/// a[m×k] · b[k×n]. Backward: da = g·bᵀ, db = aᵀ·g.
template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Array<T>& av = a.value();
  const Array<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + to_string(av.shape()) +
                     " and " + to_string(bv.shape()));
  }
  const auto m = static_cast<Eigen::Index>(av.dim(0));
  const auto k = static_cast<Eigen::Index>(av.dim(1));
  const auto n = static_cast<Eigen::Index>(bv.dim(1));
  Array<T> out(Shape{av.dim(0), bv.dim(1)});
  detail::MutMap<T>(out.mutable_data(), m, n).noalias() =
      detail::ConstMap<T>(av.data(), m, k) * detail::ConstMap<T>(bv.data(), k, n);
  const int ia = a.id;
  const int ib = b.id;
  return a.tape->record(
      std::move(out), {ia, ib},
      [ia, ib, av, bv, m, k, n](Tape<T>& t, std::span<const T> g) {
        detail::ConstMap<T> G(g.data(), m, n);
        if (auto ga = t.grad_buffer(ia); !ga.empty()) {
          detail::MutMap<T>(ga.data(), m, k).noalias() +=
              G * detail::ConstMap<T>(bv.data(), k, n).transpose();
        }
        if (auto gb = t.grad_buffer(ib); !gb.empty()) {
          detail::MutMap<T>(gb.data(), k, n).noalias() +=
              detail::ConstMap<T>(av.data(), m, k).transpose() * G;
        }
      },
      "matmul");
}

/// Batched product over the leading axis: a[G×m×k] · b[G×k×n], with optional
/// transposition of the trailing two axes of either operand.
template <class T>
Var<T> bmm(Var<T> a, Var<T> b, bool trans_a = false, bool trans_b = false) {
  const Array<T>& av = a.value();
  const Array<T>& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0)) {
    throw ShapeError("bmm: incompatible shapes " + to_string(av.shape()) + " and " +
                     to_string(bv.shape()));
  }
  const std::size_t batch = av.dim(0);
  const auto ar = static_cast<Eigen::Index>(av.dim(1));
  const auto ac = static_cast<Eigen::Index>(av.dim(2));
  const auto br = static_cast<Eigen::Index>(bv.dim(1));
  const auto bc = static_cast<Eigen::Index>(bv.dim(2));
  const auto m = trans_a ? ac : ar;
  const auto k = trans_a ? ar : ac;
  const auto kb = trans_b ? bc : br;
  const auto n = trans_b ? br : bc;
  if (k != kb) {
    throw ShapeError("bmm: inner extents differ for " + to_string(av.shape()) +
                     " and " + to_string(bv.shape()));
  }
  Array<T> out(Shape{batch, static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  T* o = out.mutable_data();
  for (std::size_t i = 0; i < batch; ++i) {
    detail::ConstMap<T> A(av.data() + i * ar * ac, ar, ac);
    detail::ConstMap<T> B(bv.data() + i * br * bc, br, bc);
    detail::MutMap<T> O(o + i * m * n, m, n);
    if (!trans_a && !trans_b) O.noalias() = A * B;
    else if (trans_a && !trans_b) O.noalias() = A.transpose() * B;
    else if (!trans_a && trans_b) O.noalias() = A * B.transpose();
    else O.noalias() = A.transpose() * B.transpose();
  }
  const int ia = a.id;
  const int ib = b.id;
  return a.tape->record(
      std::move(out), {ia, ib},
      [=](Tape<T>& t, std::span<const T> g) {
        auto ga = t.grad_buffer(ia);
        auto gb = t.grad_buffer(ib);
        for (std::size_t i = 0; i < batch; ++i) {
          detail::ConstMap<T> G(g.data() + i * m * n, m, n);
          detail::ConstMap<T> A(av.data() + i * ar * ac, ar, ac);
          detail::ConstMap<T> B(bv.data() + i * br * bc, br, bc);
          if (!ga.empty()) {
            detail::MutMap<T> GA(ga.data() + i * ar * ac, ar, ac);
            // op(A) = A or Aᵀ; d op(A) = G · op(B)ᵀ
            if (!trans_a && !trans_b) GA.noalias() += G * B.transpose();
            else if (!trans_a && trans_b) GA.noalias() += G * B;
            else if (trans_a && !trans_b) GA.noalias() += B * G.transpose();
            else GA.noalias() += B.transpose() * G.transpose();
          }
          if (!gb.empty()) {
            detail::MutMap<T> GB(gb.data() + i * br * bc, br, bc);
            // d op(B) = op(A)ᵀ · G
            if (!trans_a && !trans_b) GB.noalias() += A.transpose() * G;
            else if (trans_a && !trans_b) GB.noalias() += A * G;
            else if (!trans_a && trans_b) GB.noalias() += G.transpose() * A;
            else GB.noalias() += G.transpose() * A.transpose();
          }
        }
      },
      "bmm");
}

}  // namespace ecgbench::diff
