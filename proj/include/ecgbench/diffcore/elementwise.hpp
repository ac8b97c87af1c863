#pragma once

#include <cmath>

#include "ecgbench/diffcore/tape.hpp"

namespace ecgbench::diff {

namespace detail {

/// Broadcast classes supported by binary primitives: equal shapes, `b` a
/// scalar, or `b` matching a trailing suffix of `a` (repeated over leading
/// axes). The larger operand is always the first.
enum class Bcast { none, scalar, suffix };

inline Bcast classify(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Bcast::none;
  if (element_count(b) == 1 && b.size() <= a.size()) return Bcast::scalar;
  if (b.size() < a.size() && std::equal(b.rbegin(), b.rend(), a.rbegin())) {
    return Bcast::suffix;
  }
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) +
                   " and " + to_string(b));
}

template <class T, class Fwd, class DA, class DB>
Var<T> binary(Var<T> a, Var<T> b, const char* op, Fwd fwd, DA da, DB db) {
  // The larger operand drives the iteration; the smaller one is broadcast.
  const bool swapped = a.size() < b.size();
  const Var<T> big = swapped ? b : a;
  const Var<T> small = swapped ? a : b;
  const Array<T>& bigv = big.value();
  const Array<T>& smallv = small.value();
  const Bcast kind = classify(bigv.shape(), smallv.shape(), op);
  const std::size_t n = bigv.size();
  const std::size_t ns = smallv.size();
  Array<T> out(bigv.shape());
  T* o = out.mutable_data();
  const T* x = bigv.data();
  const T* y = smallv.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T s = y[kind == Bcast::none ? i : i % ns];
    o[i] = swapped ? fwd(s, x[i]) : fwd(x[i], s);
  }
  const int ia = a.id;
  const int ib = b.id;
  return big.tape->record(
      std::move(out), {ia, ib},
      [ia, ib, bigv, smallv, kind, swapped, da, db](Tape<T>& t, std::span<const T> g) {
        const T* x = bigv.data();
        const T* y = smallv.data();
        const std::size_t ns = smallv.size();
        auto gbig = t.grad_buffer(swapped ? ib : ia);
        auto gsmall = t.grad_buffer(swapped ? ia : ib);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t j = kind == Bcast::none ? i : i % ns;
          const T av = swapped ? y[j] : x[i];
          const T bv = swapped ? x[i] : y[j];
          const T dbig = swapped ? db(av, bv) : da(av, bv);
          const T dsmall = swapped ? da(av, bv) : db(av, bv);
          if (!gbig.empty()) gbig[i] += g[i] * dbig;
          if (!gsmall.empty()) gsmall[j] += g[i] * dsmall;
        }
      },
      op);
}

/// `dydx` receives (input, output) of the forward map.
template <class T, class Fwd, class Deriv>
Var<T> unary(Var<T> a, const char* op, Fwd fwd, Deriv dydx) {
  const Array<T>& av = a.value();
  Array<T> out(av.shape());
  T* o = out.mutable_data();
  const T* x = av.data();
  for (std::size_t i = 0; i < av.size(); ++i) o[i] = fwd(x[i]);
  const int ia = a.id;
  Array<T> saved = out;
  return a.tape->record(
      std::move(out), {ia},
      [ia, av, saved, dydx](Tape<T>& t, std::span<const T> g) {
        auto ga = t.grad_buffer(ia);
        const T* x = av.data();
        const T* y = saved.data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx(x[i], y[i]);
      },
      op);
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// log(1 + e^x) without overflow.
template <class T>
T stable_log1p_exp(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  return detail::binary<T>(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  return detail::binary<T>(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  return detail::binary<T>(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  return detail::unary<T>(
      a, "scale", [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <class T>
Var<T> neg(Var<T> a) {
  return scale(a, T(-1));
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary<T>(
      a, "sigmoid", [](T x) { return detail::stable_sigmoid(x); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> relu(Var<T> a) {
  return detail::unary<T>(
      a, "relu", [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> exp(Var<T> a) {
  return detail::unary<T>(
      a, "exp", [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

/// x -> log(1 + e^x), evaluated as max(x,0) + log(1 + e^-|x|). Also serves
/// as softplus.
template <class T>
Var<T> log1p_exp(Var<T> a) {
  return detail::unary<T>(
      a, "log1p_exp", [](T x) { return detail::stable_log1p_exp(x); },
      [](T x, T) { return detail::stable_sigmoid(x); });
}

template <class T>
Var<T> tanh(Var<T> a) {
  return detail::unary<T>(
      a, "tanh", [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

/// x * sigmoid(x)
template <class T>
Var<T> silu(Var<T> a) {
  return detail::unary<T>(
      a, "silu", [](T x) { return x * detail::stable_sigmoid(x); },
      [](T x, T) {
        const T s = detail::stable_sigmoid(x);
        return s + x * s * (T(1) - s);
      });
}

}  // namespace ecgbench::diff
