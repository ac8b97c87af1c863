#pragma once

#include <vector>

#include "ecgbench/diffcore/tape.hpp"

namespace ecgbench::diff {

namespace detail {

inline std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

/// Splits `shape` around `axis` into (outer, extent, inner) element counts.
inline void split_axis(const Shape& shape, std::size_t axis, std::size_t& outer,
                       std::size_t& extent, std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}

inline void check_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " invalid for shape " + to_string(shape));
  }
}

}  // namespace detail

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  Array<T> out = a.value().reshaped(std::move(shape));
  const int ia = a.id;
  return a.tape->record(
      std::move(out), {ia},
      [ia](Tape<T>& t, std::span<const T> g) { t.accumulate(ia, g); }, "reshape");
}

/// out.shape[i] = a.shape[perm[i]]
template <class T>
Var<T> permute(Var<T> a, std::vector<std::size_t> perm) {
  const Array<T>& av = a.value();
  const Shape& in = av.shape();
  if (perm.size() != in.size()) {
    throw ShapeError("permute: axis list does not match rank of " + to_string(in));
  }
  std::vector<bool> seen(perm.size(), false);
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    detail::check_axis(in, perm[i], "permute");
    if (seen[perm[i]]) throw ShapeError("permute: repeated axis");
    seen[perm[i]] = true;
    out_shape[i] = in[perm[i]];
  }
  const auto in_strides = detail::strides_of(in);
  // src offset of each output element, walked with an odometer
  std::vector<std::size_t> src(av.size());
  {
    const std::size_t r = perm.size();
    std::vector<std::size_t> idx(r, 0);
    std::size_t off = 0;
    for (std::size_t n = 0; n < src.size(); ++n) {
      src[n] = off;
      for (std::size_t d = r; d-- > 0;) {
        ++idx[d];
        off += in_strides[perm[d]];
        if (idx[d] < out_shape[d]) break;
        off -= in_strides[perm[d]] * out_shape[d];
        idx[d] = 0;
      }
    }
  }
  Array<T> out(out_shape);
  T* o = out.mutable_data();
  const T* x = av.data();
  for (std::size_t n = 0; n < src.size(); ++n) o[n] = x[src[n]];
  const int ia = a.id;
  return a.tape->record(
      std::move(out), {ia},
      [ia, src = std::move(src)](Tape<T>& t, std::span<const T> g) {
        auto ga = t.grad_buffer(ia);
        for (std::size_t n = 0; n < src.size(); ++n) ga[src[n]] += g[n];
      },
      "permute");
}

/// Elements [start, start+length) along `axis`; the axis is kept.
template <class T>
Var<T> slice(Var<T> a, std::size_t axis, std::size_t start, std::size_t length) {
  const Array<T>& av = a.value();
  detail::check_axis(av.shape(), axis, "slice");
  if (length == 0 || start + length > av.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + length) + ") out of bounds for " +
                     to_string(av.shape()));
  }
  std::size_t outer, extent, inner;
  detail::split_axis(av.shape(), axis, outer, extent, inner);
  Shape shape = av.shape();
  shape[axis] = length;
  Array<T> out(shape);
  T* o = out.mutable_data();
  const T* x = av.data();
  for (std::size_t p = 0; p < outer; ++p) {
    std::copy_n(x + (p * extent + start) * inner, length * inner, o + p * length * inner);
  }
  const int ia = a.id;
  return a.tape->record(
      std::move(out), {ia},
      [=](Tape<T>& t, std::span<const T> g) {
        auto ga = t.grad_buffer(ia);
        for (std::size_t p = 0; p < outer; ++p) {
          T* dst = ga.data() + (p * extent + start) * inner;
          const T* s = g.data() + p * length * inner;
          for (std::size_t i = 0; i < length * inner; ++i) dst[i] += s[i];
        }
      },
      "slice");
}

/// Joins arrays whose shapes agree except along `axis`.
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape shape = parts[0].shape();
  detail::check_axis(shape, axis, "concat");
  std::size_t total = 0;
  std::vector<std::size_t> lens;
  std::vector<int> ids;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) throw ShapeError("concat: rank mismatch");
    s[axis] = shape[axis];
    if (s != shape) {
      throw ShapeError("concat: " + to_string(p.shape()) + " incompatible with " +
                       to_string(parts[0].shape()));
    }
    lens.push_back(p.dim(axis));
    total += p.dim(axis);
    ids.push_back(p.id);
  }
  shape[axis] = total;
  std::size_t outer, extent, inner;
  detail::split_axis(shape, axis, outer, extent, inner);
  Array<T> out(shape);
  T* o = out.mutable_data();
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* x = parts[k].value().data();
    for (std::size_t p = 0; p < outer; ++p) {
      std::copy_n(x + p * lens[k] * inner, lens[k] * inner, o + (p * extent + off) * inner);
    }
    off += lens[k];
  }
  return parts[0].tape->record(
      std::move(out), ids,
      [=](Tape<T>& t, std::span<const T> g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          auto gk = t.grad_buffer(ids[k]);
          if (!gk.empty()) {
            for (std::size_t p = 0; p < outer; ++p) {
              const T* s = g.data() + (p * extent + off) * inner;
              T* d = gk.data() + p * lens[k] * inner;
              for (std::size_t i = 0; i < lens[k] * inner; ++i) d[i] += s[i];
            }
          }
          off += lens[k];
        }
      },
      "concat");
}

/// Inserts a new axis at position `axis` holding `n` copies of `a`.
template <class T>
Var<T> expand(Var<T> a, std::size_t axis, std::size_t n) {
  const Array<T>& av = a.value();
  if (axis > av.rank()) throw ShapeError("expand: axis out of range");
  Shape shape = av.shape();
  shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(axis), n);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  Array<T> out(shape);
  T* o = out.mutable_data();
  const T* x = av.data();
  for (std::size_t p = 0; p < outer; ++p) {
    for (std::size_t r = 0; r < n; ++r) std::copy_n(x + p * inner, inner, o + (p * n + r) * inner);
  }
  const int ia = a.id;
  return a.tape->record(
      std::move(out), {ia},
      [=](Tape<T>& t, std::span<const T> g) {
        auto ga = t.grad_buffer(ia);
        for (std::size_t p = 0; p < outer; ++p) {
          for (std::size_t r = 0; r < n; ++r) {
            const T* s = g.data() + (p * n + r) * inner;
            for (std::size_t i = 0; i < inner; ++i) ga[p * inner + i] += s[i];
          }
        }
      },
      "expand");
}

}  // namespace ecgbench::diff
