#include "checkmate/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

#include "checkmate/rng.hpp"

namespace checkmate {

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << " x ";
    out << s[i];
  }
  out << ']';
  return out.str();
}

namespace {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

template <class T>
void check_finite(const char* op, std::span<const T> values) {
  for (const T& v : values) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericalError(std::string(op) + " produced a non-finite value");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return from(std::move(shape), {}, requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> v(shape_size(shape), value);
  return from(std::move(shape), std::move(v), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values,
                          bool requires_grad) {
  auto d = std::make_shared<Data>();
  std::size_t n = shape_size(shape);
  if (values.empty()) values.resize(n, T(0));
  if (values.size() != n) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  d->shape = std::move(shape);
  d->values = std::move(values);
  d->requires_grad = requires_grad;
  if (requires_grad) d->grad.assign(n, T(0));
  return wrap(std::move(d));
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::row(std::vector<T> values, bool requires_grad) {
  Shape s{1, values.size()};
  return from(std::move(s), std::move(values), requires_grad);
}

template <class T>
std::size_t Tensor<T>::rows() const {
  if (rank() != 2) throw ShapeError("rows() on tensor of shape " + shape_str(shape()));
  return data_->shape[0];
}

template <class T>
std::size_t Tensor<T>::cols() const {
  if (rank() != 2) throw ShapeError("cols() on tensor of shape " + shape_str(shape()));
  return data_->shape[1];
}

template <class T>
std::span<T> Tensor<T>::grad() {
  if (!data_->requires_grad) {
    throw ShapeError("grad() on a tensor without requires_grad");
  }
  return data_->grad;
}

template <class T>
std::span<const T> Tensor<T>::grad() const {
  if (!data_->requires_grad) {
    throw ShapeError("grad() on a tensor without requires_grad");
  }
  return data_->grad;
}

template <class T>
void Tensor<T>::zero_grad() {
  if (data_->requires_grad) {
    std::fill(data_->grad.begin(), data_->grad.end(), T(0));
  }
}

template <class T>
T Tensor<T>::value() const {
  if (size() != 1) {
    throw ShapeError("value() expects a scalar, got shape " + shape_str(shape()));
  }
  return data_->values[0];
}

template <class T>
T Tensor<T>::at(std::size_t r, std::size_t c) const {
  return data_->values[r * cols() + c];
}

// ---------------------------------------------------------------------------
// Tape ops

namespace {

template <class T>
Tensor<T> make_output(Shape shape, bool requires_grad) {
  return Tensor<T>::zeros(std::move(shape), requires_grad);
}

template <class T>
bool needs_grad(const Tensor<T>& a) {
  return a.requires_grad();
}

template <class T>
bool needs_grad(const Tensor<T>& a, const Tensor<T>& b) {
  return a.requires_grad() || b.requires_grad();
}

}  // namespace

template <class T>
Tensor<T> Tape<T>::matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> c = make_output<T>({m, n}, needs_grad(a, b));
  {
    const T* av = a.values().data();
    const T* bv = b.values().data();
    T* cv = c.values().data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = av[i * k + p];
        const T* brow = bv + p * n;
        T* crow = cv + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
  check_finite<T>("matmul", c.values());
  if (c.requires_grad()) {
    record([a = a, b = b, c, m, k, n]() mutable {
      std::span<const T> gc = c.grad();
      if (a.requires_grad()) {
        // dA += dC * B^T
        std::span<T> ga = a.grad();
        std::span<const T> bv = b.values();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            T acc = 0;
            const T* gcrow = gc.data() + i * n;
            const T* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc += gcrow[j] * brow[j];
            ga[i * k + p] += acc;
          }
      }
      if (b.requires_grad()) {
        // dB += A^T * dC
        std::span<T> gb = b.grad();
        std::span<const T> av = a.values();
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t i = 0; i < m; ++i) {
            const T aip = av[i * k + p];
            const T* gcrow = gc.data() + i * n;
            T* gbrow = gb.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * gcrow[j];
          }
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor<T> c = make_output<T>({m, n}, needs_grad(a, b));
  {
    const T* av = a.values().data();
    const T* bv = b.values().data();
    T* cv = c.values().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        T acc = 0;
        const T* arow = av + i * k;
        const T* brow = bv + j * k;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        cv[i * n + j] = acc;
      }
  }
  check_finite<T>("matmul_nt", c.values());
  if (c.requires_grad()) {
    record([a = a, b = b, c, m, k, n]() mutable {
      std::span<const T> gc = c.grad();
      if (a.requires_grad()) {
        // dA += dC * B
        std::span<T> ga = a.grad();
        std::span<const T> bv = b.values();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const T g = gc[i * n + j];
            const T* brow = bv.data() + j * k;
            T* garow = ga.data() + i * k;
            for (std::size_t p = 0; p < k; ++p) garow[p] += g * brow[p];
          }
      }
      if (b.requires_grad()) {
        // dB += dC^T * A
        std::span<T> gb = b.grad();
        std::span<const T> av = a.values();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const T g = gc[i * n + j];
            const T* arow = av.data() + i * k;
            T* gbrow = gb.data() + j * k;
            for (std::size_t p = 0; p < k; ++p) gbrow[p] += g * arow[p];
          }
      }
    });
  }
  return c;
}

namespace {

template <class T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

template <class T>
Tensor<T> Tape<T>::add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("add", a, b);
  Tensor<T> c = make_output<T>(a.shape(), needs_grad(a, b));
  auto av = a.values(), bv = b.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] + bv[i];
  check_finite<T>("add", c.values());
  if (c.requires_grad()) {
    record([a = a, b = b, c]() mutable {
      auto gc = c.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[i] += gc[i];
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("sub", a, b);
  Tensor<T> c = make_output<T>(a.shape(), needs_grad(a, b));
  auto av = a.values(), bv = b.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] - bv[i];
  check_finite<T>("sub", c.values());
  if (c.requires_grad()) {
    record([a = a, b = b, c]() mutable {
      auto gc = c.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[i] -= gc[i];
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("mul", a, b);
  Tensor<T> c = make_output<T>(a.shape(), needs_grad(a, b));
  auto av = a.values(), bv = b.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] * bv[i];
  check_finite<T>("mul", c.values());
  if (c.requires_grad()) {
    record([a = a, b = b, c]() mutable {
      auto gc = c.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        auto bv2 = b.values();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * bv2[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        auto av2 = a.values();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[i] += gc[i] * av2[i];
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::scale(const Tensor<T>& a, T factor) {
  Tensor<T> c = make_output<T>(a.shape(), needs_grad(a));
  auto av = a.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] * factor;
  check_finite<T>("scale", c.values());
  if (c.requires_grad()) {
    record([a = a, c, factor]() mutable {
      auto gc = c.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * factor;
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.size() != x.cols()) {
    throw ShapeError("add_bias: shapes " + shape_str(x.shape()) + " and " +
                     shape_str(bias.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  Tensor<T> c = make_output<T>(x.shape(), needs_grad(x, bias));
  auto xv = x.values();
  auto bv = bias.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) cv[i * n + j] = xv[i * n + j] + bv[j];
  check_finite<T>("add_bias", c.values());
  if (c.requires_grad()) {
    record([x = x, bias = bias, c, m, n]() mutable {
      auto gc = c.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gx[i] += gc[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += gc[i * n + j];
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::sum(const Tensor<T>& a) {
  Tensor<T> c = make_output<T>({1}, needs_grad(a));
  T acc = 0;
  for (T v : a.values()) acc += v;
  c.values()[0] = acc;
  check_finite<T>("sum", c.values());
  if (c.requires_grad()) {
    record([a = a, c]() mutable {
      const T g = c.grad()[0];
      auto ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::mean(const Tensor<T>& a) {
  const T inv = T(1) / static_cast<T>(a.size());
  Tensor<T> c = make_output<T>({1}, needs_grad(a));
  T acc = 0;
  for (T v : a.values()) acc += v;
  c.values()[0] = acc * inv;
  check_finite<T>("mean", c.values());
  if (c.requires_grad()) {
    record([a = a, c, inv]() mutable {
      const T g = c.grad()[0] * inv;
      auto ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::relu(const Tensor<T>& a) {
  Tensor<T> c = make_output<T>(a.shape(), needs_grad(a));
  auto av = a.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = av[i] > T(0) ? av[i] : T(0);
  check_finite<T>("relu", c.values());
  if (c.requires_grad()) {
    record([a = a, c]() mutable {
      auto gc = c.grad();
      auto ga = a.grad();
      auto av2 = a.values();
      for (std::size_t i = 0; i < gc.size(); ++i)
        if (av2[i] > T(0)) ga[i] += gc[i];
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::sigmoid(const Tensor<T>& a) {
  Tensor<T> c = make_output<T>(a.shape(), needs_grad(a));
  auto av = a.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) {
    const T x = av[i];
    // Branch on sign to keep exp() from overflowing.
    if (x >= T(0)) {
      const T e = std::exp(-x);
      cv[i] = T(1) / (T(1) + e);
    } else {
      const T e = std::exp(x);
      cv[i] = e / (T(1) + e);
    }
  }
  check_finite<T>("sigmoid", c.values());
  if (c.requires_grad()) {
    record([a = a, c]() mutable {
      auto gc = c.grad();
      auto ga = a.grad();
      auto cv2 = c.values();
      for (std::size_t i = 0; i < gc.size(); ++i)
        ga[i] += gc[i] * cv2[i] * (T(1) - cv2[i]);
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::masked_softmax(const Tensor<T>& logits,
                                  const std::vector<int>& mask) {
  const std::size_t m = logits.size() / (logits.rank() >= 1
                                             ? logits.shape().back()
                                             : 1);
  const std::size_t n = logits.shape().back();
  if (mask.size() != n) {
    throw ShapeError("masked_softmax: mask length " +
                     std::to_string(mask.size()) +
                     " does not match last dimension of " +
                     shape_str(logits.shape()));
  }
  std::size_t unmasked = 0;
  for (int b : mask) {
    if (b != 0 && b != 1) {
      throw ValueError("masked_softmax: mask entries must be 0 or 1");
    }
    unmasked += static_cast<std::size_t>(b);
  }
  if (unmasked == 0) {
    throw NumericalError("masked_softmax: every position is masked");
  }
  Tensor<T> c = make_output<T>(logits.shape(), needs_grad(logits));
  auto xv = logits.values();
  auto cv = c.values();
  for (std::size_t r = 0; r < m; ++r) {
    const T* x = xv.data() + r * n;
    T* y = cv.data() + r * n;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (mask[j] && x[j] > mx) mx = x[j];
    T denom = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[j]) {
        y[j] = std::exp(x[j] - mx);
        denom += y[j];
      } else {
        y[j] = T(0);
      }
    }
    for (std::size_t j = 0; j < n; ++j)
      if (mask[j]) y[j] /= denom;
  }
  check_finite<T>("masked_softmax", c.values());
  if (c.requires_grad()) {
    record([logits = logits, c, mask, m, n]() mutable {
      auto gc = c.grad();
      auto gx = logits.grad();
      auto yv = c.values();
      for (std::size_t r = 0; r < m; ++r) {
        const T* y = yv.data() + r * n;
        const T* g = gc.data() + r * n;
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j)
          if (mask[j]) dot += g[j] * y[j];
        T* out = gx.data() + r * n;
        for (std::size_t j = 0; j < n; ++j)
          if (mask[j]) out[j] += y[j] * (g[j] - dot);
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                              const Tensor<T>& bias) {
  const std::size_t d = x.shape().back();
  const std::size_t m = x.size() / d;
  if (d < 2) {
    throw ShapeError("layer_norm: last dimension must be >= 2, got " +
                     shape_str(x.shape()));
  }
  if (gain.size() != d || bias.size() != d) {
    throw ShapeError("layer_norm: gain/bias must have length " +
                     std::to_string(d));
  }
  constexpr T kEps = static_cast<T>(1e-5);
  Tensor<T> c = make_output<T>(x.shape(),
                               x.requires_grad() || gain.requires_grad() ||
                                   bias.requires_grad());
  // Cached statistics for the backward pass.
  std::vector<T> mu(m), inv_sd(m);
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  auto cv = c.values();
  for (std::size_t r = 0; r < m; ++r) {
    const T* xr = xv.data() + r * d;
    T s = 0;
    for (std::size_t j = 0; j < d; ++j) s += xr[j];
    const T mean_r = s / static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const T t = xr[j] - mean_r;
      var += t * t;
    }
    var /= static_cast<T>(d);
    mu[r] = mean_r;
    inv_sd[r] = T(1) / std::sqrt(var + kEps);
    T* cr = cv.data() + r * d;
    for (std::size_t j = 0; j < d; ++j)
      cr[j] = gv[j] * ((xr[j] - mean_r) * inv_sd[r]) + bv[j];
  }
  check_finite<T>("layer_norm", c.values());
  if (c.requires_grad()) {
    record([x = x, gain = gain, bias = bias, c, mu = std::move(mu),
            inv_sd = std::move(inv_sd), m, d]() mutable {
      auto gc = c.grad();
      auto xv2 = x.values();
      auto gv2 = gain.values();
      for (std::size_t r = 0; r < m; ++r) {
        const T* xr = xv2.data() + r * d;
        const T* gr = gc.data() + r * d;
        const T isd = inv_sd[r];
        // xhat_j and the two row sums used by the standard formula.
        T sum_gy = 0, sum_gyx = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const T xhat = (xr[j] - mu[r]) * isd;
          const T gy = gr[j] * gv2[j];
          sum_gy += gy;
          sum_gyx += gy * xhat;
        }
        if (gain.requires_grad() || bias.requires_grad()) {
          for (std::size_t j = 0; j < d; ++j) {
            const T xhat = (xr[j] - mu[r]) * isd;
            if (gain.requires_grad()) gain.grad()[j] += gr[j] * xhat;
            if (bias.requires_grad()) bias.grad()[j] += gr[j];
          }
        }
        if (x.requires_grad()) {
          auto gx = x.grad();
          const T inv_d = T(1) / static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const T xhat = (xr[j] - mu[r]) * isd;
            const T gy = gr[j] * gv2[j];
            gx[r * d + j] +=
                isd * (gy - inv_d * sum_gy - xhat * inv_d * sum_gyx);
          }
        }
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::bce(const Tensor<T>& pred, const std::vector<T>& targets) {
  if (pred.size() != targets.size()) {
    throw ShapeError("bce: prediction size " + std::to_string(pred.size()) +
                     " does not match target count " +
                     std::to_string(targets.size()));
  }
  for (T t : targets) {
    if (t != T(0) && t != T(1)) {
      throw ValueError("bce: target must be exactly 0 or 1");
    }
  }
  constexpr T kEps = static_cast<T>(1e-7);
  const T lo = kEps, hi = T(1) - kEps;
  const std::size_t n = pred.size();
  Tensor<T> c = make_output<T>({1}, needs_grad(pred));
  auto pv = pred.values();
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T p = std::min(hi, std::max(lo, pv[i]));
    acc += targets[i] == T(1) ? -std::log(p) : -std::log(T(1) - p);
  }
  c.values()[0] = acc / static_cast<T>(n);
  check_finite<T>("bce", c.values());
  if (c.requires_grad()) {
    record([pred = pred, c, targets, lo, hi, n]() mutable {
      const T g = c.grad()[0] / static_cast<T>(n);
      auto gp = pred.grad();
      auto pv2 = pred.values();
      for (std::size_t i = 0; i < n; ++i) {
        // The clamp is flat outside [lo, hi]: no gradient there.
        if (pv2[i] <= lo || pv2[i] >= hi) continue;
        const T p = pv2[i];
        gp[i] += g * (p - targets[i]) / (p * (T(1) - p));
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::gather_rows(const Tensor<T>& table,
                               const std::vector<int>& indices) {
  if (table.rank() != 2) {
    throw ShapeError("gather_rows: table must be 2-D, got " +
                     shape_str(table.shape()));
  }
  const std::size_t v = table.rows(), d = table.cols();
  for (int ix : indices) {
    if (ix < 0 || static_cast<std::size_t>(ix) >= v) {
      throw ShapeError("gather_rows: index " + std::to_string(ix) +
                       " out of range for table " + shape_str(table.shape()));
    }
  }
  Tensor<T> c = make_output<T>({indices.size(), d}, needs_grad(table));
  auto tv = table.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const T* src = tv.data() + static_cast<std::size_t>(indices[i]) * d;
    std::copy(src, src + d, cv.data() + i * d);
  }
  if (c.requires_grad()) {
    record([table = table, c, indices, d]() mutable {
      auto gc = c.grad();
      auto gt = table.grad();
      for (std::size_t i = 0; i < indices.size(); ++i) {
        T* dst = gt.data() + static_cast<std::size_t>(indices[i]) * d;
        const T* src = gc.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  }
  return c;
}

namespace {

// Vectors and single-row matrices share a layout; both count as one row.
template <class T>
std::pair<std::size_t, std::size_t> row_shape(const Tensor<T>& t) {
  if (t.rank() > 2) {
    throw ShapeError("concat_cols: expected at most 2-D parts, got " +
                     shape_str(t.shape()));
  }
  if (t.rank() == 2) return {t.rows(), t.cols()};
  return {1, t.size()};
}

}  // namespace

template <class T>
Tensor<T> Tape<T>::concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t rows = row_shape(parts.front()).first;
  std::size_t total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    auto [r, cols] = row_shape(p);
    if (r != rows) {
      throw ShapeError("concat_cols: row counts differ, " +
                       std::to_string(rows) + " vs " + std::to_string(r));
    }
    total += cols;
    rg = rg || p.requires_grad();
  }
  Tensor<T> c = make_output<T>({rows, total}, rg);
  auto cv = c.values();
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t cols = row_shape(p).second;
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.begin() + static_cast<std::ptrdiff_t>(r * cols),
                pv.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols),
                cv.begin() + static_cast<std::ptrdiff_t>(r * total + off));
    }
    off += cols;
  }
  if (c.requires_grad()) {
    record([parts = parts, c, rows, total]() mutable {
      auto gc = c.grad();
      std::size_t off2 = 0;
      for (auto& p : parts) {
        const std::size_t cols = row_shape(p).second;
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < cols; ++j)
              gp[r * cols + j] += gc[r * total + off2 + j];
        }
        off2 += cols;
      }
    });
  }
  return c;
}

template <class T>
Tensor<T> Tape<T>::dropout(const Tensor<T>& x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValueError("dropout rate must lie in [0, 1)");
  }
  if (rate == 0.0) return x;
  const T inv_keep = T(1) / static_cast<T>(1.0 - rate);
  std::vector<std::uint8_t> keep(x.size());
  for (auto& k : keep) k = rng.bernoulli(rate) ? 0 : 1;
  Tensor<T> c = make_output<T>(x.shape(), needs_grad(x));
  auto xv = x.values();
  auto cv = c.values();
  for (std::size_t i = 0; i < cv.size(); ++i) {
    cv[i] = keep[i] ? xv[i] * inv_keep : T(0);
  }
  check_finite<T>("dropout", c.values());
  if (c.requires_grad()) {
    record([x = x, c, keep = std::move(keep), inv_keep]() mutable {
      auto gc = c.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < gc.size(); ++i) {
        if (keep[i]) gx[i] += gc[i] * inv_keep;
      }
    });
  }
  return c;
}

template <class T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward expects a scalar loss, got shape " +
                     shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  Tensor<T> root = loss;
  root.grad()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

template <class T>
void Tape<T>::clear() {
  nodes_.clear();
}

// ---------------------------------------------------------------------------
// Finite differences

template <class T>
T finite_diff_check(const std::function<Tensor<T>(Tape<T>&)>& f,
                    std::span<Tensor<T>> params, T h) {
  // Analytic gradients.
  for (auto& p : params) p.zero_grad();
  {
    Tape<T> tape;
    Tensor<T> loss = f(tape);
    tape.backward(loss);
  }
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
  }
  auto eval = [&]() -> T {
    Tape<T> tape;
    return f(tape).value();
  };
  T worst = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto vals = params[pi].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const T keep = vals[i];
      vals[i] = keep + h;
      const T up = eval();
      vals[i] = keep - h;
      const T down = eval();
      vals[i] = keep;
      const T numeric = (up - down) / (T(2) * h);
      const T a = analytic[pi][i];
      const T denom = std::max({std::abs(a), std::abs(numeric),
                                static_cast<T>(1e-8)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template float finite_diff_check<float>(
    const std::function<Tensor<float>(Tape<float>&)>&, std::span<Tensor<float>>,
    float);
template double finite_diff_check<double>(
    const std::function<Tensor<double>(Tape<double>&)>&,
    std::span<Tensor<double>>, double);

}  // namespace checkmate
