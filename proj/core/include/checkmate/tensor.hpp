#ifndef CHECKMATE_TENSOR_HPP
#define CHECKMATE_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "checkmate/error.hpp"

namespace checkmate {

class Rng;

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// N-dimensional row-major float array with an optional gradient buffer.
// Tensor is a cheap handle; copies share the underlying storage, which is
// what lets backward closures accumulate into the gradients of the same
// parameters the model holds.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values,
                     bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);
  // 1-by-n row vector.
  static Tensor row(std::vector<T> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t size() const { return data_->values.size(); }
  // 2-D helpers.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<T> values() { return data_->values; }
  std::span<const T> values() const { return data_->values; }
  std::span<T> grad();
  std::span<const T> grad() const;
  bool requires_grad() const { return data_->requires_grad; }
  void zero_grad();

  // Scalar accessor; requires size() == 1.
  T value() const;

  T at(std::size_t r, std::size_t c) const;

  // Identity of the underlying buffer (used by the tape and by tests).
  const void* id() const { return data_.get(); }

 private:
  struct Data {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty unless requires_grad
    bool requires_grad = false;
  };
  std::shared_ptr<Data> data_;

  static Tensor wrap(std::shared_ptr<Data> d) {
    Tensor t;
    t.data_ = std::move(d);
    return t;
  }
};

// Records the operations of one forward pass and replays them in reverse
// to accumulate gradients. Define-by-run: the recording order is the
// topological order. Single-threaded by contract.
template <class T>
class Tape {
 public:
  // c[m x n] = a[m x k] * b[k x n]
  Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
  // c[m x n] = a[m x k] * b[n x k]^T
  Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
  // Elementwise; shapes must match exactly.
  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> scale(const Tensor<T>& a, T factor);
  // x[m x n] + bias[n], broadcast over rows. The only broadcast in the
  // engine; all other shape mismatches are errors.
  Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);
  Tensor<T> sum(const Tensor<T>& a);
  Tensor<T> mean(const Tensor<T>& a);
  Tensor<T> relu(const Tensor<T>& a);
  Tensor<T> sigmoid(const Tensor<T>& a);
  // Softmax over the last dimension restricted to unmasked positions.
  // Masked positions are exactly zero. mask entries must be 0 or 1 and at
  // least one position must be unmasked.
  Tensor<T> masked_softmax(const Tensor<T>& logits,
                           const std::vector<int>& mask);
  // Row-wise zero-mean unit-variance normalization followed by the affine
  // map gain * xhat + bias. Variance epsilon 1e-5.
  Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                       const Tensor<T>& bias);
  // Mean over elements of -[t ln p + (1-t) ln(1-p)], p clamped to
  // [1e-7, 1 - 1e-7]. targets must all be exactly 0 or 1.
  Tensor<T> bce(const Tensor<T>& pred, const std::vector<T>& targets);
  // out[i, :] = table[indices[i], :]; backward scatter-adds into table.
  Tensor<T> gather_rows(const Tensor<T>& table,
                        const std::vector<int>& indices);
  // Concatenate side by side: every part must have the same row count
  // (vectors count as one row). Result is rows x (sum of columns).
  Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
  // Inverted dropout: zeroes each element with probability `rate` and
  // scales survivors by 1/(1-rate). The mask is drawn once per call from
  // `rng`, so training stays deterministic under a fixed seed.
  Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng);

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
  // accumulate additively; callers zero them between steps.
  void backward(const Tensor<T>& loss);

  void clear();
  std::size_t num_ops() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;

  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
};

// Central-difference gradient check: rebuilds the loss through `f` on a
// fresh tape, compares analytic gradients of `params` against
// (f(x+h) - f(x-h)) / 2h coordinate by coordinate, and returns the largest
// relative error |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
template <class T>
T finite_diff_check(const std::function<Tensor<T>(Tape<T>&)>& f,
                    std::span<Tensor<T>> params, T h = static_cast<T>(1e-5));

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template float finite_diff_check<float>(
    const std::function<Tensor<float>(Tape<float>&)>&, std::span<Tensor<float>>,
    float);
extern template double finite_diff_check<double>(
    const std::function<Tensor<double>(Tape<double>&)>&,
    std::span<Tensor<double>>, double);

}  // namespace checkmate

#endif  // CHECKMATE_TENSOR_HPP
