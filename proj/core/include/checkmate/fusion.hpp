#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "checkmate/conet.hpp"
#include "checkmate/dataset.hpp"
#include "checkmate/tensor.hpp"

namespace checkmate {

class Rng;

struct FusionConfig {
  std::size_t d_model = 64;  // must match the encoder width
  std::size_t ling_dim = 52; // must match the linguistic feature width
  std::size_t hidden = 64;   // width of each classifier branch

  // [CLS ‖ c1..c6 ‖ linguistic] concatenation width.
  std::size_t fused_dim() const { return 7 * d_model + ling_dim; }
  void validate() const;
};

// Two parallel branches over one fused vector: branch P ends in a single
// sigmoid (check-worthiness), branch A in six (auxiliary labels).
template <class T>
struct FusionParams {
  FusionConfig config;
  Tensor<T> p_w1, p_b1, p_w2, p_b2;
  Tensor<T> a_w1, a_b1, a_w2, a_b2;

  static FusionParams init(const FusionConfig& config, Rng& rng);
  std::vector<std::pair<std::string, Tensor<T>>> named_params() const;
};

template <class T>
struct ModelOutput {
  Tensor<T> p_primary;                 // {1, 1}
  Tensor<T> p_aux;                     // {1, 6}
  std::array<Tensor<T>, 6> attention;  // pooled label attention, for display
};

// Non-negative loss term weights; at least one must be positive.
struct LossWeights {
  double primary = 1.0;
  double aux = 1.0;
  double attention = 0.5;

  void validate() const;
};

// [CLS hidden row ‖ c1..c6 ‖ linguistic features], 1 x (7d + d_L).
// ShapeError when any part disagrees with the encoder width.
template <class T>
Tensor<T> fuse(Tape<T>& tape, const EncoderOutput<T>& encoder_out,
               const std::array<Tensor<T>, 6>& contexts,
               const Tensor<T>& linguistic);

// Forward through both branches. The returned attention slots are left
// empty; the end-to-end pipeline fills them from the encoder.
template <class T>
ModelOutput<T> classify(Tape<T>& tape, const Tensor<T>& fused,
                        const FusionParams<T>& params);

// primary-weighted BCE + aux-weighted mean BCE over the six labels +
// attention-weighted supervision term. Records without auxiliary gold
// contribute only the primary and attention terms.
template <class T>
Tensor<T> total_loss(Tape<T>& tape, const ModelOutput<T>& out,
                     const Tensor<T>& attention_loss, const ClaimRecord& gold,
                     const LossWeights& weights);

struct Prediction {
  int check_worthy = 0;
  std::array<int, 6> aux{};

  bool operator==(const Prediction&) const = default;
};

// Independent thresholding of every probability; a probability exactly
// at the threshold counts as positive. ValueError unless threshold is
// strictly inside (0, 1).
template <class T>
Prediction predict(const ModelOutput<T>& out, double threshold = 0.5);

extern template struct FusionParams<float>;
extern template struct FusionParams<double>;
extern template Tensor<float> fuse<float>(Tape<float>&,
                                          const EncoderOutput<float>&,
                                          const std::array<Tensor<float>, 6>&,
                                          const Tensor<float>&);
extern template Tensor<double> fuse<double>(Tape<double>&,
                                            const EncoderOutput<double>&,
                                            const std::array<Tensor<double>, 6>&,
                                            const Tensor<double>&);
extern template ModelOutput<float> classify<float>(Tape<float>&,
                                                   const Tensor<float>&,
                                                   const FusionParams<float>&);
extern template ModelOutput<double> classify<double>(
    Tape<double>&, const Tensor<double>&, const FusionParams<double>&);
extern template Tensor<float> total_loss<float>(Tape<float>&,
                                                const ModelOutput<float>&,
                                                const Tensor<float>&,
                                                const ClaimRecord&,
                                                const LossWeights&);
extern template Tensor<double> total_loss<double>(Tape<double>&,
                                                  const ModelOutput<double>&,
                                                  const Tensor<double>&,
                                                  const ClaimRecord&,
                                                  const LossWeights&);
extern template Prediction predict<float>(const ModelOutput<float>&, double);
extern template Prediction predict<double>(const ModelOutput<double>&, double);

}  // namespace checkmate
