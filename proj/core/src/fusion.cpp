#include "checkmate/fusion.hpp"

#include <cmath>

#include "checkmate/error.hpp"
#include "checkmate/rng.hpp"

namespace checkmate {

namespace {

template <class T>
Tensor<T> xavier(Shape shape, Rng& rng) {
  const double fan_in = static_cast<double>(shape[0]);
  const double fan_out = static_cast<double>(shape.back());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  auto t = Tensor<T>::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

void FusionConfig::validate() const {
  if (d_model < 1 || ling_dim < 1 || hidden < 1) {
    throw ConfigError("fusion widths must be at least 1");
  }
}

void LossWeights::validate() const {
  if (!(primary >= 0.0) || !(aux >= 0.0) || !(attention >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (primary == 0.0 && aux == 0.0 && attention == 0.0) {
    throw ConfigError("at least one loss weight must be positive");
  }
}

template <class T>
FusionParams<T> FusionParams<T>::init(const FusionConfig& config, Rng& rng) {
  config.validate();
  const std::size_t f = config.fused_dim();
  const std::size_t h = config.hidden;
  FusionParams<T> params;
  params.config = config;
  params.p_w1 = xavier<T>({f, h}, rng);
  params.p_b1 = Tensor<T>::zeros({h}, true);
  params.p_w2 = xavier<T>({h, 1}, rng);
  params.p_b2 = Tensor<T>::zeros({1}, true);
  params.a_w1 = xavier<T>({f, h}, rng);
  params.a_b1 = Tensor<T>::zeros({h}, true);
  params.a_w2 = xavier<T>({h, 6}, rng);
  params.a_b2 = Tensor<T>::zeros({6}, true);
  return params;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> FusionParams<T>::named_params()
    const {
  return {{"head.p.w1", p_w1}, {"head.p.b1", p_b1}, {"head.p.w2", p_w2},
          {"head.p.b2", p_b2}, {"head.a.w1", a_w1}, {"head.a.b1", a_b1},
          {"head.a.w2", a_w2}, {"head.a.b2", a_b2}};
}

template <class T>
Tensor<T> fuse(Tape<T>& tape, const EncoderOutput<T>& encoder_out,
               const std::array<Tensor<T>, 6>& contexts,
               const Tensor<T>& linguistic) {
  const auto& hidden = encoder_out.hidden;
  if (hidden.rank() != 2 || hidden.rows() == 0) {
    throw ShapeError("fuse: encoder hidden must be a non-empty matrix, got " +
                     shape_str(hidden.shape()));
  }
  const std::size_t d = hidden.cols();
  for (const auto& context : contexts) {
    if (context.shape() != Shape{1, d}) {
      throw ShapeError("fuse: pooled context must be 1 x " +
                       std::to_string(d) + ", got " +
                       shape_str(context.shape()));
    }
  }
  if (linguistic.rank() != 2 || linguistic.rows() != 1) {
    throw ShapeError("fuse: linguistic features must be a single row, got " +
                     shape_str(linguistic.shape()));
  }
  const Tensor<T> cls = tape.gather_rows(hidden, {0});
  return tape.concat_cols({cls, contexts[0], contexts[1], contexts[2],
                           contexts[3], contexts[4], contexts[5], linguistic});
}

template <class T>
ModelOutput<T> classify(Tape<T>& tape, const Tensor<T>& fused,
                        const FusionParams<T>& params) {
  params.config.validate();
  const std::size_t f = params.config.fused_dim();
  if (fused.shape() != Shape{1, f}) {
    throw ShapeError("classify: fused vector must be 1 x " +
                     std::to_string(f) + ", got " + shape_str(fused.shape()));
  }
  auto branch = [&](const Tensor<T>& w1, const Tensor<T>& b1,
                    const Tensor<T>& w2, const Tensor<T>& b2) {
    const auto h = tape.relu(tape.add_bias(tape.matmul(fused, w1), b1));
    return tape.sigmoid(tape.add_bias(tape.matmul(h, w2), b2));
  };
  ModelOutput<T> out;
  out.p_primary = branch(params.p_w1, params.p_b1, params.p_w2, params.p_b2);
  out.p_aux = branch(params.a_w1, params.a_b1, params.a_w2, params.a_b2);
  return out;
}

template <class T>
Tensor<T> total_loss(Tape<T>& tape, const ModelOutput<T>& out,
                     const Tensor<T>& attention_loss, const ClaimRecord& gold,
                     const LossWeights& weights) {
  weights.validate();
  if (gold.check_worthy != 0 && gold.check_worthy != 1) {
    throw ValueError("primary label must be 0 or 1, got " +
                     std::to_string(gold.check_worthy));
  }
  const auto primary =
      tape.bce(out.p_primary, {static_cast<T>(gold.check_worthy)});
  Tensor<T> loss = tape.scale(primary, static_cast<T>(weights.primary));
  if (gold.aux.has_value()) {
    std::vector<T> targets;
    targets.reserve(6);
    for (int a : *gold.aux) {
      if (a != 0 && a != 1) {
        throw ValueError("auxiliary labels must be 0 or 1, got " +
                         std::to_string(a));
      }
      targets.push_back(static_cast<T>(a));
    }
    const auto aux = tape.bce(out.p_aux, targets);
    loss = tape.add(loss, tape.scale(aux, static_cast<T>(weights.aux)));
  }
  loss = tape.add(
      loss, tape.scale(attention_loss, static_cast<T>(weights.attention)));
  return loss;
}

template <class T>
Prediction predict(const ModelOutput<T>& out, double threshold) {
  if (!(threshold > 0.0) || !(threshold < 1.0)) {
    throw ValueError("threshold must lie strictly inside (0, 1)");
  }
  if (out.p_primary.size() != 1 || out.p_aux.size() != 6) {
    throw ShapeError("predict: expected one primary and six auxiliary "
                     "probabilities");
  }
  Prediction pred;
  pred.check_worthy =
      static_cast<double>(out.p_primary.values()[0]) >= threshold ? 1 : 0;
  const auto aux = out.p_aux.values();
  for (std::size_t l = 0; l < 6; ++l) {
    pred.aux[l] = static_cast<double>(aux[l]) >= threshold ? 1 : 0;
  }
  return pred;
}

template struct FusionParams<float>;
template struct FusionParams<double>;
template Tensor<float> fuse<float>(Tape<float>&, const EncoderOutput<float>&,
                                   const std::array<Tensor<float>, 6>&,
                                   const Tensor<float>&);
template Tensor<double> fuse<double>(Tape<double>&,
                                     const EncoderOutput<double>&,
                                     const std::array<Tensor<double>, 6>&,
                                     const Tensor<double>&);
template ModelOutput<float> classify<float>(Tape<float>&, const Tensor<float>&,
                                            const FusionParams<float>&);
template ModelOutput<double> classify<double>(Tape<double>&,
                                              const Tensor<double>&,
                                              const FusionParams<double>&);
template Tensor<float> total_loss<float>(Tape<float>&,
                                         const ModelOutput<float>&,
                                         const Tensor<float>&,
                                         const ClaimRecord&,
                                         const LossWeights&);
template Tensor<double> total_loss<double>(Tape<double>&,
                                           const ModelOutput<double>&,
                                           const Tensor<double>&,
                                           const ClaimRecord&,
                                           const LossWeights&);
template Prediction predict<float>(const ModelOutput<float>&, double);
template Prediction predict<double>(const ModelOutput<double>&, double);

}  // namespace checkmate
