#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "checkmate/fusion.hpp"
#include "checkmate/linet.hpp"
#include "checkmate/metrics.hpp"

namespace checkmate {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
// "sgd" | "adam"; anything else -> ValueError.
OptimizerKind optimizer_kind_of(const std::string& name);

struct TrainConfig {
  std::uint64_t seed = 13;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 3e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t patience = 5;
  LossWeights loss_weights{};
  EncoderConfig encoder{};    // carries max_len and the 6-head rule
  LinetConfig linet{};
  std::size_t fusion_hidden = 64;

  // Classifier-head geometry implied by the encoder and feature widths.
  FusionConfig fusion() const;
  void validate() const;
};

// The frozen annotators; only the embedding tables that consume their
// output learn during main training.
struct LinetModels {
  PosTagger tagger;
  DependencyParser parser;
};

// Everything the gradient reaches, as one bundle.
template <class T>
struct ModelParams {
  ConetParams<T> conet;
  LinetParams<T> linet;
  FusionParams<T> fusion;

  static ModelParams init(const TrainConfig& config, std::size_t vocab_size,
                          Rng& rng);
  // Concatenation of the three per-module lists, order fixed.
  std::vector<std::pair<std::string, Tensor<T>>> named_params() const;
};

// Deep copy of every parameter's values in named_params order.
template <class T>
std::vector<std::vector<T>> snapshot(const ModelParams<T>& params);
// Writes a snapshot back; ShapeError when the layout disagrees.
template <class T>
void restore(ModelParams<T>& params, const std::vector<std::vector<T>>& snap);

// Frozen-annotator view of one record: everything the differentiable
// model consumes.
struct ClaimAnnotation {
  EncodedClaim encoded;
  std::vector<int> tags;
  DependencyTree tree;
  std::array<int, kNumEmoticonBuckets> emoticons{};
};

ClaimAnnotation annotate(const std::string& text, const Vocab& vocab,
                         std::size_t max_len, const LinetModels& models);

// One record through encoder, attention pooling and supervision,
// linguistic features, fusion, and both classifier branches. The output
// attention slots hold the pooled per-label rows.
template <class T>
struct RecordPass {
  ModelOutput<T> output;
  Tensor<T> attention_loss;  // scalar, exactly 0 without auxiliary gold
};

template <class T>
RecordPass<T> forward_record(Tape<T>& tape, const ClaimAnnotation& ann,
                             const std::optional<LabelSet>& gold_aux,
                             const ModelParams<T>& params,
                             Rng* dropout_rng = nullptr);

// SGD or Adam over a fixed parameter list. Gradients accumulate on the
// tensors; step() consumes them and advances the shared step counter.
template <class T>
class Optimizer {
 public:
  Optimizer(const TrainConfig& config,
            std::vector<std::pair<std::string, Tensor<T>>> params);

  void zero_grad();
  void step();
  std::size_t steps() const { return t_; }

 private:
  TrainConfig config_;
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  std::vector<std::vector<T>> m_, v_;  // Adam moments, zero-initialized
  std::size_t t_ = 0;
};

// Strict-improvement early stopping. Epochs are 1-based; ties do not
// reset the countdown.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience);

  // Returns true when the metric is a new best.
  bool observe(double metric);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = -1.0;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_weighted_f1 = 0.0;
  bool best_so_far = false;
};

// One JSON object, keys: epoch, train_loss, val_weighted_f1, best_so_far.
std::string to_jsonl(const EpochLog& log);

template <class T>
struct TrainResult {
  ModelParams<T> params;  // best-epoch snapshot, already restored
  // Last-epoch values in named_params order, for resuming or inspecting
  // the end state when an earlier epoch won model selection.
  std::vector<std::vector<T>> final_state;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_weighted_f1 = 0.0;
  std::size_t epochs_run = 0;
};

// Full training loop: per epoch a seed+epoch-keyed shuffle, minibatch
// forward/backward/step, validation weighted F1 on the primary task,
// best-snapshot keeping, early stop after `patience` epochs without
// strict improvement. Every logged number is determined by (config,
// data, seed). A non-finite loss aborts with NumericalError naming
// epoch, batch, and the offending term. When log_stream is given each
// epoch's JSONL line is written as it completes.
template <class T>
TrainResult<T> train(const TrainConfig& config, const DatasetSplit& split,
                     const Vocab& vocab, const LinetModels& models,
                     std::ostream* log_stream = nullptr);

template <class T>
struct InferenceResult {
  ModelOutput<T> output;  // attention slots filled for display
  Prediction prediction;
};

// Dropout-free forward plus thresholding; never mutates parameters.
template <class T>
InferenceResult<T> infer(const ClaimAnnotation& ann,
                         const ModelParams<T>& params,
                         double threshold = 0.5);

// Batched dropout-free evaluation against gold labels.
template <class T>
EvalReport evaluate(const ModelParams<T>& params,
                    const std::vector<ClaimRecord>& records,
                    const Vocab& vocab, const LinetModels& models,
                    double threshold = 0.5);

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;
extern template std::vector<std::vector<float>> snapshot<float>(
    const ModelParams<float>&);
extern template std::vector<std::vector<double>> snapshot<double>(
    const ModelParams<double>&);
extern template void restore<float>(ModelParams<float>&,
                                    const std::vector<std::vector<float>>&);
extern template void restore<double>(ModelParams<double>&,
                                     const std::vector<std::vector<double>>&);
extern template struct RecordPass<float>;
extern template struct RecordPass<double>;
extern template RecordPass<float> forward_record<float>(
    Tape<float>&, const ClaimAnnotation&, const std::optional<LabelSet>&,
    const ModelParams<float>&, Rng*);
extern template RecordPass<double> forward_record<double>(
    Tape<double>&, const ClaimAnnotation&, const std::optional<LabelSet>&,
    const ModelParams<double>&, Rng*);
extern template class Optimizer<float>;
extern template class Optimizer<double>;
extern template struct TrainResult<float>;
extern template struct TrainResult<double>;
extern template TrainResult<float> train<float>(const TrainConfig&,
                                                const DatasetSplit&,
                                                const Vocab&,
                                                const LinetModels&,
                                                std::ostream*);
extern template TrainResult<double> train<double>(const TrainConfig&,
                                                  const DatasetSplit&,
                                                  const Vocab&,
                                                  const LinetModels&,
                                                  std::ostream*);
extern template struct InferenceResult<float>;
extern template struct InferenceResult<double>;
extern template InferenceResult<float> infer<float>(const ClaimAnnotation&,
                                                    const ModelParams<float>&,
                                                    double);
extern template InferenceResult<double> infer<double>(
    const ClaimAnnotation&, const ModelParams<double>&, double);
extern template EvalReport evaluate<float>(const ModelParams<float>&,
                                           const std::vector<ClaimRecord>&,
                                           const Vocab&, const LinetModels&,
                                           double);
extern template EvalReport evaluate<double>(const ModelParams<double>&,
                                            const std::vector<ClaimRecord>&,
                                            const Vocab&, const LinetModels&,
                                            double);

}  // namespace checkmate
