#include "checkmate/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "checkmate/error.hpp"
#include "checkmate/rng.hpp"
#include "json.hpp"

namespace checkmate {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_kind_of(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ValueError("unknown optimizer '" + name + "', expected sgd or adam");
}

FusionConfig TrainConfig::fusion() const {
  FusionConfig f;
  f.d_model = encoder.d_model;
  f.ling_dim = linet.feature_dim();
  f.hidden = fusion_hidden;
  return f;
}

void TrainConfig::validate() const {
  encoder.validate();
  linet.validate();
  fusion().validate();
  loss_weights.validate();
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive and finite");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0) || !std::isfinite(adam_eps)) {
    throw ConfigError("adam_eps must be positive and finite");
  }
  if (patience == 0) throw ConfigError("patience must be >= 1");
}

template <class T>
ModelParams<T> ModelParams<T>::init(const TrainConfig& config,
                                    std::size_t vocab_size, Rng& rng) {
  config.validate();
  ModelParams<T> params;
  params.conet = ConetParams<T>::init(config.encoder, vocab_size, rng);
  params.linet = LinetParams<T>::init(config.linet, rng);
  params.fusion = FusionParams<T>::init(config.fusion(), rng);
  return params;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> ModelParams<T>::named_params()
    const {
  auto out = conet.named_params();
  for (auto& entry : linet.named_params()) out.push_back(std::move(entry));
  for (auto& entry : fusion.named_params()) out.push_back(std::move(entry));
  return out;
}

template <class T>
std::vector<std::vector<T>> snapshot(const ModelParams<T>& params) {
  std::vector<std::vector<T>> out;
  for (const auto& [name, tensor] : params.named_params()) {
    auto vals = tensor.values();
    out.emplace_back(vals.begin(), vals.end());
  }
  return out;
}

template <class T>
void restore(ModelParams<T>& params, const std::vector<std::vector<T>>& snap) {
  auto named = params.named_params();
  if (named.size() != snap.size()) {
    throw ShapeError("restore: snapshot has " + std::to_string(snap.size()) +
                     " tensors, model has " + std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto vals = named[i].second.values();
    if (vals.size() != snap[i].size()) {
      throw ShapeError("restore: tensor '" + named[i].first + "' holds " +
                       std::to_string(vals.size()) + " values, snapshot has " +
                       std::to_string(snap[i].size()));
    }
    std::copy(snap[i].begin(), snap[i].end(), vals.begin());
  }
}

ClaimAnnotation annotate(const std::string& text, const Vocab& vocab,
                         std::size_t max_len, const LinetModels& models) {
  ClaimAnnotation ann;
  std::vector<std::string> tokens = tokenize(text);
  ann.encoded = encode(tokens, vocab, max_len);
  if (!tokens.empty()) {
    ann.tags = models.tagger.tag(tokens);
    ann.tree = models.parser.parse(tokens, ann.tags);
  }
  ann.emoticons = encode_emoticons(text);
  return ann;
}

template <class T>
RecordPass<T> forward_record(Tape<T>& tape, const ClaimAnnotation& ann,
                             const std::optional<LabelSet>& gold_aux,
                             const ModelParams<T>& params, Rng* dropout_rng) {
  EncoderOutput<T> enc_out =
      encoder_forward(tape, ann.encoded, params.conet, dropout_rng);
  std::array<Tensor<T>, 6> alphas;
  for (std::size_t h = 0; h < 6; ++h) {
    alphas[h] =
        label_attention_pool(tape, enc_out.attention[h], ann.encoded.mask);
  }
  AttentionSupervision<T> sup = attention_supervision_loss(
      tape, enc_out.hidden, alphas, gold_aux, params.conet);
  Tensor<T> ling = linguistic_features(tape, ann.tags, ann.tree,
                                       ann.emoticons, params.linet);
  Tensor<T> fused = fuse(tape, enc_out, sup.contexts, ling);

  RecordPass<T> pass;
  pass.output = classify(tape, fused, params.fusion);
  pass.output.attention = alphas;
  pass.attention_loss = sup.loss;
  return pass;
}

template <class T>
Optimizer<T>::Optimizer(const TrainConfig& config,
                        std::vector<std::pair<std::string, Tensor<T>>> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  if (config_.optimizer == OptimizerKind::adam) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& [name, tensor] : params_) {
      m_.emplace_back(tensor.size(), T(0));
      v_.emplace_back(tensor.size(), T(0));
    }
  }
}

template <class T>
void Optimizer<T>::zero_grad() {
  for (auto& [name, tensor] : params_) tensor.zero_grad();
}

template <class T>
void Optimizer<T>::step() {
  ++t_;
  const T lr = static_cast<T>(config_.learning_rate);
  if (config_.optimizer == OptimizerKind::sgd) {
    for (auto& [name, tensor] : params_) {
      auto w = tensor.values();
      auto g = tensor.grad();
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
    }
    return;
  }
  const T b1 = static_cast<T>(config_.adam_beta1);
  const T b2 = static_cast<T>(config_.adam_beta2);
  const T eps = static_cast<T>(config_.adam_eps);
  const T c1 = T(1) - static_cast<T>(std::pow(config_.adam_beta1, t_));
  const T c2 = T(1) - static_cast<T>(std::pow(config_.adam_beta2, t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].second.values();
    auto g = params_[i].second.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      T mhat = m[j] / c1;
      T vhat = v[j] / c2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

EarlyStopper::EarlyStopper(std::size_t patience) : patience_(patience) {
  if (patience == 0) throw ConfigError("patience must be >= 1");
}

bool EarlyStopper::observe(double metric) {
  ++epoch_;
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = epoch_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

std::string to_jsonl(const EpochLog& log) {
  nlohmann::ordered_json obj;
  obj["epoch"] = log.epoch;
  obj["train_loss"] = log.train_loss;
  obj["val_weighted_f1"] = log.val_weighted_f1;
  obj["best_so_far"] = log.best_so_far;
  return obj.dump();
}

namespace {

template <class T>
double validation_weighted_f1(const ModelParams<T>& params,
                              const std::vector<ClaimRecord>& records,
                              const std::vector<ClaimAnnotation>& annotations) {
  std::vector<int> gold, pred;
  gold.reserve(records.size());
  pred.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    Tape<T> tape;
    RecordPass<T> pass =
        forward_record<T>(tape, annotations[i], std::nullopt, params, nullptr);
    gold.push_back(records[i].check_worthy);
    pred.push_back(predict(pass.output).check_worthy);
  }
  return weighted_f1(confusion(gold, pred));
}

}  // namespace

template <class T>
TrainResult<T> train(const TrainConfig& config, const DatasetSplit& split,
                     const Vocab& vocab, const LinetModels& models,
                     std::ostream* log_stream) {
  config.validate();
  if (split.train.empty()) throw ValueError("train: empty training split");
  if (split.validation.empty()) {
    throw ValueError("train: empty validation split (model selection needs "
                     "validation records)");
  }

  std::vector<ClaimAnnotation> train_ann, val_ann;
  train_ann.reserve(split.train.size());
  for (const auto& rec : split.train) {
    train_ann.push_back(annotate(rec.text, vocab, config.encoder.max_len,
                                 models));
  }
  val_ann.reserve(split.validation.size());
  for (const auto& rec : split.validation) {
    val_ann.push_back(annotate(rec.text, vocab, config.encoder.max_len,
                               models));
  }

  Rng init_rng(config.seed);
  TrainResult<T> result;
  result.params = ModelParams<T>::init(config, vocab.size(), init_rng);
  Optimizer<T> optimizer(config, result.params.named_params());
  EarlyStopper stopper(config.patience);
  std::vector<std::vector<T>> best_snap = snapshot(result.params);

  const std::size_t n = split.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng(Rng::mix(config.seed, epoch));
    epoch_rng.shuffle(order);
    Rng* dropout_rng = config.encoder.dropout > 0.0 ? &epoch_rng : nullptr;

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t offset = 0; offset < n;
         offset += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, n - offset);
      Tape<T> tape;
      optimizer.zero_grad();
      Tensor<T> batch_loss;
      try {
        Tensor<T> acc;
        for (std::size_t k = 0; k < count; ++k) {
          const ClaimRecord& rec = split.train[order[offset + k]];
          RecordPass<T> pass = forward_record<T>(
              tape, train_ann[order[offset + k]], rec.aux, result.params,
              dropout_rng);
          Tensor<T> loss = total_loss(tape, pass.output, pass.attention_loss,
                                      rec, config.loss_weights);
          acc = k == 0 ? loss : tape.add(acc, loss);
        }
        batch_loss = tape.scale(acc, T(1) / static_cast<T>(count));
      } catch (const NumericalError& e) {
        throw NumericalError("training aborted at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ": " + e.what());
      }
      const double loss_value = static_cast<double>(batch_loss.value());
      if (!std::isfinite(loss_value)) {
        throw NumericalError("training aborted at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) +
                             ": total loss is not finite");
      }
      tape.backward(batch_loss);
      optimizer.step();
      loss_sum += loss_value * static_cast<double>(count);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(n);
    try {
      log.val_weighted_f1 =
          validation_weighted_f1(result.params, split.validation, val_ann);
    } catch (const NumericalError& e) {
      throw NumericalError("training aborted at epoch " +
                           std::to_string(epoch) + " during validation: " +
                           e.what());
    }
    log.best_so_far = stopper.observe(log.val_weighted_f1);
    if (log.best_so_far) best_snap = snapshot(result.params);
    result.log.push_back(log);
    result.epochs_run = epoch;
    if (log_stream != nullptr) *log_stream << to_jsonl(log) << '\n';
    if (stopper.should_stop()) break;
  }

  result.final_state = snapshot(result.params);
  restore(result.params, best_snap);
  result.best_epoch = stopper.best_epoch();
  result.best_val_weighted_f1 = stopper.best_metric();
  return result;
}

template <class T>
InferenceResult<T> infer(const ClaimAnnotation& ann,
                         const ModelParams<T>& params, double threshold) {
  Tape<T> tape;
  InferenceResult<T> result;
  RecordPass<T> pass =
      forward_record<T>(tape, ann, std::nullopt, params, nullptr);
  result.output = pass.output;
  result.prediction = predict(pass.output, threshold);
  return result;
}

template <class T>
EvalReport evaluate(const ModelParams<T>& params,
                    const std::vector<ClaimRecord>& records,
                    const Vocab& vocab, const LinetModels& models,
                    double threshold) {
  if (records.empty()) throw ValueError("evaluate: no records");
  std::vector<int> gold, pred;
  std::vector<std::optional<LabelSet>> gold_aux;
  std::vector<LabelSet> pred_aux;
  for (const auto& rec : records) {
    ClaimAnnotation ann =
        annotate(rec.text, vocab, params.conet.config.max_len, models);
    InferenceResult<T> inf = infer<T>(ann, params, threshold);
    gold.push_back(rec.check_worthy);
    pred.push_back(inf.prediction.check_worthy);
    gold_aux.push_back(rec.aux);
    pred_aux.push_back(inf.prediction.aux);
  }
  return report(gold, pred, gold_aux, pred_aux);
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template std::vector<std::vector<float>> snapshot<float>(
    const ModelParams<float>&);
template std::vector<std::vector<double>> snapshot<double>(
    const ModelParams<double>&);
template void restore<float>(ModelParams<float>&,
                             const std::vector<std::vector<float>>&);
template void restore<double>(ModelParams<double>&,
                              const std::vector<std::vector<double>>&);
template RecordPass<float> forward_record<float>(Tape<float>&,
                                                 const ClaimAnnotation&,
                                                 const std::optional<LabelSet>&,
                                                 const ModelParams<float>&,
                                                 Rng*);
template RecordPass<double> forward_record<double>(
    Tape<double>&, const ClaimAnnotation&, const std::optional<LabelSet>&,
    const ModelParams<double>&, Rng*);
template class Optimizer<float>;
template class Optimizer<double>;
template TrainResult<float> train<float>(const TrainConfig&,
                                         const DatasetSplit&, const Vocab&,
                                         const LinetModels&, std::ostream*);
template TrainResult<double> train<double>(const TrainConfig&,
                                           const DatasetSplit&, const Vocab&,
                                           const LinetModels&, std::ostream*);
template InferenceResult<float> infer<float>(const ClaimAnnotation&,
                                             const ModelParams<float>&,
                                             double);
template InferenceResult<double> infer<double>(const ClaimAnnotation&,
                                               const ModelParams<double>&,
                                               double);
template EvalReport evaluate<float>(const ModelParams<float>&,
                                    const std::vector<ClaimRecord>&,
                                    const Vocab&, const LinetModels&, double);
template EvalReport evaluate<double>(const ModelParams<double>&,
                                     const std::vector<ClaimRecord>&,
                                     const Vocab&, const LinetModels&, double);

}  // namespace checkmate
