#include "checkmate/baselines.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "checkmate/error.hpp"
#include "checkmate/rng.hpp"

namespace checkmate {

namespace {

void check_binary(const std::vector<int>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ValueError("label at index " + std::to_string(i) + " is " +
                       std::to_string(labels[i]) + ", expected 0 or 1");
    }
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double clamped_log(double p) {
  constexpr double kFloor = 1e-12;
  return std::log(p < kFloor ? kFloor : p);
}

}  // namespace

std::uint64_t token_hash(const std::string& token) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<double> hashed_embedding(const std::string& token,
                                     std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("hashed_embedding: dimension must be >= 1");
  Rng rng(Rng::mix(seed, token_hash(token)));
  std::vector<double> row(dim);
  for (auto& v : row) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return row;
}

std::vector<double> mean_embedding_features(const std::string& text,
                                            std::size_t dim,
                                            std::uint64_t seed) {
  if (dim == 0) {
    throw ConfigError("mean_embedding_features: dimension must be >= 1");
  }
  std::vector<std::string> tokens = tokenize(text);
  std::vector<double> mean(dim, 0.0);
  if (tokens.empty()) return mean;
  for (const auto& tok : tokens) {
    std::vector<double> row = hashed_embedding(tok, dim, seed);
    for (std::size_t i = 0; i < dim; ++i) mean[i] += row[i];
  }
  for (auto& v : mean) v /= static_cast<double>(tokens.size());
  return mean;
}

std::vector<int> count_features(const std::string& text, const Vocab& vocab) {
  std::vector<int> counts(vocab.size(), 0);
  for (const auto& tok : tokenize(text)) {
    counts[static_cast<std::size_t>(vocab.id_of(tok))] += 1;
  }
  return counts;
}

void LogRegConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) {
    throw ConfigError("l2 penalty must be non-negative and finite");
  }
}

LinearModel LinearModel::train(const std::vector<std::vector<double>>& features,
                               const std::vector<int>& labels,
                               const LogRegConfig& config,
                               std::vector<double>* loss_curve) {
  config.validate();
  if (features.empty()) throw ValueError("train: no samples");
  if (features.size() != labels.size()) {
    throw ShapeError("train: " + std::to_string(features.size()) +
                     " feature rows vs " + std::to_string(labels.size()) +
                     " labels");
  }
  std::size_t dim = features[0].size();
  if (dim == 0) throw ValueError("train: zero-width feature rows");
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != dim) {
      throw ShapeError("train: row " + std::to_string(i) + " has width " +
                       std::to_string(features[i].size()) + ", expected " +
                       std::to_string(dim));
    }
  }
  check_binary(labels);

  std::size_t n = features.size();
  double inv_n = 1.0 / static_cast<double>(n);
  LinearModel model;
  model.w_.assign(dim, 0.0);
  if (loss_curve != nullptr) {
    loss_curve->clear();
    loss_curve->reserve(config.epochs);
  }

  std::vector<double> grad(dim);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double p = model.score(features[i]);
      double delta = p - static_cast<double>(labels[i]);
      for (std::size_t j = 0; j < dim; ++j) grad[j] += delta * features[i][j];
      grad_b += delta;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      model.w_[j] -= config.lr * (grad[j] * inv_n + config.l2 * model.w_[j]);
    }
    model.b_ -= config.lr * grad_b * inv_n;

    if (loss_curve != nullptr) {
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double p = model.score(features[i]);
        loss -= labels[i] == 1 ? clamped_log(p) : clamped_log(1.0 - p);
      }
      loss *= inv_n;
      double sq = 0.0;
      for (double w : model.w_) sq += w * w;
      loss_curve->push_back(loss + 0.5 * config.l2 * sq);
    }
  }
  return model;
}

double LinearModel::score(const std::vector<double>& x) const {
  if (x.size() != w_.size()) {
    throw ShapeError("score: input width " + std::to_string(x.size()) +
                     ", model width " + std::to_string(w_.size()));
  }
  double z = b_;
  for (std::size_t j = 0; j < x.size(); ++j) z += w_[j] * x[j];
  return sigmoid(z);
}

int LinearModel::predict(const std::vector<double>& x) const {
  return score(x) >= 0.5 ? 1 : 0;
}

NBModel NBModel::train(const std::vector<std::vector<int>>& counts,
                       const std::vector<int>& labels, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("smoothing alpha must be positive and finite");
  }
  if (counts.empty()) throw ValueError("train: no documents");
  if (counts.size() != labels.size()) {
    throw ShapeError("train: " + std::to_string(counts.size()) +
                     " documents vs " + std::to_string(labels.size()) +
                     " labels");
  }
  std::size_t vocab = counts[0].size();
  if (vocab == 0) throw ValueError("train: zero-width count vectors");
  check_binary(labels);

  std::array<long, 2> docs{};
  std::array<std::vector<long>, 2> term{};
  term[0].assign(vocab, 0);
  term[1].assign(vocab, 0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != vocab) {
      throw ShapeError("train: document " + std::to_string(i) +
                       " has width " + std::to_string(counts[i].size()) +
                       ", expected " + std::to_string(vocab));
    }
    int cls = labels[i];
    docs[cls] += 1;
    for (std::size_t t = 0; t < vocab; ++t) {
      if (counts[i][t] < 0) {
        throw ValueError("train: negative count in document " +
                         std::to_string(i));
      }
      term[cls][t] += counts[i][t];
    }
  }

  NBModel model;
  double n = static_cast<double>(counts.size());
  for (int c = 0; c < 2; ++c) {
    // A class with no documents keeps a -inf prior and never wins.
    model.log_prior_[c] = std::log(static_cast<double>(docs[c]) / n);
    long total = 0;
    for (long v : term[c]) total += v;
    double denom = static_cast<double>(total) +
                   alpha * static_cast<double>(vocab);
    model.log_lik_[c].resize(vocab);
    for (std::size_t t = 0; t < vocab; ++t) {
      model.log_lik_[c][t] =
          std::log((static_cast<double>(term[c][t]) + alpha) / denom);
    }
  }
  return model;
}

std::array<double, 2> NBModel::log_scores(const std::vector<int>& counts) const {
  if (counts.size() != log_lik_[0].size()) {
    throw ShapeError("log_scores: input width " +
                     std::to_string(counts.size()) + ", model width " +
                     std::to_string(log_lik_[0].size()));
  }
  std::array<double, 2> scores{};
  for (int c = 0; c < 2; ++c) {
    double s = log_prior_[c];
    for (std::size_t t = 0; t < counts.size(); ++t) {
      if (counts[t] < 0) {
        throw ValueError("log_scores: negative count at index " +
                         std::to_string(t));
      }
      s += static_cast<double>(counts[t]) * log_lik_[c][t];
    }
    scores[c] = s;
  }
  return scores;
}

int NBModel::predict(const std::vector<int>& counts) const {
  std::array<double, 2> s = log_scores(counts);
  return s[1] > s[0] ? 1 : 0;
}

}  // namespace checkmate
