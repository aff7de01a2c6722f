#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "checkmate/conet.hpp"

namespace checkmate {

// FNV-1a over the token bytes; the per-token feature hash.
std::uint64_t token_hash(const std::string& token);

// Deterministic +/-1 projection row for one token, derived from the
// token hash mixed with the seed.
std::vector<double> hashed_embedding(const std::string& token,
                                     std::size_t dim, std::uint64_t seed);

// Mean of the hashed rows over tokenize(text); zero vector when the
// text has no tokens.
std::vector<double> mean_embedding_features(const std::string& text,
                                            std::size_t dim = 64,
                                            std::uint64_t seed = 13);

// Vocab-sized term counts over tokenize(text); unknown tokens land on
// the fallback ids the vocab assigns them.
std::vector<int> count_features(const std::string& text, const Vocab& vocab);

struct LogRegConfig {
  double lr = 0.1;
  std::size_t epochs = 500;
  double l2 = 0.0;

  // ConfigError unless lr > 0, epochs >= 1, l2 >= 0 and all finite.
  void validate() const;
};

// Binary logistic regression fit by full-batch gradient descent from a
// zero start; the bias is not regularized. Deterministic.
class LinearModel {
 public:
  // ShapeError on length/width mismatch, ValueError on empty data or
  // labels outside {0, 1}. When loss_curve is given it receives the
  // post-epoch regularized mean log loss, one entry per epoch.
  static LinearModel train(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels,
                           const LogRegConfig& config,
                           std::vector<double>* loss_curve = nullptr);

  double score(const std::vector<double>& x) const;  // P(y = 1 | x)
  int predict(const std::vector<double>& x) const;   // score >= 0.5 -> 1

  const std::vector<double>& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  std::vector<double> w_;
  double b_ = 0.0;
};

// Multinomial naive Bayes over two classes with Laplace smoothing.
class NBModel {
 public:
  // alpha <= 0 or non-finite -> ConfigError; shape and label-domain
  // violations as in LinearModel::train. Counts must be non-negative.
  static NBModel train(const std::vector<std::vector<int>>& counts,
                       const std::vector<int>& labels, double alpha = 1.0);

  // Joint log score per class: log prior + sum_t x_t * log p(t | c).
  std::array<double, 2> log_scores(const std::vector<int>& counts) const;
  // Argmax of log_scores; exact ties go to the lower class index.
  int predict(const std::vector<int>& counts) const;

 private:
  std::array<double, 2> log_prior_{};
  std::array<std::vector<double>, 2> log_lik_{};
};

}  // namespace checkmate
