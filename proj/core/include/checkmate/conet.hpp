#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "checkmate/dataset.hpp"
#include "checkmate/tensor.hpp"

namespace checkmate {

class Rng;

// Reserved vocabulary block. PAD must stay at id 0.
inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kUserToken = "[USER]";
inline constexpr const char* kUrlToken = "[URL]";
inline constexpr const char* kEmojiToken = "[EMOJI]";

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kUserId = 3;
inline constexpr int kUrlId = 4;
inline constexpr int kEmojiId = 5;
inline constexpr std::size_t kNumSpecials = 6;

// Lowercases, folds mentions to [USER] and URLs to [URL], splits hashtags
// into '#' + word, keeps emoticons and emoji atomic, and otherwise splits
// on whitespace and punctuation.
std::vector<std::string> tokenize(const std::string& text);

class Vocab {
 public:
  // Specials only.
  Vocab();

  // Tokens seen at least min_freq times, ids in descending frequency
  // (ties lexicographic) after the reserved block.
  static Vocab build(const std::vector<std::vector<std::string>>& corpus,
                     std::size_t min_freq);

  // Unknown tokens fall back to [EMOJI] when they look like an emoticon
  // or contain non-ASCII bytes, else to [UNK].
  int id_of(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token_of(int id) const;
  std::size_t size() const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Vocab load(std::istream& in);
  static Vocab load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, int> to_id_;
  std::vector<std::string> to_token_;

  void add(const std::string& token);
};

struct EncodedClaim {
  std::vector<int> ids;   // length M, [CLS] first, PAD-filled tail
  std::vector<int> mask;  // length M, 1 at real positions including [CLS]
  std::size_t token_count = 0;  // real tokens kept (excludes [CLS])
};

EncodedClaim encode(const std::vector<std::string>& tokens, const Vocab& vocab,
                    std::size_t max_len);

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t d_model = 64;
  std::size_t ff_width = 128;
  std::size_t max_len = 48;
  // One attention head per auxiliary label; any other count is rejected.
  std::size_t heads = 6;
  double dropout = 0.1;

  std::size_t head_dim() const;
  void validate() const;
};

template <class T>
struct EncoderLayerParams {
  std::array<Tensor<T>, 6> wq, wk, wv;  // each d x head_dim
  Tensor<T> wo;                         // (6 * head_dim) x d
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor<T> ln2_gain, ln2_bias;
};

template <class T>
struct ConetParams {
  EncoderConfig config;
  Tensor<T> token_embedding;     // vocab x d, learned
  Tensor<T> position_embedding;  // M x d, fixed sinusoidal
  std::vector<EncoderLayerParams<T>> layers;
  // Per-label supervision heads over the attention context vectors.
  std::array<Tensor<T>, 6> attn_w;  // d x 1
  std::array<Tensor<T>, 6> attn_b;  // 1 x 1

  static ConetParams init(const EncoderConfig& config, std::size_t vocab_size,
                          Rng& rng);
  // Learnable tensors in a fixed order; the position table is excluded.
  std::vector<std::pair<std::string, Tensor<T>>> named_params() const;
};

template <class T>
struct EncoderOutput {
  Tensor<T> hidden;                     // M x d
  std::array<Tensor<T>, 6> attention;   // final layer, one M x M per head
};

// Pass dropout_rng to enable dropout (training); null runs inference.
template <class T>
EncoderOutput<T> encoder_forward(Tape<T>& tape, const EncodedClaim& enc,
                                 const ConetParams<T>& params,
                                 Rng* dropout_rng = nullptr);

// Mean of the unmasked query rows, renormalized over unmasked keys.
template <class T>
Tensor<T> label_attention_pool(Tape<T>& tape, const Tensor<T>& attention,
                               const std::vector<int>& mask);

// How the six per-label losses combine. Mean keeps the term on the same
// scale regardless of label count; sum is available for ablations.
enum class AttentionLossReduction { mean, sum };

template <class T>
struct AttentionSupervision {
  Tensor<T> loss;                    // scalar; exactly 0 when unsupervised
  std::array<Tensor<T>, 6> contexts; // 1 x d attention-weighted summaries
  std::array<Tensor<T>, 6> probs;    // 1 x 1 per-label predictions
};

// Per label l: context = alpha_l * hidden, prob = sigmoid(w_l . context
// + b_l), loss = mean over labels of BCE against the gold labels. A
// record without gold labels contributes zero loss and no gradient.
template <class T>
AttentionSupervision<T> attention_supervision_loss(
    Tape<T>& tape, const Tensor<T>& hidden,
    const std::array<Tensor<T>, 6>& alphas, const std::optional<LabelSet>& gold,
    const ConetParams<T>& params,
    AttentionLossReduction reduction = AttentionLossReduction::mean);

extern template struct ConetParams<float>;
extern template struct ConetParams<double>;
extern template EncoderOutput<float> encoder_forward<float>(
    Tape<float>&, const EncodedClaim&, const ConetParams<float>&, Rng*);
extern template EncoderOutput<double> encoder_forward<double>(
    Tape<double>&, const EncodedClaim&, const ConetParams<double>&, Rng*);
extern template Tensor<float> label_attention_pool<float>(
    Tape<float>&, const Tensor<float>&, const std::vector<int>&);
extern template Tensor<double> label_attention_pool<double>(
    Tape<double>&, const Tensor<double>&, const std::vector<int>&);
extern template AttentionSupervision<float> attention_supervision_loss<float>(
    Tape<float>&, const Tensor<float>&, const std::array<Tensor<float>, 6>&,
    const std::optional<LabelSet>&, const ConetParams<float>&,
    AttentionLossReduction);
extern template AttentionSupervision<double> attention_supervision_loss<double>(
    Tape<double>&, const Tensor<double>&, const std::array<Tensor<double>, 6>&,
    const std::optional<LabelSet>&, const ConetParams<double>&,
    AttentionLossReduction);

}  // namespace checkmate
