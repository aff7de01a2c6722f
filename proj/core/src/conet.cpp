#include "checkmate/conet.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "checkmate/emoticon_table.hpp"
#include "checkmate/error.hpp"
#include "checkmate/rng.hpp"

namespace checkmate {

namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

bool is_ascii(char c) { return static_cast<unsigned char>(c) < 0x80; }

bool looks_like_emoticon(const std::string& token) {
  for (char c : token) {
    if (!is_ascii(c)) return true;
  }
  for (const auto& entry : builtin_emoticon_table()) {
    if (token == entry.pattern) return true;
  }
  return false;
}

const std::array<std::string, kNumSpecials>& special_tokens() {
  static const std::array<std::string, kNumSpecials> specials{
      kPadToken, kUnkToken, kClsToken, kUserToken, kUrlToken, kEmojiToken};
  return specials;
}

bool is_special_token(const std::string& token) {
  const auto& specials = special_tokens();
  return std::find(specials.begin(), specials.end(), token) != specials.end();
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::string lower = text;
  for (char& c : lower) {
    if (is_ascii(c)) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = lower.size();
  while (i < n) {
    const char c = lower[i];
    if (is_ascii(c) && is_space(c)) {
      ++i;
      continue;
    }
    if (lower.compare(i, 7, "http://") == 0 ||
        lower.compare(i, 8, "https://") == 0) {
      while (i < n && !(is_ascii(lower[i]) && is_space(lower[i]))) ++i;
      tokens.push_back(kUrlToken);
      continue;
    }
    if (c == '@' && i + 1 < n && (is_alnum(lower[i + 1]) || lower[i + 1] == '_')) {
      ++i;
      while (i < n && (is_alnum(lower[i]) || lower[i] == '_')) ++i;
      tokens.push_back(kUserToken);
      continue;
    }
    if (const std::size_t len = match_emoticon(lower, i); len > 0) {
      tokens.push_back(lower.substr(i, len));
      i += len;
      continue;
    }
    if (!is_ascii(c)) {
      std::size_t j = i;
      while (j < n && !is_ascii(lower[j])) ++j;
      tokens.push_back(lower.substr(i, j - i));
      i = j;
      continue;
    }
    if (is_alnum(c)) {
      std::size_t j = i;
      while (j < n && is_alnum(lower[j])) ++j;
      tokens.push_back(lower.substr(i, j - i));
      i = j;
      continue;
    }
    tokens.push_back(std::string(1, c));
    ++i;
  }
  return tokens;
}

Vocab::Vocab() {
  for (const auto& token : special_tokens()) add(token);
}

void Vocab::add(const std::string& token) {
  to_id_.emplace(token, static_cast<int>(to_token_.size()));
  to_token_.push_back(token);
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& corpus,
                   std::size_t min_freq) {
  if (min_freq < 1) throw ValueError("min_freq must be at least 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& tokens : corpus) {
    for (const auto& token : tokens) {
      if (is_special_token(token)) continue;
      ++freq[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, count] : freq) {
    if (count >= min_freq) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab vocab;
  for (const auto& [token, _] : kept) vocab.add(token);
  return vocab;
}

int Vocab::id_of(const std::string& token) const {
  auto it = to_id_.find(token);
  if (it != to_id_.end()) return it->second;
  return looks_like_emoticon(token) ? kEmojiId : kUnkId;
}

bool Vocab::contains(const std::string& token) const {
  return to_id_.count(token) > 0;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= to_token_.size()) {
    throw ValueError("vocabulary id out of range: " + std::to_string(id));
  }
  return to_token_[static_cast<std::size_t>(id)];
}

std::size_t Vocab::size() const { return to_token_.size(); }

void Vocab::save(std::ostream& out) const {
  const auto& specials = special_tokens();
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (i) out << ' ';
    out << specials[i];
  }
  out << '\n';
  for (std::size_t id = kNumSpecials; id < to_token_.size(); ++id) {
    out << to_token_[id] << '\n';
  }
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary: " + path.string());
  save(out);
}

Vocab Vocab::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) {
    throw ParseError("vocabulary file is empty");
  }
  std::ostringstream expected;
  const auto& specials = special_tokens();
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (i) expected << ' ';
    expected << specials[i];
  }
  if (header != expected.str()) {
    throw ParseError("vocabulary header does not list the special tokens");
  }
  Vocab vocab;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (vocab.contains(line)) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": duplicate token \"" + line + "\"");
    }
    vocab.add(line);
  }
  return vocab;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary: " + path.string());
  return load(in);
}

EncodedClaim encode(const std::vector<std::string>& tokens, const Vocab& vocab,
                    std::size_t max_len) {
  if (max_len < 2) throw ValueError("max_len must be at least 2");
  EncodedClaim enc;
  enc.ids.assign(max_len, kPadId);
  enc.mask.assign(max_len, 0);
  enc.ids[0] = kClsId;
  enc.mask[0] = 1;
  enc.token_count = std::min(tokens.size(), max_len - 1);
  for (std::size_t i = 0; i < enc.token_count; ++i) {
    enc.ids[i + 1] = vocab.id_of(tokens[i]);
    enc.mask[i + 1] = 1;
  }
  return enc;
}

std::size_t EncoderConfig::head_dim() const {
  return std::max<std::size_t>(1, d_model / heads);
}

void EncoderConfig::validate() const {
  if (heads != 6) {
    throw ConfigError(
        "encoder requires exactly 6 attention heads (one per auxiliary "
        "label), got " +
        std::to_string(heads));
  }
  if (layers < 1) throw ConfigError("encoder needs at least one layer");
  if (d_model < 2) throw ConfigError("d_model must be at least 2");
  if (ff_width < 1) throw ConfigError("ff_width must be at least 1");
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
}

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

template <class T>
Tensor<T> sinusoidal_positions(std::size_t max_len, std::size_t d) {
  auto t = Tensor<T>::zeros({max_len, d}, false);
  auto v = t.values();
  for (std::size_t p = 0; p < max_len; ++p) {
    for (std::size_t j = 0; j < d; ++j) {
      const double pair = static_cast<double>(j / 2);
      const double angle =
          static_cast<double>(p) /
          std::pow(10000.0, 2.0 * pair / static_cast<double>(d));
      v[p * d + j] =
          static_cast<T>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return t;
}

}  // namespace

template <class T>
ConetParams<T> ConetParams<T>::init(const EncoderConfig& config,
                                    std::size_t vocab_size, Rng& rng) {
  config.validate();
  if (vocab_size < kNumSpecials) {
    throw ConfigError("vocabulary smaller than the reserved block");
  }
  ConetParams<T> params;
  params.config = config;
  const std::size_t d = config.d_model;
  const std::size_t hd = config.head_dim();

  params.token_embedding = Tensor<T>::zeros({vocab_size, d}, true);
  const double embed_bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& v : params.token_embedding.values()) {
    v = static_cast<T>(rng.uniform(-embed_bound, embed_bound));
  }
  params.position_embedding = sinusoidal_positions<T>(config.max_len, d);

  params.layers.resize(config.layers);
  for (auto& layer : params.layers) {
    for (std::size_t h = 0; h < 6; ++h) {
      layer.wq[h] = xavier<T>({d, hd}, rng);
      layer.wk[h] = xavier<T>({d, hd}, rng);
      layer.wv[h] = xavier<T>({d, hd}, rng);
    }
    layer.wo = xavier<T>({6 * hd, d}, rng);
    layer.ln1_gain = Tensor<T>::full({d}, T(1), true);
    layer.ln1_bias = Tensor<T>::zeros({d}, true);
    layer.ff_w1 = xavier<T>({d, config.ff_width}, rng);
    layer.ff_b1 = Tensor<T>::zeros({config.ff_width}, true);
    layer.ff_w2 = xavier<T>({config.ff_width, d}, rng);
    layer.ff_b2 = Tensor<T>::zeros({d}, true);
    layer.ln2_gain = Tensor<T>::full({d}, T(1), true);
    layer.ln2_bias = Tensor<T>::zeros({d}, true);
  }
  for (std::size_t l = 0; l < 6; ++l) {
    params.attn_w[l] = xavier<T>({d, 1}, rng);
    params.attn_b[l] = Tensor<T>::zeros({1, 1}, true);
  }
  return params;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> ConetParams<T>::named_params()
    const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.emplace_back("embed.token", token_embedding);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "enc" + std::to_string(i) + ".";
    const auto& layer = layers[i];
    for (std::size_t h = 0; h < 6; ++h) {
      const std::string head = prefix + "h" + std::to_string(h) + ".";
      out.emplace_back(head + "wq", layer.wq[h]);
      out.emplace_back(head + "wk", layer.wk[h]);
      out.emplace_back(head + "wv", layer.wv[h]);
    }
    out.emplace_back(prefix + "wo", layer.wo);
    out.emplace_back(prefix + "ln1.gain", layer.ln1_gain);
    out.emplace_back(prefix + "ln1.bias", layer.ln1_bias);
    out.emplace_back(prefix + "ffn.w1", layer.ff_w1);
    out.emplace_back(prefix + "ffn.b1", layer.ff_b1);
    out.emplace_back(prefix + "ffn.w2", layer.ff_w2);
    out.emplace_back(prefix + "ffn.b2", layer.ff_b2);
    out.emplace_back(prefix + "ln2.gain", layer.ln2_gain);
    out.emplace_back(prefix + "ln2.bias", layer.ln2_bias);
  }
  for (std::size_t l = 0; l < 6; ++l) {
    const std::string prefix = "attn" + std::to_string(l) + ".";
    out.emplace_back(prefix + "w", attn_w[l]);
    out.emplace_back(prefix + "b", attn_b[l]);
  }
  return out;
}

template <class T>
EncoderOutput<T> encoder_forward(Tape<T>& tape, const EncodedClaim& enc,
                                 const ConetParams<T>& params,
                                 Rng* dropout_rng) {
  const EncoderConfig& config = params.config;
  config.validate();
  if (enc.ids.size() != config.max_len || enc.mask.size() != config.max_len) {
    throw ShapeError("encoded claim length " + std::to_string(enc.ids.size()) +
                     " does not match configured max_len " +
                     std::to_string(config.max_len));
  }
  const std::size_t hd = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const bool training = dropout_rng != nullptr && config.dropout > 0.0;

  auto maybe_dropout = [&](Tensor<T> x) {
    return training ? tape.dropout(x, config.dropout, *dropout_rng) : x;
  };

  Tensor<T> x = tape.gather_rows(params.token_embedding, enc.ids);
  x = tape.add(x, params.position_embedding);
  x = maybe_dropout(x);

  EncoderOutput<T> out;
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const auto& layer = params.layers[li];
    std::array<Tensor<T>, 6> heads;
    std::vector<Tensor<T>> contexts(6);
    for (std::size_t h = 0; h < 6; ++h) {
      Tensor<T> q = tape.matmul(x, layer.wq[h]);
      Tensor<T> k = tape.matmul(x, layer.wk[h]);
      Tensor<T> v = tape.matmul(x, layer.wv[h]);
      Tensor<T> scores = tape.scale(tape.matmul_nt(q, k), static_cast<T>(scale));
      heads[h] = tape.masked_softmax(scores, enc.mask);
      contexts[h] = tape.matmul(heads[h], v);
    }
    Tensor<T> attn = tape.matmul(tape.concat_cols(contexts), layer.wo);
    attn = maybe_dropout(attn);
    x = tape.layer_norm(tape.add(x, attn), layer.ln1_gain, layer.ln1_bias);
    Tensor<T> ff = tape.relu(tape.add_bias(tape.matmul(x, layer.ff_w1),
                                           layer.ff_b1));
    ff = tape.add_bias(tape.matmul(ff, layer.ff_w2), layer.ff_b2);
    ff = maybe_dropout(ff);
    x = tape.layer_norm(tape.add(x, ff), layer.ln2_gain, layer.ln2_bias);
    if (li + 1 == params.layers.size()) out.attention = heads;
  }
  out.hidden = x;
  return out;
}

template <class T>
Tensor<T> label_attention_pool(Tape<T>& tape, const Tensor<T>& attention,
                               const std::vector<int>& mask) {
  const std::size_t m = attention.rows();
  if (attention.cols() != m || mask.size() != m) {
    throw ShapeError("attention must be square and match the mask, got " +
                     shape_str(attention.shape()));
  }
  std::size_t unmasked = 0;
  for (int b : mask) unmasked += static_cast<std::size_t>(b != 0);
  if (unmasked == 0) {
    throw NumericalError("label_attention_pool: every position is masked");
  }
  // Row of query weights: 1/k at unmasked queries. matmul with it is the
  // mean over unmasked query rows.
  auto weights = Tensor<T>::zeros({1, m}, false);
  const T w = T(1) / static_cast<T>(unmasked);
  for (std::size_t j = 0; j < m; ++j) {
    if (mask[j]) weights.values()[j] = w;
  }
  Tensor<T> raw = tape.matmul(weights, attention);
  return tape.masked_softmax(raw, mask);
}

template <class T>
AttentionSupervision<T> attention_supervision_loss(
    Tape<T>& tape, const Tensor<T>& hidden,
    const std::array<Tensor<T>, 6>& alphas, const std::optional<LabelSet>& gold,
    const ConetParams<T>& params, AttentionLossReduction reduction) {
  AttentionSupervision<T> out;
  std::vector<Tensor<T>> losses;
  for (std::size_t l = 0; l < 6; ++l) {
    out.contexts[l] = tape.matmul(alphas[l], hidden);
    Tensor<T> logit = tape.add(tape.matmul(out.contexts[l], params.attn_w[l]),
                               params.attn_b[l]);
    out.probs[l] = tape.sigmoid(logit);
    if (gold) {
      losses.push_back(
          tape.bce(out.probs[l], {static_cast<T>((*gold)[l])}));
    }
  }
  if (gold) {
    Tensor<T> stacked = tape.concat_cols(losses);
    out.loss = reduction == AttentionLossReduction::mean ? tape.mean(stacked)
                                                         : tape.sum(stacked);
  } else {
    out.loss = Tensor<T>::scalar(T(0), false);
  }
  return out;
}

template struct ConetParams<float>;
template struct ConetParams<double>;
template EncoderOutput<float> encoder_forward<float>(Tape<float>&,
                                                     const EncodedClaim&,
                                                     const ConetParams<float>&,
                                                     Rng*);
template EncoderOutput<double> encoder_forward<double>(
    Tape<double>&, const EncodedClaim&, const ConetParams<double>&, Rng*);
template Tensor<float> label_attention_pool<float>(Tape<float>&,
                                                   const Tensor<float>&,
                                                   const std::vector<int>&);
template Tensor<double> label_attention_pool<double>(Tape<double>&,
                                                     const Tensor<double>&,
                                                     const std::vector<int>&);
template AttentionSupervision<float> attention_supervision_loss<float>(
    Tape<float>&, const Tensor<float>&, const std::array<Tensor<float>, 6>&,
    const std::optional<LabelSet>&, const ConetParams<float>&,
    AttentionLossReduction);
template AttentionSupervision<double> attention_supervision_loss<double>(
    Tape<double>&, const Tensor<double>&, const std::array<Tensor<double>, 6>&,
    const std::optional<LabelSet>&, const ConetParams<double>&,
    AttentionLossReduction);

}  // namespace checkmate
