#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "checkmate/emoticon_table.hpp"
#include "checkmate/tensor.hpp"

namespace checkmate {

class Rng;

// Universal POS inventory, ids in this order. The artificial root gets a
// dedicated tag id used only for head-POS lookups; pos_tag_id never
// returns it and taggers never emit it.
inline constexpr std::size_t kNumPosTags = 17;
inline constexpr int kRootPosId = 17;

// ValueError on a name outside the inventory ("ROOT" included).
int pos_tag_id(const std::string& name);
// Valid for 0..17; 17 names the artificial root.
const std::string& pos_tag_name(int id);

// Dependency relation inventory. "root" is reserved for attachment to
// the artificial root and is rejected anywhere else.
inline constexpr std::size_t kNumRelations = 16;
inline constexpr int kRootRelation = 14;

int relation_id(const std::string& name);
const std::string& relation_name(int id);

// Entry t describes token t+1 (tokens are 1-based in head values, 0 is
// the artificial root).
struct DependencyTree {
  std::vector<int> heads;
  std::vector<int> rels;

  std::size_t size() const { return heads.size(); }
  bool operator==(const DependencyTree&) const = default;
};

// Head ranges, exactly one root arc, acyclicity, and the root-relation
// reservation. ValueError on violation.
void validate_tree(const DependencyTree& tree);
bool is_projective(const DependencyTree& tree);

enum class TransitionKind { shift, left_arc, right_arc };

struct Transition {
  TransitionKind kind = TransitionKind::shift;
  int rel = -1;  // relation id for arc transitions, -1 for shift

  bool operator==(const Transition&) const = default;
};

// Arc-standard configuration. The stack holds token indices with the
// artificial root (0) at the bottom; the buffer feeds 1..n in order.
// LEFT-ARC attaches the second stack item to the top, RIGHT-ARC the top
// to the second; the root arc is only legal as the final transition,
// which forces a single root.
class ParserState {
 public:
  explicit ParserState(std::size_t n);

  bool terminal() const;
  bool legal(const Transition& t) const;
  // ValueError on an illegal transition.
  void apply(const Transition& t);

  std::size_t size() const { return n_; }
  const std::vector<int>& stack() const { return stack_; }
  // Next unshifted token, n+1 once the buffer is empty.
  int next_buffer() const { return next_; }
  std::size_t buffer_size() const;
  // Leftmost / rightmost dependent attached to t so far, 0 if none.
  int leftmost_child(int t) const;
  int rightmost_child(int t) const;

  // Requires terminal(); ValueError otherwise.
  DependencyTree tree() const;

 private:
  std::size_t n_ = 0;
  std::vector<int> stack_;
  int next_ = 1;
  std::vector<int> heads_, rels_;
  std::vector<int> left_child_, right_child_;
};

// Static oracle: the transition sequence (length exactly 2n) that
// rebuilds `gold` when replayed. ProjectivityError when no such
// arc-standard sequence exists.
std::vector<Transition> oracle_transitions(const DependencyTree& gold);

// Runs a sequence from the initial state for n tokens; ValueError if a
// step is illegal or the final state is not terminal.
DependencyTree replay_transitions(std::size_t n,
                                  const std::vector<Transition>& seq);

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<int> tags;

  bool operator==(const TaggedSentence&) const = default;
};

// Averaged perceptron over contextual features (word, prefixes/suffixes
// up to 3, neighbors, previous predicted tag, shape), greedy
// left-to-right decoding. Deterministic in training data order.
class PosTagger {
 public:
  static PosTagger train(const std::vector<TaggedSentence>& data,
                         std::size_t epochs);

  std::vector<int> tag(const std::vector<std::string>& tokens) const;

  void save(std::ostream& out) const;
  static PosTagger load(std::istream& in);

 private:
  std::unordered_map<std::string, std::array<double, kNumPosTags>> weights_;

  int predict(const std::vector<std::string>& feats) const;
  static std::vector<std::string> features(
      const std::vector<std::string>& tokens, std::size_t i, int prev_tag);
};

struct TreebankEntry {
  std::vector<std::string> tokens;
  std::vector<int> tags;
  DependencyTree tree;
};

// Greedy arc-standard parser with an averaged-perceptron transition
// scorer; illegal transitions are masked, so decoding always terminates
// in exactly 2n transitions with a well-formed projective tree.
class DependencyParser {
 public:
  static constexpr std::size_t kNumActions = 1 + 2 * kNumRelations;

  static DependencyParser train(const std::vector<TreebankEntry>& data,
                                std::size_t epochs);

  DependencyTree parse(const std::vector<std::string>& tokens,
                       const std::vector<int>& tags) const;

  void save(std::ostream& out) const;
  static DependencyParser load(std::istream& in);

 private:
  std::unordered_map<std::string, std::array<double, kNumActions>> weights_;

  int predict(const std::vector<std::string>& feats, const ParserState& state)
      const;
  static std::vector<std::string> features(const ParserState& state,
                                           const std::vector<std::string>& tokens,
                                           const std::vector<int>& tags);
};

// Corpus files: tagged sentences are form<TAB>upos lines, treebank
// sentences are index<TAB>form<TAB>upos<TAB>head<TAB>rel lines; a blank
// line ends each sentence.
std::vector<TaggedSentence> load_tagged_corpus(std::istream& in);
std::vector<TaggedSentence> load_tagged_corpus(const std::filesystem::path& p);
std::vector<TreebankEntry> load_treebank(std::istream& in);
std::vector<TreebankEntry> load_treebank(const std::filesystem::path& p);

// Emoticon lexicon file: pattern<TAB>bucket per line.
std::vector<std::pair<std::string, EmoticonBucket>> load_emoticon_lexicon(
    std::istream& in);
std::vector<std::pair<std::string, EmoticonBucket>> load_emoticon_lexicon(
    const std::filesystem::path& p);

// Bucketed counts of lexicon matches on the raw text (longest match,
// case-folded, token-boundary on the right), taken before tokenization.
std::array<int, kNumEmoticonBuckets> encode_emoticons(const std::string& text);

struct LinetConfig {
  std::size_t pos_dim = 16;
  std::size_t rel_dim = 16;
  std::size_t head_pos_dim = 16;

  // Pooled width: the three embedding slices plus the emoticon buckets.
  std::size_t feature_dim() const {
    return pos_dim + rel_dim + head_pos_dim + kNumEmoticonBuckets;
  }
  void validate() const;
};

template <class T>
struct LinetParams {
  LinetConfig config;
  Tensor<T> pos_embedding;       // kNumPosTags x pos_dim
  Tensor<T> rel_embedding;       // kNumRelations x rel_dim
  Tensor<T> head_pos_embedding;  // (kNumPosTags + 1) x head_pos_dim

  static LinetParams init(const LinetConfig& config, Rng& rng);
  std::vector<std::pair<std::string, Tensor<T>>> named_params() const;
};

// Mean over tokens of [pos ‖ own relation ‖ head POS] embeddings, with
// the emoticon counts divided by token count appended. Empty input
// yields the zero vector. 1 x feature_dim.
template <class T>
Tensor<T> linguistic_features(
    Tape<T>& tape, const std::vector<int>& tags, const DependencyTree& tree,
    const std::array<int, kNumEmoticonBuckets>& emoticon_counts,
    const LinetParams<T>& params);

extern template struct LinetParams<float>;
extern template struct LinetParams<double>;
extern template Tensor<float> linguistic_features<float>(
    Tape<float>&, const std::vector<int>&, const DependencyTree&,
    const std::array<int, kNumEmoticonBuckets>&, const LinetParams<float>&);
extern template Tensor<double> linguistic_features<double>(
    Tape<double>&, const std::vector<int>&, const DependencyTree&,
    const std::array<int, kNumEmoticonBuckets>&, const LinetParams<double>&);

}  // namespace checkmate
