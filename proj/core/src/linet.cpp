#include "checkmate/linet.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "checkmate/error.hpp"
#include "checkmate/rng.hpp"

namespace checkmate {

namespace {

const std::array<std::string, kNumPosTags + 1>& pos_tag_table() {
  static const std::array<std::string, kNumPosTags + 1> tags{
      "ADJ",  "ADP",  "ADV",   "AUX",   "CCONJ", "DET",
      "INTJ", "NOUN", "NUM",   "PART",  "PRON",  "PROPN",
      "PUNCT", "SCONJ", "SYM", "VERB",  "X",     "ROOT"};
  return tags;
}

const std::array<std::string, kNumRelations>& relation_table() {
  static const std::array<std::string, kNumRelations> rels{
      "nsubj", "obj",  "obl",  "nmod", "amod", "advmod", "det",  "case",
      "mark",  "cc",   "conj", "aux",  "cop",  "punct",  "root", "dep"};
  return rels;
}

int parse_int_field(const std::string& field, std::size_t lineno,
                    const char* what) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(lineno) + ": " + what +
                     " is not an integer: \"" + field + "\"");
  }
  return value;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Timestamped averaged-perceptron weights over N classes. `step` counts
// every decoding decision; totals integrate the weight trajectory so the
// average needs no per-step sweep.
template <std::size_t N>
class AveragedWeights {
 public:
  void begin_step() { ++step_; }

  double score(const std::string& feat, std::size_t cls) const {
    const auto it = cells_.find(feat);
    return it == cells_.end() ? 0.0 : it->second.w[cls];
  }

  void score_all(const std::vector<std::string>& feats,
                 std::array<double, N>& out) const {
    out.fill(0.0);
    for (const auto& feat : feats) {
      const auto it = cells_.find(feat);
      if (it == cells_.end()) continue;
      for (std::size_t c = 0; c < N; ++c) out[c] += it->second.w[c];
    }
  }

  void update(const std::vector<std::string>& feats, std::size_t up,
              std::size_t down) {
    for (const auto& feat : feats) {
      Cell& cell = cells_[feat];
      tick(cell, up);
      tick(cell, down);
      cell.w[up] += 1.0;
      cell.w[down] -= 1.0;
    }
  }

  std::unordered_map<std::string, std::array<double, N>> averaged() const {
    std::unordered_map<std::string, std::array<double, N>> out;
    if (step_ == 0) return out;
    out.reserve(cells_.size());
    for (const auto& [feat, cell] : cells_) {
      std::array<double, N> avg{};
      for (std::size_t c = 0; c < N; ++c) {
        const double total =
            cell.total[c] + cell.w[c] * static_cast<double>(step_ - cell.last[c]);
        avg[c] = total / static_cast<double>(step_);
      }
      out.emplace(feat, avg);
    }
    return out;
  }

 private:
  struct Cell {
    std::array<double, N> w{};
    std::array<double, N> total{};
    std::array<long, N> last{};
  };

  void tick(Cell& cell, std::size_t cls) {
    cell.total[cls] +=
        cell.w[cls] * static_cast<double>(step_ - cell.last[cls]);
    cell.last[cls] = step_;
  }

  std::unordered_map<std::string, Cell> cells_;
  long step_ = 0;
};

template <std::size_t N>
std::size_t argmax_scores(const std::array<double, N>& scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < N; ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

template <std::size_t N>
void save_weight_table(
    std::ostream& out, const char* header,
    const std::unordered_map<std::string, std::array<double, N>>& weights) {
  out << header << '\n';
  std::vector<std::string> feats;
  feats.reserve(weights.size());
  for (const auto& [feat, _] : weights) feats.push_back(feat);
  std::sort(feats.begin(), feats.end());
  out << std::setprecision(17);
  for (const auto& feat : feats) {
    const auto& row = weights.at(feat);
    for (std::size_t c = 0; c < N; ++c) {
      if (row[c] != 0.0) out << feat << '\t' << c << '\t' << row[c] << '\n';
    }
  }
  out << "end\n";
}

template <std::size_t N>
std::unordered_map<std::string, std::array<double, N>> load_weight_table(
    std::istream& in, const char* header) {
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw ParseError(std::string("expected header \"") + header + "\"");
  }
  std::unordered_map<std::string, std::array<double, N>> weights;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line == "end") return weights;
    const auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty()) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected feature<TAB>class<TAB>weight");
    }
    const int cls = parse_int_field(fields[1], lineno, "class");
    if (cls < 0 || static_cast<std::size_t>(cls) >= N) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": class id out of range: " + fields[1]);
    }
    double w = 0.0;
    const auto [ptr, ec] = std::from_chars(
        fields[2].data(), fields[2].data() + fields[2].size(), w);
    if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size()) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": malformed weight: \"" + fields[2] + "\"");
    }
    weights[fields[0]][static_cast<std::size_t>(cls)] = w;
  }
  throw ParseError("weight table is missing its end marker");
}

std::string word_shape(const std::string& word) {
  std::string shape;
  for (char c : word) {
    if (shape.size() == 12) break;
    const auto u = static_cast<unsigned char>(c);
    shape += std::isalpha(u) ? 'a' : (std::isdigit(u) ? 'd' : 'p');
  }
  return shape;
}

}  // namespace

int pos_tag_id(const std::string& name) {
  const auto& table = pos_tag_table();
  for (std::size_t i = 0; i < kNumPosTags; ++i) {
    if (table[i] == name) return static_cast<int>(i);
  }
  throw ValueError("unknown POS tag: " + name);
}

const std::string& pos_tag_name(int id) {
  if (id < 0 || id > kRootPosId) {
    throw ValueError("POS tag id out of range: " + std::to_string(id));
  }
  return pos_tag_table()[static_cast<std::size_t>(id)];
}

int relation_id(const std::string& name) {
  const auto& table = relation_table();
  for (std::size_t i = 0; i < kNumRelations; ++i) {
    if (table[i] == name) return static_cast<int>(i);
  }
  throw ValueError("unknown dependency relation: " + name);
}

const std::string& relation_name(int id) {
  if (id < 0 || static_cast<std::size_t>(id) >= kNumRelations) {
    throw ValueError("relation id out of range: " + std::to_string(id));
  }
  return relation_table()[static_cast<std::size_t>(id)];
}

void validate_tree(const DependencyTree& tree) {
  const std::size_t n = tree.heads.size();
  if (tree.rels.size() != n) {
    throw ShapeError("tree has " + std::to_string(n) + " heads but " +
                     std::to_string(tree.rels.size()) + " relations");
  }
  if (n == 0) return;
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int h = tree.heads[i];
    const int r = tree.rels[i];
    if (h < 0 || static_cast<std::size_t>(h) > n) {
      throw ValueError("token " + std::to_string(i + 1) +
                       " has head out of range: " + std::to_string(h));
    }
    if (h == static_cast<int>(i + 1)) {
      throw ValueError("token " + std::to_string(i + 1) + " is its own head");
    }
    if (r < 0 || static_cast<std::size_t>(r) >= kNumRelations) {
      throw ValueError("token " + std::to_string(i + 1) +
                       " has relation out of range: " + std::to_string(r));
    }
    if ((h == 0) != (r == kRootRelation)) {
      throw ValueError("token " + std::to_string(i + 1) +
                       ": the root relation is reserved for the root arc");
    }
    roots += static_cast<std::size_t>(h == 0);
  }
  if (roots != 1) {
    throw ValueError("tree must have exactly one root arc, found " +
                     std::to_string(roots));
  }
  for (std::size_t i = 0; i < n; ++i) {
    int cursor = tree.heads[i];
    std::size_t hops = 0;
    while (cursor != 0) {
      if (++hops > n) {
        throw ValueError("tree contains a cycle through token " +
                         std::to_string(i + 1));
      }
      cursor = tree.heads[static_cast<std::size_t>(cursor - 1)];
    }
  }
}

bool is_projective(const DependencyTree& tree) {
  const std::size_t n = tree.size();
  std::vector<std::pair<int, int>> spans;
  spans.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int d = static_cast<int>(i + 1);
    const int h = tree.heads[i];
    spans.emplace_back(std::min(h, d), std::max(h, d));
  }
  for (std::size_t a = 0; a < spans.size(); ++a) {
    for (std::size_t b = a + 1; b < spans.size(); ++b) {
      const auto [a1, a2] = spans[a];
      const auto [b1, b2] = spans[b];
      if ((a1 < b1 && b1 < a2 && a2 < b2) || (b1 < a1 && a1 < b2 && b2 < a2)) {
        return false;
      }
    }
  }
  return true;
}

ParserState::ParserState(std::size_t n)
    : n_(n),
      stack_{0},
      next_(1),
      heads_(n, -1),
      rels_(n, -1),
      left_child_(n + 1, 0),
      right_child_(n + 1, 0) {}

bool ParserState::terminal() const {
  return next_ > static_cast<int>(n_) && stack_.size() == 1;
}

std::size_t ParserState::buffer_size() const {
  return next_ > static_cast<int>(n_) ? 0 : n_ - static_cast<std::size_t>(next_) + 1;
}

bool ParserState::legal(const Transition& t) const {
  switch (t.kind) {
    case TransitionKind::shift:
      return next_ <= static_cast<int>(n_);
    case TransitionKind::left_arc:
      // The second stack item becomes a dependent; it must be a real
      // token, and the root relation stays reserved.
      return stack_.size() >= 3 && t.rel >= 0 &&
             static_cast<std::size_t>(t.rel) < kNumRelations &&
             t.rel != kRootRelation;
    case TransitionKind::right_arc:
      if (stack_.size() < 2 || t.rel < 0 ||
          static_cast<std::size_t>(t.rel) >= kNumRelations) {
        return false;
      }
      if (stack_.size() == 2) {
        // Attaching to the artificial root: only as the very last
        // transition, which is what makes the root unique.
        return next_ > static_cast<int>(n_) && t.rel == kRootRelation;
      }
      return t.rel != kRootRelation;
  }
  return false;
}

void ParserState::apply(const Transition& t) {
  if (!legal(t)) {
    std::ostringstream msg;
    msg << "illegal transition (kind "
        << static_cast<int>(t.kind) << ", rel " << t.rel << ") with stack "
        << stack_.size() << " and buffer " << buffer_size();
    throw ValueError(msg.str());
  }
  switch (t.kind) {
    case TransitionKind::shift:
      stack_.push_back(next_++);
      return;
    case TransitionKind::left_arc: {
      const int dep = stack_[stack_.size() - 2];
      const int head = stack_.back();
      heads_[static_cast<std::size_t>(dep - 1)] = head;
      rels_[static_cast<std::size_t>(dep - 1)] = t.rel;
      auto& leftmost = left_child_[static_cast<std::size_t>(head)];
      leftmost = leftmost == 0 ? dep : std::min(leftmost, dep);
      stack_.erase(stack_.end() - 2);
      return;
    }
    case TransitionKind::right_arc: {
      const int dep = stack_.back();
      const int head = stack_[stack_.size() - 2];
      heads_[static_cast<std::size_t>(dep - 1)] = head;
      rels_[static_cast<std::size_t>(dep - 1)] = t.rel;
      auto& rightmost = right_child_[static_cast<std::size_t>(head)];
      rightmost = std::max(rightmost, dep);
      stack_.pop_back();
      return;
    }
  }
}

int ParserState::leftmost_child(int t) const {
  if (t < 0 || static_cast<std::size_t>(t) > n_) {
    throw ValueError("token index out of range: " + std::to_string(t));
  }
  return left_child_[static_cast<std::size_t>(t)];
}

int ParserState::rightmost_child(int t) const {
  if (t < 0 || static_cast<std::size_t>(t) > n_) {
    throw ValueError("token index out of range: " + std::to_string(t));
  }
  return right_child_[static_cast<std::size_t>(t)];
}

DependencyTree ParserState::tree() const {
  if (!terminal()) {
    throw ValueError("parser state is not terminal");
  }
  return DependencyTree{heads_, rels_};
}

std::vector<Transition> oracle_transitions(const DependencyTree& gold) {
  validate_tree(gold);
  if (!is_projective(gold)) {
    throw ProjectivityError("tree has crossing arcs");
  }
  const std::size_t n = gold.size();
  std::vector<int> remaining(n + 1, 0);
  for (int h : gold.heads) ++remaining[static_cast<std::size_t>(h)];

  ParserState state(n);
  std::vector<Transition> out;
  out.reserve(2 * n);
  while (!state.terminal()) {
    const auto& stack = state.stack();
    Transition t;
    if (stack.size() >= 3) {
      const int s0 = stack.back();
      const int s1 = stack[stack.size() - 2];
      if (gold.heads[static_cast<std::size_t>(s1 - 1)] == s0 &&
          remaining[static_cast<std::size_t>(s1)] == 0) {
        t = {TransitionKind::left_arc, gold.rels[static_cast<std::size_t>(s1 - 1)]};
        --remaining[static_cast<std::size_t>(s0)];
        out.push_back(t);
        state.apply(t);
        continue;
      }
    }
    if (stack.size() >= 2) {
      const int s0 = stack.back();
      const int s1 = stack[stack.size() - 2];
      if (gold.heads[static_cast<std::size_t>(s0 - 1)] == s1 &&
          remaining[static_cast<std::size_t>(s0)] == 0 &&
          state.legal({TransitionKind::right_arc,
                       gold.rels[static_cast<std::size_t>(s0 - 1)]})) {
        t = {TransitionKind::right_arc, gold.rels[static_cast<std::size_t>(s0 - 1)]};
        --remaining[static_cast<std::size_t>(s1)];
        out.push_back(t);
        state.apply(t);
        continue;
      }
    }
    if (state.next_buffer() <= static_cast<int>(n)) {
      t = {TransitionKind::shift, -1};
      out.push_back(t);
      state.apply(t);
      continue;
    }
    throw ProjectivityError("no arc-standard derivation exists");
  }
  return out;
}

DependencyTree replay_transitions(std::size_t n,
                                  const std::vector<Transition>& seq) {
  ParserState state(n);
  for (const auto& t : seq) state.apply(t);
  if (!state.terminal()) {
    throw ValueError("transition sequence does not reach the terminal state");
  }
  return state.tree();
}

std::vector<std::string> PosTagger::features(
    const std::vector<std::string>& tokens, std::size_t i, int prev_tag) {
  const std::string& w = tokens[i];
  std::vector<std::string> feats;
  feats.reserve(14);
  feats.push_back("b");
  feats.push_back("w=" + w);
  for (std::size_t k = 1; k <= 3 && k <= w.size(); ++k) {
    feats.push_back("p" + std::to_string(k) + "=" + w.substr(0, k));
    feats.push_back("s" + std::to_string(k) + "=" + w.substr(w.size() - k));
  }
  feats.push_back("prev=" + (i > 0 ? tokens[i - 1] : std::string("<s>")));
  feats.push_back("next=" +
                  (i + 1 < tokens.size() ? tokens[i + 1] : std::string("</s>")));
  const std::string pt = prev_tag >= 0 ? pos_tag_name(prev_tag) : "<s>";
  feats.push_back("pt=" + pt);
  feats.push_back("pt|w=" + pt + "|" + w);
  feats.push_back("shape=" + word_shape(w));
  return feats;
}

int PosTagger::predict(const std::vector<std::string>& feats) const {
  std::array<double, kNumPosTags> scores{};
  for (const auto& feat : feats) {
    const auto it = weights_.find(feat);
    if (it == weights_.end()) continue;
    for (std::size_t c = 0; c < kNumPosTags; ++c) scores[c] += it->second[c];
  }
  return static_cast<int>(argmax_scores(scores));
}

PosTagger PosTagger::train(const std::vector<TaggedSentence>& data,
                           std::size_t epochs) {
  if (epochs == 0) throw ValueError("tagger training needs at least 1 epoch");
  for (const auto& sentence : data) {
    if (sentence.tokens.size() != sentence.tags.size()) {
      throw ShapeError("sentence has " + std::to_string(sentence.tokens.size()) +
                       " tokens but " + std::to_string(sentence.tags.size()) +
                       " tags");
    }
    for (int tag : sentence.tags) {
      if (tag < 0 || static_cast<std::size_t>(tag) >= kNumPosTags) {
        throw ValueError("tag id outside the inventory: " + std::to_string(tag));
      }
    }
  }

  AveragedWeights<kNumPosTags> aw;
  std::array<double, kNumPosTags> scores{};
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& sentence : data) {
      int prev = -1;
      for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
        const auto feats = features(sentence.tokens, i, prev);
        aw.begin_step();
        aw.score_all(feats, scores);
        const auto pred = argmax_scores(scores);
        const auto gold = static_cast<std::size_t>(sentence.tags[i]);
        if (pred != gold) aw.update(feats, gold, pred);
        // Decoding at inference sees predicted context, so train on it.
        prev = static_cast<int>(pred);
      }
    }
  }
  PosTagger tagger;
  tagger.weights_ = aw.averaged();
  return tagger;
}

std::vector<int> PosTagger::tag(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  int prev = -1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    prev = predict(features(tokens, i, prev));
    out.push_back(prev);
  }
  return out;
}

void PosTagger::save(std::ostream& out) const {
  save_weight_table<kNumPosTags>(out, "postagger 1", weights_);
}

PosTagger PosTagger::load(std::istream& in) {
  PosTagger tagger;
  tagger.weights_ = load_weight_table<kNumPosTags>(in, "postagger 1");
  return tagger;
}

namespace {

// Transition <-> dense action id. Shift is 0, then left arcs by relation,
// then right arcs.
std::size_t action_id(const Transition& t) {
  switch (t.kind) {
    case TransitionKind::shift:
      return 0;
    case TransitionKind::left_arc:
      return 1 + static_cast<std::size_t>(t.rel);
    case TransitionKind::right_arc:
      return 1 + kNumRelations + static_cast<std::size_t>(t.rel);
  }
  return 0;
}

Transition action_of(std::size_t id) {
  if (id == 0) return {TransitionKind::shift, -1};
  if (id <= kNumRelations) {
    return {TransitionKind::left_arc, static_cast<int>(id - 1)};
  }
  return {TransitionKind::right_arc, static_cast<int>(id - 1 - kNumRelations)};
}

}  // namespace

std::vector<std::string> DependencyParser::features(
    const ParserState& state, const std::vector<std::string>& tokens,
    const std::vector<int>& tags) {
  const auto& stack = state.stack();
  const int s0 = static_cast<int>(stack.back());
  const int s1 = stack.size() >= 2 ? stack[stack.size() - 2] : -1;
  const int n = static_cast<int>(state.size());
  const int b0 = state.next_buffer() <= n ? state.next_buffer() : -1;
  const int b1 = state.next_buffer() + 1 <= n ? state.next_buffer() + 1 : -1;

  auto word = [&](int t) -> std::string {
    if (t < 0) return "<none>";
    if (t == 0) return "<root>";
    return tokens[static_cast<std::size_t>(t - 1)];
  };
  auto tag = [&](int t) -> std::string {
    if (t < 0) return "<none>";
    if (t == 0) return "ROOT";
    return pos_tag_name(tags[static_cast<std::size_t>(t - 1)]);
  };
  auto child_tag = [&](int t) -> std::string {
    // 0 marks "no child yet"; the root can never be a dependent.
    return t == 0 ? "<none>" : tag(t);
  };

  const std::string s0t = tag(s0), s1t = tag(s1), b0t = tag(b0);
  const std::string s0w = word(s0), s1w = word(s1);
  const int lc0 = s0 >= 0 ? state.leftmost_child(s0) : 0;
  const int rc0 = s0 >= 0 ? state.rightmost_child(s0) : 0;
  const int lc1 = s1 >= 0 ? state.leftmost_child(s1) : 0;
  const int rc1 = s1 >= 0 ? state.rightmost_child(s1) : 0;
  const int dist = (s0 > 0 && s1 > 0) ? std::min(s0 - s1, 5) : -1;

  std::vector<std::string> feats;
  feats.reserve(24);
  feats.push_back("b");
  feats.push_back("s0w=" + s0w);
  feats.push_back("s0t=" + s0t);
  feats.push_back("s0wt=" + s0w + "|" + s0t);
  feats.push_back("s1w=" + s1w);
  feats.push_back("s1t=" + s1t);
  feats.push_back("s1wt=" + s1w + "|" + s1t);
  feats.push_back("b0w=" + word(b0));
  feats.push_back("b0t=" + b0t);
  feats.push_back("b1w=" + word(b1));
  feats.push_back("b1t=" + tag(b1));
  feats.push_back("s0s1t=" + s0t + "|" + s1t);
  feats.push_back("s0s1w=" + s0w + "|" + s1w);
  feats.push_back("s0tb0t=" + s0t + "|" + b0t);
  feats.push_back("s1tb0t=" + s1t + "|" + b0t);
  feats.push_back("s0s1b0t=" + s0t + "|" + s1t + "|" + b0t);
  feats.push_back("s0lct=" + child_tag(lc0));
  feats.push_back("s0rct=" + child_tag(rc0));
  feats.push_back("s1lct=" + child_tag(lc1));
  feats.push_back("s1rct=" + child_tag(rc1));
  feats.push_back("s0ts0lct=" + s0t + "|" + child_tag(lc0));
  feats.push_back("s0ts0rct=" + s0t + "|" + child_tag(rc0));
  feats.push_back("s1ts1lct=" + s1t + "|" + child_tag(lc1));
  feats.push_back("s1ts1rct=" + s1t + "|" + child_tag(rc1));
  feats.push_back("dist=" + std::to_string(dist));
  feats.push_back("s0s1tdist=" + s0t + "|" + s1t + "|" + std::to_string(dist));
  return feats;
}

int DependencyParser::predict(const std::vector<std::string>& feats,
                              const ParserState& state) const {
  std::array<double, kNumActions> scores{};
  for (const auto& feat : feats) {
    const auto it = weights_.find(feat);
    if (it == weights_.end()) continue;
    for (std::size_t c = 0; c < kNumActions; ++c) scores[c] += it->second[c];
  }
  int best = -1;
  for (std::size_t c = 0; c < kNumActions; ++c) {
    if (!state.legal(action_of(c))) continue;
    if (best < 0 || scores[c] > scores[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(c);
    }
  }
  return best;
}

DependencyParser DependencyParser::train(const std::vector<TreebankEntry>& data,
                                         std::size_t epochs) {
  if (epochs == 0) throw ValueError("parser training needs at least 1 epoch");
  std::vector<std::vector<Transition>> oracles;
  oracles.reserve(data.size());
  for (const auto& entry : data) {
    if (entry.tokens.size() != entry.tags.size() ||
        entry.tokens.size() != entry.tree.size()) {
      throw ShapeError("treebank entry sizes disagree: " +
                       std::to_string(entry.tokens.size()) + " tokens, " +
                       std::to_string(entry.tags.size()) + " tags, " +
                       std::to_string(entry.tree.size()) + " arcs");
    }
    oracles.push_back(oracle_transitions(entry.tree));
  }

  AveragedWeights<kNumActions> aw;
  std::array<double, kNumActions> scores{};
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t s = 0; s < data.size(); ++s) {
      const auto& entry = data[s];
      ParserState state(entry.tokens.size());
      for (const auto& gold : oracles[s]) {
        const auto feats = features(state, entry.tokens, entry.tags);
        aw.begin_step();
        aw.score_all(feats, scores);
        int best = -1;
        for (std::size_t c = 0; c < kNumActions; ++c) {
          if (!state.legal(action_of(c))) continue;
          if (best < 0 || scores[c] > scores[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(c);
          }
        }
        const auto gold_id = action_id(gold);
        if (best != static_cast<int>(gold_id)) {
          aw.update(feats, gold_id, static_cast<std::size_t>(best));
        }
        state.apply(gold);
      }
    }
  }
  DependencyParser parser;
  parser.weights_ = aw.averaged();
  return parser;
}

DependencyTree DependencyParser::parse(const std::vector<std::string>& tokens,
                                       const std::vector<int>& tags) const {
  if (tokens.size() != tags.size()) {
    throw ShapeError("got " + std::to_string(tokens.size()) + " tokens but " +
                     std::to_string(tags.size()) + " tags");
  }
  for (int tag : tags) {
    if (tag < 0 || static_cast<std::size_t>(tag) >= kNumPosTags) {
      throw ValueError("tag id outside the inventory: " + std::to_string(tag));
    }
  }
  ParserState state(tokens.size());
  // Exactly n shifts and n arcs reach the terminal state.
  const std::size_t limit = 2 * tokens.size();
  for (std::size_t step = 0; step < limit && !state.terminal(); ++step) {
    const auto feats = features(state, tokens, tags);
    const int action = predict(feats, state);
    state.apply(action_of(static_cast<std::size_t>(action)));
  }
  return state.tree();
}

void DependencyParser::save(std::ostream& out) const {
  save_weight_table<kNumActions>(out, "depparser 1", weights_);
}

DependencyParser DependencyParser::load(std::istream& in) {
  DependencyParser parser;
  parser.weights_ = load_weight_table<kNumActions>(in, "depparser 1");
  return parser;
}

std::vector<TaggedSentence> load_tagged_corpus(std::istream& in) {
  std::vector<TaggedSentence> out;
  TaggedSentence current;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      out.push_back(std::move(current));
      current = {};
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      flush();
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty()) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected form<TAB>upos");
    }
    try {
      current.tags.push_back(pos_tag_id(fields[1]));
    } catch (const ValueError& e) {
      throw ValueError("line " + std::to_string(lineno) + ": " + e.what());
    }
    current.tokens.push_back(fields[0]);
  }
  flush();
  return out;
}

std::vector<TaggedSentence> load_tagged_corpus(
    const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open tagged corpus: " + p.string());
  return load_tagged_corpus(in);
}

std::vector<TreebankEntry> load_treebank(std::istream& in) {
  std::vector<TreebankEntry> out;
  TreebankEntry current;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    try {
      validate_tree(current.tree);
    } catch (const Error& e) {
      throw ValueError("sentence ending at line " + std::to_string(lineno) +
                       ": " + e.what());
    }
    out.push_back(std::move(current));
    current = {};
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      flush();
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 5 || fields[1].empty()) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected index<TAB>form<TAB>upos<TAB>head<TAB>rel");
    }
    const int index = parse_int_field(fields[0], lineno, "token index");
    if (index != static_cast<int>(current.tokens.size()) + 1) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": token index " + fields[0] + " is out of sequence");
    }
    try {
      current.tags.push_back(pos_tag_id(fields[2]));
      current.tree.rels.push_back(relation_id(fields[4]));
    } catch (const ValueError& e) {
      throw ValueError("line " + std::to_string(lineno) + ": " + e.what());
    }
    current.tree.heads.push_back(parse_int_field(fields[3], lineno, "head"));
    current.tokens.push_back(fields[1]);
  }
  flush();
  return out;
}

std::vector<TreebankEntry> load_treebank(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open treebank: " + p.string());
  return load_treebank(in);
}

std::vector<std::pair<std::string, EmoticonBucket>> load_emoticon_lexicon(
    std::istream& in) {
  std::vector<std::pair<std::string, EmoticonBucket>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty()) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected pattern<TAB>bucket");
    }
    for (char c : fields[0]) {
      if (std::isupper(static_cast<unsigned char>(c)) != 0) {
        throw ParseError("line " + std::to_string(lineno) +
                         ": patterns are matched lowercase: \"" + fields[0] +
                         "\"");
      }
    }
    try {
      out.emplace_back(fields[0], emoticon_bucket_from(fields[1]));
    } catch (const ValueError& e) {
      throw ValueError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::pair<std::string, EmoticonBucket>> load_emoticon_lexicon(
    const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open emoticon lexicon: " + p.string());
  return load_emoticon_lexicon(in);
}

std::array<int, kNumEmoticonBuckets> encode_emoticons(const std::string& text) {
  std::string lower = text;
  for (char& c : lower) {
    if (static_cast<unsigned char>(c) < 0x80) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  std::array<int, kNumEmoticonBuckets> counts{};
  std::size_t i = 0;
  while (i < lower.size()) {
    EmoticonBucket bucket = EmoticonBucket::positive;
    const std::size_t len = match_emoticon(lower, i, &bucket);
    if (len > 0) {
      ++counts[static_cast<std::size_t>(bucket)];
      i += len;
    } else {
      ++i;
    }
  }
  return counts;
}

void LinetConfig::validate() const {
  if (pos_dim < 1 || rel_dim < 1 || head_pos_dim < 1) {
    throw ConfigError("linguistic embedding widths must be at least 1");
  }
}

namespace {

template <class T>
Tensor<T> uniform_table(std::size_t rows, std::size_t dim, Rng& rng) {
  auto t = Tensor<T>::zeros({rows, dim}, true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

template <class T>
LinetParams<T> LinetParams<T>::init(const LinetConfig& config, Rng& rng) {
  config.validate();
  LinetParams<T> params;
  params.config = config;
  params.pos_embedding = uniform_table<T>(kNumPosTags, config.pos_dim, rng);
  params.rel_embedding = uniform_table<T>(kNumRelations, config.rel_dim, rng);
  params.head_pos_embedding =
      uniform_table<T>(kNumPosTags + 1, config.head_pos_dim, rng);
  return params;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> LinetParams<T>::named_params()
    const {
  return {{"ling.pos", pos_embedding},
          {"ling.rel", rel_embedding},
          {"ling.headpos", head_pos_embedding}};
}

template <class T>
Tensor<T> linguistic_features(
    Tape<T>& tape, const std::vector<int>& tags, const DependencyTree& tree,
    const std::array<int, kNumEmoticonBuckets>& emoticon_counts,
    const LinetParams<T>& params) {
  params.config.validate();
  const std::size_t n = tags.size();
  if (tree.size() != n) {
    throw ShapeError("got " + std::to_string(n) + " tags but a tree over " +
                     std::to_string(tree.size()) + " tokens");
  }
  for (int count : emoticon_counts) {
    if (count < 0) throw ValueError("emoticon counts must be non-negative");
  }
  const std::size_t width = params.config.feature_dim();
  if (n == 0) return Tensor<T>::zeros({1, width});

  // Range checks only: pooling is defined for any head/relation
  // assignment, well-formed tree or not.
  for (int tag : tags) {
    if (tag < 0 || static_cast<std::size_t>(tag) >= kNumPosTags) {
      throw ValueError("tag id outside the inventory: " + std::to_string(tag));
    }
  }
  std::vector<int> head_tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int h = tree.heads[i];
    if (h < 0 || static_cast<std::size_t>(h) > n) {
      throw ValueError("head index out of range: " + std::to_string(h));
    }
    if (tree.rels[i] < 0 ||
        static_cast<std::size_t>(tree.rels[i]) >= kNumRelations) {
      throw ValueError("relation id out of range: " +
                       std::to_string(tree.rels[i]));
    }
    head_tags[i] =
        h == 0 ? kRootPosId : tags[static_cast<std::size_t>(h - 1)];
  }

  const Tensor<T> per_token = tape.concat_cols(
      {tape.gather_rows(params.pos_embedding, tags),
       tape.gather_rows(params.rel_embedding, tree.rels),
       tape.gather_rows(params.head_pos_embedding, head_tags)});

  auto mean_row = Tensor<T>::zeros({1, n});
  for (auto& v : mean_row.values()) v = T(1) / static_cast<T>(n);
  const Tensor<T> pooled = tape.matmul(mean_row, per_token);

  auto emo = Tensor<T>::zeros({1, static_cast<std::size_t>(kNumEmoticonBuckets)});
  for (int k = 0; k < kNumEmoticonBuckets; ++k) {
    emo.values()[static_cast<std::size_t>(k)] =
        static_cast<T>(emoticon_counts[static_cast<std::size_t>(k)]) /
        static_cast<T>(n);
  }
  return tape.concat_cols({pooled, emo});
}

template struct LinetParams<float>;
template struct LinetParams<double>;
template Tensor<float> linguistic_features<float>(
    Tape<float>&, const std::vector<int>&, const DependencyTree&,
    const std::array<int, kNumEmoticonBuckets>&, const LinetParams<float>&);
template Tensor<double> linguistic_features<double>(
    Tape<double>&, const std::vector<int>&, const DependencyTree&,
    const std::array<int, kNumEmoticonBuckets>&, const LinetParams<double>&);

}  // namespace checkmate
