#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "checkmate/emoticon_table.hpp"
#include "checkmate/error.hpp"
#include "checkmate/linet.hpp"
#include "checkmate/rng.hpp"
#include "checkmate/tensor.hpp"

using namespace checkmate;

namespace {

const std::string kDataDir = CHECKMATE_DATA_DIR;

DependencyTree make_tree(std::vector<int> heads, std::vector<std::string> rels) {
  DependencyTree tree;
  tree.heads = std::move(heads);
  for (const auto& r : rels) tree.rels.push_back(relation_id(r));
  return tree;
}

// Uniform over all well-formed projective trees by rejection: random
// head assignments filtered down to single-rooted acyclic projective
// ones.
DependencyTree random_projective_tree(Rng& rng, std::size_t n) {
  for (int attempt = 0; attempt < 200000; ++attempt) {
    DependencyTree tree;
    tree.heads.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto draw = static_cast<int>(rng.below(n));
      tree.heads[i] = draw >= static_cast<int>(i + 1) ? draw + 1 : draw;
    }
    int roots = 0;
    for (int h : tree.heads) roots += h == 0;
    if (roots != 1) continue;
    bool acyclic = true;
    for (std::size_t i = 0; i < n && acyclic; ++i) {
      int cursor = tree.heads[i];
      std::size_t hops = 0;
      while (cursor != 0) {
        cursor = tree.heads[static_cast<std::size_t>(cursor - 1)];
        if (++hops > n) {
          acyclic = false;
          break;
        }
      }
    }
    if (!acyclic) continue;
    if (!is_projective(tree)) continue;
    tree.rels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (tree.heads[i] == 0) {
        tree.rels[i] = kRootRelation;
      } else {
        const auto r = static_cast<int>(rng.below(kNumRelations - 1));
        tree.rels[i] = r >= kRootRelation ? r + 1 : r;
      }
    }
    validate_tree(tree);
    return tree;
  }
  FAIL("no projective tree found");
  return {};
}

}  // namespace

TEST_CASE("tag and relation inventories round-trip") {
  const std::vector<std::string> tags{
      "ADJ",  "ADP",  "ADV",   "AUX",   "CCONJ", "DET",  "INTJ", "NOUN", "NUM",
      "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM",  "VERB", "X"};
  REQUIRE(tags.size() == kNumPosTags);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    CHECK(pos_tag_id(tags[i]) == static_cast<int>(i));
    CHECK(pos_tag_name(static_cast<int>(i)) == tags[i]);
  }
  CHECK(pos_tag_name(kRootPosId) == "ROOT");
  CHECK_THROWS_AS(pos_tag_id("ROOT"), ValueError);
  CHECK_THROWS_AS(pos_tag_id("noun"), ValueError);
  CHECK_THROWS_AS(pos_tag_name(18), ValueError);
  CHECK_THROWS_AS(pos_tag_name(-1), ValueError);

  const std::vector<std::string> rels{
      "nsubj", "obj", "obl",  "nmod", "amod", "advmod", "det",  "case",
      "mark",  "cc",  "conj", "aux",  "cop",  "punct",  "root", "dep"};
  REQUIRE(rels.size() == kNumRelations);
  for (std::size_t i = 0; i < rels.size(); ++i) {
    CHECK(relation_id(rels[i]) == static_cast<int>(i));
    CHECK(relation_name(static_cast<int>(i)) == rels[i]);
  }
  CHECK(relation_id("root") == kRootRelation);
  CHECK_THROWS_AS(relation_id("xcomp"), ValueError);
  CHECK_THROWS_AS(relation_name(16), ValueError);
}

TEST_CASE("tree validation enforces well-formedness") {
  CHECK_NOTHROW(validate_tree(make_tree({2, 3, 0, 3},
                                        {"det", "nsubj", "root", "punct"})));
  CHECK_NOTHROW(validate_tree({}));

  DependencyTree bad = make_tree({2, 0}, {"det", "root"});
  bad.rels.pop_back();
  CHECK_THROWS_AS(validate_tree(bad), ShapeError);

  CHECK_THROWS_AS(validate_tree(make_tree({3, 0}, {"det", "root"})),
                  ValueError);  // head out of range
  CHECK_THROWS_AS(validate_tree(make_tree({1, 0}, {"det", "root"})),
                  ValueError);  // self-head
  CHECK_THROWS_AS(validate_tree(make_tree({0, 0}, {"root", "root"})),
                  ValueError);  // two roots
  CHECK_THROWS_AS(validate_tree(make_tree({2, 1}, {"det", "nsubj"})),
                  ValueError);  // no root (and a cycle)
  CHECK_THROWS_AS(validate_tree(make_tree({2, 0}, {"root", "root"})),
                  ValueError);  // root relation off the root arc
  CHECK_THROWS_AS(validate_tree(make_tree({2, 0}, {"det", "nsubj"})),
                  ValueError);  // root arc without the root relation
  CHECK_THROWS_AS(
      validate_tree(make_tree({2, 3, 1, 0}, {"det", "det", "det", "root"})),
      ValueError);  // 1 -> 2 -> 3 -> 1 cycle
}

TEST_CASE("projectivity detects crossing arcs") {
  CHECK(is_projective(make_tree({2, 3, 0, 3}, {"det", "nsubj", "root", "punct"})));
  CHECK(is_projective({}));
  CHECK(is_projective(make_tree({0}, {"root"})));
  // Arcs 1->3 and 2->4 cross.
  CHECK_FALSE(is_projective(
      make_tree({3, 4, 0, 3}, {"det", "det", "root", "nsubj"})));
  // Nested arcs do not.
  CHECK(is_projective(
      make_tree({4, 4, 2, 0}, {"det", "nsubj", "det", "root"})));
}

TEST_CASE("parser state walks a hand-built derivation") {
  ParserState state(3);
  CHECK(state.stack() == std::vector<int>{0});
  CHECK(state.next_buffer() == 1);
  CHECK(state.buffer_size() == 3);
  CHECK_FALSE(state.terminal());
  CHECK_THROWS_AS(state.tree(), ValueError);

  const Transition shift{TransitionKind::shift, -1};
  CHECK(state.legal(shift));
  CHECK_FALSE(state.legal({TransitionKind::left_arc, relation_id("det")}));
  CHECK_FALSE(state.legal({TransitionKind::right_arc, relation_id("obj")}));

  state.apply(shift);  // stack [0 1]
  // Root attachment is only legal once the buffer is exhausted.
  CHECK_FALSE(state.legal({TransitionKind::right_arc, kRootRelation}));
  CHECK_FALSE(state.legal({TransitionKind::right_arc, relation_id("obj")}));

  state.apply(shift);  // stack [0 1 2]
  CHECK(state.legal({TransitionKind::left_arc, relation_id("det")}));
  CHECK_FALSE(state.legal({TransitionKind::left_arc, kRootRelation}));
  CHECK_FALSE(state.legal({TransitionKind::left_arc, -1}));
  CHECK_FALSE(state.legal({TransitionKind::left_arc, 16}));

  state.apply({TransitionKind::left_arc, relation_id("det")});  // 1 <- 2
  CHECK(state.stack() == std::vector<int>{0, 2});
  CHECK(state.leftmost_child(2) == 1);
  CHECK(state.rightmost_child(2) == 0);

  state.apply(shift);  // stack [0 2 3]
  CHECK(state.buffer_size() == 0);
  CHECK(state.next_buffer() == 4);
  CHECK_THROWS_AS(state.apply(shift), ValueError);

  state.apply({TransitionKind::left_arc, relation_id("nsubj")});  // 2 <- 3
  CHECK(state.stack() == std::vector<int>{0, 3});
  CHECK_FALSE(state.legal({TransitionKind::right_arc, relation_id("obj")}));
  CHECK(state.legal({TransitionKind::right_arc, kRootRelation}));

  state.apply({TransitionKind::right_arc, kRootRelation});
  CHECK(state.terminal());
  CHECK(state.tree() ==
        make_tree({2, 3, 0}, {"det", "nsubj", "root"}));
}

TEST_CASE("oracle emits the minimal derivation for one token") {
  const auto seq = oracle_transitions(make_tree({0}, {"root"}));
  REQUIRE(seq.size() == 2);
  CHECK(seq[0] == Transition{TransitionKind::shift, -1});
  CHECK(seq[1] == Transition{TransitionKind::right_arc, kRootRelation});
}

TEST_CASE("oracle round-trips a three-token tree") {
  const auto gold = make_tree({2, 3, 0}, {"det", "nsubj", "root"});
  const auto seq = oracle_transitions(gold);
  CHECK(seq.size() == 6);
  CHECK(replay_transitions(3, seq) == gold);
}

TEST_CASE("oracle rejects non-projective trees") {
  const auto crossing =
      make_tree({3, 4, 0, 3}, {"det", "det", "root", "nsubj"});
  CHECK_THROWS_AS(oracle_transitions(crossing), ProjectivityError);
  CHECK_THROWS_AS(oracle_transitions(make_tree({0, 0}, {"root", "root"})),
                  ValueError);
}

TEST_CASE("oracle round-trips five hundred random projective trees") {
  Rng rng(2024);
  for (int sample = 0; sample < 500; ++sample) {
    const std::size_t n = 1 + rng.below(10);
    const auto gold = random_projective_tree(rng, n);
    const auto seq = oracle_transitions(gold);
    REQUIRE(seq.size() == 2 * n);
    CHECK(replay_transitions(n, seq) == gold);
  }
}

TEST_CASE("replay rejects illegal and incomplete sequences") {
  const Transition shift{TransitionKind::shift, -1};
  CHECK_THROWS_AS(replay_transitions(1, {shift, shift}), ValueError);
  CHECK_THROWS_AS(replay_transitions(2, {shift, shift}), ValueError);
  CHECK_THROWS_AS(
      replay_transitions(1, {{TransitionKind::right_arc, kRootRelation}}),
      ValueError);
}

TEST_CASE("shipped corpora load and line errors are located") {
  const auto tagged = load_tagged_corpus(kDataDir + "/tagged.tsv");
  REQUIRE(tagged.size() == 200);
  CHECK(tagged[0].tokens ==
        std::vector<std::string>{"the", "virus", "spreads", "."});
  CHECK(tagged[0].tags ==
        std::vector<int>{pos_tag_id("DET"), pos_tag_id("NOUN"),
                         pos_tag_id("VERB"), pos_tag_id("PUNCT")});

  const auto bank = load_treebank(kDataDir + "/treebank.conll");
  REQUIRE(bank.size() == 56);
  CHECK(bank[0].tokens ==
        std::vector<std::string>{"the", "virus", "spreads", "."});
  CHECK(bank[0].tree ==
        make_tree({2, 3, 0, 3}, {"det", "nsubj", "root", "punct"}));
  std::set<int> seen_rels;
  for (const auto& entry : bank) {
    CHECK_NOTHROW(validate_tree(entry.tree));
    CHECK(is_projective(entry.tree));
    for (int r : entry.tree.rels) seen_rels.insert(r);
  }
  CHECK(seen_rels.size() == kNumRelations);

  std::istringstream missing_field("the\n");
  CHECK_THROWS_WITH_AS(load_tagged_corpus(missing_field),
                       doctest::Contains("line 1"), ParseError);
  std::istringstream bad_tag("the\tDET\nvirus\tNUON\n");
  CHECK_THROWS_WITH_AS(load_tagged_corpus(bad_tag),
                       doctest::Contains("line 2"), ValueError);
  std::istringstream bad_index("1\tthe\tDET\t2\tdet\n3\tvirus\tNOUN\t0\troot\n");
  CHECK_THROWS_WITH_AS(load_treebank(bad_index), doctest::Contains("line 2"),
                       ParseError);
  std::istringstream bad_head("1\tthe\tDET\t9\tdet\n");
  CHECK_THROWS_AS(load_treebank(bad_head), ValueError);
  std::istringstream bad_int("1\tthe\tDET\tx\tdet\n");
  CHECK_THROWS_AS(load_treebank(bad_int), ParseError);
  CHECK_THROWS_AS(load_tagged_corpus(kDataDir + "/nope.tsv"), IoError);
  CHECK_THROWS_AS(load_treebank(kDataDir + "/nope.conll"), IoError);
}

TEST_CASE("treebank oracle round-trips on the shipped bank") {
  const auto bank = load_treebank(kDataDir + "/treebank.conll");
  for (const auto& entry : bank) {
    const auto seq = oracle_transitions(entry.tree);
    REQUIRE(seq.size() == 2 * entry.tree.size());
    CHECK(replay_transitions(entry.tree.size(), seq) == entry.tree);
  }
}

TEST_CASE("tagger memorizes a tiny corpus and hits the accuracy bar") {
  const auto tagged = load_tagged_corpus(kDataDir + "/tagged.tsv");
  const PosTagger tagger = PosTagger::train(tagged, 5);

  std::size_t hits = 0, total = 0;
  for (const auto& sentence : tagged) {
    const auto pred = tagger.tag(sentence.tokens);
    REQUIRE(pred.size() == sentence.tags.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      hits += pred[i] == sentence.tags[i];
      ++total;
    }
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(total) >= 0.95);

  CHECK(tagger.tag({"the", "virus", "spreads"}) ==
        std::vector<int>{pos_tag_id("DET"), pos_tag_id("NOUN"),
                         pos_tag_id("VERB")});
  CHECK(tagger.tag({}).empty());

  const auto unseen = tagger.tag({"covid19"});
  REQUIRE(unseen.size() == 1);
  CHECK(unseen[0] >= 0);
  CHECK(unseen[0] < static_cast<int>(kNumPosTags));
}

TEST_CASE("tagger reproduces every sentence of a small training set") {
  std::vector<TaggedSentence> data{
      {{"the", "virus", "spreads", "."},
       {pos_tag_id("DET"), pos_tag_id("NOUN"), pos_tag_id("VERB"),
        pos_tag_id("PUNCT")}},
      {{"it", "is", "safe"},
       {pos_tag_id("PRON"), pos_tag_id("AUX"), pos_tag_id("ADJ")}},
      {{"alice", "never", "works"},
       {pos_tag_id("PROPN"), pos_tag_id("ADV"), pos_tag_id("VERB")}},
  };
  const PosTagger tagger = PosTagger::train(data, 10);
  for (const auto& sentence : data) {
    CHECK(tagger.tag(sentence.tokens) == sentence.tags);
  }
}

TEST_CASE("tagger training validates its input") {
  CHECK_THROWS_AS(PosTagger::train({{{"a"}, {0}}}, 0), ValueError);
  CHECK_THROWS_AS(PosTagger::train({{{"a", "b"}, {0}}}, 1), ShapeError);
  CHECK_THROWS_AS(PosTagger::train({{{"a"}, {17}}}, 1), ValueError);
  CHECK_THROWS_AS(PosTagger::train({{{"a"}, {-1}}}, 1), ValueError);
}

TEST_CASE("tagger persistence and determinism") {
  const auto tagged = load_tagged_corpus(kDataDir + "/tagged.tsv");
  const std::vector<TaggedSentence> slice(tagged.begin(), tagged.begin() + 40);
  const PosTagger a = PosTagger::train(slice, 3);
  const PosTagger b = PosTagger::train(slice, 3);

  std::ostringstream sa, sb;
  a.save(sa);
  b.save(sb);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().starts_with("postagger 1\n"));
  CHECK(sa.str().ends_with("end\n"));

  std::istringstream in(sa.str());
  const PosTagger restored = PosTagger::load(in);
  for (const auto& sentence : slice) {
    CHECK(restored.tag(sentence.tokens) == a.tag(sentence.tokens));
  }

  std::istringstream bad_header("tagger 9\nend\n");
  CHECK_THROWS_AS(PosTagger::load(bad_header), ParseError);
  std::istringstream no_end("postagger 1\nw=the\t5\t1.5\n");
  CHECK_THROWS_AS(PosTagger::load(no_end), ParseError);
  std::istringstream bad_class("postagger 1\nw=the\t17\t1.5\nend\n");
  CHECK_THROWS_AS(PosTagger::load(bad_class), ParseError);
  std::istringstream bad_weight("postagger 1\nw=the\t5\tz\nend\n");
  CHECK_THROWS_AS(PosTagger::load(bad_weight), ParseError);
}

TEST_CASE("untrained parser is total and forced on one token") {
  const DependencyParser parser;
  CHECK(parser.parse({}, {}) == DependencyTree{});

  const auto one = parser.parse({"hello"}, {pos_tag_id("INTJ")});
  CHECK(one == make_tree({0}, {"root"}));

  CHECK_THROWS_AS(parser.parse({"a", "b"}, {0}), ShapeError);
  CHECK_THROWS_AS(parser.parse({"a"}, {17}), ValueError);
}

TEST_CASE("parser always produces well-formed projective trees") {
  const DependencyParser untrained;
  Rng rng(4096);
  const std::vector<std::string> pool{"the",  "virus", "spreads", "fast",
                                      "zzz",  "covid", "19",      "!",
                                      "cure", "hoax"};
  for (int sample = 0; sample < 60; ++sample) {
    const std::size_t n = 1 + rng.below(32);
    std::vector<std::string> tokens;
    std::vector<int> tags;
    for (std::size_t i = 0; i < n; ++i) {
      tokens.push_back(pool[rng.below(pool.size())]);
      tags.push_back(static_cast<int>(rng.below(kNumPosTags)));
    }
    const auto tree = untrained.parse(tokens, tags);
    REQUIRE(tree.size() == n);
    CHECK_NOTHROW(validate_tree(tree));
    CHECK(is_projective(tree));
  }
}

TEST_CASE("parser reaches the attachment bar on its training bank") {
  const auto bank = load_treebank(kDataDir + "/treebank.conll");
  const DependencyParser parser = DependencyParser::train(bank, 8);

  std::size_t correct_heads = 0, total = 0;
  for (const auto& entry : bank) {
    const auto tree = parser.parse(entry.tokens, entry.tags);
    CHECK_NOTHROW(validate_tree(tree));
    for (std::size_t i = 0; i < entry.tree.size(); ++i) {
      correct_heads += tree.heads[i] == entry.tree.heads[i];
      ++total;
    }
  }
  CHECK(static_cast<double>(correct_heads) / static_cast<double>(total) >=
        0.90);
}

TEST_CASE("parser persistence and determinism") {
  const auto bank = load_treebank(kDataDir + "/treebank.conll");
  const std::vector<TreebankEntry> slice(bank.begin(), bank.begin() + 20);
  const DependencyParser a = DependencyParser::train(slice, 4);
  const DependencyParser b = DependencyParser::train(slice, 4);

  std::ostringstream sa, sb;
  a.save(sa);
  b.save(sb);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().starts_with("depparser 1\n"));

  std::istringstream in(sa.str());
  const DependencyParser restored = DependencyParser::load(in);
  for (const auto& entry : slice) {
    CHECK(restored.parse(entry.tokens, entry.tags) ==
          a.parse(entry.tokens, entry.tags));
  }

  std::istringstream bad_header("postagger 1\nend\n");
  CHECK_THROWS_AS(DependencyParser::load(bad_header), ParseError);
  std::istringstream bad_class("depparser 1\nb\t33\t1.0\nend\n");
  CHECK_THROWS_AS(DependencyParser::load(bad_class), ParseError);

  CHECK_THROWS_AS(DependencyParser::train(slice, 0), ValueError);
  std::vector<TreebankEntry> bad = {slice[0]};
  bad[0].tags.pop_back();
  CHECK_THROWS_AS(DependencyParser::train(bad, 1), ShapeError);
}

TEST_CASE("emoticon counts bucket lexicon hits") {
  CHECK(encode_emoticons("great :)") == std::array<int, 4>{1, 0, 0, 0});
  CHECK(encode_emoticons("no emoticons here") == std::array<int, 4>{0, 0, 0, 0});
  CHECK(encode_emoticons(":) :( :)") == std::array<int, 4>{2, 1, 0, 0});
  CHECK(encode_emoticons("") == std::array<int, 4>{0, 0, 0, 0});

  // Case folding, right boundary, longest match, adjacent emoji.
  CHECK(encode_emoticons("WOW :D yes") == std::array<int, 4>{1, 0, 0, 0});
  CHECK(encode_emoticons(":dog") == std::array<int, 4>{0, 0, 0, 0});
  CHECK(encode_emoticons(":-(") == std::array<int, 4>{0, 1, 0, 0});
  CHECK(encode_emoticons("\xF0\x9F\x94\xA5\xF0\x9F\x94\xA5") ==
        std::array<int, 4>{0, 0, 0, 2});
  CHECK(encode_emoticons("love <3 but :/ hmm -_- \xF0\x9F\x98\x82") ==
        std::array<int, 4>{1, 1, 1, 1});
}

TEST_CASE("shipped emoticon lexicon mirrors the builtin table") {
  const auto shipped = load_emoticon_lexicon(kDataDir + "/emoticons.tsv");
  const auto builtin = builtin_emoticon_table();
  REQUIRE(shipped.size() == builtin.size());
  for (std::size_t i = 0; i < shipped.size(); ++i) {
    CHECK(shipped[i].first == builtin[i].pattern);
    CHECK(shipped[i].second == builtin[i].bucket);
  }

  std::istringstream one_field(":)\n");
  CHECK_THROWS_AS(load_emoticon_lexicon(one_field), ParseError);
  std::istringstream bad_bucket(":)\thappy\n");
  CHECK_THROWS_WITH_AS(load_emoticon_lexicon(bad_bucket),
                       doctest::Contains("line 1"), ValueError);
  std::istringstream upper(":D\tpositive\n");
  CHECK_THROWS_AS(load_emoticon_lexicon(upper), ParseError);
  CHECK_THROWS_AS(load_emoticon_lexicon(kDataDir + "/nope.tsv"), IoError);
}

TEST_CASE("bucket names round-trip") {
  for (int i = 0; i < kNumEmoticonBuckets; ++i) {
    const auto bucket = static_cast<EmoticonBucket>(i);
    CHECK(emoticon_bucket_from(to_string(bucket)) == bucket);
  }
  CHECK_THROWS_AS(emoticon_bucket_from("sad"), ValueError);
}

TEST_CASE("linguistic parameter tables have the documented shapes") {
  LinetConfig config;
  CHECK(config.feature_dim() == 52);
  config.validate();
  config.pos_dim = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);

  Rng rng(7);
  const auto params = LinetParams<double>::init(LinetConfig{}, rng);
  CHECK(params.pos_embedding.shape() == Shape{kNumPosTags, 16});
  CHECK(params.rel_embedding.shape() == Shape{kNumRelations, 16});
  CHECK(params.head_pos_embedding.shape() == Shape{kNumPosTags + 1, 16});

  const auto named = params.named_params();
  REQUIRE(named.size() == 3);
  std::set<std::string> names;
  for (const auto& [name, tensor] : named) {
    names.insert(name);
    CHECK(tensor.requires_grad());
  }
  CHECK(names.size() == 3);

  Rng rng2(7);
  const auto again = LinetParams<double>::init(LinetConfig{}, rng2);
  CHECK(params.pos_embedding.values()[0] == again.pos_embedding.values()[0]);

  LinetConfig bad;
  bad.rel_dim = 0;
  Rng rng3(7);
  CHECK_THROWS_AS(LinetParams<double>::init(bad, rng3), ConfigError);
}

TEST_CASE("pooled features match a hand-built oracle") {
  LinetConfig config;
  config.pos_dim = 3;
  config.rel_dim = 2;
  config.head_pos_dim = 2;
  Rng rng(11);
  const auto params = LinetParams<double>::init(config, rng);

  SUBCASE("empty input gives the zero vector") {
    Tape<double> tape;
    const auto out =
        linguistic_features<double>(tape, {}, {}, {0, 0, 0, 0}, params);
    REQUIRE(out.shape() == Shape{1, config.feature_dim()});
    for (double v : out.values()) CHECK(v == 0.0);
    CHECK_FALSE(out.requires_grad());
  }

  SUBCASE("single token is the mean of one") {
    Tape<double> tape;
    const int tag = pos_tag_id("NOUN");
    const auto tree = make_tree({0}, {"root"});
    const auto out =
        linguistic_features<double>(tape, {tag}, tree, {2, 0, 1, 0}, params);
    REQUIRE(out.shape() == Shape{1, 11});

    const auto pos = params.pos_embedding.values().subspan(
        static_cast<std::size_t>(tag) * 3, 3);
    const auto rel = params.rel_embedding.values().subspan(
        static_cast<std::size_t>(kRootRelation) * 2, 2);
    const auto head = params.head_pos_embedding.values().subspan(
        static_cast<std::size_t>(kRootPosId) * 2, 2);
    const auto got = out.values();
    for (std::size_t j = 0; j < 3; ++j) CHECK(got[j] == doctest::Approx(pos[j]));
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(got[3 + j] == doctest::Approx(rel[j]));
      CHECK(got[5 + j] == doctest::Approx(head[j]));
    }
    CHECK(got[7] == doctest::Approx(2.0));
    CHECK(got[8] == doctest::Approx(0.0));
    CHECK(got[9] == doctest::Approx(1.0));
    CHECK(got[10] == doctest::Approx(0.0));
  }

  SUBCASE("mean pooling ignores duplication of identical rows") {
    const int tag = pos_tag_id("VERB");
    Tape<double> tape_one;
    const auto one = linguistic_features<double>(
        tape_one, {tag}, make_tree({0}, {"root"}), {0, 0, 0, 0}, params);
    Tape<double> tape_two;
    DependencyTree doubled;
    doubled.heads = {0, 0};
    doubled.rels = {kRootRelation, kRootRelation};
    const auto two = linguistic_features<double>(tape_two, {tag, tag}, doubled,
                                                 {0, 0, 0, 0}, params);
    REQUIRE(one.size() == two.size());
    for (std::size_t j = 0; j < one.size(); ++j) {
      CHECK(std::abs(one.values()[j] - two.values()[j]) <= 1e-7);
    }
  }

  SUBCASE("two runs are bit-identical") {
    const std::vector<int> tags{pos_tag_id("DET"), pos_tag_id("NOUN"),
                                pos_tag_id("VERB")};
    const auto tree = make_tree({2, 3, 0}, {"det", "nsubj", "root"});
    Tape<double> t1, t2;
    const auto a = linguistic_features<double>(t1, tags, tree, {1, 0, 0, 2},
                                               params);
    const auto b = linguistic_features<double>(t2, tags, tree, {1, 0, 0, 2},
                                               params);
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(a.values()[j] == b.values()[j]);
    }
  }

  SUBCASE("input validation") {
    Tape<double> tape;
    CHECK_THROWS_AS(linguistic_features<double>(
                        tape, {0, 1}, make_tree({0}, {"root"}), {0, 0, 0, 0},
                        params),
                    ShapeError);
    CHECK_THROWS_AS(
        linguistic_features<double>(tape, {17}, make_tree({0}, {"root"}),
                                    {0, 0, 0, 0}, params),
        ValueError);
    CHECK_THROWS_AS(
        linguistic_features<double>(tape, {0}, make_tree({0}, {"root"}),
                                    {0, -1, 0, 0}, params),
        ValueError);
    DependencyTree wild;
    wild.heads = {5};
    wild.rels = {0};
    CHECK_THROWS_AS(
        linguistic_features<double>(tape, {0}, wild, {0, 0, 0, 0}, params),
        ValueError);
  }
}

TEST_CASE("feature gradients agree with finite differences") {
  LinetConfig config;
  config.pos_dim = 3;
  config.rel_dim = 3;
  config.head_pos_dim = 2;
  Rng rng(23);
  auto params = LinetParams<double>::init(config, rng);

  const std::vector<int> tags{pos_tag_id("DET"), pos_tag_id("NOUN"),
                              pos_tag_id("VERB"), pos_tag_id("PUNCT")};
  const auto tree = make_tree({2, 3, 0, 3}, {"det", "nsubj", "root", "punct"});

  auto f = [&](Tape<double>& tape) {
    const auto feats =
        linguistic_features<double>(tape, tags, tree, {1, 2, 0, 1}, params);
    return tape.sum(feats);
  };
  std::vector<Tensor<double>> all{params.pos_embedding, params.rel_embedding,
                                  params.head_pos_embedding};
  const double err = finite_diff_check<double>(f, all, 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("float instantiation stays consistent") {
  LinetConfig config;
  config.pos_dim = 4;
  config.rel_dim = 4;
  config.head_pos_dim = 4;
  Rng rng(5);
  const auto params = LinetParams<float>::init(config, rng);
  Tape<float> tape;
  const auto out = linguistic_features<float>(
      tape, {pos_tag_id("NOUN")}, make_tree({0}, {"root"}), {1, 0, 0, 0},
      params);
  REQUIRE(out.shape() == Shape{1, 16});
  for (float v : out.values()) CHECK(std::isfinite(v));
}
