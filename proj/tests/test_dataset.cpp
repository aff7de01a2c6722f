#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "checkmate/dataset.hpp"
#include "checkmate/error.hpp"
#include "checkmate/rng.hpp"

using namespace checkmate;

namespace {

std::vector<ClaimRecord> parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_records(in);
}

std::string serialize_text(const std::vector<ClaimRecord>& records) {
  std::ostringstream out;
  serialize_records(records, out);
  return out.str();
}

std::vector<std::string> ids_of(const std::vector<ClaimRecord>& part) {
  std::vector<std::string> out;
  for (const auto& rec : part) out.push_back(rec.id);
  return out;
}

}  // namespace

TEST_CASE("parse_records reads annotated and unannotated lines") {
  const std::string data =
      R"({"id":"c1","text":"vaccines cause mutation","check_worthy":1,"aux":[1,0,0,0,1,0]})"
      "\n"
      R"({"id":"c2","text":"there is a known cure","check_worthy":0})"
      "\n";
  auto records = parse_text(data);
  REQUIRE(records.size() == 2);
  CHECK(records[0].id == "c1");
  CHECK(records[0].check_worthy == 1);
  REQUIRE(records[0].aux.has_value());
  CHECK((*records[0].aux)[0] == 1);
  CHECK((*records[0].aux)[4] == 1);
  CHECK((*records[0].aux)[1] == 0);
  CHECK(records[1].check_worthy == 0);
  CHECK_FALSE(records[1].aux.has_value());
}

TEST_CASE("parse_records on an empty stream yields an empty list") {
  CHECK(parse_text("").empty());
  CHECK(parse_text("\n\n").empty());
}

TEST_CASE("parse_records attaches line numbers to failures") {
  const std::string good =
      R"({"id":"c1","text":"x","check_worthy":0})"
      "\n";

  SUBCASE("malformed JSON") {
    try {
      parse_text(good + "{nonsense\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SUBCASE("duplicate id") {
    try {
      parse_text(good + good);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("c1") != std::string::npos);
    }
  }

  SUBCASE("label outside the binary domain") {
    CHECK_THROWS_AS(
        parse_text(R"({"id":"a","text":"x","check_worthy":2})" "\n"),
        ValueError);
    CHECK_THROWS_AS(
        parse_text(
            R"({"id":"a","text":"x","check_worthy":1,"aux":[0,0,2,0,0,0]})" "\n"),
        ValueError);
  }

  SUBCASE("check-worthy record without aux labels") {
    CHECK_THROWS_AS(
        parse_text(R"({"id":"a","text":"x","check_worthy":1})" "\n"),
        ValueError);
  }

  SUBCASE("unknown field") {
    CHECK_THROWS_AS(
        parse_text(
            R"({"id":"a","text":"x","check_worthy":0,"extra":1})" "\n"),
        ParseError);
  }

  SUBCASE("blank text") {
    CHECK_THROWS_AS(
        parse_text(R"({"id":"a","text":"  ","check_worthy":0})" "\n"),
        ValueError);
  }

  SUBCASE("aux of the wrong arity") {
    CHECK_THROWS_AS(
        parse_text(
            R"({"id":"a","text":"x","check_worthy":1,"aux":[1,0,0]})" "\n"),
        ParseError);
  }
}

TEST_CASE("serialize then parse is the identity") {
  auto records = generate_synthetic(50, kDefaultAuxPriors, 42);
  auto round = parse_text(serialize_text(records));
  REQUIRE(round.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(round[i].id == records[i].id);
    CHECK(round[i].text == records[i].text);
    CHECK(round[i].check_worthy == records[i].check_worthy);
    CHECK(round[i].aux == records[i].aux);
  }
}

TEST_CASE("split_dataset reproduces the reference sizes") {
  auto records = generate_synthetic(5920, kDefaultAuxPriors, 1);
  auto split = split_dataset(records, SplitRatios{}, 13);
  CHECK(split.train.size() == 4144);
  CHECK(split.validation.size() == 888);
  CHECK(split.test.size() == 888);
}

TEST_CASE("split_dataset on ten records follows the rounding rule") {
  auto records = generate_synthetic(10, kDefaultAuxPriors, 2);
  auto split = split_dataset(records, SplitRatios{}, 5);
  CHECK(split.train.size() == 7);
  CHECK(split.validation.size() + split.test.size() == 3);
  CHECK(split.validation.size() >= 1);
  CHECK(split.test.size() >= 1);

  auto again = split_dataset(records, SplitRatios{}, 5);
  CHECK(ids_of(split.train) == ids_of(again.train));
  CHECK(ids_of(split.validation) == ids_of(again.validation));
  CHECK(ids_of(split.test) == ids_of(again.test));
}

TEST_CASE("split parts are disjoint and exhaustive") {
  for (std::uint64_t seed : {0ull, 7ull, 99ull}) {
    for (std::size_t n : {3, 10, 137}) {
      auto records = generate_synthetic(n, kDefaultAuxPriors, seed + 100);
      auto split = split_dataset(records, SplitRatios{}, seed);
      std::set<std::string> seen;
      for (const auto* part : {&split.train, &split.validation, &split.test}) {
        for (const auto& rec : *part) {
          CHECK(seen.insert(rec.id).second);
        }
      }
      CHECK(seen.size() == n);
      CHECK(split.train.size() + split.validation.size() + split.test.size() ==
            n);
    }
  }
}

TEST_CASE("split tags each record with its part") {
  auto records = generate_synthetic(30, kDefaultAuxPriors, 3);
  auto split = split_dataset(records, SplitRatios{}, 8);
  for (const auto& rec : split.train) CHECK(rec.split == SplitPart::train);
  for (const auto& rec : split.validation)
    CHECK(rec.split == SplitPart::validation);
  for (const auto& rec : split.test) CHECK(rec.split == SplitPart::test);
}

TEST_CASE("stratified split preserves the class balance per part") {
  auto records = generate_synthetic(1000, kDefaultAuxPriors, 4);
  auto split = split_dataset(records, SplitRatios{}, 9, true);
  auto positives = [](const std::vector<ClaimRecord>& part) {
    return std::count_if(part.begin(), part.end(),
                         [](const ClaimRecord& r) { return r.check_worthy; });
  };
  const double overall =
      static_cast<double>(positives(records)) / static_cast<double>(records.size());
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    const double rate = static_cast<double>(positives(*part)) /
                        static_cast<double>(part->size());
    CHECK(std::abs(rate - overall) < 0.02);
  }
  CHECK(split.train.size() + split.validation.size() + split.test.size() ==
        records.size());
}

TEST_CASE("split input validation") {
  auto two = generate_synthetic(2, kDefaultAuxPriors, 5);
  CHECK_THROWS_AS(split_dataset(two, SplitRatios{}, 1), ValueError);
  auto ten = generate_synthetic(10, kDefaultAuxPriors, 5);
  CHECK_THROWS_AS(split_dataset(ten, SplitRatios{0.5, 0.5, 0.5}, 1), ValueError);
  CHECK_THROWS_AS(split_dataset(ten, SplitRatios{1.0, 0.0, 0.0}, 1), ValueError);
}

TEST_CASE("manifest round-trip reconstructs the split") {
  auto records = generate_synthetic(40, kDefaultAuxPriors, 6);
  auto split = split_dataset(records, SplitRatios{}, 21);
  auto manifest = manifest_of(split);

  std::ostringstream out;
  save_manifest(manifest, out);
  std::istringstream in(out.str());
  auto loaded = load_manifest(in);
  CHECK(loaded.seed == 21);

  auto rebuilt = apply_manifest(records, loaded);
  CHECK(ids_of(rebuilt.train) == ids_of(split.train));
  CHECK(ids_of(rebuilt.validation) == ids_of(split.validation));
  CHECK(ids_of(rebuilt.test) == ids_of(split.test));
}

TEST_CASE("apply_manifest rejects unknown and missing ids") {
  auto records = generate_synthetic(5, kDefaultAuxPriors, 7);
  auto split = split_dataset(records, SplitRatios{0.6, 0.2, 0.2}, 1);
  auto manifest = manifest_of(split);

  SUBCASE("unknown id") {
    manifest.train.push_back("ghost");
    CHECK_THROWS_AS(apply_manifest(records, manifest), ValueError);
  }

  SUBCASE("id listed twice") {
    manifest.validation.push_back(manifest.train.front());
    CHECK_THROWS_AS(apply_manifest(records, manifest), ValueError);
  }

  SUBCASE("uncovered record") {
    manifest.test.pop_back();
    CHECK_THROWS_AS(apply_manifest(records, manifest), ValueError);
  }
}

TEST_CASE("synthetic label rates track the priors") {
  auto records = generate_synthetic(1000, kDefaultAuxPriors, 11);
  std::array<double, 6> rates{};
  for (const auto& rec : records) {
    REQUIRE(rec.aux.has_value());
    for (std::size_t k = 0; k < 6; ++k) rates[k] += (*rec.aux)[k];
  }
  for (std::size_t k = 0; k < 6; ++k) {
    rates[k] /= 1000.0;
    CHECK(std::abs(rates[k] - kDefaultAuxPriors[k]) <= 0.05);
  }
}

TEST_CASE("synthetic generation validates its inputs") {
  CHECK_THROWS_AS(generate_synthetic(0, kDefaultAuxPriors, 1), ValueError);
  std::array<double, 6> zeros{};
  CHECK_THROWS_AS(generate_synthetic(10, zeros, 1), ValueError);
  std::array<double, 6> ones{1, 1, 1, 1, 1, 1};
  CHECK_THROWS_AS(generate_synthetic(10, ones, 1), ValueError);
  CHECK_THROWS_AS(generate_synthetic(10, kDefaultAuxPriors, 1, 1.5), ValueError);
}

TEST_CASE("a half prior lands near a half empirically") {
  std::array<double, 6> priors{0.5, 0.1, 0.1, 0.1, 0.1, 0.1};
  auto records = generate_synthetic(10000, priors, 17);
  std::size_t yes = 0;
  for (const auto& rec : records) yes += (*rec.aux)[0];
  const double rate = static_cast<double>(yes) / 10000.0;
  CHECK(rate >= 0.45);
  CHECK(rate <= 0.55);
}

TEST_CASE("synthetic generation is bit-deterministic") {
  auto a = generate_synthetic(200, kDefaultAuxPriors, 23);
  auto b = generate_synthetic(200, kDefaultAuxPriors, 23);
  CHECK(serialize_text(a) == serialize_text(b));
  auto c = generate_synthetic(200, kDefaultAuxPriors, 24);
  CHECK(serialize_text(a) != serialize_text(c));
}

TEST_CASE("noise-free synthetic labels satisfy the OR rule") {
  auto records = generate_synthetic(500, kDefaultAuxPriors, 31, 0.0);
  for (const auto& rec : records) {
    int any = 0;
    for (int v : *rec.aux) any |= v;
    CHECK(rec.check_worthy == any);
  }
}

TEST_CASE("noisy synthetic labels flip at roughly the noise rate") {
  auto records = generate_synthetic(5000, kDefaultAuxPriors, 37, 0.1);
  std::size_t flipped = 0;
  for (const auto& rec : records) {
    int any = 0;
    for (int v : *rec.aux) any |= v;
    if (rec.check_worthy != any) ++flipped;
  }
  const double rate = static_cast<double>(flipped) / 5000.0;
  CHECK(rate > 0.05);
  CHECK(rate < 0.15);
}

TEST_CASE("positive labels always put their trigger in the text") {
  auto records = generate_synthetic(300, kDefaultAuxPriors, 41);
  const auto& triggers = synthetic_triggers();
  const auto& guards = synthetic_guards();
  for (const auto& rec : records) {
    for (std::size_t k = 0; k < 6; ++k) {
      if ((*rec.aux)[k] == 1) {
        const std::string bigram = guards[k] + " " + triggers[k];
        CHECK(rec.text.find(bigram) != std::string::npos);
      }
    }
  }
}

TEST_CASE("cohen_kappa reference values") {
  SUBCASE("identical annotations") {
    AnnotationPair pair{{0, 1, 2, 1, 0}, {0, 1, 2, 1, 0}};
    CHECK(cohen_kappa(pair) == doctest::Approx(1.0));
  }

  SUBCASE("eighty percent agreement under uniform binary marginals") {
    AnnotationPair pair{{0, 0, 0, 0, 0, 1, 1, 1, 1, 1},
                        {0, 0, 0, 0, 1, 0, 1, 1, 1, 1}};
    CHECK(cohen_kappa(pair) == doctest::Approx(0.6));
  }

  SUBCASE("independent annotators hover near zero") {
    Rng rng(53);
    AnnotationPair pair;
    for (int i = 0; i < 10000; ++i) {
      pair.labels_a.push_back(rng.bernoulli(0.5) ? 1 : 0);
      pair.labels_b.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    const double kappa = cohen_kappa(pair);
    CHECK(kappa >= -0.05);
    CHECK(kappa <= 0.05);
  }

  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(cohen_kappa(AnnotationPair{{0, 1}, {0}}), ShapeError);
  }

  SUBCASE("empty lists") {
    CHECK_THROWS_AS(cohen_kappa(AnnotationPair{{}, {}}), ValueError);
  }
}

TEST_CASE("cohen_kappa is symmetric and category-name invariant") {
  Rng rng(59);
  AnnotationPair pair;
  for (int i = 0; i < 200; ++i) {
    pair.labels_a.push_back(static_cast<int>(rng.below(3)));
    pair.labels_b.push_back(rng.bernoulli(0.7)
                                ? pair.labels_a.back()
                                : static_cast<int>(rng.below(3)));
  }
  AnnotationPair swapped{pair.labels_b, pair.labels_a};
  CHECK(cohen_kappa(pair) == doctest::Approx(cohen_kappa(swapped)));

  auto rename = [](int c) { return 10 - c; };
  AnnotationPair renamed;
  for (std::size_t i = 0; i < pair.labels_a.size(); ++i) {
    renamed.labels_a.push_back(rename(pair.labels_a[i]));
    renamed.labels_b.push_back(rename(pair.labels_b[i]));
  }
  CHECK(cohen_kappa(pair) == doctest::Approx(cohen_kappa(renamed)));
}

TEST_CASE("class_counts tallies primary and auxiliary labels") {
  const std::string data =
      R"({"id":"a","text":"x","check_worthy":1,"aux":[1,0,0,0,0,0]})"
      "\n"
      R"({"id":"b","text":"y","check_worthy":1,"aux":[1,1,0,0,0,0]})"
      "\n"
      R"({"id":"c","text":"z","check_worthy":0})"
      "\n";
  auto counts = class_counts(parse_text(data));
  CHECK(counts.checkworthy == 2);
  CHECK(counts.non_checkworthy == 1);
  CHECK(counts.aux_yes[0] == 2);
  CHECK(counts.aux_no[0] == 0);
  CHECK(counts.aux_yes[1] == 1);
  CHECK(counts.aux_no[1] == 1);
  // The unannotated record contributes to no auxiliary tally.
  CHECK(counts.aux_yes[0] + counts.aux_no[0] == 2);
}

TEST_CASE("synthetic counts sum to n per label") {
  auto records = generate_synthetic(100, kDefaultAuxPriors, 61);
  auto counts = class_counts(records);
  CHECK(counts.checkworthy + counts.non_checkworthy == 100);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(counts.aux_yes[k] + counts.aux_no[k] == 100);
  }
  auto table = render_counts(counts);
  CHECK(table.find("check_worthy") != std::string::npos);
  CHECK(table.find("L6") != std::string::npos);
}
