#include "checkmate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "checkmate/error.hpp"
#include "checkmate/rng.hpp"

namespace checkmate {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail_parse(std::size_t line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void fail_value(std::size_t line, const std::string& what) {
  throw ValueError("line " + std::to_string(line) + ": " + what);
}

ClaimRecord record_from_json(const ordered_json& obj, std::size_t line) {
  if (!obj.is_object()) fail_parse(line, "expected a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (key != "id" && key != "text" && key != "check_worthy" && key != "aux") {
      fail_parse(line, "unknown field \"" + key + "\"");
    }
  }
  ClaimRecord rec;
  if (!obj.contains("id") || !obj["id"].is_string()) {
    fail_parse(line, "missing or non-string \"id\"");
  }
  rec.id = obj["id"].get<std::string>();
  if (rec.id.empty()) fail_value(line, "empty \"id\"");
  if (!obj.contains("text") || !obj["text"].is_string()) {
    fail_parse(line, "missing or non-string \"text\"");
  }
  rec.text = obj["text"].get<std::string>();
  if (trimmed(rec.text).empty()) fail_value(line, "empty \"text\"");
  if (!obj.contains("check_worthy") || !obj["check_worthy"].is_number_integer()) {
    fail_parse(line, "missing or non-integer \"check_worthy\"");
  }
  const auto cw = obj["check_worthy"].get<std::int64_t>();
  if (cw != 0 && cw != 1) {
    fail_value(line, "\"check_worthy\" must be 0 or 1, got " +
                         std::to_string(cw));
  }
  rec.check_worthy = static_cast<int>(cw);
  if (obj.contains("aux")) {
    const auto& aux = obj["aux"];
    if (!aux.is_array() || aux.size() != kNumAuxLabels) {
      fail_parse(line, "\"aux\" must be an array of six labels");
    }
    LabelSet labels{};
    for (std::size_t k = 0; k < kNumAuxLabels; ++k) {
      if (!aux[k].is_number_integer()) {
        fail_parse(line, "\"aux\" entries must be integers");
      }
      const auto v = aux[k].get<std::int64_t>();
      if (v != 0 && v != 1) {
        fail_value(line, "auxiliary label " + std::to_string(k + 1) +
                             " must be 0 or 1, got " + std::to_string(v));
      }
      labels[k] = static_cast<int>(v);
    }
    rec.aux = labels;
  } else if (rec.check_worthy == 1) {
    fail_value(line, "check-worthy record is missing \"aux\"");
  }
  return rec;
}

ordered_json record_to_json(const ClaimRecord& rec) {
  ordered_json obj;
  obj["id"] = rec.id;
  obj["text"] = rec.text;
  obj["check_worthy"] = rec.check_worthy;
  if (rec.aux) {
    obj["aux"] = *rec.aux;
  }
  return obj;
}

// Floor every part, then hand out the leftover records by descending
// fractional remainder (ties to the earlier part).
std::array<std::size_t, 3> allocate_sizes(std::size_t n, SplitRatios ratios) {
  const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
  for (double x : r) {
    if (x <= 0) throw ValueError("split ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw ValueError("split ratios must sum to 1");
  }
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = r[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(exact);
    frac[i] = exact - static_cast<double>(sizes[i]);
    used += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; used < n; ++i, ++used) sizes[order[i % 3]]++;
  return sizes;
}

DatasetSplit partition(std::vector<ClaimRecord> shuffled, SplitRatios ratios,
                       std::uint64_t seed) {
  const auto sizes = allocate_sizes(shuffled.size(), ratios);
  DatasetSplit split;
  split.seed = seed;
  auto it = shuffled.begin();
  auto take = [&](std::vector<ClaimRecord>& part, std::size_t count,
                  SplitPart tag) {
    part.assign(it, it + static_cast<std::ptrdiff_t>(count));
    it += static_cast<std::ptrdiff_t>(count);
    for (auto& rec : part) rec.split = tag;
  };
  take(split.train, sizes[0], SplitPart::train);
  take(split.validation, sizes[1], SplitPart::validation);
  take(split.test, sizes[2], SplitPart::test);
  return split;
}

}  // namespace

std::string to_string(SplitPart part) {
  switch (part) {
    case SplitPart::train: return "train";
    case SplitPart::validation: return "validation";
    case SplitPart::test: return "test";
  }
  throw ValueError("unknown split part");
}

std::vector<ClaimRecord> parse_records(std::istream& in) {
  std::vector<ClaimRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trimmed(line).empty()) continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_parse(lineno, std::string("invalid JSON: ") + e.what());
    }
    ClaimRecord rec = record_from_json(obj, lineno);
    if (!seen.insert(rec.id).second) {
      fail_parse(lineno, "duplicate id \"" + rec.id + "\"");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ClaimRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());
  return parse_records(in);
}

void serialize_records(const std::vector<ClaimRecord>& records,
                       std::ostream& out) {
  for (const auto& rec : records) {
    out << record_to_json(rec).dump() << '\n';
  }
}

void save_records(const std::vector<ClaimRecord>& records,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file: " + path.string());
  serialize_records(records, out);
}

DatasetSplit split_dataset(const std::vector<ClaimRecord>& records,
                           SplitRatios ratios, std::uint64_t seed,
                           bool stratified) {
  if (records.size() < 3) {
    throw ValueError("need at least 3 records to split, got " +
                     std::to_string(records.size()));
  }
  if (!stratified) {
    std::vector<ClaimRecord> shuffled = records;
    Rng rng(seed);
    rng.shuffle(shuffled);
    return partition(std::move(shuffled), ratios, seed);
  }
  DatasetSplit split;
  split.seed = seed;
  for (int label = 0; label <= 1; ++label) {
    std::vector<ClaimRecord> stratum;
    for (const auto& rec : records) {
      if (rec.check_worthy == label) stratum.push_back(rec);
    }
    if (stratum.empty()) continue;
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(label) + 1));
    rng.shuffle(stratum);
    DatasetSplit part = partition(std::move(stratum), ratios, seed);
    auto append = [](std::vector<ClaimRecord>& dst,
                     std::vector<ClaimRecord>& src) {
      dst.insert(dst.end(), std::make_move_iterator(src.begin()),
                 std::make_move_iterator(src.end()));
    };
    append(split.train, part.train);
    append(split.validation, part.validation);
    append(split.test, part.test);
  }
  return split;
}

SplitManifest manifest_of(const DatasetSplit& split) {
  SplitManifest manifest;
  manifest.seed = split.seed;
  auto ids = [](const std::vector<ClaimRecord>& part) {
    std::vector<std::string> out;
    out.reserve(part.size());
    for (const auto& rec : part) out.push_back(rec.id);
    return out;
  };
  manifest.train = ids(split.train);
  manifest.validation = ids(split.validation);
  manifest.test = ids(split.test);
  return manifest;
}

void save_manifest(const SplitManifest& manifest, std::ostream& out) {
  ordered_json obj;
  obj["seed"] = manifest.seed;
  obj["train"] = manifest.train;
  obj["validation"] = manifest.validation;
  obj["test"] = manifest.test;
  out << obj.dump(2) << '\n';
}

void save_manifest(const SplitManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  save_manifest(manifest, out);
}

SplitManifest load_manifest(std::istream& in) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid manifest JSON: ") + e.what());
  }
  if (!obj.is_object() || !obj.contains("seed") || !obj.contains("train") ||
      !obj.contains("validation") || !obj.contains("test")) {
    throw ParseError("manifest must have fields seed/train/validation/test");
  }
  SplitManifest manifest;
  if (!obj["seed"].is_number_integer()) {
    throw ParseError("manifest \"seed\" must be an integer");
  }
  manifest.seed = obj["seed"].get<std::uint64_t>();
  auto read_ids = [&](const char* key) {
    const auto& arr = obj[key];
    if (!arr.is_array()) {
      throw ParseError(std::string("manifest \"") + key +
                       "\" must be an array of ids");
    }
    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
      if (!v.is_string()) {
        throw ParseError(std::string("manifest \"") + key +
                         "\" must contain only strings");
      }
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  manifest.train = read_ids("train");
  manifest.validation = read_ids("validation");
  manifest.test = read_ids("test");
  return manifest;
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  return load_manifest(in);
}

DatasetSplit apply_manifest(const std::vector<ClaimRecord>& records,
                            const SplitManifest& manifest) {
  std::unordered_map<std::string, const ClaimRecord*> by_id;
  for (const auto& rec : records) {
    if (!by_id.emplace(rec.id, &rec).second) {
      throw ValueError("duplicate record id \"" + rec.id + "\"");
    }
  }
  std::unordered_set<std::string> claimed;
  auto resolve = [&](const std::vector<std::string>& ids, SplitPart tag) {
    std::vector<ClaimRecord> part;
    part.reserve(ids.size());
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw ValueError("manifest id \"" + id + "\" not in dataset");
      }
      if (!claimed.insert(id).second) {
        throw ValueError("manifest lists id \"" + id + "\" twice");
      }
      part.push_back(*it->second);
      part.back().split = tag;
    }
    return part;
  };
  DatasetSplit split;
  split.seed = manifest.seed;
  split.train = resolve(manifest.train, SplitPart::train);
  split.validation = resolve(manifest.validation, SplitPart::validation);
  split.test = resolve(manifest.test, SplitPart::test);
  if (claimed.size() != records.size()) {
    throw ValueError("manifest covers " + std::to_string(claimed.size()) +
                     " of " + std::to_string(records.size()) + " records");
  }
  return split;
}

namespace {

const std::array<std::string, 6> kTriggers{"virus",    "cure", "vaccine",
                                           "lockdown", "hoax", "bleach"};
const std::array<std::string, 6> kGuards{"deadly", "miracle", "secret",
                                         "total",  "viral",   "toxic"};
const std::array<std::string, 6> kDecoyAdjectives{
    "harmless", "possible", "approved", "partial", "old", "diluted"};
const std::array<std::string, 6> kNeutralNouns{
    "weather", "traffic", "football", "concert", "garden", "recipe"};
const std::array<std::string, 20> kFillers{
    "people", "say",    "the",    "report", "today",   "news",   "about",
    "claims", "that",   "expert", "warn",   "online",  "post",   "share",
    "read",   "new",    "update", "story",  "details", "source"};
const std::array<std::string, 4> kEmoticons{":)", ":(", ":-)", ":/"};

// Decoy rates: how often a negative label still emits one half of its
// bigram. High enough that single words stay ambiguous, low enough that
// bag-of-words baselines keep a usable signal.
constexpr double kDecoyAdjectiveRate = 0.35;
constexpr double kGuardNeutralRate = 0.35;

}  // namespace

const std::array<std::string, 6>& synthetic_triggers() { return kTriggers; }
const std::array<std::string, 6>& synthetic_guards() { return kGuards; }

std::vector<ClaimRecord> generate_synthetic(std::size_t n,
                                            const std::array<double, 6>& priors,
                                            std::uint64_t seed, double noise) {
  if (n < 1) throw ValueError("synthetic generation needs n >= 1");
  for (double p : priors) {
    if (!(p > 0.0 && p < 1.0)) {
      throw ValueError("synthetic priors must lie strictly inside (0, 1)");
    }
  }
  if (!(noise >= 0.0 && noise < 1.0)) {
    throw ValueError("label noise must lie in [0, 1)");
  }
  Rng rng(seed);
  std::vector<ClaimRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabelSet labels{};
    bool any = false;
    for (std::size_t k = 0; k < kNumAuxLabels; ++k) {
      labels[k] = rng.bernoulli(priors[k]) ? 1 : 0;
      any = any || labels[k] == 1;
    }
    int cw = any ? 1 : 0;
    if (noise > 0.0 && rng.bernoulli(noise)) cw = 1 - cw;

    std::vector<std::string> chunks;
    const std::size_t filler_count = 3 + rng.below(3);
    for (std::size_t f = 0; f < filler_count; ++f) {
      chunks.push_back(kFillers[rng.below(kFillers.size())]);
    }
    for (std::size_t k = 0; k < kNumAuxLabels; ++k) {
      if (labels[k] == 1) {
        chunks.push_back(kGuards[k] + " " + kTriggers[k]);
      } else {
        if (rng.bernoulli(kDecoyAdjectiveRate)) {
          chunks.push_back(kDecoyAdjectives[k] + " " + kTriggers[k]);
        }
        if (rng.bernoulli(kGuardNeutralRate)) {
          chunks.push_back(kGuards[k] + " " +
                           kNeutralNouns[rng.below(kNeutralNouns.size())]);
        }
      }
    }
    rng.shuffle(chunks);

    std::string text;
    if (rng.bernoulli(0.15)) text += "@newsbot ";
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      if (c) text += ' ';
      text += chunks[c];
    }
    if (rng.bernoulli(0.10)) text += " #facts";
    if (rng.bernoulli(0.15)) text += " https://t.co/item";
    if (rng.bernoulli(0.25)) text += " " + kEmoticons[rng.below(kEmoticons.size())];

    ClaimRecord rec;
    std::ostringstream id;
    id << "syn-" << std::setw(6) << std::setfill('0') << i;
    rec.id = id.str();
    rec.text = std::move(text);
    rec.check_worthy = cw;
    rec.aux = labels;
    records.push_back(std::move(rec));
  }
  return records;
}

double cohen_kappa(const AnnotationPair& pair) {
  if (pair.labels_a.size() != pair.labels_b.size()) {
    throw ShapeError("annotation lists differ in length: " +
                     std::to_string(pair.labels_a.size()) + " vs " +
                     std::to_string(pair.labels_b.size()));
  }
  const std::size_t n = pair.labels_a.size();
  if (n == 0) throw ValueError("annotation lists must be non-empty");
  std::map<int, std::size_t> count_a, count_b;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    count_a[pair.labels_a[i]]++;
    count_b[pair.labels_b[i]]++;
    if (pair.labels_a[i] == pair.labels_b[i]) ++agree;
  }
  const double po = static_cast<double>(agree) / static_cast<double>(n);
  double pe = 0;
  for (const auto& [category, ca] : count_a) {
    auto it = count_b.find(category);
    if (it == count_b.end()) continue;
    pe += (static_cast<double>(ca) / static_cast<double>(n)) *
          (static_cast<double>(it->second) / static_cast<double>(n));
  }
  if (pe >= 1.0 - 1e-12) return 1.0;
  return (po - pe) / (1.0 - pe);
}

ClassCounts class_counts(const std::vector<ClaimRecord>& records) {
  ClassCounts counts;
  for (const auto& rec : records) {
    if (rec.check_worthy == 1) {
      counts.checkworthy++;
    } else {
      counts.non_checkworthy++;
    }
    if (rec.aux) {
      for (std::size_t k = 0; k < kNumAuxLabels; ++k) {
        if ((*rec.aux)[k] == 1) {
          counts.aux_yes[k]++;
        } else {
          counts.aux_no[k]++;
        }
      }
    }
  }
  return counts;
}

std::string render_counts(const ClassCounts& counts) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "label" << std::right << std::setw(8)
      << "yes" << std::setw(8) << "no" << '\n';
  out << std::left << std::setw(14) << "check_worthy" << std::right
      << std::setw(8) << counts.checkworthy << std::setw(8)
      << counts.non_checkworthy << '\n';
  for (std::size_t k = 0; k < kNumAuxLabels; ++k) {
    out << std::left << std::setw(14) << ("L" + std::to_string(k + 1))
        << std::right << std::setw(8) << counts.aux_yes[k] << std::setw(8)
        << counts.aux_no[k] << '\n';
  }
  return out.str();
}

}  // namespace checkmate
