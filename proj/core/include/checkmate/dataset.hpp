#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace checkmate {

// One binary answer per auxiliary question, in label order L1..L6.
using LabelSet = std::array<int, 6>;

inline constexpr std::size_t kNumAuxLabels = 6;

enum class SplitPart { train, validation, test };

std::string to_string(SplitPart part);

struct ClaimRecord {
  std::string id;
  std::string text;
  int check_worthy = 0;
  // Absent for unannotated records; such records are masked out of every
  // auxiliary loss term but still contribute to the primary loss.
  std::optional<LabelSet> aux;
  std::optional<SplitPart> split;
};

struct DatasetSplit {
  std::vector<ClaimRecord> train;
  std::vector<ClaimRecord> validation;
  std::vector<ClaimRecord> test;
  std::uint64_t seed = 0;
};

struct AnnotationPair {
  std::vector<int> labels_a;
  std::vector<int> labels_b;
};

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct ClassCounts {
  std::size_t checkworthy = 0;
  std::size_t non_checkworthy = 0;
  // Counted over records that carry auxiliary labels.
  std::array<std::size_t, 6> aux_yes{};
  std::array<std::size_t, 6> aux_no{};
};

// One JSON object per line, fields: "id", "text", "check_worthy", "aux".
// Every error message carries the 1-based line number.
std::vector<ClaimRecord> parse_records(std::istream& in);
std::vector<ClaimRecord> load_records(const std::filesystem::path& path);
void serialize_records(const std::vector<ClaimRecord>& records,
                       std::ostream& out);
void save_records(const std::vector<ClaimRecord>& records,
                  const std::filesystem::path& path);

// Deterministic shuffle under the seed, then a contiguous partition whose
// part sizes follow the ratios by largest remainder. The stratified mode
// splits each primary class separately with the same ratios.
DatasetSplit split_dataset(const std::vector<ClaimRecord>& records,
                           SplitRatios ratios, std::uint64_t seed,
                           bool stratified = false);

SplitManifest manifest_of(const DatasetSplit& split);
void save_manifest(const SplitManifest& manifest, std::ostream& out);
void save_manifest(const SplitManifest& manifest,
                   const std::filesystem::path& path);
SplitManifest load_manifest(std::istream& in);
SplitManifest load_manifest(const std::filesystem::path& path);
// Reassembles a split from a manifest; every manifest id must resolve and
// every record must be claimed by exactly one part.
DatasetSplit apply_manifest(const std::vector<ClaimRecord>& records,
                            const SplitManifest& manifest);

// Default per-label positive rates for synthetic fixtures.
inline constexpr std::array<double, 6> kDefaultAuxPriors{
    0.564, 0.612, 0.702, 0.408, 0.501, 0.413};

// Label-k positive texts contain a guard-adjective + trigger-noun bigram;
// negatives may contain either word alone as a decoy, so bag-of-words
// features stay informative but word order carries the exact signal.
// check_worthy is the OR of the six labels, flipped with probability
// `noise`.
std::vector<ClaimRecord> generate_synthetic(std::size_t n,
                                            const std::array<double, 6>& priors,
                                            std::uint64_t seed,
                                            double noise = 0.1);

const std::array<std::string, 6>& synthetic_triggers();
const std::array<std::string, 6>& synthetic_guards();

// kappa = (p_o - p_e) / (1 - p_e); returns 1.0 for total agreement even
// when chance agreement is also total.
double cohen_kappa(const AnnotationPair& pair);

ClassCounts class_counts(const std::vector<ClaimRecord>& records);
std::string render_counts(const ClassCounts& counts);

}  // namespace checkmate
