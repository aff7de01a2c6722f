#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "checkmate/training.hpp"

namespace checkmate {

inline constexpr int kCheckpointFormatVersion = 1;

// One saved tensor. Values are 32-bit floats regardless of the training
// precision, so the on-disk artifact is a fixed contract.
struct CheckpointParam {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const CheckpointParam&) const = default;
};

// Self-contained trained-model artifact: configuration, vocabulary,
// frozen annotators, every learned parameter, and the tail of the
// training log for provenance.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  TrainConfig config;
  Vocab vocab;
  std::string tagger_blob;
  std::string parser_blob;
  std::vector<CheckpointParam> params;
  std::vector<EpochLog> log_tail;
};

// Package trained parameters (narrowed to float32) together with
// everything needed to run them later.
template <class T>
Checkpoint make_checkpoint(const TrainConfig& config, const Vocab& vocab,
                           const LinetModels& models,
                           const ModelParams<T>& params,
                           std::vector<EpochLog> log_tail = {});

// Rebuild the runnable pieces. Every parameter name and shape is checked
// against the geometry implied by the stored config; ShapeError on any
// mismatch.
template <class T>
ModelParams<T> params_from_checkpoint(const Checkpoint& ckpt);
LinetModels linet_from_checkpoint(const Checkpoint& ckpt);

// Binary container: an 8-byte little-endian header length, a JSON header
// (version, config, vocabulary, annotator blobs, parameter names, shapes
// and byte offsets, log tail, payload checksum), then the raw
// little-endian float32 payload. load(save(c)) reproduces every float
// bit-exactly. IoError on a version mismatch (naming both versions),
// truncation, or a checksum failure.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Training configuration as a JSON object; parsing it back reproduces
// the configuration exactly.
std::string train_config_json(const TrainConfig& config);
// Absent fields keep their defaults; unknown keys raise ParseError so a
// misspelled setting cannot silently fall back. Does not run validate().
TrainConfig parse_train_config(std::istream& in);
TrainConfig parse_train_config_text(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

extern template Checkpoint make_checkpoint<float>(
    const TrainConfig&, const Vocab&, const LinetModels&,
    const ModelParams<float>&, std::vector<EpochLog>);
extern template Checkpoint make_checkpoint<double>(
    const TrainConfig&, const Vocab&, const LinetModels&,
    const ModelParams<double>&, std::vector<EpochLog>);
extern template ModelParams<float> params_from_checkpoint<float>(
    const Checkpoint&);
extern template ModelParams<double> params_from_checkpoint<double>(
    const Checkpoint&);

}  // namespace checkmate
