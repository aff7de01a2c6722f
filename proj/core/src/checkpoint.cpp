#include "checkmate/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "checkmate/error.hpp"
#include "checkmate/rng.hpp"
#include "json.hpp"

namespace checkmate {

namespace {

using nlohmann::ordered_json;

std::uint64_t fnv1a_bytes(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void put_u64_le(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    int c = in.get();
    if (c == EOF) throw IoError("checkpoint truncated: header length cut short");
    v |= std::uint64_t(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void append_f32_le(std::string& out, float f) {
  auto u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

float read_f32_le(const std::string& bytes, std::size_t offset) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) {
    u |= std::uint32_t(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return std::bit_cast<float>(u);
}

ordered_json loss_weights_json(const LossWeights& w) {
  return {{"primary", w.primary}, {"aux", w.aux}, {"attention", w.attention}};
}

ordered_json encoder_json(const EncoderConfig& e) {
  return {{"layers", e.layers},   {"d_model", e.d_model},
          {"ff_width", e.ff_width}, {"max_len", e.max_len},
          {"heads", e.heads},     {"dropout", e.dropout}};
}

ordered_json linet_json(const LinetConfig& l) {
  return {{"pos_dim", l.pos_dim},
          {"rel_dim", l.rel_dim},
          {"head_pos_dim", l.head_pos_dim}};
}

ordered_json config_json_obj(const TrainConfig& c) {
  ordered_json obj;
  obj["seed"] = c.seed;
  obj["epochs"] = c.epochs;
  obj["batch_size"] = c.batch_size;
  obj["learning_rate"] = c.learning_rate;
  obj["optimizer"] = to_string(c.optimizer);
  obj["adam_beta1"] = c.adam_beta1;
  obj["adam_beta2"] = c.adam_beta2;
  obj["adam_eps"] = c.adam_eps;
  obj["patience"] = c.patience;
  obj["loss_weights"] = loss_weights_json(c.loss_weights);
  obj["encoder"] = encoder_json(c.encoder);
  obj["linet"] = linet_json(c.linet);
  obj["fusion_hidden"] = c.fusion_hidden;
  return obj;
}

// Applies `obj` onto `target`, complaining about keys it does not know.
// `known` lists the keys this level accepts; nested objects recurse.
void reject_unknown(const ordered_json& obj,
                    std::initializer_list<const char*> known,
                    const std::string& scope) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) {
      throw ParseError("unknown config key: " +
                       (scope.empty() ? it.key() : scope + "." + it.key()));
    }
  }
}

TrainConfig config_from_json_obj(const ordered_json& obj) {
  if (!obj.is_object()) throw ParseError("config must be a JSON object");
  reject_unknown(obj,
                 {"seed", "epochs", "batch_size", "learning_rate", "optimizer",
                  "adam_beta1", "adam_beta2", "adam_eps", "patience",
                  "loss_weights", "encoder", "linet", "fusion_hidden"},
                 "");
  TrainConfig c;
  if (obj.contains("seed")) c.seed = obj["seed"].get<std::uint64_t>();
  if (obj.contains("epochs")) c.epochs = obj["epochs"].get<std::size_t>();
  if (obj.contains("batch_size"))
    c.batch_size = obj["batch_size"].get<std::size_t>();
  if (obj.contains("learning_rate"))
    c.learning_rate = obj["learning_rate"].get<double>();
  if (obj.contains("optimizer"))
    c.optimizer = optimizer_kind_of(obj["optimizer"].get<std::string>());
  if (obj.contains("adam_beta1")) c.adam_beta1 = obj["adam_beta1"].get<double>();
  if (obj.contains("adam_beta2")) c.adam_beta2 = obj["adam_beta2"].get<double>();
  if (obj.contains("adam_eps")) c.adam_eps = obj["adam_eps"].get<double>();
  if (obj.contains("patience")) c.patience = obj["patience"].get<std::size_t>();
  if (obj.contains("loss_weights")) {
    const auto& w = obj["loss_weights"];
    reject_unknown(w, {"primary", "aux", "attention"}, "loss_weights");
    if (w.contains("primary"))
      c.loss_weights.primary = w["primary"].get<double>();
    if (w.contains("aux")) c.loss_weights.aux = w["aux"].get<double>();
    if (w.contains("attention"))
      c.loss_weights.attention = w["attention"].get<double>();
  }
  if (obj.contains("encoder")) {
    const auto& e = obj["encoder"];
    reject_unknown(
        e, {"layers", "d_model", "ff_width", "max_len", "heads", "dropout"},
        "encoder");
    if (e.contains("layers")) c.encoder.layers = e["layers"].get<std::size_t>();
    if (e.contains("d_model"))
      c.encoder.d_model = e["d_model"].get<std::size_t>();
    if (e.contains("ff_width"))
      c.encoder.ff_width = e["ff_width"].get<std::size_t>();
    if (e.contains("max_len"))
      c.encoder.max_len = e["max_len"].get<std::size_t>();
    if (e.contains("heads")) c.encoder.heads = e["heads"].get<std::size_t>();
    if (e.contains("dropout")) c.encoder.dropout = e["dropout"].get<double>();
  }
  if (obj.contains("linet")) {
    const auto& l = obj["linet"];
    reject_unknown(l, {"pos_dim", "rel_dim", "head_pos_dim"}, "linet");
    if (l.contains("pos_dim")) c.linet.pos_dim = l["pos_dim"].get<std::size_t>();
    if (l.contains("rel_dim")) c.linet.rel_dim = l["rel_dim"].get<std::size_t>();
    if (l.contains("head_pos_dim"))
      c.linet.head_pos_dim = l["head_pos_dim"].get<std::size_t>();
  }
  if (obj.contains("fusion_hidden"))
    c.fusion_hidden = obj["fusion_hidden"].get<std::size_t>();
  return c;
}

ordered_json log_json(const EpochLog& e) {
  return ordered_json::parse(to_jsonl(e));
}

EpochLog log_from_json(const ordered_json& obj) {
  EpochLog e;
  e.epoch = obj.at("epoch").get<std::size_t>();
  e.train_loss = obj.at("train_loss").get<double>();
  e.val_weighted_f1 = obj.at("val_weighted_f1").get<double>();
  e.best_so_far = obj.at("best_so_far").get<bool>();
  return e;
}

}  // namespace

std::string train_config_json(const TrainConfig& config) {
  return config_json_obj(config).dump(2) + "\n";
}

TrainConfig parse_train_config(std::istream& in) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json_obj(obj);
}

TrainConfig parse_train_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_train_config(in);
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  return parse_train_config(in);
}

template <class T>
Checkpoint make_checkpoint(const TrainConfig& config, const Vocab& vocab,
                           const LinetModels& models,
                           const ModelParams<T>& params,
                           std::vector<EpochLog> log_tail) {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.vocab = vocab;
  {
    std::ostringstream out;
    models.tagger.save(out);
    ckpt.tagger_blob = out.str();
  }
  {
    std::ostringstream out;
    models.parser.save(out);
    ckpt.parser_blob = out.str();
  }
  for (const auto& [name, tensor] : params.named_params()) {
    CheckpointParam entry;
    entry.name = name;
    entry.shape = tensor.shape();
    auto vals = tensor.values();
    entry.values.reserve(vals.size());
    for (T v : vals) entry.values.push_back(static_cast<float>(v));
    ckpt.params.push_back(std::move(entry));
  }
  ckpt.log_tail = std::move(log_tail);
  return ckpt;
}

template <class T>
ModelParams<T> params_from_checkpoint(const Checkpoint& ckpt) {
  Rng rng(0);  // layout only; every value is overwritten below
  auto params = ModelParams<T>::init(ckpt.config, ckpt.vocab.size(), rng);
  auto named = params.named_params();
  if (named.size() != ckpt.params.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                     " parameters, config geometry needs " +
                     std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, tensor] = named[i];
    const auto& entry = ckpt.params[i];
    if (entry.name != name) {
      throw ShapeError("checkpoint parameter " + std::to_string(i) + " is '" +
                       entry.name + "', expected '" + name + "'");
    }
    if (entry.shape != tensor.shape() ||
        entry.values.size() != tensor.values().size()) {
      throw ShapeError("checkpoint parameter '" + name +
                       "' has shape " + shape_str(entry.shape) +
                       ", config geometry needs " + shape_str(tensor.shape()));
    }
    auto out = tensor.values();
    for (std::size_t j = 0; j < entry.values.size(); ++j) {
      out[j] = static_cast<T>(entry.values[j]);
    }
  }
  return params;
}

LinetModels linet_from_checkpoint(const Checkpoint& ckpt) {
  LinetModels models;
  {
    std::istringstream in(ckpt.tagger_blob);
    models.tagger = PosTagger::load(in);
  }
  {
    std::istringstream in(ckpt.parser_blob);
    models.parser = DependencyParser::load(in);
  }
  return models;
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::string payload;
  ordered_json param_index = ordered_json::array();
  for (const auto& entry : ckpt.params) {
    ordered_json row;
    row["name"] = entry.name;
    row["shape"] = entry.shape;
    row["offset"] = payload.size();
    for (float v : entry.values) append_f32_le(payload, v);
    param_index.push_back(std::move(row));
  }

  ordered_json header;
  header["format_version"] = ckpt.format_version;
  header["config"] = config_json_obj(ckpt.config);
  {
    std::ostringstream vout;
    ckpt.vocab.save(vout);
    header["vocab"] = vout.str();
  }
  header["tagger"] = ckpt.tagger_blob;
  header["parser"] = ckpt.parser_blob;
  header["params"] = std::move(param_index);
  ordered_json tail = ordered_json::array();
  for (const auto& e : ckpt.log_tail) tail.push_back(log_json(e));
  header["log_tail"] = std::move(tail);
  header["checksum"] = hex64(fnv1a_bytes(payload));

  std::string header_text = header.dump();
  put_u64_le(out, header_text.size());
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::uint64_t header_len = get_u64_le(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (std::size_t(in.gcount()) != header_len) {
    throw IoError("checkpoint truncated: header cut short");
  }
  ordered_json header;
  try {
    header = ordered_json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header is not valid JSON: ") +
                  e.what());
  }

  Checkpoint ckpt;
  ckpt.format_version = header.at("format_version").get<int>();
  if (ckpt.format_version != kCheckpointFormatVersion) {
    throw IoError("checkpoint format version " +
                  std::to_string(ckpt.format_version) +
                  " is not supported; this build reads version " +
                  std::to_string(kCheckpointFormatVersion));
  }
  ckpt.config = config_from_json_obj(header.at("config"));
  {
    std::istringstream vin(header.at("vocab").get<std::string>());
    ckpt.vocab = Vocab::load(vin);
  }
  ckpt.tagger_blob = header.at("tagger").get<std::string>();
  ckpt.parser_blob = header.at("parser").get<std::string>();
  for (const auto& row : header.at("log_tail")) {
    ckpt.log_tail.push_back(log_from_json(row));
  }

  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::string stored = header.at("checksum").get<std::string>();
  std::string computed = hex64(fnv1a_bytes(payload));
  if (stored != computed) {
    throw IoError("checkpoint checksum mismatch: header says " + stored +
                  ", payload hashes to " + computed);
  }

  for (const auto& row : header.at("params")) {
    CheckpointParam entry;
    entry.name = row.at("name").get<std::string>();
    entry.shape = row.at("shape").get<Shape>();
    std::size_t offset = row.at("offset").get<std::size_t>();
    std::size_t count = 1;
    for (std::size_t d : entry.shape) count *= d;
    if (offset + 4 * count > payload.size()) {
      throw IoError("checkpoint truncated: parameter '" + entry.name +
                    "' runs past the payload");
    }
    entry.values.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
      entry.values.push_back(read_f32_le(payload, offset + 4 * j));
    }
    ckpt.params.push_back(std::move(entry));
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  return load_checkpoint(in);
}

template Checkpoint make_checkpoint<float>(const TrainConfig&, const Vocab&,
                                           const LinetModels&,
                                           const ModelParams<float>&,
                                           std::vector<EpochLog>);
template Checkpoint make_checkpoint<double>(const TrainConfig&, const Vocab&,
                                            const LinetModels&,
                                            const ModelParams<double>&,
                                            std::vector<EpochLog>);
template ModelParams<float> params_from_checkpoint<float>(const Checkpoint&);
template ModelParams<double> params_from_checkpoint<double>(const Checkpoint&);

}  // namespace checkmate
