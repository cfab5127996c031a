// Copyright 2026 The jepamon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "jepamon/jepa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "jepamon/errors.hpp"

namespace jepamon::jepa {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (!(ema_decay > 0.0 && ema_decay <= 1.0)) throw ConfigError("train: ema_decay must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  MaskingConfig{n_masked}.validate();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},         {"learning_rate", c.learning_rate},
           {"ema_decay", c.ema_decay},   {"batch_size", c.batch_size},
           {"n_masked", c.n_masked},     {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  const json ref = TrainConfig{};
  for (const auto& [key, value] : j.items()) {
    if (!ref.contains(key)) throw ConfigError("train: unknown key '" + key + "'");
  }
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.n_masked = j.value("n_masked", c.n_masked);
  c.seed = j.value("seed", c.seed);
}

// ------------------------------------------------------------------ Model

JepaModel::JepaModel(const EncoderConfig& encoder, const PredictorConfig& predictor,
                     std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x1417});
  context = ObjectEncoder(encoder, rng);
  this->predictor = Predictor(encoder.embed_dim, predictor, rng);
  target = context;
}

nn::ParameterSet JepaModel::trainable() {
  nn::ParameterSet set = context.parameters();
  set.append(predictor.parameters());
  return set;
}

void JepaModel::update_ema(double decay) {
  const nn::ParameterSet ctx = context.parameters();
  const nn::ParameterSet tgt = target.parameters();
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    tgt[i].value = decay * tgt[i].value + (1.0 - decay) * ctx[i].value;
  }
}

// --------------------------------------------------------------- Training

namespace {

struct PackedBatch {
  Matrix masked;
  Matrix unmasked;
  nn::Segments segments;
  std::vector<std::vector<int>> indices;
};

PackedBatch pack(std::span<const MaskedSample> batch) {
  PackedBatch p;
  std::vector<int> lengths;
  int rows = 0;
  for (const MaskedSample& s : batch) {
    lengths.push_back(static_cast<int>(s.masked.rows()));
    rows += lengths.back();
  }
  p.segments = nn::Segments::from_lengths(lengths);
  const int cols = kNumFeatures + 1;
  p.masked.resize(rows, cols);
  p.unmasked.resize(rows, cols);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    p.masked.middleRows(p.segments.offset[i], lengths[i]) = batch[i].masked;
    p.unmasked.middleRows(p.segments.offset[i], lengths[i]) = batch[i].unmasked;
    p.indices.push_back(batch[i].indices);
  }
  return p;
}

Matrix gather_targets(const Matrix& tokens, const PackedBatch& p) {
  int n = 0;
  for (const auto& idx : p.indices) n += static_cast<int>(idx.size());
  Matrix out(n, tokens.cols());
  int r = 0;
  for (std::size_t s = 0; s < p.indices.size(); ++s) {
    for (int t : p.indices[s]) out.row(r++) = tokens.row(p.segments.offset[s] + t);
  }
  return out;
}

}  // namespace

double jepa_loss(JepaModel& model, std::span<const MaskedSample> batch, bool backward) {
  if (batch.empty()) throw Error("jepa_loss: empty batch");
  const PackedBatch p = pack(batch);

  // Target branch: forward only, no caches, no gradient buffers.
  const Matrix targets = gather_targets(model.target.forward(p.unmasked, p.segments), p);

  EncoderCache enc_cache;
  PredictorCache pred_cache;
  const Matrix context = model.context.forward(p.masked, p.segments, backward ? &enc_cache : nullptr);
  const Matrix predicted =
      model.predictor.forward(context, p.segments, p.indices, backward ? &pred_cache : nullptr);
  nn::LossResult loss = nn::l1_loss(predicted, targets);
  if (backward) {
    model.trainable().zero_grad();
    const Matrix dcontext = model.predictor.backward(pred_cache, p.segments, p.indices, loss.grad);
    model.context.backward(enc_cache, p.segments, dcontext);
  }
  return loss.loss;
}

double training_step(JepaModel& model, nn::AdamState& adam, std::span<const FeatureMatrix> batch,
                     const TrainConfig& config, Rng& rng) {
  std::vector<MaskedSample> samples;
  samples.reserve(batch.size());
  for (const FeatureMatrix& f : batch) samples.push_back(mask(f, config.n_masked, rng));
  const double loss = jepa_loss(model, samples, true);
  if (!std::isfinite(loss)) {
    throw Error("training step: non-finite loss (" + std::to_string(loss) + ") at optimizer step " +
                std::to_string(adam.step + 1));
  }
  adam.learning_rate = config.learning_rate;
  nn::adam_step(model.trainable(), adam);
  model.update_ema(config.ema_decay);
  return loss;
}

Checkpoint init_checkpoint(std::span<const ObjectTrack> train_tracks, const TrainConfig& train,
                           const EncoderConfig& encoder, const PredictorConfig& predictor) {
  train.validate();
  encoder.validate();
  predictor.validate(encoder.embed_dim);
  if (encoder.input_dim != kNumFeatures + 1) {
    throw ConfigError("encoder: input_dim must be 5 (four features plus mask bit)");
  }
  Checkpoint c;
  c.encoder = encoder;
  c.predictor = predictor;
  c.train = train;
  c.stats = fit_stats(train_tracks);
  c.model = JepaModel(encoder, predictor, train.seed);
  c.adam.learning_rate = train.learning_rate;
  return c;
}

namespace {

constexpr std::uint64_t kEpochStream = 0xe90c;
constexpr std::uint64_t kInitialLossStream = 0x1a17;

std::vector<FeatureMatrix> prepare(std::span<const ObjectTrack> tracks, const NormStats& stats) {
  std::vector<FeatureMatrix> out;
  out.reserve(tracks.size());
  for (const ObjectTrack& t : tracks) out.push_back(standardize(to_feature_matrix(t), stats));
  return out;
}

double mean_loss(JepaModel& model, const std::vector<FeatureMatrix>& data, int batch_size,
                 int n_masked, Rng& rng) {
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<MaskedSample> samples;
    for (std::size_t i = start; i < end; ++i) samples.push_back(mask(data[i], n_masked, rng));
    total += jepa_loss(model, samples, false) * static_cast<double>(end - start);
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

double evaluate_loss(Checkpoint& checkpoint, std::span<const ObjectTrack> tracks,
                     std::uint64_t seed) {
  if (tracks.empty()) throw Error("evaluate_loss: no tracks");
  Rng rng(seed);
  return mean_loss(checkpoint.model, prepare(tracks, checkpoint.stats), checkpoint.train.batch_size,
                   checkpoint.train.n_masked, rng);
}

void train(Checkpoint& checkpoint, std::span<const ObjectTrack> train_tracks,
           const std::function<void(int, double)>& on_epoch) {
  const TrainConfig& cfg = checkpoint.train;
  cfg.validate();
  if (train_tracks.empty()) throw Error("train: empty train set");
  const std::vector<FeatureMatrix> data = prepare(train_tracks, checkpoint.stats);

  if (checkpoint.epochs_done == 0 && checkpoint.epoch_losses.empty()) {
    Rng rng = make_rng(cfg.seed, {kInitialLossStream});
    checkpoint.initial_loss = mean_loss(checkpoint.model, data, cfg.batch_size, cfg.n_masked, rng);
  }

  std::vector<std::size_t> order(data.size());
  std::vector<FeatureMatrix> batch;
  for (int epoch = checkpoint.epochs_done; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, {kEpochStream, static_cast<std::uint64_t>(epoch)});
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      total += training_step(checkpoint.model, checkpoint.adam, batch, cfg, rng) *
               static_cast<double>(end - start);
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    checkpoint.epoch_losses.push_back(epoch_loss);
    checkpoint.epochs_done = epoch + 1;
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
}

// ------------------------------------------------------------ Persistence

namespace {

// ParameterSet hands out mutable pointers; the serializers below only read.
JepaModel& mutable_model(const Checkpoint& c) { return const_cast<JepaModel&>(c.model); }

std::vector<nn::NamedTensor> model_tensors(const Checkpoint& c) {
  std::vector<nn::NamedTensor> out;
  JepaModel& m = mutable_model(c);
  const nn::ParameterSet trainable = m.trainable();
  for (const auto& e : trainable) out.push_back({"param." + e.name, e.param->value});
  for (const auto& e : m.target_parameters()) out.push_back({"ema." + e.name, e.param->value});
  for (std::size_t i = 0; i < c.adam.first_moment.size(); ++i) {
    out.push_back({"adam_m." + trainable.entries()[i].name, c.adam.first_moment[i]});
    out.push_back({"adam_v." + trainable.entries()[i].name, c.adam.second_moment[i]});
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string Checkpoint::id() const {
  std::ostringstream bytes;
  nn::write_tensors(bytes, model_tensors(*this));
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : bytes.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_tensors(dir / "model.bin", model_tensors(c));
  json j = {{"schema_version", c.schema_version},
            {"id", c.id()},
            {"embed_dim", c.embed_dim()},
            {"encoder", c.encoder},
            {"predictor", c.predictor},
            {"train", c.train},
            {"norm_stats", {{"mean", c.stats.mean}, {"std", c.stats.std}}},
            {"adam", {{"step", c.adam.step}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2},
                      {"epsilon", c.adam.epsilon}, {"learning_rate", c.adam.learning_rate}}},
            {"epochs_done", c.epochs_done},
            {"initial_loss", c.initial_loss},
            {"epoch_losses", c.epoch_losses},
            {"trainable_parameters", mutable_model(c).trainable().count()},
            {"encoder_parameters", mutable_model(c).context_parameters().count()}};
  std::ofstream out(dir / "checkpoint.json", std::ios::binary);
  if (!out) throw Error("cannot write checkpoint sidecar in '" + dir.string() + "'");
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "checkpoint.json", std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + (dir / "checkpoint.json").string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint sidecar: ") + e.what());
  }
  Checkpoint c;
  try {
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != kCheckpointSchemaVersion) {
      throw SchemaError("checkpoint schema version " + std::to_string(c.schema_version) +
                        " is not supported (expected " +
                        std::to_string(kCheckpointSchemaVersion) + ")");
    }
    c.encoder = j.at("encoder").get<EncoderConfig>();
    c.predictor = j.at("predictor").get<PredictorConfig>();
    c.train = j.at("train").get<TrainConfig>();
    c.stats.mean = j.at("norm_stats").at("mean").get<std::array<double, kNumFeatures>>();
    c.stats.std = j.at("norm_stats").at("std").get<std::array<double, kNumFeatures>>();
    const json& a = j.at("adam");
    c.adam.step = a.at("step").get<std::int64_t>();
    c.adam.beta1 = a.at("beta1").get<double>();
    c.adam.beta2 = a.at("beta2").get<double>();
    c.adam.epsilon = a.at("epsilon").get<double>();
    c.adam.learning_rate = a.at("learning_rate").get<double>();
    c.epochs_done = j.at("epochs_done").get<int>();
    c.initial_loss = j.at("initial_loss").get<double>();
    c.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint sidecar: ") + e.what());
  }
  if (j.value("embed_dim", c.encoder.embed_dim) != c.encoder.embed_dim) {
    throw SchemaError("checkpoint sidecar: embed_dim disagrees with encoder config");
  }

  c.model = JepaModel(c.encoder, c.predictor, c.train.seed);
  const std::vector<nn::NamedTensor> tensors = nn::load_tensors(dir / "model.bin");
  std::size_t next = 0;
  auto take = [&](const std::string& name, Matrix& dst) {
    if (next >= tensors.size() || tensors[next].name != name) {
      throw SchemaError("checkpoint tensors: expected '" + name + "'");
    }
    const Matrix& src = tensors[next++].value;
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
      throw SchemaError("checkpoint tensors: shape mismatch for '" + name + "'");
    }
    dst = src;
  };
  const nn::ParameterSet trainable = c.model.trainable();
  for (const auto& e : trainable) take("param." + e.name, e.param->value);
  for (const auto& e : c.model.target_parameters()) take("ema." + e.name, e.param->value);
  if (next < tensors.size()) {
    for (const auto& e : trainable) {
      Matrix m = Matrix::Zero(e.param->value.rows(), e.param->value.cols());
      Matrix v = m;
      take("adam_m." + e.name, m);
      take("adam_v." + e.name, v);
      c.adam.first_moment.push_back(std::move(m));
      c.adam.second_moment.push_back(std::move(v));
    }
  }
  if (next != tensors.size()) throw SchemaError("checkpoint tensors: unexpected trailing tensors");
  if (const std::string stored = j.value("id", std::string()); !stored.empty() && stored != c.id()) {
    throw SchemaError("checkpoint id mismatch: sidecar says " + stored + ", tensors hash to " + c.id());
  }
  return c;
}

// -------------------------------------------------------------- Inference

std::vector<Embedding> embed_all(std::span<const ObjectTrack> tracks, const Checkpoint& checkpoint,
                                 int batch_size) {
  if (batch_size < 1) throw Error("embed: batch_size must be positive");
  const std::string id = checkpoint.id();
  std::vector<Embedding> out;
  out.reserve(tracks.size());
  for (std::size_t start = 0; start < tracks.size(); start += batch_size) {
    const std::size_t end = std::min(tracks.size(), start + batch_size);
    std::vector<int> lengths;
    std::vector<FeatureMatrix> inputs;
    int rows = 0;
    for (std::size_t i = start; i < end; ++i) {
      validate_track(tracks[i]);
      inputs.push_back(jepa::with_mask_bit(standardize(to_feature_matrix(tracks[i]), checkpoint.stats)));
      lengths.push_back(tracks[i].length());
      rows += lengths.back();
    }
    const nn::Segments seg = nn::Segments::from_lengths(lengths);
    Matrix packed(rows, kNumFeatures + 1);
    for (std::size_t k = 0; k < inputs.size(); ++k) packed.middleRows(seg.offset[k], lengths[k]) = inputs[k];
    const Matrix tokens = checkpoint.model.context.forward(packed, seg);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const ObjectTrack& t = tracks[start + k];
      out.push_back({t.scene_id, t.id, id, t.label, tokens.middleRows(seg.offset[k], lengths[k])});
    }
  }
  return out;
}

Embedding embed(const ObjectTrack& track, const Checkpoint& checkpoint) {
  return std::move(embed_all(std::span<const ObjectTrack>(&track, 1), checkpoint).front());
}

}  // namespace jepamon::jepa
