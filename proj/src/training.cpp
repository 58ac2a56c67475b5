#include "matra/training.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "json.hpp"
#include "matra/error.hpp"
#include "matra/inference.hpp"

namespace matra {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size", "must be >= 1");
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) throw ConfigError("peak_lr", "must be > 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm", "must be >= 0");
}

double lr_multiplier(std::size_t step, std::size_t warmup_steps, std::size_t total_steps) {
  if (warmup_steps >= total_steps)
    throw ConfigError("warmup_steps", std::to_string(warmup_steps) + " must be below total steps " +
                                          std::to_string(total_steps));
  if (step > total_steps) throw ConfigError("step", "beyond total steps");
  if (step < warmup_steps) return static_cast<double>(step) / static_cast<double>(warmup_steps);
  return static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup_steps);
}

void optimizer_step(std::span<nn::Tensor> params, std::span<const nn::Tensor> grads, AdamState& state, double lr,
                    std::span<const std::string> names, const AdamSettings& settings) {
  if (params.size() != grads.size())
    throw ShapeError("optimizer_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  if (lr < 0.0) throw ConfigError("lr", "must be >= 0");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string label = i < names.size() ? names[i] : "#" + std::to_string(i);
    if (grads[i].shape() != params[i].shape())
      throw ShapeError("optimizer_step: gradient shape " + nn::to_string(grads[i].shape()) + " for " + label + " " +
                       nn::to_string(params[i].shape()));
    if (!grads[i].all_finite()) throw DataError("non-finite gradient in " + label);
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.shape());
      state.second_moment.emplace_back(p.shape());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(settings.beta1, t);
  const double correction2 = 1.0 - std::pow(settings.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Tensor& p = params[i];
    nn::Tensor& m = state.first_moment[i];
    nn::Tensor& v = state.second_moment[i];
    const nn::Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = settings.beta1 * m[k] + (1.0 - settings.beta1) * g[k];
      v[k] = settings.beta2 * v[k] + (1.0 - settings.beta2) * g[k] * g[k];
      if (lr == 0.0) continue;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + settings.epsilon);
    }
  }
}

double clip_global_norm(std::span<nn::Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.values()) v *= factor;
  }
  return norm;
}

Corpus filter_by_mode(const Corpus& corpus, TrainMode mode) {
  Corpus out;
  out.provenance = corpus.provenance;
  for (const auto& t : corpus.triples) {
    const bool keep = mode == TrainMode::bidirectional ||
                      (mode == TrainMode::indic2eng && t.target_lang == Language::english) ||
                      (mode == TrainMode::eng2indic && t.source_lang == Language::english);
    if (keep) out.triples.push_back(t);
  }
  if (out.empty()) throw DataError("no triples left after filtering for mode " + std::string(mode_name(mode)));
  return out;
}

void write_history(std::ostream& out, const TrainHistory& history) {
  for (const auto& e : history.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["mean_loss"] = e.mean_loss;
    j["dev_top1"] = e.dev_top1 ? nlohmann::ordered_json(*e.dev_top1) : nlohmann::ordered_json(nullptr);
    out << j.dump() << '\n';
  }
}

double corpus_top1(const Checkpoint& ckpt, const Corpus& corpus) {
  if (corpus.empty()) throw DataError("top-1 over an empty corpus");
  std::size_t hits = 0;
  for (const auto& t : corpus.triples) hits += decode_word(ckpt, t.source, t.target_lang) == t.target;
  return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

TrainResult train(const Corpus& corpus, ModelConfig model_config, const TrainConfig& train_config,
                  const TrainOptions& options) {
  train_config.validate();
  const Corpus data = filter_by_mode(corpus, train_config.mode);

  TrainResult result;
  Vocabulary vocab = options.vocab ? *options.vocab : build_vocab(data);
  if (model_config.vocab_size == 0) model_config.vocab_size = vocab.size();
  if (model_config.vocab_size != vocab.size())
    throw ConfigError("vocab_size", std::to_string(model_config.vocab_size) + " does not match vocabulary of " +
                                        std::to_string(vocab.size()));
  model_config.validate();

  std::vector<EncodedExample> examples;
  for (const auto& t : data.triples) {
    try {
      examples.push_back(encode_example(t, vocab, model_config.max_seq_len));
    } catch (const DataError&) {
      ++result.rejected_examples;
    }
  }
  if (examples.empty()) throw DataError("no encodable training examples");

  ModelParams params = init_model(model_config, train_config.seed);
  const std::size_t batches_per_epoch = (examples.size() + train_config.batch_size - 1) / train_config.batch_size;
  const std::size_t total_steps = batches_per_epoch * train_config.epochs;
  if (total_steps > 0 && train_config.warmup_steps >= total_steps)
    throw ConfigError("warmup_steps", std::to_string(train_config.warmup_steps) + " must be below the " +
                                          std::to_string(total_steps) + " total optimizer steps");

  std::mt19937_64 shuffle_rng(train_config.seed);
  std::mt19937_64 dropout_rng(train_config.seed ^ 0x9E3779B97F4A7C15ULL);
  ForwardOptions forward;
  if (model_config.dropout > 0.0) forward.dropout_rng = &dropout_rng;

  AdamState adam;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  double last_loss = 0.0;

  for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);
    double loss_total = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      std::vector<EncodedExample> batch;
      const std::size_t end = std::min(order.size(), (b + 1) * train_config.batch_size);
      for (std::size_t k = b * train_config.batch_size; k < end; ++k) batch.push_back(examples[order[k]]);
      batch = pad_batch(batch);

      nn::Graph graph(true);
      BoundParams bound(graph, params, true);
      nn::Var loss = forward_loss(bound, batch, forward);
      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value))
        throw DataError("loss became non-finite at step " + std::to_string(step + 1));
      graph.backward(loss);

      std::vector<nn::Tensor> grads;
      grads.reserve(bound.vars().size());
      for (nn::Var v : bound.vars()) grads.push_back(v.grad());
      clip_global_norm(grads, train_config.clip_norm);

      ++step;
      const double lr = train_config.peak_lr * lr_multiplier(step, train_config.warmup_steps, total_steps);
      optimizer_step(params.tensors(), grads, adam, lr, params.names());
      loss_total += loss_value;
      last_loss = loss_value;
    }

    EpochRecord record{epoch + 1, loss_total / static_cast<double>(batches_per_epoch), std::nullopt};
    if (options.dev && !options.dev->empty()) {
      ModelParams snapshot = params;
      snapshot.round_to_float();
      Checkpoint probe{std::move(snapshot), vocab, {train_config.mode, step, last_loss}};
      record.dev_top1 = corpus_top1(probe, *options.dev);
    }
    result.history.epochs.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }

  params.round_to_float();
  result.checkpoint = Checkpoint{std::move(params), std::move(vocab), {train_config.mode, step, last_loss}};
  return result;
}

}  // namespace matra
