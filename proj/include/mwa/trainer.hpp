#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mwa/aligner.hpp"
#include "mwa/checkpoint.hpp"
#include "mwa/config.hpp"
#include "mwa/corpus_io.hpp"
#include "mwa/embeddings.hpp"
#include "mwa/evaluator.hpp"
#include "mwa/model.hpp"
#include "mwa/optimizer.hpp"
#include "mwa/scorer.hpp"
#include "mwa/semicrf.hpp"

namespace mwa {

struct TrainConfig {
  double learning_rate = 1e-5;
  double weight_decay = 1e-5;
  int epochs = 5;
  int max_span = 3;
  int batch_size = 8;
  std::uint64_t seed = 1;
  Setting setting = Setting::kSure;
  double cost_scale = 1.0;
  MergeStrategy merge = MergeStrategy::kIntersection;
  double bidi_threshold = 0.4;
  int hidden = 512;
  int workers = 1;
  bool log_wall_clock = true;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (max_span < 1) throw ValidationError("max_span must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (hidden < 1) throw ValidationError("hidden must be >= 1");
    if (workers < 1) throw ValidationError("workers must be >= 1");
    if (cost_scale < 0.0) throw ValidationError("cost_scale must be non-negative");
  }

  ModelConfig model_config(int dim) const {
    return ModelConfig{dim, max_span, hidden, cost_scale, seed};
  }

  /// Applies recognized keys; unknown keys are rejected.
  void apply(const ConfigMap& values) {
    for (const auto& [key, value] : values) {
      if (key == "learning_rate") learning_rate = config_double(key, value);
      else if (key == "weight_decay") weight_decay = config_double(key, value);
      else if (key == "epochs") epochs = static_cast<int>(config_int(key, value));
      else if (key == "max_span") max_span = static_cast<int>(config_int(key, value));
      else if (key == "batch_size") batch_size = static_cast<int>(config_int(key, value));
      else if (key == "seed") seed = static_cast<std::uint64_t>(config_int(key, value));
      else if (key == "setting") setting = parse_setting(value);
      else if (key == "cost_scale") cost_scale = config_double(key, value);
      else if (key == "merge") merge = parse_merge_strategy(value);
      else if (key == "bidi_threshold") bidi_threshold = config_double(key, value);
      else if (key == "hidden") hidden = static_cast<int>(config_int(key, value));
      else if (key == "workers") workers = static_cast<int>(config_int(key, value));
      else if (key == "log_wall_clock") log_wall_clock = config_bool(key, value);
      else throw ValidationError("unknown config key '" + key + "'");
    }
  }

  std::string to_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "learning_rate = " << learning_rate << '\n'
        << "weight_decay = " << weight_decay << '\n'
        << "epochs = " << epochs << '\n'
        << "max_span = " << max_span << '\n'
        << "batch_size = " << batch_size << '\n'
        << "seed = " << seed << '\n'
        << "setting = " << to_string(setting) << '\n'
        << "cost_scale = " << cost_scale << '\n'
        << "merge = " << to_string(merge) << '\n'
        << "bidi_threshold = " << bidi_threshold << '\n'
        << "hidden = " << hidden << '\n'
        << "workers = " << workers << '\n'
        << "log_wall_clock = " << (log_wall_clock ? "true" : "false") << '\n';
    return out.str();
  }
};

/// Sum of the source->target and target->source softmax-margin losses for one pair.
/// When `grads` is given, parameter gradients are accumulated into it.
inline double bidirectional_loss(const ModelParameters& params, const SentencePair& pair,
                                 const PairVectors& vectors, Setting setting, ModelParameters* grads) {
  const PairEncoding encoding = encode_pair(params, vectors);
  const int max_span = params.config.max_span;
  double loss = 0.0;
  ScoreGradients direction_grads[2];
  const Direction directions[2] = {Direction::kSourceToTarget, Direction::kTargetToSource};
  for (int k = 0; k < 2; ++k) {
    const ScoreTables tables = build_score_tables(params, encoding, directions[k]);
    const GoldDerivation gold = derive_gold_spans(pair, directions[k], setting, max_span);
    NllResult nll = nll_and_score_grads(tables, gold, params.config.cost_scale);
    loss += nll.loss;
    direction_grads[k] = ScoreGradients{std::move(nll.d_upsilon), nll.d_tau};
  }
  if (!std::isfinite(loss)) throw NumericError("non-finite loss on pair '" + pair.id + "'");
  if (grads) accumulate_gradients(params, vectors, encoding, direction_grads[0], direction_grads[1], *grads);
  return loss;
}

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  std::optional<EvalReport> dev;
  double seconds = 0.0;
};

inline nlohmann::ordered_json to_json(const EpochRecord& record, bool with_wall_clock) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["mean_loss"] = record.mean_loss;
  if (record.dev) {
    const Prf p = prf_from_tally(record.dev->overall);
    j["dev_precision"] = p.precision;
    j["dev_recall"] = p.recall;
    j["dev_f1"] = p.f1;
    j["dev_em"] = record.dev->exact_match_percent();
  }
  if (with_wall_clock) j["seconds"] = record.seconds;
  return j;
}

/// Aligns every pair and scores against the gold set of `setting`.
inline EvalReport evaluate_model(const ModelParameters& params, const CorpusFile& corpus,
                                 const EmbeddingStore& store, Setting setting, const AlignOptions& options) {
  std::vector<EvalItem> items;
  items.reserve(corpus.size());
  for (const auto& pair : corpus) {
    items.push_back(EvalItem{&pair, align_pair(params, pair, store, options).merged, gold_pairs(pair, setting)});
  }
  return corpus_eval(items);
}

/// Mini-batch Adam over bidirectional losses. Gradients are summed over a batch; with
/// several workers each keeps its own buffer and buffers are merged in worker order.
class Trainer {
 public:
  Trainer(TrainConfig config, const EmbeddingStore& store, ModelParameters params, OptimizerState optimizer)
      : config_(std::move(config)), store_(store), params_(std::move(params)), optimizer_(std::move(optimizer)) {
    config_.validate();
  }

  static Trainer fresh(const TrainConfig& config, const EmbeddingStore& store) {
    config.validate();
    const ModelConfig model = config.model_config(store.dim());
    return Trainer(config, store, ModelParameters::initialize(model), OptimizerState::for_model(model));
  }

  const ModelParameters& params() const { return params_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  const TrainConfig& config() const { return config_; }

  /// Visit order for `epoch` (1-based): a shuffle seeded by (seed, epoch), so resuming at
  /// an epoch boundary replays the same order.
  std::vector<std::size_t> epoch_order(std::size_t corpus_size, int epoch) const {
    std::vector<std::size_t> order(corpus_size);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config_.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  }

  /// One optimizer step over `batch`; returns the summed loss.
  double step(const std::vector<const SentencePair*>& batch) {
    const int workers = std::max(1, std::min<int>(config_.workers, static_cast<int>(batch.size())));
    std::vector<ModelParameters> grads(workers, ModelParameters::zeros(params_.config));
    std::vector<double> losses(workers, 0.0);
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](int w) {
      try {
        for (std::size_t k = static_cast<std::size_t>(w); k < batch.size(); k += workers) {
          const SentencePair& pair = *batch[k];
          losses[w] += bidirectional_loss(params_, pair, vectors_for(pair, store_), config_.setting, &grads[w]);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
      for (auto& t : threads) t.join();
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (int w = 1; w < workers; ++w) grads[0].add(grads[w]);
    double loss = 0.0;
    for (double l : losses) loss += l;
    if (!grads[0].all_finite()) throw NumericError("non-finite gradient in batch");
    adam_step(params_, grads[0], optimizer_, config_.learning_rate, config_.weight_decay);
    return loss;
  }

  /// Mean per-pair loss over the epoch.
  double run_epoch(const CorpusFile& corpus, int epoch) {
    const auto order = epoch_order(corpus.size(), epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      std::vector<const SentencePair*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + config_.batch_size); ++k) {
        batch.push_back(&corpus[order[k]]);
      }
      total += step(batch);
    }
    return corpus.empty() ? 0.0 : total / static_cast<double>(corpus.size());
  }

 private:
  TrainConfig config_;
  const EmbeddingStore& store_;
  ModelParameters params_;
  OptimizerState optimizer_;
};

struct TrainSummary {
  std::vector<EpochRecord> epochs;
  std::string best_checkpoint;
  int best_epoch = 0;
};

/// Full training run: writes epoch-<k>.ckpt, best.ckpt (by dev F1; the last epoch when
/// there is no dev set), train_log.jsonl and config.txt under `out_dir`.
inline TrainSummary train(const CorpusFile& corpus, const CorpusFile& dev, const EmbeddingStore& store,
                          const TrainConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream echo(fs::path(out_dir) / "config.txt", std::ios::binary | std::ios::trunc);
    echo << config.to_text();
  }
  for (const auto& pair : corpus) vectors_for(pair, store);  // fail early on missing vectors
  for (const auto& pair : dev) vectors_for(pair, store);

  Trainer trainer = Trainer::fresh(config, store);
  std::ofstream log(fs::path(out_dir) / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  TrainSummary summary;
  double best_f1 = -1.0;
  const AlignOptions dev_options{config.merge, config.bidi_threshold, std::nullopt};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = trainer.run_epoch(corpus, epoch);
    if (!dev.empty()) record.dev = evaluate_model(trainer.params(), dev, store, config.setting, dev_options);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    const std::string path = (fs::path(out_dir) / ("epoch-" + std::to_string(epoch) + ".ckpt")).string();
    save_checkpoint(path, trainer.params(), &trainer.optimizer());
    const double f1 = record.dev ? prf_from_tally(record.dev->overall).f1 : static_cast<double>(epoch);
    if (f1 > best_f1) {
      best_f1 = f1;
      summary.best_epoch = epoch;
      summary.best_checkpoint = (fs::path(out_dir) / "best.ckpt").string();
      save_checkpoint(summary.best_checkpoint, trainer.params(), &trainer.optimizer());
    }
    log << to_json(record, config.log_wall_clock).dump() << '\n';
    log.flush();
    summary.epochs.push_back(std::move(record));
  }
  return summary;
}

}  // namespace mwa
