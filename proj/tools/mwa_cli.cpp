// mwa: train, align, evaluate and inspect monolingual word alignments.
//
// Exit codes: 0 success, 2 usage / validation / parse / format errors, 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mwa/mwa.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

int default_workers() {
  if (const char* env = std::getenv("MWA_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw mwa::ValidationError(std::string("MWA_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = mwa::detail::open_output(path.string());
  out << text;
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus, dev, embeddings, config, out_dir;
  std::optional<int> workers, epochs, max_span, batch_size, hidden;
  std::optional<double> learning_rate, weight_decay, cost_scale, bidi_threshold;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> setting, merge;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train a model on a JSONL corpus");
  cmd->add_option("--corpus", a.corpus, "training corpus (JSONL)")->required();
  cmd->add_option("--dev", a.dev, "dev corpus (JSONL) for checkpoint selection");
  cmd->add_option("--embeddings", a.embeddings, "static text or contextual MWAEMB1 file")->required();
  cmd->add_option("--config", a.config, "key = value config file");
  cmd->add_option("--out-dir", a.out_dir, "output directory")->required();
  cmd->add_option("--workers", a.workers, "pair-level worker threads (default $MWA_WORKERS or 1)");
  cmd->add_option("--epochs", a.epochs);
  cmd->add_option("--max-span", a.max_span);
  cmd->add_option("--batch-size", a.batch_size);
  cmd->add_option("--hidden", a.hidden);
  cmd->add_option("--lr", a.learning_rate);
  cmd->add_option("--weight-decay", a.weight_decay);
  cmd->add_option("--cost-scale", a.cost_scale);
  cmd->add_option("--bidi-threshold", a.bidi_threshold);
  cmd->add_option("--seed", a.seed);
  cmd->add_option("--setting", a.setting, "sure | sure+poss");
  cmd->add_option("--merge", a.merge, "dev-time merge strategy");
}

int run_train(const TrainArgs& a) {
  mwa::TrainConfig config;
  config.workers = default_workers();
  if (!a.config.empty()) config.apply(mwa::load_config(a.config));
  if (a.workers) config.workers = *a.workers;
  if (a.epochs) config.epochs = *a.epochs;
  if (a.max_span) config.max_span = *a.max_span;
  if (a.batch_size) config.batch_size = *a.batch_size;
  if (a.hidden) config.hidden = *a.hidden;
  if (a.learning_rate) config.learning_rate = *a.learning_rate;
  if (a.weight_decay) config.weight_decay = *a.weight_decay;
  if (a.cost_scale) config.cost_scale = *a.cost_scale;
  if (a.bidi_threshold) config.bidi_threshold = *a.bidi_threshold;
  if (a.seed) config.seed = *a.seed;
  if (a.setting) config.setting = mwa::parse_setting(*a.setting);
  if (a.merge) config.merge = mwa::parse_merge_strategy(*a.merge);
  config.validate();

  const auto corpus = mwa::read_jsonl(a.corpus);
  const auto dev = a.dev.empty() ? mwa::CorpusFile{} : mwa::read_jsonl(a.dev);
  const auto store = mwa::load_embeddings(a.embeddings);
  const auto summary = mwa::train(corpus, dev, store, config, a.out_dir);
  for (const auto& record : summary.epochs) std::cout << mwa::to_json(record, config.log_wall_clock).dump() << '\n';
  std::cout << "best epoch " << summary.best_epoch << " -> " << summary.best_checkpoint << '\n';
  return 0;
}

// ---------------------------------------------------------------------------- align

struct AlignArgs {
  std::string corpus, model, embeddings, out;
  std::string merge = "intersection";
  double bidi_threshold = 0.4;
  std::optional<double> extend_threshold;
  std::optional<int> workers;
};

void add_align(CLI::App& app, AlignArgs& a) {
  auto* cmd = app.add_subcommand("align", "Decode alignments with a trained model");
  cmd->add_option("--corpus", a.corpus, "JSONL corpus to align")->required();
  cmd->add_option("--model", a.model, "checkpoint")->required();
  cmd->add_option("--embeddings", a.embeddings)->required();
  cmd->add_option("--merge", a.merge, "intersection | union | grow-diag | bidi-avg | none")->capture_default_str();
  cmd->add_option("--bidi-threshold", a.bidi_threshold)->capture_default_str();
  cmd->add_option("--extend-threshold", a.extend_threshold, "enable phrase extension at this similarity");
  cmd->add_option("--out", a.out, "output prefix; writes <out>.pharaoh and <out>.jsonl")->required();
  cmd->add_option("--workers", a.workers);
}

int run_align(const AlignArgs& a) {
  mwa::AlignOptions options;
  options.merge = mwa::parse_merge_strategy(a.merge);
  options.bidi_threshold = a.bidi_threshold;
  options.extend_threshold = a.extend_threshold;
  const int workers = a.workers.value_or(default_workers());
  if (workers < 1) throw mwa::ValidationError("--workers must be >= 1");

  const auto corpus = mwa::read_jsonl(a.corpus);
  const auto store = mwa::load_embeddings(a.embeddings);
  const auto params = mwa::load_checkpoint(a.model).params;
  if (params.config.dim != store.dim()) {
    throw mwa::ValidationError("model dim " + std::to_string(params.config.dim) + " does not match embedding dim " +
                               std::to_string(store.dim()));
  }

  // Each worker fills its own stride of slots, so output order never depends on scheduling.
  std::vector<mwa::WordPairAlignment> merged(corpus.size());
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](int w) {
    try {
      for (std::size_t k = w; k < corpus.size(); k += workers) {
        merged[k] = mwa::align_pair(params, corpus[k], store, options).merged;
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> threads;
  for (int w = 1; w < workers; ++w) threads.emplace_back(work, w);
  work(0);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<mwa::PharaohAlignment> pharaoh;
  mwa::CorpusFile predicted;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    pharaoh.push_back({merged[k], {}});
    mwa::SentencePair p = corpus[k];
    p.sure = merged[k];
    p.poss.clear();
    predicted.push_back(std::move(p));
  }
  mwa::write_pharaoh(pharaoh, a.out + ".pharaoh");
  mwa::write_jsonl(predicted, a.out + ".jsonl");

  std::ostringstream echo;
  echo.precision(17);
  echo << "model = " << a.model << '\n'
       << "embeddings = " << a.embeddings << '\n'
       << "merge = " << a.merge << '\n'
       << "bidi_threshold = " << a.bidi_threshold << '\n'
       << "extend_threshold = " << (a.extend_threshold ? std::to_string(*a.extend_threshold) : "off") << '\n';
  write_text(a.out + ".config.txt", echo.str());
  std::cerr << "aligned " << corpus.size() << " pairs\n";
  return 0;
}

// ---------------------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred, gold, setting = "sure", json_out;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand("eval", "Score predicted alignments against gold");
  cmd->add_option("--pred", a.pred, "predictions: .jsonl (matched by id) or Pharaoh (matched by line)")->required();
  cmd->add_option("--gold", a.gold, "gold JSONL corpus")->required();
  cmd->add_option("--setting", a.setting, "sure | sure+poss")->capture_default_str();
  cmd->add_option("--json-out", a.json_out, "also write the JSON report here");
}

int run_eval(const EvalArgs& a) {
  const mwa::Setting setting = mwa::parse_setting(a.setting);
  const auto gold = mwa::read_jsonl(a.gold);
  std::vector<mwa::WordPairAlignment> predictions;
  if (ends_with(a.pred, ".jsonl")) {
    std::map<std::string, mwa::WordPairAlignment> by_id;
    for (const auto& p : mwa::read_jsonl(a.pred)) by_id[p.id] = mwa::gold_pairs(p, mwa::Setting::kSurePlusPoss);
    for (const auto& g : gold) {
      auto it = by_id.find(g.id);
      if (it == by_id.end()) throw mwa::ValidationError("no prediction for pair '" + g.id + "'");
      predictions.push_back(it->second);
    }
  } else {
    const auto lines = mwa::read_pharaoh(a.pred);
    if (lines.size() != gold.size()) {
      throw mwa::ValidationError("prediction file has " + std::to_string(lines.size()) + " lines, gold has " +
                                 std::to_string(gold.size()) + " pairs");
    }
    for (const auto& l : lines) predictions.push_back(mwa::union_of(l.sure, l.poss));
  }

  std::vector<mwa::EvalItem> items;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    mwa::SentencePair probe = gold[k];
    probe.sure = predictions[k];
    probe.poss.clear();
    mwa::validate(probe);  // predicted indices must fit the sentence
    items.push_back({&gold[k], predictions[k], mwa::gold_pairs(gold[k], setting)});
  }
  const auto report = mwa::corpus_eval(items);
  auto json = mwa::to_json(report);
  json["setting"] = mwa::to_string(setting);
  std::cout << json.dump() << '\n' << mwa::to_table(report);
  if (!a.json_out.empty()) write_text(a.json_out, json.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------- stats

struct StatsArgs {
  std::string corpus, setting = "sure";
};

void add_stats(CLI::App& app, StatsArgs& a) {
  auto* cmd = app.add_subcommand("stats", "Corpus and alignment-shape statistics");
  cmd->add_option("--corpus", a.corpus)->required();
  cmd->add_option("--setting", a.setting, "sure | sure+poss")->capture_default_str();
}

int run_stats(const StatsArgs& a) {
  const mwa::Setting setting = mwa::parse_setting(a.setting);
  const auto corpus = mwa::read_jsonl(a.corpus);
  const auto s = mwa::corpus_stats(corpus, setting);
  std::vector<mwa::WordPairAlignment> gold;
  for (const auto& p : corpus) gold.push_back(mwa::gold_pairs(p, setting));
  nlohmann::ordered_json j;
  j["pairs"] = s.pairs;
  j["setting"] = mwa::to_string(setting);
  j["aligned_percent"] = s.aligned_percent;
  j["word_percent"] = s.word_percent;
  j["phrase_percent"] = s.phrase_percent;
  j["identical_percent"] = s.identical_percent;
  j["non_identical_percent"] = s.non_identical_percent;
  j["mean_longer_length"] = s.mean_longer_length;
  j["mean_shorter_length"] = s.mean_shorter_length;
  j["shapes"] = mwa::shape_stats(gold);
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------- edits

struct EditsArgs {
  std::string corpus, alignments, out;
};

void add_edits(CLI::App& app, EditsArgs& a) {
  auto* cmd = app.add_subcommand("edits", "Derive KEEP/DEL/ADD/REPLACE edit programs");
  cmd->add_option("--corpus", a.corpus, "JSONL corpus")->required();
  cmd->add_option("--alignments", a.alignments, "Pharaoh alignments (default: gold sure links)");
  cmd->add_option("--out", a.out, "one program per line")->required();
}

int run_edits(const EditsArgs& a) {
  const auto corpus = mwa::read_jsonl(a.corpus);
  std::vector<mwa::WordPairAlignment> alignments;
  if (a.alignments.empty()) {
    for (const auto& p : corpus) alignments.push_back(p.sure);
  } else {
    for (const auto& l : mwa::read_pharaoh(a.alignments)) alignments.push_back(mwa::union_of(l.sure, l.poss));
    if (alignments.size() != corpus.size()) {
      throw mwa::ValidationError("alignment file has " + std::to_string(alignments.size()) + " lines, corpus has " +
                                 std::to_string(corpus.size()) + " pairs");
    }
  }
  std::ofstream out = mwa::detail::open_output(a.out);
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const auto& p = corpus[k];
    const auto program = mwa::derive_program(p.source_tokens, p.target_tokens, alignments[k]);
    if (mwa::apply_program(p.source_tokens, program) != p.target_tokens) {
      throw mwa::ValidationError("edit program for pair '" + p.id + "' does not reproduce the target");
    }
    out << mwa::format_program(program) << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + a.out + "' failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monolingual word alignment with a neural semi-Markov CRF"};
  app.require_subcommand(1);
  TrainArgs train_args;
  AlignArgs align_args;
  EvalArgs eval_args;
  StatsArgs stats_args;
  EditsArgs edits_args;
  add_train(app, train_args);
  add_align(app, align_args);
  add_eval(app, eval_args);
  add_stats(app, stats_args);
  add_edits(app, edits_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand("train")) return run_train(train_args);
    if (app.got_subcommand("align")) return run_align(align_args);
    if (app.got_subcommand("eval")) return run_eval(eval_args);
    if (app.got_subcommand("stats")) return run_stats(stats_args);
    if (app.got_subcommand("edits")) return run_edits(edits_args);
  } catch (const mwa::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
