// Acceptance checks: one PASS / FAIL / SKIP line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "mwa/mwa.hpp"
#include "test_support.hpp"

namespace {

using namespace mwa;
namespace fs = std::filesystem;

struct Outcome {
  enum class Status { kPass, kFail, kSkip } status = Status::kPass;
  std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Status::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Status::kFail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::Status::kSkip, std::move(d)}; }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// ----------------------------------------------------------------------------------------

Outcome lattice_oracle() {
  std::mt19937_64 rng(101);
  const int instances = 1000;
  double worst = 0.0;
  for (int trial = 0; trial < instances; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    const int m = 1 + static_cast<int>(rng() % 4);
    const int d = 1 + static_cast<int>(rng() % 2);
    const auto t = testing::random_tables(rng, n, m, d);
    const auto all = testing::enumerate_sequences(n, m, d);
    std::vector<double> scores;
    for (const auto& seq : all) scores.push_back(testing::oracle_score(t, seq));
    const double z = testing::oracle_log_sum_exp(scores);
    const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();

    Eigen::MatrixXd span_label = Eigen::MatrixXd::Zero(t.upsilon.rows(), t.upsilon.cols());
    Eigen::MatrixXd words = Eigen::MatrixXd::Zero(n, m);
    for (std::size_t k = 0; k < all.size(); ++k) {
      const double p = std::exp(scores[k] - z);
      for (const auto& item : all[k]) span_label(t.source_spans.index_of(item.source), t.label_index(item.label)) += p;
      for (const auto& [i, j] : to_word_pairs(all[k])) words(i, j) += p;
    }

    const auto v = viterbi(t);
    const auto post = marginals(t);
    if (v.sequence != all[best]) return fail(fmt("viterbi path differs from enumeration on instance %d", trial));
    worst = std::max({worst, std::abs(log_partition(t) - z), std::abs(v.score - scores[best]),
                      std::abs(post.log_partition - z), (post.span_label - span_label).cwiseAbs().maxCoeff(),
                      (word_pair_posteriors(t) - words).cwiseAbs().maxCoeff()});
  }
  if (worst > 1e-9) return fail(fmt("max deviation %.3g > 1e-9", worst));
  return pass(fmt("%d instances, max deviation %.3g", instances, worst));
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(202);
  const int instances = 100;
  std::size_t checked = 0;
  for (int trial = 0; trial < instances; ++trial) {
    ModelConfig c;
    c.dim = 1 + static_cast<int>(rng() % 4);
    c.hidden = 1 + static_cast<int>(rng() % 4);
    c.max_span = 1 + static_cast<int>(rng() % 2);
    c.cost_scale = (rng() % 2) ? 1.0 : 0.5;
    auto params = ModelParameters::initialize(c);
    testing::randomize(params, rng);
    const int n = 1 + static_cast<int>(rng() % 4);
    const int m = 1 + static_cast<int>(rng() % 4);
    const auto pair = testing::random_pair(rng, n, m, 0.3, 0.15);
    const PairVectors vectors{testing::random_matrix(rng, n, c.dim), testing::random_matrix(rng, m, c.dim)};
    const Setting setting = (rng() % 2) ? Setting::kSure : Setting::kSurePlusPoss;
    auto grads = ModelParameters::zeros(c);
    bidirectional_loss(params, pair, vectors, setting, &grads);
    const auto mismatches = testing::check_gradients(
        params, grads, [&](const ModelParameters& p) { return bidirectional_loss(p, pair, vectors, setting, nullptr); });
    if (!mismatches.empty()) {
      const auto& mm = mismatches.front();
      return fail(fmt("instance %d: %s[%ld] analytic %.8g numeric %.8g", trial, mm.tensor.c_str(),
                      static_cast<long>(mm.element), mm.analytic, mm.numeric));
    }
    for (const auto& t : params.tensors()) checked += static_cast<std::size_t>(t.size());
  }
  return pass(fmt("%d instances, %zu parameter elements within rel 1e-4", instances, checked));
}

Outcome overfit_closure() {
  std::mt19937_64 rng(303);
  const auto corpus = testing::synthetic_corpus(rng, 20);
  const auto store = testing::random_static_store(rng, testing::vocabulary(corpus), 16);
  TrainConfig config;
  config.learning_rate = 1e-3;
  config.max_span = 3;
  config.hidden = 64;
  config.batch_size = 4;
  config.weight_decay = 0.0;
  config.epochs = 200;
  Trainer trainer = Trainer::fresh(config, store);
  const AlignOptions options{config.merge, config.bidi_threshold, std::nullopt};
  double f1 = 0.0, em = 0.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    trainer.run_epoch(corpus, epoch);
    const auto report = evaluate_model(trainer.params(), corpus, store, config.setting, options);
    f1 = prf_from_tally(report.overall).f1;
    em = report.exact_match_percent() / 100.0;
    if (f1 >= 0.99 && em >= 0.95) return pass(fmt("F1 %.4f, EM %.2f reached at epoch %d", f1, em, epoch));
  }
  return fail(fmt("after 200 epochs F1 %.4f, EM %.2f", f1, em));
}

Outcome symmetrization_algebra() {
  std::mt19937_64 rng(404);
  const int pairs = 10000;
  for (int trial = 0; trial < pairs; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int m = 1 + static_cast<int>(rng() % 8);
    const double density = 0.05 + 0.4 * static_cast<double>(rng() % 100) / 100.0;
    const auto f = testing::random_alignment(rng, n, m, density);
    const auto b = testing::random_alignment(rng, n, m, density);
    const auto i = intersection(f, b);
    const auto g = grow_diag(f, b);
    const auto u = union_of(f, b);
    if (!std::includes(g.begin(), g.end(), i.begin(), i.end()) ||
        !std::includes(u.begin(), u.end(), g.begin(), g.end())) {
      return fail(fmt("containment chain broken on pair %d", trial));
    }
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::MatrixXd f = Eigen::MatrixXd::NullaryExpr(5, 6, [&] { return unit(rng); });
    const Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(5, 6, [&] { return unit(rng); });
    const double lo = unit(rng);
    const double hi = lo + unit(rng) * (1.0 - lo);
    const auto a_lo = bidi_avg(f, b, lo);
    const auto a_hi = bidi_avg(f, b, hi);
    if (!std::includes(a_lo.begin(), a_lo.end(), a_hi.begin(), a_hi.end())) {
      return fail("bidi-avg not monotone in threshold");
    }
  }
  const WordPairAlignment golden = grow_diag({{0, 0}, {1, 1}}, {{0, 0}, {1, 2}});
  if (golden != WordPairAlignment{{0, 0}, {1, 1}, {1, 2}}) return fail("grow-diag golden example differs");
  return pass(fmt("%d pairs nested, bidi-avg monotone, golden example exact", pairs));
}

Outcome metric_fidelity() {
  const WordPairAlignment gold{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const Prf perfect = prf(gold, gold);
  const Prf half = prf({{0, 0}, {1, 1}}, gold);
  const Prf empty = prf({}, {});
  const Prf none = prf({}, {{0, 0}});
  if (perfect.precision != 1.0 || perfect.recall != 1.0 || perfect.f1 != 1.0) return fail("perfect prediction");
  if (half.precision != 1.0 || half.recall != 0.5 || std::abs(half.f1 - 2.0 / 3.0) > 1e-15) return fail("half recall");
  if (empty.precision != 1.0 || empty.recall != 1.0) return fail("empty vs empty");
  if (none.precision != 0.0 || none.recall != 0.0 || none.f1 != 0.0) return fail("empty prediction");
  if (!exact_match(gold, gold) || exact_match({{0, 0}}, gold)) return fail("exact match");

  SentencePair a{"a", {"x"}, {"y"}, {}, {}};
  SentencePair b{"b", {"x", "y", "z"}, {"x", "y", "z"}, {}, {}};
  const auto report = corpus_eval({{&a, {{0, 0}}, {{0, 0}}}, {&b, {{0, 0}}, {{0, 0}, {1, 1}, {2, 2}}}});
  if (report.exact_match_percent() != 50.0) return fail("corpus exact match");
  if (prf_from_tally(report.overall).recall != 0.5) return fail("micro-averaged recall");

  SentencePair s{"s", {"The", "Lloyd", "conduct"}, {"the", "Lloyd", "performed"}, {}, {}};
  const Breakdown br = breakdown({{0, 0}, {1, 1}, {2, 2}}, {{0, 0}, {1, 1}, {2, 2}}, s);
  if (br.identical != Tally{2, 2, 2} || br.non_identical != Tally{1, 1, 1}) return fail("identical breakdown");

  WordPairAlignment block;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) block.emplace(i, j);
  }
  const auto shapes = shape_stats({block});
  if (shapes.size() != 1 || shapes.at("2x3") != 6) return fail("2x3 block is not six word pairs");
  return pass("prf/EM/breakdown examples exact; 2x3 block counts 6 word pairs");
}

Outcome edit_round_trip() {
  std::mt19937_64 rng(505);
  const int triples = 1000;
  for (int trial = 0; trial < triples; ++trial) {
    const int n = static_cast<int>(rng() % 9);
    const int m = static_cast<int>(rng() % 9);
    const auto s = testing::random_tokens(rng, n, 5);
    const auto t = testing::random_tokens(rng, m, 5);
    const auto a = testing::random_alignment(rng, n, m, 0.2);
    const auto program = derive_program(s, t, a);
    if (apply_program(s, program) != t) return fail(fmt("triple %d does not reconstruct", trial));
    if (parse_program(format_program(program)) != program) return fail(fmt("triple %d serialization", trial));
  }
  const std::vector<std::string> src{"With", "Canadian", "collaborators,", "Lloyd", "went", "on", "to",
                                     "conduct", "laboratory", "simulations", "of", "his", "model."};
  const std::vector<std::string> tgt{"Lloyd", "performed", "successful", "laboratory",
                                     "experiments", "of", "his", "model."};
  const auto program = derive_program(src, tgt, {{9, 4}});
  const std::string text = format_program(program);
  const std::string block = "KEEP REPLACE-S ADD(experiments) REPLACE-E KEEP KEEP KEEP";
  if (text.size() < block.size() || text.compare(text.size() - block.size(), block.size(), block) != 0) {
    return fail("paraphrase program tail: " + text);
  }
  if (apply_program(src, program) != tgt) return fail("paraphrase program does not reconstruct");
  return pass(fmt("%d triples round-trip; simulations->experiments REPLACE block exact", triples));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Outcome determinism() {
  std::mt19937_64 rng(606);
  const auto corpus = testing::synthetic_corpus(rng, 12);
  const auto dev = testing::synthetic_corpus(rng, 4);
  auto vocab = testing::vocabulary(corpus);
  for (const auto& w : testing::vocabulary(dev)) vocab.push_back(w);
  const auto store = testing::random_static_store(rng, vocab, 8);
  TrainConfig config;
  config.epochs = 2;
  config.seed = 17;
  config.hidden = 32;
  config.batch_size = 4;
  config.learning_rate = 1e-3;
  config.workers = 1;
  config.log_wall_clock = false;
  const fs::path root = fs::temp_directory_path() / "mwa_acceptance_determinism";
  fs::remove_all(root);
  train(corpus, dev, store, config, (root / "a").string());
  train(corpus, dev, store, config, (root / "b").string());
  int files = 0;
  for (const char* name : {"epoch-1.ckpt", "epoch-2.ckpt", "best.ckpt", "train_log.jsonl", "config.txt"}) {
    const std::string x = slurp(root / "a" / name);
    if (x.empty() || x != slurp(root / "b" / name)) {
      fs::remove_all(root);
      return fail(std::string(name) + " differs between runs");
    }
    ++files;
  }
  fs::remove_all(root);
  return pass(fmt("%d output files byte-identical across two runs", files));
}

Outcome data_scale() {
  const char* train_path = std::getenv("MWA_WIKI_TRAIN");
  const char* test_path = std::getenv("MWA_WIKI_TEST");
  const char* emb_path = std::getenv("MWA_WIKI_EMBEDDINGS");
  if (!train_path || !test_path || !emb_path) {
    return skip("set MWA_WIKI_TRAIN, MWA_WIKI_TEST and MWA_WIKI_EMBEDDINGS to run");
  }
  const auto corpus = read_jsonl(std::string(train_path));
  const auto test = read_jsonl(std::string(test_path));
  const auto store = load_embeddings(emb_path);
  TrainConfig config;
  if (const char* w = std::getenv("MWA_WORKERS")) config.workers = std::max(1, std::atoi(w));
  const fs::path out = fs::temp_directory_path() / "mwa_acceptance_data_scale";
  const auto summary = train(corpus, {}, store, config, out.string());
  const auto params = load_checkpoint(summary.best_checkpoint).params;
  const auto report = evaluate_model(params, test, store, config.setting, {config.merge, config.bidi_threshold, {}});
  const double f1 = prf_from_tally(report.overall).f1;
  return f1 > 0.90 ? pass(fmt("test F1 %.4f", f1)) : fail(fmt("test F1 %.4f <= 0.90", f1));
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_seconds;
  };
  const Criterion criteria[] = {
      {"lattice-oracle-equivalence", lattice_oracle, 60},
      {"gradient-correctness", gradient_correctness, 300},
      {"overfit-closure", overfit_closure, 600},
      {"symmetrization-algebra", symmetrization_algebra, 0},
      {"metric-fidelity", metric_fidelity, 0},
      {"edit-program-round-trip", edit_round_trip, 0},
      {"determinism", determinism, 0},
      {"data-scale (optional)", data_scale, 0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto started = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = fail(std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (outcome.status == Outcome::Status::kPass && c.budget_seconds > 0 && seconds > c.budget_seconds) {
      outcome = fail(outcome.detail + fmt("; took %.1fs, budget %.0fs", seconds, c.budget_seconds));
    }
    const char* tag = outcome.status == Outcome::Status::kPass   ? "PASS"
                      : outcome.status == Outcome::Status::kSkip ? "SKIP"
                                                                 : "FAIL";
    failures += outcome.status == Outcome::Status::kFail ? 1 : 0;
    std::printf("%s %s: %s (%.1fs)\n", tag, c.name, outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
