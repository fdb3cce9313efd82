#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mwa/checkpoint.hpp"
#include "mwa/trainer.hpp"
#include "test_support.hpp"

namespace mwa {
namespace {

ModelParameters small_params(std::uint64_t seed = 3) {
  ModelConfig c;
  c.dim = 3;
  c.hidden = 4;
  c.max_span = 2;
  c.seed = seed;
  return ModelParameters::initialize(c);
}

std::string bytes_of(const ModelParameters& params, const OptimizerState* opt = nullptr) {
  std::ostringstream out;
  save_checkpoint(out, params, opt);
  return out.str();
}

Checkpoint load_bytes(const std::string& bytes) {
  std::istringstream in(bytes);
  return load_checkpoint(in);
}

void expect_same(const ModelParameters& a, const ModelParameters& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t k = 0; k < ta.size(); ++k) {
    ASSERT_EQ(ta[k].name, tb[k].name);
    for (Eigen::Index e = 0; e < ta[k].size(); ++e) ASSERT_EQ(ta[k].data[e], tb[k].data[e]) << ta[k].name;
  }
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto params = small_params();
  const std::string first = bytes_of(params);
  EXPECT_EQ(first.substr(0, 8), std::string("MWAMDL1\0", 8));
  const Checkpoint loaded = load_bytes(first);
  EXPECT_FALSE(loaded.optimizer.has_value());
  EXPECT_EQ(loaded.params.config.dim, 3);
  EXPECT_EQ(loaded.params.config.seed, 3u);
  EXPECT_EQ(bytes_of(loaded.params), first);
  expect_same(loaded.params, params);
}

TEST(Checkpoint, OptimizerStateRoundTrips) {
  auto params = small_params();
  auto opt = OptimizerState::for_model(params.config);
  auto grads = ModelParameters::zeros(params.config);
  std::mt19937_64 rng(1);
  testing::randomize(grads, rng);
  adam_step(params, grads, opt, 1e-2, 1e-3);
  adam_step(params, grads, opt, 1e-2, 1e-3);
  const std::string bytes = bytes_of(params, &opt);
  const Checkpoint loaded = load_bytes(bytes);
  ASSERT_TRUE(loaded.optimizer.has_value());
  EXPECT_EQ(loaded.optimizer->step, 2);
  expect_same(loaded.optimizer->first_moment, opt.first_moment);
  expect_same(loaded.optimizer->second_moment, opt.second_moment);
  EXPECT_EQ(bytes_of(loaded.params, &*loaded.optimizer), bytes);
}

TEST(Checkpoint, TruncationAtEveryLengthIsFormatError) {
  const std::string bytes = bytes_of(small_params());
  for (std::size_t cut = 0; cut < bytes.size(); cut += 7) {
    EXPECT_THROW(load_bytes(bytes.substr(0, cut)), FormatError) << "cut at " << cut;
  }
}

TEST(Checkpoint, BadMagicAndTrailingBytes) {
  std::string bytes = bytes_of(small_params());
  EXPECT_THROW(load_bytes(bytes + "x"), FormatError);
  bytes[6] = '2';
  EXPECT_THROW(load_bytes(bytes), FormatError);
}

// Resuming from the epoch-1 checkpoint must reproduce an uninterrupted run exactly.
TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  std::mt19937_64 rng(5);
  const auto corpus = testing::synthetic_corpus(rng, 6);
  const auto store = testing::random_static_store(rng, testing::vocabulary(corpus), 4);
  TrainConfig config;
  config.hidden = 8;
  config.max_span = 2;
  config.batch_size = 4;
  config.learning_rate = 1e-2;

  Trainer straight = Trainer::fresh(config, store);
  straight.run_epoch(corpus, 1);
  const std::string after_one = bytes_of(straight.params(), &straight.optimizer());
  straight.run_epoch(corpus, 2);

  Checkpoint ck = load_bytes(after_one);
  Trainer resumed(config, store, std::move(ck.params), std::move(*ck.optimizer));
  resumed.run_epoch(corpus, 2);
  EXPECT_EQ(bytes_of(resumed.params(), &resumed.optimizer()),
            bytes_of(straight.params(), &straight.optimizer()));
}

}  // namespace
}  // namespace mwa
