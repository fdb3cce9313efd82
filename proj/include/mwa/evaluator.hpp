#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mwa/data_model.hpp"

namespace mwa {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Raw counts behind P/R/F1, summable across pairs (micro averaging).
struct Tally {
  long long predicted = 0;
  long long gold = 0;
  long long correct = 0;

  Tally& operator+=(const Tally& o) {
    predicted += o.predicted;
    gold += o.gold;
    correct += o.correct;
    return *this;
  }
  friend bool operator==(const Tally&, const Tally&) = default;
};

/// Empty prediction scores precision 1 against empty gold and 0 otherwise; empty gold
/// gives recall 1.
inline Prf prf_from_tally(const Tally& t) {
  Prf out;
  out.precision = t.predicted == 0 ? (t.gold == 0 ? 1.0 : 0.0)
                                   : static_cast<double>(t.correct) / static_cast<double>(t.predicted);
  out.recall = t.gold == 0 ? 1.0 : static_cast<double>(t.correct) / static_cast<double>(t.gold);
  const double sum = out.precision + out.recall;
  out.f1 = sum == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / sum;
  return out;
}

inline Tally tally(const WordPairAlignment& pred, const WordPairAlignment& gold) {
  Tally t;
  t.predicted = static_cast<long long>(pred.size());
  t.gold = static_cast<long long>(gold.size());
  for (const auto& p : pred) t.correct += gold.contains(p) ? 1 : 0;
  return t;
}

inline Prf prf(const WordPairAlignment& pred, const WordPairAlignment& gold) {
  return prf_from_tally(tally(pred, gold));
}

inline bool exact_match(const WordPairAlignment& pred, const WordPairAlignment& gold) {
  return pred == gold;
}

inline std::string case_fold(const std::string& token) {
  std::string out = token;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool is_identical(const SentencePair& pair, const TokenPair& p) {
  return case_fold(pair.source_tokens[p.first]) == case_fold(pair.target_tokens[p.second]);
}

struct Breakdown {
  Tally identical;
  Tally non_identical;
};

inline Breakdown breakdown(const WordPairAlignment& pred, const WordPairAlignment& gold,
                           const SentencePair& pair) {
  WordPairAlignment pred_id, pred_non, gold_id, gold_non;
  for (const auto& p : pred) (is_identical(pair, p) ? pred_id : pred_non).insert(p);
  for (const auto& p : gold) (is_identical(pair, p) ? gold_id : gold_non).insert(p);
  return Breakdown{tally(pred_id, gold_id), tally(pred_non, gold_non)};
}

struct EvalReport {
  std::size_t pairs = 0;
  std::size_t exact = 0;
  Tally overall;
  Tally identical;
  Tally non_identical;

  double exact_match_percent() const {
    return pairs == 0 ? 0.0 : 100.0 * static_cast<double>(exact) / static_cast<double>(pairs);
  }
};

struct EvalItem {
  const SentencePair* pair;  // tokens for the identical/non-identical split
  WordPairAlignment pred;
  WordPairAlignment gold;
};

/// Micro-averaged P/R/F1 plus the exact-match percentage.
inline EvalReport corpus_eval(const std::vector<EvalItem>& items) {
  EvalReport report;
  for (const auto& item : items) {
    ++report.pairs;
    report.exact += exact_match(item.pred, item.gold) ? 1 : 0;
    report.overall += tally(item.pred, item.gold);
    if (item.pair) {
      const Breakdown b = breakdown(item.pred, item.gold, *item.pair);
      report.identical += b.identical;
      report.non_identical += b.non_identical;
    }
  }
  return report;
}

inline nlohmann::ordered_json to_json(const EvalReport& report) {
  auto prf_json = [](const Tally& t) {
    const Prf p = prf_from_tally(t);
    return nlohmann::ordered_json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
                                  {"predicted", t.predicted}, {"gold", t.gold}, {"correct", t.correct}};
  };
  nlohmann::ordered_json j;
  j["pairs"] = report.pairs;
  j["exact_match"] = report.exact_match_percent();
  j["overall"] = prf_json(report.overall);
  j["identical"] = prf_json(report.identical);
  j["non_identical"] = prf_json(report.non_identical);
  return j;
}

inline std::string to_table(const EvalReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %9s %9s %9s\n", "subset", "P", "R", "F1");
  out += line;
  auto row = [&](const char* name, const Tally& t) {
    const Prf p = prf_from_tally(t);
    std::snprintf(line, sizeof line, "%-14s %9.4f %9.4f %9.4f\n", name, p.precision, p.recall, p.f1);
    out += line;
  };
  row("overall", report.overall);
  row("identical", report.identical);
  row("non-identical", report.non_identical);
  std::snprintf(line, sizeof line, "%-14s %9.2f  (%zu pairs)\n", "EM%", report.exact_match_percent(),
                report.pairs);
  out += line;
  return out;
}

struct CorpusStats {
  std::size_t pairs = 0;
  double aligned_percent = 0.0;
  double word_percent = 0.0;
  double phrase_percent = 0.0;
  double identical_percent = 0.0;
  double non_identical_percent = 0.0;
  double mean_longer_length = 0.0;
  double mean_shorter_length = 0.0;
};

inline bool is_word_alignment(const AlignmentComponent& c) {
  return c.source.size() == 1 && c.target.size() == 1;
}

/// Percentages are over word pairs (word/phrase, id/non-id) and over tokens (aligned).
inline CorpusStats corpus_stats(const std::vector<SentencePair>& corpus, Setting setting) {
  CorpusStats s;
  s.pairs = corpus.size();
  long long tokens = 0, aligned = 0, word_pairs = 0, phrase_pairs = 0, id_pairs = 0, non_id_pairs = 0;
  double longer = 0.0, shorter = 0.0;
  for (const auto& pair : corpus) {
    const WordPairAlignment gold = gold_pairs(pair, setting);
    std::set<int> src, tgt;
    for (const auto& [i, j] : gold) {
      src.insert(i);
      tgt.insert(j);
      (is_identical(pair, {i, j}) ? id_pairs : non_id_pairs) += 1;
    }
    tokens += pair.source_length() + pair.target_length();
    aligned += static_cast<long long>(src.size() + tgt.size());
    for (const auto& c : components(gold)) {
      (is_word_alignment(c) ? word_pairs : phrase_pairs) += static_cast<long long>(c.edges);
    }
    longer += std::max(pair.source_length(), pair.target_length());
    shorter += std::min(pair.source_length(), pair.target_length());
  }
  auto pct = [](long long a, long long b) { return b == 0 ? 0.0 : 100.0 * static_cast<double>(a) / static_cast<double>(b); };
  s.aligned_percent = pct(aligned, tokens);
  s.word_percent = pct(word_pairs, word_pairs + phrase_pairs);
  s.phrase_percent = pct(phrase_pairs, word_pairs + phrase_pairs);
  s.identical_percent = pct(id_pairs, id_pairs + non_id_pairs);
  s.non_identical_percent = pct(non_id_pairs, id_pairs + non_id_pairs);
  if (!corpus.empty()) {
    s.mean_longer_length = longer / static_cast<double>(corpus.size());
    s.mean_shorter_length = shorter / static_cast<double>(corpus.size());
  }
  return s;
}

inline constexpr const char* kIrregularShape = "irregular";

/// Word-pair counts per component shape "axb"; components that are not complete
/// bipartite blocks are counted under "irregular" by edge count.
inline std::map<std::string, long long> shape_stats(const std::vector<WordPairAlignment>& alignments) {
  std::map<std::string, long long> out;
  for (const auto& a : alignments) {
    for (const auto& c : components(a)) {
      const std::size_t block = c.source.size() * c.target.size();
      if (c.edges == block) {
        out[std::to_string(c.source.size()) + "x" + std::to_string(c.target.size())] +=
            static_cast<long long>(block);
      } else {
        out[kIrregularShape] += static_cast<long long>(c.edges);
      }
    }
  }
  return out;
}

}  // namespace mwa
