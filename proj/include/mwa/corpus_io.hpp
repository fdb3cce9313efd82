#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mwa/data_model.hpp"
#include "mwa/errors.hpp"

namespace mwa {

using CorpusFile = std::vector<SentencePair>;

/// One Pharaoh line: sure pairs ("i-j") and possible pairs ("i?j").
struct PharaohAlignment {
  WordPairAlignment sure;
  WordPairAlignment poss;

  friend bool operator==(const PharaohAlignment&, const PharaohAlignment&) = default;
};

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

inline WordPairAlignment pairs_from_json(const nlohmann::json& value, const std::string& where) {
  if (!value.is_array()) throw ParseError(where + ": expected an array of [i, j] pairs");
  WordPairAlignment out;
  for (const auto& item : value) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number_integer() ||
        !item[1].is_number_integer()) {
      throw ParseError(where + ": expected [i, j] integer pairs");
    }
    out.emplace(item[0].get<int>(), item[1].get<int>());
  }
  return out;
}

inline nlohmann::ordered_json pairs_to_json(const WordPairAlignment& pairs) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& [i, j] : pairs) out.push_back({i, j});
  return out;
}

}  // namespace detail

/// Parses one JSONL record. `line_number` is 1-based and only used for messages.
inline SentencePair parse_record(const std::string& line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
  SentencePair pair;
  try {
    pair.id = j.at("id").get<std::string>();
    pair.source_tokens = j.at("source_tokens").get<std::vector<std::string>>();
    pair.target_tokens = j.at("target_tokens").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
  pair.sure = j.contains("sure") ? detail::pairs_from_json(j["sure"], where + " sure")
                                 : WordPairAlignment{};
  if (j.contains("poss")) pair.poss = detail::pairs_from_json(j["poss"], where + " poss");
  validate(pair);
  return pair;
}

inline CorpusFile read_jsonl(std::istream& in) {
  CorpusFile corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    SentencePair pair = parse_record(line, line_number);
    if (!ids.insert(pair.id).second) {
      throw ValidationError("line " + std::to_string(line_number) + ": duplicate id '" + pair.id +
                            "'");
    }
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

inline CorpusFile read_jsonl(const std::string& path) {
  auto in = detail::open_input(path);
  return read_jsonl(in);
}

inline std::string to_jsonl_line(const SentencePair& pair) {
  nlohmann::ordered_json j;
  j["id"] = pair.id;
  j["source_tokens"] = pair.source_tokens;
  j["target_tokens"] = pair.target_tokens;
  j["sure"] = detail::pairs_to_json(pair.sure);
  j["poss"] = detail::pairs_to_json(pair.poss);
  return j.dump();
}

inline void write_jsonl(const CorpusFile& corpus, std::ostream& out) {
  for (const auto& pair : corpus) out << to_jsonl_line(pair) << '\n';
}

inline void write_jsonl(const CorpusFile& corpus, const std::string& path) {
  auto out = detail::open_output(path);
  write_jsonl(corpus, out);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline PharaohAlignment parse_pharaoh_line(const std::string& line, std::size_t line_number) {
  PharaohAlignment out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    if (line[pos] == ' ' || line[pos] == '\t') {
      ++pos;
      continue;
    }
    std::size_t end = line.find_first_of(" \t", pos);
    if (end == std::string::npos) end = line.size();
    const std::string token = line.substr(pos, end - pos);
    const std::size_t sep = token.find_first_of("-?");
    auto is_index = [](const std::string& s) {
      return !s.empty() && s.size() < 10 &&
             s.find_first_not_of("0123456789") == std::string::npos;
    };
    if (sep == std::string::npos || !is_index(token.substr(0, sep)) ||
        !is_index(token.substr(sep + 1))) {
      throw ParseError("line " + std::to_string(line_number) + ", column " +
                       std::to_string(pos + 1) + ": bad alignment token '" + token + "'");
    }
    TokenPair p{std::stoi(token.substr(0, sep)), std::stoi(token.substr(sep + 1))};
    (token[sep] == '-' ? out.sure : out.poss).insert(p);
    pos = end;
  }
  return out;
}

inline std::vector<PharaohAlignment> read_pharaoh(std::istream& in) {
  std::vector<PharaohAlignment> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(parse_pharaoh_line(line, line_number));
  }
  return out;
}

inline std::vector<PharaohAlignment> read_pharaoh(const std::string& path) {
  auto in = detail::open_input(path);
  return read_pharaoh(in);
}

inline std::string format_pharaoh_line(const PharaohAlignment& alignment) {
  std::string out;
  auto emit = [&](const WordPairAlignment& pairs, char sep) {
    for (const auto& [i, j] : pairs) {
      if (!out.empty()) out += ' ';
      out += std::to_string(i);
      out += sep;
      out += std::to_string(j);
    }
  };
  emit(alignment.sure, '-');
  emit(alignment.poss, '?');
  return out;
}

inline void write_pharaoh(const std::vector<PharaohAlignment>& alignments, std::ostream& out) {
  for (const auto& a : alignments) out << format_pharaoh_line(a) << '\n';
}

inline void write_pharaoh(const std::vector<PharaohAlignment>& alignments,
                          const std::string& path) {
  auto out = detail::open_output(path);
  write_pharaoh(alignments, out);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace mwa
