#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mwa/data_model.hpp"
#include "mwa/errors.hpp"

namespace mwa {

struct EditOp {
  enum class Kind { kKeep, kDel, kAdd, kReplaceStart, kReplaceEnd };

  Kind kind = Kind::kKeep;
  std::string word;  // ADD only

  static EditOp keep() { return {Kind::kKeep, {}}; }
  static EditOp del() { return {Kind::kDel, {}}; }
  static EditOp add(std::string w) { return {Kind::kAdd, std::move(w)}; }
  static EditOp replace_start() { return {Kind::kReplaceStart, {}}; }
  static EditOp replace_end() { return {Kind::kReplaceEnd, {}}; }

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

using EditProgram = std::vector<EditOp>;

struct EditCosts {
  double keep = 0.0;
  double replace = 0.5;
  double del = 1.0;
  double add = 1.0;
};

/// Cost of a program under `costs`; a REPLACE-S .. REPLACE-E block counts once.
inline double program_cost(const EditProgram& program, const EditCosts& costs = {}) {
  double total = 0.0;
  bool in_replace = false;
  for (const auto& op : program) {
    switch (op.kind) {
      case EditOp::Kind::kKeep: total += costs.keep; break;
      case EditOp::Kind::kDel: total += costs.del; break;
      case EditOp::Kind::kAdd: total += in_replace ? 0.0 : costs.add; break;
      case EditOp::Kind::kReplaceStart: total += costs.replace; in_replace = true; break;
      case EditOp::Kind::kReplaceEnd: in_replace = false; break;
    }
  }
  return total;
}

/// Minimal-cost KEEP/REPLACE/DEL/ADD path from source to target. Only word pairs forming
/// a 1x1 component of `alignment` with different surface forms may be REPLACEd; aligned
/// pairs off the chosen path are dropped. Equal-cost choices prefer KEEP, REPLACE, DEL, ADD.
inline EditProgram derive_program(const std::vector<std::string>& source,
                                  const std::vector<std::string>& target,
                                  const WordPairAlignment& alignment, const EditCosts& costs = {}) {
  const int n = static_cast<int>(source.size());
  const int m = static_cast<int>(target.size());
  std::set<TokenPair> eligible;
  for (const auto& c : components(alignment)) {
    if (c.source.size() != 1 || c.target.size() != 1) continue;
    const int i = *c.source.begin();
    const int j = *c.target.begin();
    if (i < n && j < m && source[i] != target[j]) eligible.emplace(i, j);
  }

  // cost[i][j]: cheapest edit of source[i:] into target[j:].
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(m + 1, 0.0));
  for (int i = n; i >= 0; --i) {
    for (int j = m; j >= 0; --j) {
      if (i == n && j == m) continue;
      double best = INFINITY;
      if (i < n && j < m && source[i] == target[j]) best = std::min(best, costs.keep + cost[i + 1][j + 1]);
      if (i < n && j < m && eligible.contains({i, j})) best = std::min(best, costs.replace + cost[i + 1][j + 1]);
      if (i < n) best = std::min(best, costs.del + cost[i + 1][j]);
      if (j < m) best = std::min(best, costs.add + cost[i][j + 1]);
      cost[i][j] = best;
    }
  }

  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); };
  EditProgram program;
  for (int i = 0, j = 0; i < n || j < m;) {
    const double here = cost[i][j];
    if (i < n && j < m && source[i] == target[j] && same(here, costs.keep + cost[i + 1][j + 1])) {
      program.push_back(EditOp::keep());
      ++i, ++j;
    } else if (i < n && j < m && eligible.contains({i, j}) && same(here, costs.replace + cost[i + 1][j + 1])) {
      program.push_back(EditOp::replace_start());
      program.push_back(EditOp::add(target[j]));
      program.push_back(EditOp::replace_end());
      ++i, ++j;
    } else if (i < n && same(here, costs.del + cost[i + 1][j])) {
      program.push_back(EditOp::del());
      ++i;
    } else {
      program.push_back(EditOp::add(target[j]));
      ++j;
    }
  }
  return program;
}

/// Replays a program over the source. Throws ValidationError on a malformed REPLACE block
/// or when the program does not consume exactly every source token.
inline std::vector<std::string> apply_program(const std::vector<std::string>& source,
                                              const EditProgram& program) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  bool in_replace = false;
  int adds_in_block = 0;
  auto consume = [&](const char* op) {
    if (pos >= source.size()) {
      throw ValidationError(std::string(op) + " past the end of the source (" +
                            std::to_string(source.size()) + " tokens)");
    }
    return source[pos++];
  };
  for (const auto& op : program) {
    if (in_replace && op.kind != EditOp::Kind::kAdd && op.kind != EditOp::Kind::kReplaceEnd) {
      throw ValidationError("only ADD may appear inside a REPLACE block");
    }
    switch (op.kind) {
      case EditOp::Kind::kKeep: out.push_back(consume("KEEP")); break;
      case EditOp::Kind::kDel: consume("DEL"); break;
      case EditOp::Kind::kAdd:
        out.push_back(op.word);
        adds_in_block += in_replace ? 1 : 0;
        break;
      case EditOp::Kind::kReplaceStart:
        if (in_replace) throw ValidationError("nested REPLACE-S");
        consume("REPLACE-S");
        in_replace = true;
        adds_in_block = 0;
        break;
      case EditOp::Kind::kReplaceEnd:
        if (!in_replace) throw ValidationError("REPLACE-E without REPLACE-S");
        if (adds_in_block == 0) throw ValidationError("empty REPLACE block");
        in_replace = false;
        break;
    }
  }
  if (in_replace) throw ValidationError("unterminated REPLACE block");
  if (pos != source.size()) {
    throw ValidationError("program consumed " + std::to_string(pos) + " of " +
                          std::to_string(source.size()) + " source tokens");
  }
  return out;
}

namespace detail {

inline std::string escape_word(const std::string& word) {
  std::string out;
  for (char c : word) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case ')': out += "\\)"; break;
      case ' ': out += "\\s"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Space-separated tags; ADD words are escaped as \\ \) \s \t \n \r.
inline std::string format_program(const EditProgram& program) {
  std::string out;
  for (const auto& op : program) {
    if (!out.empty()) out += ' ';
    switch (op.kind) {
      case EditOp::Kind::kKeep: out += "KEEP"; break;
      case EditOp::Kind::kDel: out += "DEL"; break;
      case EditOp::Kind::kReplaceStart: out += "REPLACE-S"; break;
      case EditOp::Kind::kReplaceEnd: out += "REPLACE-E"; break;
      case EditOp::Kind::kAdd: out += "ADD(" + detail::escape_word(op.word) + ")"; break;
    }
  }
  return out;
}

inline EditProgram parse_program(const std::string& line) {
  EditProgram program;
  std::size_t pos = 0;
  while (pos < line.size()) {
    if (line[pos] == ' ') {
      ++pos;
      continue;
    }
    if (line.compare(pos, 4, "ADD(") == 0) {
      std::string word;
      std::size_t k = pos + 4;
      for (;; ++k) {
        if (k >= line.size()) throw ParseError("unterminated ADD( at column " + std::to_string(pos + 1));
        if (line[k] == ')') break;
        if (line[k] != '\\') {
          word += line[k];
          continue;
        }
        if (++k >= line.size()) throw ParseError("dangling escape at column " + std::to_string(k));
        switch (line[k]) {
          case '\\': word += '\\'; break;
          case ')': word += ')'; break;
          case 's': word += ' '; break;
          case 't': word += '\t'; break;
          case 'n': word += '\n'; break;
          case 'r': word += '\r'; break;
          default: throw ParseError("unknown escape at column " + std::to_string(k));
        }
      }
      program.push_back(EditOp::add(std::move(word)));
      pos = k + 1;
      continue;
    }
    std::size_t end = line.find(' ', pos);
    if (end == std::string::npos) end = line.size();
    const std::string tag = line.substr(pos, end - pos);
    if (tag == "KEEP") program.push_back(EditOp::keep());
    else if (tag == "DEL") program.push_back(EditOp::del());
    else if (tag == "REPLACE-S") program.push_back(EditOp::replace_start());
    else if (tag == "REPLACE-E") program.push_back(EditOp::replace_end());
    else throw ParseError("unknown edit tag '" + tag + "' at column " + std::to_string(pos + 1));
    pos = end;
  }
  return program;
}

}  // namespace mwa
