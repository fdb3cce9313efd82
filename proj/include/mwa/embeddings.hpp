#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mwa/binary_io.hpp"
#include "mwa/data_model.hpp"
#include "mwa/errors.hpp"

namespace mwa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr char kEmbeddingMagic[8] = {'M', 'W', 'A', 'E', 'M', 'B', '1', '\0'};

/// Source and target word vectors for one sentence pair (rows are tokens).
struct PairVectors {
  Matrix source;
  Matrix target;
};

/// Per-token vectors, either from a static word table or from precomputed contextual
/// encoder states keyed by pair id.
class EmbeddingStore {
 public:
  enum class Mode { kStatic, kContextual };

  EmbeddingStore() = default;

  static EmbeddingStore from_static(int dim, std::unordered_map<std::string, Vector> table) {
    EmbeddingStore store;
    store.mode_ = Mode::kStatic;
    store.dim_ = dim;
    store.unk_ = Vector::Zero(dim);
    // Mean over a sorted key order so the unknown vector does not depend on hash layout.
    std::vector<const std::string*> keys;
    for (const auto& [word, v] : table) {
      if (v.size() != dim) throw ValidationError("vector for '" + word + "' has wrong dimension");
      keys.push_back(&word);
    }
    std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
    for (const auto* k : keys) store.unk_ += table.at(*k);
    if (!keys.empty()) store.unk_ /= static_cast<double>(keys.size());
    store.static_table_ = std::move(table);
    return store;
  }

  static EmbeddingStore from_contextual(int dim, std::unordered_map<std::string, PairVectors> pairs) {
    EmbeddingStore store;
    store.mode_ = Mode::kContextual;
    store.dim_ = dim;
    for (const auto& [id, pv] : pairs) {
      if (pv.source.cols() != dim || pv.target.cols() != dim) {
        throw ValidationError("contextual vectors for '" + id + "' have wrong dimension");
      }
    }
    store.pair_table_ = std::move(pairs);
    return store;
  }

  Mode mode() const { return mode_; }
  int dim() const { return dim_; }
  const Vector& unk_vector() const { return unk_; }

  Vector lookup(const std::string& word) const {
    auto it = static_table_.find(word);
    return it == static_table_.end() ? unk_ : it->second;
  }

  const PairVectors& lookup_pair(const std::string& id) const {
    auto it = pair_table_.find(id);
    if (it == pair_table_.end()) throw MissingPairError("no contextual vectors for pair '" + id + "'");
    return it->second;
  }

  std::size_t pair_count() const { return pair_table_.size(); }

 private:
  Mode mode_ = Mode::kStatic;
  int dim_ = 0;
  Vector unk_;
  std::unordered_map<std::string, Vector> static_table_;
  std::unordered_map<std::string, PairVectors> pair_table_;
};

/// Text table: header "<vocab_size> <dim>", then "<word> <f1> ... <f_dim>" per line.
inline EmbeddingStore load_static(std::istream& in) {
  std::string line;
  std::size_t line_number = 1;
  if (!std::getline(in, line)) throw ParseError("line 1: missing '<vocab_size> <dim>' header");
  std::istringstream header(line);
  long long vocab = -1;
  int dim = -1;
  if (!(header >> vocab >> dim) || vocab < 0 || dim <= 0) {
    throw ParseError("line 1: bad header '" + line + "'");
  }
  std::unordered_map<std::string, Vector> table;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream row(line);
    std::string word;
    row >> word;
    std::vector<double> values;
    std::string field;
    while (row >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_number) + ": bad number '" + field + "'");
      }
    }
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError("line " + std::to_string(line_number) + ": expected " +
                       std::to_string(dim) + " values, found " + std::to_string(values.size()));
    }
    table[word] = Eigen::Map<const Vector>(values.data(), dim);
  }
  return EmbeddingStore::from_static(dim, std::move(table));
}

inline EmbeddingStore load_static(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_static(in);
}

inline EmbeddingStore load_contextual(std::istream& in) {
  binary::Reader reader(in, "contextual embeddings");
  if (reader.read_bytes(8) != std::string(kEmbeddingMagic, 8)) {
    throw FormatError("contextual embeddings: bad magic");
  }
  const auto dim = reader.read_uint<std::uint32_t>();
  const auto count = reader.read_uint<std::uint32_t>();
  if (dim == 0) throw FormatError("contextual embeddings: zero dimension");
  std::unordered_map<std::string, PairVectors> pairs;
  auto read_matrix = [&](std::uint32_t rows) {
    Matrix m(rows, dim);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < dim; ++c) m(r, c) = reader.read_f32();
    }
    return m;
  };
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto id_length = reader.read_uint<std::uint16_t>();
    std::string id = reader.read_bytes(id_length);
    const auto n = reader.read_uint<std::uint32_t>();
    const auto m = reader.read_uint<std::uint32_t>();
    PairVectors pv;
    pv.source = read_matrix(n);
    pv.target = read_matrix(m);
    if (!pairs.emplace(std::move(id), std::move(pv)).second) {
      throw FormatError("contextual embeddings: duplicate pair id");
    }
  }
  if (!reader.at_end()) throw FormatError("contextual embeddings: trailing bytes after last pair");
  return EmbeddingStore::from_contextual(static_cast<int>(dim), std::move(pairs));
}

inline EmbeddingStore load_contextual(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_contextual(in);
}

/// Writes the MWAEMB1 format. Entries are emitted in the given order.
inline void write_contextual(std::ostream& out, int dim,
                             const std::vector<std::pair<std::string, PairVectors>>& pairs) {
  binary::write_bytes(out, std::string(kEmbeddingMagic, 8));
  binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(pairs.size()));
  auto write_matrix = [&](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) binary::write_f32(out, static_cast<float>(m(r, c)));
    }
  };
  for (const auto& [id, pv] : pairs) {
    binary::write_uint<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    binary::write_bytes(out, id);
    binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(pv.source.rows()));
    binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(pv.target.rows()));
    write_matrix(pv.source);
    write_matrix(pv.target);
  }
}

/// Sniffs the magic bytes: contextual binary if present, static text table otherwise.
inline EmbeddingStore load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  char head[8] = {};
  in.read(head, 8);
  const bool contextual = in.gcount() == 8 && std::string(head, 8) == std::string(kEmbeddingMagic, 8);
  in.clear();
  in.seekg(0);
  return contextual ? load_contextual(in) : load_static(in);
}

inline PairVectors vectors_for(const SentencePair& pair, const EmbeddingStore& store) {
  if (store.mode() == EmbeddingStore::Mode::kContextual) {
    const PairVectors& pv = store.lookup_pair(pair.id);
    if (pv.source.rows() != pair.source_length() || pv.target.rows() != pair.target_length()) {
      throw ValidationError("contextual vectors for '" + pair.id +
                            "' do not match the pair's token counts");
    }
    return pv;
  }
  PairVectors out{Matrix(pair.source_length(), store.dim()),
                  Matrix(pair.target_length(), store.dim())};
  for (int i = 0; i < pair.source_length(); ++i) out.source.row(i) = store.lookup(pair.source_tokens[i]);
  for (int j = 0; j < pair.target_length(); ++j) out.target.row(j) = store.lookup(pair.target_tokens[j]);
  return out;
}

}  // namespace mwa
