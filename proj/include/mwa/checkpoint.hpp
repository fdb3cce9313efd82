#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "mwa/binary_io.hpp"
#include "mwa/errors.hpp"
#include "mwa/model.hpp"
#include "mwa/optimizer.hpp"

// Model checkpoint layout (little-endian):
//   magic "MWAMDL1\0"
//   config: u32 dim, u32 max_span, u32 hidden, f64 cost_scale, u64 seed
//   u32 tensor_count, then per tensor:
//     u16 name_length, name bytes, u32 rank, u32 dims[rank], f64 payload (column-major)
// Optimizer state, when present, is stored as extra tensors "adam.m/<name>",
// "adam.v/<name>" and "adam.step".
namespace mwa {

inline constexpr char kCheckpointMagic[8] = {'M', 'W', 'A', 'M', 'D', 'L', '1', '\0'};

struct Checkpoint {
  ModelParameters params;
  std::optional<OptimizerState> optimizer;
};

namespace detail {

inline void write_tensor(std::ostream& out, const std::string& name, const TensorRef& t) {
  binary::write_uint<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  binary::write_bytes(out, name);
  const bool vector = t.cols == 1;
  binary::write_uint<std::uint32_t>(out, vector ? 1 : 2);
  binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
  if (!vector) binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
  for (Eigen::Index e = 0; e < t.size(); ++e) binary::write_f64(out, t.data[e]);
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const ModelParameters& params,
                            const OptimizerState* optimizer = nullptr) {
  const ModelConfig& c = params.config;
  binary::write_bytes(out, std::string(kCheckpointMagic, 8));
  binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(c.dim));
  binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(c.max_span));
  binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(c.hidden));
  binary::write_f64(out, c.cost_scale);
  binary::write_uint<std::uint64_t>(out, c.seed);

  const auto tensors = params.tensors();
  const std::size_t count = tensors.size() * (optimizer ? 3 : 1) + (optimizer ? 1 : 0);
  binary::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(count));
  for (const auto& t : tensors) detail::write_tensor(out, t.name, t);
  if (optimizer) {
    for (const auto& t : optimizer->first_moment.tensors()) detail::write_tensor(out, "adam.m/" + t.name, t);
    for (const auto& t : optimizer->second_moment.tensors()) detail::write_tensor(out, "adam.v/" + t.name, t);
    double step = static_cast<double>(optimizer->step);
    detail::write_tensor(out, "adam.step", TensorRef{"adam.step", &step, 1, 1});
  }
}

inline void save_checkpoint(const std::string& path, const ModelParameters& params,
                            const OptimizerState* optimizer = nullptr) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  save_checkpoint(out, params, optimizer);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(std::istream& in) {
  binary::Reader reader(in, "checkpoint");
  if (reader.read_bytes(8) != std::string(kCheckpointMagic, 8)) {
    throw FormatError("checkpoint: bad magic or unsupported version");
  }
  ModelConfig config;
  config.dim = static_cast<int>(reader.read_uint<std::uint32_t>());
  config.max_span = static_cast<int>(reader.read_uint<std::uint32_t>());
  config.hidden = static_cast<int>(reader.read_uint<std::uint32_t>());
  config.cost_scale = reader.read_f64();
  config.seed = reader.read_uint<std::uint64_t>();
  if (config.dim < 1 || config.max_span < 1 || config.hidden < 1 || config.dim > (1 << 20) ||
      config.hidden > (1 << 20) || config.max_span > 64) {
    throw FormatError("checkpoint: implausible config block");
  }

  Checkpoint ck{ModelParameters::zeros(config), std::nullopt};
  OptimizerState opt = OptimizerState::for_model(config);
  std::map<std::string, TensorRef> slots;
  for (const auto& t : ck.params.tensors()) slots.emplace(t.name, t);
  for (const auto& t : opt.first_moment.tensors()) slots.emplace("adam.m/" + t.name, t);
  for (const auto& t : opt.second_moment.tensors()) slots.emplace("adam.v/" + t.name, t);
  double step = 0.0;
  slots.emplace("adam.step", TensorRef{"adam.step", &step, 1, 1});

  std::set<std::string> seen;
  const auto count = reader.read_uint<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_length = reader.read_uint<std::uint16_t>();
    const std::string name = reader.read_bytes(name_length);
    const auto rank = reader.read_uint<std::uint32_t>();
    if (rank < 1 || rank > 2) throw FormatError("checkpoint: tensor '" + name + "' has rank " + std::to_string(rank));
    const auto rows = reader.read_uint<std::uint32_t>();
    const std::uint32_t cols = rank == 2 ? reader.read_uint<std::uint32_t>() : 1;
    auto it = slots.find(name);
    if (it == slots.end()) throw FormatError("checkpoint: unexpected tensor '" + name + "'");
    const TensorRef& slot = it->second;
    if (slot.rows != rows || slot.cols != cols) {
      throw FormatError("checkpoint: tensor '" + name + "' has the wrong shape");
    }
    if (!seen.insert(name).second) throw FormatError("checkpoint: duplicate tensor '" + name + "'");
    for (Eigen::Index e = 0; e < slot.size(); ++e) slot.data[e] = reader.read_f64();
  }
  if (!reader.at_end()) throw FormatError("checkpoint: trailing bytes");

  const std::size_t param_count = ck.params.tensors().size();
  std::size_t present = 0;
  for (const auto& t : ck.params.tensors()) present += seen.contains(t.name) ? 1 : 0;
  if (present != param_count) throw FormatError("checkpoint: missing model tensors");
  if (seen.size() == 3 * param_count + 1) {
    opt.step = static_cast<long long>(step);
    ck.optimizer = std::move(opt);
  } else if (seen.size() != param_count) {
    throw FormatError("checkpoint: incomplete optimizer state");
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace mwa
