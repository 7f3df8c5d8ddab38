#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seld/features.hpp"
#include "seld/nn/network.hpp"
#include "seld/nn/optim.hpp"

namespace seld::nn {

/// Container layout ("SELDCP01", little-endian):
///   magic[8]
///   u32 n_config, then n_config x (str key, f64 value)
///   u64 optimizer step count
///   u32 n_tensors, then n_tensors x (str name, u32 ndim, u32 dims[ndim], f64 data[prod(dims)])
/// Strings are u32 length + bytes. Optimizer moments are stored as tensors
/// named "adam.m:<param>" and "adam.v:<param>"; input standardization as
/// "input_norm.mean" and "input_norm.std".
inline constexpr char kCheckpointMagic[9] = "SELDCP01";

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

struct Checkpoint {
  NetworkConfig config;
  std::uint64_t optimizer_steps = 0;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of a network (all parameters incl. running statistics), an
/// optional optimizer and optional input standardization.
template <typename T>
Checkpoint make_checkpoint(SeldNet<T>& net, const Adam<T>* adam, const FeatureStats* norm);

/// Copies parameters into `net`. Throws std::runtime_error when the stored
/// configuration differs from net.config() or a tensor is missing or
/// mis-shaped.
template <typename T>
void restore_network(const Checkpoint& ckpt, SeldNet<T>& net);

/// Restores moments and step count into an optimizer built on the same net.
template <typename T>
void restore_optimizer(const Checkpoint& ckpt, Adam<T>& adam);

std::optional<FeatureStats> checkpoint_feature_stats(const Checkpoint& ckpt);

}  // namespace seld::nn
