#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "metagen/autodiff/tape.hpp"

namespace metagen {

/// Scalar type of every trained network.
using Real = float;
using RealMatrix = ad::Matrix<Real>;
using RealParameter = ad::Parameter<Real>;

struct NamedTensor {
  std::string name;
  RealMatrix value;
};

/// Self-describing weight container.
///
/// Layout: the 8-byte magic "MGCKPT01", a little-endian u64 header length, the
/// UTF-8 JSON header, then every tensor as row-major little-endian float32 in
/// header order. The header always carries "tensors": [{name, shape}]; callers
/// add kind, architecture, normalization statistics, seed and config hash.
struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor& tensor(std::string_view name) const;
  bool has_tensor(std::string_view name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<NamedTensor> snapshot(std::span<const RealParameter* const> params);

/// Copies tensors into parameters by name; throws SchemaError on a missing
/// name or a shape mismatch.
void restore(const Checkpoint& ckpt, std::span<RealParameter* const> params);

/// SHA-256 over shapes and raw values of the given parameters (names excluded,
/// so a copied network hashes like its source).
std::string weights_hash(std::span<const RealParameter* const> params);

}  // namespace metagen
