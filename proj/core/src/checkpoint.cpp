#include "metagen/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

#include "metagen/error.hpp"
#include "metagen/hash.hpp"

namespace metagen {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'G', 'C', 'K', 'P', 'T', '0', '1'};

}  // namespace

const NamedTensor& Checkpoint::tensor(std::string_view name) const {
  const auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == name; });
  if (it == tensors.end()) throw SchemaError("checkpoint has no tensor '" + std::string(name) + "'");
  return *it;
}

bool Checkpoint::has_tensor(std::string_view name) const {
  return std::any_of(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == name; });
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header = ckpt.header;
  header["format"] = "metagen-checkpoint";
  header["dtype"] = "float32";
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) list.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}});
  header["tensors"] = std::move(list);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write-then-rename so an interrupted run never leaves a half-written checkpoint.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(kMagic.data(), kMagic.size());
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : ckpt.tensors) {
      out.write(reinterpret_cast<const char*>(t.value.data()),
                static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(t.value.size())));
    }
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw SchemaError("'" + path.string() + "' is not a metagen checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ULL << 30)) throw SchemaError("corrupt checkpoint header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw SchemaError("truncated checkpoint header");

  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(text);
    if (ckpt.header.at("dtype") != "float32") throw SchemaError("unsupported checkpoint dtype");
    for (const auto& entry : ckpt.header.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
      const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
      t.value.resize(rows, cols);
      in.read(reinterpret_cast<char*>(t.value.data()),
              static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(t.value.size())));
      if (!in) throw SchemaError("truncated tensor data for '" + t.name + "'");
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad checkpoint header: ") + e.what());
  }
  return ckpt;
}

std::vector<NamedTensor> snapshot(std::span<const RealParameter* const> params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back({p->name, p->value});
  return out;
}

void restore(const Checkpoint& ckpt, std::span<RealParameter* const> params) {
  for (auto* p : params) {
    const NamedTensor& t = ckpt.tensor(p->name);
    if (t.value.rows() != p->value.rows() || t.value.cols() != p->value.cols()) {
      throw SchemaError("shape mismatch for tensor '" + p->name + "'");
    }
    p->value = t.value;
  }
}

std::string weights_hash(std::span<const RealParameter* const> params) {
  std::string buf;
  for (const auto* p : params) {
    buf += std::to_string(p->value.rows()) + 'x' + std::to_string(p->value.cols()) + ';';
    buf.append(reinterpret_cast<const char*>(p->value.data()), sizeof(Real) * static_cast<std::size_t>(p->value.size()));
  }
  return sha256_hex(buf);
}

}  // namespace metagen
