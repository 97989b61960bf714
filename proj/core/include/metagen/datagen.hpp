#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "metagen/domain.hpp"
#include "metagen/random.hpp"

namespace metagen {

/// Which radius the three-way sampling procedure draws first.
enum class Branch { ExtFirst = 0, ContactFirst = 1, IntFirst = 2 };

std::string_view to_string(Branch b) noexcept;
Branch branch_from_string(std::string_view s);

struct Radii {
  double r_ext1;
  double r_int1;
  double r_ext2;
  double r_int2;
};

struct DatasetRecord {
  SystemParams params;
  Condition cond;
  Branch branch = Branch::ExtFirst;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct DatasetConfig {
  std::size_t n_records = 20000;
  std::uint64_t seed = 0;
  std::size_t n_points = kDefaultCirclePoints;
  bool shuffle = true;
};

struct DatasetHeader {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::size_t n_points = kDefaultCirclePoints;
  bool shuffled = true;
};

inline constexpr int kDatasetSchemaVersion = 1;

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;
};

/// Non-fatal findings of load_dataset (records that disagree with the balance equation).
struct LoadReport {
  std::vector<std::string> warnings;
};

Radii sample_radii(Branch branch, Rng& rng);
DatasetRecord sample_record(Branch branch, Rng& rng);

/// Number of records per branch for `n` records: equal thirds, remainder round-robin.
std::array<std::size_t, 3> branch_counts(std::size_t n) noexcept;

/// Block-wise generation (ExtFirst, ContactFirst, IntFirst) from one stream seeded
/// with cfg.seed, followed by an optional shuffle drawn from the same stream.
Dataset build_dataset(const DatasetConfig& cfg);

/// JSON Lines: a header line, then one record per line.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string serialize_dataset(const Dataset& ds);

/// Relative tolerance used when re-checking the balance equation on load.
inline constexpr double kBalanceTolerance = 1e-6;

Dataset load_dataset(const std::filesystem::path& path, LoadReport* report = nullptr);
Dataset parse_dataset(std::string_view text, LoadReport* report = nullptr);

/// Returns the list of violated record invariants (empty when valid).
std::vector<std::string> check_record(const DatasetRecord& r);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded permutation of [0, n); the first round(n * validation_fraction) indices form the validation set.
Split train_validation_split(std::size_t n, std::uint64_t dataset_seed, double validation_fraction = 0.1);

}  // namespace metagen
