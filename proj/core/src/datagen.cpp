#include "metagen/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metagen/error.hpp"
#include "metagen/metrics.hpp"

namespace metagen {

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Offset mixed into the dataset seed so the split stream never aliases the generation stream.
constexpr std::uint64_t kSplitStream = 0x5eedULL;

}  // namespace

std::string_view to_string(Branch b) noexcept {
  switch (b) {
    case Branch::ExtFirst: return "ext_first";
    case Branch::ContactFirst: return "contact_first";
    case Branch::IntFirst: return "int_first";
  }
  return "?";
}

Branch branch_from_string(std::string_view s) {
  if (s == "ext_first") return Branch::ExtFirst;
  if (s == "contact_first") return Branch::ContactFirst;
  if (s == "int_first") return Branch::IntFirst;
  throw SchemaError("unknown branch '" + std::string(s) + "'");
}

Radii sample_radii(Branch branch, Rng& rng) {
  const double t = kThickness;
  Radii r{};
  switch (branch) {
    case Branch::ExtFirst:
      r.r_ext1 = uniform(rng, 25.0, 100.0);
      r.r_int1 = uniform(rng, 15.0, r.r_ext1 - t);
      r.r_ext2 = r.r_int1;
      r.r_int2 = uniform(rng, 10.0, r.r_ext2 - t);
      break;
    case Branch::ContactFirst:
      r.r_int1 = uniform(rng, 15.0, 95.0);
      r.r_ext2 = r.r_int1;
      r.r_ext1 = uniform(rng, r.r_int1 + t, 100.0);
      r.r_int2 = uniform(rng, 10.0, r.r_ext2 - t);
      break;
    case Branch::IntFirst:
      r.r_int2 = uniform(rng, 10.0, 90.0);
      r.r_ext2 = uniform(rng, r.r_int2 + t, 95.0);
      r.r_int1 = r.r_ext2;
      r.r_ext1 = uniform(rng, r.r_int1 + t, 100.0);
      break;
  }
  return r;
}

DatasetRecord sample_record(Branch branch, Rng& rng) {
  const Radii radii = sample_radii(branch, rng);
  DatasetRecord rec;
  rec.branch = branch;
  rec.params.r_ext1 = radii.r_ext1;
  rec.params.r_int1 = radii.r_int1;
  rec.params.r_ext2 = radii.r_ext2;
  rec.params.r_int2 = radii.r_int2;
  rec.params.d1 = uniform(rng, 1.0, 12.0);
  rec.params.d2 = uniform(rng, 1.0, 12.0);
  rec.cond.x = uniform(rng, 1.0, 99.0);
  rec.cond.y = 100.0 - rec.cond.x;
  rec.cond.m_cube = equilibrium_mass(rec.params, rec.cond.x, rec.cond.y);
  return rec;
}

std::array<std::size_t, 3> branch_counts(std::size_t n) noexcept {
  std::array<std::size_t, 3> counts{n / 3, n / 3, n / 3};
  for (std::size_t i = 0; i < n % 3; ++i) ++counts[i];
  return counts;
}

Dataset build_dataset(const DatasetConfig& cfg) {
  if (cfg.n_records == 0) throw PreconditionError("dataset needs at least one record");
  if (cfg.n_points < 3) throw PreconditionError("n_points must be at least 3");
  Rng rng(cfg.seed);
  Dataset ds;
  ds.header = {kDatasetSchemaVersion, cfg.seed, cfg.n_points, cfg.shuffle};
  ds.records.reserve(cfg.n_records);
  const auto counts = branch_counts(cfg.n_records);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < counts[b]; ++i) ds.records.push_back(sample_record(static_cast<Branch>(b), rng));
  }
  if (cfg.shuffle) {
    // Explicit Fisher-Yates: std::shuffle's draw pattern is implementation-defined.
    for (std::size_t i = ds.records.size() - 1; i > 0; --i) {
      const auto j = std::uniform_int_distribution<std::size_t>(0, i)(rng);
      std::swap(ds.records[i], ds.records[j]);
    }
  }
  return ds;
}

std::string serialize_dataset(const Dataset& ds) {
  std::ostringstream out;
  nlohmann::json header = {{"schema_version", ds.header.schema_version},
                           {"seed", ds.header.seed},
                           {"n_points", ds.header.n_points},
                           {"shuffled", ds.header.shuffled},
                           {"n_records", ds.records.size()}};
  out << header.dump() << '\n';
  for (const auto& r : ds.records) {
    nlohmann::json line = {{"r_ext1", r.params.r_ext1}, {"r_int1", r.params.r_int1}, {"r_ext2", r.params.r_ext2},
                           {"r_int2", r.params.r_int2}, {"d1", r.params.d1},         {"d2", r.params.d2},
                           {"x", r.cond.x},             {"y", r.cond.y},             {"m_cube", r.cond.m_cube},
                           {"branch", to_string(r.branch)}};
    out << line.dump() << '\n';
  }
  return out.str();
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::string text = serialize_dataset(ds);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

Dataset parse_dataset(std::string_view text, LoadReport* report) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    const bool terminated = end != std::string_view::npos;
    const std::string_view line = text.substr(pos, terminated ? end - pos : std::string_view::npos);
    pos = terminated ? end + 1 : text.size();
    ++line_no;
    if (line.empty()) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!terminated) throw ParseError(line_no, "truncated record (missing newline)");
    try {
      if (!have_header) {
        const int version = j.at("schema_version").get<int>();
        if (version != kDatasetSchemaVersion) {
          throw SchemaError("dataset schema_version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kDatasetSchemaVersion) + ")");
        }
        ds.header.schema_version = version;
        ds.header.seed = j.at("seed").get<std::uint64_t>();
        ds.header.n_points = j.value("n_points", kDefaultCirclePoints);
        ds.header.shuffled = j.value("shuffled", true);
        expected = j.at("n_records").get<std::size_t>();
        ds.records.reserve(expected);
        have_header = true;
        continue;
      }
      DatasetRecord r;
      r.params = {j.at("r_ext1").get<double>(), j.at("r_int1").get<double>(), j.at("r_ext2").get<double>(),
                  j.at("r_int2").get<double>(), j.at("d1").get<double>(),     j.at("d2").get<double>()};
      r.cond = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("m_cube").get<double>()};
      r.branch = branch_from_string(j.at("branch").get<std::string>());
      if (report != nullptr) {
        const double residual = performance_error(r.params, r.cond);
        const double scale = r.cond.m_cube * r.cond.x;
        if (!(std::abs(residual) <= kBalanceTolerance * std::abs(scale))) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "line " << line_no << ": m_cube inconsistent with the balance equation (relative residual "
              << residual / scale << ")";
          report->warnings.push_back(msg.str());
        }
      }
      ds.records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad field: ") + e.what());
    } catch (const SchemaError& e) {
      if (!have_header) throw;
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_header) throw ParseError(line_no == 0 ? 1 : line_no, "missing header line");
  if (ds.records.size() != expected) {
    throw ParseError(line_no, "header declares " + std::to_string(expected) + " records, found " +
                                  std::to_string(ds.records.size()));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, LoadReport* report) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_dataset(buf.str(), report);
}

std::vector<std::string> check_record(const DatasetRecord& r) {
  std::vector<std::string> issues;
  const auto& p = r.params;
  if (contact_error(p) != 0.0) issues.emplace_back("contact error is not exactly zero");
  const double scale = r.cond.m_cube * r.cond.x;
  if (!(std::abs(performance_error(p, r.cond)) <= kBalanceTolerance * std::abs(scale))) {
    issues.emplace_back("balance residual above relative tolerance");
  }
  if (p.r_ext1 - p.r_int1 < kThickness) issues.emplace_back("outer cylinder thinner than thickness");
  if (p.r_ext2 - p.r_int2 < kThickness) issues.emplace_back("inner cylinder thinner than thickness");
  if (!(p.r_int2 > 0.0)) issues.emplace_back("non-positive radius");
  if (p.d1 < 1.0 || p.d1 > 12.0 || p.d2 < 1.0 || p.d2 > 12.0) issues.emplace_back("density out of [1, 12]");
  if (r.cond.x < 1.0 || r.cond.x > 99.0) issues.emplace_back("x out of [1, 99]");
  if (r.cond.x + r.cond.y != 100.0) issues.emplace_back("x + y != 100");
  if (!(r.cond.m_cube > 0.0)) issues.emplace_back("m_cube not positive");
  return issues;
}

Split train_validation_split(std::size_t n, std::uint64_t dataset_seed, double validation_fraction) {
  Rng rng(dataset_seed ^ kSplitStream);
  const std::vector<std::size_t> order = permutation(n, rng);
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * validation_fraction));
  Split s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

}  // namespace metagen
