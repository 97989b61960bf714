#include "metagen/normalization.hpp"

#include <cmath>

#include "metagen/error.hpp"

namespace metagen {

ConditionNormalizer::ConditionNormalizer(double log_m_mean, double log_m_std)
    : log_m_mean_(log_m_mean), log_m_std_(log_m_std) {
  if (!std::isfinite(log_m_mean) || !(log_m_std > 0.0) || !std::isfinite(log_m_std)) {
    throw DomainError("invalid log-mass statistics");
  }
}

ConditionNormalizer ConditionNormalizer::fit(std::span<const Condition> conds) {
  if (conds.empty()) throw DomainError("cannot fit normalization on an empty set");
  double sum = 0.0;
  for (const auto& c : conds) {
    if (!(c.m_cube > 0.0)) throw DomainError("m_cube must be positive");
    sum += std::log(c.m_cube);
  }
  const double n = static_cast<double>(conds.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& c : conds) {
    const double d = std::log(c.m_cube) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / n);
  return {mean, sd > 0.0 ? sd : 1.0};
}

std::array<double, 3> ConditionNormalizer::normalize(const Condition& c) const {
  const std::array<double, 3> out = {c.x / kCoordScale, c.y / kCoordScale,
                                     (std::log(c.m_cube) - log_m_mean_) / log_m_std_};
  for (double v : out) {
    if (!std::isfinite(v)) throw DomainError("condition cannot be normalized (non-finite result)");
  }
  return out;
}

}  // namespace metagen
