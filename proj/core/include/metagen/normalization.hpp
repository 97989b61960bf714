#pragma once

#include <array>
#include <span>

#include "metagen/domain.hpp"

namespace metagen {

/// Point coordinates (and density circles) enter the networks divided by this.
inline constexpr double kCoordScale = 100.0;

/// Maps a Condition to (x / 100, y / 100, standardized log m_cube). The log-mass
/// statistics are frozen from a training set and travel with every checkpoint.
class ConditionNormalizer {
 public:
  ConditionNormalizer() = default;
  ConditionNormalizer(double log_m_mean, double log_m_std);

  /// Throws DomainError on an empty set or non-positive masses.
  static ConditionNormalizer fit(std::span<const Condition> conds);

  /// Throws DomainError when the result is not finite (m_cube <= 0, NaN, ...).
  std::array<double, 3> normalize(const Condition& c) const;

  double log_m_mean() const noexcept { return log_m_mean_; }
  double log_m_std() const noexcept { return log_m_std_; }

  friend bool operator==(const ConditionNormalizer&, const ConditionNormalizer&) = default;

 private:
  double log_m_mean_ = 0.0;
  double log_m_std_ = 1.0;
};

}  // namespace metagen
