#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace metagen {

/// Wall thickness shared by both cylinders of a valid assembly.
inline constexpr double kThickness = 5.0;
inline constexpr std::size_t kDefaultCirclePoints = 30;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Scalar description of the two nested hollow cylinders.
/// Cylinder 1 is the outer one; contact means r_ext2 == r_int1.
struct SystemParams {
  double r_ext1 = 0.0;
  double r_int1 = 0.0;
  double r_ext2 = 0.0;
  double r_int2 = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

/// Lever distances and the counterweight that the assembly must balance.
struct Condition {
  double x = 0.0;
  double y = 0.0;
  double m_cube = 0.0;

  friend bool operator==(const Condition&, const Condition&) = default;
};

struct Circle {
  std::vector<Point2> points;

  friend bool operator==(const Circle&, const Circle&) = default;
};

struct CylinderCloud {
  Circle ext;
  Circle inner;  // internal border

  friend bool operator==(const CylinderCloud&, const CylinderCloud&) = default;
};

/// Point-cloud rendering of a system. Flattened layout (x0, y0, x1, y1, ...):
/// outer.ext | outer.inner | inner_cyl.ext | inner_cyl.inner | density1 | density2.
struct PointCloudSystem {
  CylinderCloud outer_cyl;
  CylinderCloud inner_cyl;
  Circle density1;
  Circle density2;

  std::size_t points_per_circle() const noexcept { return density1.points.size(); }

  std::vector<double> flatten() const;
  static PointCloudSystem unflatten(std::span<const double> flat, std::size_t n_points);

  friend bool operator==(const PointCloudSystem&, const PointCloudSystem&) = default;
};

/// Length of PointCloudSystem::flatten() for `n_points` per circle.
constexpr std::size_t flat_system_size(std::size_t n_points) noexcept { return 6 * 2 * n_points; }

/// Half-open ranges of each unitary component inside a flattened system.
struct ComponentSlice {
  std::size_t offset;
  std::size_t size;
};

enum class Component { OuterCylinder = 0, InnerCylinder = 1, Density1 = 2, Density2 = 3 };

inline constexpr std::array<Component, 4> kComponents = {
    Component::OuterCylinder, Component::InnerCylinder, Component::Density1, Component::Density2};

constexpr ComponentSlice component_slice(Component c, std::size_t n_points) noexcept {
  const std::size_t circle = 2 * n_points;
  switch (c) {
    case Component::OuterCylinder: return {0, 2 * circle};
    case Component::InnerCylinder: return {2 * circle, 2 * circle};
    case Component::Density1: return {4 * circle, circle};
    case Component::Density2: return {5 * circle, circle};
  }
  return {0, 0};
}

/// pi * [(r_ext1^2 - r_int1^2) d1 + (r_ext2^2 - r_int2^2) d2], the mass of the assembly.
double system_mass(const SystemParams& p) noexcept;

/// Counterweight that balances `p` at lever distances (x, y).
/// Throws DomainError if x <= 0, y <= 0 or an external radius is below its internal one.
double equilibrium_mass(const SystemParams& p, double x, double y);

/// n points of radius r at angles 2*pi*i/n, i = 0..n-1, centered at the origin.
Circle render_circle(double r, std::size_t n = kDefaultCirclePoints);

PointCloudSystem render_system(const SystemParams& p, std::size_t n = kDefaultCirclePoints);

/// Mean Euclidean norm of the points.
double estimate_radius(const Circle& c) noexcept;
double estimate_radius(std::span<const double> interleaved_xy) noexcept;

SystemParams estimate_params(const PointCloudSystem& pc) noexcept;
SystemParams estimate_params_flat(std::span<const double> flat, std::size_t n_points);

}  // namespace metagen
