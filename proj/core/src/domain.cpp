#include "metagen/domain.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "metagen/error.hpp"

namespace metagen {

namespace {

void append(std::vector<double>& out, const Circle& c) {
  for (const auto& p : c.points) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
}

Circle read_circle(std::span<const double> flat, std::size_t& cursor, std::size_t n) {
  Circle c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i, cursor += 2) c.points.push_back({flat[cursor], flat[cursor + 1]});
  return c;
}

}  // namespace

std::vector<double> PointCloudSystem::flatten() const {
  std::vector<double> out;
  out.reserve(flat_system_size(points_per_circle()));
  append(out, outer_cyl.ext);
  append(out, outer_cyl.inner);
  append(out, inner_cyl.ext);
  append(out, inner_cyl.inner);
  append(out, density1);
  append(out, density2);
  return out;
}

PointCloudSystem PointCloudSystem::unflatten(std::span<const double> flat, std::size_t n_points) {
  if (flat.size() != flat_system_size(n_points)) {
    throw ShapeError("flattened system has " + std::to_string(flat.size()) + " values, expected " +
                     std::to_string(flat_system_size(n_points)));
  }
  std::size_t cursor = 0;
  PointCloudSystem pc;
  pc.outer_cyl.ext = read_circle(flat, cursor, n_points);
  pc.outer_cyl.inner = read_circle(flat, cursor, n_points);
  pc.inner_cyl.ext = read_circle(flat, cursor, n_points);
  pc.inner_cyl.inner = read_circle(flat, cursor, n_points);
  pc.density1 = read_circle(flat, cursor, n_points);
  pc.density2 = read_circle(flat, cursor, n_points);
  return pc;
}

double system_mass(const SystemParams& p) noexcept {
  const double annulus1 = p.r_ext1 * p.r_ext1 - p.r_int1 * p.r_int1;
  const double annulus2 = p.r_ext2 * p.r_ext2 - p.r_int2 * p.r_int2;
  return std::numbers::pi * (annulus1 * p.d1 + annulus2 * p.d2);
}

double equilibrium_mass(const SystemParams& p, double x, double y) {
  if (!(x > 0.0)) throw DomainError("lever distance x must be positive");
  if (!(y > 0.0)) throw DomainError("lever distance y must be positive");
  if (p.r_ext1 < p.r_int1 || p.r_ext2 < p.r_int2) {
    throw DomainError("external radius smaller than internal radius");
  }
  return system_mass(p) * y / x;
}

Circle render_circle(double r, std::size_t n) {
  if (!(r > 0.0)) throw DomainError("circle radius must be positive");
  if (n < 3) throw DomainError("a circle needs at least 3 points");
  Circle c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    c.points.push_back({r * std::cos(theta), r * std::sin(theta)});
  }
  return c;
}

PointCloudSystem render_system(const SystemParams& p, std::size_t n) {
  PointCloudSystem pc;
  pc.outer_cyl.ext = render_circle(p.r_ext1, n);
  pc.outer_cyl.inner = render_circle(p.r_int1, n);
  pc.inner_cyl.ext = render_circle(p.r_ext2, n);
  pc.inner_cyl.inner = render_circle(p.r_int2, n);
  pc.density1 = render_circle(p.d1, n);
  pc.density2 = render_circle(p.d2, n);
  return pc;
}

double estimate_radius(const Circle& c) noexcept {
  if (c.points.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : c.points) sum += std::hypot(p.x, p.y);
  return sum / static_cast<double>(c.points.size());
}

double estimate_radius(std::span<const double> xy) noexcept {
  const std::size_t n = xy.size() / 2;
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::hypot(xy[2 * i], xy[2 * i + 1]);
  return sum / static_cast<double>(n);
}

SystemParams estimate_params(const PointCloudSystem& pc) noexcept {
  return {estimate_radius(pc.outer_cyl.ext), estimate_radius(pc.outer_cyl.inner),
          estimate_radius(pc.inner_cyl.ext), estimate_radius(pc.inner_cyl.inner),
          estimate_radius(pc.density1),      estimate_radius(pc.density2)};
}

SystemParams estimate_params_flat(std::span<const double> flat, std::size_t n_points) {
  if (flat.size() != flat_system_size(n_points)) {
    throw ShapeError("flattened system has " + std::to_string(flat.size()) + " values, expected " +
                     std::to_string(flat_system_size(n_points)));
  }
  const std::size_t circle = 2 * n_points;
  auto radius = [&](std::size_t k) { return estimate_radius(flat.subspan(k * circle, circle)); };
  return {radius(0), radius(1), radius(2), radius(3), radius(4), radius(5)};
}

}  // namespace metagen
