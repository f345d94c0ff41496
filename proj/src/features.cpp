// SPDX-License-Identifier: Apache-2.0
#include "svodrive/features.hpp"

#include <cmath>

#include "svodrive/error.hpp"

namespace svo::features {

int vehicle_width(bool with_aux) { return with_aux ? 8 : 7; }
int static_width() { return 10; }

PointBlock pack_vehicles(std::span<const obs::PolylineElement* const> elements, bool with_aux,
                         const FeatureScale& scale, std::span<const double> aux_values) {
  if (!aux_values.empty() && aux_values.size() != elements.size())
    throw StructuralError("pack_vehicles: one aux value per element required");
  std::size_t n = 0;
  for (const auto* e : elements) n += e->points.size();
  PointBlock b;
  b.rows.resize(static_cast<Eigen::Index>(n), vehicle_width(with_aux));
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < elements.size(); ++k) {
    const auto* e = elements[k];
    for (const auto& p : e->points) {
      auto row = b.rows.row(r++);
      row(0) = p.pose.x / scale.position;
      row(1) = p.pose.y / scale.position;
      row(2) = std::cos(p.pose.heading);
      row(3) = std::sin(p.pose.heading);
      row(4) = p.speed / scale.speed;
      row(5) = p.element_index / scale.index;
      row(6) = p.point_index / scale.index;
      if (with_aux) {
        if (!aux_values.empty()) {
          row(7) = aux_values[k];
        } else {
          if (!p.aux) throw StructuralError("vehicle point lacks the aux (SVO) slot");
          row(7) = *p.aux;
        }
      }
    }
    b.elements.push(static_cast<int>(e->points.size()));
  }
  return b;
}

PointBlock pack_static(std::span<const obs::PolylineElement* const> elements, const FeatureScale& scale) {
  std::size_t n = 0;
  for (const auto* e : elements) n += e->points.size();
  PointBlock b;
  b.rows = nn::Matrix::Zero(static_cast<Eigen::Index>(n), static_width());
  Eigen::Index r = 0;
  for (const auto* e : elements) {
    const int kind = e->kind == obs::ElementKind::Centerline ? 0 : e->kind == obs::ElementKind::Sideline ? 1 : 2;
    for (const auto& p : e->points) {
      auto row = b.rows.row(r++);
      row(0) = p.pose.x / scale.position;
      row(1) = p.pose.y / scale.position;
      row(2) = std::cos(p.pose.heading);
      row(3) = std::sin(p.pose.heading);
      row(4) = p.aux.value_or(0.0) / scale.lane_width;
      row(5) = p.element_index / scale.index;
      row(6) = p.point_index / scale.index;
      row(7 + kind) = 1.0;
    }
    b.elements.push(static_cast<int>(e->points.size()));
  }
  return b;
}

}  // namespace svo::features
