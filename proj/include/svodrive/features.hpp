// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "svodrive/nn/tensor.hpp"
#include "svodrive/observation.hpp"

namespace svo::features {

/// Normalisation constants applied to raw point features.
struct FeatureScale {
  double position = 20.0;
  double speed = 6.0;
  double index = 10.0;
  double lane_width = 3.5;
};

/// x, y, cos(heading), sin(heading), speed, element index, point index [, aux].
int vehicle_width(bool with_aux);
/// x, y, cos(heading), sin(heading), lane width, element index, point index, one-hot kind (3).
int static_width();

/// Rows of point features plus the row range of each element.
struct PointBlock {
  nn::Matrix rows;
  nn::Segments elements;
};

/// Packs vehicle elements. With `with_aux`, the aux column comes from `aux_values` (one per
/// element) when given, otherwise from each point's aux slot (StructuralError if missing).
PointBlock pack_vehicles(std::span<const obs::PolylineElement* const> elements, bool with_aux,
                         const FeatureScale& scale, std::span<const double> aux_values = {});
PointBlock pack_static(std::span<const obs::PolylineElement* const> elements, const FeatureScale& scale);

}  // namespace svo::features
