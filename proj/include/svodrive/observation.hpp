// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "svodrive/sim.hpp"

namespace svo::obs {

enum class ElementKind { Centerline, Sideline, Route, Vehicle };

const char* to_string(ElementKind k);

/// One vectorised point: pose (ego frame), speed for vehicles, and the kind-dependent aux slot
/// (lane width for static elements, SVO for vehicles when exposed).
struct PointFeature {
  Pose2 pose;
  double speed = 0.0;
  std::optional<double> aux;
  int element_index = 0;
  int point_index = 0;
};

struct PolylineElement {
  ElementKind kind = ElementKind::Vehicle;
  int agent_id = -1;  // vehicles only
  std::vector<PointFeature> points;
};

struct Observation {
  PolylineElement ego;
  std::vector<PolylineElement> others;  // nearest first, at most max_neighbors
  std::vector<PolylineElement> static_elements;
  bool with_svo = false;
};

struct ObservationConfig {
  double radius = 30.0;
  int max_neighbors = 8;
  int horizon = 10;
  double static_spacing = 2.0;
  double static_crop = 60.0;
};

/// Network polylines pre-resampled at a fixed spacing, ready for per-agent cropping.
class StaticMap {
 public:
  StaticMap() = default;
  StaticMap(const sim::RoadNetwork& network, double spacing);

  const std::vector<Polyline>& centerlines() const { return centerlines_; }
  const std::vector<Polyline>& sidelines() const { return sidelines_; }
  const std::vector<Polyline>& routes() const { return routes_; }

 private:
  std::vector<Polyline> centerlines_;
  std::vector<Polyline> sidelines_;
  std::vector<Polyline> routes_;
};

/// Static polylines (centerlines, sidelines, then the ego's route when given) in the ego frame,
/// cropped to `crop` metres around the ego. Elements with no surviving points are dropped.
std::vector<PolylineElement> vectorize_static(const StaticMap& map, Pose2 ego_pose, std::optional<int> ego_route,
                                              double crop);
/// Convenience overload that resamples the network on the fly.
std::vector<PolylineElement> vectorize_static(const sim::RoadNetwork& network, Pose2 ego_pose,
                                              std::optional<int> ego_route, const ObservationConfig& cfg);

struct VehicleTrack {
  int agent_id = 0;
  double svo = 0.0;
  std::span<const sim::TrajectorySample> history;  // oldest first
};

/// Keeps the most recent min(horizon, available) samples of each track, oldest first,
/// transformed into `frame`. Element indices follow input order starting at `first_index`.
std::vector<PolylineElement> vectorize_vehicles(std::span<const VehicleTrack> tracks, int horizon, bool expose_svo,
                                                const Frame2& frame, int first_index = 0);

/// Ids of other present agents within `radius` of agent `k`, nearest first (ties by agent id).
std::vector<std::size_t> nearest_neighbors(const sim::World& world, std::size_t k, double radius,
                                           std::size_t max_count);

/// Partial, ego-frame view of agent `k` (an index into world.agents()).
Observation observe(const sim::World& world, std::size_t k, const ObservationConfig& cfg, bool expose_svo,
                    const StaticMap* map = nullptr);

/// True when no vehicle point anywhere in the observation carries an aux value.
bool is_svo_free(const Observation& o);

}  // namespace svo::obs
