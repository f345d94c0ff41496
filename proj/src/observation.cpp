// SPDX-License-Identifier: Apache-2.0
#include "svodrive/observation.hpp"

#include <algorithm>
#include <numeric>

namespace svo::obs {

const char* to_string(ElementKind k) {
  switch (k) {
    case ElementKind::Centerline:
      return "centerline";
    case ElementKind::Sideline:
      return "sideline";
    case ElementKind::Route:
      return "route";
    case ElementKind::Vehicle:
      return "vehicle";
  }
  return "unknown";
}

StaticMap::StaticMap(const sim::RoadNetwork& network, double spacing) {
  for (const auto& l : network.centerlines) centerlines_.push_back(l.resampled(spacing));
  for (const auto& l : network.sidelines) sidelines_.push_back(l.resampled(spacing));
  for (const auto& l : network.routes) routes_.push_back(l.resampled(spacing));
}

std::vector<PolylineElement> vectorize_static(const StaticMap& map, Pose2 ego_pose, std::optional<int> ego_route,
                                              double crop) {
  const Frame2 frame(ego_pose);
  const double crop2 = crop * crop;
  std::vector<PolylineElement> out;
  auto add = [&](const Polyline& line, ElementKind kind) {
    PolylineElement e;
    e.kind = kind;
    const int index = static_cast<int>(out.size());
    for (const Pose2& p : line.points()) {
      const double dx = p.x - ego_pose.x;
      const double dy = p.y - ego_pose.y;
      if (dx * dx + dy * dy > crop2) continue;
      PointFeature f;
      f.pose = frame.to_local(p);
      f.aux = line.lane_width();
      f.element_index = index;
      f.point_index = static_cast<int>(e.points.size());
      e.points.push_back(f);
    }
    if (!e.points.empty()) out.push_back(std::move(e));
  };
  for (const auto& l : map.centerlines()) add(l, ElementKind::Centerline);
  for (const auto& l : map.sidelines()) add(l, ElementKind::Sideline);
  if (ego_route && *ego_route >= 0 && static_cast<std::size_t>(*ego_route) < map.routes().size())
    add(map.routes()[static_cast<std::size_t>(*ego_route)], ElementKind::Route);
  return out;
}

std::vector<PolylineElement> vectorize_static(const sim::RoadNetwork& network, Pose2 ego_pose,
                                              std::optional<int> ego_route, const ObservationConfig& cfg) {
  return vectorize_static(StaticMap(network, cfg.static_spacing), ego_pose, ego_route, cfg.static_crop);
}

std::vector<PolylineElement> vectorize_vehicles(std::span<const VehicleTrack> tracks, int horizon, bool expose_svo,
                                                const Frame2& frame, int first_index) {
  std::vector<PolylineElement> out;
  out.reserve(tracks.size());
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    const auto& tr = tracks[t];
    PolylineElement e;
    e.kind = ElementKind::Vehicle;
    e.agent_id = tr.agent_id;
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(horizon, 0)), tr.history.size());
    const std::size_t begin = tr.history.size() - n;
    for (std::size_t k = begin; k < tr.history.size(); ++k) {
      PointFeature f;
      f.pose = frame.to_local(tr.history[k].pose);
      f.speed = tr.history[k].speed;
      if (expose_svo) f.aux = tr.svo;
      f.element_index = first_index + static_cast<int>(t);
      f.point_index = static_cast<int>(k - begin);
      e.points.push_back(f);
    }
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

// History of agent k padded with frozen samples after it stopped being simulated, so every
// track ends at the current tick.
std::vector<sim::TrajectorySample> current_history(const sim::World& world, std::size_t k, int horizon) {
  const auto& a = world.agents()[k];
  const std::size_t want = static_cast<std::size_t>(world.tick()) + 1;
  std::vector<sim::TrajectorySample> h;
  const std::size_t have = a.history.size();
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(horizon), want);
  const std::size_t padded = want > have ? want - have : 0;
  const std::size_t from_history = keep > padded ? keep - padded : 0;
  for (std::size_t i = have - std::min(have, from_history); i < have; ++i) h.push_back(a.history[i]);
  for (std::size_t i = 0; i < std::min(padded, keep); ++i) h.push_back({a.state.pose(), 0.0});
  return h;
}

}  // namespace

std::vector<std::size_t> nearest_neighbors(const sim::World& world, std::size_t k, double radius,
                                           std::size_t max_count) {
  const auto& agents = world.agents();
  const Vec2 ego = agents[k].state.position;
  struct Cand {
    double dist;
    int id;
    std::size_t slot;
  };
  std::vector<Cand> cands;
  for (std::size_t j = 0; j < agents.size(); ++j) {
    if (j == k || agents[j].status == sim::AgentStatus::Success) continue;
    const double dist = (agents[j].state.position - ego).norm();
    if (dist <= radius) cands.push_back({dist, agents[j].state.agent_id, j});
  }
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.dist != b.dist ? a.dist < b.dist : a.id < b.id; });
  if (cands.size() > max_count) cands.resize(max_count);
  std::vector<std::size_t> out;
  for (const auto& c : cands) out.push_back(c.slot);
  return out;
}

Observation observe(const sim::World& world, std::size_t k, const ObservationConfig& cfg, bool expose_svo,
                    const StaticMap* map) {
  const auto& agents = world.agents();
  const auto& ego = agents.at(k);
  const Frame2 frame(ego.state.pose());

  Observation o;
  o.with_svo = expose_svo;

  const auto ego_hist = current_history(world, k, cfg.horizon);
  const VehicleTrack ego_track{ego.state.agent_id, ego.state.svo, ego_hist};
  o.ego = vectorize_vehicles(std::span(&ego_track, 1), cfg.horizon, expose_svo, frame, 0).front();

  const auto near = nearest_neighbors(world, k, cfg.radius, static_cast<std::size_t>(std::max(cfg.max_neighbors, 0)));
  std::vector<std::vector<sim::TrajectorySample>> hists;
  hists.reserve(near.size());
  std::vector<VehicleTrack> tracks;
  for (std::size_t j : near) {
    hists.push_back(current_history(world, j, cfg.horizon));
    tracks.push_back({agents[j].state.agent_id, agents[j].state.svo, hists.back()});
  }
  o.others = vectorize_vehicles(tracks, cfg.horizon, expose_svo, frame, 1);

  if (map) {
    o.static_elements = vectorize_static(*map, ego.state.pose(), ego.route, cfg.static_crop);
  } else {
    o.static_elements = vectorize_static(world.network(), ego.state.pose(), ego.route, cfg);
  }
  return o;
}

bool is_svo_free(const Observation& o) {
  auto clean = [](const PolylineElement& e) {
    return std::none_of(e.points.begin(), e.points.end(), [](const PointFeature& p) { return p.aux.has_value(); });
  };
  return !o.with_svo && clean(o.ego) && std::all_of(o.others.begin(), o.others.end(), clean);
}

}  // namespace svo::obs
