// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "svodrive/error.hpp"
#include "svodrive/scenarios.hpp"

using namespace svo;
using namespace svo::scenario;

namespace {

ScenarioSpec bottleneck_spec() {
  ScenarioSpec s;
  s.kind = Kind::Bottleneck;
  return s;
}

ScenarioSpec merge_spec() {
  ScenarioSpec s;
  s.kind = Kind::Merge;
  return s;
}

double zone_width_at(const sim::RoadNetwork& net, double x) {
  double lo = 0.0, hi = 0.0;
  for (double y = 0.0; net.in_drivable_zone({x, y}); y += 0.01) hi = y;
  for (double y = 0.0; net.in_drivable_zone({x, y}); y -= 0.01) lo = y;
  return hi - lo;
}

TEST(Bottleneck, NarrowestAtMidSection) {
  const auto spec = bottleneck_spec();
  const auto net = build_bottleneck(spec);
  const auto& g = spec.bottleneck;
  const double mid = g.approach_length + g.throat_length / 2.0;
  const double narrow = zone_width_at(net, mid);
  EXPECT_NEAR(narrow, spec.lane_width * g.throat_lanes, 0.02);
  for (double x = 1.0; x < g.approach_length + g.throat_length + g.exit_length - 1.0; x += 5.0)
    EXPECT_GE(zone_width_at(net, x), narrow - 0.02) << "x=" << x;
  EXPECT_NEAR(zone_width_at(net, 5.0), spec.lane_width * g.lanes, 0.02);
}

TEST(Bottleneck, ThreeFamiliesShareTheThroat) {
  const auto spec = bottleneck_spec();
  const auto net = build_bottleneck(spec);
  ASSERT_EQ(net.routes.size(), 3u);
  const double mid = spec.bottleneck.approach_length + spec.bottleneck.throat_length / 2.0;
  for (const auto& r : net.routes) EXPECT_NEAR(r.project({mid, 0.0}).distance, 0.0, 1e-9);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j)
      EXPECT_GT(std::abs(net.routes[i].points().front().y - net.routes[j].points().front().y), 1.0);
}

TEST(Bottleneck, PassesInvariantChecker) {
  EXPECT_TRUE(sim::validate(build_bottleneck(bottleneck_spec())).empty());
  auto s = bottleneck_spec();
  s.bottleneck.lanes = 4;
  s.bottleneck.throat_lanes = 2;
  EXPECT_TRUE(sim::validate(build_bottleneck(s)).empty());
}

TEST(Bottleneck, RejectsDegenerateThroat) {
  auto s = bottleneck_spec();
  s.bottleneck.throat_length = 0.0;
  EXPECT_THROW(build_bottleneck(s), ConfigError);
  s = bottleneck_spec();
  s.bottleneck.throat_lanes = 4;
  EXPECT_THROW(build_bottleneck(s), ConfigError);
}

TEST(Merge, RampJoinsMainRouteOnce) {
  const auto spec = merge_spec();
  const auto net = build_merge(spec);
  ASSERT_EQ(net.routes.size(), 3u);
  const auto& main = net.routes[0];
  const auto& ramp = net.routes.back();
  // Runs of ramp points lying on the main route: exactly one, reaching the end.
  int runs = 0;
  bool on = false;
  for (const auto& p : ramp.points()) {
    const bool now = main.project(p.position()).distance < 1e-6;
    if (now && !on) ++runs;
    on = now;
  }
  EXPECT_EQ(runs, 1);
  EXPECT_TRUE(on);
  EXPECT_DOUBLE_EQ(ramp.points().back().x, main.points().back().x);
  EXPECT_GT(ramp.points().back().x, spec.merge.junction_x);
}

TEST(Merge, PassesInvariantChecker) {
  EXPECT_TRUE(sim::validate(build_merge(merge_spec())).empty());
  auto s = merge_spec();
  s.merge.merge_angle = 0.5;
  EXPECT_TRUE(sim::validate(build_merge(s)).empty());
}

TEST(Merge, ZeroAngleRejected) {
  auto s = merge_spec();
  s.merge.merge_angle = 0.0;
  EXPECT_THROW(build_merge(s), ConfigError);
}

TEST(Specs, KindMismatchRejected) {
  EXPECT_THROW(build_merge(bottleneck_spec()), ConfigError);
  EXPECT_THROW(build_bottleneck(merge_spec()), ConfigError);
}

TEST(Specs, InvalidRangesRejected) {
  auto s = merge_spec();
  s.min_agents = 0;
  EXPECT_THROW(validate_spec(s), ConfigError);
  s = merge_spec();
  s.max_agents = 65;
  EXPECT_THROW(validate_spec(s), ConfigError);
  s = merge_spec();
  s.lane_width = 1.9;
  EXPECT_THROW(validate_spec(s), ConfigError);
}

TEST(Spawn, FixedSvo) {
  auto spec = merge_spec();
  spec.svo.type = SvoDistribution::Type::Fixed;
  spec.svo.value = 0.5;
  const auto net = build_merge(spec);
  std::mt19937_64 rng(1);
  for (const auto& a : spawn_agents(net, spec, rng)) EXPECT_EQ(a.state.svo, 0.5);
}

TEST(Spawn, AgentCountCoversRange) {
  auto spec = merge_spec();
  spec.min_agents = 8;
  spec.max_agents = 20;
  const auto net = build_merge(spec);
  std::mt19937_64 rng(2);
  std::size_t lo = 100, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto n = spawn_agents(net, spec, rng).size();
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  EXPECT_EQ(lo, 8u);
  EXPECT_EQ(hi, 20u);
}

class SpawnProperties : public ::testing::TestWithParam<Kind> {};

TEST_P(SpawnProperties, CollisionFreeOnPathAndDeterministic) {
  ScenarioSpec spec;
  spec.kind = GetParam();
  spec.min_agents = 8;
  spec.max_agents = 20;
  const auto net = build_network(spec);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 a(seed), b(seed);
    const auto agents = spawn_agents(net, spec, a);
    const auto again = spawn_agents(net, spec, b);
    ASSERT_EQ(agents.size(), again.size());
    std::vector<sim::VehicleState> states;
    for (std::size_t k = 0; k < agents.size(); ++k) {
      const auto& ag = agents[k];
      EXPECT_EQ(ag.state.agent_id, static_cast<int>(k));
      EXPECT_EQ(ag.state.position, again[k].state.position);
      EXPECT_EQ(ag.state.svo, again[k].state.svo);
      EXPECT_GE(ag.state.svo, 0.0);
      EXPECT_LE(ag.state.svo, 1.0);
      EXPECT_LT(net.routes[static_cast<std::size_t>(ag.route)].project(ag.state.position).distance, 1e-9);
      EXPECT_TRUE(net.in_drivable_zone(ag.state.position));
      states.push_back(ag.state);
    }
    EXPECT_TRUE(sim::detect_collisions(states).empty()) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Scenarios, SpawnProperties, ::testing::Values(Kind::Bottleneck, Kind::Merge));

TEST(Spawn, ImpossibleCountReportsSpawnError) {
  auto spec = bottleneck_spec();
  spec.min_agents = spec.max_agents = 64;
  spec.min_gap = 30.0;
  const auto net = build_bottleneck(spec);
  std::mt19937_64 rng(3);
  try {
    spawn_agents(net, spec, rng);
    FAIL() << "expected SpawnError";
  } catch (const SpawnError& e) {
    EXPECT_NE(std::string(e.what()).find("of 64"), std::string::npos);
  }
}

TEST(Spawn, SvoListIndexedById) {
  auto spec = merge_spec();
  spec.min_agents = spec.max_agents = 4;
  spec.svo.type = SvoDistribution::Type::List;
  spec.svo.values = {0.1, 0.2, 0.3, 0.4};
  const auto net = build_merge(spec);
  std::mt19937_64 rng(4);
  const auto agents = spawn_agents(net, spec, rng);
  for (std::size_t k = 0; k < agents.size(); ++k) EXPECT_EQ(agents[k].state.svo, spec.svo.values[k]);
}

}  // namespace
