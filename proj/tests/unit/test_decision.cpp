// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "../support.hpp"
#include "svodrive/decision.hpp"
#include "svodrive/error.hpp"

using namespace svo;
using namespace svo::decision;

namespace {

PolicyInput input_for(const obs::Observation& o, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PolicyInput in{&o, u(rng), {}};
  for (std::size_t j = 0; j < o.others.size(); ++j) in.neighbor_svos.push_back(u(rng));
  return in;
}

TEST(DecisionNet, DeterministicAndBounded) {
  DecisionNet net(svo::testing::tiny_decision());
  DecisionNet twin(svo::testing::tiny_decision());
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto o = svo::testing::random_observation(rng, false, 8, 3, t % 2 ? 30.0 : 500.0);
    const auto in = input_for(o, rng);
    const auto a = net.decide(in);
    const auto b = net.decide(in);
    const auto c = twin.decide(in);
    EXPECT_EQ(a.action, b.action);
    EXPECT_EQ(a.action, c.action);
    for (double v : a.action) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
    ASSERT_TRUE(a.log_std.has_value());
    for (double v : *a.log_std) {
      EXPECT_GE(v, kLogStdMin);
      EXPECT_LE(v, kLogStdMax);
    }
  }
}

TEST(DecisionNet, JointNeighbourPermutationInvariance) {
  DecisionNet net(svo::testing::tiny_decision());
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto o = svo::testing::random_observation(rng, false);
    const auto in = input_for(o, rng);
    std::vector<std::size_t> order(o.others.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto p = o;
    PolicyInput pin{&p, in.self_svo, {}};
    for (std::size_t j = 0; j < order.size(); ++j) {
      p.others[j] = o.others[order[j]];
      pin.neighbor_svos.push_back(in.neighbor_svos[order[j]]);
    }
    const auto a = net.decide(in);
    const auto b = net.decide(pin);
    for (int k = 0; k < 2; ++k) {
      EXPECT_NEAR(a.action[k], b.action[k], 1e-9);
      EXPECT_NEAR((*a.mean)[k], (*b.mean)[k], 1e-9);
    }
  }
}

TEST(DecisionNet, SvoInputsChangeTheDecision) {
  DecisionNet net(svo::testing::tiny_decision());
  std::mt19937_64 rng(3);
  const auto o = svo::testing::random_observation(rng, false);
  auto in = input_for(o, rng);
  const auto a = net.decide(in);
  in.self_svo = in.self_svo > 0.5 ? 0.0 : 1.0;
  const auto b = net.decide(in);
  EXPECT_NE(*a.mean, *b.mean);
}

TEST(DecisionNet, BatchedEqualsSingle) {
  DecisionNet net(svo::testing::tiny_decision());
  std::mt19937_64 rng(4);
  std::vector<obs::Observation> obs;
  for (int i = 0; i < 5; ++i) obs.push_back(svo::testing::random_observation(rng, false));
  std::vector<PolicyInput> ins;
  for (const auto& o : obs) ins.push_back(input_for(o, rng));
  const auto all = net.decide(ins);
  for (std::size_t i = 0; i < ins.size(); ++i) {
    const auto one = net.decide(ins[i]);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(one.action[k], all[i].action[k], 1e-12);
  }
}

TEST(DecisionNet, GradientsMatchFiniteDifferences) {
  DecisionNet net(svo::testing::tiny_decision(17));
  std::mt19937_64 rng(5);
  std::vector<obs::Observation> obs;
  for (int i = 0; i < 3; ++i) obs.push_back(svo::testing::random_observation(rng, false, 4, 2, 20.0));
  std::vector<PolicyInput> ins;
  for (const auto& o : obs) ins.push_back(input_for(o, rng));
  std::vector<const PolicyInput*> ptrs;
  for (const auto& in : ins) ptrs.push_back(&in);
  const auto res = svo::testing::check_gradients(
      net.params(), [&](nn::Tape& t) { return nn::mean(nn::square(net.forward(t, ptrs))); }, 100, 6);
  EXPECT_EQ(res.checked, 100);
  EXPECT_LT(res.max_relative_error, 1e-4) << res.worst;
}

TEST(CheckInput, RejectsMalformedInputs) {
  std::mt19937_64 rng(6);
  const auto o = svo::testing::random_observation(rng, false);
  auto in = input_for(o, rng);
  EXPECT_NO_THROW(check_input(in));
  auto bad = in;
  bad.observation = nullptr;
  EXPECT_THROW(check_input(bad), StructuralError);
  bad = in;
  bad.neighbor_svos.push_back(0.5);
  EXPECT_THROW(check_input(bad), StructuralError);
  bad = in;
  bad.self_svo = 1.5;
  EXPECT_THROW(check_input(bad), StructuralError);
  bad = in;
  bad.neighbor_svos[0] = -0.1;
  EXPECT_THROW(check_input(bad), StructuralError);
  DecisionNet net(svo::testing::tiny_decision());
  bad = in;
  bad.self_svo = 2.0;
  EXPECT_THROW(net.decide(bad), StructuralError);
}

TEST(DecisionNet, HeadsMustDivideWidth) {
  auto c = svo::testing::tiny_decision();
  c.heads = 3;
  c.svo_embed = 5;
  EXPECT_THROW(DecisionNet{c}, StructuralError);
}

TEST(RandomPolicy, UniformInBox) {
  RandomPolicy p;
  std::mt19937_64 rng(7);
  const auto o = svo::testing::random_observation(rng, false);
  std::vector<PolicyInput> ins(1000, input_for(o, rng));
  double lo = 1.0, hi = -1.0;
  for (const auto& out : p.act(ins, rng))
    for (double v : out.action) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  EXPECT_LT(lo, -0.95);
  EXPECT_GT(hi, 0.95);
}

// ---------------------------------------------------------------------------------------------
// scripted baseline

obs::PolylineElement route_along_x(double from, double to) {
  obs::PolylineElement e;
  e.kind = obs::ElementKind::Route;
  for (double x = from; x <= to; x += 2.0) {
    obs::PointFeature f;
    f.pose = {x, 0.0, 0.0};
    f.aux = 3.5;
    e.points.push_back(f);
  }
  return e;
}

obs::PolylineElement vehicle(int id, double x, double y, double heading, double speed) {
  obs::PolylineElement e;
  e.agent_id = id;
  obs::PointFeature f;
  f.pose = {x, y, heading};
  f.speed = speed;
  e.points.push_back(f);
  return e;
}

obs::Observation scene(double ego_speed) {
  obs::Observation o;
  o.ego = vehicle(0, 0.0, 0.0, 0.0, ego_speed);
  o.static_elements.push_back(route_along_x(-10.0, 80.0));
  return o;
}

TEST(Scripted, EmptyRoadCruisesStraight) {
  for (double phi : {0.0, 0.5, 1.0}) {
    ScriptedDiagnostics d;
    const auto out = scripted_policy(scene(4.0), phi, {}, &d);
    EXPECT_DOUBLE_EQ(d.target_speed, sim::kMaxSpeed);
    EXPECT_NEAR(d.steering, 0.0, 1e-12);
    EXPECT_NEAR(out.action[0], 1.0, 1e-12);
    EXPECT_NEAR(out.action[1], 0.0, 1e-12);
    EXPECT_EQ(d.yielded_conflicts, 0);
  }
}

TEST(Scripted, SteersTowardsOffsetRoute) {
  auto o = scene(4.0);
  for (auto& p : o.static_elements[0].points) p.pose.y = 2.0;
  ScriptedDiagnostics d;
  scripted_policy(o, 0.5, {}, &d);
  EXPECT_GT(d.steering, 0.0);
}

TEST(Scripted, CrossingTrafficSlowsMoreProsocialAgents) {
  auto o = scene(4.0);
  o.others.push_back(vehicle(1, 20.0, -10.0, std::numbers::pi / 2, 4.0));
  double previous = sim::kMaxSpeed + 1.0;
  std::vector<double> targets;
  for (double phi : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    ScriptedDiagnostics d;
    scripted_policy(o, phi, {}, &d);
    EXPECT_EQ(d.yielded_conflicts, 1);
    EXPECT_LE(d.target_speed, previous);
    previous = d.target_speed;
    targets.push_back(d.target_speed);
  }
  EXPECT_LT(targets.back(), targets.front());
}

TEST(Scripted, FollowsLeaderWithSvoDependentGap) {
  auto o = scene(5.0);
  o.others.push_back(vehicle(1, 12.0, 0.3, 0.0, 3.0));
  ScriptedDiagnostics selfish, social;
  scripted_policy(o, 0.0, {}, &selfish);
  scripted_policy(o, 1.0, {}, &social);
  ASSERT_TRUE(selfish.leader_gap.has_value());
  EXPECT_NEAR(*selfish.leader_gap, 12.0 - 4.6, 1e-9);
  EXPECT_LT(social.target_speed, selfish.target_speed);
}

obs::PolylineElement joining_lane(double join_x) {
  // Parallel 3.5 m to the right, then a straight ramp onto the route ending at join_x.
  obs::PolylineElement e;
  e.kind = obs::ElementKind::Centerline;
  for (double x = -10.0; x <= 80.0; x += 2.0) {
    obs::PointFeature f;
    const double y = x < join_x - 20.0 ? -3.5 : (x < join_x ? -3.5 * (join_x - x) / 20.0 : 0.0);
    f.pose = {x, y, 0.0};
    f.aux = 3.5;
    e.points.push_back(f);
  }
  return e;
}

TEST(Scripted, ConvergingLaneSlowsProsocialAgents) {
  auto o = scene(6.0);
  o.static_elements.push_back(joining_lane(14.0));
  std::vector<double> targets;
  for (double phi : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    ScriptedDiagnostics d;
    scripted_policy(o, phi, {}, &d);
    ASSERT_TRUE(d.convergence_distance.has_value());
    EXPECT_NEAR(*d.convergence_distance, 4.0, 1.0);
    targets.push_back(d.target_speed);
  }
  EXPECT_DOUBLE_EQ(targets.front(), sim::kMaxSpeed);
  for (std::size_t i = 1; i < targets.size(); ++i) EXPECT_LE(targets[i], targets[i - 1]);
  EXPECT_LT(targets.back(), 5.0);
  // Far from the junction nobody slows down.
  auto far = scene(6.0);
  far.static_elements.push_back(joining_lane(40.0));
  ScriptedDiagnostics d_far;
  scripted_policy(far, 1.0, {}, &d_far);
  ASSERT_TRUE(d_far.convergence_distance.has_value());
  EXPECT_DOUBLE_EQ(d_far.target_speed, sim::kMaxSpeed);
  // Braking-distance envelope towards the courtesy speed of 3 m/s.
  auto near = scene(3.0);
  near.static_elements.push_back(joining_lane(12.0));
  ScriptedDiagnostics d;
  scripted_policy(near, 1.0, {}, &d);
  ASSERT_TRUE(d.convergence_distance.has_value());
  EXPECT_NEAR(d.target_speed, std::sqrt(9.0 + 2.0 * 1.5 * *d.convergence_distance), 1e-12);
  EXPECT_NEAR(*d.convergence_distance, 2.0, 1.0);
}

TEST(Scripted, OwnLaneAndDistantLanesAreNotConvergences) {
  auto o = scene(6.0);
  auto own = route_along_x(-10.0, 80.0);
  own.kind = obs::ElementKind::Centerline;
  o.static_elements.push_back(own);
  auto parallel = own;
  for (auto& p : parallel.points) p.pose.y = 3.5;
  o.static_elements.push_back(parallel);
  o.static_elements.push_back(joining_lane(75.0));
  ScriptedDiagnostics d;
  scripted_policy(o, 1.0, {}, &d);
  EXPECT_FALSE(d.convergence_distance.has_value());
  EXPECT_DOUBLE_EQ(d.target_speed, sim::kMaxSpeed);
}

TEST(Scripted, StationaryVehicleOffTheCorridorIsIgnored) {
  auto o = scene(4.0);
  o.others.push_back(vehicle(1, 20.0, -10.0, std::numbers::pi / 2, 0.0));
  ScriptedDiagnostics d;
  scripted_policy(o, 1.0, {}, &d);
  EXPECT_DOUBLE_EQ(d.target_speed, sim::kMaxSpeed);
}

}  // namespace
