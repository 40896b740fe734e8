#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cfsdmpc/deadlock.hpp"

using namespace cfsdmpc;

namespace {

const std::vector<double> kPair{1.5, 1.0};

Trajectory offset_line(double y, std::size_t H)
{
  Trajectory t;
  for (std::size_t k = 0; k < H; ++k) { t.points.emplace_back(static_cast<double>(k), y); }
  return t;
}

}  // namespace

TEST(EvaluateTail, ConstantOffsetIsDeadlock)
{
  const std::vector<double> d{2.0, 2.0};
  const auto st = evaluate_tail(d, DeadlockConfig{2, 0.15, 2.0});
  EXPECT_TRUE(st.is_deadlocked);
  EXPECT_DOUBLE_EQ(st.tail_spread, 0.0);
  EXPECT_DOUBLE_EQ(st.tail_mean_distance, 2.0);
}

TEST(EvaluateTail, ConvergingTailIsNot)
{
  const std::vector<double> d{1.0, 0.5, 0.1};
  const auto st = evaluate_tail(d, DeadlockConfig{3, 0.01, 0.2});
  EXPECT_FALSE(st.is_deadlocked);
  EXPECT_NEAR(st.tail_spread, 0.9, 1e-12);
}

TEST(EvaluateTail, OnReferenceIsNot)
{
  const std::vector<double> d(5, 0.05);
  EXPECT_FALSE(evaluate_tail(d, DeadlockConfig{5, 0.01, 0.2}).is_deadlocked);
}

TEST(EvaluateTail, ImpliesThresholds)
{
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 3.0), e(0.01, 1.0);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> d(5);
    const double base = u(rng);
    for (auto & x : d) { x = base + 0.1 * u(rng) * (i % 3 == 0 ? 0.0 : 1.0); }
    const DeadlockConfig cfg{5, e(rng), e(rng)};
    const auto st = evaluate_tail(d, cfg);
    if (st.is_deadlocked) {
      EXPECT_LE(st.tail_spread, cfg.spread_eps);
      EXPECT_GE(st.tail_mean_distance, cfg.distance_eps);
    }
  }
}

TEST(Detect, PathAndExitPointModes)
{
  const ReferencePath path{{Position2(0, 0), Position2(100, 0)}, 10.0};
  const DeadlockConfig cfg{5, 0.01, 0.2};
  EXPECT_TRUE(detect(offset_line(4.0, 20), path, cfg).is_deadlocked);
  EXPECT_FALSE(detect(offset_line(0.0, 20), path, cfg).is_deadlocked);

  // a plan parked 3 m short of the exit point
  Trajectory parked;
  parked.points.assign(10, Position2(0.0, -3.0));
  const auto st = detect(parked, path, DeadlockConfig{2, 0.15, 2.0}, ExitPointDistance{Position2(0.0, 0.0)});
  EXPECT_TRUE(st.is_deadlocked);
  EXPECT_NEAR(st.tail_mean_distance, 3.0, 1e-12);
  EXPECT_THROW(detect(offset_line(0.0, 3), path, cfg), std::invalid_argument);
}

TEST(SideOf, Convention)
{
  const Eigen::Vector2d east(1.0, 0.0);
  EXPECT_EQ(side_of(Position2(0, 1), Position2(0, 0), east), Side::Left);
  EXPECT_EQ(side_of(Position2(0, -1), Position2(0, 0), east), Side::Right);
  EXPECT_EQ(side_of(Position2(5, 0), Position2(0, 0), east), Side::OnPath);
  EXPECT_STREQ(to_string(Side::Left), "left");
}

TEST(AssignPriorities, LeftBeatsRightWhenSymmetric)
{
  const std::vector<DeadlockCandidate> c{{1, VehicleState(Position2(0, 4), 10, 0), 8.0, Side::Right, std::nullopt},
                                         {0, VehicleState(Position2(0, -4), 10, 0), 8.0, Side::Left, std::nullopt}};
  EXPECT_EQ(assign_priorities(c), (std::vector<std::size_t>{0, 1}));
}

TEST(AssignPriorities, FrontFirst)
{
  const std::vector<DeadlockCandidate> c{{0, VehicleState(Position2(0, 0), 10, 0), 1.0, Side::Left, std::nullopt},
                                         {1, VehicleState(Position2(5, 0), 10, 0), 1.0, Side::Left, std::nullopt}};
  EXPECT_EQ(assign_priorities(c), (std::vector<std::size_t>{1, 0}));
  // along -x the order flips
  EXPECT_EQ(assign_priorities(c, Eigen::Vector2d(-1.0, 0.0)), (std::vector<std::size_t>{0, 1}));
}

TEST(AssignPriorities, SmallerMeanFirst)
{
  const std::vector<DeadlockCandidate> c{{0, VehicleState(Position2(0, 0), 10, 0), 2.0, Side::Left, std::nullopt},
                                         {1, VehicleState(Position2(0, 0), 10, 0), 1.0, Side::Left, std::nullopt}};
  EXPECT_EQ(assign_priorities(c), (std::vector<std::size_t>{1, 0}));
}

TEST(AssignPriorities, IsAPermutationAndIgnoresInputOrder)
{
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<DeadlockCandidate> c;
  for (std::size_t i = 0; i < 6; ++i) {
    c.push_back({i, VehicleState(Position2(std::round(u(rng)), 0), 10, 0), std::round(u(rng)),
                 static_cast<Side>(i % 3), std::nullopt});
  }
  const auto a = assign_priorities(c);
  std::shuffle(c.begin(), c.end(), rng);
  EXPECT_EQ(assign_priorities(c), a);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(Resolve, MergingLadder)
{
  const std::vector<std::size_t> prio{4, 3};
  const std::map<std::size_t, double> base{{1, 10.0}, {2, 10.0}, {3, 10.0}, {4, 10.0}};
  const std::vector<double> ladder{2.5, 2.0};
  const auto a = resolve(prio, base, ladder, {1, 2});
  EXPECT_DOUBLE_EQ(a.speed_of(4), 25.0);
  EXPECT_DOUBLE_EQ(a.speed_of(3), 20.0);
  EXPECT_DOUBLE_EQ(a.speed_of(1), 10.0);
  EXPECT_FALSE(a.is_modified(1));
  EXPECT_TRUE(a.is_modified(4));
}

TEST(Resolve, CrossingPair)
{
  const std::vector<std::size_t> prio{2, 1};
  const std::map<std::size_t, double> base{{1, 10.0}, {2, 10.0}};
  const auto a = resolve(prio, base, kPair);
  EXPECT_DOUBLE_EQ(a.speed_of(2), 15.0);
  EXPECT_DOUBLE_EQ(a.speed_of(1), 10.0);
  EXPECT_FALSE(a.is_modified(1));
}

TEST(Resolve, SingleVehicleUnitLadder)
{
  const std::vector<std::size_t> prio{0};
  const std::map<std::size_t, double> base{{0, 10.0}};
  const std::vector<double> ladder{1.0};
  const auto a = resolve(prio, base, ladder);
  EXPECT_DOUBLE_EQ(a.speed_of(0), 10.0);
  EXPECT_FALSE(a.is_modified(0));
}

TEST(Resolve, DistinctSpeedsForDeadlocked)
{
  const std::vector<std::size_t> prio{3, 0, 2, 1};
  const std::map<std::size_t, double> base{{0, 10.0}, {1, 10.0}, {2, 10.0}, {3, 10.0}};
  const auto a = resolve(prio, base, kDefaultSpeedLadder);
  std::set<double> speeds;
  for (auto id : prio) {
    EXPECT_GT(a.speed_of(id), 0.0);
    speeds.insert(a.speed_of(id));
  }
  EXPECT_EQ(speeds.size(), prio.size());
}

TEST(Resolve, ExhaustedLadderIsAnError)
{
  const std::vector<std::size_t> prio{0, 1, 2};
  const std::map<std::size_t, double> base{{0, 10.0}, {1, 10.0}, {2, 10.0}};
  try {
    resolve(prio, base, kPair);
    FAIL() << "expected an error";
  } catch (const std::runtime_error & e) {
    EXPECT_NE(std::string(e.what()).find("under-configured"), std::string::npos);
  }
}

TEST(MaybeRevert, RestoresOnlyWhenOnReference)
{
  const std::map<std::size_t, double> base{{0, 10.0}};
  SpeedAssignment a{{{0, 25.0}}, base};
  const auto ref = offset_line(0.0, 10);
  const auto restored = maybe_revert(a, 0, ref, ref);
  EXPECT_DOUBLE_EQ(restored.speed_of(0), 10.0);

  const auto kept = maybe_revert(a, 0, offset_line(0.5, 10), ref, 0.1);
  EXPECT_EQ(kept, a);
}

TEST(CheckConsensus, Examples)
{
  const std::vector<Trajectory> refs{offset_line(0.0, 10), offset_line(10.0, 10)};
  EXPECT_TRUE(check_consensus(refs, refs, 3.0, 0.5));

  const std::vector<Trajectory> off{offset_line(2.0, 10), offset_line(10.0, 10)};
  EXPECT_FALSE(check_consensus(off, refs, 3.0, 0.5));

  // on reference but too close to each other
  const std::vector<Trajectory> close{offset_line(0.0, 10), offset_line(1.0, 10)};
  EXPECT_FALSE(check_consensus(close, close, 3.0, 0.5));
}
