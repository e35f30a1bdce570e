#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ddkf/metrics.hpp"

using namespace ddkf;

TEST(MsdAccumulate, PerfectEstimatesGiveZero) {
  const std::vector<TargetState> truths{Vector{1, 2, 3, 4}};
  const std::vector<Vector> est(3, truths[0]);
  const ClusterErrors e = msd_accumulate(truths, est, ClusterAssignment{{1, 1, 1}, 1});
  EXPECT_EQ(e.mean(0), 0.0);
  EXPECT_EQ(e.mean(1), 0.0);
}

TEST(MsdAccumulate, SingleNodeUnitErrors) {
  const std::vector<TargetState> truths{Vector{1, 1, 1, 1}};
  const std::vector<Vector> est{Vector{0, 0, 0, 0}};
  EXPECT_EQ(msd_accumulate(truths, est, ClusterAssignment{{1}, 1}).mean(1), 4.0);
}

TEST(MsdAccumulate, ClusterMeanOverNodes) {
  const std::vector<TargetState> truths{Vector(4), Vector{10, 0, 0, 0}};
  const std::vector<Vector> est{Vector{1, 1, 0, 0}, Vector{2, 0, 0, 0}, Vector{10, 0, 0, 0}};
  const ClusterErrors e = msd_accumulate(truths, est, ClusterAssignment{{1, 1, 2}, 2});
  EXPECT_DOUBLE_EQ(e.mean(1), 3.0);
  EXPECT_DOUBLE_EQ(e.mean(2), 0.0);
  EXPECT_DOUBLE_EQ(e.mean(0), 2.0);
}

TEST(ToDb, Examples) {
  EXPECT_EQ(to_db(1.0), 0.0);
  EXPECT_DOUBLE_EQ(to_db(100.0), 20.0);
  EXPECT_DOUBLE_EQ(to_db(0.0), -300.0);
}

TEST(PairwiseSum, MatchesNaiveOnIntegers) {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  EXPECT_EQ(pairwise_sum(v), 499500.0);
}

TEST(Convergence, ConstantSeriesConvergesImmediately) {
  EXPECT_EQ(convergence_iteration(std::vector<double>(100, -12.0), 3.0), 0u);
}

TEST(Convergence, PlateauAtForty) {
  std::vector<double> s(100);
  for (std::size_t j = 0; j < 100; ++j) s[j] = j < 40 ? 20.0 - static_cast<double>(j) : -20.0;
  const auto c = convergence_iteration(s, 3.0);
  ASSERT_TRUE(c.has_value());
  EXPECT_LE(*c, 40u);
  EXPECT_EQ(*c, 37u);
}

TEST(Convergence, DivergingSeriesNeverSettles) {
  std::vector<double> s(100);
  for (std::size_t j = 0; j < 100; ++j) s[j] = static_cast<double>(j);
  EXPECT_FALSE(convergence_iteration(s, 3.0).has_value());
}

TEST(Convergence, TooShortIsAnError) {
  EXPECT_THROW((void)convergence_iteration(std::vector<double>(5, 0.0), 3.0), std::invalid_argument);
}

TEST(SteadyState, MeanOfFinalFifth) {
  std::vector<double> s(10, 0.0);
  s[8] = 2.0;
  s[9] = 4.0;
  EXPECT_DOUBLE_EQ(steady_state_level(s), 3.0);
}

TEST(Recovery, IdenticalAndSwapped) {
  const ClusterAssignment truth{{1, 1, 2, 2, 2}, 2};
  EXPECT_EQ(cluster_recovery_score(truth, truth), 1.0);
  EXPECT_EQ(cluster_recovery_score(ClusterAssignment{{2, 2, 1, 1, 1}, 2}, truth), 1.0);
}

TEST(Recovery, OneMisassignedNode) {
  std::vector<std::size_t> labels(30, 1);
  for (std::size_t m = 16; m < 30; ++m) labels[m] = 2;
  const ClusterAssignment truth{labels, 2};
  labels[3] = 2;
  EXPECT_DOUBLE_EQ(cluster_recovery_score(ClusterAssignment{labels, 2}, truth), 29.0 / 30.0);
}

TEST(Recovery, ExtraInferredClustersCountAsErrors) {
  const ClusterAssignment truth{{1, 1, 2, 2}, 2};
  const ClusterAssignment split{{1, 2, 3, 3}, 3};
  EXPECT_DOUBLE_EQ(cluster_recovery_score(split, truth), 0.75);
}
