#include "etdkf/resilience.hpp"

#include <gtest/gtest.h>

using namespace etdkf;

TEST(Belief, Statistic)
{
    EXPECT_DOUBLE_EQ(belief_statistic(0.0, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(belief_statistic(0.5, 0.5), 0.5);
    EXPECT_DOUBLE_EQ(belief_statistic(-0.2, 0.5), 1.0);
    EXPECT_NEAR(belief_statistic(4.5, 0.5), 0.1, 1e-15);
}

TEST(Belief, NormalizedConstantInputIsFixedPoint)
{
    DiscountedBelief b(0.5);
    EXPECT_DOUBLE_EQ(b.value(), 1.0);
    for (int i = 0; i < 30; ++i) EXPECT_NEAR(b.update(0.3), 0.3, 1e-15);
}

TEST(Belief, NormalizedMatchesExplicitSum)
{
    // beta(k+1) = sum_l kappa^(k-l) chi(l) / sum_l kappa^(k-l)
    const double kappa = 0.7;
    DiscountedBelief b(kappa);
    std::vector<double> chi;
    for (int k = 0; k < 40; ++k) {
        chi.push_back(0.5 + 0.4 * std::sin(0.3 * k));
        const double got = b.update(chi.back());
        double num = 0.0, den = 0.0;
        for (int l = 0; l <= k; ++l) {
            num += std::pow(kappa, k - l) * chi[l];
            den += std::pow(kappa, k - l);
        }
        ASSERT_NEAR(got, num / den, 1e-12);
    }
}

TEST(Belief, LiteralAndDifference)
{
    DiscountedBelief lit(0.5, DiscountMode::Literal);
    EXPECT_DOUBLE_EQ(lit.update(1.0), 0.25);
    EXPECT_DOUBLE_EQ(lit.update(1.0), 0.375);
    DiscountedBelief diff(0.5, DiscountMode::Difference);
    EXPECT_DOUBLE_EQ(diff.update(1.0), 0.5);
    EXPECT_DOUBLE_EQ(diff.update(1.0), 1.0);
}

TEST(Belief, StaysInUnitInterval)
{
    DiscountedBelief b(0.5);
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> e(1.0);
    for (int i = 0; i < 1000; ++i) {
        const double v = update_confidence(b, belief_statistic(e(rng), 0.5));
        ASSERT_GT(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(NeighborEstimate, Averages)
{
    Vector a = Vector::Constant(2, 1.0), b = Vector::Constant(2, 3.0), own = Vector::Constant(2, -5.0);
    const std::vector<Vector> p{a, b};
    const std::vector<double> w{1.0, 0.0}, half{0.5, 0.5}, zero{0.0, 0.0};
    EXPECT_EQ(weighted_neighbor_estimate(p, w, own), a);
    EXPECT_EQ(weighted_neighbor_estimate(p, half, own), Vector::Constant(2, 2.0));
    EXPECT_EQ(weighted_neighbor_estimate(p, half, own, NeighborAverage::Literal), Vector::Constant(2, 1.0));
    EXPECT_EQ(weighted_neighbor_estimate(p, zero, own), own);
    EXPECT_EQ(weighted_neighbor_estimate({}, {}, own), own);
    EXPECT_THROW(weighted_neighbor_estimate(p, std::vector<double>{1.0}, own), ConfigError);
}

TEST(ResilientUpdate, FullConfidenceIsNominal)
{
    ProcessModel m{Matrix::Identity(2, 2), Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Identity(2, 2)};
    auto est = NodeEstimator::initial(m, 2, 0.1 * Matrix::Identity(2, 2));
    est.K = 0.4 * Matrix::Identity(2, 2);
    est.x_prior << 1.0, 2.0;
    est.x_pred << 0.5, 0.5;
    Vector y(2), n1(2), n2(2);
    y << 3, -1;
    n1 << 0, 1;
    n2 << 2, 2;
    const std::vector<Vector> p{n1, n2};
    const std::vector<double> ones{1.0, 1.0};
    const auto a = resilient_measurement_update(est, y, Matrix::Identity(2, 2), Vector::Zero(2), 1.0, p, ones);
    const auto b = measurement_update(est, y, Matrix::Identity(2, 2), p, est.x_pred);
    EXPECT_EQ(a.x_post, b.x_post);
}

TEST(ResilientUpdate, ZeroConfidenceIgnoresMeasurement)
{
    ProcessModel m{Matrix::Identity(2, 2), Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Identity(2, 2)};
    auto est = NodeEstimator::initial(m, 2, Matrix::Zero(2, 2));
    est.K = 0.4 * Matrix::Identity(2, 2);
    const Vector mm = Vector::Constant(2, 2.0);
    const auto a =
        resilient_measurement_update(est, Vector::Constant(2, 100.0), Matrix::Identity(2, 2), mm, 0.0, {}, {});
    const auto b = resilient_measurement_update(est, Vector::Constant(2, -7.0), Matrix::Identity(2, 2), mm, 0.0, {}, {});
    EXPECT_EQ(a.x_post, b.x_post);
    EXPECT_NEAR((a.x_post - 0.4 * mm).norm(), 0.0, 1e-15);
}

TEST(Bound, TermsForIdentityInputs)
{
    BoundInputs in;
    in.A = Matrix::Identity(2, 2);
    in.M = {0.5 * Matrix::Identity(2, 2), 0.25 * Matrix::Identity(2, 2)};
    in.L = Matrix::Zero(2, 2);
    in.L << 1, -1, -1, 1;
    in.gamma_max = 0.1;
    in.alpha_over_C = 0.36;
    in.B = 2.0;
    in.tau = 1.5;
    in.beta = {1.0, 0.6};
    const auto t = bound_terms(in);
    EXPECT_DOUBLE_EQ(t.A_o, 0.5);
    EXPECT_NEAR(t.triggering_term, 1.0 * 2.0 * 0.1 * std::sqrt(2.0) * 2.36, 1e-12);
    EXPECT_NEAR(t.belief_term, 1.5 * 0.4 * std::sqrt(2.0) * 1.5, 1e-12);
    EXPECT_NEAR(t.B_o, t.triggering_term + t.belief_term, 1e-15);
}

TEST(Bound, MonitorRecursionAndLimits)
{
    BoundMonitor mon(4.0);
    BoundTerms t;
    t.A_o = 0.5;
    t.B_o = 1.0;
    for (int i = 0; i < 60; ++i) mon.advance(t);
    EXPECT_NEAR(mon.bound(), 2.0, 1e-12);
    EXPECT_NEAR(mon.geometric_limit(), 2.0, 1e-15);
    EXPECT_NEAR(mon.stated_limit(), 1.0, 1e-15);
    EXPECT_TRUE(mon.holds(2.0));
    EXPECT_FALSE(mon.holds(2.1));
    t.A_o = 1.2;
    mon.advance(t);
    EXPECT_TRUE(std::isinf(mon.geometric_limit()));
}

TEST(MajorityIntact, MajorityIntactNeighbors)
{
    // ring of 6 plus chords: every node has 3 neighbors
    Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {0, 3}, {1, 4}, {2, 5}});
    EXPECT_TRUE(majority_violations(g, {1}).empty());
    Graph path(3, {{0, 1}, {1, 2}});
    EXPECT_EQ(majority_violations(path, {1}), (std::vector<NodeId>{0, 2}));
}

TEST(Config, Validation)
{
    ResilientConfig c;
    EXPECT_NO_THROW(c.validate());
    c.kappa1 = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = ResilientConfig{};
    c.tau = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
}
