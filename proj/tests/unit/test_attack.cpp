#include "etdkf/attack.hpp"

#include "../support/network_mc.hpp"

#include <gtest/gtest.h>

using namespace etdkf;

namespace {

Matrix diag52()
{
    Matrix C = Matrix::Zero(2, 2);
    C(0, 0) = 5;
    C(1, 1) = 2;
    return C;
}

} // namespace

TEST(Signal, Shapes)
{
    std::mt19937_64 rng(1);
    SignalSpec s;
    s.shape = SignalSpec::Shape::Sinusoid;
    s.offset = 2;
    s.amplitude = 10;
    s.frequency = 100;
    EXPECT_DOUBLE_EQ(s.value(0, rng), 2.0);
    EXPECT_DOUBLE_EQ(s.value(3, rng), 2.0 + 10.0 * std::sin(300.0));
    SignalSpec u;
    u.shape = SignalSpec::Shape::Uniform;
    u.low = -1;
    u.high = 2;
    for (int i = 0; i < 1000; ++i) {
        const double v = u.value(i, rng);
        ASSERT_GE(v, -1.0);
        ASSERT_LT(v, 2.0);
    }
    EXPECT_TRUE(SignalSpec{}.is_zero());
    EXPECT_FALSE(s.is_zero());
}

TEST(Injection, MeasurementAndChannel)
{
    Vector y(2), f(2);
    y << 1, 2;
    f << 0.5, -1;
    EXPECT_EQ(corrupt_measurement(y, f), Vector(y + f));
    EXPECT_EQ(corrupt_measurement(y, Vector::Zero(2)), y);
    EXPECT_EQ(corrupt_channel(y, f), Vector(y + f));
    EXPECT_THROW(corrupt_measurement(y, Vector::Zero(3)), ConfigError);
}

TEST(Injection, HeldOffset)
{
    const Vector now = Vector::Constant(2, 3.0), prev = Vector::Constant(2, -1.0);
    EXPECT_EQ(channel_offset_step(true, now, prev), now);
    EXPECT_EQ(channel_offset_step(false, now, prev), prev);
}

TEST(NonTriggering, DirectResidualIsExactlyPhi)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 5.0);
    const Matrix C = diag52();
    for (int t = 0; t < 200; ++t) {
        const Vector y = Vector::NullaryExpr(2, [&] { return nd(rng); });
        const Vector xp = Vector::NullaryExpr(2, [&] { return nd(rng); });
        const Vector ya = craft_non_triggering_direct(y, C, xp, 1.62);
        EXPECT_NEAR((ya - C * xp).norm(), 1.62, 1e-12);
        EXPECT_FALSE(should_transmit(ya, C, xp, 1.8));
    }
}

TEST(NonTriggering, DegenerateDirection)
{
    const Matrix C = diag52();
    const Vector xp = Vector::Constant(2, 1.0);
    const Vector ya = craft_non_triggering_direct(C * xp, C, xp, 0.9);
    EXPECT_NEAR((ya - C * xp).norm(), 0.9, 1e-12);
}

TEST(NonTriggering, SamplerNeverTriggers)
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 2.0);
    const Matrix C = diag52();
    int fallbacks = 0;
    for (int t = 0; t < 500; ++t) {
        const Vector y = Vector::NullaryExpr(2, [&] { return nd(rng); });
        const Vector xp = Vector::NullaryExpr(2, [&] { return nd(rng); });
        const auto r = craft_non_triggering(y, C, xp, 1.62, NonTriggerMode::IntervalSampler, rng);
        EXPECT_LE((r.y - C * xp).norm(), 1.62 + 1e-12);
        fallbacks += r.fell_back;
    }
    EXPECT_GT(fallbacks, 0);
    EXPECT_THROW(craft_non_triggering(Vector::Zero(2), C, Vector::Zero(2), -1.0, NonTriggerMode::Direct, rng),
                 ConfigError);
}

TEST(Replay, ResidualIsUpsilon)
{
    const Matrix C = diag52();
    Vector xp(2), ups(2);
    xp << 0.3, -0.7;
    ups << 1.98, 0.0;
    const Vector y = craft_replay(xp, C, ups);
    EXPECT_NEAR(((y - C * xp) - ups).norm(), 0.0, 1e-15);
    EXPECT_TRUE(should_transmit(y, C, xp, 1.8));
    EXPECT_THROW(craft_replay(xp, C, Vector::Zero(3)), ConfigError);
}

TEST(Compromised, ZeroAttackMatchesNominalStep)
{
    auto s = etdkf::testing::two_node_setup(1);
    const auto& m = s.model;
    CompromisedState cs{m.x0_mean, m.x0_mean, m.x0_mean, m.P0, m.P0, Matrix::Zero(2, 2)};
    auto est = NodeEstimator::initial(m, 2, s.gamma[0]);
    Vector y(2), nb(2);
    y << 2.0, 0.3;
    nb << 0.1, 0.2;
    CompromisedInputs in{y, Vector::Zero(2), true, {nb}, {}, std::nullopt};
    const auto out = compromised_step(cs, in, s.sensors[0], m, s.gamma[0]);
    est.x_pred = update_predictive(true, est.x_prior, est.x_pred, m.A);
    est = measurement_step(est, y, s.sensors[0], std::vector<Vector>{nb});
    est = time_update(est, m.A, m.Q);
    EXPECT_NEAR((out.x_prior - est.x_prior).norm(), 0.0, 1e-14);
    EXPECT_NEAR((out.P_prior - est.P_prior).norm(), 0.0, 1e-14);
}

TEST(Compromised, InjectionShiftsPosteriorByGainTimesF)
{
    auto s = etdkf::testing::two_node_setup(1);
    const auto& m = s.model;
    CompromisedState cs{m.x0_mean, m.x0_mean, m.x0_mean, m.P0, m.P0, Matrix::Zero(2, 2)};
    Vector y(2), f(2), off(2);
    y << 2.0, 0.3;
    f << 1.0, -2.0;
    off << 0.5, 0.5;
    CompromisedInputs clean{y, Vector::Zero(2), true, {m.x0_mean}, {}, std::nullopt};
    CompromisedInputs dirty{y, f, true, {m.x0_mean}, {off}, std::nullopt};
    const auto a = compromised_step(cs, clean, s.sensors[0], m, s.gamma[0]);
    const auto b = compromised_step(cs, dirty, s.sensors[0], m, s.gamma[0]);
    EXPECT_NEAR((b.x_post - a.x_post - a.K * f - s.gamma[0] * off).norm(), 0.0, 1e-14);
}

TEST(Moments, InitialSharedAndIndependent)
{
    const auto s = etdkf::testing::two_node_setup(1);
    const auto sh = initial_moments(s.model, 2, CrossInit::Shared);
    const auto in = initial_moments(s.model, 2, CrossInit::Independent);
    EXPECT_EQ(sh.Pbar[0][1], s.model.P0);
    EXPECT_EQ(in.Pbar[0][1], Matrix::Zero(2, 2));
    EXPECT_EQ(in.Pbar[1][1], s.model.P0);
}

TEST(Moments, DiagonalFormulaAgreesWithFullSum)
{
    const auto s = etdkf::testing::two_node_setup(12);
    ErrorMomentTracker t(s.model, s.sensors, s.graph, s.gamma);
    for (const auto& z : s.schedule) {
        t.step(z, s.f);
        for (NodeId i = 0; i < 2; ++i) {
            const Matrix a = t.posterior().Pp[i][i];
            const Matrix b = t.generic_diagonal(i, s.f[i]);
            ASSERT_LT((a - b).norm(), 1e-10 * std::max(1.0, b.norm())) << "node " << i;
        }
    }
}

TEST(Moments, NoAttackNoConsensusReducesToKalman)
{
    auto s = etdkf::testing::two_node_setup(20);
    s.gamma.assign(2, Matrix::Zero(2, 2));
    s.f.assign(2, Vector::Zero(2));
    ErrorMomentTracker t(s.model, s.sensors, s.graph, s.gamma);
    auto est = NodeEstimator::initial(s.model, 2, Matrix::Zero(2, 2));
    for (const auto& z : s.schedule) {
        t.step(z, s.f);
        est.K = kalman_gain(est.P_prior, s.sensors[0].C, s.sensors[0].R);
        est.P_post = posterior_covariance(est.P_prior, est.K, s.sensors[0].C, s.sensors[0].R);
        EXPECT_LT((t.posterior().Pp[0][0] - est.P_post).norm(), 1e-10);
        est = time_update(est, s.model.A, s.model.Q);
    }
}

TEST(Moments, MonteCarloSmall)
{
    const auto s = etdkf::testing::two_node_setup(8);
    ErrorMomentTracker t(s.model, s.sensors, s.graph, s.gamma);
    const auto K = etdkf::testing::run_tracker(t, s);
    const auto emp = etdkf::testing::simulate_posterior_moments(s, K, 4000, 17);
    for (NodeId i = 0; i < 2; ++i)
        for (NodeId j = 0; j < 2; ++j) {
            const Matrix& P = t.posterior().Pp[i][j];
            EXPECT_LT((emp[i][j] - P).norm() / P.norm(), 0.15) << i << "," << j;
        }
}

TEST(Moments, WrongSizesThrow)
{
    const auto s = etdkf::testing::two_node_setup(1);
    ErrorMomentTracker t(s.model, s.sensors, s.graph, s.gamma);
    EXPECT_THROW(t.step({true}, s.f), ConfigError);
    EXPECT_THROW(ErrorMomentTracker(s.model, {s.sensors[0]}, s.graph, s.gamma), ConfigError);
}
