#include "etdkf/detection.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace etdkf;

namespace {

std::vector<Vector> gauss(std::size_t n, Eigen::Index dim, double mean, double sd, std::mt19937_64& rng)
{
    std::normal_distribution<double> nd(mean, sd);
    std::vector<Vector> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(Vector::NullaryExpr(dim, [&] { return nd(rng); }));
    return out;
}

// brute-force k-NN reference: sort all distances
double brute_knn(const std::vector<Vector>& s, std::size_t i, std::size_t k)
{
    std::vector<double> d;
    for (std::size_t j = 0; j < s.size(); ++j)
        if (j != i) d.push_back((s[i] - s[j]).norm());
    std::sort(d.begin(), d.end());
    return d[k - 1];
}

double gaussian_kl(const Matrix& S1, const Vector& m1, const Matrix& S0, const Vector& m0)
{
    const Matrix S0i = S0.inverse();
    const Vector dm = m0 - m1;
    return 0.5 * ((S0i * S1).trace() + dm.dot(S0i * dm) - static_cast<double>(m1.size()) +
                  std::log(S0.determinant() / S1.determinant()));
}

} // namespace

TEST(Window, RingBehaviour)
{
    InnovationWindow w(1, 3);
    for (int i = 0; i < 5; ++i) w.push(Vector::Constant(1, i));
    ASSERT_TRUE(w.full());
    const auto s = w.snapshot();
    EXPECT_EQ(s[0](0), 2);
    EXPECT_EQ(s[2](0), 4);
    EXPECT_THROW(w.push(Vector::Zero(2)), ConfigError);
    EXPECT_THROW(InnovationWindow(1, 0), ConfigError);
}

TEST(Knn, OneDimensionalExamples)
{
    std::vector<Vector> s;
    for (double v : {0.0, 1.0, 3.0}) s.push_back(Vector::Constant(1, v));
    EXPECT_DOUBLE_EQ(knn_distance(s, 0, 1), 1.0);
    EXPECT_DOUBLE_EQ(knn_distance(s, 0, 2), 3.0);
    EXPECT_DOUBLE_EQ(knn_distance(s, 2, 1), 2.0);
    EXPECT_THROW(knn_distance(s, 0, 3), ConfigError);
}

TEST(Knn, DuplicatesFloored)
{
    std::vector<Vector> s(3, Vector::Zero(2));
    EXPECT_DOUBLE_EQ(knn_distance(s, 0, 1, 1e-12), 1e-12);
}

TEST(Knn, MatchesBruteForce)
{
    std::mt19937_64 rng(2);
    const auto s = gauss(60, 3, 0.0, 1.0, rng);
    for (std::size_t k = 1; k <= 5; ++k)
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_DOUBLE_EQ(knn_distance(s, i, k), brute_knn(s, i, k));
}

TEST(Kl, IdenticalWindowIdentity)
{
    std::mt19937_64 rng(40);
    for (std::size_t w : {10u, 40u, 100u}) {
        const auto X = gauss(w, 2, 0.0, 1.0, rng);
        std::vector<Vector> copy;
        for (const auto& v : X) copy.push_back(Vector(v));
        const double D = estimate_kl(X, copy, 4);
        EXPECT_NEAR(D, std::log(double(w) / double(w - 1)), 1e-12);
    }
}

TEST(Kl, IdentityThroughWhitening)
{
    std::mt19937_64 rng(41);
    Matrix omega(2, 2);
    omega << 4.0, 1.0, 1.0, 2.0;
    const Whitener wh(omega);
    auto X = gauss(40, 2, 0.0, 2.0, rng);
    for (auto& v : X) v = wh(v);
    std::vector<Vector> copy(X.begin(), X.end());
    EXPECT_NEAR(estimate_kl(X, copy, 4), std::log(40.0 / 39.0), 1e-12);
}

TEST(Kl, ScaleInvariant)
{
    std::mt19937_64 rng(5);
    const auto X = gauss(80, 2, 0.3, 1.0, rng);
    const auto Z = gauss(80, 2, 0.0, 1.0, rng);
    std::vector<Vector> Xs, Zs;
    for (const auto& v : X) Xs.push_back(7.5 * v);
    for (const auto& v : Z) Zs.push_back(7.5 * v);
    EXPECT_NEAR(estimate_kl(X, Z, 3), estimate_kl(Xs, Zs, 3), 1e-10);
}

TEST(Kl, UnitShiftOneDimension)
{
    // N(0,1) vs N(1,1): closed form 0.5
    double acc = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        const auto X = gauss(2000, 1, 0.0, 1.0, rng);
        const auto Z = gauss(2000, 1, 1.0, 1.0, rng);
        acc += estimate_kl(X, Z, 5);
    }
    EXPECT_NEAR(acc / 20.0, 0.5, 0.15);
}

TEST(Kl, TwoDimensionalScaledGaussian)
{
    // P narrower than Q; the reverse case converges far more slowly in n
    Matrix S1 = Matrix::Identity(2, 2) * 0.25;
    const double ref = gaussian_kl(S1, Vector::Zero(2), Matrix::Identity(2, 2), Vector::Zero(2));
    double acc = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(77 + seed);
        const auto X = gauss(1500, 2, 0.0, 0.5, rng);
        const auto Z = gauss(1500, 2, 0.0, 1.0, rng);
        acc += estimate_kl(X, Z, 5);
    }
    EXPECT_NEAR(acc / 10.0, ref, 0.2 * ref);
}

TEST(Kl, SameDistributionNearZero)
{
    double acc = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(300 + seed);
        acc += estimate_kl(gauss(1000, 2, 0.0, 1.0, rng), gauss(1000, 2, 0.0, 1.0, rng), 5);
    }
    EXPECT_NEAR(acc / 10.0, 0.0, 0.05);
}

TEST(Kl, InputChecks)
{
    std::mt19937_64 rng(1);
    EXPECT_THROW(estimate_kl(gauss(1, 1, 0, 1, rng), gauss(10, 1, 0, 1, rng), 1), ConfigError);
    EXPECT_THROW(estimate_kl(gauss(4, 1, 0, 1, rng), gauss(10, 1, 0, 1, rng), 4), ConfigError);
    EXPECT_THROW(estimate_kl(gauss(10, 1, 0, 1, rng), gauss(4, 1, 0, 1, rng), 4), ConfigError);
}

TEST(Averager, MatchesSlidingAverage)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 3.0);
    DivergenceAverager avg(7);
    std::vector<double> hist;
    for (int i = 0; i < 3000; ++i) {
        hist.push_back(u(rng));
        const double v = avg.push(hist.back());
        ASSERT_NEAR(v, sliding_average(hist, 7), 1e-12);
    }
}

TEST(Averager, ConstantInputConstantOutput)
{
    DivergenceAverager avg(10);
    const double c = std::log(40.0 / 39.0);
    for (int i = 0; i < 50; ++i) EXPECT_DOUBLE_EQ(avg.push(c), c);
    EXPECT_EQ(avg.count(), 10u);
    EXPECT_THROW(DivergenceAverager(0), ConfigError);
}

TEST(Reference, SampleCovariance)
{
    Matrix omega(2, 2);
    omega << 3.0, 0.5, 0.5, 1.0;
    std::mt19937_64 rng(8);
    const auto r = nominal_reference_window(omega, 50000, rng);
    Matrix S = Matrix::Zero(2, 2);
    for (const auto& v : r) S += v * v.transpose();
    S /= double(r.size());
    EXPECT_LT((S - omega).norm() / omega.norm(), 0.03);
    EXPECT_THROW(nominal_reference_window(-Matrix::Identity(2, 2), 5, rng), NumericError);
}

TEST(Reference, SeedReproducible)
{
    std::mt19937_64 a(3), b(3);
    const auto ra = nominal_reference_window(Matrix::Identity(2, 2), 20, a);
    const auto rb = nominal_reference_window(Matrix::Identity(2, 2), 20, b);
    for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(ra[i], rb[i]);
}

TEST(Whitener, InvertsCholesky)
{
    Matrix omega(2, 2);
    omega << 4.0, 1.2, 1.2, 2.0;
    const Whitener wh(omega);
    const Matrix L = Eigen::LLT<Matrix>(omega).matrixL();
    Vector v(2);
    v << 0.7, -3.0;
    EXPECT_NEAR((L * wh(v) - v).norm(), 0.0, 1e-14);
    EXPECT_THROW(Whitener(Matrix::Zero(2, 2)), NumericError);
}

TEST(Detect, StrictThreshold)
{
    EXPECT_EQ(detect(0.5, 0.5), Hypothesis::H0);
    EXPECT_EQ(detect(0.5000001, 0.5), Hypothesis::H1);
    EXPECT_EQ(detect(std::log(40.0 / 39.0), 0.5), Hypothesis::H0);
}

TEST(Config, Validation)
{
    DetectorConfig c;
    EXPECT_NO_THROW(c.validate());
    c.delta = 0.02; // below log(40/39)
    EXPECT_THROW(c.validate(), ConfigError);
    c = DetectorConfig{};
    c.k_nn = 40;
    EXPECT_THROW(c.validate(), ConfigError);
    c = DetectorConfig{};
    c.averaging = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(NeighborInnovation, Definition)
{
    Vector y(2), x(2);
    y << 3, 4;
    x << 1, 1;
    Matrix C = Matrix::Identity(2, 2) * 2.0;
    EXPECT_EQ(neighbor_innovation(y, C, x), Vector::Constant(2, 1.0) + Vector::Unit(2, 1));
}
