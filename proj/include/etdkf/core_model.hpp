#pragma once

#include "etdkf/common.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace etdkf {

struct ProcessModel {
    Matrix A;
    Matrix Q;
    Vector x0_mean;
    Matrix P0;

    Eigen::Index state_dim() const { return A.rows(); }

    void validate() const
    {
        const auto n = A.rows();
        if (n == 0) throw ConfigError("process: A is empty");
        require_shape(A, n, n, "process.A");
        require_shape(Q, n, n, "process.Q");
        require_shape(P0, n, n, "process.P0");
        require_size(x0_mean, n, "process.x0_mean");
        if (!is_psd(Q)) throw ConfigError("process.Q must be symmetric positive semidefinite");
        if (!is_psd(P0)) throw ConfigError("process.P0 must be symmetric positive semidefinite");
    }
};

struct SensorModel {
    Matrix C;
    Matrix R;

    Eigen::Index output_dim() const { return C.rows(); }

    void validate(Eigen::Index n) const
    {
        const auto p = C.rows();
        if (p == 0) throw ConfigError("sensor: C has no rows");
        require_shape(C, p, n, "sensor.C");
        require_shape(R, p, p, "sensor.R");
        if (!is_pd(R)) throw ConfigError("sensor.R must be symmetric positive definite");
    }
};

inline Vector step_process(const ProcessModel& model, const Vector& x, const Vector& w)
{
    const auto n = model.A.rows();
    require_size(x, n, "step_process: x");
    require_size(w, n, "step_process: w");
    return model.A * x + w;
}

inline Vector measure(const SensorModel& sensor, const Vector& x, const Vector& v)
{
    require_size(x, sensor.C.cols(), "measure: x");
    require_size(v, sensor.C.rows(), "measure: v");
    return sensor.C * x + v;
}

inline Matrix observability_matrix(const Matrix& A, const Matrix& C)
{
    const auto n = A.rows();
    Matrix O(C.rows() * n, n);
    Matrix block = C;
    for (Eigen::Index i = 0; i < n; ++i) {
        O.middleRows(i * C.rows(), C.rows()) = block;
        block = block * A;
    }
    return O;
}

// Singular values under 1e-9 of the largest count as zero.
inline int observability_rank(const Matrix& A, const Matrix& C, double rel_tol = 1e-9)
{
    if (A.rows() != A.cols() || C.cols() != A.rows())
        throw ConfigError("observability_rank: A is " + shape(A) + ", C is " + shape(C));
    if (C.rows() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(observability_matrix(A, C));
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0)) ++rank;
    return rank;
}

inline Matrix stack_outputs(std::span<const SensorModel> sensors, const NodeSet& subset, Eigen::Index n)
{
    Eigen::Index rows = 0;
    for (auto j : subset) rows += sensors[j].C.rows();
    Matrix Cs(rows, n);
    Eigen::Index r = 0;
    for (auto j : subset) {
        Cs.middleRows(r, sensors[j].C.rows()) = sensors[j].C;
        r += sensors[j].C.rows();
    }
    return Cs;
}

inline bool is_collectively_observable(const ProcessModel& model, std::span<const SensorModel> sensors,
                                       const NodeSet& subset, std::size_t total)
{
    if (sensors.empty()) throw ConfigError("is_collectively_observable: empty sensor list");
    for (auto j : subset)
        if (j >= total || j >= sensors.size())
            throw ConfigError("is_collectively_observable: node " + std::to_string(j + 1) + " out of range");
    if (2 * subset.size() <= total) return false;
    const auto n = model.state_dim();
    return observability_rank(model.A, stack_outputs(sensors, subset, n)) == n;
}

// Zero-mean Gaussian draws through a symmetric square root, so singular
// covariances are fine.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, const Matrix& cov) : rng_(seed), factor_(sqrt_factor(cov)) {}

    Vector sample()
    {
        Vector z(factor_.cols());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(rng_);
        return factor_ * z;
    }

    Eigen::Index dim() const { return factor_.rows(); }

    static Matrix sqrt_factor(const Matrix& cov)
    {
        if (!is_psd(cov)) throw NumericError("covariance is not symmetric PSD");
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(cov));
        Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return es.eigenvectors() * d.asDiagonal();
    }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    Matrix factor_;
};

namespace stream_id {
inline constexpr std::uint64_t process = 0;
inline constexpr std::uint64_t initial_state = 1;
inline constexpr std::uint64_t sensor_base = 100;
inline constexpr std::uint64_t reference_base = 1000;
inline constexpr std::uint64_t attack_base = 2000;
inline constexpr std::uint64_t calibration = 3000;
} // namespace stream_id

// One master seed, independent sub-seeds per stream id. Adding a sensor
// never shifts another stream.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t sub_seed(std::uint64_t id) const
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                          static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32), 0x5eedu};
        std::uint32_t out[2];
        seq.generate(out, out + 2);
        return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    }

    GaussianStream gaussian(std::uint64_t id, const Matrix& cov) const { return {sub_seed(id), cov}; }
    std::mt19937_64 engine(std::uint64_t id) const { return std::mt19937_64(sub_seed(id)); }

    GaussianStream process(const ProcessModel& m) const { return gaussian(stream_id::process, m.Q); }
    GaussianStream sensor(std::size_t i, const SensorModel& s) const
    {
        return gaussian(stream_id::sensor_base + i, s.R);
    }

private:
    std::uint64_t seed_;
};

} // namespace etdkf
