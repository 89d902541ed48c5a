#pragma once

#include "etdkf/core_model.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <span>
#include <vector>

namespace etdkf {

class InnovationWindow {
public:
    InnovationWindow() = default;
    InnovationWindow(Eigen::Index dim, std::size_t capacity) : dim_(dim), capacity_(capacity)
    {
        if (capacity == 0) throw ConfigError("InnovationWindow: capacity must be positive");
    }

    void push(const Vector& v)
    {
        require_size(v, dim_, "InnovationWindow::push");
        if (buf_.size() == capacity_) buf_.pop_front();
        buf_.push_back(v);
    }

    bool full() const { return buf_.size() == capacity_; }
    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }
    Eigen::Index dim() const { return dim_; }
    void clear() { buf_.clear(); }

    std::vector<Vector> snapshot() const { return {buf_.begin(), buf_.end()}; }

private:
    Eigen::Index dim_ = 0;
    std::size_t capacity_ = 0;
    std::deque<Vector> buf_;
};

struct DetectorConfig {
    std::size_t k_nn = 4;
    std::size_t window = 40;
    std::size_t averaging = 10;
    double delta = 0.5;
    double distance_floor = 1e-12;

    void validate() const
    {
        if (k_nn < 1 || k_nn >= window) throw ConfigError("detector: need 1 <= k_nn < window");
        if (averaging < 1) throw ConfigError("detector: averaging window T must be >= 1");
        const double w = static_cast<double>(window);
        if (!(delta > std::log(w / (w - 1.0))))
            throw ConfigError("detector: delta must exceed log(w/(w-1)) = " + std::to_string(std::log(w / (w - 1.0))));
        if (!(distance_floor > 0.0)) throw ConfigError("detector: distance_floor must be positive");
    }
};

namespace detail {
inline double kth_smallest(std::vector<double>& d, std::size_t k)
{
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    return d[k - 1];
}

inline bool same_point(const Vector& a, const Vector& b)
{
    if (a.size() != b.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) != b(i)) return false;
    return true;
}
} // namespace detail

// k-th nearest distance from samples[index] to the other samples.
inline double knn_distance(std::span<const Vector> samples, std::size_t index, std::size_t k, double floor = 1e-12)
{
    if (k < 1 || samples.size() <= k)
        throw ConfigError("knn_distance: need more than k=" + std::to_string(k) + " samples, have " +
                          std::to_string(samples.size()));
    if (index >= samples.size()) throw ConfigError("knn_distance: index out of range");
    std::vector<double> d;
    d.reserve(samples.size() - 1);
    for (std::size_t j = 0; j < samples.size(); ++j)
        if (j != index) d.push_back((samples[index] - samples[j]).norm());
    return std::max(detail::kth_smallest(d, k), floor);
}

// k-th nearest distance from query into set. A single member that is
// bit-identical to the query is skipped: it is the query's own copy.
inline double knn_distance_to(const Vector& query, std::span<const Vector> set, std::size_t k, double floor = 1e-12)
{
    std::vector<double> d;
    d.reserve(set.size());
    bool skipped = false;
    for (const auto& z : set) {
        if (!skipped && detail::same_point(query, z)) {
            skipped = true;
            continue;
        }
        d.push_back((query - z).norm());
    }
    if (d.size() < k) throw ConfigError("knn_distance_to: reference set too small for k=" + std::to_string(k));
    return std::max(detail::kth_smallest(d, k), floor);
}

// m/n1 * sum_i log(dZ_k(i) / dX_k(i)) + log(n2 / (n1 - 1))
inline double estimate_kl(std::span<const Vector> X, std::span<const Vector> Z, std::size_t k, double floor = 1e-12)
{
    const auto n1 = X.size();
    const auto n2 = Z.size();
    if (n1 < 2) throw ConfigError("estimate_kl: need at least two samples in X");
    if (n1 <= k) throw ConfigError("estimate_kl: X window shorter than k+1");
    if (n2 < k + 1) throw ConfigError("estimate_kl: Z window shorter than k+1");
    const auto m = static_cast<double>(X[0].size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n1; ++i)
        acc += std::log(knn_distance_to(X[i], Z, k, floor) / knn_distance(X, i, k, floor));
    return m / static_cast<double>(n1) * acc +
           std::log(static_cast<double>(n2) / static_cast<double>(n1 - 1));
}

// Mean of the last T divergence values (fewer while filling).
class DivergenceAverager {
public:
    explicit DivergenceAverager(std::size_t T = 10) : T_(T)
    {
        if (T == 0) throw ConfigError("DivergenceAverager: T must be >= 1");
    }

    double push(double d)
    {
        hist_.push_back(d);
        sum_ += d;
        if (hist_.size() > T_) {
            sum_ -= hist_.front();
            hist_.pop_front();
        }
        // recompute occasionally to avoid drift in the running sum
        if (++since_ >= 1024) {
            since_ = 0;
            sum_ = 0.0;
            for (double v : hist_) sum_ += v;
        }
        return value();
    }

    double value() const { return hist_.empty() ? 0.0 : sum_ / static_cast<double>(hist_.size()); }
    std::size_t count() const { return hist_.size(); }

private:
    std::size_t T_;
    std::deque<double> hist_;
    double sum_ = 0.0;
    std::size_t since_ = 0;
};

inline double sliding_average(std::span<const double> values, std::size_t T)
{
    if (values.empty()) return 0.0;
    const auto n = std::min(T, values.size());
    double s = 0.0;
    for (std::size_t i = values.size() - n; i < values.size(); ++i) s += values[i];
    return s / static_cast<double>(n);
}

inline std::vector<Vector> nominal_reference_window(const Matrix& omega, std::size_t w, std::mt19937_64& rng)
{
    if (!is_psd(omega)) throw NumericError("nominal_reference_window: covariance is not PSD");
    const Matrix F = GaussianStream::sqrt_factor(omega);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Vector> out;
    out.reserve(w);
    for (std::size_t s = 0; s < w; ++s) {
        Vector z(F.cols());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = nd(rng);
        out.push_back(F * z);
    }
    return out;
}

inline Vector neighbor_innovation(const Vector& y_i, const Matrix& C_j, const Vector& x_pred_j)
{
    return y_i - C_j * x_pred_j;
}

enum class Hypothesis { H0, H1 };

inline Hypothesis detect(double value, double delta) { return value > delta ? Hypothesis::H1 : Hypothesis::H0; }

// Maps innovations to unit covariance through the lower Cholesky factor
// of omega. The divergence is invariant under this map.
class Whitener {
public:
    explicit Whitener(const Matrix& omega) : llt_(symmetrize(omega))
    {
        if (llt_.info() != Eigen::Success) throw NumericError("Whitener: covariance is not positive definite");
    }
    Vector operator()(const Vector& v) const { return llt_.matrixL().solve(v); }

private:
    Eigen::LLT<Matrix> llt_;
};

} // namespace etdkf
