#pragma once

#include "etdkf/core_model.hpp"
#include "etdkf/graph.hpp"

#include <optional>
#include <span>
#include <vector>

namespace etdkf {

struct TriggerConfig {
    double alpha = 1.8;

    void validate() const
    {
        if (!(alpha >= 0.0)) throw ConfigError("trigger.alpha must be >= 0");
    }
};

struct NodeEstimator {
    Vector x_prior;
    Vector x_post;
    Vector x_pred;
    Matrix P_prior;
    Matrix P_post;
    Matrix K;
    Matrix gamma; // n x n; scalar mode stores gamma * I
    bool zeta = true;

    static NodeEstimator initial(const ProcessModel& m, Eigen::Index p, const Matrix& gamma)
    {
        const auto n = m.state_dim();
        NodeEstimator e;
        e.x_prior = m.x0_mean;
        e.x_post = m.x0_mean;
        e.x_pred = m.x0_mean;
        e.P_prior = m.P0;
        e.P_post = m.P0;
        e.K = Matrix::Zero(n, p);
        e.gamma = gamma;
        e.zeta = true;
        return e;
    }
};

// Transmit iff the residual reaches alpha (boundary transmits).
inline bool should_transmit(const Vector& y, const Matrix& C, const Vector& x_pred_prev, double alpha)
{
    return (y - C * x_pred_prev).norm() >= alpha;
}

inline Vector update_predictive(bool zeta, const Vector& x_prior, const Vector& x_pred_prev, const Matrix& A)
{
    return zeta ? Vector(x_prior) : Vector(A * x_pred_prev);
}

inline NodeEstimator time_update(NodeEstimator est, const Matrix& A, const Matrix& Q)
{
    est.x_prior = A * est.x_post;
    est.P_prior = symmetrize(A * est.P_post * A.transpose() + Q);
    return est;
}

inline Matrix innovation_covariance(const Matrix& P_prior, const Matrix& C, const Matrix& R)
{
    return symmetrize(C * P_prior * C.transpose() + R);
}

inline Vector innovation(const Vector& y, const Matrix& C, const Vector& x_prior) { return y - C * x_prior; }

inline Matrix kalman_gain(const Matrix& P_prior, const Matrix& C, const Matrix& R)
{
    const Matrix S = innovation_covariance(P_prior, C, R);
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
        const double lmin = min_eigenvalue(S);
        throw NumericError("kalman_gain: innovation covariance not positive definite (min eigenvalue " +
                           std::to_string(lmin) + ", size " + shape(S) + ")");
    }
    // K = P C^T S^{-1}  <=>  S K^T = C P
    return llt.solve(C * P_prior).transpose();
}

inline Matrix posterior_covariance(const Matrix& P_prior, const Matrix& K, const Matrix& C, const Matrix& R)
{
    const Matrix M = Matrix::Identity(P_prior.rows(), P_prior.cols()) - K * C;
    return symmetrize(M * P_prior * M.transpose() + K * R * K.transpose());
}

// gamma * sum_j (x_pred_j - own_pred), optionally weighted per neighbor.
inline Vector consensus_term(const Matrix& gamma, const Vector& own_pred, std::span<const Vector> neighbor_preds,
                             std::span<const double> weights = {})
{
    Vector s = Vector::Zero(own_pred.size());
    for (std::size_t j = 0; j < neighbor_preds.size(); ++j) {
        if (weights.empty())
            s += neighbor_preds[j] - own_pred;
        else
            s += weights[j] * (neighbor_preds[j] - own_pred);
    }
    return gamma * s;
}

// Posterior mean with the current est.K. Covariance is left to
// posterior_covariance since the consensus term does not enter it.
inline NodeEstimator measurement_update(NodeEstimator est, const Vector& y, const Matrix& C,
                                        std::span<const Vector> neighbor_preds, const Vector& own_pred)
{
    est.x_post = est.x_prior + est.K * innovation(y, C, est.x_prior) +
                 consensus_term(est.gamma, own_pred, neighbor_preds);
    return est;
}

// Gain, posterior mean and covariance in one go.
inline NodeEstimator measurement_step(NodeEstimator est, const Vector& y, const SensorModel& s,
                                      std::span<const Vector> neighbor_preds)
{
    est.K = kalman_gain(est.P_prior, s.C, s.R);
    const Vector own = est.x_pred;
    est = measurement_update(std::move(est), y, s.C, neighbor_preds, own);
    est.P_post = posterior_covariance(est.P_prior, est.K, s.C, s.R);
    return est;
}

enum class GammaMode { Scalar, Matrix };

struct ConsensusGains {
    std::vector<Matrix> gamma;
    bool fell_back = false;
};

// Matrix consensus gains:
//   Gamma_i = (I - K_i C_i)^T A^T pinv(P_prior_i) A (I - K_i C_i)
//   gamma_i = 2 (I - K_i C_i) pinv(Gamma_i) / (lmax(L) * max_j lmax(pinv(Gamma_j)))
// Falls back to fallback * I for every node if the denominator vanishes.
inline ConsensusGains consensus_gain(std::span<const Matrix> K, std::span<const Matrix> C, const Matrix& A,
                                     std::span<const Matrix> P_priors, const Matrix& L, double fallback)
{
    const auto N = K.size();
    const auto n = A.rows();
    if (C.size() != N || P_priors.size() != N || static_cast<std::size_t>(L.rows()) != N)
        throw ConfigError("consensus_gain: per-node inputs disagree in count");
    std::vector<Matrix> Mi(N), Ginv(N);
    double lam_ginv = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        Mi[i] = Matrix::Identity(n, n) - K[i] * C[i];
        const Matrix G = symmetrize(Mi[i].transpose() * A.transpose() * pseudo_inverse(P_priors[i]) * A * Mi[i]);
        Ginv[i] = symmetrize(pseudo_inverse(G));
        Eigen::SelfAdjointEigenSolver<Matrix> es(Ginv[i], Eigen::EigenvaluesOnly);
        lam_ginv = std::max(lam_ginv, es.eigenvalues().maxCoeff());
    }
    double lam_L = 0.0;
    if (N > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(L), Eigen::EigenvaluesOnly);
        lam_L = es.eigenvalues().maxCoeff();
    }
    ConsensusGains out;
    const double denom = lam_L * lam_ginv;
    if (!(denom > 0.0) || !std::isfinite(denom)) {
        out.fell_back = true;
        out.gamma.assign(N, fallback * Matrix::Identity(n, n));
        return out;
    }
    for (std::size_t i = 0; i < N; ++i) out.gamma.push_back(2.0 * Mi[i] * Ginv[i] / denom);
    return out;
}

} // namespace etdkf
