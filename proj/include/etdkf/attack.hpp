#pragma once

#include "etdkf/etdkf.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace etdkf {

enum class AttackKind { MeasurementInjection, ChannelInjection, NonTriggering, ReplayContinuous };

// offset + amplitude * sin(frequency * k + phase), or uniform in [low, high]
// drawn fresh each step. k is the step index.
struct SignalSpec {
    enum class Shape { Constant, Sinusoid, Uniform };
    Shape shape = Shape::Constant;
    double offset = 0.0;
    double amplitude = 0.0;
    double frequency = 0.0;
    double phase = 0.0;
    double low = 0.0;
    double high = 0.0;

    bool is_zero() const
    {
        switch (shape) {
        case Shape::Constant: return offset == 0.0;
        case Shape::Sinusoid: return offset == 0.0 && amplitude == 0.0;
        case Shape::Uniform: return low == 0.0 && high == 0.0;
        }
        return false;
    }

    double value(std::int64_t k, std::mt19937_64& rng) const
    {
        switch (shape) {
        case Shape::Constant: return offset;
        case Shape::Sinusoid: return offset + amplitude * std::sin(frequency * static_cast<double>(k) + phase);
        case Shape::Uniform: return std::uniform_real_distribution<double>(low, high)(rng);
        }
        return 0.0;
    }
};

enum class NonTriggerMode { Direct, IntervalSampler };

struct AttackPlan {
    AttackKind kind = AttackKind::MeasurementInjection;
    NodeId target = 0;                 // attacked node, or receiving node of a channel
    std::optional<NodeId> source;      // sending node for channel attacks
    std::int64_t onset = 0;
    SignalSpec signal;                 // measurement and channel injections
    double phi = 0.0;                  // non-triggering residual radius
    NonTriggerMode mode = NonTriggerMode::Direct;
    Vector upsilon;                    // replay offset, length p

    bool active(std::int64_t k) const { return k >= onset; }

    bool is_noop() const
    {
        switch (kind) {
        case AttackKind::MeasurementInjection:
        case AttackKind::ChannelInjection: return signal.is_zero();
        default: return false;
        }
    }
};

inline std::string to_string(AttackKind k)
{
    switch (k) {
    case AttackKind::MeasurementInjection: return "measurement";
    case AttackKind::ChannelInjection: return "channel";
    case AttackKind::NonTriggering: return "non_triggering";
    case AttackKind::ReplayContinuous: return "replay";
    }
    return "?";
}

inline Vector corrupt_measurement(const Vector& y, const Vector& f)
{
    require_size(f, y.size(), "corrupt_measurement: f");
    return y + f;
}

inline Vector corrupt_channel(const Vector& x_prior, const Vector& f_bar)
{
    require_size(f_bar, x_prior.size(), "corrupt_channel: f_bar");
    return x_prior + f_bar;
}

// Offset a receiver holds for a channel: refreshed when the sender
// transmits, held otherwise.
inline Vector channel_offset_step(bool zeta_sender, const Vector& f_bar_now, const Vector& f_tilde_prev)
{
    return zeta_sender ? f_bar_now : f_tilde_prev;
}

struct CraftResult {
    Vector y;
    bool fell_back = false; // interval sampler could not be used
};

// Residual against the last predictive estimate stays within phi, so the
// node never transmits. Direct mode puts the residual at exactly phi in
// the direction of the honest residual.
inline Vector craft_non_triggering_direct(const Vector& y, const Matrix& C, const Vector& x_pred_prev, double phi)
{
    const Vector c = C * x_pred_prev;
    Vector d = y - c;
    const double nd = d.norm();
    if (nd > 0.0 && std::isfinite(nd))
        d /= nd;
    else
        d = Vector::Constant(y.size(), 1.0 / std::sqrt(static_cast<double>(y.size())));
    return c + phi * d;
}

inline CraftResult craft_non_triggering(const Vector& y, const Matrix& C, const Vector& x_pred_prev, double phi,
                                        NonTriggerMode mode, std::mt19937_64& rng)
{
    if (!(phi >= 0.0)) throw ConfigError("craft_non_triggering: phi must be >= 0");
    if (mode == NonTriggerMode::IntervalSampler) {
        const double cn = (C * x_pred_prev).norm();
        const double yn = y.norm();
        const double a = phi - cn + yn;
        const double b = phi + cn - yn;
        if (a < b) {
            const double theta = std::uniform_real_distribution<double>(a, b)(rng);
            Vector ya = y + Vector::Constant(y.size(), theta);
            // The interval only bounds norms; the residual can still exceed phi.
            if ((ya - C * x_pred_prev).norm() <= phi) return {ya, false};
        }
        return {craft_non_triggering_direct(y, C, x_pred_prev, phi), true};
    }
    return {craft_non_triggering_direct(y, C, x_pred_prev, phi), false};
}

inline Vector craft_replay(const Vector& x_prior_last, const Matrix& C, const Vector& upsilon)
{
    require_size(upsilon, C.rows(), "craft_replay: upsilon");
    return C * x_prior_last + upsilon;
}

// Analytic corrupted filter for one node (gain from its own prior covariance).
struct CompromisedState {
    Vector x_prior;
    Vector x_post;
    Vector x_pred;
    Matrix P_prior;
    Matrix P_post;
    Matrix K;
};

struct CompromisedInputs {
    Vector y;                          // honest measurement
    Vector f;                          // sensor injection (zero if none)
    bool zeta = true;
    std::vector<Vector> neighbor_preds; // true neighbor predictive estimates
    std::vector<Vector> channel_offsets; // held offsets per neighbor (may be empty)
    std::optional<Matrix> P_post;       // corrupted posterior covariance if tracked
};

// One step: gain, predictive, posterior, then the prior for k+1.
inline CompromisedState compromised_step(CompromisedState s, const CompromisedInputs& in, const SensorModel& sensor,
                                         const ProcessModel& model, const Matrix& gamma)
{
    const auto n = model.state_dim();
    s.K = kalman_gain(s.P_prior, sensor.C, sensor.R);
    s.x_pred = update_predictive(in.zeta, s.x_prior, s.x_pred, model.A);
    Vector cons = Vector::Zero(n);
    Vector held = Vector::Zero(n);
    for (std::size_t j = 0; j < in.neighbor_preds.size(); ++j) {
        cons += in.neighbor_preds[j] - s.x_pred;
        if (j < in.channel_offsets.size()) held += in.channel_offsets[j];
    }
    const Vector fa = s.K * in.f + gamma * held;
    s.x_post = s.x_prior + s.K * (in.y - sensor.C * s.x_prior) + gamma * cons + fa;
    s.P_post = in.P_post ? symmetrize(*in.P_post) : posterior_covariance(s.P_prior, s.K, sensor.C, sensor.R);
    s.x_prior = model.A * s.x_post;
    s.P_prior = symmetrize(model.A * s.P_post * model.A.transpose() + model.Q);
    return s;
}

// Second moments of the corrupted-network errors
//   prior eta_bar_i = x - x_prior_i, predictive eta_tilde_i = x - x_pred_i,
//   posterior eta_i = x - x_post_i,
// with a fixed trigger schedule and deterministic sensor injections.
using Blocks = std::vector<std::vector<Matrix>>;

struct PredictiveMoments {
    Blocks Pbar;  // E[eta_bar_i eta_bar_j^T]
    Blocks Parc;  // E[eta_tilde_i eta_bar_j^T]
    Blocks Pt;    // E[eta_tilde_i eta_tilde_j^T]
    std::vector<Vector> mbar, mt;

    Matrix Pbreve(NodeId i, NodeId j) const { return Parc[j][i].transpose(); } // E[eta_bar_i eta_tilde_j^T]
};

struct PosteriorMoments {
    Blocks Pp;    // E[eta_i eta_j^T]
    Blocks Ptp;   // E[eta_tilde_i eta_j^T]
    Blocks Pt;    // carried from the predictive step
    std::vector<Vector> mu, mt;
};

enum class CrossInit { Shared, Independent };

inline Blocks make_blocks(std::size_t N, Eigen::Index n)
{
    return Blocks(N, std::vector<Matrix>(N, Matrix::Zero(n, n)));
}

// k = 0: every prior starts at x0_mean and every node transmits. Shared
// means the initial errors of all nodes are the same random vector.
inline PredictiveMoments initial_moments(const ProcessModel& m, std::size_t N, CrossInit init = CrossInit::Shared)
{
    const auto n = m.state_dim();
    PredictiveMoments p;
    p.Pbar = make_blocks(N, n);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            if (i == j || init == CrossInit::Shared) p.Pbar[i][j] = m.P0;
    p.Parc = p.Pbar;
    p.Pt = p.Pbar;
    p.mbar.assign(N, Vector::Zero(n));
    p.mt = p.mbar;
    return p;
}

inline PredictiveMoments cross_covariance_step(const PosteriorMoments& post, const std::vector<bool>& zeta,
                                               const Matrix& A, const Matrix& Q)
{
    const auto N = post.Pp.size();
    const auto n = A.rows();
    const Matrix At = A.transpose();
    PredictiveMoments p;
    p.Pbar = make_blocks(N, n);
    p.Parc = make_blocks(N, n);
    p.Pt = make_blocks(N, n);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) p.Pbar[i][j] = A * post.Pp[i][j] * At + Q;
    for (std::size_t i = 0; i < N; ++i) {
        const double zi = zeta[i] ? 1.0 : 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            const double zj = zeta[j] ? 1.0 : 0.0;
            const Matrix held_i = A * post.Ptp[i][j] * At + Q;             // E[(A eta_t_i + w)(A eta_j + w)^T]
            const Matrix held_j = A * post.Ptp[j][i].transpose() * At + Q; // E[(A eta_i + w)(A eta_t_j + w)^T]
            p.Parc[i][j] = zi * p.Pbar[i][j] + (1.0 - zi) * held_i;
            p.Pt[i][j] = zi * zj * p.Pbar[i][j] + zi * (1.0 - zj) * held_j + (1.0 - zi) * zj * held_i +
                         (1.0 - zi) * (1.0 - zj) * (A * post.Pt[i][j] * At + Q);
        }
    }
    p.mbar.resize(N);
    p.mt.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        p.mbar[i] = A * post.mu[i];
        p.mt[i] = zeta[i] ? p.mbar[i] : Vector(A * post.mt[i]);
    }
    return p;
}

struct AttackStatistics {
    Matrix Sigma_f; // p x p
    Matrix Xi_f;    // p x n
};

// Deterministic injection f: Sigma_f = f f^T and Xi_f = f (M mbar_i + gamma sbar_i)^T
// with sbar_i the mean consensus disagreement.
inline AttackStatistics deterministic_attack_statistics(const Vector& f, const PredictiveMoments& pm, NodeId i,
                                                        const NodeSet& nbrs, const Matrix& M, const Matrix& gamma)
{
    Vector sbar = Vector::Zero(M.rows());
    for (auto j : nbrs) sbar += pm.mt[j] - pm.mt[i];
    return {f * f.transpose(), f * (M * pm.mbar[i] + gamma * sbar).transpose()};
}

// Diagonal posterior block under attack.
inline Matrix corrupted_posterior_covariance(const PredictiveMoments& pm, NodeId i, const NodeSet& nbrs,
                                             const Matrix& K, const SensorModel& sensor, const Matrix& gamma,
                                             const AttackStatistics& st)
{
    const auto n = pm.Pbar[i][i].rows();
    const Matrix M = Matrix::Identity(n, n) - K * sensor.C;
    Matrix cross = Matrix::Zero(n, n);
    for (auto j : nbrs) cross += pm.Parc[j][i] - pm.Parc[i][i];
    Matrix disagreement = Matrix::Zero(n, n);
    for (auto j : nbrs)
        for (auto l : nbrs) disagreement += pm.Pt[j][l] - pm.Pt[j][i] - pm.Pt[i][l] + pm.Pt[i][i];
    const Matrix gc = gamma * cross * M.transpose();
    const Matrix kx = K * st.Xi_f;
    Matrix P = M * pm.Pbar[i][i] * M.transpose() + K * (sensor.R + st.Sigma_f) * K.transpose() + gc +
               gc.transpose() + gamma * disagreement * gamma.transpose() - kx - kx.transpose();
    return symmetrize(P);
}

class ErrorMomentTracker {
public:
    ErrorMomentTracker(ProcessModel model, std::vector<SensorModel> sensors, Graph graph, std::vector<Matrix> gamma,
                       CrossInit init = CrossInit::Shared)
        : model_(std::move(model)), sensors_(std::move(sensors)), graph_(std::move(graph)), gamma_(std::move(gamma))
    {
        if (sensors_.size() != graph_.node_count() || gamma_.size() != graph_.node_count())
            throw ConfigError("ErrorMomentTracker: node counts disagree");
        pred_ = initial_moments(model_, graph_.node_count(), init);
    }

    std::size_t node_count() const { return graph_.node_count(); }
    const PredictiveMoments& predictive() const { return pred_; }
    const PosteriorMoments& posterior() const { return post_; }
    const std::vector<Matrix>& gains() const { return K_; }
    long step_index() const { return k_; }

    // Advance to step k (k = 0 uses the initial moments; zeta(0) must be all ones).
    void step(const std::vector<bool>& zeta, const std::vector<Vector>& f)
    {
        const auto N = node_count();
        const auto n = model_.state_dim();
        if (zeta.size() != N || f.size() != N) throw ConfigError("ErrorMomentTracker::step: wrong input sizes");
        if (k_ > 0) pred_ = cross_covariance_step(post_, zeta, model_.A, model_.Q);

        K_.assign(N, Matrix());
        std::vector<Matrix> M(N);
        std::vector<Vector> g(N), xbar(N);
        for (std::size_t i = 0; i < N; ++i) {
            K_[i] = kalman_gain(pred_.Pbar[i][i], sensors_[i].C, sensors_[i].R);
            M[i] = Matrix::Identity(n, n) - K_[i] * sensors_[i].C;
            g[i] = K_[i] * f[i];
            xbar[i] = M[i] * pred_.mbar[i];
            for (auto l : graph_.neighbors(i)) xbar[i] += gamma_[i] * (pred_.mt[l] - pred_.mt[i]);
        }
        // eta_i = M_i eta_bar_i + sum_l G_il eta_tilde_l - K_i v_i - g_i
        auto G = [&](NodeId i, NodeId l) -> Matrix {
            if (l == i) return -static_cast<double>(graph_.neighbors(i).size()) * gamma_[i];
            return graph_.has_edge(i, l) ? gamma_[i] : Matrix::Zero(n, n);
        };
        auto support = [&](NodeId i) {
            NodeSet s = graph_.neighbors(i);
            s.insert(i);
            return s;
        };

        post_.Pp = make_blocks(N, n);
        post_.Ptp = make_blocks(N, n);
        post_.Pt = pred_.Pt;
        post_.mt = pred_.mt;
        post_.mu.resize(N);
        for (std::size_t i = 0; i < N; ++i) post_.mu[i] = xbar[i] - g[i];

        for (std::size_t i = 0; i < N; ++i) {
            const auto Si = support(i);
            for (std::size_t j = 0; j < N; ++j) {
                const auto Sj = support(j);
                if (i == j) {
                    const auto st = deterministic_attack_statistics(f[i], pred_, i, graph_.neighbors(i), M[i], gamma_[i]);
                    post_.Pp[i][i] = corrupted_posterior_covariance(pred_, i, graph_.neighbors(i), K_[i], sensors_[i],
                                                                    gamma_[i], st);
                } else {
                    Matrix P = M[i] * pred_.Pbar[i][j] * M[j].transpose();
                    for (auto l : Sj) P += M[i] * pred_.Pbreve(i, l) * G(j, l).transpose();
                    for (auto l : Si) P += G(i, l) * pred_.Parc[l][j] * M[j].transpose();
                    for (auto l : Si)
                        for (auto m : Sj) P += G(i, l) * pred_.Pt[l][m] * G(j, m).transpose();
                    P -= xbar[i] * g[j].transpose() + g[i] * xbar[j].transpose();
                    P += g[i] * g[j].transpose();
                    post_.Pp[i][j] = P;
                }
                Matrix T = pred_.Parc[i][j] * M[j].transpose();
                for (auto l : Sj) T += pred_.Pt[i][l] * G(j, l).transpose();
                T -= pred_.mt[i] * g[j].transpose();
                post_.Ptp[i][j] = T;
            }
        }
        ++k_;
    }

    // Full-sum evaluation of a diagonal posterior block, for cross-checks.
    Matrix generic_diagonal(NodeId i, const Vector& f) const
    {
        const auto n = model_.state_dim();
        const Matrix M = Matrix::Identity(n, n) - K_[i] * sensors_[i].C;
        NodeSet S = graph_.neighbors(i);
        S.insert(i);
        auto G = [&](NodeId l) -> Matrix {
            return l == i ? Matrix(-static_cast<double>(graph_.neighbors(i).size()) * gamma_[i]) : gamma_[i];
        };
        Vector xb = M * pred_.mbar[i];
        for (auto l : graph_.neighbors(i)) xb += gamma_[i] * (pred_.mt[l] - pred_.mt[i]);
        const Vector g = K_[i] * f;
        Matrix P = M * pred_.Pbar[i][i] * M.transpose() + K_[i] * sensors_[i].R * K_[i].transpose();
        for (auto l : S) P += M * pred_.Pbreve(i, l) * G(l).transpose() + G(l) * pred_.Parc[l][i] * M.transpose();
        for (auto l : S)
            for (auto m : S) P += G(l) * pred_.Pt[l][m] * G(m).transpose();
        P += -xb * g.transpose() - g * xb.transpose() + g * g.transpose();
        return symmetrize(P);
    }

private:
    ProcessModel model_;
    std::vector<SensorModel> sensors_;
    Graph graph_;
    std::vector<Matrix> gamma_;
    PredictiveMoments pred_;
    PosteriorMoments post_;
    std::vector<Matrix> K_;
    long k_ = 0;
};

} // namespace etdkf
