#pragma once

#include "etdkf/sim/scenario.hpp"
#include "etdkf/sim/trace.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace etdkf::sim {

struct Calibration {
    double B = 0.0;                 // 99.9th percentile of ||x(k+1) - x(k) + v_i(k+1)||
    double tau = 0.0;               // 99.9th percentile of ||m_i - x|| with unit weights
    std::vector<Matrix> omega;      // sample innovation covariance per node
};

namespace detail {
inline double percentile(std::vector<double> v, double q)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Matrix gamma_matrix(double g, Eigen::Index n) { return g * Matrix::Identity(n, n); }
} // namespace detail

// Attack-free nominal run on a dedicated sub-seed.
inline Calibration calibrate(const ScenarioConfig& c)
{
    const auto N = c.nodes;
    const auto n = c.process.state_dim();
    const auto g = c.graph();
    NoiseSource master(NoiseSource(c.seed).sub_seed(stream_id::calibration));
    auto wstream = master.process(c.process);
    auto x0 = master.gaussian(stream_id::initial_state, c.process.P0);
    std::vector<GaussianStream> vs;
    for (NodeId i = 0; i < N; ++i) vs.push_back(master.sensor(i, c.sensors[i]));

    const auto steps = static_cast<std::int64_t>(c.calibration_steps);
    const auto skip = std::min<std::int64_t>(steps / 5, 100);
    Vector x = c.process.x0_mean + x0.sample();
    std::vector<NodeEstimator> est;
    for (NodeId i = 0; i < N; ++i)
        est.push_back(NodeEstimator::initial(c.process, c.sensors[i].C.rows(), detail::gamma_matrix(c.gamma, n)));

    std::vector<double> bvals, evals;
    std::vector<std::vector<Vector>> innov(N);
    std::vector<Vector> v_now(N);
    for (NodeId i = 0; i < N; ++i) v_now[i] = vs[i].sample();
    for (std::int64_t k = 0; k < steps; ++k) {
        std::vector<Vector> y(N), pred(N);
        for (NodeId i = 0; i < N; ++i) {
            y[i] = measure(c.sensors[i], x, v_now[i]);
            const bool z = k == 0 || should_transmit(y[i], c.sensors[i].C, est[i].x_pred, c.trigger.alpha);
            est[i].zeta = z;
            est[i].x_pred = update_predictive(z, est[i].x_prior, est[i].x_pred, c.process.A);
        }
        for (NodeId i = 0; i < N; ++i) pred[i] = est[i].x_pred;
        for (NodeId i = 0; i < N; ++i) {
            std::vector<Vector> nb;
            for (auto j : g.neighbors(i)) nb.push_back(pred[j]);
            if (k >= skip) {
                innov[i].push_back(innovation(y[i], c.sensors[i].C, est[i].x_prior));
                if (!nb.empty()) {
                    Vector m = Vector::Zero(n);
                    for (const auto& p : nb) m += p;
                    evals.push_back((m / static_cast<double>(nb.size()) - x).norm());
                }
            }
            est[i] = measurement_step(std::move(est[i]), y[i], c.sensors[i], nb);
            est[i] = time_update(std::move(est[i]), c.process.A, c.process.Q);
        }
        const Vector xn = step_process(c.process, x, wstream.sample());
        for (NodeId i = 0; i < N; ++i) {
            v_now[i] = vs[i].sample();
            if (k >= skip) bvals.push_back((xn - x + (c.sensors[i].C.rows() == n ? v_now[i] : Vector::Zero(n))).norm());
        }
        x = xn;
    }
    Calibration cal;
    cal.B = detail::percentile(bvals, 0.999);
    cal.tau = detail::percentile(evals, 0.999);
    for (NodeId i = 0; i < N; ++i) {
        const auto& r = innov[i];
        const auto p = c.sensors[i].C.rows();
        Matrix S = Matrix::Zero(p, p);
        for (const auto& v : r) S += v * v.transpose();
        cal.omega.push_back(r.empty() ? Matrix(c.sensors[i].R) : Matrix(S / static_cast<double>(r.size())));
    }
    return cal;
}

// Whole-network simulation. Per step: measure, attack, trigger, exchange,
// detect, update beliefs, update estimates, advance the plant.
inline SimTrace run_scenario(const ScenarioConfig& c)
{
    validate_or_throw(c);
    SimTrace trace;
    const auto n = c.process.state_dim();
    trace.state_dim = n;
    if (c.steps == 0) return trace;

    const auto N = c.nodes;
    const Graph g = c.graph();
    const Matrix Lplain = laplacian(g);
    const auto& A = c.process.A;
    const Calibration cal = calibrate(c);
    const double B = c.bound_B ? *c.bound_B : cal.B;
    const double tau = c.tau_auto ? cal.tau : c.resilient.tau;
    const auto& dc = c.detector;

    NoiseSource noise(c.seed);
    auto wstream = noise.process(c.process);
    auto x0 = noise.gaussian(stream_id::initial_state, c.process.P0);
    std::vector<GaussianStream> vs;
    std::vector<std::mt19937_64> ref_rng;
    for (NodeId i = 0; i < N; ++i) {
        vs.push_back(noise.sensor(i, c.sensors[i]));
        ref_rng.push_back(noise.engine(stream_id::reference_base + i));
    }
    std::vector<std::mt19937_64> atk_rng;
    for (std::size_t a = 0; a < c.attacks.size(); ++a) atk_rng.push_back(noise.engine(stream_id::attack_base + a));

    std::vector<const AttackPlan*> sensor_plan(N, nullptr);
    std::map<Edge, std::size_t> channel_plan; // (sender, receiver) -> plan index
    for (std::size_t a = 0; a < c.attacks.size(); ++a) {
        const auto& p = c.attacks[a];
        if (p.kind == AttackKind::ChannelInjection)
            channel_plan[{*p.source, p.target}] = a;
        else
            sensor_plan[p.target] = &p;
    }

    const NodeSet compromised = c.compromised_nodes();
    std::vector<char> maj_ok(N, 1);
    for (auto i : majority_violations(g, compromised)) maj_ok[i] = 0;

    std::vector<NodeEstimator> est;
    for (NodeId i = 0; i < N; ++i)
        est.push_back(NodeEstimator::initial(c.process, c.sensors[i].C.rows(), detail::gamma_matrix(c.gamma, n)));

    // per receiver i, per neighbor j (ordered as in g.neighbors(i))
    std::vector<std::vector<NodeId>> nbrs(N);
    for (NodeId i = 0; i < N; ++i) nbrs[i].assign(g.neighbors(i).begin(), g.neighbors(i).end());
    std::vector<std::vector<Vector>> held(N);
    std::vector<InnovationWindow> win(N);
    std::vector<std::vector<InnovationWindow>> ewin(N);
    std::vector<DivergenceAverager> phi_avg;
    std::vector<std::vector<DivergenceAverager>> psi_avg(N);
    std::vector<DiscountedBelief> beta;
    std::vector<std::vector<DiscountedBelief>> sigma(N);
    for (NodeId i = 0; i < N; ++i) {
        const auto p = c.sensors[i].C.rows();
        win[i] = InnovationWindow(p, dc.window);
        phi_avg.emplace_back(dc.averaging);
        beta.emplace_back(c.resilient.kappa1, c.resilient.discount);
        for (std::size_t q = 0; q < nbrs[i].size(); ++q) {
            held[i].push_back(Vector::Zero(n));
            ewin[i].emplace_back(p, dc.window);
            psi_avg[i].emplace_back(dc.averaging);
            sigma[i].emplace_back(c.resilient.kappa2, c.resilient.discount);
        }
    }

    double gamma_max = 0.0;
    double alpha_over_C = 0.0;
    for (NodeId i = 0; i < N; ++i) {
        const double cn = spectral_norm(c.sensors[i].C);
        if (cn > 0.0) alpha_over_C = std::max(alpha_over_C, c.trigger.alpha / cn);
    }

    Vector x = c.process.x0_mean + x0.sample();
    const bool resilient = c.mode == FilterMode::Resilient && !c.pin_beliefs;
    std::optional<BoundMonitor> monitor;

    for (std::int64_t k = 0; k < c.steps; ++k) {
        std::vector<Vector> y(N), ytrue(N);
        for (NodeId i = 0; i < N; ++i) {
            ytrue[i] = measure(c.sensors[i], x, vs[i].sample());
            y[i] = ytrue[i];
        }
        // sensor-side attacks and triggers
        for (NodeId i = 0; i < N; ++i) {
            const auto* p = sensor_plan[i];
            const auto& C = c.sensors[i].C;
            if (p && p->active(k)) {
                auto& rng = atk_rng[static_cast<std::size_t>(p - c.attacks.data())];
                switch (p->kind) {
                case AttackKind::MeasurementInjection:
                    y[i] = corrupt_measurement(ytrue[i], Vector::Constant(C.rows(), p->signal.value(k, rng)));
                    break;
                case AttackKind::NonTriggering:
                    y[i] = craft_non_triggering(ytrue[i], C, est[i].x_pred, p->phi, p->mode, rng).y;
                    break;
                case AttackKind::ReplayContinuous: y[i] = craft_replay(est[i].x_pred, C, p->upsilon); break;
                default: break;
                }
            }
            est[i].zeta = k == 0 || should_transmit(y[i], C, est[i].x_pred, c.trigger.alpha);
            est[i].x_pred = update_predictive(est[i].zeta, est[i].x_prior, est[i].x_pred, A);
        }
        // exchange
        std::vector<std::vector<Vector>> view(N);
        for (NodeId i = 0; i < N; ++i)
            for (std::size_t q = 0; q < nbrs[i].size(); ++q) {
                const NodeId j = nbrs[i][q];
                Vector fbar = Vector::Zero(n);
                if (auto it = channel_plan.find({j, i}); it != channel_plan.end() && c.attacks[it->second].active(k))
                    fbar.setConstant(c.attacks[it->second].signal.value(k, atk_rng[it->second]));
                held[i][q] = channel_offset_step(est[j].zeta, fbar, held[i][q]);
                view[i].push_back(corrupt_channel(est[j].x_pred, held[i][q]));
            }
        // detection
        std::vector<double> D(N, std::numeric_limits<double>::quiet_NaN()), Phi = D;
        std::vector<std::vector<double>> De(N), Psi(N);
        for (NodeId i = 0; i < N; ++i) {
            const auto& s = c.sensors[i];
            const Matrix omega = c.reference == ReferenceMode::Live ? innovation_covariance(est[i].P_prior, s.C, s.R)
                                                                    : cal.omega[i];
            std::optional<Whitener> wh;
            if (c.whiten) wh.emplace(omega);
            auto map = [&](const Vector& v) { return wh ? (*wh)(v) : v; };
            win[i].push(map(innovation(y[i], s.C, est[i].x_prior)));
            for (std::size_t q = 0; q < nbrs[i].size(); ++q)
                ewin[i][q].push(map(neighbor_innovation(y[i], c.sensors[nbrs[i][q]].C, view[i][q])));
            De[i].assign(nbrs[i].size(), std::numeric_limits<double>::quiet_NaN());
            Psi[i] = De[i];
            if (!win[i].full()) continue;
            const Matrix ref_cov = wh ? Matrix(Matrix::Identity(s.C.rows(), s.C.rows())) : omega;
            const auto ref = nominal_reference_window(ref_cov, dc.window, ref_rng[i]);
            const auto xs = win[i].snapshot();
            D[i] = estimate_kl(xs, ref, dc.k_nn, dc.distance_floor);
            Phi[i] = phi_avg[i].push(D[i]);
            for (std::size_t q = 0; q < nbrs[i].size(); ++q) {
                const auto es = ewin[i][q].snapshot();
                De[i][q] = estimate_kl(es, ref, dc.k_nn, dc.distance_floor);
                Psi[i][q] = psi_avg[i][q].push(De[i][q]);
            }
        }
        // beliefs for step k come from statistics up to k-1
        std::vector<double> b(N);
        std::vector<std::vector<double>> sg(N), a(N);
        for (NodeId i = 0; i < N; ++i) b[i] = beta[i].value();
        for (NodeId i = 0; i < N; ++i)
            for (std::size_t q = 0; q < nbrs[i].size(); ++q) {
                sg[i].push_back(sigma[i][q].value());
                a[i].push_back(sg[i][q] * b[nbrs[i][q]]);
            }
        const bool use_avg = c.belief_input == BeliefInput::Average;
        for (NodeId i = 0; i < N; ++i) {
            const double src = use_avg ? Phi[i] : D[i];
            update_confidence(beta[i], std::isnan(src) ? 1.0 : belief_statistic(src, c.resilient.upsilon1));
            for (std::size_t q = 0; q < nbrs[i].size(); ++q) {
                const double s = use_avg ? Psi[i][q] : De[i][q];
                update_trust(sigma[i][q], std::isnan(s) ? 1.0 : belief_statistic(s, c.resilient.lambda1));
            }
        }
        // gains
        for (NodeId i = 0; i < N; ++i) est[i].K = kalman_gain(est[i].P_prior, c.sensors[i].C, c.sensors[i].R);
        if (c.gamma_mode == GammaMode::Matrix) {
            std::vector<Matrix> Ks, Cs, Ps;
            for (NodeId i = 0; i < N; ++i) {
                Ks.push_back(est[i].K);
                Cs.push_back(c.sensors[i].C);
                Ps.push_back(est[i].P_prior);
            }
            const auto cg = consensus_gain(Ks, Cs, A, Ps, Lplain, c.gamma);
            for (NodeId i = 0; i < N; ++i) est[i].gamma = cg.gamma[i];
        }
        gamma_max = 0.0;
        for (NodeId i = 0; i < N; ++i) gamma_max = std::max(gamma_max, spectral_norm(est[i].gamma));

        // bound monitor sees the prior error of step k
        double realized = 0.0;
        for (NodeId i = 0; i < N; ++i) realized += (x - est[i].x_prior).squaredNorm();
        realized = std::sqrt(realized);
        if (!monitor) monitor.emplace(realized);
        const double bound_k = monitor->bound();
        const bool bound_ok = monitor->holds(realized);

        // estimate updates
        std::vector<double> eps(N);
        for (NodeId i = 0; i < N; ++i) {
            const auto& s = c.sensors[i];
            const Vector m = weighted_neighbor_estimate(view[i], a[i], est[i].x_prior, c.resilient.neighbor_average);
            eps[i] = (m - x).norm();
            if (resilient)
                est[i] = resilient_measurement_update(std::move(est[i]), y[i], s.C, m, b[i], view[i], a[i]);
            else {
                const Vector own = est[i].x_pred;
                est[i] = measurement_update(std::move(est[i]), y[i], s.C, view[i], own);
            }
            est[i].P_post = posterior_covariance(est[i].P_prior, est[i].K, s.C, s.R);
        }

        BoundInputs bi;
        bi.A = A;
        Matrix W = Matrix::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
        for (NodeId i = 0; i < N; ++i) {
            bi.M.push_back(Matrix::Identity(n, n) - est[i].K * c.sensors[i].C);
            for (std::size_t q = 0; q < nbrs[i].size(); ++q)
                W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(nbrs[i][q])) = a[i][q];
        }
        bi.L = weighted_laplacian(W);
        bi.gamma_max = gamma_max;
        bi.alpha = c.trigger.alpha;
        bi.alpha_over_C = alpha_over_C;
        bi.B = B;
        bi.tau = tau;
        bi.beta = b;
        monitor->advance(bound_terms(bi));

        for (NodeId i = 0; i < N; ++i) {
            NodeRecord r;
            r.k = k;
            r.node = i;
            r.zeta = est[i].zeta;
            r.x_true = x;
            r.x_prior = est[i].x_prior;
            r.x_post = est[i].x_post;
            r.x_pred = est[i].x_pred;
            r.innovation_norm = innovation(y[i], c.sensors[i].C, est[i].x_prior).norm();
            r.error_norm = (est[i].x_post - x).norm();
            r.trace_P_post = est[i].P_post.trace();
            r.attack_magnitude = (y[i] - ytrue[i]).norm();
            r.divergence = D[i];
            r.phi = Phi[i];
            r.phi_h1 = !std::isnan(Phi[i]) && detect(Phi[i], dc.delta) == Hypothesis::H1;
            r.beta = b[i];
            r.epsilon_norm = eps[i];
            r.bound = bound_k;
            r.realized_error = realized;
            r.bound_ok = bound_ok;
            r.majority_ok = maj_ok[i] != 0;
            trace.nodes.push_back(std::move(r));
            for (std::size_t q = 0; q < nbrs[i].size(); ++q) {
                EdgeRecord e;
                e.k = k;
                e.node = i;
                e.neighbor = nbrs[i][q];
                e.divergence = De[i][q];
                e.psi = Psi[i][q];
                e.psi_h1 = !std::isnan(Psi[i][q]) && detect(Psi[i][q], dc.delta) == Hypothesis::H1;
                e.sigma = sg[i][q];
                trace.edges.push_back(e);
            }
        }

        for (NodeId i = 0; i < N; ++i) est[i] = time_update(std::move(est[i]), A, c.process.Q);
        x = step_process(c.process, x, wstream.sample());
    }
    return trace;
}

} // namespace etdkf::sim
