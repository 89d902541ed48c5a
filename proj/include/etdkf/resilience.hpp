#pragma once

#include "etdkf/etdkf.hpp"
#include "etdkf/graph.hpp"

#include <limits>
#include <span>
#include <vector>

namespace etdkf {

// Normalized: discounted average of the raw statistics, stays in (0,1].
// Literal: the bare discounted sum. Difference: b <- b + kappa * stat.
enum class DiscountMode { Normalized, Literal, Difference };

// WeightSum divides by the sum of weights; Literal divides by |N_i|.
enum class NeighborAverage { WeightSum, Literal };

struct ResilientConfig {
    double upsilon1 = 0.5;
    double lambda1 = 0.5;
    double kappa1 = 0.5;
    double kappa2 = 0.5;
    double tau = 1.0;
    DiscountMode discount = DiscountMode::Normalized;
    NeighborAverage neighbor_average = NeighborAverage::WeightSum;

    void validate() const
    {
        auto open01 = [](double v) { return v > 0.0 && v < 1.0; };
        if (!open01(upsilon1)) throw ConfigError("resilient.upsilon1 must lie in (0,1)");
        if (!open01(lambda1)) throw ConfigError("resilient.lambda1 must lie in (0,1)");
        if (!open01(kappa1)) throw ConfigError("resilient.kappa1 must lie in (0,1)");
        if (!open01(kappa2)) throw ConfigError("resilient.kappa2 must lie in (0,1)");
        if (!(tau > 0.0)) throw ConfigError("resilient.tau must be positive");
    }
};

// Upsilon / (Upsilon + D). Negative estimates count as zero divergence here.
inline double belief_statistic(double divergence, double threshold)
{
    return threshold / (threshold + std::max(divergence, 0.0));
}

class DiscountedBelief {
public:
    explicit DiscountedBelief(double kappa = 0.5, DiscountMode mode = DiscountMode::Normalized)
        : kappa_(kappa), mode_(mode), value_(mode == DiscountMode::Normalized ? 1.0 : 0.0)
    {
    }

    // Fold in the statistic of step k; value() is then the belief for k+1.
    double update(double stat)
    {
        const double k2 = kappa_ * kappa_;
        switch (mode_) {
        case DiscountMode::Normalized:
            num_ = kappa_ * num_ + k2 * stat;
            den_ = kappa_ * den_ + k2;
            value_ = num_ / den_;
            break;
        case DiscountMode::Literal:
            num_ = kappa_ * num_ + k2 * stat;
            value_ = num_;
            break;
        case DiscountMode::Difference: value_ += kappa_ * stat; break;
        }
        return value_;
    }

    double value() const { return value_; }

private:
    double kappa_;
    DiscountMode mode_;
    double num_ = 0.0;
    double den_ = 0.0;
    double value_;
};

inline double update_confidence(DiscountedBelief& beta, double chi) { return beta.update(chi); }
inline double update_trust(DiscountedBelief& sigma, double theta) { return sigma.update(theta); }

inline Vector weighted_neighbor_estimate(std::span<const Vector> preds, std::span<const double> weights,
                                         const Vector& own_prior, NeighborAverage mode = NeighborAverage::WeightSum)
{
    if (preds.size() != weights.size()) throw ConfigError("weighted_neighbor_estimate: size mismatch");
    if (preds.empty()) return own_prior;
    Vector s = Vector::Zero(own_prior.size());
    double wsum = 0.0;
    for (std::size_t j = 0; j < preds.size(); ++j) {
        s += weights[j] * preds[j];
        wsum += weights[j];
    }
    if (mode == NeighborAverage::Literal) return s / static_cast<double>(preds.size());
    if (!(wsum > 0.0)) return own_prior;
    return s / wsum;
}

// Posterior mean with measurement blended toward C m by (1 - beta) and
// consensus weighted per neighbor. Uses est.K and est.x_pred.
inline NodeEstimator resilient_measurement_update(NodeEstimator est, const Vector& y, const Matrix& C, const Vector& m,
                                                  double beta, std::span<const Vector> neighbor_preds,
                                                  std::span<const double> weights)
{
    const Vector blended = beta * y + (1.0 - beta) * (C * m);
    est.x_post = est.x_prior + est.K * (blended - C * est.x_prior) +
                 consensus_term(est.gamma, est.x_pred, neighbor_preds, weights);
    return est;
}

struct BoundTerms {
    double A_o = 0.0;
    double B_o = 0.0;
    double triggering_term = 0.0;
    double belief_term = 0.0;
};

struct BoundInputs {
    Matrix A;
    std::vector<Matrix> M;      // I - K_i C_i per node
    Matrix L;                   // trust-weighted Laplacian
    double gamma_max = 0.0;     // max_i ||gamma_i||
    double alpha = 0.0;
    double alpha_over_C = 0.0;  // max_i alpha / ||C_i||
    double B = 0.0;             // bound on ||x(k+1) - x(k) + v_i(k+1)||
    double tau = 0.0;
    std::vector<double> beta;
};

inline BoundTerms bound_terms(const BoundInputs& in)
{
    BoundTerms t;
    for (const auto& Mi : in.M) t.A_o = std::max(t.A_o, spectral_norm(in.A * Mi));
    const double N = static_cast<double>(in.M.size());
    const double sA = spectral_norm(in.A);
    double beta_bar = 0.0;
    for (double b : in.beta) beta_bar = std::max(beta_bar, std::abs(1.0 - b));
    t.triggering_term = sA * spectral_norm(in.L) * in.gamma_max * std::sqrt(N) * (in.alpha_over_C + in.B);
    t.belief_term = (sA + t.A_o) * beta_bar * std::sqrt(N) * in.tau;
    t.B_o = t.triggering_term + t.belief_term;
    return t;
}

// Running bound b(k+1) = A_o(k) b(k) + B_o(k), b(0) = ||eta_bar(0)||.
class BoundMonitor {
public:
    explicit BoundMonitor(double initial_error = 0.0) : bound_(initial_error) {}

    double bound() const { return bound_; }
    bool holds(double realized) const { return realized <= bound_; }

    void advance(const BoundTerms& t)
    {
        last_ = t;
        bound_ = t.A_o * bound_ + t.B_o;
    }

    const BoundTerms& last_terms() const { return last_; }

    bool contractive() const { return last_.A_o < 1.0; }

    // A_o B_o / (1 - A_o) as stated for the limit, and the geometric-series
    // limit B_o / (1 - A_o) of the recursion itself.
    double stated_limit() const
    {
        return contractive() ? last_.A_o * last_.B_o / (1.0 - last_.A_o) : std::numeric_limits<double>::infinity();
    }
    double geometric_limit() const
    {
        return contractive() ? last_.B_o / (1.0 - last_.A_o) : std::numeric_limits<double>::infinity();
    }

private:
    double bound_;
    BoundTerms last_;
};

// Nodes with fewer than floor(|N_i|/2) + 1 intact neighbors.
inline std::vector<NodeId> majority_violations(const Graph& g, const NodeSet& compromised)
{
    std::vector<NodeId> out;
    for (NodeId i = 0; i < g.node_count(); ++i) {
        const auto& nb = g.neighbors(i);
        std::size_t intact = 0;
        for (auto j : nb)
            if (!compromised.count(j)) ++intact;
        if (intact < nb.size() / 2 + 1) out.push_back(i);
    }
    return out;
}

} // namespace etdkf
