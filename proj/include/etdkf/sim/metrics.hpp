#pragma once

#include "etdkf/sim/scenario.hpp"
#include "etdkf/sim/trace.hpp"

#include <ostream>

namespace etdkf::sim {

struct NodeMetrics {
    double trigger_rate = 0.0;
    double trigger_rate_pre = 0.0;
    double trigger_rate_post = 0.0;
    double mean_error_pre = 0.0;
    double mean_error_post = 0.0;
    std::int64_t detection_latency = -1; // -1: never flagged after onset
    std::int64_t false_positives = 0;    // H1 flags before onset
};

struct MetricsReport {
    std::int64_t onset = 0;
    std::vector<NodeMetrics> nodes;
    std::int64_t false_positives = 0;
    std::size_t effective_components = 0;
    std::vector<NodeSet> effective_clusters;
};

namespace detail {
inline double safe_mean(double sum, std::int64_t n) { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
} // namespace detail

// Nodes that stay silent after onset relay nothing, so the effective graph
// is the subgraph induced by nodes that transmitted at least once.
inline MetricsReport compute_metrics(const SimTrace& t, const ScenarioConfig& c)
{
    const auto N = c.nodes;
    MetricsReport rep;
    rep.onset = c.first_onset();
    rep.nodes.assign(N, {});
    std::vector<std::int64_t> cnt(N), cpre(N), cpost(N), tpre(N), tpost(N);
    std::vector<double> epre(N), epost(N);
    for (const auto& r : t.nodes) {
        if (r.node >= N) continue;
        auto& m = rep.nodes[r.node];
        ++cnt[r.node];
        if (r.k < rep.onset) {
            ++cpre[r.node];
            tpre[r.node] += r.zeta;
            epre[r.node] += r.error_norm;
            if (r.phi_h1) ++m.false_positives;
        } else {
            ++cpost[r.node];
            tpost[r.node] += r.zeta;
            epost[r.node] += r.error_norm;
            if (r.phi_h1 && r.k > rep.onset && m.detection_latency < 0) m.detection_latency = r.k - rep.onset;
        }
    }
    NodeSet talkers;
    for (NodeId i = 0; i < N; ++i) {
        auto& m = rep.nodes[i];
        m.trigger_rate = detail::safe_mean(static_cast<double>(tpre[i] + tpost[i]), cnt[i]);
        m.trigger_rate_pre = detail::safe_mean(static_cast<double>(tpre[i]), cpre[i]);
        m.trigger_rate_post = detail::safe_mean(static_cast<double>(tpost[i]), cpost[i]);
        m.mean_error_pre = detail::safe_mean(epre[i], cpre[i]);
        m.mean_error_post = detail::safe_mean(epost[i], cpost[i]);
        rep.false_positives += m.false_positives;
        // without attacks the whole run counts
        if ((c.attacks.empty() ? tpre[i] + tpost[i] : tpost[i]) > 0) talkers.insert(i);
    }
    NodeSet silent;
    for (NodeId i = 0; i < N; ++i)
        if (!talkers.count(i)) silent.insert(i);
    rep.effective_clusters = connected_components(c.graph(), silent);
    rep.effective_components = rep.effective_clusters.size();
    return rep;
}

inline void write_metrics_csv(const MetricsReport& m, std::ostream& os)
{
    os << "node,trigger_rate,trigger_rate_pre,trigger_rate_post,mean_error_pre,mean_error_post,detection_latency,"
          "false_positives\n";
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const auto& r = m.nodes[i];
        os << i + 1 << ',' << fmt_double(r.trigger_rate) << ',' << fmt_double(r.trigger_rate_pre) << ','
           << fmt_double(r.trigger_rate_post) << ',' << fmt_double(r.mean_error_pre) << ','
           << fmt_double(r.mean_error_post) << ',' << r.detection_latency << ',' << r.false_positives << '\n';
    }
}

inline json metrics_to_json(const MetricsReport& m)
{
    json j;
    j["onset"] = m.onset;
    j["false_positives"] = m.false_positives;
    j["effective_components"] = m.effective_components;
    json cl = json::array();
    for (const auto& s : m.effective_clusters) {
        json c = json::array();
        for (auto v : s) c.push_back(v + 1);
        cl.push_back(c);
    }
    j["effective_clusters"] = cl;
    json nodes = json::array();
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const auto& r = m.nodes[i];
        nodes.push_back({{"node", i + 1},
                         {"trigger_rate", r.trigger_rate},
                         {"trigger_rate_pre", r.trigger_rate_pre},
                         {"trigger_rate_post", r.trigger_rate_post},
                         {"mean_error_pre", r.mean_error_pre},
                         {"mean_error_post", r.mean_error_post},
                         {"detection_latency", r.detection_latency},
                         {"false_positives", r.false_positives}});
    }
    j["nodes"] = nodes;
    return j;
}

} // namespace etdkf::sim
