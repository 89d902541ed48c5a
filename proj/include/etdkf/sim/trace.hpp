#pragma once

#include "etdkf/common.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace etdkf::sim {

struct NodeRecord {
    std::int64_t k = 0;
    NodeId node = 0;
    bool zeta = false;
    Vector x_true, x_prior, x_post, x_pred;
    double innovation_norm = 0.0;
    double error_norm = 0.0;
    double trace_P_post = 0.0;
    double attack_magnitude = 0.0;
    double divergence = std::numeric_limits<double>::quiet_NaN(); // NaN until the window fills
    double phi = std::numeric_limits<double>::quiet_NaN();
    bool phi_h1 = false;
    double beta = 1.0;
    double epsilon_norm = 0.0;
    double bound = 0.0;
    double realized_error = 0.0;
    bool bound_ok = true;
    bool majority_ok = true;
};

struct EdgeRecord {
    std::int64_t k = 0;
    NodeId node = 0;     // receiver
    NodeId neighbor = 0; // sender
    double divergence = std::numeric_limits<double>::quiet_NaN();
    double psi = std::numeric_limits<double>::quiet_NaN();
    bool psi_h1 = false;
    double sigma = 1.0;
};

struct SimTrace {
    Eigen::Index state_dim = 0;
    std::vector<NodeRecord> nodes;
    std::vector<EdgeRecord> edges;
};

inline std::string fmt_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string node_csv_header(Eigen::Index n)
{
    std::string h = "k,node,zeta";
    for (const char* tag : {"x", "x_prior", "x_post", "x_pred"})
        for (Eigen::Index i = 0; i < n; ++i) h += std::string(",") + tag + "_" + std::to_string(i + 1);
    h += ",innovation_norm,error_norm,trace_P_post,attack_magnitude,divergence,phi,phi_h1,beta,epsilon_norm,"
         "bound,realized_error,bound_ok,majority_ok";
    return h;
}

inline std::string edge_csv_header() { return "k,node,neighbor,divergence,psi,psi_h1,sigma"; }

inline void write_nodes_csv(const SimTrace& t, std::ostream& os)
{
    os << node_csv_header(t.state_dim) << '\n';
    for (const auto& r : t.nodes) {
        os << r.k << ',' << r.node + 1 << ',' << (r.zeta ? 1 : 0);
        for (const Vector* v : {&r.x_true, &r.x_prior, &r.x_post, &r.x_pred})
            for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << fmt_double((*v)(i));
        os << ',' << fmt_double(r.innovation_norm) << ',' << fmt_double(r.error_norm) << ','
           << fmt_double(r.trace_P_post) << ',' << fmt_double(r.attack_magnitude) << ',' << fmt_double(r.divergence)
           << ',' << fmt_double(r.phi) << ',' << (r.phi_h1 ? 1 : 0) << ',' << fmt_double(r.beta) << ','
           << fmt_double(r.epsilon_norm) << ',' << fmt_double(r.bound) << ',' << fmt_double(r.realized_error) << ','
           << (r.bound_ok ? 1 : 0) << ',' << (r.majority_ok ? 1 : 0) << '\n';
    }
}

inline void write_edges_csv(const SimTrace& t, std::ostream& os)
{
    os << edge_csv_header() << '\n';
    for (const auto& r : t.edges)
        os << r.k << ',' << r.node + 1 << ',' << r.neighbor + 1 << ',' << fmt_double(r.divergence) << ','
           << fmt_double(r.psi) << ',' << (r.psi_h1 ? 1 : 0) << ',' << fmt_double(r.sigma) << '\n';
}

namespace detail {
inline std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

inline double parse_double(const std::string& s)
{
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("csv: bad number '" + s + "'");
    return v;
}
} // namespace detail

inline SimTrace read_trace(std::istream& nodes, std::istream& edges)
{
    SimTrace t;
    std::string line;
    if (!std::getline(nodes, line)) throw ConfigError("nodes.csv: missing header");
    const auto cols = detail::split(line).size();
    if (cols < 16 || (cols - 16) % 4 != 0) throw ConfigError("nodes.csv: unexpected column count");
    t.state_dim = static_cast<Eigen::Index>((cols - 16) / 4);
    if (line != node_csv_header(t.state_dim)) throw ConfigError("nodes.csv: header does not match the schema");
    const auto n = t.state_dim;
    while (std::getline(nodes, line)) {
        if (line.empty()) continue;
        const auto c = detail::split(line);
        if (c.size() != cols) throw ConfigError("nodes.csv: ragged row");
        NodeRecord r;
        std::size_t p = 0;
        r.k = std::stoll(c[p++]);
        r.node = static_cast<NodeId>(std::stoll(c[p++]) - 1);
        r.zeta = c[p++] == "1";
        for (Vector* v : {&r.x_true, &r.x_prior, &r.x_post, &r.x_pred}) {
            v->resize(n);
            for (Eigen::Index i = 0; i < n; ++i) (*v)(i) = detail::parse_double(c[p++]);
        }
        r.innovation_norm = detail::parse_double(c[p++]);
        r.error_norm = detail::parse_double(c[p++]);
        r.trace_P_post = detail::parse_double(c[p++]);
        r.attack_magnitude = detail::parse_double(c[p++]);
        r.divergence = detail::parse_double(c[p++]);
        r.phi = detail::parse_double(c[p++]);
        r.phi_h1 = c[p++] == "1";
        r.beta = detail::parse_double(c[p++]);
        r.epsilon_norm = detail::parse_double(c[p++]);
        r.bound = detail::parse_double(c[p++]);
        r.realized_error = detail::parse_double(c[p++]);
        r.bound_ok = c[p++] == "1";
        r.majority_ok = c[p++] == "1";
        t.nodes.push_back(std::move(r));
    }
    if (!std::getline(edges, line) || line != edge_csv_header()) throw ConfigError("edges.csv: bad header");
    while (std::getline(edges, line)) {
        if (line.empty()) continue;
        const auto c = detail::split(line);
        if (c.size() != 7) throw ConfigError("edges.csv: ragged row");
        EdgeRecord r;
        r.k = std::stoll(c[0]);
        r.node = static_cast<NodeId>(std::stoll(c[1]) - 1);
        r.neighbor = static_cast<NodeId>(std::stoll(c[2]) - 1);
        r.divergence = detail::parse_double(c[3]);
        r.psi = detail::parse_double(c[4]);
        r.psi_h1 = c[5] == "1";
        r.sigma = detail::parse_double(c[6]);
        t.edges.push_back(r);
    }
    return t;
}

inline void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void write_trace(const SimTrace& t, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
    std::ostringstream n, e;
    write_nodes_csv(t, n);
    write_edges_csv(t, e);
    write_file(dir / "nodes.csv", n.str());
    write_file(dir / "edges.csv", e.str());
}

inline SimTrace read_trace(const std::filesystem::path& dir)
{
    std::ifstream n(dir / "nodes.csv"), e(dir / "edges.csv");
    if (!n) throw std::runtime_error("cannot open '" + (dir / "nodes.csv").string() + "'");
    if (!e) throw std::runtime_error("cannot open '" + (dir / "edges.csv").string() + "'");
    return read_trace(n, e);
}

} // namespace etdkf::sim
