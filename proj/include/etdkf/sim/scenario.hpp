#pragma once

#include "etdkf/attack.hpp"
#include "etdkf/detection.hpp"
#include "etdkf/resilience.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace etdkf::sim {

using json = nlohmann::json;

enum class FilterMode { Nominal, Resilient };
enum class ReferenceMode { Live, Calibrated };
enum class BeliefInput { Estimate, Average };

struct ScenarioConfig {
    std::string name = "custom";
    std::int64_t steps = 100;
    std::uint64_t seed = 1;
    double steps_per_second = 1.0;

    ProcessModel process;
    std::vector<SensorModel> sensors;
    std::size_t nodes = 0;
    std::vector<Edge> edges; // 0-based

    TriggerConfig trigger;
    FilterMode mode = FilterMode::Nominal;
    GammaMode gamma_mode = GammaMode::Scalar;
    double gamma = 0.05;
    bool pin_beliefs = false;

    std::vector<AttackPlan> attacks;

    DetectorConfig detector;
    bool whiten = true;
    ReferenceMode reference = ReferenceMode::Live;
    BeliefInput belief_input = BeliefInput::Estimate;

    ResilientConfig resilient;
    bool tau_auto = true;
    std::optional<double> bound_B; // empty: calibrate from a warmup run
    std::size_t calibration_steps = 500;

    Graph graph() const { return Graph(nodes, edges); }

    NodeSet compromised_nodes() const
    {
        NodeSet s;
        for (const auto& a : attacks) {
            if (a.kind == AttackKind::ChannelInjection) continue;
            s.insert(a.target);
        }
        return s;
    }

    std::int64_t first_onset() const
    {
        std::int64_t k = steps;
        for (const auto& a : attacks) k = std::min(k, a.onset);
        return k;
    }
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

inline ValidationReport validate(const ScenarioConfig& c)
{
    ValidationReport r;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            r.errors.emplace_back(e.what());
        }
    };
    if (c.steps < 0) r.errors.emplace_back("steps must be >= 0");
    if (!(c.steps_per_second > 0.0)) r.errors.emplace_back("steps_per_second must be positive");
    check([&] { c.process.validate(); });
    const auto n = c.process.A.rows();
    if (c.nodes == 0) r.errors.emplace_back("graph.nodes must be >= 1");
    if (c.sensors.size() != c.nodes)
        r.errors.emplace_back("sensor count " + std::to_string(c.sensors.size()) + " differs from graph.nodes " +
                              std::to_string(c.nodes));
    for (std::size_t i = 0; i < c.sensors.size(); ++i)
        check([&] {
            try {
                c.sensors[i].validate(n);
            } catch (const std::exception& e) {
                throw ConfigError("sensor " + std::to_string(i + 1) + ": " + e.what());
            }
        });
    std::optional<Graph> g;
    check([&] { g = c.graph(); });
    check([&] { c.trigger.validate(); });
    if (!(c.gamma >= 0.0)) r.errors.emplace_back("filter.gamma must be >= 0");
    check([&] { c.detector.validate(); });
    check([&] { c.resilient.validate(); });
    if (c.bound_B && !(*c.bound_B >= 0.0)) r.errors.emplace_back("resilient.bound_B must be >= 0");
    if (c.calibration_steps < c.detector.window + 1)
        r.errors.emplace_back("calibration_steps must exceed the detector window");

    if (r.ok() && c.nodes > 0) {
        NodeSet all;
        for (NodeId i = 0; i < c.nodes; ++i) all.insert(i);
        if (!is_collectively_observable(c.process, c.sensors, all, c.nodes))
            r.errors.emplace_back("network is not collectively observable");
    }

    NodeSet measured;
    std::set<Edge> channels;
    for (std::size_t a = 0; a < c.attacks.size(); ++a) {
        const auto& p = c.attacks[a];
        const std::string tag = "attack " + std::to_string(a + 1) + ": ";
        if (p.onset < 0) r.errors.push_back(tag + "onset must be >= 0");
        if (p.target >= c.nodes) {
            r.errors.push_back(tag + "target out of range");
            continue;
        }
        if (p.kind == AttackKind::ChannelInjection) {
            if (!p.source || *p.source >= c.nodes) {
                r.errors.push_back(tag + "channel attack needs a valid source");
                continue;
            }
            if (g && !g->has_edge(*p.source, p.target)) r.errors.push_back(tag + "channel is not a graph edge");
            if (!channels.insert({*p.source, p.target}).second) r.errors.push_back(tag + "channel attacked twice");
            if (p.signal.shape == SignalSpec::Shape::Uniform && p.signal.low > p.signal.high)
                r.errors.push_back(tag + "uniform signal needs low <= high");
            continue;
        }
        if (!measured.insert(p.target).second) r.errors.push_back(tag + "node already attacked by another plan");
        const auto p_dim = p.target < c.sensors.size() ? c.sensors[p.target].C.rows() : 0;
        switch (p.kind) {
        case AttackKind::NonTriggering:
            if (!(p.phi >= 0.0 && p.phi < c.trigger.alpha)) r.errors.push_back(tag + "phi must satisfy 0 <= phi < alpha");
            break;
        case AttackKind::ReplayContinuous:
            if (p.upsilon.size() != p_dim) r.errors.push_back(tag + "upsilon length must equal the sensor output size");
            else if (!(p.upsilon.norm() > c.trigger.alpha))
                r.warnings.push_back(tag + "||upsilon|| <= alpha, continuous triggering is not guaranteed");
            break;
        case AttackKind::MeasurementInjection:
            if (p.signal.shape == SignalSpec::Shape::Uniform && p.signal.low > p.signal.high)
                r.errors.push_back(tag + "uniform signal needs low <= high");
            break;
        default: break;
        }
    }
    if (r.ok() && c.mode == FilterMode::Resilient && g) {
        for (auto i : majority_violations(*g, c.compromised_nodes()))
            r.warnings.push_back("node " + std::to_string(i + 1) + " has too few intact neighbors");
    }
    return r;
}

inline void validate_or_throw(const ScenarioConfig& c)
{
    const auto r = validate(c);
    if (r.ok()) return;
    std::string msg = "invalid scenario '" + c.name + "':";
    for (const auto& e : r.errors) msg += "\n  - " + e;
    throw ConfigError(msg);
}

// ---- JSON ----

inline Matrix matrix_from_json(const json& j, const std::string& what)
{
    if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a nested array");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols)
            throw ConfigError(what + ": ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

inline Vector vector_from_json(const json& j, const std::string& what)
{
    if (!j.is_array()) throw ConfigError(what + ": expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

inline json to_json(const Matrix& m)
{
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

inline json to_json(const Vector& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

template <class E>
E enum_from(const json& j, const std::string& what, std::initializer_list<std::pair<const char*, E>> opts)
{
    const auto s = j.get<std::string>();
    for (auto& [name, val] : opts)
        if (s == name) return val;
    std::string allowed;
    for (auto& [name, val] : opts) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    throw ConfigError(what + ": unknown value '" + s + "' (expected one of " + allowed + ")");
}

inline SignalSpec signal_from_json(const json& j)
{
    SignalSpec s;
    const auto shape = j.value("shape", std::string("sinusoid"));
    if (shape == "constant") {
        s.shape = SignalSpec::Shape::Constant;
        s.offset = j.value("offset", 0.0);
    } else if (shape == "sinusoid") {
        s.shape = SignalSpec::Shape::Sinusoid;
        s.offset = j.value("offset", 0.0);
        s.amplitude = j.value("amplitude", 0.0);
        s.frequency = j.value("frequency", 0.0);
        s.phase = j.value("phase", 0.0);
    } else if (shape == "uniform") {
        s.shape = SignalSpec::Shape::Uniform;
        s.low = j.value("low", 0.0);
        s.high = j.value("high", 0.0);
    } else {
        throw ConfigError("attack.signal.shape: unknown value '" + shape + "'");
    }
    return s;
}

inline json to_json(const SignalSpec& s)
{
    switch (s.shape) {
    case SignalSpec::Shape::Constant: return {{"shape", "constant"}, {"offset", s.offset}};
    case SignalSpec::Shape::Sinusoid:
        return {{"shape", "sinusoid"}, {"offset", s.offset}, {"amplitude", s.amplitude},
                {"frequency", s.frequency}, {"phase", s.phase}};
    case SignalSpec::Shape::Uniform: return {{"shape", "uniform"}, {"low", s.low}, {"high", s.high}};
    }
    return {};
}

inline NodeId node_from_json(const json& j, const std::string& what)
{
    const auto v = j.get<long long>();
    if (v < 1) throw ConfigError(what + ": node ids start at 1");
    return static_cast<NodeId>(v - 1);
}

inline ScenarioConfig scenario_from_json(const json& j)
{
    try {
        ScenarioConfig c;
        c.name = j.value("name", c.name);
        c.steps = j.value("steps", c.steps);
        c.seed = j.value("seed", c.seed);
        c.steps_per_second = j.value("steps_per_second", c.steps_per_second);

        const auto& pj = j.at("process");
        c.process.A = matrix_from_json(pj.at("A"), "process.A");
        c.process.Q = matrix_from_json(pj.at("Q"), "process.Q");
        c.process.x0_mean = vector_from_json(pj.at("x0_mean"), "process.x0_mean");
        c.process.P0 = matrix_from_json(pj.at("P0"), "process.P0");

        const auto& gj = j.at("graph");
        c.nodes = gj.at("nodes").get<std::size_t>();
        for (const auto& e : gj.value("edges", json::array())) {
            if (!e.is_array() || e.size() != 2) throw ConfigError("graph.edges: each edge is a pair");
            c.edges.emplace_back(node_from_json(e[0], "graph.edges"), node_from_json(e[1], "graph.edges"));
        }

        const auto& sj = j.at("sensors");
        if (sj.is_object()) {
            // shorthand: one model shared by every node
            SensorModel s{matrix_from_json(sj.at("C"), "sensors.C"), matrix_from_json(sj.at("R"), "sensors.R")};
            c.sensors.assign(sj.value("count", c.nodes), s);
        } else {
            for (const auto& s : sj)
                c.sensors.push_back({matrix_from_json(s.at("C"), "sensor.C"), matrix_from_json(s.at("R"), "sensor.R")});
        }

        if (j.contains("trigger")) c.trigger.alpha = j["trigger"].value("alpha", c.trigger.alpha);

        if (j.contains("filter")) {
            const auto& f = j["filter"];
            if (f.contains("mode"))
                c.mode = enum_from<FilterMode>(f["mode"], "filter.mode",
                                               {{"nominal", FilterMode::Nominal}, {"resilient", FilterMode::Resilient}});
            if (f.contains("gamma_mode"))
                c.gamma_mode = enum_from<GammaMode>(f["gamma_mode"], "filter.gamma_mode",
                                                    {{"scalar", GammaMode::Scalar}, {"matrix", GammaMode::Matrix}});
            c.gamma = f.value("gamma", c.gamma);
            c.pin_beliefs = f.value("pin_beliefs", c.pin_beliefs);
        }

        for (const auto& a : j.value("attacks", json::array())) {
            AttackPlan p;
            p.kind = enum_from<AttackKind>(a.at("kind"), "attack.kind",
                                           {{"measurement", AttackKind::MeasurementInjection},
                                            {"channel", AttackKind::ChannelInjection},
                                            {"non_triggering", AttackKind::NonTriggering},
                                            {"replay", AttackKind::ReplayContinuous}});
            p.target = node_from_json(a.at("target"), "attack.target");
            if (a.contains("source")) p.source = node_from_json(a["source"], "attack.source");
            if (a.contains("onset_seconds"))
                p.onset = static_cast<std::int64_t>(std::llround(a["onset_seconds"].get<double>() * c.steps_per_second));
            else
                p.onset = a.value("onset", std::int64_t{0});
            if (a.contains("signal")) p.signal = signal_from_json(a["signal"]);
            p.phi = a.value("phi", 0.0);
            if (a.contains("mode"))
                p.mode = enum_from<NonTriggerMode>(a["mode"], "attack.mode",
                                                   {{"direct", NonTriggerMode::Direct},
                                                    {"interval_sampler", NonTriggerMode::IntervalSampler}});
            if (a.contains("upsilon")) p.upsilon = vector_from_json(a["upsilon"], "attack.upsilon");
            c.attacks.push_back(std::move(p));
        }

        if (j.contains("detector")) {
            const auto& d = j["detector"];
            c.detector.k_nn = d.value("k_nn", c.detector.k_nn);
            c.detector.window = d.value("window", c.detector.window);
            c.detector.averaging = d.value("averaging", c.detector.averaging);
            c.detector.delta = d.value("delta", c.detector.delta);
            c.detector.distance_floor = d.value("distance_floor", c.detector.distance_floor);
            c.whiten = d.value("whiten", c.whiten);
            if (d.contains("reference"))
                c.reference = enum_from<ReferenceMode>(d["reference"], "detector.reference",
                                                       {{"live", ReferenceMode::Live},
                                                        {"calibrated", ReferenceMode::Calibrated}});
        }

        if (j.contains("resilient")) {
            const auto& rj = j["resilient"];
            auto& r = c.resilient;
            r.upsilon1 = rj.value("upsilon1", r.upsilon1);
            r.lambda1 = rj.value("lambda1", r.lambda1);
            r.kappa1 = rj.value("kappa1", r.kappa1);
            r.kappa2 = rj.value("kappa2", r.kappa2);
            if (rj.contains("tau")) {
                if (rj["tau"].is_string() && rj["tau"] == "auto")
                    c.tau_auto = true;
                else {
                    c.tau_auto = false;
                    r.tau = rj["tau"].get<double>();
                }
            }
            if (rj.contains("bound_B")) {
                if (rj["bound_B"].is_string() && rj["bound_B"] == "auto")
                    c.bound_B.reset();
                else
                    c.bound_B = rj["bound_B"].get<double>();
            }
            if (rj.contains("discount"))
                r.discount = enum_from<DiscountMode>(rj["discount"], "resilient.discount",
                                                     {{"normalized", DiscountMode::Normalized},
                                                      {"literal", DiscountMode::Literal},
                                                      {"difference", DiscountMode::Difference}});
            if (rj.contains("neighbor_average"))
                r.neighbor_average = enum_from<NeighborAverage>(rj["neighbor_average"], "resilient.neighbor_average",
                                                                {{"weight_sum", NeighborAverage::WeightSum},
                                                                 {"literal", NeighborAverage::Literal}});
            if (rj.contains("belief_input"))
                c.belief_input = enum_from<BeliefInput>(rj["belief_input"], "resilient.belief_input",
                                                        {{"estimate", BeliefInput::Estimate},
                                                         {"average", BeliefInput::Average}});
            c.calibration_steps = rj.value("calibration_steps", c.calibration_steps);
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
}

inline json scenario_to_json(const ScenarioConfig& c)
{
    json j;
    j["name"] = c.name;
    j["steps"] = c.steps;
    j["seed"] = c.seed;
    j["steps_per_second"] = c.steps_per_second;
    j["process"] = {{"A", to_json(c.process.A)},
                    {"Q", to_json(c.process.Q)},
                    {"x0_mean", to_json(c.process.x0_mean)},
                    {"P0", to_json(c.process.P0)}};
    json sensors = json::array();
    for (const auto& s : c.sensors) sensors.push_back({{"C", to_json(s.C)}, {"R", to_json(s.R)}});
    j["sensors"] = sensors;
    json edges = json::array();
    for (auto [a, b] : c.edges) edges.push_back({a + 1, b + 1});
    j["graph"] = {{"nodes", c.nodes}, {"edges", edges}};
    j["trigger"] = {{"alpha", c.trigger.alpha}};
    j["filter"] = {{"mode", c.mode == FilterMode::Nominal ? "nominal" : "resilient"},
                   {"gamma_mode", c.gamma_mode == GammaMode::Scalar ? "scalar" : "matrix"},
                   {"gamma", c.gamma},
                   {"pin_beliefs", c.pin_beliefs}};
    json attacks = json::array();
    for (const auto& p : c.attacks) {
        json a{{"kind", to_string(p.kind)}, {"target", p.target + 1}, {"onset", p.onset}};
        switch (p.kind) {
        case AttackKind::MeasurementInjection: a["signal"] = to_json(p.signal); break;
        case AttackKind::ChannelInjection:
            a["signal"] = to_json(p.signal);
            if (p.source) a["source"] = *p.source + 1;
            break;
        case AttackKind::NonTriggering:
            a["phi"] = p.phi;
            a["mode"] = p.mode == NonTriggerMode::Direct ? "direct" : "interval_sampler";
            break;
        case AttackKind::ReplayContinuous: a["upsilon"] = to_json(p.upsilon); break;
        }
        attacks.push_back(a);
    }
    j["attacks"] = attacks;
    j["detector"] = {{"k_nn", c.detector.k_nn},
                     {"window", c.detector.window},
                     {"averaging", c.detector.averaging},
                     {"delta", c.detector.delta},
                     {"distance_floor", c.detector.distance_floor},
                     {"whiten", c.whiten},
                     {"reference", c.reference == ReferenceMode::Live ? "live" : "calibrated"}};
    const auto& r = c.resilient;
    auto discount = r.discount == DiscountMode::Normalized ? "normalized"
                    : r.discount == DiscountMode::Literal  ? "literal"
                                                           : "difference";
    j["resilient"] = {{"upsilon1", r.upsilon1},
                      {"lambda1", r.lambda1},
                      {"kappa1", r.kappa1},
                      {"kappa2", r.kappa2},
                      {"discount", discount},
                      {"neighbor_average", r.neighbor_average == NeighborAverage::WeightSum ? "weight_sum" : "literal"},
                      {"belief_input", c.belief_input == BeliefInput::Estimate ? "estimate" : "average"},
                      {"calibration_steps", c.calibration_steps}};
    if (c.tau_auto)
        j["resilient"]["tau"] = "auto";
    else
        j["resilient"]["tau"] = r.tau;
    if (c.bound_B)
        j["resilient"]["bound_B"] = *c.bound_B;
    else
        j["resilient"]["bound_B"] = "auto";
    return j;
}

inline ScenarioConfig load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("scenario file '" + path + "': " + e.what());
    }
    return scenario_from_json(j);
}

inline void save_scenario(const ScenarioConfig& c, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write scenario file '" + path + "'");
    out << scenario_to_json(c).dump(2) << '\n';
}

} // namespace etdkf::sim
