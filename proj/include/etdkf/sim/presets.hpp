#pragma once

#include "etdkf/sim/scenario.hpp"

#include <numbers>

namespace etdkf::sim {

// Rotation by pi/200, C = diag(5,2), Q = R = I, x0 = (0.5, 0), alpha = 1.8.
inline ScenarioConfig base_scenario()
{
    ScenarioConfig c;
    const double th = std::numbers::pi / 200.0;
    c.process.A.resize(2, 2);
    c.process.A << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    c.process.Q = Matrix::Identity(2, 2);
    c.process.x0_mean = Vector(2);
    c.process.x0_mean << 0.5, 0.0;
    c.process.P0 = Matrix::Identity(2, 2);
    SensorModel s;
    s.C = Matrix::Zero(2, 2);
    s.C(0, 0) = 5.0;
    s.C(1, 1) = 2.0;
    s.R = Matrix::Identity(2, 2);
    // six nodes, every node of degree three: ring plus the long diagonals
    c.nodes = 6;
    c.sensors.assign(6, s);
    c.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {0, 3}, {1, 4}, {2, 5}};
    c.trigger.alpha = 1.8;
    c.gamma = 0.02;
    c.steps_per_second = 10.0;
    c.seed = 7;
    return c;
}

// Removing nodes 5 and 6 (1-based) leaves {1,2,3,4} and {7,8}.
inline std::vector<Edge> example1_edges()
{
    return {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}, {2, 4}, {3, 5}, {4, 5}, {4, 6}, {5, 7}, {6, 7}};
}

inline AttackPlan sinusoid_attack(NodeId target, std::int64_t onset)
{
    AttackPlan p;
    p.kind = AttackKind::MeasurementInjection;
    p.target = target;
    p.onset = onset;
    p.signal.shape = SignalSpec::Shape::Sinusoid;
    p.signal.offset = 2.0;
    p.signal.amplitude = 10.0;
    p.signal.frequency = 100.0;
    return p;
}

inline std::vector<std::string> list_presets()
{
    return {"fig3", "fig4", "fig4-replay", "fig5", "fig5-sampler", "fig6", "fig7", "example1"};
}

inline ScenarioConfig preset(const std::string& name)
{
    ScenarioConfig c = base_scenario();
    c.name = name;
    const std::int64_t onset = 200; // 20 s at 10 steps per second
    if (name == "fig3") {
        c.steps = 600;
    } else if (name == "fig4") {
        c.steps = 600;
        c.attacks.push_back(sinusoid_attack(1, onset));
    } else if (name == "fig4-replay") {
        c.steps = onset + 1001;
        AttackPlan p;
        p.kind = AttackKind::ReplayContinuous;
        p.target = 1;
        p.onset = onset;
        p.upsilon = Vector::Constant(2, 1.1 * c.trigger.alpha / std::sqrt(2.0));
        c.attacks.push_back(p);
    } else if (name == "fig5" || name == "fig5-sampler") {
        c.steps = onset + 1001;
        AttackPlan p;
        p.kind = AttackKind::NonTriggering;
        p.target = 1;
        p.onset = onset;
        p.phi = 0.9 * c.trigger.alpha;
        p.mode = name == "fig5" ? NonTriggerMode::Direct : NonTriggerMode::IntervalSampler;
        c.attacks.push_back(p);
    } else if (name == "fig6" || name == "fig7") {
        c.steps = name == "fig6" ? 800 : 1000;
        c.mode = FilterMode::Resilient;
        c.detector.k_nn = 3;
        c.detector.window = 100;
        c.detector.averaging = 10;
        c.detector.delta = 0.5;
        c.belief_input = BeliefInput::Average;
        c.attacks.push_back(sinusoid_attack(1, onset));
    } else if (name == "example1") {
        c.steps = onset + 600;
        c.nodes = 8;
        c.sensors.assign(8, c.sensors[0]);
        c.edges = example1_edges();
        for (NodeId t : {NodeId{4}, NodeId{5}}) {
            AttackPlan p;
            p.kind = AttackKind::NonTriggering;
            p.target = t;
            p.onset = onset;
            p.phi = 0.9 * c.trigger.alpha;
            c.attacks.push_back(p);
        }
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return c;
}

} // namespace etdkf::sim
