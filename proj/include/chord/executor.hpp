#pragma once
// Traversal engine over the augmented graph: runs the active edge program
// in chunks, evaluates monitors after every control step, switches to the
// pre-compiled recovery edge on trigger, and advances on sub-goal
// satisfaction. Also implements the backtracking and open-loop comparison
// strategies.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chord/graph.hpp"
#include "chord/simworld.hpp"

namespace chord {

enum class Strategy { AgentChord, Backtrack, NoRecovery };

Strategy strategy_from_string(const std::string& s);
std::string strategy_to_string(Strategy s);

struct ExecutorConfig {
    std::uint64_t step_budget = 3000;
    int recovery_cap = 10;       // triggers per episode
    int consecutive_cap = 3;     // consecutive triggers on one edge
    double planner_latency_s = 5.0;
    double dt = 0.1;             // seconds per control step
    NoiseConfig noise;
    SolverConfig solver;
    MonitorDefaults monitors;
};

ExecutorConfig executor_config_from_json(const nlohmann::json& j);
nlohmann::json executor_config_to_json(const ExecutorConfig& c);

struct TraceEvent {
    std::uint64_t step = 0;
    std::string kind;  // command | monitor_eval | trigger | edge_switch |
                       // node_complete | disturbance | planner_call | terminal
    nlohmann::json payload;
};

struct Trace {
    nlohmann::json header;
    std::vector<TraceEvent> events;

    std::string to_ndjson() const;
    std::vector<const TraceEvent*> of_kind(const std::string& kind) const;
};

struct EpisodeResult {
    bool success = false;
    std::uint64_t episode_steps = 0;
    double simulated_time = 0.0;  // steps * dt + planner_calls * latency
    int triggers = 0;
    int recovery_switches = 0;
    int planner_calls = 0;
    int eligible_drop_actions = 0;  // Bernoulli drop opportunities seen
    std::string reason;             // empty on success

    nlohmann::json to_json() const;
};

struct EpisodeSetup {
    const AugmentedGraph* graph = nullptr;
    const WorkspaceModel* workspace = nullptr;
    const CollisionField* field = nullptr;  // may be null
    DisturbanceModel disturbance;
};

// Active-edge selection: the pending recovery edge after a trigger,
// otherwise the first outgoing edge (nominal before recovery, declaration
// order). Throws DeadEnd on a non-terminal node without outgoing edges.
const Edge& select_edge(const AugmentedGraph& graph, const NodeId& node,
                        const std::optional<EdgeId>& pending_recovery);

// Runs one episode. `meta` is merged into the trace header (seed, task,
// trial index) so traces are self-describing and reproducible.
std::pair<EpisodeResult, Trace> run_episode(const EpisodeSetup& setup, WorldState world,
                                            Strategy strategy, const ExecutorConfig& cfg,
                                            std::mt19937_64& rng,
                                            const nlohmann::json& meta = {});

}  // namespace chord
