#pragma once
// Task-graph data model: nodes with sub-goal constraints, edges with path
// constraints and anticipated failure modes, recovery augmentation, graph
// distances, and the forward-moving filter.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chord/actions.hpp"
#include "chord/monitors.hpp"

namespace chord {

using NodeId = std::string;
using EdgeId = std::string;

enum class NodeKind { Nominal, Recovery, Terminal };

struct GripperIntent {
    bool closed = false;
    double width = 0.08;  // target opening, meters
};

struct Node {
    NodeId id;
    NodeKind kind = NodeKind::Nominal;
    std::vector<Detector> sub_goals;
    std::map<std::string, GripperIntent> gripper_intent;  // arm -> intent
};

struct FailureMode {
    std::string id;
    Detector detector;       // interpreted as f(z): > epsilon means violation
    double margin_epsilon = 0.0;
    int persistence_k = 3;
    EdgeId recovery_edge;    // rho target; equals the owning edge for retry loops
};

struct Transition {
    enum class Kind { Program, Solve };
    Kind kind = Kind::Program;
    std::vector<AtomicAction> actions;  // Program
};

struct Edge {
    EdgeId id;
    NodeId from;
    NodeId to;
    bool recovery = false;
    Transition transition;
    std::vector<Detector> path_constraints;
    std::vector<FailureMode> failure_modes;
    double weight = 1.0;  // expected execution steps
};

struct TaskGraph {
    std::vector<Node> nodes;   // declaration order
    std::vector<Edge> edges;   // declaration order
    NodeId start;
    NodeId terminal;

    const Node* find_node(const NodeId& id) const;
    const Edge* find_edge(const EdgeId& id) const;
    Node* find_node(const NodeId& id);
    Edge* find_edge(const EdgeId& id);
};

struct AugmentedGraph : TaskGraph {
    // Per recovery node, the downstream merge candidates.
    std::map<NodeId, std::vector<NodeId>> merge_candidates;
};

// One rejected recovery branch: the forward-moving rule failed.
struct RejectedBranch {
    std::string failure_id;
    EdgeId edge;            // nominal edge carrying the failure mode
    NodeId failure_context; // v_fail
    NodeId recovery_node;   // recovery node or direct merge target
    std::optional<double> dist_recovery;  // nullopt = terminal unreachable
    std::optional<double> dist_failure;
};

struct RejectionReport {
    std::vector<RejectedBranch> rejected;
    nlohmann::json to_json() const;
};

struct FilterResult {
    AugmentedGraph graph;
    RejectionReport report;
};

// Builds and validates a task graph from its document form
// ({nodes, edges, start, terminal}). Throws DanglingReference, NoTerminal,
// TerminalUnreachable or SchemaViolation.
TaskGraph build_graph(const nlohmann::json& doc, const MonitorDefaults& defaults = {});

// Adds recovery nodes/edges per the recovery document. Recovery intents
// that match an existing sub-goal merge directly into the nominal node
// without creating a new node. Idempotent for identical documents.
AugmentedGraph augment(const TaskGraph& graph, const nlohmann::json& recovery_doc,
                       const MonitorDefaults& defaults = {});

// Shortest-path cost over directed edges; nullopt when unreachable.
std::optional<double> dist(const TaskGraph& graph, const NodeId& u, const NodeId& v);

// Minimal-cost path, ties broken by lexicographic node id.
std::optional<std::vector<NodeId>> shortest_path(const TaskGraph& graph, const NodeId& u,
                                                 const NodeId& v);

// Removes every recovery branch whose cost-to-go exceeds that of its
// failure context, iterating until the property holds on the result.
FilterResult filter_forward_moving(const AugmentedGraph& graph);

// rho: pre-compiled recovery edge for a failure mode on this edge.
EdgeId recovery_target(const Edge& edge, const std::string& failure_id);

// Outgoing edges in deterministic order: nominal before recovery, each in
// declaration order.
std::vector<const Edge*> outgoing(const TaskGraph& graph, const NodeId& node);

// Document serialization. Nominal graphs round-trip through build_graph.
nlohmann::json graph_to_json(const TaskGraph& graph);
nlohmann::json graph_to_json(const AugmentedGraph& graph);

// Default edge weight: coarse planned step count of the transition.
double estimate_steps(const Transition& t);

}  // namespace chord
