#include "chord/graph.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>

namespace chord {

namespace {

template <typename T, typename Pred>
auto* find_by(T& vec, Pred pred) {
    for (auto& item : vec)
        if (pred(item)) return &item;
    return static_cast<decltype(&vec.front())>(nullptr);
}

}  // namespace

const Node* TaskGraph::find_node(const NodeId& id) const {
    return find_by(nodes, [&](const Node& n) { return n.id == id; });
}
const Edge* TaskGraph::find_edge(const EdgeId& id) const {
    return find_by(edges, [&](const Edge& e) { return e.id == id; });
}
Node* TaskGraph::find_node(const NodeId& id) {
    return find_by(nodes, [&](Node& n) { return n.id == id; });
}
Edge* TaskGraph::find_edge(const EdgeId& id) {
    return find_by(edges, [&](Edge& e) { return e.id == id; });
}

double estimate_steps(const Transition& t) {
    if (t.kind == Transition::Kind::Solve) return 30.0;
    double steps = 0.0;
    for (const auto& a : t.actions) {
        std::function<double(const AtomicAction&)> est = [&](const AtomicAction& x) -> double {
            switch (x.kind) {
                case ActionKind::Drive:
                    return (x.left ? est(*x.left) : 0.0) + (x.right ? est(*x.right) : 0.0);
                case ActionKind::Grasp: return 45.0;
                case ActionKind::OpenGripper:
                case ActionKind::CloseGripper: return static_cast<double>(x.sample_num);
                case ActionKind::MoveToObj:
                case ActionKind::MoveToTarget: return 25.0;
                case ActionKind::MoveByOffset: return 15.0;
                case ActionKind::RotateEef: return 20.0;
                case ActionKind::Place: return 30.0;
                case ActionKind::Back: return 20.0;
            }
            return 10.0;
        };
        steps += est(a);
    }
    return std::max(steps, 1.0);
}

namespace {

std::vector<Detector> parse_constraints(const nlohmann::json& j, const MonitorDefaults& defaults,
                                        bool allow_snapshot) {
    std::vector<Detector> out;
    for (const auto& c : j) {
        Detector d = parse_detector(c, defaults).detector;
        if (!allow_snapshot && d.needs_snapshot())
            throw SchemaViolation(
                "shift constraint outside an edge needs an explicit reference position");
        out.push_back(std::move(d));
    }
    return out;
}

std::map<std::string, GripperIntent> parse_gripper(const nlohmann::json& j) {
    std::map<std::string, GripperIntent> out;
    for (const auto& [arm, spec] : j.items()) {
        if (arm != "left" && arm != "right")
            throw SchemaViolation("unknown arm in gripper intent: " + arm);
        GripperIntent gi;
        gi.closed = spec.value("closed", false);
        gi.width = spec.value("width", 0.08);
        if (gi.width < 0.0 || gi.width > 0.10)
            throw SchemaViolation("gripper width outside [0, 0.10]");
        out[arm] = gi;
    }
    return out;
}

Transition parse_transition(const nlohmann::json& j) {
    Transition t;
    std::string kind = j.value("kind", "program");
    if (kind == "program") {
        t.kind = Transition::Kind::Program;
        if (j.contains("actions"))
            for (const auto& a : j.at("actions")) t.actions.push_back(parse_action(a));
    } else if (kind == "solve") {
        t.kind = Transition::Kind::Solve;
    } else {
        throw SchemaViolation("unknown transition kind: " + kind);
    }
    return t;
}

nlohmann::json transition_to_json(const Transition& t) {
    nlohmann::json j;
    if (t.kind == Transition::Kind::Solve) {
        j["kind"] = "solve";
        return j;
    }
    j["kind"] = "program";
    auto arr = nlohmann::json::array();
    for (const auto& a : t.actions) arr.push_back(action_to_json(a));
    j["actions"] = arr;
    return j;
}

void check_reachability(const TaskGraph& g) {
    std::set<NodeId> seen{g.start};
    std::queue<NodeId> frontier;
    frontier.push(g.start);
    while (!frontier.empty()) {
        NodeId cur = frontier.front();
        frontier.pop();
        if (cur == g.terminal) return;
        for (const auto& e : g.edges)
            if (e.from == cur && !e.recovery && seen.insert(e.to).second) frontier.push(e.to);
    }
    throw TerminalUnreachable("terminal \"" + g.terminal + "\" not reachable from start \"" +
                              g.start + "\" via nominal edges");
}

}  // namespace

TaskGraph build_graph(const nlohmann::json& doc, const MonitorDefaults& defaults) {
    TaskGraph g;
    if (!doc.contains("terminal") || !doc.at("terminal").is_string() ||
        doc.at("terminal").get<std::string>().empty())
        throw NoTerminal("graph document has no terminal node");
    g.terminal = doc.at("terminal").get<std::string>();
    if (!doc.contains("start")) throw SchemaViolation("graph document has no start node");
    g.start = doc.at("start").get<std::string>();

    std::set<NodeId> node_ids;
    for (const auto& nj : doc.value("nodes", nlohmann::json::array())) {
        Node n;
        n.id = nj.at("id").get<std::string>();
        if (!node_ids.insert(n.id).second)
            throw SchemaViolation("duplicate node id: " + n.id);
        if (nj.contains("sub_goals"))
            n.sub_goals = parse_constraints(nj.at("sub_goals"), defaults, false);
        if (nj.contains("gripper")) n.gripper_intent = parse_gripper(nj.at("gripper"));
        n.kind = n.id == g.terminal ? NodeKind::Terminal : NodeKind::Nominal;
        g.nodes.push_back(std::move(n));
    }

    if (!g.find_node(g.terminal))
        throw NoTerminal("terminal node \"" + g.terminal + "\" not declared");
    if (!g.find_node(g.start))
        throw DanglingReference("start node \"" + g.start + "\" not declared");

    std::set<EdgeId> edge_ids;
    for (const auto& ej : doc.value("edges", nlohmann::json::array())) {
        Edge e;
        e.id = ej.at("id").get<std::string>();
        if (!edge_ids.insert(e.id).second)
            throw SchemaViolation("duplicate edge id: " + e.id);
        e.from = ej.at("from").get<std::string>();
        e.to = ej.at("to").get<std::string>();
        for (const auto& end : {e.from, e.to})
            if (!g.find_node(end))
                throw DanglingReference("edge \"" + e.id + "\" references missing node \"" +
                                        end + "\"");
        if (e.from == e.to)
            throw SchemaViolation("nominal self-loop rejected on edge \"" + e.id + "\"");
        e.transition = parse_transition(ej.value("transition", nlohmann::json::object()));
        if (ej.contains("path_constraints"))
            e.path_constraints = parse_constraints(ej.at("path_constraints"), defaults, true);
        e.weight = ej.contains("weight") ? ej.at("weight").get<double>()
                                         : estimate_steps(e.transition);
        if (e.weight < 0.0) throw SchemaViolation("negative weight on edge \"" + e.id + "\"");
        g.edges.push_back(std::move(e));
    }

    check_reachability(g);
    return g;
}

namespace {

FailureMode parse_failure_mode(const std::string& id, const nlohmann::json& detector_json,
                               const MonitorDefaults& defaults, const EdgeId& recovery_edge) {
    ParsedDetector pd = parse_detector(detector_json, defaults);
    FailureMode fm;
    fm.id = id;
    fm.detector = std::move(pd.detector);
    fm.margin_epsilon = pd.epsilon.value_or(defaults.epsilon);
    fm.persistence_k = pd.k.value_or(defaults.k);
    fm.recovery_edge = recovery_edge;
    return fm;
}

// Self-retry failure modes declared on a recovery edge.
void attach_retries(Edge& edge, const nlohmann::json& retry_on, const MonitorDefaults& defaults) {
    int i = 0;
    for (const auto& dj : retry_on) {
        std::string id = edge.id + ":retry" + (i ? std::to_string(i) : "");
        edge.failure_modes.push_back(parse_failure_mode(id, dj, defaults, edge.id));
        ++i;
    }
}

}  // namespace

AugmentedGraph augment(const TaskGraph& graph, const nlohmann::json& recovery_doc,
                       const MonitorDefaults& defaults) {
    AugmentedGraph g;
    static_cast<TaskGraph&>(g) = graph;

    for (const auto& rj : recovery_doc) {
        EdgeId nominal_id = rj.at("edge").get<std::string>();
        Edge* nominal = g.find_edge(nominal_id);
        if (!nominal || nominal->recovery)
            throw UnknownNominalEdge("recovery entry references unknown nominal edge \"" +
                                     nominal_id + "\"");
        std::string failure_id = rj.at("id").get<std::string>();
        const NodeId fail_ctx = nominal->from;
        const auto& branch = rj.at("branch");

        EdgeId in_edge_id = "rec:" + failure_id;

        if (branch.contains("node") && !branch.at("node").is_null()) {
            const auto& nj = branch.at("node");
            NodeId rec_id = nj.at("id").get<std::string>();
            if (!g.find_node(rec_id)) {
                Node rec;
                rec.id = rec_id;
                rec.kind = NodeKind::Recovery;
                if (nj.contains("sub_goals"))
                    rec.sub_goals = parse_constraints(nj.at("sub_goals"), defaults, false);
                if (nj.contains("gripper")) rec.gripper_intent = parse_gripper(nj.at("gripper"));
                g.nodes.push_back(std::move(rec));
            }
            if (!g.find_edge(in_edge_id)) {
                Edge in;
                in.id = in_edge_id;
                in.from = fail_ctx;
                in.to = rec_id;
                in.recovery = true;
                const auto& tn = branch.at("to_node");
                in.transition = parse_transition(tn.value("transition", nlohmann::json::object()));
                in.weight = tn.contains("weight") ? tn.at("weight").get<double>()
                                                  : estimate_steps(in.transition);
                if (tn.contains("retry_on")) attach_retries(in, tn.at("retry_on"), defaults);
                g.edges.push_back(std::move(in));
            }
            auto& candidates = g.merge_candidates[rec_id];
            for (const auto& mj : branch.at("merges")) {
                NodeId merge_to = mj.at("to").get<std::string>();
                if (!g.find_node(merge_to))
                    throw MergeTargetMissing("merge target \"" + merge_to +
                                             "\" missing for failure \"" + failure_id + "\"");
                EdgeId out_id = "rec:" + failure_id + ":to:" + merge_to;
                if (!g.find_edge(out_id)) {
                    Edge out;
                    out.id = out_id;
                    out.from = rec_id;
                    out.to = merge_to;
                    out.recovery = true;
                    out.transition =
                        parse_transition(mj.value("transition", nlohmann::json::object()));
                    out.weight = mj.contains("weight") ? mj.at("weight").get<double>()
                                                       : estimate_steps(out.transition);
                    if (mj.contains("retry_on")) attach_retries(out, mj.at("retry_on"), defaults);
                    g.edges.push_back(std::move(out));
                }
                if (std::find(candidates.begin(), candidates.end(), merge_to) == candidates.end())
                    candidates.push_back(merge_to);
            }
        } else {
            // Recovery intent matches an existing sub-goal: route directly to
            // the nominal node, no new node.
            const auto& merges = branch.at("merges");
            if (merges.size() != 1)
                throw SchemaViolation("direct-merge recovery for \"" + failure_id +
                                      "\" needs exactly one merge entry");
            const auto& mj = merges.at(0);
            NodeId merge_to = mj.at("to").get<std::string>();
            if (!g.find_node(merge_to))
                throw MergeTargetMissing("merge target \"" + merge_to +
                                         "\" missing for failure \"" + failure_id + "\"");
            if (!g.find_edge(in_edge_id)) {
                Edge in;
                in.id = in_edge_id;
                in.from = fail_ctx;
                in.to = merge_to;
                in.recovery = true;
                in.transition = parse_transition(mj.value("transition", nlohmann::json::object()));
                in.weight = mj.contains("weight") ? mj.at("weight").get<double>()
                                                  : estimate_steps(in.transition);
                if (mj.contains("retry_on")) attach_retries(in, mj.at("retry_on"), defaults);
                g.edges.push_back(std::move(in));
            }
        }

        // rho for the nominal edge's failure mode (idempotent by id).
        Edge* nom = g.find_edge(nominal_id);
        bool present = false;
        for (const auto& fm : nom->failure_modes) present |= fm.id == failure_id;
        if (!present)
            nom->failure_modes.push_back(
                parse_failure_mode(failure_id, rj.at("detector"), defaults, in_edge_id));
    }
    return g;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dijkstra from u; lexicographic node-id tie-break on predecessors keeps
// reported paths deterministic.
std::map<NodeId, std::pair<double, NodeId>> dijkstra(const TaskGraph& g, const NodeId& u) {
    std::map<NodeId, std::pair<double, NodeId>> best;  // node -> (cost, predecessor)
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    best[u] = {0.0, ""};
    pq.push({0.0, u});
    while (!pq.empty()) {
        auto [cost, cur] = pq.top();
        pq.pop();
        auto it = best.find(cur);
        if (it != best.end() && cost > it->second.first) continue;
        for (const auto& e : g.edges) {
            if (e.from != cur) continue;
            double next = cost + e.weight;
            auto bi = best.find(e.to);
            if (bi == best.end() || next < bi->second.first ||
                (next == bi->second.first && cur < bi->second.second)) {
                best[e.to] = {next, cur};
                pq.push({next, e.to});
            }
        }
    }
    return best;
}

}  // namespace

std::optional<double> dist(const TaskGraph& graph, const NodeId& u, const NodeId& v) {
    if (!graph.find_node(u) || !graph.find_node(v))
        throw DanglingReference("dist endpoint not in graph");
    auto best = dijkstra(graph, u);
    auto it = best.find(v);
    if (it == best.end()) return std::nullopt;
    return it->second.first;
}

std::optional<std::vector<NodeId>> shortest_path(const TaskGraph& graph, const NodeId& u,
                                                 const NodeId& v) {
    if (!graph.find_node(u) || !graph.find_node(v))
        throw DanglingReference("shortest_path endpoint not in graph");
    auto best = dijkstra(graph, u);
    if (!best.count(v)) return std::nullopt;
    std::vector<NodeId> path{v};
    NodeId cur = v;
    while (cur != u) {
        cur = best.at(cur).second;
        path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

FilterResult filter_forward_moving(const AugmentedGraph& graph) {
    FilterResult result;
    result.graph = graph;
    AugmentedGraph& g = result.graph;

    bool changed = true;
    while (changed) {
        changed = false;
        struct Violation {
            EdgeId edge;
            std::string failure_id;
        };
        std::vector<Violation> violations;

        for (const auto& e : g.edges) {
            for (const auto& fm : e.failure_modes) {
                if (fm.recovery_edge == e.id) continue;  // retry loop, trivially forward
                const Edge* re = g.find_edge(fm.recovery_edge);
                if (!re) continue;  // branch already removed this round
                auto d_rec = dist(g, re->to, g.terminal);
                auto d_fail = dist(g, e.from, g.terminal);
                double dr = d_rec ? *d_rec : kInf;
                double df = d_fail ? *d_fail : kInf;
                if (dr <= df) continue;
                violations.push_back({e.id, fm.id});
                result.report.rejected.push_back(
                    {fm.id, e.id, e.from, re->to, d_rec, d_fail});
            }
        }

        for (const auto& v : violations) {
            Edge* e = g.find_edge(v.edge);
            if (!e) continue;  // removed by an earlier violation this round
            auto fm_it = std::find_if(e->failure_modes.begin(), e->failure_modes.end(),
                                      [&](const FailureMode& fm) { return fm.id == v.failure_id; });
            if (fm_it == e->failure_modes.end()) continue;
            EdgeId rec_edge_id = fm_it->recovery_edge;
            const Edge* re = g.find_edge(rec_edge_id);
            if (!re) {
                e->failure_modes.erase(fm_it);
                changed = true;
                continue;
            }
            NodeId target = re->to;
            e->failure_modes.erase(fm_it);

            std::set<EdgeId> dead_edges{rec_edge_id};
            const Node* target_node = g.find_node(target);
            if (target_node && target_node->kind == NodeKind::Recovery) {
                // Drop the recovery node and every recovery edge touching it.
                for (const auto& ge : g.edges)
                    if (ge.recovery && (ge.from == target || ge.to == target))
                        dead_edges.insert(ge.id);
                g.nodes.erase(std::remove_if(g.nodes.begin(), g.nodes.end(),
                                             [&](const Node& n) { return n.id == target; }),
                              g.nodes.end());
                g.merge_candidates.erase(target);
            }
            g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(),
                                         [&](const Edge& ge) { return dead_edges.count(ge.id); }),
                          g.edges.end());
            // Disable any other failure mode that routed through a removed edge.
            for (auto& ge : g.edges)
                ge.failure_modes.erase(
                    std::remove_if(ge.failure_modes.begin(), ge.failure_modes.end(),
                                   [&](const FailureMode& fm) {
                                       return fm.recovery_edge != ge.id &&
                                              dead_edges.count(fm.recovery_edge);
                                   }),
                    ge.failure_modes.end());
            changed = true;
        }
    }
    return result;
}

EdgeId recovery_target(const Edge& edge, const std::string& failure_id) {
    for (const auto& fm : edge.failure_modes)
        if (fm.id == failure_id) return fm.recovery_edge;
    throw UnknownFailureMode("edge \"" + edge.id + "\" has no failure mode \"" + failure_id +
                             "\"");
}

std::vector<const Edge*> outgoing(const TaskGraph& graph, const NodeId& node) {
    if (!graph.find_node(node)) throw DanglingReference("outgoing: unknown node " + node);
    std::vector<const Edge*> out;
    for (const auto& e : graph.edges)
        if (e.from == node && !e.recovery) out.push_back(&e);
    for (const auto& e : graph.edges)
        if (e.from == node && e.recovery) out.push_back(&e);
    return out;
}

nlohmann::json RejectionReport::to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& r : rejected) {
        nlohmann::json j{{"failure_id", r.failure_id},
                         {"edge", r.edge},
                         {"failure_context", r.failure_context},
                         {"recovery_node", r.recovery_node}};
        j["dist_recovery"] = r.dist_recovery ? nlohmann::json(*r.dist_recovery)
                                             : nlohmann::json(nullptr);
        j["dist_failure"] = r.dist_failure ? nlohmann::json(*r.dist_failure)
                                           : nlohmann::json(nullptr);
        arr.push_back(std::move(j));
    }
    return arr;
}

namespace {

nlohmann::json node_to_json(const Node& n) {
    nlohmann::json j{{"id", n.id}};
    if (n.kind == NodeKind::Recovery) j["kind"] = "recovery";
    auto goals = nlohmann::json::array();
    for (const auto& c : n.sub_goals) goals.push_back(detector_to_json(c));
    j["sub_goals"] = goals;
    nlohmann::json grip = nlohmann::json::object();
    for (const auto& [arm, gi] : n.gripper_intent)
        grip[arm] = {{"closed", gi.closed}, {"width", gi.width}};
    j["gripper"] = grip;
    return j;
}

nlohmann::json edge_to_json(const Edge& e) {
    nlohmann::json j{{"id", e.id}, {"from", e.from}, {"to", e.to}, {"weight", e.weight}};
    if (e.recovery) j["recovery"] = true;
    j["transition"] = transition_to_json(e.transition);
    auto pcs = nlohmann::json::array();
    for (const auto& c : e.path_constraints) pcs.push_back(detector_to_json(c));
    j["path_constraints"] = pcs;
    if (!e.failure_modes.empty()) {
        auto fms = nlohmann::json::array();
        for (const auto& fm : e.failure_modes) {
            nlohmann::json fj = detector_to_json(fm.detector);
            fj["epsilon"] = fm.margin_epsilon;
            fj["k"] = fm.persistence_k;
            fms.push_back(nlohmann::json{
                {"id", fm.id}, {"detector", fj}, {"recovery_edge", fm.recovery_edge}});
        }
        j["failure_modes"] = fms;
    }
    return j;
}

}  // namespace

nlohmann::json graph_to_json(const TaskGraph& graph) {
    nlohmann::json j{{"start", graph.start}, {"terminal", graph.terminal}};
    auto nodes = nlohmann::json::array();
    for (const auto& n : graph.nodes) nodes.push_back(node_to_json(n));
    auto edges = nlohmann::json::array();
    for (const auto& e : graph.edges) edges.push_back(edge_to_json(e));
    j["nodes"] = nodes;
    j["edges"] = edges;
    return j;
}

nlohmann::json graph_to_json(const AugmentedGraph& graph) {
    nlohmann::json j = graph_to_json(static_cast<const TaskGraph&>(graph));
    nlohmann::json mc = nlohmann::json::object();
    for (const auto& [rec, merges] : graph.merge_candidates) mc[rec] = merges;
    j["merge_candidates"] = mc;
    return j;
}

}  // namespace chord
