#include "chord/executor.hpp"

#include <algorithm>
#include <sstream>

namespace chord {

Strategy strategy_from_string(const std::string& s) {
    if (s == "agentchord") return Strategy::AgentChord;
    if (s == "backtrack") return Strategy::Backtrack;
    if (s == "none" || s == "norecovery") return Strategy::NoRecovery;
    throw SchemaViolation("unknown strategy: " + s);
}

std::string strategy_to_string(Strategy s) {
    switch (s) {
        case Strategy::AgentChord: return "agentchord";
        case Strategy::Backtrack: return "backtrack";
        case Strategy::NoRecovery: return "none";
    }
    return "";
}

ExecutorConfig executor_config_from_json(const nlohmann::json& j) {
    ExecutorConfig c;
    c.step_budget = j.value("step_budget", c.step_budget);
    c.recovery_cap = j.value("recovery_cap", c.recovery_cap);
    c.consecutive_cap = j.value("consecutive_cap", c.consecutive_cap);
    c.planner_latency_s = j.value("planner_latency_s", c.planner_latency_s);
    c.dt = j.value("dt", c.dt);
    if (j.contains("noise")) {
        c.noise.sigma = j.at("noise").value("sigma", 0.0);
        c.noise.dropout = j.at("noise").value("dropout", 0.0);
        if (c.noise.sigma < 0.0 || c.noise.dropout < 0.0 || c.noise.dropout > 1.0)
            throw SchemaViolation("invalid noise config");
    }
    if (j.contains("solver")) c.solver = solver_config_from_json(j.at("solver"));
    if (j.contains("monitor")) {
        const auto& m = j.at("monitor");
        c.monitors.epsilon = m.value("epsilon", c.monitors.epsilon);
        c.monitors.k = m.value("k", c.monitors.k);
        c.monitors.delta_shift = m.value("delta_shift", c.monitors.delta_shift);
        c.monitors.theta_max = m.value("theta_max", c.monitors.theta_max);
        c.monitors.delta_attach = m.value("delta_attach", c.monitors.delta_attach);
        c.monitors.n_min = m.value("n_min", c.monitors.n_min);
        c.monitors.delta_rel = m.value("delta_rel", c.monitors.delta_rel);
        c.monitors.subgoal_tol = m.value("subgoal_tol", c.monitors.subgoal_tol);
    }
    return c;
}

nlohmann::json executor_config_to_json(const ExecutorConfig& c) {
    return nlohmann::json{
        {"step_budget", c.step_budget},
        {"recovery_cap", c.recovery_cap},
        {"consecutive_cap", c.consecutive_cap},
        {"planner_latency_s", c.planner_latency_s},
        {"dt", c.dt},
        {"noise", {{"sigma", c.noise.sigma}, {"dropout", c.noise.dropout}}},
        {"solver", solver_config_to_json(c.solver)},
        {"monitor",
         {{"epsilon", c.monitors.epsilon},
          {"k", c.monitors.k},
          {"delta_shift", c.monitors.delta_shift},
          {"theta_max", c.monitors.theta_max},
          {"delta_attach", c.monitors.delta_attach},
          {"n_min", c.monitors.n_min},
          {"delta_rel", c.monitors.delta_rel},
          {"subgoal_tol", c.monitors.subgoal_tol}}},
    };
}

std::string Trace::to_ndjson() const {
    std::ostringstream os;
    nlohmann::json h = header;
    h["type"] = "header";
    os << h.dump() << "\n";
    for (const auto& e : events) {
        nlohmann::json j = e.payload;
        j["step"] = e.step;
        j["kind"] = e.kind;
        os << j.dump() << "\n";
    }
    return os.str();
}

std::vector<const TraceEvent*> Trace::of_kind(const std::string& kind) const {
    std::vector<const TraceEvent*> out;
    for (const auto& e : events)
        if (e.kind == kind) out.push_back(&e);
    return out;
}

nlohmann::json EpisodeResult::to_json() const {
    return nlohmann::json{
        {"success", success},
        {"episode_steps", episode_steps},
        {"simulated_time", simulated_time},
        {"triggers", triggers},
        {"recovery_switches", recovery_switches},
        {"planner_calls", planner_calls},
        {"eligible_drop_actions", eligible_drop_actions},
        {"reason", reason},
    };
}

const Edge& select_edge(const AugmentedGraph& graph, const NodeId& node,
                        const std::optional<EdgeId>& pending_recovery) {
    if (pending_recovery) {
        const Edge* e = graph.find_edge(*pending_recovery);
        if (!e) throw DanglingReference("pending recovery edge missing: " + *pending_recovery);
        return *e;
    }
    auto out = outgoing(graph, node);
    if (out.empty()) throw DeadEnd("non-terminal node without outgoing edges: " + node);
    return *out.front();
}

namespace {

struct BudgetExceeded {};

enum class EdgeOutcome { Reached, Triggered, Exhausted, Infeasible };

class Engine {
  public:
    Engine(const EpisodeSetup& setup, WorldState world, Strategy strategy,
           const ExecutorConfig& cfg, std::mt19937_64& rng)
        : setup_(setup), graph_(*setup.graph), world_(std::move(world)), strategy_(strategy),
          cfg_(cfg), rng_(rng) {
        dist_.model = setup.disturbance;
    }

    std::pair<EpisodeResult, Trace> run(const nlohmann::json& meta) {
        build_header(meta);
        charge_planner_calls();
        try {
            main_loop();
        } catch (const BudgetExceeded&) {
            fail("step-budget-exceeded");
        } catch (const DeadEnd& e) {
            fail(std::string("dead-end: ") + e.what());
        }
        finish();
        return {result_, std::move(trace_)};
    }

  private:
    const EpisodeSetup& setup_;
    const AugmentedGraph& graph_;
    WorldState world_;
    Strategy strategy_;
    ExecutorConfig cfg_;
    std::mt19937_64& rng_;

    Trace trace_;
    EpisodeResult result_;
    DisturbanceState dist_;
    std::map<EdgeId, int> consecutive_;
    // Completion history with the attained end-effector poses per node.
    std::vector<std::pair<NodeId, std::map<std::string, Pose>>> attained_;
    std::map<NodeId, std::map<std::string, Vec3>> keyframe_cache_;
    std::size_t logged_world_events_ = 0;
    bool failed_ = false;
    std::string triggered_failure_;
    std::optional<EdgeId> switch_from_;  // pending backtrack switch trace

    void build_header(const nlohmann::json& meta) {
        nlohmann::json h = executor_config_to_json(cfg_);
        h["strategy"] = strategy_to_string(strategy_);
        h["disturbance"] = disturbance_to_json(dist_.model);
        for (const auto& [k, v] : meta.items()) h[k] = v;
        trace_.header = std::move(h);
    }

    void charge_planner_calls() {
        std::vector<std::string> agents{"task_structuring"};
        if (strategy_ == Strategy::AgentChord) agents.push_back("recovery_orchestration");
        agents.push_back("execution_compilation");
        for (const auto& a : agents) {
            trace_.events.push_back({world_.step, "planner_call", {{"agent", a}}});
            ++result_.planner_calls;
        }
    }

    void fail(std::string reason) {
        failed_ = true;
        result_.reason = std::move(reason);
    }

    void finish() {
        result_.episode_steps = world_.step;
        result_.eligible_drop_actions = dist_.eligible_draws;
        result_.simulated_time =
            world_.step * cfg_.dt + result_.planner_calls * cfg_.planner_latency_s;
        if (!failed_) {
            const Node* terminal = graph_.find_node(graph_.terminal);
            result_.success = check_success(world_, *terminal, cfg_.monitors.subgoal_tol);
            if (!result_.success) result_.reason = "terminal-constraints-unmet";
        }
        trace_.events.push_back(
            {world_.step, "terminal",
             {{"success", result_.success}, {"reason", result_.reason}}});
    }

    std::map<std::string, Pose> current_poses() const {
        std::map<std::string, Pose> p;
        for (const auto& [arm, g] : world_.grippers) p[arm] = g.pose;
        return p;
    }

    PerceptionOutput sense() { return perceive(world_, cfg_.noise, rng_); }

    void drain_world_events() {
        for (; logged_world_events_ < world_.events.size(); ++logged_world_events_) {
            const auto& e = world_.events[logged_world_events_];
            if (e.kind == "drop" || e.kind == "shift" || e.kind == "tilt" ||
                e.kind == "drop_ignored")
                trace_.events.push_back(
                    {e.step, "disturbance",
                     {{"what", e.kind}, {"object", e.object}, {"detail", e.detail}}});
        }
    }

    void check_budget() {
        if (world_.step >= cfg_.step_budget) throw BudgetExceeded{};
    }

    void main_loop() {
        NodeId v = graph_.start;
        attained_.push_back({v, current_poses()});
        std::optional<EdgeId> pending;

        while (v != graph_.terminal) {
            const Edge& active = select_edge(graph_, v, pending);
            pending.reset();
            if (switch_from_) {
                trace_.events.push_back({world_.step, "edge_switch",
                                         {{"from", *switch_from_},
                                          {"to", active.id},
                                          {"recovery", active.recovery}}});
                switch_from_.reset();
            }

            EdgeOutcome outcome = execute_edge(active);
            switch (outcome) {
                case EdgeOutcome::Reached: {
                    v = active.to;
                    consecutive_.clear();
                    trace_.events.push_back({world_.step, "node_complete", {{"node", v}}});
                    attained_.push_back({v, current_poses()});
                    break;
                }
                case EdgeOutcome::Triggered: {
                    ++result_.triggers;
                    int& consec = consecutive_[active.id];
                    ++consec;
                    if (result_.triggers > cfg_.recovery_cap || consec > cfg_.consecutive_cap) {
                        trace_.events.push_back({world_.step, "edge_switch",
                                                 {{"from", active.id},
                                                  {"to", nullptr},
                                                  {"cap_abort", true}}});
                        fail("recovery-loop-cap");
                        return;
                    }
                    if (strategy_ == Strategy::AgentChord) {
                        EdgeId rho = recovery_target(active, triggered_failure_);
                        ++result_.recovery_switches;
                        trace_.events.push_back({world_.step, "edge_switch",
                                                 {{"from", active.id},
                                                  {"to", rho},
                                                  {"recovery", true}}});
                        pending = rho;
                    } else {
                        backtrack(v, active, consec);
                    }
                    break;
                }
                case EdgeOutcome::Exhausted:
                    fail("subgoal-unreachable on edge " + active.id);
                    return;
                case EdgeOutcome::Infeasible: {
                    if (strategy_ == Strategy::Backtrack) {
                        // An unreachable target during re-execution counts as a
                        // failed attempt; regress further instead of aborting.
                        ++result_.triggers;
                        int& consec = consecutive_[active.id];
                        ++consec;
                        if (result_.triggers > cfg_.recovery_cap ||
                            consec > cfg_.consecutive_cap) {
                            fail("recovery-loop-cap");
                            return;
                        }
                        backtrack(v, active, consec);
                        break;
                    }
                    fail("solver-infeasible on edge " + active.id);
                    return;
                }
            }
        }
    }

    // Backtrack strategy: return the arms to the attained keyframe of the
    // edge's source; repeated triggers on the same edge regress one node
    // further each time.
    void backtrack(NodeId& v, const Edge& edge, int consec) {
        int back = consec - 1;  // 0 = source of the active edge
        int idx = static_cast<int>(attained_.size()) - 1 - back;
        idx = std::max(idx, 0);
        const auto& [node, poses] = attained_[idx];
        walk_back(poses);
        attained_.resize(idx + 1);
        v = node;
        switch_from_ = edge.id;
    }

    void walk_back(const std::map<std::string, Pose>& targets) {
        const double tl = cfg_.solver.translation_step;
        const double rl = cfg_.solver.rotation_step;
        bool moving = true;
        while (moving) {
            moving = false;
            for (const auto& [arm, target] : targets) {
                const Pose cur = world_.gripper(arm).pose;
                double derr = (target.position - cur.position).norm();
                double aerr = cur.orientation.angle_to(target.orientation);
                if (derr <= 1e-9 && aerr <= 1e-6) continue;
                moving = true;
                check_budget();
                apply_scheduled(world_, dist_);
                Pose next = cur;
                if (derr > 1e-9) {
                    Vec3 d = target.position - cur.position;
                    next.position =
                        derr > tl ? cur.position + d * (tl / derr) : target.position;
                }
                if (aerr > 1e-6)
                    next.orientation = aerr > rl
                                           ? slerp(cur.orientation, target.orientation, rl / aerr)
                                           : target.orientation;
                step_pose(world_, arm, next);
                trace_.events.push_back(
                    {world_.step, "command", {{"arm", arm}, {"what", "backtrack"}}});
                drain_world_events();
            }
        }
    }

    // Compiles a solve-driven transition into per-arm straight moves toward
    // the keyframe returned by the sub-goal solver.
    std::vector<AtomicAction> compile_solve_actions(const Edge& edge, const Node& target) {
        SubgoalProblem sp;
        sp.config = cfg_.solver;
        sp.field = setup_.field;
        sp.workspace = setup_.workspace;
        sp.constraints = target.sub_goals;
        sp.ctx.snapshot = sense();
        sp.ctx.robot = world_.robot_state();
        for (const auto& [arm, g] : world_.grippers)
            if (g.held) sp.ctx.held[arm] = *g.held;
        if (target.gripper_intent.empty())
            throw SchemaViolation("solve edge \"" + edge.id +
                                  "\" needs gripper intents on its target node");
        for (const auto& [arm, intent] : target.gripper_intent) {
            ArmGoal goal;
            goal.arm = arm;
            goal.current = world_.gripper(arm).pose;
            goal.target_orientation = goal.current.orientation;
            auto prev = keyframe_cache_.find(target.id);
            if (prev != keyframe_cache_.end()) {
                auto it = prev->second.find(arm);
                if (it != prev->second.end()) goal.previous = it->second;
            }
            sp.arms.push_back(std::move(goal));
            sp.gripper_width[arm] = intent.width;
        }
        auto poses = solve_subgoal(sp, rng_);

        std::vector<AtomicAction> actions;
        AtomicAction drive;
        drive.kind = ActionKind::Drive;
        for (const auto& [arm, pose] : poses) {
            keyframe_cache_[target.id][arm] = pose.position;
            AtomicAction mv;
            mv.kind = ActionKind::MoveToTarget;
            mv.robot = arm;
            mv.target = pose.position;
            if (poses.size() == 1) {
                actions.push_back(mv);
            } else if (arm == "left") {
                drive.left = std::make_shared<AtomicAction>(mv);
            } else {
                drive.right = std::make_shared<AtomicAction>(mv);
            }
        }
        if (poses.size() > 1) actions.push_back(drive);
        return actions;
    }

    EdgeOutcome execute_edge(const Edge& edge) {
        const Node& target = *graph_.find_node(edge.to);
        const bool monitored = strategy_ != Strategy::NoRecovery;

        std::set<std::string> keys;
        int max_k = 1;
        if (monitored) {
            for (const auto& c : target.sub_goals)
                for (const auto& k : c.required_keys()) keys.insert(k);
            for (const auto& fm : edge.failure_modes) {
                for (const auto& k : fm.detector.required_keys()) keys.insert(k);
                max_k = std::max(max_k, fm.persistence_k);
            }
        }

        auto sense_extract = [&]() {
            PerceptionOutput x = sense();
            return extract_features(x, world_.robot_state(), keys);
        };

        std::vector<MonitorState> monitors;
        if (monitored) {
            FeatureVector entry = sense_extract();
            monitors = compile_edge_monitors(edge, entry);
            if (satisfied(target, entry)) return EdgeOutcome::Reached;
        }

        std::vector<AtomicAction> actions;
        try {
            actions = edge.transition.kind == Transition::Kind::Solve
                          ? compile_solve_actions(edge, target)
                          : edge.transition.actions;
        } catch (const Infeasible&) {
            return EdgeOutcome::Infeasible;
        }

        MotionContext mctx;
        mctx.workspace = setup_.workspace;
        mctx.field = setup_.field;
        mctx.solver = cfg_.solver;
        mctx.path_constraints = edge.path_constraints;
        mctx.sense = [this]() { return sense(); };

        std::size_t next_action = 0;
        std::optional<ActionCursor> cursor;
        int grace_left = monitored ? max_k + 2 : 0;

        while (true) {
            check_budget();
            if (!cursor || cursor->done()) {
                cursor.reset();
                while (next_action < actions.size()) {
                    try {
                        cursor.emplace(world_, actions[next_action], mctx, dist_, rng_);
                    } catch (const UnknownObject&) {
                        return EdgeOutcome::Infeasible;
                    }
                    ++next_action;
                    if (!cursor->done()) break;
                    cursor.reset();
                }
            }
            if (!cursor) {
                if (!monitored) return EdgeOutcome::Reached;  // open loop advances
                if (grace_left-- <= 0) return EdgeOutcome::Exhausted;
                apply_scheduled(world_, dist_);
                step_noop(world_);
                trace_.events.push_back({world_.step, "command", {{"what", "hold"}}});
            } else {
                const std::string what = action_name(actions[next_action - 1].kind);
                try {
                    cursor->step();
                } catch (const UnreachableTarget&) {
                    return EdgeOutcome::Infeasible;
                } catch (const UnknownObject&) {
                    return EdgeOutcome::Infeasible;
                }
                trace_.events.push_back({world_.step, "command", {{"what", what}}});
            }
            drain_world_events();

            if (!monitored) continue;

            FeatureVector z = sense_extract();
            bool fired = false;
            for (auto& m : monitors) {
                double value;
                try {
                    value = eval_detector(m.detector, z);
                } catch (const MissingFeature&) {
                    value = -std::numeric_limits<double>::infinity();
                }
                bool violated = value > m.epsilon;
                if (violated)
                    trace_.events.push_back({world_.step, "monitor_eval",
                                             {{"failure_id", m.failure_id},
                                              {"value", value},
                                              {"violated", true}}});
                if (update_monitor(m, value)) {
                    trace_.events.push_back(
                        {world_.step, "trigger", {{"failure_id", m.failure_id}}});
                    triggered_failure_ = m.failure_id;
                    fired = true;
                    break;
                }
            }
            if (fired) return EdgeOutcome::Triggered;
            if (satisfied(target, z)) return EdgeOutcome::Reached;
        }
    }

    bool satisfied(const Node& target, const FeatureVector& z) {
        try {
            return subgoal_satisfied(target, z, cfg_.monitors.subgoal_tol);
        } catch (const MissingFeature&) {
            return false;
        }
    }
};

}  // namespace

std::pair<EpisodeResult, Trace> run_episode(const EpisodeSetup& setup, WorldState world,
                                            Strategy strategy, const ExecutorConfig& cfg,
                                            std::mt19937_64& rng, const nlohmann::json& meta) {
    if (!setup.graph || !setup.workspace)
        throw Error("run_episode: setup requires graph and workspace");
    Engine engine(setup, std::move(world), strategy, cfg, rng);
    return engine.run(meta);
}

}  // namespace chord
