// Command-line front end: task validation, plan inspection, single-episode
// simulation, and full experiments.
//
// Exit codes: 0 success, 1 task failure (simulate), 2 config/schema errors.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "chord/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kTaskFailure = 1;
constexpr int kConfigError = 2;

std::uint64_t resolve_seed(std::uint64_t seed) {
    if (const char* env = std::getenv("CHORDGRAPH_SEED")) return std::strtoull(env, nullptr, 10);
    return seed;
}

chord::TaskSpec load_or_fetch(const std::string& task_file, const std::string& endpoint) {
    using namespace chord;
    if (endpoint.empty()) return load_task(task_file);
    // Pull graph and recovery fragments from the planner service, keeping
    // the local file's scene and configuration.
    std::ifstream in(task_file);
    if (!in) throw IoError("cannot open task file: " + task_file);
    nlohmann::json doc = nlohmann::json::parse(in);
    PlannerRequest req;
    req.instruction = doc.value("instruction", doc.value("name", ""));
    req.scene_summary = doc.value("scene", nlohmann::json::object());
    req.stage = "structure";
    doc = apply_fragment(doc, request_plan(endpoint, req), "structure");
    req.stage = "orchestrate";
    doc = apply_fragment(doc, request_plan(endpoint, req), "orchestrate");
    return task_from_json(doc);
}

int cmd_validate(const std::string& task_file, const std::string& endpoint) {
    chord::TaskSpec task = load_or_fetch(task_file, endpoint);
    std::cout << "task: " << task.name << "\n"
              << "nodes: " << task.augmented.nodes.size() << " (nominal "
              << task.nominal.nodes.size() << ")\n"
              << "edges: " << task.augmented.edges.size() << " (nominal "
              << task.nominal.edges.size() << ")\n"
              << "drop opportunities: " << chord::count_drop_opportunities(task) << "\n"
              << "rejected recovery branches: " << task.rejection.rejected.size() << "\n";
    if (!task.rejection.rejected.empty())
        std::cout << task.rejection.to_json().dump(2) << "\n";
    return kOk;
}

int cmd_plan(const std::string& task_file, const std::string& endpoint) {
    using namespace chord;
    TaskSpec task = load_or_fetch(task_file, endpoint);
    nlohmann::json out;
    out["graph"] = graph_to_json(task.augmented);
    out["rejection_report"] = task.rejection.to_json();

    // Keyframes for nodes whose sub-goals constrain an end-effector pose.
    WorldState world = make_world(task.scene);
    std::mt19937_64 rng(0);
    PerceptionOutput snap = perceive(world, NoiseConfig{}, rng);
    nlohmann::json keyframes = nlohmann::json::object();
    for (const auto& node : task.augmented.nodes) {
        if (node.gripper_intent.empty() || node.sub_goals.empty()) continue;
        SubgoalProblem sp;
        sp.config = task.executor.solver;
        sp.field = &task.field;
        sp.workspace = &task.scene.workspace;
        sp.constraints = node.sub_goals;
        sp.ctx.snapshot = snap;
        sp.ctx.robot = world.robot_state();
        for (const auto& [arm, intent] : node.gripper_intent) {
            ArmGoal goal;
            goal.arm = arm;
            goal.current = world.gripper(arm).pose;
            goal.target_orientation = goal.current.orientation;
            sp.arms.push_back(goal);
            sp.gripper_width[arm] = intent.width;
        }
        try {
            auto poses = solve_subgoal(sp, rng);
            nlohmann::json kf = nlohmann::json::object();
            for (const auto& [arm, pose] : poses) kf[arm] = pose;
            keyframes[node.id] = kf;
        } catch (const Infeasible& e) {
            keyframes[node.id] = {{"infeasible", e.what()}};
        }
    }
    out["keyframes"] = keyframes;
    std::cout << out.dump(2) << "\n";
    return kOk;
}

int cmd_simulate(const std::string& task_file, const std::string& strategy_name, double drop_prob,
                 std::uint64_t seed, const std::string& trace_out, double pose_jitter,
                 const std::string& endpoint) {
    using namespace chord;
    TaskSpec task = load_or_fetch(task_file, endpoint);
    Strategy strategy = strategy_from_string(strategy_name);
    seed = resolve_seed(seed);

    EpisodeResult result;
    if (drop_prob >= 0.0) {
        Trace trace;
        result = run_trial(task, strategy, drop_prob, seed, pose_jitter, &trace);
        if (!trace_out.empty()) {
            std::ofstream out(trace_out);
            out << trace.to_ndjson();
        }
    } else {
        // Use the disturbance model declared in the task file.
        std::mt19937_64 rng(seed);
        WorldState world = make_world(task.scene);
        randomize_poses(world, pose_jitter, rng);
        nlohmann::json meta{{"task", task.name}, {"seed", seed},
                            {"strategy", strategy_name}};
        auto [r, trace] = run_episode(task.setup(), std::move(world), strategy, task.executor,
                                      rng, meta);
        result = r;
        if (!trace_out.empty()) {
            std::ofstream out(trace_out);
            out << trace.to_ndjson();
        }
    }
    std::cout << result.to_json().dump(2) << "\n";
    return result.success ? kOk : kTaskFailure;
}

int cmd_experiment(const std::string& config_file, std::uint64_t seed_override, bool has_seed,
                   const std::string& metrics_out) {
    using namespace chord;
    std::ifstream in(config_file);
    if (!in) throw IoError("cannot open config file: " + config_file);
    nlohmann::json j = nlohmann::json::parse(in);
    ExperimentConfig cfg = experiment_config_from_json(j);
    if (has_seed) cfg.base_seed = seed_override;
    if (const char* env = std::getenv("CHORDGRAPH_SEED"))
        cfg.base_seed = std::strtoull(env, nullptr, 10);
    if (!metrics_out.empty()) cfg.metrics_out = metrics_out;
    MetricsTable table = run_experiment(cfg);
    emit_metrics(table, cfg.metrics_out);
    std::cout << metrics_to_csv(table);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recovery-augmented task-graph execution"};
    app.require_subcommand(1);

    std::string task_file, config_file, strategy = "agentchord", trace_out, metrics_out, endpoint;
    double drop_prob = -1.0, pose_jitter = 0.0;
    std::uint64_t seed = 0;

    auto* validate = app.add_subcommand("validate", "Load, augment and filter a task file");
    validate->add_option("task", task_file, "task file")->required();
    validate->add_option("--planner-endpoint", endpoint, "planner service host:port");

    auto* plan = app.add_subcommand("plan", "Print the augmented graph and keyframes");
    plan->add_option("task", task_file, "task file")->required();
    plan->add_option("--planner-endpoint", endpoint, "planner service host:port");

    auto* simulate = app.add_subcommand("simulate", "Run a single episode");
    simulate->add_option("task", task_file, "task file")->required();
    simulate->add_option("--strategy", strategy, "agentchord|backtrack|none");
    simulate->add_option("--drop-prob", drop_prob, "Bernoulli drop probability");
    simulate->add_option("--seed", seed, "trial seed");
    simulate->add_option("--trace-out", trace_out, "trace output path (ndjson)");
    simulate->add_option("--pose-jitter", pose_jitter, "uniform xy pose randomization (m)");
    simulate->add_option("--planner-endpoint", endpoint, "planner service host:port");

    auto* experiment = app.add_subcommand("experiment", "Run a full experiment config");
    experiment->add_option("config", config_file, "experiment config file")->required();
    auto* seed_opt = experiment->add_option("--seed", seed, "base seed override");
    experiment->add_option("--metrics-out", metrics_out, "metrics CSV override");

    try {
        app.parse(argc, argv);
        if (validate->parsed()) return cmd_validate(task_file, endpoint);
        if (plan->parsed()) return cmd_plan(task_file, endpoint);
        if (simulate->parsed())
            return cmd_simulate(task_file, strategy, drop_prob, seed, trace_out, pose_jitter,
                                endpoint);
        if (experiment->parsed())
            return cmd_experiment(config_file, seed, !seed_opt->empty(), metrics_out);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    } catch (const chord::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}
