#include "chord/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace chord {

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (!j.contains("tasks") || !j.at("tasks").is_array() || j.at("tasks").empty())
        throw SchemaViolation("experiment config needs a nonempty \"tasks\" array");
    for (const auto& t : j.at("tasks")) c.task_files.push_back(t.get<std::string>());
    for (const auto& s : j.value("strategies", nlohmann::json::array({"agentchord"})))
        c.strategies.push_back(strategy_from_string(s.get<std::string>()));
    for (const auto& p : j.value("drop_probs", nlohmann::json::array({0.0}))) {
        double v = p.get<double>();
        if (v < 0.0 || v > 1.0) throw SchemaViolation("drop probability outside [0,1]");
        c.drop_probs.push_back(v);
    }
    c.trials = j.value("trials", 100);
    if (c.trials < 1) throw SchemaViolation("trials must be >= 1");
    c.base_seed = j.value("base_seed", 0ULL);
    c.pose_jitter_xy = j.value("pose_jitter_xy", 0.0);
    c.metrics_out = j.value("metrics_out", std::string("metrics.csv"));
    c.traces_dir = j.value("traces_dir", std::string());
    c.jobs = j.value("jobs", 0);
    return c;
}

void randomize_poses(WorldState& world, double range, std::mt19937_64& rng) {
    if (range <= 0.0) return;
    std::uniform_real_distribution<double> jitter(-range, range);
    for (auto& [id, obj] : world.objects) {
        if (!obj.randomize_pose) continue;
        obj.pose.position.x += jitter(rng);
        obj.pose.position.y += jitter(rng);
    }
    settle(world);
}

EpisodeResult run_trial(const TaskSpec& task, Strategy strategy, double drop_prob,
                        std::uint64_t seed, double pose_jitter, Trace* trace_out) {
    try {
        std::mt19937_64 rng(seed);
        WorldState world = make_world(task.scene);
        randomize_poses(world, pose_jitter, rng);

        EpisodeSetup setup = task.setup();
        setup.disturbance.mode = DisturbanceModel::Mode::Bernoulli;
        setup.disturbance.drop_probability = drop_prob;
        setup.disturbance.events.clear();

        nlohmann::json meta{{"task", task.name},
                            {"seed", seed},
                            {"strategy", strategy_to_string(strategy)},
                            {"drop_prob", drop_prob}};
        auto [result, trace] = run_episode(setup, std::move(world), strategy, task.executor,
                                           rng, meta);
        if (trace_out) *trace_out = std::move(trace);
        return result;
    } catch (const std::exception& e) {
        EpisodeResult r;
        r.success = false;
        r.reason = std::string("error: ") + e.what();
        return r;
    }
}

int count_drop_opportunities(const TaskSpec& task) {
    EpisodeResult r = run_trial(task, Strategy::NoRecovery, 0.0, 0, 0.0);
    return r.eligible_drop_actions;
}

namespace {

std::string trace_filename(const std::string& task, double p, const std::string& strategy,
                           int trial) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "p%.4f", p);
    return task + "__" + buf + "__" + strategy + "__t" + std::to_string(trial) + ".ndjson";
}

}  // namespace

MetricsTable run_experiment(const ExperimentConfig& cfg) {
    std::vector<TaskSpec> tasks;
    tasks.reserve(cfg.task_files.size());
    for (const auto& f : cfg.task_files) tasks.push_back(load_task(f));

    if (!cfg.traces_dir.empty()) std::filesystem::create_directories(cfg.traces_dir);

    MetricsTable table;
    unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                                 : std::max(1u, std::thread::hardware_concurrency());

    for (const auto& task : tasks) {
        for (double p : cfg.drop_probs) {
            for (Strategy strategy : cfg.strategies) {
                std::vector<EpisodeResult> results(cfg.trials);
                std::atomic<int> next{0};
                auto worker = [&]() {
                    while (true) {
                        int i = next.fetch_add(1);
                        if (i >= cfg.trials) return;
                        std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(i);
                        if (cfg.traces_dir.empty()) {
                            results[i] = run_trial(task, strategy, p, seed, cfg.pose_jitter_xy);
                        } else {
                            Trace trace;
                            results[i] =
                                run_trial(task, strategy, p, seed, cfg.pose_jitter_xy, &trace);
                            std::ofstream out(cfg.traces_dir + "/" +
                                              trace_filename(task.name, p,
                                                             strategy_to_string(strategy), i));
                            out << trace.to_ndjson();
                        }
                    }
                };
                std::vector<std::thread> pool;
                for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
                worker();
                for (auto& t : pool) t.join();

                CellMetrics cell;
                cell.task = task.name;
                cell.p = p;
                cell.strategy = strategy_to_string(strategy);
                cell.n = cfg.trials;
                int successes = 0;
                double steps_sum = 0.0, time_sum = 0.0, trig_sum = 0.0;
                for (const auto& r : results) {
                    trig_sum += r.triggers;
                    if (r.success) {
                        ++successes;
                        steps_sum += static_cast<double>(r.episode_steps);
                        time_sum += r.simulated_time;
                    }
                }
                double rate = static_cast<double>(successes) / cfg.trials;
                cell.success_rate = 100.0 * rate;
                cell.stderr_pct = 100.0 * std::sqrt(rate * (1.0 - rate) / cfg.trials);
                cell.mean_steps = successes ? steps_sum / successes : 0.0;
                cell.mean_time_s = successes ? time_sum / successes : 0.0;
                cell.mean_triggers = trig_sum / cfg.trials;
                table.rows.push_back(std::move(cell));
            }
        }
    }

    std::sort(table.rows.begin(), table.rows.end(), [](const CellMetrics& a, const CellMetrics& b) {
        return std::tie(a.task, a.p, a.strategy) < std::tie(b.task, b.p, b.strategy);
    });
    return table;
}

std::string metrics_to_csv(const MetricsTable& table) {
    std::string out = "task,p,strategy,success_rate,mean_steps,mean_time_s,mean_triggers,n,stderr\n";
    char buf[256];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%s,%.4f,%.4f,%.4f,%.4f,%d,%.4f\n",
                      r.task.c_str(), r.p, r.strategy.c_str(), r.success_rate, r.mean_steps,
                      r.mean_time_s, r.mean_triggers, r.n, r.stderr_pct);
        out += buf;
    }
    return out;
}

void emit_metrics(const MetricsTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file: " + path);
    out << metrics_to_csv(table);
    if (!out) throw IoError("failed writing metrics file: " + path);
}

}  // namespace chord
