#pragma once
// Experiment runner: seeded randomized trials across disturbance levels
// and strategies, metric aggregation, CSV emission.

#include <string>
#include <vector>

#include "chord/executor.hpp"
#include "chord/task.hpp"

namespace chord {

struct ExperimentConfig {
    std::vector<std::string> task_files;
    std::vector<Strategy> strategies;
    std::vector<double> drop_probs;
    int trials = 100;
    std::uint64_t base_seed = 0;
    double pose_jitter_xy = 0.0;  // uniform +- meters on randomized objects
    std::string metrics_out = "metrics.csv";
    std::string traces_dir;       // empty = no per-trial traces
    int jobs = 0;                 // 0 = hardware concurrency
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct CellMetrics {
    std::string task;
    double p = 0.0;
    std::string strategy;
    double success_rate = 0.0;   // percent
    double mean_steps = 0.0;     // over successful episodes
    double mean_time_s = 0.0;    // over successful episodes
    double mean_triggers = 0.0;  // over all episodes
    int n = 0;
    double stderr_pct = 0.0;     // sqrt(r(1-r)/n) of the success rate, percent
};

struct MetricsTable {
    std::vector<CellMetrics> rows;  // sorted by (task, p, strategy)
};

// Applies uniform xy jitter to every pose-randomized object, then settles.
void randomize_poses(WorldState& world, double range, std::mt19937_64& rng);

// One seeded trial of a task cell. Throws nothing: internal errors come
// back as failed results with a reason.
EpisodeResult run_trial(const TaskSpec& task, Strategy strategy, double drop_prob,
                        std::uint64_t seed, double pose_jitter, Trace* trace_out = nullptr);

MetricsTable run_experiment(const ExperimentConfig& cfg);

// Fixed column order, floats at 4 decimals; byte-deterministic.
std::string metrics_to_csv(const MetricsTable& table);
void emit_metrics(const MetricsTable& table, const std::string& path);

// Held-object motion actions in the task's nominal program (the Bernoulli
// drop opportunities), counted from a disturbance-free open-loop run.
int count_drop_opportunities(const TaskSpec& task);

}  // namespace chord
