#pragma once
// Task loading and the planner-service boundary. Tasks are declarative
// JSON documents; an optional HTTP planner service can supply graph or
// recovery fragments in exactly the same schema, so downstream code never
// knows where a spec came from.

#include <string>

#include "chord/executor.hpp"
#include "chord/graph.hpp"
#include "chord/simworld.hpp"

namespace chord {

struct TaskSpec {
    std::string name;
    std::string instruction;
    SceneSpec scene;
    nlohmann::json graph_doc;
    nlohmann::json recovery_doc;
    DisturbanceModel disturbance;
    ExecutorConfig executor;  // defaults merged with task overrides

    TaskGraph nominal;
    AugmentedGraph augmented;  // forward-moving filtered
    RejectionReport rejection;
    CollisionField field;      // static-scene SDF cache

    EpisodeSetup setup() const {
        EpisodeSetup s;
        s.graph = &augmented;
        s.workspace = &scene.workspace;
        s.field = &field;
        s.disturbance = disturbance;
        return s;
    }
};

// Structural validation of a task document; throws SchemaViolation naming
// the offending keys.
void validate_task_json(const nlohmann::json& j);

// Builds a fully validated TaskSpec (graph built, augmented, filtered,
// defaults resolved) from a parsed document.
TaskSpec task_from_json(const nlohmann::json& j);

// Reads and validates a task file. Parse failures raise ParseError with
// line/column; schema failures raise SchemaViolation.
TaskSpec load_task(const std::string& path);

// Canonical serialization; equal TaskSpecs serialize byte-identically.
std::string task_canonical_json(const TaskSpec& spec);

// Canned planner double: maps a known instruction to its shipped task
// document under `tasks_dir`. Throws UnknownTask otherwise.
nlohmann::json stub_planner(const std::string& instruction,
                            const std::string& tasks_dir = "tasks");

struct PlannerRequest {
    std::string instruction;
    nlohmann::json scene_summary;
    std::string stage;  // "structure" | "orchestrate" | "compile-hints"
};

// POST /plan against a planner service; the response fragment is validated
// before acceptance and never partially applied. Throws Unreachable,
// Timeout, or InvalidResponse.
nlohmann::json request_plan(const std::string& endpoint, const PlannerRequest& req,
                            double timeout_s = 60.0);

// Merges a validated fragment into a task document ("structure" supplies
// the graph section, "orchestrate" the recovery section).
nlohmann::json apply_fragment(nlohmann::json task_doc, const nlohmann::json& fragment,
                              const std::string& stage);

}  // namespace chord
