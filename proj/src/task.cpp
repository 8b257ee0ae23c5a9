#include "chord/task.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>

namespace chord {

namespace {

constexpr int kSchemaVersion = 1;

void require_keys(const nlohmann::json& j, const std::vector<std::string>& keys,
                  const std::string& where) {
    std::string missing;
    for (const auto& k : keys)
        if (!j.contains(k)) missing += missing.empty() ? k : ", " + k;
    if (!missing.empty())
        throw SchemaViolation("missing required keys in " + where + ": " + missing);
}

}  // namespace

void validate_task_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaViolation("task document must be a JSON object");
    require_keys(j, {"schema_version", "name", "scene", "graph"}, "task");
    if (!j.at("schema_version").is_number_integer() ||
        j.at("schema_version").get<int>() != kSchemaVersion)
        throw SchemaViolation("unsupported schema_version (expected " +
                              std::to_string(kSchemaVersion) + ")");
    require_keys(j.at("graph"), {"nodes", "edges", "start", "terminal"}, "graph");
    if (j.contains("recovery") && !j.at("recovery").is_array())
        throw SchemaViolation("recovery must be an array");
}

TaskSpec task_from_json(const nlohmann::json& j) {
    validate_task_json(j);
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    t.instruction = j.value("instruction", t.name);
    t.scene = parse_scene(j.at("scene"));
    t.graph_doc = j.at("graph");
    t.recovery_doc = j.value("recovery", nlohmann::json::array());
    t.disturbance = j.contains("disturbance") ? parse_disturbance(j.at("disturbance"))
                                              : DisturbanceModel{};
    t.executor = executor_config_from_json(j);

    t.nominal = build_graph(t.graph_doc, t.executor.monitors);
    AugmentedGraph aug = augment(t.nominal, t.recovery_doc, t.executor.monitors);
    FilterResult filtered = filter_forward_moving(aug);
    t.augmented = std::move(filtered.graph);
    t.rejection = std::move(filtered.report);

    Aabb bounds{{1e9, 1e9, 1e9}, {-1e9, -1e9, -1e9}};
    for (const auto& [arm, box] : t.scene.workspace.reach) {
        bounds.min = {std::min(bounds.min.x, box.min.x), std::min(bounds.min.y, box.min.y),
                      std::min(bounds.min.z, box.min.z)};
        bounds.max = {std::max(bounds.max.x, box.max.x), std::max(bounds.max.y, box.max.y),
                      std::max(bounds.max.z, box.max.z)};
    }
    Vec3 pad{0.05, 0.05, 0.05};
    bounds.min -= pad;
    bounds.max += pad;
    bounds.min.z = std::min(bounds.min.z, t.scene.table_z - 0.02);
    t.field = CollisionField::build(bounds, t.executor.solver.voxel_size, t.scene.table_z,
                                    t.scene.static_obstacles);
    return t;
}

TaskSpec load_task(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open task file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') { ++line; col = 1; }
            else ++col;
        }
        throw ParseError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                         e.what());
    }
    try {
        return task_from_json(j);
    } catch (const SchemaViolation& e) {
        throw SchemaViolation(path + ": " + e.what());
    }
}

std::string task_canonical_json(const TaskSpec& spec) {
    nlohmann::json j{
        {"name", spec.name},
        {"instruction", spec.instruction},
        {"scene", scene_to_json(spec.scene)},
        {"graph", graph_to_json(spec.augmented)},
        {"disturbance", disturbance_to_json(spec.disturbance)},
        {"config", executor_config_to_json(spec.executor)},
    };
    return j.dump();
}

nlohmann::json stub_planner(const std::string& instruction, const std::string& tasks_dir) {
    static const std::map<std::string, std::string> canned = {
        {"single-arm pour water", "single_arm_pour.json"},
        {"dual-arm pour water", "dual_arm_pour.json"},
        {"rearrange table", "rearrange_table.json"},
        {"handover block", "handover_block.json"},
        {"setup coffee tray", "setup_coffee_tray.json"},
    };
    auto it = canned.find(instruction);
    if (it == canned.end()) throw UnknownTask("no canned task for instruction: " + instruction);
    std::string path = tasks_dir + "/" + it->second;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open canned task file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    validate_task_json(j);
    return j;
}

namespace {

// Accepts "host:port", "http://host:port", with optional trailing slash.
std::pair<std::string, int> parse_endpoint(const std::string& endpoint) {
    std::string s = endpoint;
    const std::string scheme = "http://";
    if (s.rfind(scheme, 0) == 0) s = s.substr(scheme.size());
    while (!s.empty() && s.back() == '/') s.pop_back();
    auto colon = s.rfind(':');
    if (colon == std::string::npos)
        throw Unreachable("planner endpoint needs host:port, got " + endpoint);
    int port = 0;
    try {
        port = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw Unreachable("bad port in planner endpoint: " + endpoint);
    }
    return {s.substr(0, colon), port};
}

void validate_fragment(const nlohmann::json& fragment, const std::string& stage) {
    if (!fragment.is_object()) throw InvalidResponse("planner fragment must be an object");
    if (stage == "structure") {
        if (!fragment.contains("graph"))
            throw InvalidResponse("structure fragment missing \"graph\"");
        require_keys(fragment.at("graph"), {"nodes", "edges", "start", "terminal"},
                     "planner graph fragment");
    } else if (stage == "orchestrate") {
        if (!fragment.contains("recovery") || !fragment.at("recovery").is_array())
            throw InvalidResponse("orchestrate fragment missing \"recovery\" array");
        for (const auto& r : fragment.at("recovery"))
            if (!r.contains("edge") || !r.contains("id") || !r.contains("detector") ||
                !r.contains("branch"))
                throw InvalidResponse("recovery entry missing edge/id/detector/branch");
    } else if (stage != "compile-hints") {
        throw InvalidResponse("unknown planner stage: " + stage);
    }
}

}  // namespace

nlohmann::json request_plan(const std::string& endpoint, const PlannerRequest& req,
                            double timeout_s) {
    auto [host, port] = parse_endpoint(endpoint);
    httplib::Client cli(host, port);
    int sec = std::max(1, static_cast<int>(timeout_s));
    cli.set_connection_timeout(sec, 0);
    cli.set_read_timeout(sec, 0);
    cli.set_write_timeout(sec, 0);

    nlohmann::json body{
        {"instruction", req.instruction},
        {"scene", req.scene_summary},
        {"stage", req.stage},
    };
    auto res = cli.Post("/plan", body.dump(), "application/json");
    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write)
            throw Timeout("planner request timed out: " + endpoint);
        throw Unreachable("planner unreachable: " + endpoint);
    }
    if (res->status == 504) throw Timeout("planner reported timeout");
    if (res->status == 422) throw InvalidResponse("planner rejected request as schema-invalid");
    if (res->status != 200)
        throw InvalidResponse("planner returned status " + std::to_string(res->status));

    nlohmann::json fragment;
    try {
        fragment = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidResponse(std::string("planner response is not valid JSON: ") + e.what());
    }
    validate_fragment(fragment, req.stage);
    return fragment;
}

nlohmann::json apply_fragment(nlohmann::json task_doc, const nlohmann::json& fragment,
                              const std::string& stage) {
    validate_fragment(fragment, stage);
    if (stage == "structure") task_doc["graph"] = fragment.at("graph");
    else if (stage == "orchestrate") task_doc["recovery"] = fragment.at("recovery");
    return task_doc;
}

}  // namespace chord
