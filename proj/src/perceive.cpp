#include "chord/features.hpp"
#include "chord/simworld.hpp"

namespace chord {

PerceptionOutput perceive(const WorldState& world, const NoiseConfig& noise,
                          std::mt19937_64& rng) {
    PerceptionOutput out;
    out.step = world.step;
    for (const auto& [id, obj] : world.objects) {
        ObjectObservation obs;
        obs.cloud.object_id = id;
        obs.cloud.points.reserve(obj.shape.points.size());
        for (const auto& p : obj.shape.points) {
            if (noise.dropout > 0.0) {
                std::bernoulli_distribution drop(noise.dropout);
                if (drop(rng)) continue;
            }
            Vec3 w = obj.pose.apply(p);
            if (noise.sigma > 0.0) {
                std::normal_distribution<double> n(0.0, noise.sigma);
                w.x += n(rng);
                w.y += n(rng);
                w.z += n(rng);
            }
            obs.cloud.points.push_back(w);
        }
        obs.point_count = obs.cloud.points.size();
        if (!obs.cloud.points.empty()) obs.centroid = obs.cloud.centroid();
        out.objects.emplace(id, std::move(obs));
    }
    for (const auto& e : world.events) {
        ++out.event_counts[e.kind];
        if (!e.object.empty()) ++out.event_counts[e.kind + ":" + e.object];
    }
    return out;
}

}  // namespace chord
