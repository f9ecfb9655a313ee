#include "loopkit/surfel_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace loopkit {

std::vector<int> influencers(const Surfel& surfel, std::span<const Keyframe> observers) {
    std::vector<int> out;
    for (const Keyframe& kf : observers) {
        if (kf.timestamp > surfel.t0 && kf.timestamp < surfel.tu) out.push_back(kf.id);
    }
    if (!out.empty() || observers.empty()) return out;

    // Degenerate window: fall back to the observer nearest the interval.
    auto interval_distance = [&](double t) {
        if (t < surfel.t0) return surfel.t0 - t;
        if (t > surfel.tu) return t - surfel.tu;
        return 0.0;
    };
    int best_id = 0;
    double best_d = std::numeric_limits<double>::infinity();
    bool have = false;
    for (const Keyframe& kf : observers) {
        double d = interval_distance(kf.timestamp);
        if (!have || d < best_d || (d == best_d && kf.id < best_id)) {
            best_d = d;
            best_id = kf.id;
            have = true;
        }
    }
    out.push_back(best_id);
    return out;
}

SurfelMap correct_surfels(const SurfelMap& map, std::span<const Keyframe> old_keyframes,
                          std::span<const Keyframe> new_keyframes) {
    if (map.visibility.size() != map.surfels.size()) {
        throw MissingData("correct_surfels: visibility not computed");
    }
    std::unordered_map<int, const Keyframe*> old_by_id, new_by_id;
    for (const Keyframe& kf : old_keyframes) old_by_id[kf.id] = &kf;
    for (const Keyframe& kf : new_keyframes) new_by_id[kf.id] = &kf;

    SurfelMap out = map;
    for (std::size_t s = 0; s < map.surfels.size(); ++s) {
        const std::vector<int>& vis = map.visibility[s];
        if (vis.empty()) continue;

        std::vector<Keyframe> observers;
        observers.reserve(vis.size());
        for (int id : vis) {
            auto it = old_by_id.find(id);
            if (it == old_by_id.end() || !new_by_id.count(id)) {
                throw MissingData("correct_surfels: visibility references unknown keyframe id");
            }
            observers.push_back(*it->second);
        }
        std::vector<int> infl = influencers(map.surfels[s], observers);
        if (infl.empty()) continue;

        Vec3 pos_sum = Vec3::Zero();
        Vec3 normal_sum = Vec3::Zero();
        for (int id : infl) {
            const Keyframe& kf_old = *old_by_id.at(id);
            const Keyframe& kf_new = *new_by_id.at(id);
            RigidTransform carry = compose(kf_new.pose, inverse(kf_old.pose));
            pos_sum += carry * map.surfels[s].position;
            normal_sum += carry.rotation * map.surfels[s].normal;
        }
        double inv_k = 1.0 / static_cast<double>(infl.size());
        out.surfels[s].position = pos_sum * inv_k;
        double len = (normal_sum * inv_k).norm();
        if (len > 1e-12) out.surfels[s].normal = normal_sum * inv_k / len;
    }
    return out;
}

SurfelMap prune_orphans(const SurfelMap& map, std::span<const Keyframe> keyframes) {
    if (map.visibility.size() != map.surfels.size()) {
        throw MissingData("prune_orphans: visibility not computed");
    }
    std::unordered_set<int> alive;
    for (const Keyframe& kf : keyframes) alive.insert(kf.id);

    SurfelMap out;
    for (std::size_t s = 0; s < map.surfels.size(); ++s) {
        std::vector<int> kept;
        for (int id : map.visibility[s]) {
            if (alive.count(id)) kept.push_back(id);
        }
        if (kept.empty()) continue;
        out.surfels.push_back(map.surfels[s]);
        out.visibility.push_back(std::move(kept));
    }
    return out;
}

void compute_visibility(SurfelMap& map, std::span<const Keyframe> keyframes,
                        const CameraIntrinsics& k, std::span<const DepthMap> depth_maps,
                        double depth_tol) {
    if (!depth_maps.empty() && depth_maps.size() != keyframes.size()) {
        throw MissingData("compute_visibility: need one depth map per keyframe");
    }
    map.visibility.assign(map.surfels.size(), {});
    for (std::size_t s = 0; s < map.surfels.size(); ++s) {
        const Surfel& sf = map.surfels[s];
        for (std::size_t f = 0; f < keyframes.size(); ++f) {
            const Keyframe& kf = keyframes[f];
            RigidTransform cam = inverse(kf.pose);
            Vec3 y = cam * sf.position;
            if (y.z() <= 1e-6) continue;
            double u = k.fx * y.x() / y.z() + k.cx;
            double v = k.fy * y.y() / y.z() + k.cy;
            if (u < 0.0 || v < 0.0 || u >= static_cast<double>(k.width) || v >= static_cast<double>(k.height)) {
                continue;
            }
            if (sf.normal.dot(sf.position - kf.pose.translation) >= 0.0) continue;
            if (!depth_maps.empty()) {
                const DepthMap& dm = depth_maps[f];
                int ui = static_cast<int>(std::floor(u));
                int vi = static_cast<int>(std::floor(v));
                if (ui < 0 || vi < 0 || ui >= dm.width || vi >= dm.height) continue;
                float d = dm.at(ui, vi);
                if (!(d > 0.0f) || std::abs(static_cast<double>(d) - y.z()) > depth_tol) continue;
            }
            map.visibility[s].push_back(kf.id);
        }
    }
}

}  // namespace loopkit
