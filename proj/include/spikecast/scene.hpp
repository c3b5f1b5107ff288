// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scene representation: raw multi-agent trajectory windows turned into the
// two spatial forms consumed by the networks (per-neighbor visual vectors and
// context matrices) plus the speed-adaptive visual sector weighting.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "spikecast/tensor.hpp"

namespace spikecast::scene {

struct TrackPoint {
    long frame = 0;
    double x = 0.0;  // meters, road direction is +x
    double y = 0.0;  // meters, lateral
    int lane = -1;   // optional, -1 when absent
};

struct TrajectoryTrack {
    long agent_id = 0;
    std::vector<TrackPoint> points;

    bool frames_strictly_increasing() const {
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i].frame <= points[i - 1].frame) return false;
        }
        return true;
    }

    bool contiguous() const {
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i].frame != points[i - 1].frame + 1) return false;
        }
        return true;
    }
};

struct SceneWindow {
    TrajectoryTrack target;                   // agent index 0
    std::vector<TrajectoryTrack> neighbors;   // agent indices 1..n
    std::size_t t_obs = 0;
    double frame_rate = 5.0;                  // Hz

    std::size_t agent_count() const { return neighbors.size() + 1; }

    const TrajectoryTrack& agent(std::size_t i) const {
        return i == 0 ? target : neighbors[i - 1];
    }

    void validate() const {
        if (frame_rate <= 0.0) throw std::invalid_argument("SceneWindow: frame_rate must be > 0");
        for (std::size_t i = 0; i < agent_count(); ++i) {
            const TrajectoryTrack& t = agent(i);
            if (t.points.size() != t_obs) {
                throw std::invalid_argument("SceneWindow: track does not span t_obs frames");
            }
            if (!t.frames_strictly_increasing()) {
                throw std::invalid_argument("SceneWindow: frame indices not strictly increasing");
            }
        }
    }
};

/// Channels: dp_x [m], dp_y [m], ds [m/s], da [m/s^2]; extent (n+1) x T x 4.
struct VisualVectors {
    Tensor values;
};

/// Channels: ds [m/s], dtheta [rad]; extent (n+1) x T x 2.
struct ContextMatrices {
    Tensor values;
};

struct SectorBand {
    double lo_kmh = 0.0;
    double hi_kmh = 0.0;  // exclusive; infinity for the open top band
    double half_angle_deg = 0.0;
    double in_weight = 1.0;
    double peripheral_weight = 0.5;
};

struct SectorConfig {
    std::vector<SectorBand> bands;

    // Paper thresholds at 0/30/60/90 km/h; half angles narrow as speed rises.
    static SectorConfig defaults() {
        SectorConfig c;
        c.bands = {
            {0.0, 30.0, 60.0, 1.0, 0.5},
            {30.0, 60.0, 40.0, 1.0, 0.5},
            {60.0, 90.0, 25.0, 1.0, 0.5},
            {90.0, std::numeric_limits<double>::infinity(), 15.0, 1.0, 0.5},
        };
        return c;
    }

    void validate() const {
        if (bands.empty()) throw std::invalid_argument("SectorConfig: no bands");
        if (bands.front().lo_kmh != 0.0) {
            throw std::invalid_argument("SectorConfig: first band must start at 0 km/h");
        }
        for (std::size_t i = 0; i < bands.size(); ++i) {
            const SectorBand& b = bands[i];
            if (!(b.hi_kmh > b.lo_kmh)) {
                throw std::invalid_argument("SectorConfig: empty or inverted band");
            }
            if (b.half_angle_deg <= 0.0 || b.half_angle_deg > 180.0) {
                throw std::invalid_argument("SectorConfig: half angle out of (0, 180]");
            }
            if (b.in_weight < 0.0 || b.in_weight > 1.0 || b.peripheral_weight < 0.0 ||
                b.peripheral_weight > 1.0) {
                throw std::invalid_argument("SectorConfig: weights out of [0, 1]");
            }
            if (i > 0) {
                if (bands[i].lo_kmh != bands[i - 1].hi_kmh) {
                    throw std::invalid_argument("SectorConfig: gapped or overlapping bands");
                }
                if (bands[i].half_angle_deg > bands[i - 1].half_angle_deg) {
                    throw std::invalid_argument(
                        "SectorConfig: half angle must be non-increasing across bands");
                }
            }
        }
        if (std::isfinite(bands.back().hi_kmh)) {
            throw std::invalid_argument("SectorConfig: top band must be open-ended");
        }
    }

    const SectorBand& band_for(double speed_kmh) const {
        for (const SectorBand& b : bands) {
            if (speed_kmh >= b.lo_kmh && speed_kmh < b.hi_kmh) return b;
        }
        return bands.back();
    }
};

/// Weight per (agent, frame) in [0,1]; extent (n+1) x T x 1.
struct VisualWeightMatrix {
    Tensor weights;
    SectorConfig config;
};

namespace detail {

inline double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * M_PI);
    if (w <= -M_PI) w += 2.0 * M_PI;
    return w;  // (-pi, pi]
}

/// Per-frame velocities via central differences, one-sided at the ends.
inline std::vector<std::array<double, 2>> velocities(const TrajectoryTrack& t, double dt) {
    std::size_t n = t.points.size();
    std::vector<std::array<double, 2>> v(n, {0.0, 0.0});
    if (n < 2) return v;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0) {
            v[i] = {(t.points[1].x - t.points[0].x) / dt, (t.points[1].y - t.points[0].y) / dt};
        } else if (i == n - 1) {
            v[i] = {(t.points[i].x - t.points[i - 1].x) / dt,
                    (t.points[i].y - t.points[i - 1].y) / dt};
        } else {
            v[i] = {(t.points[i + 1].x - t.points[i - 1].x) / (2.0 * dt),
                    (t.points[i + 1].y - t.points[i - 1].y) / (2.0 * dt)};
        }
    }
    return v;
}

/// Heading from the last two frames' displacement; +x when stationary.
inline std::vector<double> displacement_headings(const TrajectoryTrack& t) {
    std::size_t n = t.points.size();
    std::vector<double> h(n, 0.0);
    constexpr double kEps = 1e-9;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t a = i == 0 ? 0 : i - 1;
        std::size_t b = i == 0 ? std::min<std::size_t>(1, n - 1) : i;
        double dx = t.points[b].x - t.points[a].x;
        double dy = t.points[b].y - t.points[a].y;
        h[i] = (std::abs(dx) < kEps && std::abs(dy) < kEps) ? 0.0 : std::atan2(dy, dx);
    }
    return h;
}

/// First derivative of a sampled scalar series; one-sided at the ends.
inline double d1(const std::vector<double>& r, std::size_t i, double dt) {
    std::size_t n = r.size();
    if (i == 0) return (r[1] - r[0]) / dt;
    if (i == n - 1) return (r[n - 1] - r[n - 2]) / dt;
    return (r[i + 1] - r[i - 1]) / (2.0 * dt);
}

/// Second derivative; the end frames reuse the adjacent interior stencil.
inline double d2(const std::vector<double>& r, std::size_t i, double dt) {
    std::size_t n = r.size();
    std::size_t c = std::min(std::max<std::size_t>(i, 1), n - 2);
    return (r[c + 1] - 2.0 * r[c] + r[c - 1]) / (dt * dt);
}

}  // namespace detail

/// Relative position / speed / acceleration channels of every agent with
/// respect to the target, per frame. Speed and acceleration are derivatives
/// of the relative offset projected on the target heading axis.
inline VisualVectors derive_visual_vectors(const SceneWindow& w) {
    w.validate();
    if (w.t_obs < 3) {
        throw std::invalid_argument(
            "derive_visual_vectors: window shorter than 3 frames (second difference undefined)");
    }
    std::size_t na = w.agent_count(), T = w.t_obs;
    double dt = 1.0 / w.frame_rate;
    auto heading = detail::displacement_headings(w.target);

    VisualVectors out;
    out.values = Tensor({na, T, 4});
    for (std::size_t a = 1; a < na; ++a) {
        const TrajectoryTrack& nb = w.agent(a);
        std::vector<double> proj(T);
        for (std::size_t t = 0; t < T; ++t) {
            double dx = nb.points[t].x - w.target.points[t].x;
            double dy = nb.points[t].y - w.target.points[t].y;
            out.values.at(a, t, 0) = dx;
            out.values.at(a, t, 1) = dy;
            proj[t] = dx * std::cos(heading[t]) + dy * std::sin(heading[t]);
        }
        for (std::size_t t = 0; t < T; ++t) {
            out.values.at(a, t, 2) = detail::d1(proj, t, dt);
            out.values.at(a, t, 3) = detail::d2(proj, t, dt);
        }
    }
    return out;  // target row stays identically zero
}

/// Speed-magnitude and wrapped heading differences of every agent with
/// respect to the target, per frame.
inline ContextMatrices derive_context_matrices(const SceneWindow& w) {
    w.validate();
    if (w.t_obs < 3) {
        throw std::invalid_argument("derive_context_matrices: window shorter than 3 frames");
    }
    std::size_t na = w.agent_count(), T = w.t_obs;
    double dt = 1.0 / w.frame_rate;
    constexpr double kEps = 1e-9;

    auto angle_series = [&](const TrajectoryTrack& tr,
                            const std::vector<std::array<double, 2>>& v) {
        std::vector<double> th(T, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            double sp = std::hypot(v[t][0], v[t][1]);
            if (sp > kEps) {
                th[t] = std::atan2(v[t][1], v[t][0]);
            } else {
                // take the last frame with nonzero velocity, else 0
                th[t] = t > 0 ? th[t - 1] : 0.0;
            }
        }
        (void)tr;
        return th;
    };

    auto vt = detail::velocities(w.target, dt);
    auto tht = angle_series(w.target, vt);

    ContextMatrices out;
    out.values = Tensor({na, T, 2});
    for (std::size_t a = 1; a < na; ++a) {
        auto vn = detail::velocities(w.agent(a), dt);
        auto thn = angle_series(w.agent(a), vn);
        for (std::size_t t = 0; t < T; ++t) {
            double sn = std::hypot(vn[t][0], vn[t][1]);
            double st = std::hypot(vt[t][0], vt[t][1]);
            out.values.at(a, t, 0) = sn - st;
            out.values.at(a, t, 1) = detail::wrap_angle(thn[t] - tht[t]);
        }
    }
    return out;
}

/// Adaptive visual sector: full weight inside the speed-dependent central
/// cone, reduced weight in the periphery. The target row is always 1.
inline VisualWeightMatrix visual_weight_matrix(const SceneWindow& w, const SectorConfig& cfg) {
    w.validate();
    cfg.validate();
    std::size_t na = w.agent_count(), T = w.t_obs;
    double dt = 1.0 / w.frame_rate;
    auto heading = detail::displacement_headings(w.target);
    auto vt = detail::velocities(w.target, dt);

    VisualWeightMatrix out;
    out.config = cfg;
    out.weights = Tensor({na, T, 1});
    for (std::size_t t = 0; t < T; ++t) {
        out.weights.at(0, t, 0) = 1.0;
        double speed_kmh = std::hypot(vt[t][0], vt[t][1]) * 3.6;
        const SectorBand& band = cfg.band_for(speed_kmh);
        double half = band.half_angle_deg * M_PI / 180.0;
        for (std::size_t a = 1; a < na; ++a) {
            double dx = w.agent(a).points[t].x - w.target.points[t].x;
            double dy = w.agent(a).points[t].y - w.target.points[t].y;
            double bearing = detail::wrap_angle(std::atan2(dy, dx) - heading[t]);
            out.weights.at(a, t, 0) =
                std::abs(bearing) <= half ? band.in_weight : band.peripheral_weight;
        }
    }
    return out;
}

/// Visual pooling: weights broadcast across the four channels of S.
inline VisualVectors apply_visual_pooling(const VisualWeightMatrix& h, const VisualVectors& s) {
    const Tensor &hw = h.weights, &sv = s.values;
    if (hw.rank() != 3 || sv.rank() != 3 || hw.shape[0] != sv.shape[0] ||
        hw.shape[1] != sv.shape[1]) {
        throw std::invalid_argument("apply_visual_pooling: extent mismatch " + hw.shape_str() +
                                    " vs " + sv.shape_str());
    }
    VisualVectors out;
    out.values = sv;
    std::size_t na = sv.shape[0], T = sv.shape[1], C = sv.shape[2];
    for (std::size_t a = 0; a < na; ++a) {
        for (std::size_t t = 0; t < T; ++t) {
            double wgt = hw.at(a, t, 0);
            for (std::size_t c = 0; c < C; ++c) out.values.at(a, t, c) *= wgt;
        }
    }
    return out;
}

/// Neighbor selection: agents within the longitudinal radius and lane band of
/// the target at the last observed frame.
struct NeighborFilter {
    double longitudinal_radius_m = 90.0;
    int lane_band = 2;
};

inline std::vector<std::size_t> select_neighbors(const TrajectoryTrack& target,
                                                 const std::vector<TrajectoryTrack>& candidates,
                                                 const NeighborFilter& f) {
    std::vector<std::size_t> keep;
    if (target.points.empty()) return keep;
    const TrackPoint& ref = target.points.back();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const TrajectoryTrack& c = candidates[i];
        if (c.points.empty() || c.agent_id == target.agent_id) continue;
        const TrackPoint& p = c.points.back();
        if (std::abs(p.x - ref.x) > f.longitudinal_radius_m) continue;
        if (ref.lane >= 0 && p.lane >= 0 && std::abs(p.lane - ref.lane) > f.lane_band) continue;
        keep.push_back(i);
    }
    return keep;
}

}  // namespace spikecast::scene
