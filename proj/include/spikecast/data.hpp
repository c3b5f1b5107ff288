// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dataset plumbing: NGSIM-schema CSV tracks, synthetic highway scenes with
// construction-exact maneuver labels, linear-interpolation imputation, the
// missing-history ablation protocol, and RMSE metrics.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "spikecast/decoder.hpp"
#include "spikecast/rng.hpp"
#include "spikecast/scene.hpp"
#include "spikecast/teacher.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::data {

using scene::TrackPoint;
using scene::TrajectoryTrack;

// Maneuver label = lateral * 2 + longitudinal:
//   lateral 0 = left change, 1 = keep, 2 = right change
//   longitudinal 0 = normal, 1 = braking
inline constexpr std::size_t kManeuvers = 6;

inline std::string maneuver_name(std::size_t label) {
    static const char* kLat[] = {"left", "keep", "right"};
    static const char* kLon[] = {"normal", "brake"};
    return std::string(kLat[label / 2]) + "/" + kLon[label % 2];
}

// ---------------------------------------------------------------------------
// CSV tracks
// ---------------------------------------------------------------------------

struct ColumnMap {
    std::string vehicle_id = "vehicle_id";
    std::string frame = "frame";
    std::string x = "local_x";
    std::string y = "local_y";
    std::string lane = "lane_id";  // optional column
    bool feet_to_meters = false;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, std::size_t line_no, const std::string& col) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw std::runtime_error("load_tracks: unparseable " + col + " value '" + s + "' at line " +
                                 std::to_string(line_no));
    }
    return v;
}

inline long parse_long(const std::string& s, std::size_t line_no, const std::string& col) {
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') {
        throw std::runtime_error("load_tracks: unparseable " + col + " value '" + s + "' at line " +
                                 std::to_string(line_no));
    }
    return v;
}

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Load tracks grouped by vehicle id with frames sorted. Lines starting with
/// '#' are metadata comments. Missing required columns and unparseable rows
/// are hard errors naming the column / line.
inline std::vector<TrajectoryTrack> load_tracks(const std::string& path,
                                                const ColumnMap& schema = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_tracks: cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    // header (skipping leading comments)
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        header = detail::split_csv(line);
        break;
    }
    if (header.empty()) return {};
    auto col = [&](const std::string& name, bool required) -> long {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<long>(i);
        }
        if (required) throw std::runtime_error("load_tracks: missing column '" + name + "'");
        return -1;
    };
    long ci = col(schema.vehicle_id, true);
    long cf = col(schema.frame, true);
    long cx = col(schema.x, true);
    long cy = col(schema.y, true);
    long cl = col(schema.lane, false);
    double unit = schema.feet_to_meters ? 0.3048 : 1.0;

    std::map<long, TrajectoryTrack> by_id;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto cells = detail::split_csv(line);
        if (cells.size() < header.size()) {
            throw std::runtime_error("load_tracks: short row at line " + std::to_string(line_no));
        }
        TrackPoint p;
        long id = detail::parse_long(cells[ci], line_no, schema.vehicle_id);
        p.frame = detail::parse_long(cells[cf], line_no, schema.frame);
        p.x = detail::parse_double(cells[cx], line_no, schema.x) * unit;
        p.y = detail::parse_double(cells[cy], line_no, schema.y) * unit;
        if (cl >= 0 && !cells[cl].empty()) {
            p.lane = static_cast<int>(detail::parse_long(cells[cl], line_no, schema.lane));
        }
        auto& tr = by_id[id];
        tr.agent_id = id;
        tr.points.push_back(p);
    }
    std::vector<TrajectoryTrack> out;
    out.reserve(by_id.size());
    for (auto& [id, tr] : by_id) {
        std::sort(tr.points.begin(), tr.points.end(),
                  [](const TrackPoint& a, const TrackPoint& b) { return a.frame < b.frame; });
        out.push_back(std::move(tr));
    }
    return out;
}

/// Write tracks in the load schema; exact double round-trip via %.17g.
inline void write_tracks(const std::string& path, const std::vector<TrajectoryTrack>& tracks,
                         const std::string& digest = "", std::uint64_t seed = 0) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_tracks: cannot open " + path);
    if (!digest.empty()) out << "# config_digest=" << digest << " seed=" << seed << "\n";
    out << "vehicle_id,frame,local_x,local_y,lane_id\n";
    for (const auto& tr : tracks) {
        for (const auto& p : tr.points) {
            out << tr.agent_id << ',' << p.frame << ',' << detail::fmt_double(p.x) << ','
                << detail::fmt_double(p.y) << ',';
            if (p.lane >= 0) out << p.lane;
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write_tracks: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

/// Fill a (possibly gapped) track onto the contiguous frame range [f0, f1]:
/// interior gaps by linear interpolation per coordinate, endpoint gaps by
/// nearest-known replication. Lane ids take the nearest known frame's value.
inline TrajectoryTrack impute_to_range(const TrajectoryTrack& known, long f0, long f1) {
    if (known.points.empty()) throw std::invalid_argument("impute: fully missing track");
    TrajectoryTrack out;
    out.agent_id = known.agent_id;
    std::size_t next = 0;  // first known point with frame >= f
    for (long f = f0; f <= f1; ++f) {
        while (next < known.points.size() && known.points[next].frame < f) ++next;
        if (next < known.points.size() && known.points[next].frame == f) {
            out.points.push_back(known.points[next]);
            continue;
        }
        const TrackPoint* prev = next > 0 ? &known.points[next - 1] : nullptr;
        const TrackPoint* succ = next < known.points.size() ? &known.points[next] : nullptr;
        TrackPoint p;
        p.frame = f;
        if (prev && succ) {
            double w = static_cast<double>(f - prev->frame) /
                       static_cast<double>(succ->frame - prev->frame);
            p.x = prev->x + w * (succ->x - prev->x);
            p.y = prev->y + w * (succ->y - prev->y);
            p.lane = (f - prev->frame <= succ->frame - f) ? prev->lane : succ->lane;
        } else if (prev) {
            p.x = prev->x;
            p.y = prev->y;
            p.lane = prev->lane;
        } else {
            p.x = succ->x;
            p.y = succ->y;
            p.lane = succ->lane;
        }
        out.points.push_back(p);
    }
    return out;
}

/// Delete `count` frames starting at `start`, then re-fill the original span.
inline TrajectoryTrack impute_missing(const TrajectoryTrack& track, long start, long count) {
    if (track.points.empty()) throw std::invalid_argument("impute_missing: empty track");
    if (count <= 0) return track;
    TrajectoryTrack kept;
    kept.agent_id = track.agent_id;
    for (const TrackPoint& p : track.points) {
        if (p.frame < start || p.frame >= start + count) kept.points.push_back(p);
    }
    return impute_to_range(kept, track.points.front().frame, track.points.back().frame);
}

// ---------------------------------------------------------------------------
// Maneuver labeling
// ---------------------------------------------------------------------------

struct LabelRule {
    double lane_change_window_s = 4.0;  // +/- around the window end
    double braking_ratio = 0.8;         // future mean speed vs current
    double lane_width_m = 3.7;          // fallback when lane ids are absent
};

/// Label from the full track: lateral class by lane change within the +/-4 s
/// window around `window_end_frame`, longitudinal class by future mean speed.
inline std::size_t label_maneuvers(const TrajectoryTrack& track, long window_end_frame,
                                   long horizon_frames, double frame_rate,
                                   const LabelRule& rule = {}) {
    if (track.points.empty()) throw std::invalid_argument("label_maneuvers: empty track");
    long first = track.points.front().frame;
    long last = track.points.back().frame;
    if (window_end_frame < first || window_end_frame + horizon_frames > last) {
        throw std::invalid_argument("label_maneuvers: horizon exceeds track");
    }
    if (!track.contiguous()) {
        throw std::invalid_argument("label_maneuvers: track must be contiguous (impute first)");
    }
    auto at = [&](long f) -> const TrackPoint& {
        return track.points[static_cast<std::size_t>(f - first)];
    };

    long w = std::lround(rule.lane_change_window_s * frame_rate);
    long fa = std::max(first, window_end_frame - w);
    long fb = std::min(last, window_end_frame + w);
    std::size_t lateral = 1;  // keep
    if (at(fa).lane >= 0 && at(fb).lane >= 0) {
        if (at(fb).lane < at(fa).lane) lateral = 0;
        if (at(fb).lane > at(fa).lane) lateral = 2;
    } else {
        double dy = at(fb).y - at(fa).y;
        if (dy < -0.5 * rule.lane_width_m) lateral = 0;
        if (dy > 0.5 * rule.lane_width_m) lateral = 2;
    }

    double dt = 1.0 / frame_rate;
    auto speed_at = [&](long f) {
        long a = std::max(first, f - 1);
        long b = a == f ? f + 1 : f;
        return std::hypot(at(b).x - at(a).x, at(b).y - at(a).y) / (dt * double(b - a));
    };
    double current = speed_at(window_end_frame);
    double mean_future = 0.0;
    for (long f = window_end_frame + 1; f <= window_end_frame + horizon_frames; ++f) {
        mean_future += speed_at(f);
    }
    mean_future /= static_cast<double>(horizon_frames);
    std::size_t braking = (current > 1e-9 && mean_future < rule.braking_ratio * current) ? 1 : 0;
    return lateral * 2 + braking;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct SceneSample {
    long scene_id = 0;
    scene::SceneWindow window;   // t_obs observed frames
    Tensor future;               // {t_f, 2} target ground truth
    std::vector<int> future_lanes;  // optional lane ids for the future frames
    std::size_t label = 1 * 2;   // keep/normal by default
    std::string split = "train";
};

struct Dataset {
    std::vector<SceneSample> scenes;
    double frame_rate = 5.0;
    std::size_t t_obs = 16;
    std::size_t t_f = 25;

    std::vector<const SceneSample*> split(const std::string& tag) const {
        std::vector<const SceneSample*> out;
        for (const auto& s : scenes) {
            if (s.split == tag) out.push_back(&s);
        }
        return out;
    }
};

struct GenConfig {
    std::size_t scenes = 64;
    std::size_t lanes = 3;
    double lane_width_m = 3.7;
    double speed_min_mps = 15.0;
    double speed_max_mps = 33.0;
    std::size_t neighbors_min = 2;
    std::size_t neighbors_max = 5;
    double accel_bound_mps2 = 5.0;  // C1 continuity bound on any agent
    double lane_change_lead_s = 1.5;  // lateral onset before the window end
    double brake_lead_s = 1.0;        // deceleration onset before the window end
    std::vector<double> maneuver_mix = {0.15, 0.10, 0.25, 0.15, 0.20, 0.15};
    double train_frac = 0.7;
    double val_frac = 0.1;
    std::size_t t_obs = 16;
    std::size_t t_f = 25;
    double frame_rate = 5.0;

    void validate() const {
        if (lanes == 0) throw std::invalid_argument("gen_synthetic: zero lanes is infeasible");
        if (maneuver_mix.size() != kManeuvers) {
            throw std::invalid_argument("gen_synthetic: maneuver_mix must have 6 entries");
        }
        double s = 0.0;
        for (double m : maneuver_mix) {
            if (m < 0.0) throw std::invalid_argument("gen_synthetic: negative mix weight");
            s += m;
        }
        if (s <= 0.0) throw std::invalid_argument("gen_synthetic: empty maneuver mix");
        if (speed_min_mps <= 0.0 || speed_max_mps < speed_min_mps) {
            throw std::invalid_argument("gen_synthetic: bad speed range");
        }
        if (t_obs < 3 || t_f < 1 || frame_rate <= 0.0) {
            throw std::invalid_argument("gen_synthetic: bad window config");
        }
    }
};

namespace detail {

inline std::size_t pick_mix(Rng& rng, const std::vector<double>& mix) {
    double total = 0.0;
    for (double m : mix) total += m;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        if (u < mix[i]) return i;
        u -= mix[i];
    }
    return mix.size() - 1;
}

/// Kinematic profile of one agent over the full scene span.
struct AgentPlan {
    double x0 = 0.0, v0 = 0.0;
    double brake_accel = 0.0;   // <= 0, applied from brake_from onward
    double brake_from_s = 0.0;
    long lane_from = 0, lane_to = 0;
    double lane_change_start_s = 0.0;
    double lane_change_dur_s = 4.0;
    double lane_width = 3.7;

    TrackPoint sample(double t, double dt_step) const {
        // longitudinal: explicit per-step integration keeps velocity jumps
        // bounded by accel * dt
        double x = x0, v = v0;
        for (double s = 0.0; s + 1e-9 < t; s += dt_step) {
            x += v * dt_step;
            double a = (s >= brake_from_s) ? brake_accel : 0.0;
            v = std::max(v + a * dt_step, 0.5);
        }
        TrackPoint p;
        p.x = x;
        double y0 = static_cast<double>(lane_from) * lane_width;
        double y1 = static_cast<double>(lane_to) * lane_width;
        if (t <= lane_change_start_s || lane_from == lane_to) {
            p.y = y0;
        } else if (t >= lane_change_start_s + lane_change_dur_s) {
            p.y = y1;
        } else {
            double tau = (t - lane_change_start_s) / lane_change_dur_s;
            p.y = y0 + (y1 - y0) * 0.5 * (1.0 - std::cos(M_PI * tau));
        }
        p.lane = static_cast<int>(std::lround(p.y / lane_width));
        return p;
    }
};

}  // namespace detail

/// Kinematically consistent multi-vehicle highway scenes with labels exact by
/// construction; deterministic per seed (each scene has its own substream).
inline Dataset gen_synthetic(const GenConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Dataset ds;
    ds.frame_rate = cfg.frame_rate;
    ds.t_obs = cfg.t_obs;
    ds.t_f = cfg.t_f;
    double dt = 1.0 / cfg.frame_rate;
    std::size_t total_frames = cfg.t_obs + cfg.t_f;
    double window_end_s = static_cast<double>(cfg.t_obs - 1) * dt;

    for (std::size_t sc = 0; sc < cfg.scenes; ++sc) {
        Rng rng(Rng::mix(seed, sc));
        std::size_t label = detail::pick_mix(rng, cfg.maneuver_mix);
        std::size_t lateral = label / 2;
        bool braking = (label % 2) == 1;

        detail::AgentPlan target;
        target.lane_width = cfg.lane_width_m;
        target.v0 = rng.uniform(cfg.speed_min_mps, cfg.speed_max_mps);
        target.x0 = rng.uniform(-5.0, 5.0);
        // lane chosen so the requested change is feasible
        long lane;
        if (lateral == 0) {
            lane = 1 + static_cast<long>(rng.below(cfg.lanes - 1 > 0 ? cfg.lanes - 1 : 1));
        } else if (lateral == 2) {
            lane = static_cast<long>(rng.below(cfg.lanes - 1 > 0 ? cfg.lanes - 1 : 1));
        } else {
            lane = static_cast<long>(rng.below(cfg.lanes));
        }
        if (cfg.lanes == 1) {
            lane = 0;
            lateral = 1;
            label = 2 + (braking ? 1 : 0);
        }
        target.lane_from = lane;
        target.lane_to = lane + (lateral == 0 ? -1 : lateral == 2 ? 1 : 0);
        // the lateral maneuver onset precedes the window end so the drift is
        // observable; the lane boundary is crossed shortly into the future
        target.lane_change_start_s = window_end_s - cfg.lane_change_lead_s;
        if (braking) {
            // margin vs the 0.8 labeling ratio: with onset 1 s before the
            // window end, mean future speed ratio is 1 + 3.5 a / v0 at the
            // 5 s horizon, so a in [-0.14, -0.10] v0 gives ratio <= 0.65
            target.brake_accel = -(0.10 + 0.04 * rng.uniform()) * target.v0;
            target.brake_from_s = window_end_s - cfg.brake_lead_s;
        } else {
            target.brake_from_s = 1e9;
        }

        SceneSample sample;
        sample.scene_id = static_cast<long>(sc);
        sample.label = label;
        sample.window.t_obs = cfg.t_obs;
        sample.window.frame_rate = cfg.frame_rate;

        long id_base = static_cast<long>(sc) * 100;
        long frame_base = static_cast<long>(sc) * 1000;

        TrajectoryTrack tgt_full;
        tgt_full.agent_id = id_base + 1;
        for (std::size_t f = 0; f < total_frames; ++f) {
            TrackPoint p = target.sample(static_cast<double>(f) * dt, dt);
            p.frame = frame_base + static_cast<long>(f);
            tgt_full.points.push_back(p);
        }
        sample.window.target.agent_id = tgt_full.agent_id;
        sample.window.target.points.assign(tgt_full.points.begin(),
                                           tgt_full.points.begin() + static_cast<long>(cfg.t_obs));
        sample.future = Tensor({cfg.t_f, 2});
        for (std::size_t f = 0; f < cfg.t_f; ++f) {
            sample.future.at(f, 0) = tgt_full.points[cfg.t_obs + f].x;
            sample.future.at(f, 1) = tgt_full.points[cfg.t_obs + f].y;
            sample.future_lanes.push_back(tgt_full.points[cfg.t_obs + f].lane);
        }

        std::size_t n_neighbors =
            cfg.neighbors_min +
            rng.below(cfg.neighbors_max - cfg.neighbors_min + 1);
        for (std::size_t nb = 0; nb < n_neighbors; ++nb) {
            detail::AgentPlan plan;
            plan.lane_width = cfg.lane_width_m;
            // traffic flows near the target's speed; also keeps neighbors
            // inside the longitudinal filter radius over the window
            plan.v0 = std::max(1.0, target.v0 + rng.uniform(-6.0, 6.0));
            double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            plan.x0 = target.x0 + sign * rng.uniform(8.0, 60.0);
            plan.lane_from = plan.lane_to = static_cast<long>(rng.below(cfg.lanes));
            plan.brake_from_s = 1e9;
            TrajectoryTrack nt;
            nt.agent_id = id_base + 2 + static_cast<long>(nb);
            for (std::size_t f = 0; f < cfg.t_obs; ++f) {
                TrackPoint p = plan.sample(static_cast<double>(f) * dt, dt);
                p.frame = frame_base + static_cast<long>(f);
                nt.points.push_back(p);
            }
            sample.window.neighbors.push_back(std::move(nt));
        }
        ds.scenes.push_back(std::move(sample));
    }

    // seeded split assignment
    std::vector<std::size_t> order(ds.scenes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng split_rng(Rng::mix(seed, 0x5117));
    split_rng.shuffle(order);
    std::size_t n_train = static_cast<std::size_t>(cfg.train_frac * double(order.size()));
    std::size_t n_val = static_cast<std::size_t>(cfg.val_frac * double(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
        ds.scenes[order[i]].split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    }
    return ds;
}

/// Missing-history ablation: delete a contiguous span of t_m seconds from
/// every agent's observed history at a seeded per-scene offset, then impute.
inline Dataset make_missing_subsets(const Dataset& ds, double t_m_seconds, std::uint64_t seed) {
    if (t_m_seconds < 0.0) throw std::invalid_argument("make_missing_subsets: negative t_m");
    double frames_f = t_m_seconds * ds.frame_rate;
    long k = std::lround(frames_f);
    if (std::abs(frames_f - static_cast<double>(k)) > 1e-9) {
        throw std::invalid_argument("make_missing_subsets: t_m * frame_rate must be an integer");
    }
    if (k >= static_cast<long>(ds.t_obs)) {
        throw std::invalid_argument("make_missing_subsets: t_m >= observation span");
    }
    Dataset out = ds;
    if (k == 0) return out;
    for (auto& s : out.scenes) {
        // one offset draw per scene: spans for increasing t_m stay anchored
        double u = Rng(Rng::mix(seed, static_cast<std::uint64_t>(s.scene_id))).uniform();
        long slots = static_cast<long>(ds.t_obs) - k + 1;
        long start_off = static_cast<long>(u * static_cast<double>(slots));
        if (start_off >= slots) start_off = slots - 1;
        long w0 = s.window.target.points.front().frame;
        auto degrade = [&](TrajectoryTrack& tr) { tr = impute_missing(tr, w0 + start_off, k); };
        degrade(s.window.target);
        for (auto& nb : s.window.neighbors) degrade(nb);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

using Track2d = std::vector<std::array<double, 2>>;

/// RMSE at one horizon frame: sqrt of the mean over samples of the squared
/// Euclidean error at that frame.
inline double rmse(const std::vector<Track2d>& preds, const std::vector<Track2d>& gts,
                   std::size_t horizon_frame) {
    if (preds.size() != gts.size()) throw std::invalid_argument("rmse: count mismatch");
    if (preds.empty()) throw std::invalid_argument("rmse: empty inputs");
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (horizon_frame >= preds[i].size() || horizon_frame >= gts[i].size()) {
            throw std::invalid_argument("rmse: horizon exceeds track length");
        }
        double dx = preds[i][horizon_frame][0] - gts[i][horizon_frame][0];
        double dy = preds[i][horizon_frame][1] - gts[i][horizon_frame][1];
        acc += dx * dx + dy * dy;
    }
    return std::sqrt(acc / static_cast<double>(preds.size()));
}

struct EvalReport {
    std::vector<double> horizon_s;     // 1..5
    std::vector<double> rmse_by_h;
    double avg = 0.0;
};

/// Per-second horizons 1..5 s plus their mean (the Table-1-style AVG).
inline EvalReport horizon_report(const std::vector<Track2d>& preds,
                                 const std::vector<Track2d>& gts, double frame_rate) {
    EvalReport r;
    for (int h = 1; h <= 5; ++h) {
        std::size_t frame = static_cast<std::size_t>(std::lround(h * frame_rate)) - 1;
        r.horizon_s.push_back(static_cast<double>(h));
        r.rmse_by_h.push_back(rmse(preds, gts, frame));
    }
    for (double v : r.rmse_by_h) r.avg += v;
    r.avg /= static_cast<double>(r.rmse_by_h.size());
    return r;
}

// ---------------------------------------------------------------------------
// Scene -> network input assembly
// ---------------------------------------------------------------------------

struct FeatureOptions {
    scene::SectorConfig sector = scene::SectorConfig::defaults();
    bool visual_pooling = true;  // ablation: identity weights when false
};

inline teacher::SceneInput make_scene_input(const SceneSample& s, const FeatureOptions& opt) {
    teacher::SceneInput in;
    scene::VisualVectors sv = scene::derive_visual_vectors(s.window);
    if (opt.visual_pooling) {
        scene::VisualWeightMatrix h = scene::visual_weight_matrix(s.window, opt.sector);
        sv = scene::apply_visual_pooling(h, sv);
    }
    in.s_tilde = std::move(sv.values);
    in.m = scene::derive_context_matrices(s.window).values;

    const auto& pts = s.window.target.points;
    double dt = 1.0 / s.window.frame_rate;
    in.anchor.dt = dt;
    in.anchor.x0 = pts.back().x;
    in.anchor.y0 = pts.back().y;
    if (pts.size() >= 2) {
        in.anchor.vx = (pts.back().x - pts[pts.size() - 2].x) / dt;
        in.anchor.vy = (pts.back().y - pts[pts.size() - 2].y) / dt;
    }
    return in;
}

inline Tensor one_hot(std::size_t label, std::size_t classes) {
    Tensor t({classes});
    t[label < classes ? label : classes - 1] = 1.0;
    return t;
}

/// Compose the target's full contiguous track (window + future) of a sample,
/// e.g. for label re-derivation.
inline TrajectoryTrack full_target_track(const SceneSample& s) {
    TrajectoryTrack t = s.window.target;
    long f0 = t.points.back().frame;
    for (std::size_t i = 0; i < s.future.shape[0]; ++i) {
        TrackPoint p;
        p.frame = f0 + 1 + static_cast<long>(i);
        p.x = s.future.at(i, 0);
        p.y = s.future.at(i, 1);
        p.lane = i < s.future_lanes.size() ? s.future_lanes[i] : -1;
        t.points.push_back(p);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Dataset manifest (versioned; lists split membership by scene id)
// ---------------------------------------------------------------------------

inline constexpr int kManifestVersion = 1;

/// Write tracks.csv + manifest.json into `dir`.
inline void write_dataset(const std::string& dir, const Dataset& ds, const std::string& digest,
                          std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    std::map<long, TrajectoryTrack> merged;
    for (const auto& s : ds.scenes) {
        TrajectoryTrack tgt = full_target_track(s);
        merged[tgt.agent_id] = tgt;
        for (const auto& nb : s.window.neighbors) merged[nb.agent_id] = nb;
    }
    std::vector<TrajectoryTrack> tracks;
    tracks.reserve(merged.size());
    for (auto& [id, tr] : merged) tracks.push_back(std::move(tr));
    write_tracks((std::filesystem::path(dir) / "tracks.csv").string(), tracks, digest, seed);

    nlohmann::json m;
    m["format_version"] = kManifestVersion;
    m["config_digest"] = digest;
    m["seed"] = seed;
    m["frame_rate_hz"] = ds.frame_rate;
    m["t_obs"] = ds.t_obs;
    m["t_f"] = ds.t_f;
    m["tracks_csv"] = "tracks.csv";
    nlohmann::json scenes = nlohmann::json::array();
    for (const auto& s : ds.scenes) {
        nlohmann::json row;
        row["id"] = s.scene_id;
        row["target"] = s.window.target.agent_id;
        row["frame_start"] = s.window.target.points.front().frame;
        row["label"] = s.label;
        row["split"] = s.split;
        scenes.push_back(row);
    }
    m["scenes"] = scenes;
    std::ofstream out(std::filesystem::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("write_dataset: cannot open manifest in " + dir);
    out << m.dump(2) << '\n';
}

/// Load a dataset from its manifest; windows are cut from the tracks CSV and
/// imputed onto the full span, neighbors filtered around the target.
inline Dataset load_dataset(const std::string& manifest_path, const ColumnMap& schema = {},
                            const scene::NeighborFilter& filter = {}) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + manifest_path);
    nlohmann::json m = nlohmann::json::parse(in);
    if (m.at("format_version").get<int>() != kManifestVersion) {
        throw std::runtime_error("load_dataset: unsupported manifest version");
    }
    Dataset ds;
    ds.frame_rate = m.at("frame_rate_hz").get<double>();
    ds.t_obs = m.at("t_obs").get<std::size_t>();
    ds.t_f = m.at("t_f").get<std::size_t>();

    auto csv_path = std::filesystem::path(manifest_path).parent_path() /
                    m.at("tracks_csv").get<std::string>();
    std::vector<TrajectoryTrack> tracks = load_tracks(csv_path.string(), schema);
    std::map<long, const TrajectoryTrack*> by_id;
    for (const auto& t : tracks) by_id[t.agent_id] = &t;

    for (const auto& row : m.at("scenes")) {
        SceneSample s;
        s.scene_id = row.at("id").get<long>();
        s.label = row.at("label").get<std::size_t>();
        s.split = row.at("split").get<std::string>();
        long target_id = row.at("target").get<long>();
        long f0 = row.at("frame_start").get<long>();
        long obs_end = f0 + static_cast<long>(ds.t_obs) - 1;

        auto it = by_id.find(target_id);
        if (it == by_id.end()) {
            throw std::runtime_error("load_dataset: missing target track " +
                                     std::to_string(target_id));
        }
        TrajectoryTrack full =
            impute_to_range(*it->second, f0, obs_end + static_cast<long>(ds.t_f));
        s.window.t_obs = ds.t_obs;
        s.window.frame_rate = ds.frame_rate;
        s.window.target.agent_id = target_id;
        s.window.target.points.assign(full.points.begin(),
                                      full.points.begin() + static_cast<long>(ds.t_obs));
        s.future = Tensor({ds.t_f, 2});
        for (std::size_t i = 0; i < ds.t_f; ++i) {
            s.future.at(i, 0) = full.points[ds.t_obs + i].x;
            s.future.at(i, 1) = full.points[ds.t_obs + i].y;
            s.future_lanes.push_back(full.points[ds.t_obs + i].lane);
        }

        std::vector<TrajectoryTrack> candidates;
        for (const auto& t : tracks) {
            if (t.agent_id == target_id) continue;
            // keep tracks with at least one observation inside the window
            bool covers = false;
            for (const auto& p : t.points) {
                if (p.frame >= f0 && p.frame <= obs_end) {
                    covers = true;
                    break;
                }
            }
            if (!covers) continue;
            TrajectoryTrack cut;
            cut.agent_id = t.agent_id;
            for (const auto& p : t.points) {
                if (p.frame >= f0 && p.frame <= obs_end) cut.points.push_back(p);
            }
            candidates.push_back(impute_to_range(cut, f0, obs_end));
        }
        for (std::size_t k : scene::select_neighbors(s.window.target, candidates, filter)) {
            s.window.neighbors.push_back(candidates[k]);
        }
        ds.scenes.push_back(std::move(s));
    }
    return ds;
}

}  // namespace spikecast::data
