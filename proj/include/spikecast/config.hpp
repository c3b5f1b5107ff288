// SPDX-License-Identifier: Apache-2.0
#pragma once

// One declarative config document for the whole pipeline. Unknown keys are
// rejected; the digest is a content hash of the fully-expanded document, so
// it is stable under key reordering and records exactly what ran.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "spikecast/data.hpp"
#include "spikecast/scene.hpp"
#include "spikecast/student.hpp"
#include "spikecast/teacher.hpp"
#include "spikecast/train.hpp"

namespace spikecast::cfg {

using nlohmann::json;

struct RunConfig {
    std::uint64_t seed = 1;

    // scene / visual sector
    std::vector<double> band_edges_kmh = {0.0, 30.0, 60.0, 90.0};
    std::vector<double> half_angles_deg = {60.0, 40.0, 25.0, 15.0};
    double in_sector_weight = 1.0;
    double peripheral_weight = 0.5;
    bool visual_pooling = true;
    double neighbor_radius_m = 90.0;
    int neighbor_lane_band = 2;

    teacher::TeacherConfig teacher;
    student::StudentConfig student;

    // training
    std::size_t batch_size = 256;
    std::size_t teacher_epochs = 100;
    std::size_t student_epochs = 100;
    double grad_clip = 10.0;
    bool kdm = true;
    bool mixture_nll = false;
    train::ScheduleConfig sched;

    data::GenConfig gen;

    // data loading
    data::ColumnMap columns;

    // evaluation
    bool mixture_mean = false;

    scene::SectorConfig sector_config() const {
        if (band_edges_kmh.size() != half_angles_deg.size() || band_edges_kmh.empty()) {
            throw std::invalid_argument("config: band_edges/half_angles length mismatch");
        }
        scene::SectorConfig sc;
        for (std::size_t i = 0; i < band_edges_kmh.size(); ++i) {
            scene::SectorBand b;
            b.lo_kmh = band_edges_kmh[i];
            b.hi_kmh = i + 1 < band_edges_kmh.size() ? band_edges_kmh[i + 1]
                                                     : std::numeric_limits<double>::infinity();
            b.half_angle_deg = half_angles_deg[i];
            b.in_weight = in_sector_weight;
            b.peripheral_weight = peripheral_weight;
            sc.bands.push_back(b);
        }
        sc.validate();
        return sc;
    }

    data::FeatureOptions feature_options() const {
        data::FeatureOptions f;
        f.sector = sector_config();
        f.visual_pooling = visual_pooling;
        return f;
    }

    scene::NeighborFilter neighbor_filter() const {
        scene::NeighborFilter f;
        f.longitudinal_radius_m = neighbor_radius_m;
        f.lane_band = neighbor_lane_band;
        return f;
    }

    train::TrainOptions teacher_train_options() const {
        train::TrainOptions t;
        t.epochs = teacher_epochs;
        t.batch_size = batch_size;
        t.grad_clip = grad_clip;
        t.mixture_nll = mixture_nll;
        t.sched = sched;
        t.seed = seed;
        return t;
    }

    train::TrainOptions student_train_options() const {
        train::TrainOptions t = teacher_train_options();
        t.epochs = student_epochs;
        t.kdm = kdm;
        return t;
    }

    /// Fully-expanded document (defaults merged in canonical key order).
    json to_json() const {
        json j;
        j["seed"] = seed;
        j["scene"] = {{"band_edges_kmh", band_edges_kmh},
                      {"half_angles_deg", half_angles_deg},
                      {"in_sector_weight", in_sector_weight},
                      {"peripheral_weight", peripheral_weight},
                      {"visual_pooling", visual_pooling},
                      {"neighbor_radius_m", neighbor_radius_m},
                      {"neighbor_lane_band", neighbor_lane_band}};
        j["teacher"] = {{"hidden_dim", teacher.hidden_dim},
                        {"heads", teacher.heads},
                        {"maneuvers", teacher.maneuvers},
                        {"t_obs", teacher.t_obs},
                        {"t_f", teacher.t_f},
                        {"dropout", teacher.dropout},
                        {"decoder_hidden", teacher.decoder_hidden},
                        {"ffn_dim", teacher.ffn_dim},
                        {"fuse_key_dim", teacher.fuse_key_dim},
                        {"use_spatial", teacher.use_spatial},
                        {"use_fusion", teacher.use_fusion}};
        j["student"] = {{"t_obs", student.t_obs},
                        {"neurons", student.neurons},
                        {"decoder_hidden", student.decoder_hidden},
                        {"leak_rate", student.leak_rate},
                        {"adaptive_threshold", student.adaptive_threshold},
                        {"fourier_features", student.fourier_features}};
        j["train"] = {{"batch_size", batch_size},
                      {"teacher_epochs", teacher_epochs},
                      {"student_epochs", student_epochs},
                      {"grad_clip", grad_clip},
                      {"kdm", kdm},
                      {"mixture_nll", mixture_nll},
                      {"lr_max", sched.lr_max},
                      {"lr_min", sched.lr_min},
                      {"restart_period", sched.restart_period},
                      {"restart_mult", sched.restart_mult}};
        j["data"] = {{"scenes", gen.scenes},
                     {"lanes", gen.lanes},
                     {"lane_width_m", gen.lane_width_m},
                     {"speed_min_mps", gen.speed_min_mps},
                     {"speed_max_mps", gen.speed_max_mps},
                     {"neighbors_min", gen.neighbors_min},
                     {"neighbors_max", gen.neighbors_max},
                     {"accel_bound_mps2", gen.accel_bound_mps2},
                     {"maneuver_mix", gen.maneuver_mix},
                     {"train_frac", gen.train_frac},
                     {"val_frac", gen.val_frac},
                     {"frame_rate_hz", gen.frame_rate},
                     {"feet_to_meters", columns.feet_to_meters},
                     {"columns",
                      {{"vehicle_id", columns.vehicle_id},
                       {"frame", columns.frame},
                       {"x", columns.x},
                       {"y", columns.y},
                       {"lane", columns.lane}}}};
        j["eval"] = {{"mixture_mean", mixture_mean}};
        return j;
    }

    /// FNV-1a over the canonical dump, as a 16-hex-digit string.
    std::string digest() const {
        std::string s = to_json().dump();
        std::uint64_t h = 14695981039346656037ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

namespace detail {

inline void reject_unknown(const json& j, const std::vector<std::string>& known,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) ok = ok || it.key() == k;
        if (!ok) {
            throw std::invalid_argument("config: unknown key '" + where + it.key() + "'");
        }
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

/// Parse a config document over defaults. Unknown keys anywhere are errors.
inline RunConfig from_json(const json& j) {
    RunConfig c;
    detail::reject_unknown(j, {"seed", "scene", "teacher", "student", "train", "data", "eval"},
                           "");
    detail::maybe(j, "seed", c.seed);
    if (j.contains("scene")) {
        const json& s = j.at("scene");
        detail::reject_unknown(s,
                               {"band_edges_kmh", "half_angles_deg", "in_sector_weight",
                                "peripheral_weight", "visual_pooling", "neighbor_radius_m",
                                "neighbor_lane_band"},
                               "scene.");
        detail::maybe(s, "band_edges_kmh", c.band_edges_kmh);
        detail::maybe(s, "half_angles_deg", c.half_angles_deg);
        detail::maybe(s, "in_sector_weight", c.in_sector_weight);
        detail::maybe(s, "peripheral_weight", c.peripheral_weight);
        detail::maybe(s, "visual_pooling", c.visual_pooling);
        detail::maybe(s, "neighbor_radius_m", c.neighbor_radius_m);
        detail::maybe(s, "neighbor_lane_band", c.neighbor_lane_band);
    }
    if (j.contains("teacher")) {
        const json& t = j.at("teacher");
        detail::reject_unknown(t,
                               {"hidden_dim", "heads", "maneuvers", "t_obs", "t_f", "dropout",
                                "decoder_hidden", "ffn_dim", "fuse_key_dim", "use_spatial",
                                "use_fusion"},
                               "teacher.");
        detail::maybe(t, "hidden_dim", c.teacher.hidden_dim);
        detail::maybe(t, "heads", c.teacher.heads);
        detail::maybe(t, "maneuvers", c.teacher.maneuvers);
        detail::maybe(t, "t_obs", c.teacher.t_obs);
        detail::maybe(t, "t_f", c.teacher.t_f);
        detail::maybe(t, "dropout", c.teacher.dropout);
        detail::maybe(t, "decoder_hidden", c.teacher.decoder_hidden);
        detail::maybe(t, "ffn_dim", c.teacher.ffn_dim);
        detail::maybe(t, "fuse_key_dim", c.teacher.fuse_key_dim);
        detail::maybe(t, "use_spatial", c.teacher.use_spatial);
        detail::maybe(t, "use_fusion", c.teacher.use_fusion);
    }
    if (j.contains("student")) {
        const json& s = j.at("student");
        detail::reject_unknown(s,
                               {"t_obs", "neurons", "decoder_hidden", "leak_rate",
                                "adaptive_threshold", "fourier_features"},
                               "student.");
        detail::maybe(s, "t_obs", c.student.t_obs);
        detail::maybe(s, "neurons", c.student.neurons);
        detail::maybe(s, "decoder_hidden", c.student.decoder_hidden);
        detail::maybe(s, "leak_rate", c.student.leak_rate);
        detail::maybe(s, "adaptive_threshold", c.student.adaptive_threshold);
        detail::maybe(s, "fourier_features", c.student.fourier_features);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        detail::reject_unknown(t,
                               {"batch_size", "teacher_epochs", "student_epochs", "grad_clip",
                                "kdm", "mixture_nll", "lr_max", "lr_min", "restart_period",
                                "restart_mult"},
                               "train.");
        detail::maybe(t, "batch_size", c.batch_size);
        detail::maybe(t, "teacher_epochs", c.teacher_epochs);
        detail::maybe(t, "student_epochs", c.student_epochs);
        detail::maybe(t, "grad_clip", c.grad_clip);
        detail::maybe(t, "kdm", c.kdm);
        detail::maybe(t, "mixture_nll", c.mixture_nll);
        detail::maybe(t, "lr_max", c.sched.lr_max);
        detail::maybe(t, "lr_min", c.sched.lr_min);
        detail::maybe(t, "restart_period", c.sched.restart_period);
        detail::maybe(t, "restart_mult", c.sched.restart_mult);
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        detail::reject_unknown(d,
                               {"scenes", "lanes", "lane_width_m", "speed_min_mps",
                                "speed_max_mps", "neighbors_min", "neighbors_max",
                                "accel_bound_mps2", "maneuver_mix", "train_frac", "val_frac",
                                "frame_rate_hz", "feet_to_meters", "columns"},
                               "data.");
        detail::maybe(d, "scenes", c.gen.scenes);
        detail::maybe(d, "lanes", c.gen.lanes);
        detail::maybe(d, "lane_width_m", c.gen.lane_width_m);
        detail::maybe(d, "speed_min_mps", c.gen.speed_min_mps);
        detail::maybe(d, "speed_max_mps", c.gen.speed_max_mps);
        detail::maybe(d, "neighbors_min", c.gen.neighbors_min);
        detail::maybe(d, "neighbors_max", c.gen.neighbors_max);
        detail::maybe(d, "accel_bound_mps2", c.gen.accel_bound_mps2);
        detail::maybe(d, "maneuver_mix", c.gen.maneuver_mix);
        detail::maybe(d, "train_frac", c.gen.train_frac);
        detail::maybe(d, "val_frac", c.gen.val_frac);
        detail::maybe(d, "frame_rate_hz", c.gen.frame_rate);
        detail::maybe(d, "feet_to_meters", c.columns.feet_to_meters);
        if (d.contains("columns")) {
            const json& cols = d.at("columns");
            detail::reject_unknown(cols, {"vehicle_id", "frame", "x", "y", "lane"},
                                   "data.columns.");
            detail::maybe(cols, "vehicle_id", c.columns.vehicle_id);
            detail::maybe(cols, "frame", c.columns.frame);
            detail::maybe(cols, "x", c.columns.x);
            detail::maybe(cols, "y", c.columns.y);
            detail::maybe(cols, "lane", c.columns.lane);
        }
    }
    if (j.contains("eval")) {
        detail::reject_unknown(j.at("eval"), {"mixture_mean"}, "eval.");
        detail::maybe(j.at("eval"), "mixture_mean", c.mixture_mean);
    }
    // window geometry is shared between data generation and the networks
    c.gen.t_obs = c.teacher.t_obs;
    c.gen.t_f = c.teacher.t_f;
    c.student.maneuvers = c.teacher.maneuvers;
    c.student.t_f = c.teacher.t_f;
    c.teacher.validate();
    c.student.validate();
    c.sched.validate();
    c.sector_config();
    return c;
}

inline RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return from_json(json::parse(in));
}

inline RunConfig defaults() { return from_json(json::object()); }

}  // namespace spikecast::cfg
