// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "spikecast/data.hpp"

using namespace spikecast;
using namespace spikecast::data;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("spikecast_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

TEST(LoadTracks, EmptyFileWithHeader) {
    TempDir dir;
    write_file(dir.file("t.csv"), "vehicle_id,frame,local_x,local_y,lane_id\n");
    EXPECT_TRUE(load_tracks(dir.file("t.csv")).empty());
}

TEST(LoadTracks, GroupsByVehicle) {
    TempDir dir;
    write_file(dir.file("t.csv"),
               "vehicle_id,frame,local_x,local_y,lane_id\n"
               "1,0,0.0,0.0,1\n1,1,1.0,0.0,1\n1,2,2.0,0.0,1\n"
               "2,0,5.0,3.7,2\n2,1,6.0,3.7,2\n2,2,7.0,3.7,2\n");
    auto tracks = load_tracks(dir.file("t.csv"));
    ASSERT_EQ(tracks.size(), 2u);
    EXPECT_EQ(tracks[0].agent_id, 1);
    EXPECT_EQ(tracks[0].points.size(), 3u);
    EXPECT_EQ(tracks[1].points.size(), 3u);
    EXPECT_EQ(tracks[1].points[2].lane, 2);
}

TEST(LoadTracks, ShuffledRowsSortIdentically) {
    TempDir dir;
    write_file(dir.file("a.csv"),
               "vehicle_id,frame,local_x,local_y,lane_id\n"
               "1,0,0.0,0.0,1\n1,1,1.5,0.1,1\n1,2,2.5,0.2,1\n");
    write_file(dir.file("b.csv"),
               "vehicle_id,frame,local_x,local_y,lane_id\n"
               "1,2,2.5,0.2,1\n1,0,0.0,0.0,1\n1,1,1.5,0.1,1\n");
    auto a = load_tracks(dir.file("a.csv"));
    auto b = load_tracks(dir.file("b.csv"));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a[0].points.size(); ++i) {
        EXPECT_EQ(a[0].points[i].frame, b[0].points[i].frame);
        EXPECT_EQ(a[0].points[i].x, b[0].points[i].x);
    }
}

TEST(LoadTracks, MissingColumnNamesIt) {
    TempDir dir;
    write_file(dir.file("t.csv"), "vehicle_id,frame,local_x\n1,0,0.0\n");
    try {
        load_tracks(dir.file("t.csv"));
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("local_y"), std::string::npos);
    }
}

TEST(LoadTracks, UnparseableRowReportsLine) {
    TempDir dir;
    write_file(dir.file("t.csv"),
               "vehicle_id,frame,local_x,local_y,lane_id\n"
               "1,0,0.0,0.0,1\n"
               "1,1,not_a_number,0.0,1\n");
    try {
        load_tracks(dir.file("t.csv"));
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(LoadTracks, FeetToMetersFlag) {
    TempDir dir;
    write_file(dir.file("t.csv"), "vehicle_id,frame,local_x,local_y,lane_id\n1,0,10.0,0.0,1\n");
    ColumnMap schema;
    schema.feet_to_meters = true;
    auto tracks = load_tracks(dir.file("t.csv"), schema);
    EXPECT_NEAR(tracks[0].points[0].x, 3.048, 1e-12);
}

TEST(LoadTracks, RoundTripIsExact) {
    Rng rng(7);
    std::vector<TrajectoryTrack> tracks(3);
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        tracks[i].agent_id = static_cast<long>(i + 1);
        for (long f = 0; f < 5; ++f) {
            tracks[i].points.push_back(
                {f, rng.normal(0, 100), rng.normal(0, 10), static_cast<int>(i)});
        }
    }
    TempDir dir;
    write_tracks(dir.file("t.csv"), tracks, "deadbeef", 42);
    auto loaded = load_tracks(dir.file("t.csv"));
    ASSERT_EQ(loaded.size(), tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        for (std::size_t j = 0; j < tracks[i].points.size(); ++j) {
            EXPECT_EQ(loaded[i].points[j].x, tracks[i].points[j].x);  // bit-exact via %.17g
            EXPECT_EQ(loaded[i].points[j].y, tracks[i].points[j].y);
            EXPECT_EQ(loaded[i].points[j].lane, tracks[i].points[j].lane);
        }
    }
}

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

TEST(Impute, LinearMidpoint) {
    TrajectoryTrack t;
    t.agent_id = 1;
    t.points = {{0, 0.0, 0.0, 1}, {2, 2.0, 2.0, 1}};
    TrajectoryTrack full = impute_to_range(t, 0, 2);
    ASSERT_EQ(full.points.size(), 3u);
    EXPECT_DOUBLE_EQ(full.points[1].x, 1.0);
    EXPECT_DOUBLE_EQ(full.points[1].y, 1.0);
}

TEST(Impute, NoMissingFramesIsIdentity) {
    TrajectoryTrack t;
    t.agent_id = 1;
    t.points = {{0, 0.5, 0.1, 1}, {1, 1.5, 0.2, 1}, {2, 2.5, 0.3, 1}};
    TrajectoryTrack same = impute_missing(t, 10, 0);
    ASSERT_EQ(same.points.size(), t.points.size());
    for (std::size_t i = 0; i < t.points.size(); ++i) {
        EXPECT_EQ(same.points[i].x, t.points[i].x);
    }
}

TEST(Impute, LeadingGapReplicatesFirstKnown) {
    TrajectoryTrack t;
    t.agent_id = 1;
    t.points = {{2, 3.0, 4.0, 1}, {3, 5.0, 6.0, 1}};
    TrajectoryTrack full = impute_to_range(t, 0, 3);
    ASSERT_EQ(full.points.size(), 4u);
    EXPECT_DOUBLE_EQ(full.points[0].x, 3.0);
    EXPECT_DOUBLE_EQ(full.points[0].y, 4.0);
    EXPECT_DOUBLE_EQ(full.points[1].x, 3.0);
}

TEST(Impute, TrailingGapReplicatesLastKnown) {
    TrajectoryTrack t;
    t.agent_id = 1;
    t.points = {{0, 1.0, 2.0, 1}};
    TrajectoryTrack full = impute_to_range(t, 0, 2);
    EXPECT_DOUBLE_EQ(full.points[2].x, 1.0);
    EXPECT_DOUBLE_EQ(full.points[2].y, 2.0);
}

TEST(Impute, ExactOnAffineTracks) {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        double x0 = rng.normal(0, 10), vx = rng.normal(0, 5);
        double y0 = rng.normal(0, 3), vy = rng.normal(0, 1);
        TrajectoryTrack t;
        t.agent_id = 1;
        for (long f = 0; f <= 20; ++f) {
            t.points.push_back({f, x0 + vx * f, y0 + vy * f, 0});
        }
        long start = 3 + static_cast<long>(rng.below(10));
        long count = 1 + static_cast<long>(rng.below(6));
        TrajectoryTrack imputed = impute_missing(t, start, count);
        ASSERT_EQ(imputed.points.size(), t.points.size());
        for (std::size_t i = 0; i < t.points.size(); ++i) {
            EXPECT_NEAR(imputed.points[i].x, t.points[i].x, 1e-12);
            EXPECT_NEAR(imputed.points[i].y, t.points[i].y, 1e-12);
        }
    }
}

TEST(Impute, FullyMissingTrackIsError) {
    TrajectoryTrack t;
    EXPECT_THROW(impute_to_range(t, 0, 3), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

namespace {

TrajectoryTrack straight_track(double speed, long frames, double dt = 0.2) {
    TrajectoryTrack t;
    t.agent_id = 1;
    for (long f = 0; f < frames; ++f) t.points.push_back({f, speed * dt * f, 0.0, 1});
    return t;
}

}  // namespace

TEST(LabelManeuvers, ConstantVelocityIsKeepNormal) {
    TrajectoryTrack t = straight_track(20.0, 41);
    EXPECT_EQ(label_maneuvers(t, 15, 25, 5.0), 2u);  // keep * 2 + normal
}

TEST(LabelManeuvers, LaneDecreaseIsLeftChange) {
    TrajectoryTrack t = straight_track(20.0, 41);
    for (std::size_t i = 25; i < t.points.size(); ++i) {
        t.points[i].lane = 0;
        t.points[i].y = -3.7;
    }
    EXPECT_EQ(label_maneuvers(t, 15, 25, 5.0), 0u);  // left * 2 + normal
}

TEST(LabelManeuvers, HalvedFutureSpeedIsBraking) {
    TrajectoryTrack t;
    t.agent_id = 1;
    double x = 0.0;
    for (long f = 0; f < 41; ++f) {
        double v = f <= 15 ? 20.0 : 10.0;  // future mean speed = 0.5x current
        t.points.push_back({f, x, 0.0, 1});
        x += v * 0.2;
    }
    EXPECT_EQ(label_maneuvers(t, 15, 25, 5.0), 3u);  // keep * 2 + braking
}

TEST(LabelManeuvers, HorizonBeyondTrackIsError) {
    TrajectoryTrack t = straight_track(20.0, 20);
    EXPECT_THROW(label_maneuvers(t, 15, 25, 5.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

TEST(GenSynthetic, PureKeepMixLabelsEveryScene) {
    GenConfig cfg;
    cfg.scenes = 10;
    cfg.maneuver_mix = {0, 0, 1, 0, 0, 0};
    Dataset ds = gen_synthetic(cfg, 5);
    for (const auto& s : ds.scenes) EXPECT_EQ(s.label, 2u);
}

TEST(GenSynthetic, DeterministicPerSeed) {
    GenConfig cfg;
    cfg.scenes = 6;
    Dataset a = gen_synthetic(cfg, 9);
    Dataset b = gen_synthetic(cfg, 9);
    ASSERT_EQ(a.scenes.size(), b.scenes.size());
    for (std::size_t i = 0; i < a.scenes.size(); ++i) {
        EXPECT_EQ(a.scenes[i].label, b.scenes[i].label);
        EXPECT_EQ(a.scenes[i].split, b.scenes[i].split);
        EXPECT_EQ(a.scenes[i].window.target.points.size(),
                  b.scenes[i].window.target.points.size());
        for (std::size_t f = 0; f < a.scenes[i].window.target.points.size(); ++f) {
            EXPECT_EQ(a.scenes[i].window.target.points[f].x,
                      b.scenes[i].window.target.points[f].x);
        }
        EXPECT_EQ(a.scenes[i].future.data, b.scenes[i].future.data);
    }
}

TEST(GenSynthetic, VelocityJumpsStayUnderAccelBound) {
    GenConfig cfg;
    cfg.scenes = 20;
    Dataset ds = gen_synthetic(cfg, 11);
    double dt = 1.0 / cfg.frame_rate;
    for (const auto& s : ds.scenes) {
        TrajectoryTrack full = full_target_track(s);
        for (std::size_t f = 2; f < full.points.size(); ++f) {
            double vx1 = (full.points[f - 1].x - full.points[f - 2].x) / dt;
            double vy1 = (full.points[f - 1].y - full.points[f - 2].y) / dt;
            double vx2 = (full.points[f].x - full.points[f - 1].x) / dt;
            double vy2 = (full.points[f].y - full.points[f - 1].y) / dt;
            double jump = std::hypot(vx2 - vx1, vy2 - vy1);
            EXPECT_LT(jump, cfg.accel_bound_mps2 * dt + 1e-9);
        }
    }
}

TEST(GenSynthetic, ZeroLanesIsError) {
    GenConfig cfg;
    cfg.lanes = 0;
    EXPECT_THROW(gen_synthetic(cfg, 1), std::invalid_argument);
}

TEST(GenSynthetic, LabelsAgreeWithRederivation) {
    GenConfig cfg;
    cfg.scenes = 200;
    Dataset ds = gen_synthetic(cfg, 13);
    std::size_t agree = 0;
    for (const auto& s : ds.scenes) {
        TrajectoryTrack full = full_target_track(s);
        long end = s.window.target.points.back().frame;
        std::size_t derived = label_maneuvers(full, end, static_cast<long>(ds.t_f), ds.frame_rate);
        if (derived == s.label) ++agree;
    }
    EXPECT_GE(agree * 100, ds.scenes.size() * 99)
        << "agreement " << agree << "/" << ds.scenes.size();
}

TEST(GenSynthetic, SplitFractionsRoughlyHonored) {
    GenConfig cfg;
    cfg.scenes = 100;
    Dataset ds = gen_synthetic(cfg, 17);
    EXPECT_EQ(ds.split("train").size(), 70u);
    EXPECT_EQ(ds.split("val").size(), 10u);
    EXPECT_EQ(ds.split("test").size(), 20u);
}

// ---------------------------------------------------------------------------
// Missing-data protocol
// ---------------------------------------------------------------------------

namespace {

Dataset quadratic_dataset() {
    // curvature makes deleted-and-imputed frames detectable
    Dataset ds;
    ds.t_obs = 10;
    ds.t_f = 5;
    ds.frame_rate = 5.0;
    SceneSample s;
    s.scene_id = 0;
    s.window.t_obs = 10;
    s.window.frame_rate = 5.0;
    s.window.target.agent_id = 1;
    for (long f = 0; f < 10; ++f) {
        s.window.target.points.push_back({f, 0.02 * double(f) * double(f), 0.0, 1});
    }
    s.future = Tensor({5, 2});
    ds.scenes.push_back(s);
    return ds;
}

}  // namespace

TEST(MissingSubsets, ZeroDurationIsIdentity) {
    Dataset ds = quadratic_dataset();
    Dataset out = make_missing_subsets(ds, 0.0, 3);
    EXPECT_EQ(out.scenes[0].window.target.points[4].x, ds.scenes[0].window.target.points[4].x);
}

TEST(MissingSubsets, PointFourSecondsReplacesExactlyTwoFrames) {
    Dataset ds = quadratic_dataset();
    Dataset out = make_missing_subsets(ds, 0.4, 3);
    std::size_t changed = 0;
    for (std::size_t f = 0; f < 10; ++f) {
        if (out.scenes[0].window.target.points[f].x != ds.scenes[0].window.target.points[f].x) {
            ++changed;
        }
    }
    EXPECT_EQ(changed, 2u);
}

TEST(MissingSubsets, NonIntegerFrameCountIsError) {
    Dataset ds = quadratic_dataset();
    EXPECT_THROW(make_missing_subsets(ds, 0.3, 3), std::invalid_argument);
}

TEST(MissingSubsets, DurationBeyondWindowIsError) {
    Dataset ds = quadratic_dataset();  // 10 frames = 2 s window
    EXPECT_THROW(make_missing_subsets(ds, 2.0, 3), std::invalid_argument);
}

TEST(MissingSubsets, DeterministicPerSeed) {
    GenConfig cfg;
    cfg.scenes = 5;
    Dataset ds = gen_synthetic(cfg, 23);
    Dataset a = make_missing_subsets(ds, 0.8, 7);
    Dataset b = make_missing_subsets(ds, 0.8, 7);
    for (std::size_t i = 0; i < a.scenes.size(); ++i) {
        for (std::size_t f = 0; f < a.scenes[i].window.target.points.size(); ++f) {
            EXPECT_EQ(a.scenes[i].window.target.points[f].x,
                      b.scenes[i].window.target.points[f].x);
        }
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

TEST(Rmse, PerfectPredictionIsZero) {
    std::vector<Track2d> t = {{{0, 0}, {1, 1}}, {{2, 2}, {3, 3}}};
    EXPECT_DOUBLE_EQ(rmse(t, t, 1), 0.0);
}

TEST(Rmse, ThreeFourFiveTriangle) {
    std::vector<Track2d> gts = {{{0, 0}}, {{5, 5}}};
    std::vector<Track2d> preds = {{{3, 4}}, {{8, 9}}};
    EXPECT_DOUBLE_EQ(rmse(preds, gts, 0), 5.0);
}

TEST(Rmse, MatchesHandSummedValue) {
    std::vector<Track2d> gts = {{{0, 0}}, {{1, 0}}, {{0, 2}}, {{1, 1}}};
    std::vector<Track2d> preds = {{{1, 0}}, {{1, 1}}, {{2, 2}}, {{1, 1}}};
    // squared errors: 1, 1, 4, 0 -> mean 1.5
    EXPECT_DOUBLE_EQ(rmse(preds, gts, 0), std::sqrt(1.5));
}

TEST(Rmse, CountMismatchIsError) {
    std::vector<Track2d> a(2, Track2d{{0, 0}});
    std::vector<Track2d> b(3, Track2d{{0, 0}});
    EXPECT_THROW(rmse(a, b, 0), std::invalid_argument);
}

TEST(Rmse, NonNegativeAndZeroOnlyAtEquality) {
    Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Track2d> gts(3), preds(3);
        bool equal = true;
        for (auto& t : gts) t = {{rng.normal(), rng.normal()}};
        for (std::size_t i = 0; i < 3; ++i) {
            preds[i] = gts[i];
            if (rng.uniform() < 0.5) {
                preds[i][0][0] += rng.uniform(0.1, 1.0);
                equal = false;
            }
        }
        double r = rmse(preds, gts, 0);
        EXPECT_GE(r, 0.0);
        EXPECT_EQ(r == 0.0, equal);
    }
}

TEST(HorizonReport, FiveHorizonsPlusAverage) {
    Rng rng(31);
    std::vector<Track2d> gts(4), preds(4);
    for (std::size_t i = 0; i < 4; ++i) {
        for (int f = 0; f < 25; ++f) {
            gts[i].push_back({rng.normal(), rng.normal()});
            preds[i].push_back({rng.normal(), rng.normal()});
        }
    }
    EvalReport rep = horizon_report(preds, gts, 5.0);
    ASSERT_EQ(rep.rmse_by_h.size(), 5u);
    double mean = 0.0;
    for (double v : rep.rmse_by_h) mean += v;
    EXPECT_DOUBLE_EQ(rep.avg, mean / 5.0);
}

// ---------------------------------------------------------------------------
// Manifest round-trip
// ---------------------------------------------------------------------------

TEST(Manifest, WriteLoadRoundTrip) {
    GenConfig cfg;
    cfg.scenes = 8;
    Dataset ds = gen_synthetic(cfg, 37);
    TempDir dir;
    write_dataset(dir.path.string(), ds, "cafef00d", 37);
    Dataset loaded = load_dataset(dir.file("manifest.json"));
    ASSERT_EQ(loaded.scenes.size(), ds.scenes.size());
    EXPECT_EQ(loaded.t_obs, ds.t_obs);
    EXPECT_EQ(loaded.t_f, ds.t_f);
    for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
        const auto& a = ds.scenes[i];
        const auto& b = loaded.scenes[i];
        EXPECT_EQ(a.label, b.label);
        EXPECT_EQ(a.split, b.split);
        ASSERT_EQ(a.window.neighbors.size(), b.window.neighbors.size()) << "scene " << i;
        for (std::size_t f = 0; f < a.window.target.points.size(); ++f) {
            EXPECT_EQ(a.window.target.points[f].x, b.window.target.points[f].x);
            EXPECT_EQ(a.window.target.points[f].y, b.window.target.points[f].y);
        }
        EXPECT_EQ(a.future.data, b.future.data);
        for (std::size_t n = 0; n < a.window.neighbors.size(); ++n) {
            EXPECT_EQ(a.window.neighbors[n].agent_id, b.window.neighbors[n].agent_id);
            for (std::size_t f = 0; f < a.window.neighbors[n].points.size(); ++f) {
                EXPECT_EQ(a.window.neighbors[n].points[f].x, b.window.neighbors[n].points[f].x);
            }
        }
    }
}

TEST(Manifest, OneHotClampsOutOfRange) {
    Tensor t = one_hot(9, 6);
    EXPECT_EQ(t[5], 1.0);
}
