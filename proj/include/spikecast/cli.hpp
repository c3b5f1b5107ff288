// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line surface: gen / train-teacher / train-student / eval / ablate /
// plot. Every output embeds the config digest and seed; identical digests and
// seeds produce byte-identical files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "spikecast/config.hpp"
#include "spikecast/data.hpp"
#include "spikecast/student.hpp"
#include "spikecast/svg.hpp"
#include "spikecast/teacher.hpp"
#include "spikecast/train.hpp"

namespace spikecast::cli {

namespace fs = std::filesystem;

inline constexpr std::uint32_t kRoleTeacher = 0;
inline constexpr std::uint32_t kRoleStudent = 1;

namespace detail {

struct Context {
    cfg::RunConfig config;
    std::uint64_t seed = 1;
    std::string digest;
    fs::path out;
};

inline Context make_context(const std::string& config_path, std::optional<std::uint64_t> seed,
                            const std::string& out_dir) {
    Context ctx;
    ctx.config = config_path.empty() ? cfg::defaults() : cfg::load(config_path);
    if (seed) ctx.config.seed = *seed;
    ctx.seed = ctx.config.seed;
    ctx.digest = ctx.config.digest();
    ctx.out = out_dir;
    fs::create_directories(ctx.out);
    return ctx;
}

inline data::Dataset obtain_dataset(const Context& ctx, const std::string& data_path) {
    if (data_path.empty()) {
        return data::gen_synthetic(ctx.config.gen, ctx.seed);
    }
    return data::load_dataset(data_path, ctx.config.columns, ctx.config.neighbor_filter());
}

inline void write_eval_csv(const fs::path& path, const data::EvalReport& rep,
                           const std::string& digest, std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("eval: cannot open " + path.string());
    out << "# config_digest=" << digest << " seed=" << seed << "\n";
    out << "horizon_s,rmse\n";
    for (std::size_t i = 0; i < rep.horizon_s.size(); ++i) {
        out << static_cast<int>(rep.horizon_s[i]) << ',' << data::detail::fmt_double(rep.rmse_by_h[i])
            << '\n';
    }
    out << "AVG," << data::detail::fmt_double(rep.avg) << '\n';
}

struct TrainedPair {
    std::unique_ptr<teacher::TeacherNet> teacher_net;
    std::unique_ptr<student::StudentNet> student_net;
    data::EvalReport student_test;
};

/// Train teacher then student under one (possibly variant) config and report
/// the student's test-split RMSE. Used by the ablation suites.
inline TrainedPair run_pair(const cfg::RunConfig& c, const data::Dataset& ds,
                            std::uint64_t seed) {
    TrainedPair out;
    data::FeatureOptions fopt = c.feature_options();
    out.teacher_net = std::make_unique<teacher::TeacherNet>(c.teacher, seed);
    train::TrainOptions topt = c.teacher_train_options();
    topt.seed = seed;
    train::train_teacher(ds, *out.teacher_net, fopt, topt);
    out.student_net = std::make_unique<student::StudentNet>(c.student, seed);
    train::TrainOptions sopt = c.student_train_options();
    sopt.seed = seed;
    train::train_student(ds, *out.teacher_net, *out.student_net, fopt, sopt);
    out.student_test =
        train::evaluate(ds, "test", train::student_predictor(*out.student_net, fopt),
                        c.mixture_mean);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_gen(const detail::Context& ctx) {
    data::Dataset ds = data::gen_synthetic(ctx.config.gen, ctx.seed);
    fs::path dir = ctx.out / "dataset";
    data::write_dataset(dir.string(), ds, ctx.digest, ctx.seed);
    std::cout << "wrote " << (dir / "manifest.json").string() << " (" << ds.scenes.size()
              << " scenes)\n";
    return 0;
}

inline int cmd_train_teacher(const detail::Context& ctx, const std::string& data_path) {
    data::Dataset ds = detail::obtain_dataset(ctx, data_path);
    teacher::TeacherNet net(ctx.config.teacher, ctx.seed);
    train::MetricsWriter mw((ctx.out / "teacher_metrics.csv").string(), ctx.digest, ctx.seed);
    train::TeacherTrainResult res =
        train::train_teacher(ds, net, ctx.config.feature_options(),
                             ctx.config.teacher_train_options(), &mw);
    train::Checkpoint ckpt = train::make_checkpoint(kRoleTeacher, res.epochs, ctx.digest,
                                                    net.params, res.adam, nullptr);
    fs::path path = ctx.out / "teacher.ckpt";
    ckpt.save(path.string());
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

inline int cmd_train_student(const detail::Context& ctx, const std::string& data_path,
                             const std::string& teacher_path, bool no_kdm) {
    if (teacher_path.empty()) {
        throw std::invalid_argument("train-student: --teacher checkpoint is required");
    }
    train::Checkpoint tc = train::Checkpoint::load(teacher_path);
    if (static_cast<std::uint32_t>(tc.require("meta/role")[0]) != kRoleTeacher) {
        throw std::runtime_error("train-student: checkpoint is not a teacher");
    }
    if (tc.digest != ctx.digest) {
        throw std::runtime_error("train-student: teacher config digest " + tc.digest +
                                 " does not match config " + ctx.digest);
    }
    data::Dataset ds = detail::obtain_dataset(ctx, data_path);
    teacher::TeacherNet tnet(ctx.config.teacher, ctx.seed);
    train::restore_params(tc, tnet.params, nullptr, nullptr);

    student::StudentNet snet(ctx.config.student, ctx.seed);
    train::TrainOptions sopt = ctx.config.student_train_options();
    if (no_kdm) sopt.kdm = false;
    train::MetricsWriter mw((ctx.out / "student_metrics.csv").string(), ctx.digest, ctx.seed);
    train::StudentTrainResult res =
        train::train_student(ds, tnet, snet, ctx.config.feature_options(), sopt, &mw);
    train::Checkpoint ckpt = train::make_checkpoint(kRoleStudent, res.epochs, ctx.digest,
                                                    snet.params, res.adam, &res.kdm);
    fs::path path = ctx.out / "student.ckpt";
    ckpt.save(path.string());
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

inline int cmd_eval(const detail::Context& ctx, const std::string& data_path,
                    const std::string& ckpt_path, const std::string& split, double missing_tm,
                    bool plot, bool force) {
    if (ckpt_path.empty()) throw std::invalid_argument("eval: --checkpoint is required");
    train::Checkpoint ckpt = train::Checkpoint::load(ckpt_path);
    if (ckpt.digest != ctx.digest && !force) {
        throw std::runtime_error("eval: checkpoint digest " + ckpt.digest +
                                 " does not match config " + ctx.digest + " (use --force)");
    }
    data::Dataset ds = detail::obtain_dataset(ctx, data_path);
    if (missing_tm > 0.0) ds = data::make_missing_subsets(ds, missing_tm, ctx.seed);

    data::FeatureOptions fopt = ctx.config.feature_options();
    std::uint32_t role = static_cast<std::uint32_t>(ckpt.require("meta/role")[0]);
    teacher::TeacherNet tnet(ctx.config.teacher, ctx.seed);
    student::StudentNet snet(ctx.config.student, ctx.seed);
    train::Predictor predict;
    if (role == kRoleTeacher) {
        train::restore_params(ckpt, tnet.params, nullptr, nullptr);
        predict = train::teacher_predictor(tnet, fopt);
    } else {
        train::restore_params(ckpt, snet.params, nullptr, nullptr);
        predict = train::student_predictor(snet, fopt);
    }

    data::EvalReport rep = train::evaluate(ds, split, predict, ctx.config.mixture_mean);
    detail::write_eval_csv(ctx.out / "eval.csv", rep, ctx.digest, ctx.seed);
    std::cout << "AVG RMSE (" << split << "): " << rep.avg << "\n";

    if (plot) {
        fs::path pdir = ctx.out / "plots";
        fs::create_directories(pdir);
        for (const data::SceneSample* s : ds.split(split)) {
            char name[64];
            std::snprintf(name, sizeof(name), "scene_%05ld.svg", s->scene_id);
            svg::write_scene_svg((pdir / name).string(), *s, predict(*s), ctx.digest, ctx.seed);
        }
        std::cout << "wrote plots to " << pdir.string() << "\n";
    }
    return 0;
}

inline int cmd_plot(const detail::Context& ctx, const std::string& data_path,
                    const std::string& ckpt_path, const std::string& split, std::size_t count) {
    if (ckpt_path.empty()) throw std::invalid_argument("plot: --checkpoint is required");
    train::Checkpoint ckpt = train::Checkpoint::load(ckpt_path);
    data::Dataset ds = detail::obtain_dataset(ctx, data_path);
    data::FeatureOptions fopt = ctx.config.feature_options();
    std::uint32_t role = static_cast<std::uint32_t>(ckpt.require("meta/role")[0]);
    teacher::TeacherNet tnet(ctx.config.teacher, ctx.seed);
    student::StudentNet snet(ctx.config.student, ctx.seed);
    train::Predictor predict;
    if (role == kRoleTeacher) {
        train::restore_params(ckpt, tnet.params, nullptr, nullptr);
        predict = train::teacher_predictor(tnet, fopt);
    } else {
        train::restore_params(ckpt, snet.params, nullptr, nullptr);
        predict = train::student_predictor(snet, fopt);
    }
    fs::path pdir = ctx.out / "plots";
    fs::create_directories(pdir);
    std::size_t done = 0;
    for (const data::SceneSample* s : ds.split(split)) {
        if (done++ >= count) break;
        char name[64];
        std::snprintf(name, sizeof(name), "scene_%05ld.svg", s->scene_id);
        svg::write_scene_svg((pdir / name).string(), *s, predict(*s), ctx.digest, ctx.seed);
    }
    std::cout << "wrote " << std::min(done, count) << " plots to " << pdir.string() << "\n";
    return 0;
}

inline int cmd_ablate(const detail::Context& ctx, const std::string& data_path,
                      const std::string& suite) {
    data::Dataset ds = detail::obtain_dataset(ctx, data_path);
    fs::path path = ctx.out / ("ablate_" + suite + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("ablate: cannot open " + path.string());
    out << "# config_digest=" << ctx.digest << " seed=" << ctx.seed << "\n";

    auto emit = [&](const std::string& variant, const data::EvalReport& rep) {
        out << variant;
        for (double v : rep.rmse_by_h) out << ',' << data::detail::fmt_double(v);
        out << ',' << data::detail::fmt_double(rep.avg) << '\n';
    };

    if (suite == "kdm") {
        out << "variant,rmse_1s,rmse_2s,rmse_3s,rmse_4s,rmse_5s,avg\n";
        cfg::RunConfig on = ctx.config;
        on.kdm = true;
        emit("kdm", detail::run_pair(on, ds, ctx.seed).student_test);
        cfg::RunConfig off = ctx.config;
        off.kdm = false;
        emit("no_kdm", detail::run_pair(off, ds, ctx.seed).student_test);
    } else if (suite == "missing") {
        out << "t_m_s,rmse_1s,rmse_2s,rmse_3s,rmse_4s,rmse_5s,avg\n";
        detail::TrainedPair pair = detail::run_pair(ctx.config, ds, ctx.seed);
        data::FeatureOptions fopt = ctx.config.feature_options();
        for (double tm : {0.4, 0.8, 1.2, 1.6, 2.0, 2.4}) {
            data::Dataset degraded = data::make_missing_subsets(ds, tm, ctx.seed);
            data::EvalReport rep =
                train::evaluate(degraded, "test",
                                train::student_predictor(*pair.student_net, fopt),
                                ctx.config.mixture_mean);
            char label[16];
            std::snprintf(label, sizeof(label), "%.1f", tm);
            emit(label, rep);
        }
    } else if (suite == "fasnn") {
        // Table-5-style AST x FT grid
        out << "variant,ast,ft,rmse_1s,rmse_2s,rmse_3s,rmse_4s,rmse_5s,avg\n";
        struct Row {
            const char* name;
            bool ast, ft;
        };
        for (Row r : {Row{"fa-snn", true, true}, Row{"f-snn", false, true},
                      Row{"a-snn", true, false}, Row{"snn", false, false}}) {
            cfg::RunConfig v = ctx.config;
            v.student.adaptive_threshold = r.ast;
            v.student.fourier_features = r.ft;
            data::EvalReport rep = detail::run_pair(v, ds, ctx.seed).student_test;
            out << r.name << ',' << (r.ast ? 1 : 0) << ',' << (r.ft ? 1 : 0);
            for (double x : rep.rmse_by_h) out << ',' << data::detail::fmt_double(x);
            out << ',' << data::detail::fmt_double(rep.avg) << '\n';
        }
    } else if (suite == "components") {
        out << "variant,component_removed,rmse_1s,rmse_2s,rmse_3s,rmse_4s,rmse_5s,avg\n";
        struct Variant {
            const char* tag;
            const char* removed;
        };
        for (Variant v : {Variant{"A", "visual_pooling"}, Variant{"B", "spatial_encoder"},
                          Variant{"C", "fusion"}, Variant{"D", "fa_snn"},
                          Variant{"E", "multimodal_decoder"}, Variant{"F", "kdm"},
                          Variant{"G", "none"}}) {
            cfg::RunConfig c = ctx.config;
            std::string tag(v.tag);
            if (tag == "A") c.visual_pooling = false;
            if (tag == "B") c.teacher.use_spatial = false;
            if (tag == "C") c.teacher.use_fusion = false;
            if (tag == "D") {
                c.student.adaptive_threshold = false;
                c.student.fourier_features = false;
            }
            if (tag == "E") {
                c.teacher.maneuvers = 1;
                c.student.maneuvers = 1;
            }
            if (tag == "F") c.kdm = false;
            data::EvalReport rep = detail::run_pair(c, ds, ctx.seed).student_test;
            out << v.tag << ',' << v.removed;
            for (double x : rep.rmse_by_h) out << ',' << data::detail::fmt_double(x);
            out << ',' << data::detail::fmt_double(rep.avg) << '\n';
        }
    } else {
        throw std::invalid_argument("ablate: unknown suite '" + suite +
                                    "' (components|missing|kdm|fasnn)");
    }
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"spikecast: teacher-student trajectory prediction with a spiking student"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "config file (JSON)");
    app.add_option("--seed", seed, "seed override");
    app.add_option("--out", out_dir, "output directory");

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");

    std::string data_path;
    auto add_data = [&](CLI::App* cmd) {
        cmd->add_option("--data", data_path, "dataset manifest path (default: generate from config)");
    };

    auto* tt = app.add_subcommand("train-teacher", "train the teacher");
    add_data(tt);

    std::string teacher_path;
    bool no_kdm = false;
    auto* ts = app.add_subcommand("train-student", "train the student by distillation");
    add_data(ts);
    ts->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
    ts->add_flag("--no-kdm", no_kdm, "disable KDM loss weighting");

    std::string ckpt_path, split = "test";
    double missing_tm = 0.0;
    bool plot = false, force = false;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_data(ev);
    ev->add_option("--checkpoint", ckpt_path, "checkpoint to evaluate")->required();
    ev->add_option("--split", split, "split tag (train|val|test)");
    ev->add_option("--missing", missing_tm, "missing-history duration t_m in seconds");
    ev->add_flag("--plot", plot, "emit per-scene SVG overlays");
    ev->add_flag("--force", force, "skip the config digest check");

    std::string suite = "kdm";
    auto* ab = app.add_subcommand("ablate", "run an ablation suite");
    add_data(ab);
    ab->add_option("--suite", suite, "components|missing|kdm|fasnn")->required();

    std::size_t plot_count = 8;
    auto* pl = app.add_subcommand("plot", "emit per-scene SVG overlays");
    add_data(pl);
    pl->add_option("--checkpoint", ckpt_path, "checkpoint to plot")->required();
    pl->add_option("--split", split, "split tag");
    pl->add_option("--count", plot_count, "number of scenes");

    try {
        app.parse(argc, argv);
        detail::Context ctx = detail::make_context(config_path, seed, out_dir);
        if (gen->parsed()) return cmd_gen(ctx);
        if (tt->parsed()) return cmd_train_teacher(ctx, data_path);
        if (ts->parsed()) return cmd_train_student(ctx, data_path, teacher_path, no_kdm);
        if (ev->parsed()) return cmd_eval(ctx, data_path, ckpt_path, split, missing_tm, plot, force);
        if (ab->parsed()) return cmd_ablate(ctx, data_path, suite);
        if (pl->parsed()) return cmd_plot(ctx, data_path, ckpt_path, split, plot_count);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace spikecast::cli
