// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "spikecast/cli.hpp"

using namespace spikecast;

namespace {

namespace fs = std::filesystem;

int run_cli(std::vector<std::string> args) {
    std::vector<const char*> argv;
    argv.push_back("spikecast");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("spikecast_cli_" + tag + "_" +
                                            std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

const char* kTinyConfig = R"({
  "teacher": {"hidden_dim": 12, "heads": 2, "decoder_hidden": 16, "ffn_dim": 16},
  "student": {"neurons": 10, "decoder_hidden": 12},
  "data": {"scenes": 10, "train_frac": 0.6, "val_frac": 0.1},
  "train": {"teacher_epochs": 2, "student_epochs": 2, "batch_size": 4}
})";

}  // namespace

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(cfg::from_json(nlohmann::json::parse(R"({"sede": 1})")), std::invalid_argument);
    EXPECT_THROW(cfg::from_json(nlohmann::json::parse(R"({"teacher": {"hiden_dim": 4}})")),
                 std::invalid_argument);
}

TEST(Config, DigestStableUnderKeyReordering) {
    auto a = cfg::from_json(nlohmann::json::parse(
        R"({"seed": 3, "teacher": {"hidden_dim": 32, "heads": 2}})"));
    auto b = cfg::from_json(nlohmann::json::parse(
        R"({"teacher": {"heads": 2, "hidden_dim": 32}, "seed": 3})"));
    EXPECT_EQ(a.digest(), b.digest());
    auto c = cfg::from_json(nlohmann::json::parse(R"({"seed": 4})"));
    EXPECT_NE(a.digest(), c.digest());
}

TEST(Config, DefaultsMatchPaperPinnedValues) {
    cfg::RunConfig c = cfg::defaults();
    EXPECT_EQ(c.teacher.t_obs, 16u);
    EXPECT_EQ(c.teacher.t_f, 25u);
    EXPECT_EQ(c.student.t_obs, 8u);
    EXPECT_EQ(c.batch_size, 256u);
    EXPECT_DOUBLE_EQ(c.sched.lr_max, 1e-3);
    EXPECT_DOUBLE_EQ(c.sched.lr_min, 1e-5);
    EXPECT_EQ(c.gen.frame_rate, 5.0);
}

TEST(CmdGen, WritesManifestWithConfiguredSceneCount) {
    TempDir dir("gen");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "5", "--out",
                       dir.sub("out")}),
              0);
    auto m = nlohmann::json::parse(std::ifstream(dir.sub("out") + "/dataset/manifest.json"));
    EXPECT_EQ(m.at("scenes").size(), 10u);
    EXPECT_EQ(m.at("seed").get<std::uint64_t>(), 5u);
}

TEST(CmdGen, ZeroScenesStillValidManifest) {
    TempDir dir("gen0");
    write_file(dir.sub("cfg.json"), R"({"data": {"scenes": 0}})");
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--out", dir.sub("out")}), 0);
    auto m = nlohmann::json::parse(std::ifstream(dir.sub("out") + "/dataset/manifest.json"));
    EXPECT_EQ(m.at("scenes").size(), 0u);
    auto tracks = data::load_tracks(dir.sub("out") + "/dataset/tracks.csv");
    EXPECT_TRUE(tracks.empty());
}

TEST(CmdGen, SameConfigAndSeedProduceIdenticalFiles) {
    TempDir dir("gendet");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "8", "--out",
                       dir.sub("a")}),
              0);
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "8", "--out",
                       dir.sub("b")}),
              0);
    EXPECT_EQ(read_file(dir.sub("a") + "/dataset/tracks.csv"),
              read_file(dir.sub("b") + "/dataset/tracks.csv"));
    EXPECT_EQ(read_file(dir.sub("a") + "/dataset/manifest.json"),
              read_file(dir.sub("b") + "/dataset/manifest.json"));
}

TEST(CmdTrain, TeacherThenStudentEndToEnd) {
    TempDir dir("train");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::vector<std::string> common = {"--config", dir.sub("cfg.json"), "--seed", "4", "--out",
                                       dir.sub("out")};

    auto with = [&](std::vector<std::string> head) {
        for (const auto& c : common) head.push_back(c);
        return head;
    };
    ASSERT_EQ(run_cli(with({"gen"})), 0);
    std::string manifest = dir.sub("out") + "/dataset/manifest.json";
    ASSERT_EQ(run_cli(with({"train-teacher", "--data", manifest})), 0);
    ASSERT_EQ(run_cli(with({"train-student", "--data", manifest, "--teacher",
                            dir.sub("out") + "/teacher.ckpt"})),
              0);

    // both checkpoints load
    train::Checkpoint t = train::Checkpoint::load(dir.sub("out") + "/teacher.ckpt");
    train::Checkpoint s = train::Checkpoint::load(dir.sub("out") + "/student.ckpt");
    EXPECT_EQ(static_cast<int>(t.require("meta/role")[0]), 0);
    EXPECT_EQ(static_cast<int>(s.require("meta/role")[0]), 1);
    EXPECT_NE(s.find("kdm/log_vars"), nullptr);

    // eval writes the pinned report format
    ASSERT_EQ(run_cli(with({"eval", "--data", manifest, "--checkpoint",
                            dir.sub("out") + "/student.ckpt", "--split", "test"})),
              0);
    std::ifstream in(dir.sub("out") + "/eval.csv");
    std::string line;
    std::getline(in, line);  // digest comment
    std::getline(in, line);
    EXPECT_EQ(line, "horizon_s,rmse");
    int rows = 0;
    bool avg_row = false;
    while (std::getline(in, line)) {
        ++rows;
        if (line.rfind("AVG,", 0) == 0) avg_row = true;
    }
    EXPECT_EQ(rows, 6);  // 5 horizons + AVG
    EXPECT_TRUE(avg_row);
}

TEST(CmdTrain, StudentRequiresTeacherOption) {
    TempDir dir("noteacher");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    EXPECT_NE(run_cli({"train-student", "--config", dir.sub("cfg.json"), "--out", dir.sub("o")}),
              0);
}

TEST(CmdTrain, RerunSameSeedIdenticalMetrics) {
    TempDir dir("det");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    auto train_to = [&](const std::string& out) {
        ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "6", "--out", out}),
                  0);
        ASSERT_EQ(run_cli({"train-teacher", "--config", dir.sub("cfg.json"), "--seed", "6",
                           "--out", out, "--data", out + "/dataset/manifest.json"}),
                  0);
    };
    train_to(dir.sub("a"));
    train_to(dir.sub("b"));
    EXPECT_EQ(read_file(dir.sub("a") + "/teacher_metrics.csv"),
              read_file(dir.sub("b") + "/teacher_metrics.csv"));
    EXPECT_EQ(read_file(dir.sub("a") + "/teacher.ckpt"), read_file(dir.sub("b") + "/teacher.ckpt"));
}

TEST(CmdTrain, NoKdmFlagLogsUnitSigmaColumns) {
    TempDir dir("nokdm");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "3", "--out", out}), 0);
    std::string manifest = out + "/dataset/manifest.json";
    ASSERT_EQ(run_cli({"train-teacher", "--config", dir.sub("cfg.json"), "--seed", "3", "--out",
                       out, "--data", manifest}),
              0);
    ASSERT_EQ(run_cli({"train-student", "--config", dir.sub("cfg.json"), "--seed", "3", "--out",
                       out, "--data", manifest, "--teacher", out + "/teacher.ckpt", "--no-kdm"}),
              0);
    std::ifstream in(out + "/student_metrics.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        auto tail = line.substr(line.size() - 8);
        EXPECT_EQ(tail, ",1,1,1,1") << line;
    }
}

TEST(CmdEval, DigestMismatchNeedsForce) {
    TempDir dir("digest");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    write_file(dir.sub("cfg2.json"),
               R"({
  "teacher": {"hidden_dim": 12, "heads": 2, "decoder_hidden": 16, "ffn_dim": 16},
  "student": {"neurons": 10, "decoder_hidden": 12},
  "data": {"scenes": 10, "train_frac": 0.6, "val_frac": 0.1},
  "train": {"teacher_epochs": 2, "student_epochs": 2, "batch_size": 4, "grad_clip": 9.0}
})");
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "2", "--out", out}), 0);
    std::string manifest = out + "/dataset/manifest.json";
    ASSERT_EQ(run_cli({"train-teacher", "--config", dir.sub("cfg.json"), "--seed", "2", "--out",
                       out, "--data", manifest}),
              0);
    EXPECT_NE(run_cli({"eval", "--config", dir.sub("cfg2.json"), "--seed", "2", "--out", out,
                       "--data", manifest, "--checkpoint", out + "/teacher.ckpt"}),
              0);
    EXPECT_EQ(run_cli({"eval", "--config", dir.sub("cfg2.json"), "--seed", "2", "--out", out,
                       "--data", manifest, "--checkpoint", out + "/teacher.ckpt", "--force"}),
              0);
}

TEST(CmdEval, MissingZeroEqualsNoFlag) {
    TempDir dir("miss0");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "2", "--out", out}), 0);
    std::string manifest = out + "/dataset/manifest.json";
    ASSERT_EQ(run_cli({"train-teacher", "--config", dir.sub("cfg.json"), "--seed", "2", "--out",
                       out, "--data", manifest}),
              0);
    ASSERT_EQ(run_cli({"eval", "--config", dir.sub("cfg.json"), "--seed", "2", "--out", out,
                       "--data", manifest, "--checkpoint", out + "/teacher.ckpt"}),
              0);
    std::string base = read_file(out + "/eval.csv");
    ASSERT_EQ(run_cli({"eval", "--config", dir.sub("cfg.json"), "--seed", "2", "--out", out,
                       "--data", manifest, "--checkpoint", out + "/teacher.ckpt", "--missing",
                       "0.0"}),
              0);
    EXPECT_EQ(read_file(out + "/eval.csv"), base);
}

TEST(CmdEval, PlotEmitsSvgPerScene) {
    TempDir dir("plot");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "2", "--out", out}), 0);
    std::string manifest = out + "/dataset/manifest.json";
    ASSERT_EQ(run_cli({"train-teacher", "--config", dir.sub("cfg.json"), "--seed", "2", "--out",
                       out, "--data", manifest}),
              0);
    ASSERT_EQ(run_cli({"eval", "--config", dir.sub("cfg.json"), "--seed", "2", "--out", out,
                       "--data", manifest, "--checkpoint", out + "/teacher.ckpt", "--plot"}),
              0);
    std::size_t svgs = 0;
    for (const auto& e : fs::directory_iterator(out + "/plots")) {
        if (e.path().extension() == ".svg") ++svgs;
        std::string content = read_file(e.path().string());
        EXPECT_NE(content.find("<svg"), std::string::npos);
        EXPECT_NE(content.find("config_digest="), std::string::npos);
    }
    EXPECT_GT(svgs, 0u);
}

TEST(CmdAblate, KdmSuiteHasExactlyTwoRows) {
    TempDir dir("abkdm");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"ablate", "--suite", "kdm", "--config", dir.sub("cfg.json"), "--seed", "2",
                       "--out", out}),
              0);
    std::ifstream in(out + "/ablate_kdm.csv");
    std::string line;
    std::getline(in, line);  // comment
    std::getline(in, line);  // header
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 2);
}

TEST(CmdAblate, MissingSuiteCoversAllDurations) {
    TempDir dir("abmiss");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"ablate", "--suite", "missing", "--config", dir.sub("cfg.json"), "--seed",
                       "2", "--out", out}),
              0);
    std::ifstream in(out + "/ablate_missing.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::vector<std::string> tms;
    while (std::getline(in, line)) tms.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(tms, (std::vector<std::string>{"0.4", "0.8", "1.2", "1.6", "2.0", "2.4"}));
}

TEST(CmdAblate, FasnnSuiteCoversAstFtGrid) {
    TempDir dir("abfa");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"ablate", "--suite", "fasnn", "--config", dir.sub("cfg.json"), "--seed",
                       "2", "--out", out}),
              0);
    std::ifstream in(out + "/ablate_fasnn.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::vector<std::string> variants;
    while (std::getline(in, line)) variants.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(variants, (std::vector<std::string>{"fa-snn", "f-snn", "a-snn", "snn"}));
}

TEST(CmdAblate, ComponentsSuiteCoversTableGrid) {
    TempDir dir("abcomp");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"ablate", "--suite", "components", "--config", dir.sub("cfg.json"),
                       "--seed", "2", "--out", out}),
              0);
    std::ifstream in(out + "/ablate_components.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 7);  // A..F single-component removals plus the full model G
}

TEST(CmdAblate, UnknownSuiteIsUsageError) {
    TempDir dir("abbad");
    EXPECT_NE(run_cli({"ablate", "--suite", "bogus", "--out", dir.sub("out")}), 0);
}

TEST(CmdPlot, EmitsRequestedCount) {
    TempDir dir("plotcmd");
    write_file(dir.sub("cfg.json"), kTinyConfig);
    std::string out = dir.sub("out");
    ASSERT_EQ(run_cli({"gen", "--config", dir.sub("cfg.json"), "--seed", "2", "--out", out}), 0);
    std::string manifest = out + "/dataset/manifest.json";
    ASSERT_EQ(run_cli({"train-teacher", "--config", dir.sub("cfg.json"), "--seed", "2", "--out",
                       out, "--data", manifest}),
              0);
    ASSERT_EQ(run_cli({"plot", "--config", dir.sub("cfg.json"), "--seed", "2", "--out", out,
                       "--data", manifest, "--checkpoint", out + "/teacher.ckpt", "--split",
                       "train", "--count", "2"}),
              0);
    std::size_t svgs = 0;
    for (const auto& e : fs::directory_iterator(out + "/plots")) {
        if (e.path().extension() == ".svg") ++svgs;
    }
    EXPECT_EQ(svgs, 2u);
}
