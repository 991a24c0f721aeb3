// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>

#include "calibkit/calibkit.hpp"
#include "cli_runner.hpp"
#include "svg_probe.hpp"

namespace calibkit {
namespace {

namespace fs = std::filesystem;
using testing::read_bytes;
using testing::run_cli;
using testing::TempDir;

class Cli : public ::testing::Test {
protected:
    void SetUp() override { ::setenv("SOURCE_DATE_EPOCH", "1767225600", 1); }

    testing::RunResult run(const std::string& args) { return run_cli(args, dir_.path()); }
    std::string p(const std::string& name) const { return (dir_ / name).string(); }

    /// synth into `name`/ and return the directory.
    std::string synth(const std::string& name, std::size_t n, double t, std::uint64_t seed, std::size_t c = 10) {
        const auto r = run("synth --n " + std::to_string(n) + " --c " + std::to_string(c) + " --planted-t " +
                           std::to_string(t) + " --seed " + std::to_string(seed) + " --out " + p(name));
        EXPECT_EQ(r.code, 0) << r.err;
        return p(name);
    }

    TempDir dir_;
};

TEST_F(Cli, NoSubcommandIsUsageError) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("synth --n 10").code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, SynthWritesTwoFilesDeterministically) {
    const auto r1 = run("synth --n 1000 --c 10 --planted-t 1.55 --seed 7 --out " + p("a"));
    ASSERT_EQ(r1.code, 0) << r1.err;
    const auto r2 = run("synth --n 1000 --c 10 --planted-t 1.55 --seed 7 --out " + p("b"));
    ASSERT_EQ(r2.code, 0) << r2.err;
    for (const char* f : {"logits.calibmx", "labels.json", "logits.calibmx.meta.json"}) {
        ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
        EXPECT_EQ(read_bytes(dir_ / "a" / f), read_bytes(dir_ / "b" / f)) << f;
    }
    const auto logits = read_logits(dir_ / "a" / "logits.calibmx");
    EXPECT_EQ(logits.rows(), 1000u);
    EXPECT_EQ(logits.cols(), 10u);
    EXPECT_EQ(read_labels(dir_ / "a" / "labels.json").size(), 1000u);
}

TEST_F(Cli, SynthRejectsZeroTemperatureNamingFlag) {
    const auto r = run("synth --planted-t 0 --out " + p("z"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--planted-t"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir_ / "z" / "logits.calibmx"));
}

TEST_F(Cli, LogitsShapesProvenanceAndBounds) {
    Matrix<float> images(2, 4, std::vector<float>{1, 0, 0, 0, 0.5f, -1, 2, 0.25f});
    Matrix<float> classes(3, 4, std::vector<float>{1, 1, 0, 0, 0, 0, 1, 0, -1, 0, 0, 3});
    write_matrix({images, std::nullopt}, dir_ / "img.calibmx");
    write_matrix({classes, std::nullopt}, dir_ / "cls.calibmx");
    const auto r = run("logits --images " + p("img.calibmx") + " --classes " + p("cls.calibmx") + " --out " +
                       p("out/logits.calibmx"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto logits = read_logits(dir_ / "out" / "logits.calibmx");
    EXPECT_EQ(logits.rows(), 2u);
    EXPECT_EQ(logits.cols(), 3u);
    EXPECT_EQ(logits.provenance(), Provenance::cosine_head);
    // Independent recomputation in float64.
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            double dot = 0, ni = 0, nc = 0;
            for (std::size_t d = 0; d < 4; ++d) {
                dot += double(images(i, d)) * classes(c, d);
                ni += double(images(i, d)) * images(i, d);
                nc += double(classes(c, d)) * classes(c, d);
            }
            const double expect = 100.0 * dot / std::sqrt(ni * nc);
            EXPECT_NEAR(logits.values()(i, c), expect, 1e-4);
            EXPECT_LE(std::abs(logits.values()(i, c)), 100.0);
        }
    }
}

TEST_F(Cli, LogitsErrors) {
    write_matrix({Matrix<float>(2, 4, std::vector<float>{0, 0, 0, 0, 1, 2, 3, 4}), std::nullopt}, dir_ / "img.calibmx");
    write_matrix({Matrix<float>(3, 4, 1.0f), std::nullopt}, dir_ / "cls.calibmx");
    write_matrix({Matrix<float>(3, 5, 1.0f), std::nullopt}, dir_ / "cls5.calibmx");
    auto r = run("logits --images " + p("img.calibmx") + " --classes " + p("cls.calibmx") + " --out " + p("o"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("DegenerateEmbeddingError"), std::string::npos) << r.err;
    r = run("logits --images " + p("cls.calibmx") + " --classes " + p("cls5.calibmx") + " --out " + p("o"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("ShapeError"), std::string::npos) << r.err;
    r = run("logits --images " + p("missing.calibmx") + " --classes " + p("cls.calibmx") + " --out " + p("o"));
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, EvalArtifactsAndTemperatureRecord) {
    const auto d = synth("hot", 20000, 3.0, 11);
    const auto base = run("eval --logits " + d + "/logits.calibmx --labels " + d + "/labels.json --out-prefix " +
                          p("ev/raw"));
    ASSERT_EQ(base.code, 0) << base.err;
    for (const char* ext : {".report.json", ".reliability.svg", ".histogram.svg"}) {
        EXPECT_TRUE(fs::exists(p("ev/raw") + ext)) << ext;
    }
    testing::parse_xml(read_bytes(p("ev/raw.reliability.svg")));
    testing::parse_xml(read_bytes(p("ev/raw.histogram.svg")));
    const auto raw = report_from_json(detail::parse_json_file(p("ev/raw.report.json")));
    EXPECT_EQ(raw.ece, ece(raw.table));
    EXPECT_EQ(raw.n, 20000u);

    TemperatureRecord rec;
    rec.temperature = 3.0;
    rec.architecture = "synthetic";
    rec.pretrain_dataset = "synthetic";
    rec.auxiliary_dataset = "synthetic";
    rec.prompt_template = "";
    rec.fit_nll = 0.0;
    rec.created_at = parse_timestamp("2026-01-01T00:00:00Z");
    write_temperature_record(rec, dir_ / "t3.json");
    const auto scaled = run("eval --logits " + d + "/logits.calibmx --labels " + d +
                            "/labels.json --temperature-record " + p("t3.json") + " --out-prefix " + p("ev/t3"));
    ASSERT_EQ(scaled.code, 0) << scaled.err;
    const auto doc = detail::parse_json_file(p("ev/t3.report.json"));
    EXPECT_EQ(doc["temperature"].get<double>(), 3.0);
    EXPECT_LT(report_from_json(doc).ece, raw.ece);
}

TEST_F(Cli, EvalShapeMismatchExitsTwo) {
    const auto a = synth("a", 50, 1.0, 1);
    const auto b = synth("b", 60, 1.0, 1);
    const auto r = run("eval --logits " + a + "/logits.calibmx --labels " + b + "/labels.json --out-prefix " + p("x"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("ShapeError"), std::string::npos) << r.err;
}

TEST_F(Cli, CorruptInputIsUsageError) {
    const auto a = synth("a", 50, 1.0, 1);
    auto bytes = read_bytes(a + "/logits.calibmx");
    testing::write_bytes(a + "/logits.calibmx", bytes.substr(0, bytes.size() - 3));
    const auto r = run("eval --logits " + a + "/logits.calibmx --labels " + a + "/labels.json --out-prefix " + p("x"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("TruncationError"), std::string::npos) << r.err;
}

TEST_F(Cli, FitTsRecoversPlantedAndIsDeterministic) {
    const auto d = synth("d", 40000, 1.35, 5);
    const std::string args = "fit-ts --logits " + d + "/logits.calibmx --labels " + d + "/labels.json --seed 3 --out ";
    const auto r1 = run(args + p("r1.json"));
    ASSERT_EQ(r1.code, 0) << r1.err;
    EXPECT_NE(r1.out.find("held-out ECE"), std::string::npos) << r1.out;
    const auto r2 = run(args + p("r2.json"));
    ASSERT_EQ(r2.code, 0) << r2.err;
    EXPECT_EQ(read_bytes(p("r1.json")), read_bytes(p("r2.json")));
    const auto rec = read_temperature_record(p("r1.json"));
    EXPECT_GE(rec.temperature, 1.25);
    EXPECT_LE(rec.temperature, 1.45);
    EXPECT_EQ(format_timestamp(rec.created_at), "2026-01-01T00:00:00Z");
}

TEST_F(Cli, FitTsFullSplitWarns) {
    const auto d = synth("d", 500, 1.0, 5);
    const auto r = run("fit-ts --logits " + d + "/logits.calibmx --labels " + d + "/labels.json --split 1.0 --out " +
                       p("r.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("no held-out ECE"), std::string::npos) << r.err;
    EXPECT_EQ(r.out.find("held-out ECE"), std::string::npos);
}

TEST_F(Cli, FitTsEmptySplitExitsTwo) {
    const auto d = synth("d", 2, 1.0, 5);
    EXPECT_EQ(run("fit-ts --logits " + d + "/logits.calibmx --labels " + d + "/labels.json --split 0.1 --out " +
                  p("r.json"))
                  .code,
              2);
    const auto one = synth("one", 1, 1.0, 5);
    EXPECT_EQ(run("fit-ts --logits " + one + "/logits.calibmx --labels " + one + "/labels.json --out " + p("r.json"))
                  .code,
              2);
}

TEST_F(Cli, FitZstsTransfersToOtherDataset) {
    const auto aux = synth("aux", 40000, 1.55, 21);
    const auto r = run("fit-zsts --logits " + aux + "/logits.calibmx --labels " + aux +
                       "/labels.json --arch ViT-B-16 --pretrain laion400m --out " + p("zs.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = detail::parse_json_file(p("zs.json"));
    for (const char* key : {"temperature", "architecture", "pretrain_dataset", "auxiliary_dataset", "prompt_template",
                            "fit_nll", "created_at"}) {
        EXPECT_TRUE(doc.contains(key)) << key;
    }
    const auto rec = record_from_json(doc);
    EXPECT_NEAR(rec.temperature, 1.55, 0.1);
    EXPECT_EQ(rec.auxiliary_dataset, "imagenet1k");
    EXPECT_EQ(rec.prompt_template, "a photo of {}");

    const auto down = synth("down", 20000, 1.55, 22, 37);
    ASSERT_EQ(run("eval --logits " + down + "/logits.calibmx --labels " + down + "/labels.json --out-prefix " +
                  p("raw"))
                  .code,
              0);
    ASSERT_EQ(run("eval --logits " + down + "/logits.calibmx --labels " + down + "/labels.json --temperature-record " +
                  p("zs.json") + " --out-prefix " + p("zs"))
                  .code,
              0);
    const double before = detail::parse_json_file(p("raw.report.json"))["ece"].get<double>();
    const double after = detail::parse_json_file(p("zs.report.json"))["ece"].get<double>();
    EXPECT_LE(after, 0.5 * before) << before << " -> " << after;
}

TEST_F(Cli, FitZstsRequiresIdentity) {
    const auto aux = synth("aux", 100, 1.0, 1);
    const std::string base = "fit-zsts --logits " + aux + "/logits.calibmx --labels " + aux + "/labels.json --out " +
                             p("zs.json");
    EXPECT_EQ(run(base + " --pretrain laion400m").code, 2);
    EXPECT_EQ(run(base + " --arch ViT-B-16").code, 2);
    EXPECT_EQ(run(base + " --arch '' --pretrain laion400m").code, 2);
}

TEST_F(Cli, SweepGrids) {
    const auto d = synth("d", 50000, 1.55, 8);
    const auto r = run("sweep --logits " + d + "/logits.calibmx --labels " + d +
                       "/labels.json --t-min 0.5 --t-max 5 --points 25 --out " + p("s.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto trace = parse_sweep_csv(read_bytes(p("s.csv")));
    ASSERT_EQ(trace.size(), 25u);
    std::size_t best = 0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
        if (trace[k].ece < trace[best].ece) best = k;
    }
    const double step = std::log(trace[1].temperature / trace[0].temperature);
    EXPECT_LE(std::abs(std::log(trace[best].temperature / 1.55)), step * (1 + 1e-6));

    const auto two = run("sweep --logits " + d + "/logits.calibmx --labels " + d +
                         "/labels.json --t-min 1 --t-max 2 --points 2 --out " + p("two.csv"));
    ASSERT_EQ(two.code, 0) << two.err;
    EXPECT_EQ(parse_sweep_csv(read_bytes(p("two.csv"))).size(), 2u);

    for (const char* bad : {"--t-min 0 --t-max 2", "--t-min 2 --t-max 1", "--t-min 1 --t-max 2 --points 1",
                            "--t-min -1 --t-max 2"}) {
        EXPECT_EQ(run("sweep --logits " + d + "/logits.calibmx --labels " + d + "/labels.json " + bad + " --out " +
                      p("bad.csv"))
                      .code,
                  2)
            << bad;
    }
}

TEST_F(Cli, ConfidenceCalibratorsReduceEce) {
    const auto d = synth("d", 20000, 3.0, 9);
    const std::string data = " --logits " + d + "/logits.calibmx --labels " + d + "/labels.json";
    const auto rb = run("fit-binning" + data + " --out " + p("bin.json"));
    ASSERT_EQ(rb.code, 0) << rb.err;
    const auto ri = run("fit-isotonic" + data + " --out " + p("iso.json"));
    ASSERT_EQ(ri.code, 0) << ri.err;
    for (const auto* r : {&rb, &ri}) {
        double before = 0, after = 0;
        const auto at = r->out.find("held-out ECE: uncalibrated ");
        ASSERT_NE(at, std::string::npos) << r->out;
        ASSERT_EQ(std::sscanf(r->out.c_str() + at, "held-out ECE: uncalibrated %lf%%, calibrated %lf%%", &before,
                              &after),
                  2);
        EXPECT_LT(after, before);
    }
    const auto iso = std::get<IsotonicCalibrator>(read_calibrator(p("iso.json")));
    EXPECT_TRUE(std::is_sorted(iso.values.begin(), iso.values.end()));

    const auto ev = run("eval" + data + " --calibrator " + p("iso.json") + " --out-prefix " + p("iso"));
    EXPECT_EQ(ev.code, 0) << ev.err;

    const auto other = synth("other", 100, 1.0, 1, 7);
    EXPECT_EQ(run("fit-binning --logits " + d + "/logits.calibmx --labels " + other + "/labels.json --out " +
                  p("x.json"))
                  .code,
              2);
}

TEST_F(Cli, TableWritesTextAndCsv) {
    testing::write_bytes(dir_ / "rows.csv",
                         "architecture,pretrain_dataset,clip,clip_zero_shot_ts,clip_ts\n"
                         "ViT-B-16,laion400m,6.34,2.22,0.91\n"
                         "ResNet-50,yfcc15m,26.69,7.60,2.61\n");
    const auto r = run("table --rows " + p("rows.csv") + " --out " + p("t/table1"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir_ / "t" / "table1.txt"));
    EXPECT_EQ(read_bytes(dir_ / "t" / "table1.csv"), read_bytes(dir_ / "rows.csv"));
    EXPECT_EQ(r.out, read_bytes(dir_ / "t" / "table1.txt"));
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
    const auto d = synth("d", 3000, 2.0, 4);
    const std::string data = " --logits " + d + "/logits.calibmx --labels " + d + "/labels.json";
    const std::vector<std::pair<std::string, std::vector<std::string>>> cmds = {
        {"eval" + data + " --out-prefix {}/e", {"e.report.json", "e.reliability.svg", "e.histogram.svg"}},
        {"fit-ts" + data + " --out {}/ts.json", {"ts.json"}},
        {"fit-zsts" + data + " --arch A --pretrain P --out {}/zs.json", {"zs.json"}},
        {"sweep" + data + " --out {}/s.csv", {"s.csv"}},
        {"fit-binning" + data + " --out {}/b.json", {"b.json"}},
        {"fit-isotonic" + data + " --out {}/i.json", {"i.json"}},
    };
    for (const auto& [tmpl, files] : cmds) {
        std::string cmd = tmpl;
        cmd.replace(cmd.find("{}"), 2, p("rep"));
        std::vector<std::string> first;
        std::string first_out;
        for (int k = 0; k < 2; ++k) {
            const auto r = run(cmd);
            ASSERT_EQ(r.code, 0) << cmd << "\n" << r.err;
            if (k == 0) {
                first_out = r.out;
                for (const auto& f : files) first.push_back(read_bytes(p("rep/" + f)));
                fs::remove_all(p("rep"));
            } else {
                EXPECT_EQ(r.out, first_out) << tmpl;
                for (std::size_t i = 0; i < files.size(); ++i) {
                    EXPECT_EQ(read_bytes(p("rep/" + files[i])), first[i]) << files[i];
                }
            }
        }
    }
}

}  // namespace
}  // namespace calibkit
