// Copyright 2026 The calibkit Authors.
// SPDX-License-Identifier: Apache-2.0

// calibkit: calibration toolkit for zero-shot classifiers.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "calibkit/commands.hpp"

namespace {

using namespace calibkit;
using namespace calibkit::cli;

void add_dataset_flags(CLI::App* cmd, fs::path& logits, fs::path& labels) {
    cmd->add_option("--logits", logits, "Logit matrix file (.calibmx)")->required();
    cmd->add_option("--labels", labels, "Labels JSON")->required();
}

CLI::Option* add_bins_flag(CLI::App* cmd, std::size_t& bins) {
    return cmd->add_option("--bins", bins, "Number of equal-width confidence bins")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

void add_split_flags(CLI::App* cmd, double& split, std::uint64_t& seed) {
    cmd->add_option("--split", split, "Fraction of samples used for fitting; the rest is held out")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Seed for the calibration/evaluation split")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibration toolkit for zero-shot classifiers"};
    app.require_subcommand(1);

    SynthOptions synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic problem with a planted temperature");
    c_synth->add_option("--n", synth.spec.n, "Number of samples")->check(CLI::PositiveNumber)->capture_default_str();
    c_synth->add_option("--c", synth.spec.c, "Number of classes")->check(CLI::Range(2ul, 1ul << 31))->capture_default_str();
    c_synth->add_option("--planted-t", synth.spec.planted_temperature, "Planted temperature T*")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_synth->add_option("--logit-scale", synth.spec.logit_scale, "Standard deviation of raw logits")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_synth->add_option("--seed", synth.spec.seed, "Generator seed")->capture_default_str();
    c_synth->add_option("--out", synth.out_dir, "Output directory")->required();

    LogitsOptions logits;
    auto* c_logits = app.add_subcommand("logits", "Cosine-similarity logits from image and class embeddings");
    c_logits->add_option("--images", logits.image_embeddings, "Image embeddings (N x D)")->required();
    c_logits->add_option("--classes", logits.class_embeddings, "Class-text embeddings (C x D)")->required();
    c_logits->add_option("--out", logits.out, "Output logit matrix")->required();

    EvalOptions eval;
    fs::path eval_record, eval_calibrator;
    auto* c_eval = app.add_subcommand("eval", "ECE, accuracy, NLL, reliability diagram and histogram");
    add_dataset_flags(c_eval, eval.logits, eval.labels);
    c_eval->add_option("--temperature-record", eval_record, "Divide logits by this record's temperature first");
    c_eval->add_option("--calibrator", eval_calibrator, "Remap confidences with a binning/isotonic calibrator");
    add_bins_flag(c_eval, eval.num_bins);
    c_eval->add_option("--out-prefix", eval.out_prefix, "Prefix for .report.json/.reliability.svg/.histogram.svg")
        ->required();
    c_eval->add_option("--title", eval.title, "Diagram title");

    FitTsOptions fit_ts;
    std::string fit_ts_created;
    auto* c_fit_ts = app.add_subcommand("fit-ts", "Supervised temperature scaling on a calibration split");
    add_dataset_flags(c_fit_ts, fit_ts.logits, fit_ts.labels);
    add_split_flags(c_fit_ts, fit_ts.split, fit_ts.seed);
    add_bins_flag(c_fit_ts, fit_ts.num_bins);
    c_fit_ts->add_option("--arch", fit_ts.architecture, "Model architecture tag")->capture_default_str();
    c_fit_ts->add_option("--pretrain", fit_ts.pretrain_dataset, "Pre-training dataset tag")->capture_default_str();
    c_fit_ts->add_option("--dataset", fit_ts.dataset, "Calibration dataset name (default: logits file stem)");
    c_fit_ts->add_option("--prompt", fit_ts.prompt_template, "Prompt template used for the class embeddings");
    c_fit_ts->add_option("--created-at", fit_ts_created, "Record timestamp, YYYY-MM-DDTHH:MM:SSZ");
    c_fit_ts->add_option("--out", fit_ts.out, "Output temperature record")->required();

    FitZstsOptions zsts;
    std::string zsts_created;
    auto* c_zsts = app.add_subcommand("fit-zsts", "Fit a reusable temperature on an auxiliary dataset");
    add_dataset_flags(c_zsts, zsts.logits, zsts.labels);
    c_zsts->add_option("--arch", zsts.architecture, "Model architecture, e.g. ViT-B-16")->required();
    c_zsts->add_option("--pretrain", zsts.pretrain_dataset, "Pre-training dataset, e.g. laion400m")->required();
    c_zsts->add_option("--aux-dataset", zsts.auxiliary_dataset, "Auxiliary dataset name")->capture_default_str();
    c_zsts->add_option("--prompt", zsts.prompt_template, "Prompt template of the auxiliary class embeddings")
        ->capture_default_str();
    c_zsts->add_option("--created-at", zsts_created, "Record timestamp, YYYY-MM-DDTHH:MM:SSZ");
    c_zsts->add_option("--out", zsts.out, "Output temperature record")->required();

    SweepOptions sweep;
    auto* c_sweep = app.add_subcommand("sweep", "ECE and NLL over a log-spaced temperature grid");
    add_dataset_flags(c_sweep, sweep.logits, sweep.labels);
    c_sweep->add_option("--t-min", sweep.t_min, "Smallest temperature")->capture_default_str();
    c_sweep->add_option("--t-max", sweep.t_max, "Largest temperature")->capture_default_str();
    c_sweep->add_option("--points", sweep.points, "Number of grid points (>= 2)")->capture_default_str();
    add_bins_flag(c_sweep, sweep.num_bins);
    c_sweep->add_option("--out", sweep.out, "Output CSV")->required();

    FitConfidenceOptions binning, isotonic;
    auto* c_binning = app.add_subcommand("fit-binning", "Histogram-binning calibrator on a calibration split");
    add_dataset_flags(c_binning, binning.logits, binning.labels);
    add_split_flags(c_binning, binning.split, binning.seed);
    add_bins_flag(c_binning, binning.num_bins);
    c_binning->add_option("--out", binning.out, "Output calibrator JSON")->required();

    auto* c_isotonic = app.add_subcommand("fit-isotonic", "Isotonic-regression calibrator on a calibration split");
    add_dataset_flags(c_isotonic, isotonic.logits, isotonic.labels);
    add_split_flags(c_isotonic, isotonic.split, isotonic.seed);
    add_bins_flag(c_isotonic, isotonic.num_bins);
    c_isotonic->add_option("--out", isotonic.out, "Output calibrator JSON")->required();

    TableOptions table;
    auto* c_table = app.add_subcommand("table", "Render an ECE comparison table (text + CSV)");
    c_table->add_option("--rows", table.rows, "CSV: architecture,pretrain_dataset,clip,clip_zero_shot_ts,clip_ts")
        ->required();
    c_table->add_option("--out", table.out, "Output path; .txt and .csv are written")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto optional_path = [](const fs::path& p) { return p.empty() ? std::nullopt : std::optional<fs::path>(p); };
    auto optional_text = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };

    try {
        if (c_synth->parsed()) {
            cmd_synth(synth, std::cout);
        } else if (c_logits->parsed()) {
            cmd_logits(logits, std::cout);
        } else if (c_eval->parsed()) {
            eval.temperature_record = optional_path(eval_record);
            eval.calibrator = optional_path(eval_calibrator);
            cmd_eval(eval, std::cout);
        } else if (c_fit_ts->parsed()) {
            fit_ts.created_at = optional_text(fit_ts_created);
            cmd_fit_ts(fit_ts, std::cout, std::cerr);
        } else if (c_zsts->parsed()) {
            zsts.created_at = optional_text(zsts_created);
            cmd_fit_zsts(zsts, std::cout, std::cerr);
        } else if (c_sweep->parsed()) {
            cmd_sweep(sweep, std::cout);
        } else if (c_binning->parsed()) {
            cmd_fit_confidence(ConfidenceMethod::histogram_binning, binning, std::cout, std::cerr);
        } else if (c_isotonic->parsed()) {
            cmd_fit_confidence(ConfidenceMethod::isotonic, isotonic, std::cout, std::cerr);
        } else if (c_table->parsed()) {
            cmd_table(table, std::cout);
        }
    } catch (const calibkit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_usage() ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
