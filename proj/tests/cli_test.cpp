// End-to-end tests that drive the installed binary the way a user would.

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "exitwise/checkpoint.hpp"
#include "exitwise/csv.hpp"
#include "exitwise/model.hpp"

using namespace exitwise;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

CliResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out_file = scratch / "stdout.txt";
    const fs::path err_file = scratch / "stderr.txt";
    const std::string cmd = std::string(EXITWISE_BIN) + " " + args + " > " +
                            out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WEXITSTATUS(status);
    result.out = slurp(out_file);
    result.err = slurp(err_file);
    return result;
}

struct Scratch {
    fs::path path;
    Scratch() {
        path = fs::temp_directory_path() /
               ("exitwise_cli_" + std::to_string(::rand()) +
                std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~Scratch() { fs::remove_all(path); }
};

const std::string kTinyData =
    "--dataset synthetic --classes 4 --image-size 10 --channels 1 "
    "--n-per-class 12 --test-per-class 8 --separation 3 --val-fraction 0.2";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("help exits 0 for every subcommand") {
    Scratch scratch;
    CHECK(run_cli("--help", scratch.path).exit_code == 0);
    for (const char* sub :
         {"train", "sweep", "analyze", "exit-eval", "macs", "delta-acc"}) {
        const CliResult r = run_cli(std::string(sub) + " --help", scratch.path);
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("--help") != std::string::npos);
    }
}

TEST_CASE("usage errors exit 1") {
    Scratch scratch;
    CHECK(run_cli("", scratch.path).exit_code == 1);
    CHECK(run_cli("train", scratch.path).exit_code == 1);  // missing required
    CHECK(run_cli("frobnicate --out x", scratch.path).exit_code == 1);
}

TEST_CASE("train writes checkpoint, history and calibration deterministically") {
    Scratch scratch;
    const fs::path out1 = scratch.path / "run1";
    const fs::path out2 = scratch.path / "run2";
    const std::string train_cmd = "train --mode combined --depth 3 --width 4 "
                                  "--epochs 4 --seed 7 " +
                                  kTinyData;
    const CliResult r1 =
        run_cli(train_cmd + " --out " + out1.string(), scratch.path);
    CHECK(r1.exit_code == 0);
    CHECK(fs::exists(out1 / "checkpoint.bin"));
    CHECK(fs::exists(out1 / "history.csv"));
    CHECK(fs::exists(out1 / "calibration.csv"));

    const ModelF model = load_checkpoint(out1 / "checkpoint.bin");
    CHECK(model.has_calibration());
    CHECK(model.arch.depth == 3);

    const CliResult r2 =
        run_cli(train_cmd + " --out " + out2.string(), scratch.path);
    CHECK(r2.exit_code == 0);
    CHECK(slurp(out1 / "checkpoint.bin") == slurp(out2 / "checkpoint.bin"));
    CHECK(slurp(out1 / "history.csv") == slurp(out2 / "history.csv"));
}

TEST_CASE("train with a missing dataset directory exits 2 without outputs") {
    Scratch scratch;
    const fs::path out = scratch.path / "never";
    const CliResult r = run_cli(
        "train --dataset cifar10 --data-dir /nonexistent-exitwise --depth 2 "
        "--width 4 --epochs 1 --seed 1 --out " +
            out.string(),
        scratch.path);
    CHECK(r.exit_code == 2);
    CHECK_FALSE(fs::exists(out / "checkpoint.bin"));
    CHECK(r.err.find("data_batch_1.bin") != std::string::npos);
}

TEST_CASE("sweep emits the documented schema with one cost column per alpha") {
    Scratch scratch;
    const fs::path out = scratch.path / "sweep";
    const CliResult r = run_cli("sweep --axis depth --range 1:3 --width 4 "
                                "--epochs 2 --alphas 0,0.5,1 --seed 9 " +
                                    kTinyData + " --out " + out.string(),
                                scratch.path);
    CHECK(r.exit_code == 0);
    const CsvData csv = read_csv(out / "sweep.csv");
    const std::vector<std::string> expected{
        "mode", "param",        "macs",         "c_d",        "train_acc",
        "test_acc", "cost_alpha0", "cost_alpha0.5", "cost_alpha1", "error"};
    CHECK(csv.header == expected);
    CHECK(csv.rows.size() == 3);
    for (const auto& row : csv.rows) CHECK(row[0] == "depth");
    CHECK(fs::exists(out / "sweep.svg"));
    const std::string svg = slurp(out / "sweep.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("analyze fits a crafted sweep and maps the gamma=1 limit to depth 1") {
    Scratch scratch;
    // Hand-built ascending sweep: c_d = 0.02 * exp(4 * acc), exact.
    const fs::path sweep_csv = scratch.path / "sweep.csv";
    {
        CsvWriter csv({"mode", "param", "macs", "c_d", "train_acc", "test_acc",
                       "error"});
        const std::vector<double> accs{0.3, 0.45, 0.6, 0.7, 0.76, 0.8};
        for (std::size_t i = 0; i < accs.size(); ++i) {
            csv.begin_row()
                .cell(std::string("depth"))
                .cell(static_cast<int>(i + 1))
                .cell(static_cast<std::int64_t>(1000 * (i + 1)))
                .cell(0.02 * std::exp(4.0 * accs[i]))
                .cell(accs[i] + 0.05)
                .cell(accs[i])
                .cell(std::string());
        }
        csv.write(sweep_csv);
    }
    const fs::path out = scratch.path / "analyze";
    const CliResult r = run_cli(
        "analyze --input " + sweep_csv.string() +
            " --fit exp --alpha 0.5 --binary --gamma 1 --ratio 0.5 --region-map "
            "--gamma-grid 1:100:6:log --ratio-grid 0.001:10:5:log --out " +
            out.string(),
        scratch.path);
    CHECK(r.exit_code == 0);

    const CsvData fit = read_csv(out / "fit.csv");
    CHECK(fit.header == std::vector<std::string>{"a", "b", "residual"});
    REQUIRE(fit.rows.size() == 1);
    CHECK(std::abs(std::stod(fit.rows[0][0]) - 0.02) <= 1e-6);
    CHECK(std::abs(std::stod(fit.rows[0][1]) - 4.0) <= 1e-6);

    const CsvData optimal = read_csv(out / "optimal.csv");
    const int depth_col = optimal.column("depth");
    const int source_col = optimal.column("source");
    REQUIRE(depth_col >= 0);
    bool saw_binary = false;
    for (const auto& row : optimal.rows) {
        if (row[static_cast<std::size_t>(source_col)] == "binary") {
            saw_binary = true;
            // gamma = 1: decision energy dominates, lowest depth wins.
            CHECK(row[static_cast<std::size_t>(depth_col)] == "1");
        }
    }
    CHECK(saw_binary);

    const CsvData region = read_csv(out / "region_map.csv");
    CHECK(region.header.front() == "gamma\\ratio");
    CHECK(region.header.size() == 6);  // axis + 5 ratio columns
    CHECK(region.rows.size() == 6);    // 6 gamma rows
    CHECK(fs::exists(out / "region_map.svg"));
}

TEST_CASE("analyze reports numerical failures with exit 3") {
    Scratch scratch;
    // Width-mode rows sampled from a rational curve whose pole sits inside
    // the accuracy range; the rational fit must reject them.
    const fs::path sweep_csv = scratch.path / "pole.csv";
    {
        CsvWriter csv({"mode", "param", "macs", "c_d", "train_acc", "test_acc",
                       "error"});
        csv.begin_row()
            .cell(std::string("width"))
            .cell(8)
            .cell(static_cast<std::int64_t>(1000))
            .cell(1.5)
            .cell(0.45)
            .cell(0.4)
            .cell(std::string());
        csv.begin_row()
            .cell(std::string("width"))
            .cell(16)
            .cell(static_cast<std::int64_t>(2000))
            .cell(-2.5)
            .cell(0.65)
            .cell(0.6)
            .cell(std::string());
        csv.write(sweep_csv);
    }
    const CliResult r = run_cli("analyze --input " + sweep_csv.string() +
                                    " --fit rat --out " +
                                    (scratch.path / "rat").string(),
                                scratch.path);
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("pole") != std::string::npos);
}

TEST_CASE("exit-eval writes policy reports and respects trivial regimes") {
    Scratch scratch;
    const fs::path train_out = scratch.path / "model";
    REQUIRE(run_cli("train --mode combined --depth 3 --width 4 --epochs 8 "
                    "--seed 21 " +
                        kTinyData + " --out " + train_out.string(),
                    scratch.path)
                .exit_code == 0);

    const fs::path out = scratch.path / "eval";
    const std::string eval_cmd =
        "exit-eval --checkpoint " + (train_out / "checkpoint.bin").string() +
        " --seed 21 " + kTinyData + " --out " + out.string();
    const CliResult r = run_cli(eval_cmd, scratch.path);
    CHECK(r.exit_code == 0);
    for (const char* name :
         {"policy_report.csv", "acc_vs_desired.csv", "energy_vs_acc.csv",
          "confidence_table.csv", "acc_vs_desired.svg", "energy_vs_acc.svg",
          "confidence_table.svg"}) {
        CHECK(fs::exists(out / name));
    }
    // Default presets produce two beta curves.
    const CsvData acc = read_csv(out / "acc_vs_desired.csv");
    std::set<std::string> beta_pairs;
    for (const auto& row : acc.rows) beta_pairs.insert(row[0] + "/" + row[1]);
    CHECK(beta_pairs.size() == 2);

    // Deterministic rerun: byte-identical outputs.
    const fs::path out2 = scratch.path / "eval2";
    REQUIRE(run_cli("exit-eval --checkpoint " +
                        (train_out / "checkpoint.bin").string() + " --seed 21 " +
                        kTinyData + " --out " + out2.string(),
                    scratch.path)
                .exit_code == 0);
    CHECK(slurp(out / "policy_report.csv") == slurp(out2 / "policy_report.csv"));
    CHECK(slurp(out / "energy_vs_acc.csv") == slurp(out2 / "energy_vs_acc.csv"));

    // Forced exit 1 at desired accuracy 0.
    const fs::path out3 = scratch.path / "eval3";
    REQUIRE(run_cli("exit-eval --checkpoint " +
                        (train_out / "checkpoint.bin").string() +
                        " --desired-acc 0.0 --betas 1,1 --seed 21 " + kTinyData +
                        " --out " + out3.string(),
                    scratch.path)
                .exit_code == 0);
    const CsvData report = read_csv(out3 / "policy_report.csv");
    const int exit1_col = report.column("exit1");
    const int exit2_col = report.column("exit2");
    const int exit3_col = report.column("exit3");
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0][static_cast<std::size_t>(exit1_col)] == "32");  // 4*8
    CHECK(report.rows[0][static_cast<std::size_t>(exit2_col)] == "0");
    CHECK(report.rows[0][static_cast<std::size_t>(exit3_col)] == "0");
}

TEST_CASE("exit-eval without calibration exits 4 with a remediation hint") {
    Scratch scratch;
    ModelF model = build_multi_exit<float>(2, 4, 10, 10, 1, 4, 3);
    const fs::path ckpt = scratch.path / "raw.bin";
    save_checkpoint(model, ckpt);
    const CliResult r = run_cli("exit-eval --checkpoint " + ckpt.string() +
                                    " --seed 3 " + kTinyData + " --out " +
                                    (scratch.path / "nope").string(),
                                scratch.path);
    CHECK(r.exit_code == 4);
    CHECK(r.err.find("calibration") != std::string::npos);
    CHECK(r.err.find("train") != std::string::npos);
}

TEST_CASE("macs prints the multi-exit breakdown") {
    Scratch scratch;
    const CliResult r = run_cli(
        "macs --depth 6 --width 64 --input 32x32x3 --classes 10 --multi-exit",
        scratch.path);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("kind,name,macs") != std::string::npos);
    CHECK(r.out.find("conv1,1555200") != std::string::npos);
    CHECK(r.out.find("total,network,94762240") != std::string::npos);
}

TEST_CASE("delta-acc emits per-exit rows and layer-wise means") {
    Scratch scratch;
    const fs::path out = scratch.path / "delta";
    const CliResult r = run_cli("delta-acc --depth 2 --width 4 --epochs 3 "
                                "--seed 5 " +
                                    kTinyData + " --out " + out.string(),
                                scratch.path);
    CHECK(r.exit_code == 0);
    const CsvData rows = read_csv(out / "delta_acc.csv");
    CHECK(rows.rows.size() == 2);
    const CsvData means = read_csv(out / "delta_acc_means.csv");
    CHECK(means.rows.size() == 1);
}

TEST_SUITE_END();
