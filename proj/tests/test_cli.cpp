#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "angleboost/csv.hpp"
#include "angleboost/data.hpp"
#include "angleboost/eval.hpp"
#include "angleboost/model_io.hpp"
#include "doctest.h"

namespace {

namespace fs = std::filesystem;

const fs::path kWorkDir = fs::temp_directory_path() / "angleboost_cli_test";

int run_cli(const std::string& args) {
    const std::string command = std::string(ANGLEBOOST_CLI_PATH) + " " + args;
    const int status = std::system(command.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path write_dataset_csv(const std::string& name, int n, std::uint64_t seed) {
    fs::create_directories(kWorkDir);
    const fs::path path = kWorkDir / name;
    const angleboost::Dataset ds = angleboost::gen_four_class(n, seed);
    std::ofstream out(path);
    angleboost::export_csv(out, ds);
    return path;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

TEST_CASE("help and usage errors") {
    fs::create_directories(kWorkDir);
    CHECK(run_cli("--help > /dev/null") == 0);
    CHECK(run_cli("simulate --help > /dev/null") == 0);
    CHECK(run_cli("2>/dev/null") == 2);
    CHECK(run_cli(("simulate --gen nope --out " + (kWorkDir / "x").string() +
                   " 2>/dev/null").c_str()) == 2);
    CHECK(run_cli(("simulate --gen waveform --algo nope --out " + (kWorkDir / "x").string() +
                   " --reps 1 --rounds 1 2>/dev/null").c_str()) == 2);
    CHECK(run_cli("simulate --gen waveform 2>/dev/null") == 2);  // missing --out
}

TEST_CASE("simulate writes curve and summary files deterministically") {
    const fs::path out_dir = kWorkDir / "sim";
    const std::string flags = "simulate --gen waveform --algo adaboost --cost sim1 --rounds 3 "
                              "--reps 2 --n-train 50 --n-test 80 --seed 7 --threads 1 --quiet "
                              "--out " + out_dir.string();
    REQUIRE(run_cli(flags + " > /dev/null") == 0);
    REQUIRE(fs::exists(out_dir / "curves.csv"));
    REQUIRE(fs::exists(out_dir / "summary.csv"));

    const std::string curves_first = slurp(out_dir / "curves.csv");
    const std::string summary_first = slurp(out_dir / "summary.csv");
    const auto rows = read_rows(out_dir / "curves.csv");
    CHECK(rows.size() == 2 * 3 + 1);  // header + reps*rounds
    CHECK(rows[0] == std::vector<std::string>{"replication", "round", "test_cost"});

    REQUIRE(run_cli(flags + " > /dev/null") == 0);
    CHECK(slurp(out_dir / "curves.csv") == curves_first);
    CHECK(slurp(out_dir / "summary.csv") == summary_first);
}

TEST_CASE("train then predict reproduces in-memory predictions") {
    const fs::path csv = write_dataset_csv("train.csv", 80, 11);
    const fs::path model_path = kWorkDir / "model.txt";
    const fs::path curve_path = kWorkDir / "train_curve.csv";
    const fs::path pred_path = kWorkDir / "pred.csv";

    REQUIRE(run_cli("train --data " + csv.string() + " --label label --algo logitboost "
                    "--cost zero_one --rounds 5 --seed 3 --out " + model_path.string() +
                    " --curve-out " + curve_path.string() + " > /dev/null") == 0);
    REQUIRE(run_cli("predict --model " + model_path.string() + " --data " + csv.string() +
                    " --out " + pred_path.string() + " > /dev/null") == 0);

    // Re-run the model in process on the identically encoded matrix.
    std::ifstream model_in(model_path);
    std::string comment;
    std::getline(model_in, comment);
    const angleboost::Model model = angleboost::read_model(model_in);
    const angleboost::CsvTable table = angleboost::read_csv_table(csv.string());
    angleboost::Matrix x = model.encoder.encode(table);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        if (!model.standardizer.scaled[j]) continue;
        for (std::size_t i = 0; i < x.rows(); ++i)
            x(i, j) = (x(i, j) - model.standardizer.mean[j]) / model.standardizer.sd[j];
    }

    const auto rows = read_rows(pred_path);
    REQUIRE(rows.size() == table.rows.size() + 1);
    CHECK(rows[0][0] == "row");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const int expected = model.ensemble.predict(x.row(i - 1));
        CHECK(rows[i][1] == std::to_string(expected));
        CHECK(rows[i][2] == model.labels.classes[static_cast<std::size_t>(expected - 1)]);
    }

    SUBCASE("training curve risk column is non-increasing") {
        const auto curve = read_rows(curve_path);
        REQUIRE(curve.size() == 6);  // header + 5 rounds
        double previous = 1e300;
        for (std::size_t i = 1; i < curve.size(); ++i) {
            const double risk = std::stod(curve[i][3]);
            CHECK(risk <= previous + 1e-10);
            previous = risk;
        }
    }
}

TEST_CASE("predict with an empty ensemble emits class 1 and uniform costs") {
    const fs::path csv = write_dataset_csv("empty_model_data.csv", 10, 21);

    angleboost::Model model;
    model.ensemble = angleboost::Ensemble(4, angleboost::LossKind::exponential);
    model.cost = angleboost::builtin_cost("zero_one", 4);
    model.labels.column = "label";
    model.labels.classes = {"1", "2", "3", "4"};
    for (int j = 1; j <= 10; ++j) {
        angleboost::FeatureEncoder::Source src;
        src.kind = angleboost::ColumnKind::numeric;
        src.name = "x" + std::to_string(j);
        src.impute_value = 0.0;
        model.encoder.sources.push_back(src);
    }
    const fs::path model_path = kWorkDir / "empty_model.txt";
    {
        std::ofstream out(model_path);
        angleboost::write_model(out, model);
    }

    const fs::path pred_path = kWorkDir / "empty_pred.csv";
    REQUIRE(run_cli("predict --model " + model_path.string() + " --data " + csv.string() +
                    " --out " + pred_path.string() + " > /dev/null") == 0);
    const auto rows = read_rows(pred_path);
    REQUIRE(rows.size() == 11);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i][1] == "1");
        for (int t = 0; t < 4; ++t) CHECK(rows[i][3] == rows[i][static_cast<std::size_t>(3 + t)]);
    }
}

TEST_CASE("predict works on a CSV without the label column") {
    const fs::path csv = write_dataset_csv("unlabeled_train.csv", 30, 41);
    const fs::path model_path = kWorkDir / "unlabeled_model.txt";
    REQUIRE(run_cli("train --data " + csv.string() + " --label label --rounds 2 --out " +
                    model_path.string() + " > /dev/null") == 0);

    const angleboost::CsvTable table = angleboost::read_csv_table(csv.string());
    const fs::path unlabeled = kWorkDir / "unlabeled.csv";
    {
        std::ofstream out(unlabeled);
        for (std::size_t j = 0; j + 1 < table.header.size(); ++j)
            out << (j ? "," : "") << table.header[j];
        out << '\n';
        for (const auto& row : table.rows) {
            for (std::size_t j = 0; j + 1 < row.size(); ++j) out << (j ? "," : "") << row[j];
            out << '\n';
        }
    }
    const fs::path pred_path = kWorkDir / "unlabeled_pred.csv";
    CHECK(run_cli("predict --model " + model_path.string() + " --data " + unlabeled.string() +
                  " --out " + pred_path.string() + " > /dev/null") == 0);
    CHECK(read_rows(pred_path).size() == table.rows.size() + 1);
}

TEST_CASE("predict names a column missing from the CSV") {
    const fs::path csv = write_dataset_csv("schema_train.csv", 30, 31);
    const fs::path model_path = kWorkDir / "schema_model.txt";
    REQUIRE(run_cli("train --data " + csv.string() + " --label label --rounds 2 --out " +
                    model_path.string() + " > /dev/null") == 0);

    // Drop column x10 from the prediction file.
    const angleboost::CsvTable table = angleboost::read_csv_table(csv.string());
    const fs::path reduced = kWorkDir / "schema_reduced.csv";
    {
        std::ofstream out(reduced);
        for (std::size_t j = 0; j + 2 < table.header.size(); ++j) out << table.header[j] << ',';
        out << "label\n";
        for (const auto& row : table.rows) {
            for (std::size_t j = 0; j + 2 < row.size(); ++j) out << row[j] << ',';
            out << row.back() << '\n';
        }
    }
    const fs::path err_path = kWorkDir / "schema_err.txt";
    CHECK(run_cli("predict --model " + model_path.string() + " --data " + reduced.string() +
                  " --out " + (kWorkDir / "schema_pred.csv").string() + " 2> " +
                  err_path.string()) == 1);
    CHECK(slurp(err_path).find("x10") != std::string::npos);
}

TEST_CASE("simulate exits 1 when every replication fails") {
    // train-frac ~1 leaves no test rows, so each replication throws
    const fs::path csv = write_dataset_csv("allfail.csv", 24, 77);
    CHECK(run_cli("simulate --data " + csv.string() + " --label label --train-frac 0.99 "
                  "--rounds 2 --reps 2 --quiet --out " + (kWorkDir / "allfail_out").string() +
                  " > /dev/null 2>&1") == 1);
}

TEST_CASE("consistency-check subcommand") {
    const fs::path report = kWorkDir / "consistency.csv";
    CHECK(run_cli("consistency-check --loss exponential --k 3 --cost zero_one --trials 25 "
                  "--seed 5 --out " + report.string() + " > /dev/null") == 0);
    const auto rows = read_rows(report);
    REQUIRE(rows.size() == 26);
    CHECK(rows[0][0] == "trial");
    CHECK(run_cli("consistency-check --trials 0 2>/dev/null") == 2);
    CHECK(run_cli("consistency-check --loss lmum --a 1 --c 0 --k 4 --cost linear --trials 10 "
                  "--seed 2 > /dev/null") == 0);
    CHECK(run_cli("consistency-check --loss hinge --trials 5 2>/dev/null") == 2);
}

TEST_CASE("train accepts a cost matrix from a CSV file") {
    const fs::path csv = write_dataset_csv("custom_cost_data.csv", 40, 51);
    const fs::path cost_path = kWorkDir / "custom_cost.csv";
    std::ofstream(cost_path) << "0,1,4,4\n1,0,4,4\n2,2,0,1\n2,2,1,0\n";
    const fs::path model_path = kWorkDir / "custom_cost_model.txt";
    CHECK(run_cli("train --data " + csv.string() + " --label label --cost " + cost_path.string() +
                  " --rounds 3 --out " + model_path.string() + " > /dev/null") == 0);

    // wrong dimension is a runtime failure that names the mismatch
    const fs::path bad_cost = kWorkDir / "bad_cost.csv";
    std::ofstream(bad_cost) << "0,1\n1,0\n";
    const fs::path err_path = kWorkDir / "cost_err.txt";
    CHECK(run_cli("train --data " + csv.string() + " --label label --cost " + bad_cost.string() +
                  " --rounds 3 --out " + (kWorkDir / "nope.txt").string() + " 2> " +
                  err_path.string()) == 1);
    CHECK(slurp(err_path).find("classes") != std::string::npos);
}
