// angleboost command line: simulate | train | predict | consistency-check.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "angleboost/angleboost.hpp"
#include "angleboost/model_io.hpp"

namespace {

namespace fs = std::filesystem;
using namespace angleboost;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int default_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

bool is_builtin_cost(const std::string& name) {
    return name == "zero_one" || name == "sim1" || name == "sim2" || name == "linear" ||
           name == "partitioned_linear";
}

CostMatrix resolve_cost(const std::string& spec, int k) {
    if (is_builtin_cost(spec)) return builtin_cost(spec, k);
    const CostMatrix costs = parse_cost_matrix_csv(spec);
    if (costs.k() != k)
        throw std::runtime_error("cost matrix " + spec + " is " + std::to_string(costs.k()) +
                                 "x" + std::to_string(costs.k()) + " but the data has " +
                                 std::to_string(k) + " classes");
    return costs;
}

MarginLoss resolve_loss(const std::string& kind, double a, double c) {
    if (kind == "exponential") return MarginLoss::exponential();
    if (kind == "logit") return MarginLoss::logit();
    if (kind == "lmum") return MarginLoss::lmum(a, c);
    throw UsageError("unknown loss kind '" + kind + "'");
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

std::vector<ColumnSchema> schema_with_overrides(const CsvTable& table, const std::string& label,
                                                const std::vector<std::string>& categorical) {
    std::vector<ColumnSchema> schema = infer_schema(table, label);
    for (const std::string& name : categorical) {
        bool found = false;
        for (ColumnSchema& col : schema) {
            if (col.name == name) {
                col.kind = ColumnKind::categorical;
                found = true;
            }
        }
        if (!found) throw UsageError("--categorical column '" + name + "' not in the CSV");
    }
    return schema;
}

struct SimulateOptions {
    std::string generator;
    std::string data_path;
    std::string label_column;
    double train_fraction = 0.04;
    bool no_stratify = false;
    std::string algo = "adaboost";
    std::string cost = "zero_one";
    int rounds = 200;
    int replications = 100;
    int n_train = 300;
    int n_test = 4700;
    int max_leaves = 4;
    std::uint64_t seed = 0;
    int threads = default_threads();
    std::string out_dir;
    bool quiet = false;
};

std::string flags_comment(const std::string& flags) {
    return "angleboost " + std::string(kVersion) + " | " + flags;
}

int cmd_simulate(const SimulateOptions& opt, const std::string& flags) {
    ExperimentSpec spec{.dataset = {}, .algorithm = Algorithm::adaboost,
                        .cost = builtin_cost("zero_one", 2)};
    int k = 0;
    if (!opt.generator.empty() && !opt.data_path.empty())
        throw UsageError("--gen and --data are mutually exclusive");
    if (opt.generator.empty() && opt.data_path.empty())
        throw UsageError("one of --gen or --data is required");

    if (!opt.generator.empty()) {
        spec.dataset.is_generator = true;
        if (opt.generator == "waveform") {
            spec.dataset.generator.kind = GeneratorKind::waveform;
            k = 3;
        } else if (opt.generator == "four_class") {
            spec.dataset.generator.kind = GeneratorKind::four_class_gaussian;
            k = 4;
        } else {
            throw UsageError("unknown generator '" + opt.generator + "'");
        }
        spec.dataset.generator.n_train = opt.n_train;
        spec.dataset.generator.n_test = opt.n_test;
    } else {
        if (opt.label_column.empty()) throw UsageError("--data requires --label");
        spec.dataset.is_generator = false;
        spec.dataset.csv_path = opt.data_path;
        spec.dataset.label_column = opt.label_column;
        spec.dataset.train_fraction = opt.train_fraction;
        spec.dataset.stratified = !opt.no_stratify;
        const CsvTable table = read_csv_table(opt.data_path);
        k = fit_label_map(table, opt.label_column).k();
    }

    if (opt.algo == "adaboost") spec.algorithm = Algorithm::adaboost;
    else if (opt.algo == "logitboost") spec.algorithm = Algorithm::logitboost;
    else throw UsageError("unknown algorithm '" + opt.algo + "'");

    spec.cost = resolve_cost(opt.cost, k);
    spec.rounds = opt.rounds;
    spec.replications = opt.replications;
    spec.seed = opt.seed;
    spec.max_leaves = opt.max_leaves;
    spec.threads = opt.threads;
    if (!opt.quiet)
        spec.on_replication = [](int rep, double cost) {
            std::cerr << "replication " << rep << ": final test cost " << cost << '\n';
        };

    const CostCurve curve = run_experiment(spec);
    if (curve.failed_replications.size() == curve.per_replication.rows())
        throw std::runtime_error("every replication failed");

    fs::create_directories(opt.out_dir);
    std::string comment = flags_comment(flags);
    if (!curve.failed_replications.empty()) {
        comment += " | failed_replications:";
        for (int rep : curve.failed_replications) comment += " " + std::to_string(rep);
    }
    {
        auto out = open_output((fs::path(opt.out_dir) / "curves.csv").string());
        write_curve_csv(out, curve, comment);
    }
    {
        auto out = open_output((fs::path(opt.out_dir) / "summary.csv").string());
        write_summary_csv(out, curve, comment);
    }
    std::cout << "final mean test cost " << detail::format_double(curve.final_mean()) << " (se "
              << detail::format_double(curve.final_se()) << ") over "
              << (curve.per_replication.rows() - curve.failed_replications.size())
              << " replications\n";
    return kExitOk;
}

struct TrainOptions {
    std::string data_path;
    std::string label_column;
    std::string algo = "adaboost";
    std::string cost = "zero_one";
    int rounds = 200;
    int max_leaves = 4;
    std::uint64_t seed = 0;
    std::vector<std::string> categorical;
    bool no_standardize = false;
    std::string model_out;
    std::string curve_out;
};

int cmd_train(const TrainOptions& opt, const std::string& flags) {
    if (opt.algo != "adaboost" && opt.algo != "logitboost")
        throw UsageError("unknown algorithm '" + opt.algo + "'");
    const CsvTable table = read_csv_table(opt.data_path);
    const auto schema = schema_with_overrides(table, opt.label_column, opt.categorical);
    LoadedCsv loaded = load_csv_full(opt.data_path, opt.label_column, schema);

    Model model;
    model.labels = loaded.labels;
    model.encoder = loaded.encoder;
    model.standardized = !opt.no_standardize;
    if (model.standardized) model.standardizer = standardize(loaded.dataset);
    model.cost = resolve_cost(opt.cost, loaded.labels.k());

    BoostConfig cfg;
    cfg.rounds = opt.rounds;
    cfg.max_leaves = opt.max_leaves;
    cfg.seed = opt.seed;
    const FitResult fit = opt.algo == "adaboost"
                              ? adaboost_fit_traced(loaded.dataset, model.cost, cfg)
                              : logitboost_fit_traced(loaded.dataset, model.cost, cfg);
    model.ensemble = fit.ensemble;
    for (const std::string& note : fit.diagnostics) std::cerr << note << '\n';

    {
        auto out = open_output(opt.model_out);
        out << "# " << flags_comment(flags) << '\n';
        write_model(out, model);
    }

    if (!opt.curve_out.empty()) {
        auto out = open_output(opt.curve_out);
        out << "# " << flags_comment(flags) << '\n';
        out << "round,accepted,beta,train_risk,train_cost\n";
        const SimplexCode& code = fit.ensemble.code();
        const std::size_t n = loaded.dataset.n();
        Matrix f(n, code.dim());
        std::vector<int> pred(n, 1);
        std::size_t next_member = 0;
        bool stale = true;
        for (const RoundRecord& rec : fit.trace) {
            while (next_member < fit.ensemble.members().size() &&
                   fit.ensemble.members()[next_member].round <= rec.round) {
                const EnsembleMember& m = fit.ensemble.members()[next_member];
                for (std::size_t i = 0; i < n; ++i) {
                    const auto w = code.vertex(m.tree.predict(loaded.dataset.x.row(i)));
                    auto row = f.row(i);
                    for (std::size_t r = 0; r < row.size(); ++r) row[r] += m.beta * w[r];
                }
                ++next_member;
                stale = true;
            }
            if (stale) {
                for (std::size_t i = 0; i < n; ++i) pred[i] = code.predict(f.row(i));
                stale = false;
            }
            out << rec.round << ',' << (rec.accepted ? 1 : 0) << ','
                << detail::format_double(rec.beta) << ',' << detail::format_double(rec.train_risk)
                << ',' << detail::format_double(test_cost(model.cost, pred, loaded.dataset.y))
                << '\n';
        }
    }

    std::cout << "trained " << opt.algo << " with " << model.ensemble.members().size()
              << " members on " << loaded.dataset.n() << " rows (" << loaded.labels.k()
              << " classes)\n";
    return kExitOk;
}

struct PredictOptions {
    std::string model_path;
    std::string data_path;
    std::string out_path;
};

int cmd_predict(const PredictOptions& opt, const std::string& flags) {
    std::ifstream model_in(opt.model_path);
    if (!model_in) throw std::runtime_error("cannot open model file: " + opt.model_path);
    std::string first;
    std::getline(model_in, first);
    if (first.rfind("# ", 0) != 0) {
        model_in.seekg(0);
    }
    const Model model = read_model(model_in);

    const CsvTable table = read_csv_table(opt.data_path);
    Matrix x = model.encoder.encode(table);
    if (model.standardized) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (!model.standardizer.scaled[j]) continue;
            for (std::size_t i = 0; i < x.rows(); ++i)
                x(i, j) = (x(i, j) - model.standardizer.mean[j]) / model.standardizer.sd[j];
        }
    }

    const MarginLoss loss = model.ensemble.loss_kind() == LossKind::exponential
                                ? MarginLoss::exponential()
                                : MarginLoss::logit();
    auto out = open_output(opt.out_path);
    out << "# " << flags_comment(flags) << '\n';
    out << "row,predicted_class,predicted_label";
    for (int t = 1; t <= model.ensemble.k(); ++t) out << ",expected_cost_" << t;
    out << '\n';
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const std::vector<double> f = model.ensemble.f(x.row(i));
        const int cls = model.ensemble.code().predict(f);
        const std::vector<double> costs =
            expected_costs_from_f(model.ensemble.code(), model.cost, loss, f);
        out << (i + 1) << ',' << cls << ','
            << detail::csv_quote(model.labels.classes[static_cast<std::size_t>(cls - 1)]);
        for (double c : costs) out << ',' << detail::format_double(c);
        out << '\n';
    }
    std::cout << "predicted " << x.rows() << " rows\n";
    return kExitOk;
}

struct ConsistencyOptions {
    std::string loss = "exponential";
    double a = 1.0;
    double c = 0.0;
    int k = 3;
    std::string cost = "zero_one";
    int trials = 200;
    std::uint64_t seed = 0;
    int threads = default_threads();
    std::string out_path;
};

int cmd_consistency_check(const ConsistencyOptions& opt, const std::string& flags) {
    if (opt.trials < 1) throw UsageError("--trials must be >= 1");
    if (opt.k < 2) throw UsageError("--k must be >= 2");
    const MarginLoss loss = resolve_loss(opt.loss, opt.a, opt.c);
    const CostMatrix costs = resolve_cost(opt.cost, opt.k);
    const SimplexCode code(opt.k);

    const ConsistencyReport report =
        check_fisher_consistency(code, costs, loss, opt.trials, opt.seed, opt.threads);

    if (!opt.out_path.empty()) {
        auto out = open_output(opt.out_path);
        out << "# " << flags_comment(flags) << '\n';
        out << "trial";
        for (int j = 1; j <= opt.k; ++j) out << ",p_" << j;
        out << ",bayes_class,predicted_class,pass\n";
        for (const ConsistencyTrial& trial : report.trials) {
            out << trial.trial;
            for (double p : trial.p) out << ',' << detail::format_double(p);
            out << ',' << trial.bayes_class << ',' << trial.predicted_class << ','
                << (trial.pass ? 1 : 0) << '\n';
        }
    }
    std::cout << "pass rate " << report.pass_rate << " over " << opt.trials << " trials\n";
    return report.pass_rate == 1.0 ? kExitOk : kExitRuntime;
}

std::string joined_args(int argc, char** argv) {
    std::ostringstream out;
    for (int i = 0; i < argc; ++i) out << (i ? " " : "") << argv[i];
    return out.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Angle-based cost-sensitive multicategory boosting"};
    app.require_subcommand(1);
    const std::string flags = joined_args(argc, argv);

    SimulateOptions sim;
    CLI::App* simulate = app.add_subcommand(
        "simulate", "Replicated train/test experiment with per-round cost curves");
    simulate->add_option("--gen", sim.generator, "Generator: waveform or four_class");
    simulate->add_option("--data", sim.data_path, "CSV dataset (re-split each replication)");
    simulate->add_option("--label", sim.label_column, "Label column for --data");
    simulate->add_option("--train-frac", sim.train_fraction,
                         "Training fraction for --data (default 0.04)");
    simulate->add_flag("--no-stratify", sim.no_stratify, "Split without stratifying by class");
    simulate->add_option("--algo", sim.algo, "Algorithm: adaboost or logitboost (default adaboost)");
    simulate->add_option("--cost", sim.cost,
                         "Cost matrix: zero_one, sim1, sim2, linear, partitioned_linear, or a CSV "
                         "path (default zero_one)");
    simulate->add_option("--rounds", sim.rounds, "Boosting rounds (default 200)");
    simulate->add_option("--reps", sim.replications, "Replications (default 100)");
    simulate->add_option("--n-train", sim.n_train, "Generator training size (default 300)");
    simulate->add_option("--n-test", sim.n_test, "Generator test size (default 4700)");
    simulate->add_option("--max-leaves", sim.max_leaves, "Tree leaf budget (default 4)");
    simulate->add_option("--seed", sim.seed, "Experiment seed (default 0)");
    simulate->add_option("--threads", sim.threads, "Worker threads (default: hardware)");
    simulate->add_option("--out", sim.out_dir, "Output directory for curves.csv and summary.csv")
        ->required();
    simulate->add_flag("--quiet", sim.quiet, "Suppress per-replication log lines");

    TrainOptions train;
    CLI::App* train_cmd = app.add_subcommand("train", "Fit an ensemble on a CSV and save it");
    train_cmd->add_option("--data", train.data_path, "Training CSV")->required();
    train_cmd->add_option("--label", train.label_column, "Label column")->required();
    train_cmd->add_option("--algo", train.algo, "adaboost or logitboost (default adaboost)");
    train_cmd->add_option("--cost", train.cost, "Cost matrix name or CSV path (default zero_one)");
    train_cmd->add_option("--rounds", train.rounds, "Boosting rounds (default 200)");
    train_cmd->add_option("--max-leaves", train.max_leaves, "Tree leaf budget (default 4)");
    train_cmd->add_option("--seed", train.seed, "Seed recorded with the run (default 0)");
    train_cmd->add_option("--categorical", train.categorical,
                          "Columns to force categorical (repeatable)");
    train_cmd->add_flag("--no-standardize", train.no_standardize,
                        "Skip standardization of numeric columns");
    train_cmd->add_option("--out", train.model_out, "Model output path")->required();
    train_cmd->add_option("--curve-out", train.curve_out,
                          "Optional per-round training curve CSV");

    PredictOptions predict;
    CLI::App* predict_cmd =
        app.add_subcommand("predict", "Score a CSV with a saved model (class + expected costs)");
    predict_cmd->add_option("--model", predict.model_path, "Model file from train")->required();
    predict_cmd->add_option("--data", predict.data_path, "CSV to score")->required();
    predict_cmd->add_option("--out", predict.out_path, "Predictions CSV path")->required();

    ConsistencyOptions consistency;
    CLI::App* consistency_cmd = app.add_subcommand(
        "consistency-check", "Numerical Fisher-consistency check for a loss and cost matrix");
    consistency_cmd->add_option("--loss", consistency.loss,
                                "exponential, logit, or lmum (default exponential)");
    consistency_cmd->add_option("--a", consistency.a, "lmum a parameter (default 1)");
    consistency_cmd->add_option("--c", consistency.c, "lmum c parameter (default 0)");
    consistency_cmd->add_option("--k", consistency.k, "Class count (default 3)");
    consistency_cmd->add_option("--cost", consistency.cost,
                                "Cost matrix name or CSV path (default zero_one)");
    consistency_cmd->add_option("--trials", consistency.trials, "Random distributions (default 200)");
    consistency_cmd->add_option("--seed", consistency.seed, "Seed (default 0)");
    consistency_cmd->add_option("--threads", consistency.threads,
                                "Worker threads (default: hardware)");
    consistency_cmd->add_option("--out", consistency.out_path, "Per-trial report CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, flags);
        if (train_cmd->parsed()) return cmd_train(train, flags);
        if (predict_cmd->parsed()) return cmd_predict(predict, flags);
        if (consistency_cmd->parsed()) return cmd_consistency_check(consistency, flags);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
