// Command-line front end: training, evaluation and the benchmark experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crowdmech/error.hpp"
#include "crowdmech/harness.hpp"

namespace fs = std::filesystem;
using namespace crowdmech;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<int> episodes;
    std::optional<int> runs;
    std::string scale = "desk";
    std::string kind = "mwu";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--episodes", c.episodes, "training episodes");
    cmd->add_option("--runs", c.runs, "independent runs");
    cmd->add_option("--scale", c.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--workers", c.kind, "worker model when no config is given")
        ->check(CLI::IsMember({"rational", "qr", "mwu"}));
}

ExperimentSpec build_spec(const Common& c) {
    ExperimentSpec spec = default_spec(parse_worker_kind(c.kind));
    if (c.scale == "paper") spec.episodes = 500;
    if (!c.config.empty()) spec = load_spec(fs::path(c.config), spec);
    if (c.seed) spec.master_seed = *c.seed;
    if (c.episodes) spec.episodes = *c.episodes;
    if (c.runs) spec.runs = *c.runs;
    validate(spec);
    return spec;
}

fs::path output_dir(const Common& c) {
    fs::path dir(c.out);
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(10);
    std::cout << "wrote " << path.string() << '\n';
    return out;
}

std::vector<double> parse_schedule(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("bad schedule entry '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("schedule is empty");
    return out;
}

void cmd_train(const Common& c) {
    const auto spec = build_spec(c);
    const auto dir = output_dir(c);
    for (int r = 0; r < spec.runs; ++r) {
        const auto result = train(spec, static_cast<std::uint64_t>(r));
        auto curve = open_out(dir / ("curve_run" + std::to_string(r) + ".csv"));
        write_curve(result.curve, curve);
        auto curve_hat = open_out(dir / ("curve_hat_run" + std::to_string(r) + ".csv"));
        write_curve(result.curve_hat, curve_hat);
        auto model = open_out(dir / ("model_run" + std::to_string(r) + ".txt"));
        result.model.save(model);
    }
}

void cmd_eval(const Common& c, const std::string& model_path, const std::string& schedule) {
    const auto spec = build_spec(c);
    const auto dir = output_dir(c);
    if (model_path.empty() == schedule.empty()) throw ConfigError("eval needs exactly one of --model or --schedule");
    auto summary = open_out(dir / "eval_summary.csv");
    summary << "run,mean_return,mean_return_hat\n";
    for (int r = 0; r < spec.runs; ++r) {
        EvalResult result;
        if (!model_path.empty()) {
            std::ifstream in(model_path);
            if (!in) throw ConfigError("cannot open model " + model_path);
            QModel model = QModel::load(in);
            result = evaluate_model(spec, model, static_cast<std::uint64_t>(r));
        } else {
            FixedController ctl(parse_schedule(schedule));
            result = evaluate(spec, ctl, static_cast<std::uint64_t>(r));
        }
        summary << r << ',' << result.mean_return << ',' << result.mean_return_hat << '\n';
        for (std::size_t e = 0; e < result.episodes.size(); ++e) {
            auto trace = open_out(dir / ("trace_run" + std::to_string(r) + "_ep" + std::to_string(e) + ".csv"));
            write_trace(result.episodes[e], trace);
        }
    }
}

void cmd_bench_policy(const Common& c, const std::vector<std::string>& methods, int block) {
    const auto spec = build_spec(c);
    const auto dir = output_dir(c);
    std::vector<BenchmarkResult> rows;
    for (const auto& m : methods) {
        if (m == "fixed") rows.push_back(fixed_optimal(spec));
        else if (m == "heuristic") rows.push_back(heuristic_optimal(spec));
        else if (m == "adaptive") rows.push_back(adaptive_optimal(spec, block));
        else if (m == "ril") rows.push_back(ril_benchmark(spec));
        else throw ConfigError("unknown method '" + m + "'");
        std::cout << rows.back().method << ": " << rows.back().mean_return << " (" << rows.back().std_return << ")\n";
    }
    auto out = open_out(dir / "benchmark.csv");
    write_benchmark(rows, out);
}

void cmd_bench_inference(const Common& c, const std::string& dataset) {
    BiasSetup setup;
    setup.runs = c.scale == "paper" ? 100 : 10;
    if (c.runs) setup.runs = *c.runs;
    if (c.seed) setup.seed = *c.seed;
    std::optional<LabelMatrix> data;
    if (!dataset.empty()) data = ingest_dataset(fs::path(dataset));
    const auto rows = bias_experiment(setup, data ? &*data : nullptr);
    auto out = open_out(output_dir(c) / "bias.csv");
    write_bias(rows, out);
}

void cmd_bench_payment(const Common& c) {
    PaymentSetup setup;
    setup.runs = c.scale == "paper" ? 1000 : 100;
    if (c.runs) setup.runs = *c.runs;
    if (c.seed) setup.seed = *c.seed;
    const auto rows = payment_experiment(setup);
    auto out = open_out(output_dir(c) / "payment.csv");
    write_payment(rows, out);
}

void cmd_oracle(const Common& c, const std::string& labels) {
    const auto matrix = ingest_dataset(fs::path(labels));
    ExperimentSpec spec = default_spec();
    if (!c.config.empty()) spec = load_spec(fs::path(c.config), spec);
    const auto marginals = exact_posterior_oracle(matrix, spec.priors);
    auto out = open_out(output_dir(c) / "oracle.csv");
    out << "task_id,p_minus\n";
    for (std::size_t j = 0; j < marginals.size(); ++j) out << j << ',' << marginals[j] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crowdsourcing incentive mechanism with Bayesian inference and reinforcement learning"};
    app.require_subcommand(1);

    Common common;
    std::string model_path, schedule, dataset, labels;
    std::vector<std::string> methods{"fixed", "heuristic", "adaptive", "ril"};
    int block = 4;

    auto* train_cmd = app.add_subcommand("train", "train RIL and write learning curves and models");
    add_common(train_cmd, common);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model or a fixed schedule");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--model", model_path, "saved model from train");
    eval_cmd->add_option("--schedule", schedule, "comma-separated scaling factors, cycled over steps");

    auto* policy_cmd = app.add_subcommand("bench-policy", "fixed / heuristic / adaptive optimal and RIL");
    add_common(policy_cmd, common);
    policy_cmd->add_option("--methods", methods, "subset of fixed,heuristic,adaptive,ril")->delimiter(',');
    policy_cmd->add_option("--block", block, "steps per block for the adaptive search");

    auto* inference_cmd = app.add_subcommand("bench-inference", "accuracy-estimate bias under noise mixing");
    add_common(inference_cmd, common);
    inference_cmd->add_option("--dataset", dataset, "task_id,worker_id,label,gold CSV")->check(CLI::ExistingFile);

    auto* payment_cmd = app.add_subcommand("bench-payment", "one-step payments against DG13");
    add_common(payment_cmd, common);

    auto* oracle_cmd = app.add_subcommand("oracle", "exact posterior marginals of a tiny dataset");
    add_common(oracle_cmd, common);
    oracle_cmd->add_option("--labels", labels, "task_id,worker_id,label,gold CSV")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train_cmd) cmd_train(common);
        else if (*eval_cmd) cmd_eval(common, model_path, schedule);
        else if (*policy_cmd) cmd_bench_policy(common, methods, block);
        else if (*inference_cmd) cmd_bench_inference(common, dataset);
        else if (*payment_cmd) cmd_bench_payment(common);
        else if (*oracle_cmd) cmd_oracle(common, labels);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
