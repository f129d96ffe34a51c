#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "crowdmech/error.hpp"
#include "crowdmech/harness.hpp"

namespace py = pybind11;
using namespace crowdmech;

namespace {

LabelMatrix to_matrix(const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& labels,
                      const std::optional<std::vector<int>>& truth) {
    LabelTable t = labels.cast<Label>();
    std::optional<std::vector<Label>> gt;
    if (truth) gt = std::vector<Label>(truth->begin(), truth->end());
    return LabelMatrix(std::move(t), std::move(gt));
}

py::dict estimate_to_dict(const PosteriorEstimate& est) {
    py::dict d;
    d["scores"] = est.scores;
    d["pobc_hat"] = est.pobc_hat;
    d["tau_minus"] = est.tau_hat.tau_minus;
    d["tau_plus"] = est.tau_hat.tau_plus;
    d["sigma"] = est.sigma;
    d["labels_hat"] = std::vector<int>(est.labels_hat.begin(), est.labels_hat.end());
    d["accuracy_hat"] = est.accuracy_hat;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bayesian inference aided incentive mechanism with reinforcement learning";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<InvalidPriorError>(m, "InvalidPriorError", PyExc_ValueError);
    py::register_exception<CoverageError>(m, "CoverageError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<Priors>(m, "Priors")
        .def(py::init<>())
        .def(py::init([](double a1, double a2, double bm, double bp) { return Priors{a1, a2, bm, bp}; }),
             py::arg("alpha1"), py::arg("alpha2"), py::arg("beta_minus"), py::arg("beta_plus"))
        .def_readwrite("alpha1", &Priors::alpha1)
        .def_readwrite("alpha2", &Priors::alpha2)
        .def_readwrite("beta_minus", &Priors::beta_minus)
        .def_readwrite("beta_plus", &Priors::beta_plus);

    m.def(
        "infer",
        [](const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& labels, const Priors& priors,
           int samples, int burn_in, std::uint64_t seed, bool majority_start) {
            const auto matrix = to_matrix(labels, std::nullopt);
            GibbsConfig cfg{samples, burn_in, seed, majority_start ? GibbsInit::Majority : GibbsInit::Uniform};
            return estimate_to_dict(infer(matrix, priors, cfg));
        },
        py::arg("labels"), py::arg("priors") = Priors{}, py::arg("samples") = 500, py::arg("burn_in") = 100,
        py::arg("seed") = 0, py::arg("majority_start") = true,
        "Gibbs inference on an N x M array of labels in {-1, 0, +1} (0 = unassigned).");

    m.def(
        "exact_posterior",
        [](const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& labels, const Priors& priors) {
            return exact_posterior_oracle(to_matrix(labels, std::nullopt), priors);
        },
        py::arg("labels"), py::arg("priors") = Priors{}, "Exact P[truth_j = -1] per task, M <= 16.");

    m.def(
        "majority_vote",
        [](const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& labels) {
            const auto r = majority_vote(to_matrix(labels, std::nullopt));
            return py::make_tuple(std::vector<int>(r.labels_hat.begin(), r.labels_hat.end()), r.vote_confidence);
        },
        py::arg("labels"));

    m.def(
        "payment",
        [](double scale, double base, const Eigen::MatrixXd& scores,
           const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& labels, bool uninformative) {
            const auto matrix = to_matrix(labels, std::nullopt);
            const auto rec = payment(PaymentRule{scale, base}, scores, matrix.assignment(), uninformative);
            return py::make_tuple(rec.per_task, rec.totals, rec.grand_total);
        },
        py::arg("scale"), py::arg("base"), py::arg("scores"), py::arg("labels"), py::arg("uninformative") = false,
        "Per-task payments, per-worker totals and the grand total.");

    m.def("mwu_update", &mwu_update, py::arg("eft"), py::arg("avg_high"), py::arg("avg_low"));
    m.def(
        "qr_response",
        [](double u_high, double u_low, double lambda) { return qr_response({u_high, u_low}, lambda).eft; },
        py::arg("u_high"), py::arg("u_low"), py::arg("lam") = 3.0);

    py::class_<ExperimentSpec>(m, "ExperimentSpec")
        .def_readwrite("tasks", &ExperimentSpec::tasks)
        .def_readwrite("per_worker", &ExperimentSpec::per_worker)
        .def_readwrite("grid", &ExperimentSpec::grid)
        .def_readwrite("base", &ExperimentSpec::base)
        .def_readwrite("gibbs_samples", &ExperimentSpec::gibbs_samples)
        .def_readwrite("burn_in", &ExperimentSpec::burn_in)
        .def_readwrite("epsilon", &ExperimentSpec::epsilon)
        .def_readwrite("steps_per_episode", &ExperimentSpec::steps_per_episode)
        .def_readwrite("episodes", &ExperimentSpec::episodes)
        .def_readwrite("runs", &ExperimentSpec::runs)
        .def_readwrite("eval_episodes", &ExperimentSpec::eval_episodes)
        .def_readwrite("master_seed", &ExperimentSpec::master_seed)
        .def_property_readonly("workers", &ExperimentSpec::workers);

    m.def(
        "default_spec", [](const std::string& kind) { return default_spec(parse_worker_kind(kind)); },
        py::arg("kind") = "rational");
    m.def(
        "load_spec",
        [](const std::string& json, const std::string& kind) {
            std::istringstream in(json);
            return load_spec(in, default_spec(parse_worker_kind(kind)));
        },
        py::arg("json"), py::arg("kind") = "rational", "Parse a JSON config on top of the default spec.");

    m.def(
        "evaluate_schedule",
        [](const ExperimentSpec& spec, std::vector<double> schedule, std::uint64_t run) {
            FixedController ctl(std::move(schedule));
            const auto r = evaluate(spec, ctl, run);
            return py::make_tuple(r.mean_return, r.mean_return_hat);
        },
        py::arg("spec"), py::arg("schedule"), py::arg("run") = 0,
        "Mean (true, estimated) episode return of a fixed schedule.");

    m.def(
        "train",
        [](const ExperimentSpec& spec, std::uint64_t run) {
            auto result = train(spec, run);
            const double eval = evaluate_model(spec, result.model, run).mean_return;
            return py::make_tuple(result.curve, result.curve_hat, eval);
        },
        py::arg("spec"), py::arg("run") = 0, "Train RIL; returns (curve, curve_hat, greedy evaluation return).");
}
