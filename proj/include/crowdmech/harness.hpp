#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdmech/core.hpp"
#include "crowdmech/incentive.hpp"
#include "crowdmech/inference.hpp"
#include "crowdmech/ril.hpp"
#include "crowdmech/workers.hpp"

namespace crowdmech {

struct ExperimentSpec {
    std::vector<PopulationMember> population;  // N = population.size()
    int tasks = 100;                           // M
    int per_worker = -1;                       // m_i; -1 means M
    std::vector<double> grid{0.1, 1.0, 5.0, 10.0};
    double base = 0.0;                         // b
    TrueLabelPrior prior;
    Priors priors;
    int gibbs_samples = 500;                   // W
    int burn_in = 100;                         // W0
    GibbsInit gibbs_init = GibbsInit::Majority;
    QModelParams ril;
    double epsilon = 0.2;
    double utility_exponent = 10.0;            // F(A) = A^exponent
    double eta = 0.001;
    int steps_per_episode = 28;
    int episodes = 100;
    int runs = 5;
    int eval_episodes = 10;
    std::uint64_t master_seed = 2018;
    bool redraw_assignment = true;
    bool reset_workers_each_episode = true;

    int workers() const { return static_cast<int>(population.size()); }
    int assigned() const { return per_worker < 0 ? tasks : per_worker; }
};

/// N identical workers of one kind.
std::vector<PopulationMember> uniform_population(int n, WorkerKind kind, const WorkerProfile& profile = {},
                                                 double lambda = 3.0, double eft0 = 0.2);
std::vector<PopulationMember> uniform_population(int n, const PopulationMember& member);

/// Defaults with N = 10 workers of the given kind.
ExperimentSpec default_spec(WorkerKind kind = WorkerKind::Rational);

void validate(const ExperimentSpec& spec);

RequesterUtilityParams utility_params(const ExperimentSpec& spec);

/// Loads a JSON config on top of `base`. Keys follow the ExperimentSpec field
/// names; unknown keys are rejected.
ExperimentSpec load_spec(std::istream& in, ExperimentSpec base);
ExperimentSpec load_spec(const std::filesystem::path& path, ExperimentSpec base);

struct StepRecord {
    double action = 0.0;
    std::vector<double> eft;
    double mean_eft = 0.0;
    double phi_hat = 0.0;         // mean pobc_hat
    double accuracy_hat = 0.5;    // A~
    double accuracy = 0.5;        // true A
    double total_payment = 0.0;
    double reward_hat = 0.0;      // F(A~) - eta * total
    double reward = 0.0;          // F(A) - eta * total
    bool uninformative = false;
};

struct EpisodeTrace {
    std::vector<StepRecord> steps;
    double return_hat = 0.0;
    double return_true = 0.0;
};

/// Worker population plus the wiring of one step:
/// strategies -> labels -> inference -> detection -> payment -> learner feedback.
class Simulator {
public:
    Simulator(const ExperimentSpec& spec, std::uint64_t run);

    const ExperimentSpec& spec() const { return *spec_; }
    std::uint64_t run() const { return run_; }
    Population& population() { return population_; }

    void begin_episode();
    StepRecord run_step(double action, std::uint64_t episode, std::uint64_t step);

private:
    std::shared_ptr<const ExperimentSpec> spec_;
    std::uint64_t run_;
    Population population_;
    RoundSetup setup_;
    RequesterUtilityParams utility_;
};

/// Chooses a_t before each step and hears back the realized record.
class Controller {
public:
    virtual ~Controller() = default;
    virtual void begin_episode() {}
    virtual double choose(int step, const StepRecord* previous, Rng& rng) = 0;
    virtual void feedback(const StepRecord& record, bool last_step) {
        (void)record;
        (void)last_step;
    }
};

class FixedController : public Controller {
public:
    explicit FixedController(std::vector<double> schedule);
    double choose(int step, const StepRecord* previous, Rng& rng) override;

private:
    std::vector<double> schedule_;
};

/// Region boundaries on the previous step's A~.
inline constexpr std::array<double, 6> kHeuristicBounds{0.0, 0.6, 0.7, 0.8, 0.9, 1.0};
int heuristic_region(double accuracy_hat);

class HeuristicController : public Controller {
public:
    explicit HeuristicController(std::array<double, 5> region_actions);
    double choose(int step, const StepRecord* previous, Rng& rng) override;

private:
    std::array<double, 5> actions_;
};

class RilController : public Controller {
public:
    RilController(QModel& model, Policy policy, bool learn);
    void begin_episode() override;
    double choose(int step, const StepRecord* previous, Rng& rng) override;
    void feedback(const StepRecord& record, bool last_step) override;

private:
    QModel* model_;
    Policy policy_;
    bool learn_;
    AugmentedState state_;
    double action_ = 0.0;
};

/// The augmented state before step t.
AugmentedState augmented_state(const StepRecord* previous, std::span<const double> grid);

EpisodeTrace run_episode(Simulator& sim, Controller& controller, std::uint64_t episode);

struct TrainResult {
    QModel model;
    std::vector<double> curve;      // per-episode true return
    std::vector<double> curve_hat;  // per-episode estimated return
};

TrainResult train(const ExperimentSpec& spec, std::uint64_t run);

/// Episode indices used for evaluation, disjoint from training indices.
inline constexpr std::uint64_t kEvalEpisodeOffset = 1'000'000;

struct EvalResult {
    std::vector<EpisodeTrace> episodes;
    double mean_return = 0.0;
    double mean_return_hat = 0.0;
};

EvalResult evaluate(const ExperimentSpec& spec, Controller& controller, std::uint64_t run);
EvalResult evaluate_model(const ExperimentSpec& spec, QModel& model, std::uint64_t run);

struct BenchmarkResult {
    std::string method;
    std::string choice;                    // description of the selected schedule
    std::vector<double> run_returns;       // mean episode return per run
    double mean_return = 0.0;
    double std_return = 0.0;               // std over runs
    double mean_normalized = 0.0;          // R / M
    double std_normalized = 0.0;
    long candidates = 0;
};

BenchmarkResult summarize(std::string method, std::string choice, std::vector<double> run_returns, int tasks,
                          long candidates);

BenchmarkResult fixed_optimal(const ExperimentSpec& spec);
BenchmarkResult heuristic_optimal(const ExperimentSpec& spec);
BenchmarkResult adaptive_optimal(const ExperimentSpec& spec, int block = 4);
BenchmarkResult ril_benchmark(const ExperimentSpec& spec, std::vector<TrainResult>* trained = nullptr);

void write_benchmark(std::span<const BenchmarkResult> rows, std::ostream& out);
void write_curve(std::span<const double> curve, std::ostream& out);
void write_trace(const EpisodeTrace& trace, std::ostream& out);

// Inference bias experiment.

struct BiasSetup {
    int tasks = 800;
    int workers = 164;
    int labels_per_task = 10;
    double p_min = 0.65;
    double p_max = 0.95;
    double tau_plus = 0.5;
    std::vector<double> noise{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    int runs = 100;
    std::uint64_t seed = 2018;
    Priors priors;
    int gibbs_samples = 500;
    int burn_in = 100;
    GibbsInit gibbs_init = GibbsInit::Majority;
};

/// Synthetic stand-in for a real labeling dataset: every task gets
/// labels_per_task distinct random workers with accuracies U[p_min, p_max].
LabelMatrix rte_like_dataset(const BiasSetup& setup, Rng& rng);

struct BiasRow {
    double noise = 0.0;
    std::string method;
    double mean_bias = 0.0;      // estimated accuracy - true accuracy
    double mean_abs_bias = 0.0;
    double std_bias = 0.0;
};

/// Rows are noise-major, methods in the order gibbs, em, majority.
/// With `dataset`, noise is mixed into that matrix instead of fresh synthetic data.
std::vector<BiasRow> bias_experiment(const BiasSetup& setup, const LabelMatrix* dataset = nullptr);
void write_bias(std::span<const BiasRow> rows, std::ostream& out);

// One-step payment experiment.

struct PaymentSetup {
    int tasks = 100;
    int workers = 10;
    int per_worker = 90;
    double p_high = 0.8;
    double cost_high = 0.02;
    PaymentRule rule{1.0, 0.0};
    std::vector<double> tau_sweep{0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
    std::vector<double> peer_sweep{0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
    std::vector<double> probe_sweep{0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
    int runs = 1000;
    std::uint64_t seed = 2018;
    Priors priors;
    int gibbs_samples = 500;
    int burn_in = 100;
    GibbsInit gibbs_init = GibbsInit::Majority;
};

struct PaymentRow {
    std::string sweep;   // tau_plus, peer_pobc or probe_pobc
    double value = 0.0;
    std::string mechanism;
    double mean_payment = 0.0;  // mean per-task payment to worker 0
    double std_payment = 0.0;   // std of per-task payments to worker 0, pooled over runs
};

/// Payments to worker 0 (truthful, high effort): {ours, dg13}.
std::array<PaymentRow, 2> payment_point(const PaymentSetup& setup, const std::string& sweep, double value);
std::vector<PaymentRow> payment_experiment(const PaymentSetup& setup);
void write_payment(std::span<const PaymentRow> rows, std::ostream& out);

}  // namespace crowdmech
