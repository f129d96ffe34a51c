#include "crowdmech/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>

#include "crowdmech/error.hpp"

namespace crowdmech {

std::vector<PopulationMember> uniform_population(int n, WorkerKind kind, const WorkerProfile& profile, double lambda,
                                                 double eft0) {
    WorkerModel model;
    model.kind = kind;
    model.lambda = lambda;
    model.eft0 = eft0;
    return uniform_population(n, PopulationMember{profile, model});
}

std::vector<PopulationMember> uniform_population(int n, const PopulationMember& member) {
    if (n < 1) throw ConfigError("population needs at least one worker");
    return std::vector<PopulationMember>(static_cast<std::size_t>(n), member);
}

ExperimentSpec default_spec(WorkerKind kind) {
    ExperimentSpec spec;
    spec.population = uniform_population(10, kind);
    return spec;
}

void validate(const ExperimentSpec& s) {
    if (s.population.empty()) throw ConfigError("population is empty");
    if (s.tasks < 1) throw ConfigError("M must be >= 1");
    if (s.per_worker > s.tasks) throw ConfigError("m_i exceeds M");
    if (s.per_worker == 0 || s.per_worker < -1) throw ConfigError("m_i must be positive");
    if (s.grid.empty()) throw ConfigError("scaling grid is empty");
    for (double a : s.grid) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("scaling grid values must be finite and >= 0");
    }
    if (!(s.base >= 0.0)) throw ConfigError("base payment must be >= 0");
    validate(s.prior);
    validate(s.priors);
    validate(GibbsConfig{s.gibbs_samples, s.burn_in, 0});
    QModelParams ril = s.ril;
    ril.grid = s.grid;
    std::sort(ril.grid.begin(), ril.grid.end());
    validate(ril);
    if (!(s.epsilon >= 0.0 && s.epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (!(s.utility_exponent > 0.0)) throw ConfigError("utility exponent must be positive");
    if (!(s.eta > 0.0)) throw ConfigError("eta must be positive");
    if (s.steps_per_episode < 1) throw ConfigError("steps_per_episode must be >= 1");
    if (s.episodes < 0 || s.runs < 1 || s.eval_episodes < 1) throw ConfigError("episodes, runs and eval_episodes out of range");
    for (const auto& m : s.population) {
        validate(m.profile);
        validate(m.model);
    }
}

RequesterUtilityParams utility_params(const ExperimentSpec& spec) {
    RequesterUtilityParams p;
    const double k = spec.utility_exponent;
    if (k != 10.0) p.curve = [k](double a) { return std::pow(a, k); };
    p.eta = spec.eta;
    return p;
}

namespace {

std::vector<double> sorted_grid(const ExperimentSpec& spec) {
    std::vector<double> g = spec.grid;
    std::sort(g.begin(), g.end());
    return g;
}

}  // namespace

Simulator::Simulator(const ExperimentSpec& spec, std::uint64_t run)
    : spec_(std::make_shared<const ExperimentSpec>(spec)),
      run_(run),
      population_(spec.population, *std::max_element(spec.grid.begin(), spec.grid.end()), spec.base),
      utility_(utility_params(spec)) {
    validate(spec);
    setup_.profiles = population_.profiles();
    setup_.strategies.assign(spec.population.size(), WorkerStrategy{});
    setup_.prior = spec.prior;
    setup_.tasks = spec.tasks;
    setup_.per_worker.assign(spec.population.size(), spec.assigned());
    setup_.priors = spec.priors;
    setup_.gibbs_samples = spec.gibbs_samples;
    setup_.burn_in = spec.burn_in;
    setup_.gibbs_init = spec.gibbs_init;
    setup_.constant_reporters = population_.colluders();
    setup_.constant_label = kColluderLabel;
}

void Simulator::begin_episode() {
    if (spec_->reset_workers_each_episode) population_.reset_episode();
}

StepRecord Simulator::run_step(double action, std::uint64_t episode, std::uint64_t step) {
    const auto& g = spec_->grid;
    if (std::find(g.begin(), g.end(), action) == g.end()) throw ConfigError("action is not on the scaling grid");
    const PaymentRule rule{action, spec_->base};
    setup_.strategies = population_.strategies(rule, setup_.per_worker);

    const RunSeed path{spec_->master_seed, run_, episode, step};
    const RunSeed assignment_path = spec_->redraw_assignment ? path : path.with_step(0);
    const auto round = run_round(setup_, rule, path, assignment_path);
    population_.observe(round.draw, round.paid);

    StepRecord rec;
    rec.action = action;
    rec.eft.reserve(setup_.strategies.size());
    for (const auto& s : setup_.strategies) rec.eft.push_back(s.eft);
    rec.mean_eft = std::accumulate(rec.eft.begin(), rec.eft.end(), 0.0) / static_cast<double>(rec.eft.size());
    rec.phi_hat = state_repr(round.posterior);
    rec.accuracy_hat = round.posterior.accuracy_hat;
    rec.accuracy = label_accuracy(round.posterior.labels_hat, round.draw.matrix.ground_truth());
    rec.total_payment = round.paid.grand_total;
    rec.reward_hat = reward_signal(round.posterior, round.paid, utility_);
    rec.reward = requester_reward(rec.accuracy, round.paid, utility_);
    rec.uninformative = round.uninformative;
    return rec;
}

FixedController::FixedController(std::vector<double> schedule) : schedule_(std::move(schedule)) {
    if (schedule_.empty()) throw ConfigError("fixed schedule is empty");
}

double FixedController::choose(int step, const StepRecord*, Rng&) {
    return schedule_[static_cast<std::size_t>(step) % schedule_.size()];
}

int heuristic_region(double accuracy_hat) {
    for (int r = 1; r < 5; ++r) {
        if (accuracy_hat < kHeuristicBounds[static_cast<std::size_t>(r)]) return r - 1;
    }
    return 4;
}

HeuristicController::HeuristicController(std::array<double, 5> region_actions) : actions_(region_actions) {}

double HeuristicController::choose(int, const StepRecord* previous, Rng&) {
    // No estimate exists before the first step; treat it as a coin-flip accuracy.
    return actions_[static_cast<std::size_t>(heuristic_region(previous ? previous->accuracy_hat : 0.5))];
}

AugmentedState augmented_state(const StepRecord* previous, std::span<const double> grid) {
    if (previous) return {std::clamp(previous->phi_hat, 0.0, 1.0), previous->action};
    return {0.5, *std::min_element(grid.begin(), grid.end())};
}

RilController::RilController(QModel& model, Policy policy, bool learn)
    : model_(&model), policy_(std::move(policy)), learn_(learn) {
    std::sort(policy_.grid.begin(), policy_.grid.end());
    validate(policy_);
}

void RilController::begin_episode() { model_->end_episode(); }

double RilController::choose(int, const StepRecord* previous, Rng& rng) {
    state_ = augmented_state(previous, policy_.grid);
    action_ = select_action(*model_, state_, policy_, rng);
    return action_;
}

void RilController::feedback(const StepRecord& record, bool last_step) {
    if (learn_) model_->observe(state_, action_, record.reward_hat, last_step);
}

EpisodeTrace run_episode(Simulator& sim, Controller& controller, std::uint64_t episode) {
    const auto& spec = sim.spec();
    sim.begin_episode();
    controller.begin_episode();
    EpisodeTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(spec.steps_per_episode));
    for (int t = 0; t < spec.steps_per_episode; ++t) {
        const RunSeed path{spec.master_seed, sim.run(), episode, static_cast<std::uint64_t>(t)};
        Rng rng(path, Purpose::Policy);
        const double a = controller.choose(t, trace.steps.empty() ? nullptr : &trace.steps.back(), rng);
        trace.steps.push_back(sim.run_step(a, episode, static_cast<std::uint64_t>(t)));
        controller.feedback(trace.steps.back(), t + 1 == spec.steps_per_episode);
        trace.return_hat += trace.steps.back().reward_hat;
        trace.return_true += trace.steps.back().reward;
    }
    return trace;
}

namespace {

QModelParams ril_params(const ExperimentSpec& spec) {
    QModelParams p = spec.ril;
    p.grid = sorted_grid(spec);
    return p;
}

}  // namespace

TrainResult train(const ExperimentSpec& spec, std::uint64_t run) {
    validate(spec);
    TrainResult out{QModel(ril_params(spec)), {}, {}};
    Simulator sim(spec, run);
    RilController ctl(out.model, Policy{spec.epsilon, sorted_grid(spec)}, true);
    for (int e = 0; e < spec.episodes; ++e) {
        const auto trace = run_episode(sim, ctl, static_cast<std::uint64_t>(e));
        out.curve.push_back(trace.return_true);
        out.curve_hat.push_back(trace.return_hat);
    }
    return out;
}

EvalResult evaluate(const ExperimentSpec& spec, Controller& controller, std::uint64_t run) {
    Simulator sim(spec, run);
    EvalResult out;
    for (int e = 0; e < spec.eval_episodes; ++e) {
        out.episodes.push_back(run_episode(sim, controller, kEvalEpisodeOffset + static_cast<std::uint64_t>(e)));
        out.mean_return += out.episodes.back().return_true;
        out.mean_return_hat += out.episodes.back().return_hat;
    }
    out.mean_return /= spec.eval_episodes;
    out.mean_return_hat /= spec.eval_episodes;
    return out;
}

EvalResult evaluate_model(const ExperimentSpec& spec, QModel& model, std::uint64_t run) {
    RilController ctl(model, Policy{0.0, sorted_grid(spec)}, false);
    return evaluate(spec, ctl, run);
}

namespace {

double sample_std(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string format_actions(std::span<const double> actions) {
    std::ostringstream os;
    for (std::size_t k = 0; k < actions.size(); ++k) os << (k ? "|" : "") << actions[k];
    return os.str();
}

}  // namespace

BenchmarkResult summarize(std::string method, std::string choice, std::vector<double> run_returns, int tasks,
                          long candidates) {
    BenchmarkResult r;
    r.method = std::move(method);
    r.choice = std::move(choice);
    r.mean_return = std::accumulate(run_returns.begin(), run_returns.end(), 0.0) / static_cast<double>(run_returns.size());
    r.std_return = sample_std(run_returns);
    r.mean_normalized = r.mean_return / tasks;
    r.std_normalized = r.std_return / tasks;
    r.run_returns = std::move(run_returns);
    r.candidates = candidates;
    return r;
}

BenchmarkResult fixed_optimal(const ExperimentSpec& spec) {
    validate(spec);
    const auto grid = sorted_grid(spec);
    BenchmarkResult best;
    bool have = false;
    for (double a : grid) {
        std::vector<double> per_run;
        for (int r = 0; r < spec.runs; ++r) {
            FixedController ctl({a});
            per_run.push_back(evaluate(spec, ctl, static_cast<std::uint64_t>(r)).mean_return);
        }
        std::ostringstream choice;
        choice << "a=" << a;
        auto res = summarize("fixed_optimal", choice.str(), std::move(per_run), spec.tasks,
                             static_cast<long>(grid.size()));
        if (!have || res.mean_return > best.mean_return) {
            best = std::move(res);
            have = true;
        }
    }
    return best;
}

namespace {

long ipow(long base, int exp) {
    long r = 1;
    for (int k = 0; k < exp; ++k) r *= base;
    return r;
}

// Returns of every region map for one episode. A branch is opened only when
// the trajectory first enters a region, so maps that agree on the visited
// regions share one simulation.
void heuristic_search(Simulator sim, std::array<int, 5> map, const StepRecord* previous, int step, double ret,
                      std::uint64_t episode, const std::vector<double>& grid, std::vector<double>& returns) {
    const auto& spec = sim.spec();
    const int k = static_cast<int>(grid.size());
    if (step == spec.steps_per_episode) {
        std::vector<int> free;
        long fixed_index = 0;
        for (int r = 0; r < 5; ++r) {
            if (map[static_cast<std::size_t>(r)] < 0) {
                free.push_back(r);
            } else {
                fixed_index += map[static_cast<std::size_t>(r)] * ipow(k, r);
            }
        }
        const long combos = ipow(k, static_cast<int>(free.size()));
        for (long c = 0; c < combos; ++c) {
            long index = fixed_index, rest = c;
            for (int r : free) {
                index += (rest % k) * ipow(k, r);
                rest /= k;
            }
            returns[static_cast<std::size_t>(index)] += ret;
        }
        return;
    }
    const int region = heuristic_region(previous ? previous->accuracy_hat : 0.5);
    const int assigned = map[static_cast<std::size_t>(region)];
    for (int choice = 0; choice < k; ++choice) {
        if (assigned >= 0 && choice != assigned) continue;
        Simulator branch = assigned >= 0 ? std::move(sim) : sim;
        auto next = map;
        next[static_cast<std::size_t>(region)] = choice;
        const StepRecord rec = branch.run_step(grid[static_cast<std::size_t>(choice)], episode, static_cast<std::uint64_t>(step));
        heuristic_search(std::move(branch), next, &rec, step + 1, ret + rec.reward, episode, grid, returns);
    }
}

// Returns of every block schedule for one episode, sharing common prefixes.
void adaptive_search(Simulator sim, int block_index, int blocks, int block, long index, double ret,
                     std::uint64_t episode, const std::vector<double>& grid, std::vector<double>& returns) {
    if (block_index == blocks) {
        returns[static_cast<std::size_t>(index)] += ret;
        return;
    }
    const int k = static_cast<int>(grid.size());
    for (int choice = 0; choice < k; ++choice) {
        Simulator branch = choice + 1 == k ? std::move(sim) : sim;
        double r = ret;
        for (int t = 0; t < block; ++t) {
            const int step = block_index * block + t;
            r += branch.run_step(grid[static_cast<std::size_t>(choice)], episode, static_cast<std::uint64_t>(step)).reward;
        }
        adaptive_search(std::move(branch), block_index + 1, blocks, block, index + choice * ipow(k, block_index), r,
                        episode, grid, returns);
    }
}

template <class Search>
BenchmarkResult exhaustive(const ExperimentSpec& spec, long candidates, const std::string& method, Search search,
                           const std::function<std::string(long)>& describe) {
    std::vector<std::vector<double>> per_run(static_cast<std::size_t>(spec.runs),
                                             std::vector<double>(static_cast<std::size_t>(candidates), 0.0));
    for (int r = 0; r < spec.runs; ++r) {
        Simulator sim(spec, static_cast<std::uint64_t>(r));
        auto& acc = per_run[static_cast<std::size_t>(r)];
        for (int e = 0; e < spec.eval_episodes; ++e) {
            sim.begin_episode();
            search(sim, kEvalEpisodeOffset + static_cast<std::uint64_t>(e), acc);
        }
        for (auto& x : acc) x /= spec.eval_episodes;
    }
    long best = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (long c = 0; c < candidates; ++c) {
        double m = 0.0;
        for (const auto& run : per_run) m += run[static_cast<std::size_t>(c)];
        if (m > best_mean) {
            best_mean = m;
            best = c;
        }
    }
    std::vector<double> returns;
    for (const auto& run : per_run) returns.push_back(run[static_cast<std::size_t>(best)]);
    return summarize(method, describe(best), std::move(returns), spec.tasks, candidates);
}

}  // namespace

BenchmarkResult heuristic_optimal(const ExperimentSpec& spec) {
    validate(spec);
    const auto grid = sorted_grid(spec);
    const long k = static_cast<long>(grid.size());
    const long candidates = ipow(k, 5);
    return exhaustive(
        spec, candidates, "heuristic_optimal",
        [&](Simulator& sim, std::uint64_t episode, std::vector<double>& acc) {
            heuristic_search(sim, {-1, -1, -1, -1, -1}, nullptr, 0, 0.0, episode, grid, acc);
        },
        [&](long index) {
            std::vector<double> actions;
            for (int r = 0; r < 5; ++r, index /= k) actions.push_back(grid[static_cast<std::size_t>(index % k)]);
            return format_actions(actions);
        });
}

BenchmarkResult adaptive_optimal(const ExperimentSpec& spec, int block) {
    validate(spec);
    if (block < 1 || spec.steps_per_episode % block != 0) {
        throw ConfigError("steps_per_episode must be divisible by the block length");
    }
    const auto grid = sorted_grid(spec);
    const long k = static_cast<long>(grid.size());
    const int blocks = spec.steps_per_episode / block;
    const long candidates = ipow(k, blocks);
    return exhaustive(
        spec, candidates, "adaptive_optimal",
        [&](Simulator& sim, std::uint64_t episode, std::vector<double>& acc) {
            adaptive_search(sim, 0, blocks, block, 0, 0.0, episode, grid, acc);
        },
        [&](long index) {
            std::vector<double> actions;
            for (int b = 0; b < blocks; ++b, index /= k) actions.push_back(grid[static_cast<std::size_t>(index % k)]);
            return format_actions(actions);
        });
}

BenchmarkResult ril_benchmark(const ExperimentSpec& spec, std::vector<TrainResult>* trained) {
    validate(spec);
    std::vector<double> per_run;
    for (int r = 0; r < spec.runs; ++r) {
        auto result = train(spec, static_cast<std::uint64_t>(r));
        per_run.push_back(evaluate_model(spec, result.model, static_cast<std::uint64_t>(r)).mean_return);
        if (trained) trained->push_back(std::move(result));
    }
    return summarize("ril", "epsilon=0", std::move(per_run), spec.tasks, 0);
}

void write_benchmark(std::span<const BenchmarkResult> rows, std::ostream& out) {
    out << "method,choice,mean_return,std_return,mean_normalized,std_normalized,runs,candidates\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.choice << ',' << r.mean_return << ',' << r.std_return << ',' << r.mean_normalized
            << ',' << r.std_normalized << ',' << r.run_returns.size() << ',' << r.candidates << '\n';
    }
}

void write_curve(std::span<const double> curve, std::ostream& out) {
    out << "episode,return\n";
    for (std::size_t e = 0; e < curve.size(); ++e) out << e << ',' << curve[e] << '\n';
}

void write_trace(const EpisodeTrace& trace, std::ostream& out) {
    out << "step,action,mean_eft,phi_hat,accuracy_hat,accuracy,total_payment,reward_hat,reward,uninformative\n";
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const auto& s = trace.steps[t];
        out << t << ',' << s.action << ',' << s.mean_eft << ',' << s.phi_hat << ',' << s.accuracy_hat << ','
            << s.accuracy << ',' << s.total_payment << ',' << s.reward_hat << ',' << s.reward << ','
            << (s.uninformative ? 1 : 0) << '\n';
    }
}

LabelMatrix rte_like_dataset(const BiasSetup& setup, Rng& rng) {
    if (setup.labels_per_task < 1 || setup.labels_per_task > setup.workers) {
        throw ConfigError("labels_per_task must lie in [1, workers]");
    }
    if (!(setup.p_min >= 0.0 && setup.p_min <= setup.p_max && setup.p_max <= 1.0)) {
        throw ConfigError("worker accuracy range must satisfy 0 <= p_min <= p_max <= 1");
    }
    std::vector<double> p(static_cast<std::size_t>(setup.workers));
    for (auto& x : p) x = setup.p_min + (setup.p_max - setup.p_min) * rng.uniform();
    std::vector<Label> truth(static_cast<std::size_t>(setup.tasks));
    for (auto& t : truth) t = rng.bernoulli(setup.tau_plus) ? Label{1} : Label{-1};
    LabelTable labels = LabelTable::Zero(setup.workers, setup.tasks);
    for (int j = 0; j < setup.tasks; ++j) {
        const Label t = truth[static_cast<std::size_t>(j)];
        for (int i : rng.sample_subset(setup.workers, setup.labels_per_task)) {
            labels(i, j) = rng.bernoulli(p[static_cast<std::size_t>(i)]) ? t : static_cast<Label>(-t);
        }
    }
    return LabelMatrix(std::move(labels), std::move(truth));
}

std::vector<BiasRow> bias_experiment(const BiasSetup& setup, const LabelMatrix* dataset) {
    if (setup.runs < 1) throw ConfigError("bias experiment needs at least one run");
    if (dataset && !dataset->has_ground_truth()) throw ConfigError("bias experiment needs gold labels for every task");
    static const char* kMethods[] = {"gibbs", "em", "majority"};
    const std::size_t levels = setup.noise.size();
    std::vector<std::vector<std::array<double, 3>>> bias(levels);

    for (int r = 0; r < setup.runs; ++r) {
        const RunSeed run_path{setup.seed, static_cast<std::uint64_t>(r), 0, 0};
        Rng data_rng(run_path, Purpose::Dataset);
        const LabelMatrix base = dataset ? *dataset : rte_like_dataset(setup, data_rng);
        const auto& truth = base.ground_truth();
        for (std::size_t n = 0; n < levels; ++n) {
            const RunSeed path = run_path.with_episode(n);
            Rng noise_rng(path, Purpose::Noise);
            const LabelMatrix noisy = mix_noise(base, setup.noise[n], noise_rng);
            const auto gibbs = infer(noisy, setup.priors, GibbsConfig{setup.gibbs_samples, setup.burn_in, path.derive(Purpose::Gibbs), setup.gibbs_init});
            const auto em = em_estimate(noisy);
            const auto mv = majority_vote(noisy);
            bias[n].push_back({gibbs.accuracy_hat - label_accuracy(gibbs.labels_hat, truth),
                               em.accuracy_hat - label_accuracy(em.labels_hat, truth),
                               mv.vote_confidence - label_accuracy(mv.labels_hat, truth)});
        }
    }

    std::vector<BiasRow> rows;
    for (std::size_t n = 0; n < levels; ++n) {
        for (std::size_t m = 0; m < 3; ++m) {
            std::vector<double> xs;
            for (const auto& b : bias[n]) xs.push_back(b[m]);
            BiasRow row;
            row.noise = setup.noise[n];
            row.method = kMethods[m];
            for (double x : xs) {
                row.mean_bias += x;
                row.mean_abs_bias += std::abs(x);
            }
            row.mean_bias /= static_cast<double>(xs.size());
            row.mean_abs_bias /= static_cast<double>(xs.size());
            row.std_bias = sample_std(xs);
            rows.push_back(row);
        }
    }
    return rows;
}

void write_bias(std::span<const BiasRow> rows, std::ostream& out) {
    out << "noise,method,mean_bias,mean_abs_bias,std_bias\n";
    for (const auto& r : rows) {
        out << r.noise << ',' << r.method << ',' << r.mean_bias << ',' << r.mean_abs_bias << ',' << r.std_bias << '\n';
    }
}

std::array<PaymentRow, 2> payment_point(const PaymentSetup& setup, const std::string& sweep, double value) {
    if (setup.workers < 2) throw ConfigError("payment experiment needs a probe and at least one peer");
    if (setup.runs < 1) throw ConfigError("payment experiment needs at least one run");
    RoundSetup round;
    round.profiles.assign(static_cast<std::size_t>(setup.workers), WorkerProfile{setup.p_high, setup.cost_high});
    round.strategies.assign(static_cast<std::size_t>(setup.workers), WorkerStrategy{1.0, 1.0});
    round.tasks = setup.tasks;
    round.per_worker.assign(static_cast<std::size_t>(setup.workers), setup.per_worker);
    round.priors = setup.priors;
    round.gibbs_samples = setup.gibbs_samples;
    round.burn_in = setup.burn_in;
    round.gibbs_init = setup.gibbs_init;
    if (sweep == "tau_plus") {
        round.prior = TrueLabelPrior::from_plus(value);
    } else if (sweep == "peer_pobc") {
        for (std::size_t i = 1; i < round.profiles.size(); ++i) round.profiles[i].p_high = value;
    } else if (sweep == "probe_pobc") {
        round.profiles[0].p_high = value;
    } else {
        throw ConfigError("unknown payment sweep '" + sweep + "'");
    }

    double sum[2] = {0.0, 0.0}, sum_sq[2] = {0.0, 0.0};
    long cells = 0;
    for (int r = 0; r < setup.runs; ++r) {
        const RunSeed path{setup.seed, static_cast<std::uint64_t>(r), 0, 0};
        const auto outcome = run_round(round, setup.rule, path);
        const auto dg = dg13_payment_for(outcome.draw.matrix, 0, setup.rule, path.derive(Purpose::PeerChoice));
        for (int j : outcome.draw.matrix.assignment()[0]) {
            const double ours = outcome.paid.per_task(0, j);
            const double theirs = dg.per_task(0, j);
            sum[0] += ours;
            sum_sq[0] += ours * ours;
            sum[1] += theirs;
            sum_sq[1] += theirs * theirs;
            ++cells;
        }
    }
    std::array<PaymentRow, 2> rows;
    for (int m = 0; m < 2; ++m) {
        auto& row = rows[static_cast<std::size_t>(m)];
        row.sweep = sweep;
        row.value = value;
        row.mechanism = m == 0 ? "ours" : "dg13";
        row.mean_payment = sum[m] / static_cast<double>(cells);
        const double var = cells > 1 ? (sum_sq[m] - sum[m] * sum[m] / static_cast<double>(cells)) / static_cast<double>(cells - 1) : 0.0;
        row.std_payment = std::sqrt(std::max(0.0, var));
    }
    return rows;
}

std::vector<PaymentRow> payment_experiment(const PaymentSetup& setup) {
    std::vector<PaymentRow> rows;
    auto sweep = [&](const std::string& name, const std::vector<double>& values) {
        for (double v : values) {
            for (auto& row : payment_point(setup, name, v)) rows.push_back(std::move(row));
        }
    };
    sweep("tau_plus", setup.tau_sweep);
    sweep("peer_pobc", setup.peer_sweep);
    sweep("probe_pobc", setup.probe_sweep);
    return rows;
}

void write_payment(std::span<const PaymentRow> rows, std::ostream& out) {
    out << "setting,mechanism,mean_payment,std_payment\n";
    for (const auto& r : rows) {
        out << r.sweep << '=' << r.value << ',' << r.mechanism << ',' << r.mean_payment << ',' << r.std_payment << '\n';
    }
}

}  // namespace crowdmech
