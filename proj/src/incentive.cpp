#include "crowdmech/incentive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "crowdmech/error.hpp"

namespace crowdmech {

void validate(const PaymentRule& rule) {
    if (!std::isfinite(rule.scale) || rule.scale < 0.0) throw ConfigError("scaling factor must be finite and >= 0");
    if (!std::isfinite(rule.base) || rule.base < 0.0) throw ConfigError("base payment must be finite and >= 0");
}

void validate(const RequesterUtilityParams& params) {
    if (!(params.eta > 0.0)) throw ConfigError("eta must be positive");
    if (!params.curve) throw ConfigError("utility curve is empty");
    double prev = params.curve(0.0);
    for (int k = 1; k <= 1000; ++k) {
        const double v = params.curve(k / 1000.0);
        if (v < prev) throw ConfigError("utility curve must be nondecreasing on [0, 1]");
        prev = v;
    }
}

namespace {

void finish(PaymentRecord& rec) {
    rec.totals = rec.per_task.rowwise().sum();
    rec.grand_total = rec.totals.sum();
}

}  // namespace

PaymentRecord payment(const PaymentRule& rule, const Eigen::MatrixXd& scores, const Assignment& assignment,
                      bool uninformative) {
    validate(rule);
    if (static_cast<std::size_t>(scores.rows()) != assignment.size()) {
        throw ConfigError("score table and assignment disagree on the number of workers");
    }
    PaymentRecord rec;
    rec.per_task = Eigen::MatrixXd::Zero(scores.rows(), scores.cols());
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (int j : assignment[i]) {
            const double sc = uninformative ? 0.0 : scores(row, j);
            if (!(sc >= 0.0 && sc <= 1.0)) throw ConfigError("scores must lie in [0, 1]");
            rec.per_task(row, j) = rule.scale * (sc - 0.5) + rule.base;
        }
    }
    finish(rec);
    return rec;
}

double worker_utility(const PaymentRecord& record, int worker, const WorkerProfile& profile,
                      const WorkerStrategy& strategy, int assigned) {
    if (worker < 0 || worker >= record.totals.size()) throw ConfigError("worker index out of range");
    return record.totals(worker) - assigned * profile.cost_high * strategy.eft;
}

double requester_reward(double accuracy, double grand_total, const RequesterUtilityParams& params) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw ConfigError("accuracy must lie in [0, 1]");
    return params.curve(accuracy) - params.eta * grand_total;
}

double requester_reward(double accuracy, const PaymentRecord& record, const RequesterUtilityParams& params) {
    return requester_reward(accuracy, record.grand_total, params);
}

double dg13_score(Label own, Label peer, double f_own, double f_peer) {
    const double agree = own == peer ? 1.0 : 0.0;
    return agree - f_own * f_peer - (1.0 - f_own) * (1.0 - f_peer);
}

namespace {

// Returns false when the cell cannot be scored.
bool dg13_cell(const LabelMatrix& m, int i, int j, std::uint64_t seed, double& score) {
    std::vector<int> peers;
    for (int k = 0; k < m.workers(); ++k) {
        if (k != i && m.at(k, j) != kUnassigned) peers.push_back(k);
    }
    if (peers.empty()) return false;
    // Per-cell stream, so scoring one row reproduces the full-table result.
    Rng rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(m.tasks()) +
                                         static_cast<std::uint64_t>(j) + 1)));
    const int k = peers[static_cast<std::size_t>(rng.below(peers.size()))];

    int n_own = 0, plus_own = 0, n_peer = 0, plus_peer = 0, pos = 0;
    for (int t : m.assignment()[static_cast<std::size_t>(i)]) {
        if (t == j || m.at(k, t) == kUnassigned) continue;
        if (pos++ % 2 == 0) {
            ++n_own;
            plus_own += m.at(i, t) == 1 ? 1 : 0;
        } else {
            ++n_peer;
            plus_peer += m.at(k, t) == 1 ? 1 : 0;
        }
    }
    if (n_own == 0 || n_peer == 0) return false;
    score = dg13_score(m.at(i, j), m.at(k, j), static_cast<double>(plus_own) / n_own,
                       static_cast<double>(plus_peer) / n_peer);
    return true;
}

void dg13_row(const LabelMatrix& m, int i, const PaymentRule& rule, std::uint64_t seed, PaymentRecord& rec) {
    for (int j : m.assignment()[static_cast<std::size_t>(i)]) {
        double score = 0.0;
        if (dg13_cell(m, i, j, seed, score)) {
            rec.per_task(i, j) = rule.scale * score + rule.base;
        } else {
            ++rec.skipped_cells;
        }
    }
}

}  // namespace

PaymentRecord dg13_payment(const LabelMatrix& matrix, const PaymentRule& rule, std::uint64_t seed) {
    validate(rule);
    PaymentRecord rec;
    rec.per_task = Eigen::MatrixXd::Zero(matrix.workers(), matrix.tasks());
    for (int i = 0; i < matrix.workers(); ++i) dg13_row(matrix, i, rule, seed, rec);
    finish(rec);
    return rec;
}

PaymentRecord dg13_payment_for(const LabelMatrix& matrix, int worker, const PaymentRule& rule, std::uint64_t seed) {
    validate(rule);
    if (worker < 0 || worker >= matrix.workers()) throw ConfigError("worker index out of range");
    PaymentRecord rec;
    rec.per_task = Eigen::MatrixXd::Zero(matrix.workers(), matrix.tasks());
    dg13_row(matrix, worker, rule, seed, rec);
    finish(rec);
    return rec;
}

double one_step_ic_threshold(std::span<const WorkerProfile> profiles) {
    double threshold = 0.0;
    for (const auto& p : profiles) {
        if (!(p.p_high > 0.5)) throw ConfigError("IC threshold undefined when P_H <= 0.5");
        threshold = std::max(threshold, p.cost_high / (p.p_high - 0.5));
    }
    return threshold;
}

double grid_gap(std::span<const double> grid) {
    if (grid.size() < 2) throw ConfigError("scaling grid needs at least two values");
    std::vector<double> g(grid.begin(), grid.end());
    std::sort(g.begin(), g.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < g.size(); ++k) gap = std::min(gap, g[k] - g[k - 1]);
    return gap;
}

double psi(std::span<const WorkerProfile> profiles, const TrueLabelPrior& prior, int worker) {
    if (!(prior.tau_minus > 0.0 && prior.tau_plus > 0.0)) throw ConfigError("psi undefined for a degenerate prior");
    if (worker < 0 || static_cast<std::size_t>(worker) >= profiles.size()) throw ConfigError("worker index out of range");
    double prod = prior.tau_minus / prior.tau_plus + prior.tau_plus / prior.tau_minus;
    for (std::size_t x = 0; x < profiles.size(); ++x) {
        if (static_cast<int>(x) == worker) continue;
        const double p = profiles[x].p_high;
        prod *= std::sqrt(4.0 * p * (1.0 - p));
    }
    return prod;
}

LongTermIcReport long_term_ic_check(const RequesterUtilityParams& params, std::span<const WorkerProfile> profiles,
                                    const TrueLabelPrior& prior, std::span<const double> grid, double gamma,
                                    int worker, int tasks) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    LongTermIcReport rep;
    rep.psi = psi(profiles, prior, worker);
    rep.grid_gap = grid_gap(grid);
    double peers = 0.0;
    for (std::size_t x = 0; x < profiles.size(); ++x) {
        if (static_cast<int>(x) != worker) peers += profiles[x].p_high;
    }
    rep.lhs = params.eta * tasks * peers * rep.grid_gap;
    const double floor = std::max(0.0, 1.0 - rep.psi);
    rep.rhs = (params.curve(1.0) - params.curve(floor)) / (1.0 - gamma);
    rep.holds = rep.lhs > rep.rhs;
    return rep;
}

std::vector<int> resolve_per_worker(const RoundSetup& setup) {
    const auto n = setup.profiles.size();
    if (setup.strategies.size() != n) throw ConfigError("profiles and strategies differ in length");
    if (setup.per_worker.empty()) return std::vector<int>(n, setup.tasks);
    if (setup.per_worker.size() != n) throw ConfigError("per-worker task counts differ in length from profiles");
    return setup.per_worker;
}

RoundOutcome run_round(const RoundSetup& setup, const PaymentRule& rule, const RunSeed& path) {
    return run_round(setup, rule, path, path);
}

RoundOutcome run_round(const RoundSetup& setup, const PaymentRule& rule, const RunSeed& path,
                       const RunSeed& assignment_path) {
    const auto per_worker = resolve_per_worker(setup);
    Rng assign_rng(assignment_path, Purpose::Assignment);
    const auto assignment = assign_tasks(setup.tasks, per_worker, assign_rng);
    Rng label_rng(path, Purpose::Labels);
    RoundOutcome out;
    out.draw = simulate_labels(setup.profiles, setup.strategies, setup.prior, assignment, setup.tasks, label_rng);
    if (!setup.constant_reporters.empty()) {
        out.draw.matrix = with_constant_reports(out.draw.matrix, setup.constant_reporters, setup.constant_label);
    }
    const GibbsConfig gibbs{setup.gibbs_samples, setup.burn_in, path.derive(Purpose::Gibbs), setup.gibbs_init};
    out.posterior = infer(out.draw.matrix, setup.priors, gibbs);
    out.uninformative = detect_uninformative(out.posterior, setup.tasks);
    out.paid = payment(rule, out.posterior.scores, out.draw.matrix.assignment(), out.uninformative);
    return out;
}

BestResponse best_response_grid(int worker, const RoundSetup& setup, const PaymentRule& rule, int budget,
                                std::uint64_t seed) {
    if (budget <= 0) throw ConfigError("best-response budget must be positive");
    const auto per_worker = resolve_per_worker(setup);
    if (worker < 0 || static_cast<std::size_t>(worker) >= per_worker.size()) {
        throw ConfigError("worker index out of range");
    }
    BestResponse br;
    br.utilities.setZero();
    RoundSetup trial = setup;
    bool have = false;
    // eft outer, rpt inner: the first strict maximum wins, so ties favour lower eft.
    for (int e = 0; e < 5; ++e) {
        for (int r = 0; r < 5; ++r) {
            const WorkerStrategy s{kStrategyGrid[static_cast<std::size_t>(r)], kStrategyGrid[static_cast<std::size_t>(e)]};
            trial.strategies[static_cast<std::size_t>(worker)] = s;
            double total = 0.0;
            for (int rep = 0; rep < budget; ++rep) {
                const RunSeed path{seed, 0, static_cast<std::uint64_t>(rep), 0};
                const auto round = run_round(trial, rule, path);
                total += worker_utility(round.paid, worker, setup.profiles[static_cast<std::size_t>(worker)], s,
                                        per_worker[static_cast<std::size_t>(worker)]);
            }
            const double u = total / budget;
            br.utilities(r, e) = u;
            if (!have || u > br.utility) {
                br.utility = u;
                br.strategy = s;
                have = true;
            }
        }
    }
    return br;
}

}  // namespace crowdmech
