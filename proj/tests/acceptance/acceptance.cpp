// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance              all criteria at full size
//   acceptance --only 4     a single criterion
//
// Exit status is the number of failed criteria.

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "crowdmech/harness.hpp"

using namespace crowdmech;

namespace {

// Tolerances and sizes.
constexpr std::uint64_t kSeed = 2018;

constexpr int kOracleInstances = 20;
constexpr double kOracleTv = 0.05;
constexpr double kFlipTol = 1e-12;
constexpr int kConvergenceRuns = 100;
constexpr double kConvergenceTol = 0.05;
constexpr int kBiasRuns = 100;
constexpr double kEmBiasAtFullNoise = 0.2;
constexpr int kBestResponseBudget = 200;
constexpr double kBelowThreshold = 0.04;
constexpr int kPaymentRuns = 1000;
constexpr double kPaymentSpread = 0.1;
constexpr int kCollusionRuns = 100;
constexpr int kHonestTriggerLimit = 5;
constexpr double kSeparationSigma = 1.0;
constexpr double kWithinFraction = 0.05;
constexpr double kRewardGapPerTask = 0.05;
constexpr double kBellmanTol = 0.05;
constexpr double kExactTol = 1e-8;
constexpr long kBudgetObservations = 100000;

/// FNV-1a over the bit patterns of everything a criterion computed.
class Digest {
public:
    void add(double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        add_bits(bits);
    }
    void add(std::int64_t x) { add_bits(static_cast<std::uint64_t>(x)); }
    std::uint64_t value() const { return h_; }

private:
    void add_bits(std::uint64_t bits) {
        for (int b = 0; b < 8; ++b) {
            h_ ^= (bits >> (8 * b)) & 0xffu;
            h_ *= 0x100000001b3ull;
        }
    }
    std::uint64_t h_ = 0xcbf29ce484222325ull;
};

struct Outcome {
    bool pass = false;
    std::string detail;
    std::uint64_t digest = 0;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

LabelMatrix random_labels(int workers, int tasks, Rng& rng) {
    LabelTable t = LabelTable::Zero(workers, tasks);
    for (int j = 0; j < tasks; ++j) {
        bool any = false;
        for (int i = 0; i < workers; ++i) {
            if (rng.bernoulli(0.8)) {
                t(i, j) = rng.coin_label();
                any = true;
            }
        }
        if (!any) t(static_cast<int>(rng.below(static_cast<std::uint64_t>(workers))), j) = rng.coin_label();
    }
    return LabelMatrix(std::move(t));
}

// 1. Gibbs marginals against exact enumeration on tiny instances.
Outcome oracle_equivalence(int instances) {
    Digest d;
    Rng rng(kSeed);
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
        const int n = 1 + static_cast<int>(rng.below(3));
        const int m = 1 + static_cast<int>(rng.below(3));
        const auto labels = random_labels(n, m, rng);
        const auto exact = exact_posterior_oracle(labels, Priors{});
        const auto seq = gibbs_sample(labels, Priors{}, GibbsConfig{20000, 2000, rng.next(), GibbsInit::Uniform});
        for (int j = 0; j < m; ++j) {
            const double minus = static_cast<double>((seq.samples.col(j).array() == -1).count()) / seq.size();
            worst = std::max(worst, std::abs(minus - exact[static_cast<std::size_t>(j)]));
            d.add(minus);
        }
    }
    return {worst <= kOracleTv, fmt("max TV %.4f", worst) + fmt(" (tol %.2f)", kOracleTv), d.value()};
}

// 2. Symmetric priors give exact one-half marginals.
Outcome flip_symmetry(int instances) {
    Digest d;
    Rng rng(kSeed + 1);
    const Priors symmetric[] = {{1.0, 1.0, 1.0, 1.0}, {2.0, 2.0, 1.5, 1.5}, {0.7, 0.7, 3.0, 3.0}};
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
        const int n = 1 + static_cast<int>(rng.below(4));
        const int m = 1 + static_cast<int>(rng.below(8));
        const auto labels = random_labels(n, m, rng);
        for (const auto& p : symmetric) {
            for (double q : exact_posterior_oracle(labels, p)) {
                worst = std::max(worst, std::abs(q - 0.5));
                d.add(q);
            }
        }
    }
    return {worst <= kFlipTol, fmt("max |p - 0.5| = %.3g", worst), d.value()};
}

RoundSetup truthful_round(int workers, double p_high) {
    RoundSetup s;
    s.profiles.assign(static_cast<std::size_t>(workers), WorkerProfile{p_high, 0.02});
    s.strategies.assign(static_cast<std::size_t>(workers), WorkerStrategy{1.0, 1.0});
    s.tasks = 100;
    return s;
}

// 3. Estimates converge for a truthful high-effort crowd.
Outcome convergence(int runs) {
    Digest d;
    const auto setup = truthful_round(10, 0.9);
    double pobc_err = 0.0, acc_err = 0.0;
    for (int r = 0; r < runs; ++r) {
        const auto out = run_round(setup, PaymentRule{1.0, 0.0}, RunSeed{kSeed, static_cast<std::uint64_t>(r), 0, 0});
        pobc_err += (out.posterior.pobc_hat.array() - 0.9).abs().mean();
        const double acc = label_accuracy(out.posterior.labels_hat, out.draw.matrix.ground_truth());
        acc_err += std::abs(out.posterior.accuracy_hat - acc);
        d.add(out.posterior.accuracy_hat);
        d.add(acc);
    }
    pobc_err /= runs;
    acc_err /= runs;
    return {pobc_err <= kConvergenceTol && acc_err <= kConvergenceTol,
            fmt("mean |P~ - 0.9| = %.4f", pobc_err) + fmt(", mean |A~ - A| = %.4f", acc_err), d.value()};
}

// 4. Gibbs estimate stays less biased than EM confidence under noise.
Outcome bias_ordering(int runs) {
    Digest d;
    BiasSetup setup;
    setup.runs = runs;
    setup.seed = kSeed;
    setup.noise = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    const auto rows = bias_experiment(setup);
    std::map<double, std::map<std::string, double>> by_noise;
    for (const auto& r : rows) {
        by_noise[r.noise][r.method] = r.mean_abs_bias;
        d.add(r.mean_bias);
        d.add(r.std_bias);
    }
    bool ordered = true;
    std::string detail;
    for (const auto& [noise, m] : by_noise) {
        ordered = ordered && m.at("gibbs") < m.at("em");
        detail += fmt(" %.1f:", noise) + fmt("%.3f", m.at("gibbs")) + fmt("<%.3f", m.at("em"));
    }
    const double em_full = by_noise.at(1.0).at("em");
    return {ordered && em_full >= kEmBiasAtFullNoise, "gibbs<em" + detail + fmt(", em@1.0 = %.3f", em_full), d.value()};
}

// 5. Best response over the 5 x 5 strategy grid.
Outcome one_step_ic(int budget) {
    Digest d;
    const auto setup = truthful_round(10, 0.9);
    const auto above = best_response_grid(0, setup, PaymentRule{1.0, 0.0}, budget, kSeed);
    const auto below = best_response_grid(0, setup, PaymentRule{kBelowThreshold, 0.0}, budget, kSeed + 1);
    for (const auto* br : {&above, &below}) {
        for (int r = 0; r < 5; ++r) {
            for (int c = 0; c < 5; ++c) d.add(br->utilities(r, c));
        }
    }
    const bool ok = above.strategy.rpt == 1.0 && above.strategy.eft == 1.0 && below.strategy.eft == 0.0;
    return {ok,
            fmt("a=1 -> (rpt %.2f", above.strategy.rpt) + fmt(", eft %.2f)", above.strategy.eft) +
                fmt("; a=%.2f", kBelowThreshold) + fmt(" -> eft %.2f", below.strategy.eft),
            d.value()};
}

// 6. Payment robustness to the label prior and lower variance than DG13.
Outcome payment_robustness(int runs) {
    Digest d;
    PaymentSetup setup;
    setup.runs = runs;
    setup.seed = kSeed;
    double ours_lo = 1e300, ours_hi = -1e300, dg_lo = 1e300, dg_hi = -1e300;
    for (double tau : setup.tau_sweep) {
        const auto rows = payment_point(setup, "tau_plus", tau);
        ours_lo = std::min(ours_lo, rows[0].mean_payment);
        ours_hi = std::max(ours_hi, rows[0].mean_payment);
        dg_lo = std::min(dg_lo, rows[1].mean_payment);
        dg_hi = std::max(dg_hi, rows[1].mean_payment);
        for (const auto& r : rows) {
            d.add(r.mean_payment);
            d.add(r.std_payment);
        }
    }
    const double ours_spread = ours_hi - ours_lo, dg_spread = dg_hi - dg_lo;
    bool lower_std = true;
    std::string detail;
    for (double p : {0.6, 0.8, 0.95}) {
        const auto rows = payment_point(setup, "probe_pobc", p);
        lower_std = lower_std && rows[0].std_payment < rows[1].std_payment;
        detail += fmt(" P=%.2f:", p) + fmt("%.3f", rows[0].std_payment) + fmt("<%.3f", rows[1].std_payment);
        for (const auto& r : rows) {
            d.add(r.mean_payment);
            d.add(r.std_payment);
        }
    }
    const bool ok = ours_spread < kPaymentSpread && dg_spread > ours_spread && lower_std;
    return {ok, fmt("spread ours %.4f", ours_spread) + fmt(" dg13 %.4f;", dg_spread) + " std" + detail, d.value()};
}

// 7. Uniform-answer collusion is flagged and paid b - a/2.
Outcome collusion_defense(int runs) {
    Digest d;
    auto colluding = truthful_round(10, 0.9);
    colluding.constant_reporters = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const auto honest = truthful_round(10, 0.9);
    const PaymentRule rule{1.0, 0.0};
    int flagged = 0, honest_flagged = 0;
    bool paid_floor = true;
    for (int r = 0; r < runs; ++r) {
        const RunSeed path{kSeed, static_cast<std::uint64_t>(r), 0, 0};
        const auto c = run_round(colluding, rule, path);
        flagged += c.uninformative;
        for (int i = 0; i < c.draw.matrix.workers(); ++i) {
            for (int j : c.draw.matrix.assignment()[static_cast<std::size_t>(i)]) {
                paid_floor = paid_floor && std::abs(c.paid.per_task(i, j) - (rule.base - rule.scale / 2.0)) <= 1e-12;
            }
        }
        const auto h = run_round(honest, rule, path.with_episode(1));
        honest_flagged += h.uninformative;
        d.add(c.paid.grand_total);
        d.add(h.paid.grand_total);
    }
    const bool ok = flagged == runs && paid_floor && honest_flagged < kHonestTriggerLimit * runs / 100;
    return {ok,
            "collusion flagged " + std::to_string(flagged) + "/" + std::to_string(runs) +
                (paid_floor ? ", paid b - a/2" : ", payment mismatch") + "; honest flagged " +
                std::to_string(honest_flagged) + "/" + std::to_string(runs),
            d.value()};
}

struct PolicyComparison {
    WorkerKind kind;
    BenchmarkResult fixed;
    BenchmarkResult ril;
    double worst_reward_gap = 0.0;
};

PolicyComparison compare_policies(WorkerKind kind, int runs, int episodes, Digest& d) {
    ExperimentSpec spec = default_spec(kind);
    spec.master_seed = kSeed;
    spec.runs = runs;
    spec.episodes = episodes;
    PolicyComparison out{kind, fixed_optimal(spec), {}, 0.0};
    std::vector<double> per_run;
    for (int r = 0; r < runs; ++r) {
        auto trained = train(spec, static_cast<std::uint64_t>(r));
        const auto eval = evaluate_model(spec, trained.model, static_cast<std::uint64_t>(r));
        per_run.push_back(eval.mean_return);
        for (const auto& e : eval.episodes) {
            out.worst_reward_gap = std::max(out.worst_reward_gap, std::abs(e.return_hat - e.return_true));
            d.add(e.return_true);
            d.add(e.return_hat);
        }
        for (double c : trained.curve) d.add(c);
    }
    out.ril = summarize("ril", "epsilon=0", std::move(per_run), spec.tasks, 0);
    for (double x : out.fixed.run_returns) d.add(x);
    return out;
}

std::vector<PolicyComparison> policy_cache;

// 8. RIL against the best fixed scaling factor.
Outcome ril_learning(int runs, int episodes, bool keep) {
    Digest d;
    std::vector<PolicyComparison> all;
    for (auto kind : {WorkerKind::Mwu, WorkerKind::Rational, WorkerKind::QuantalResponse}) {
        all.push_back(compare_policies(kind, runs, episodes, d));
    }
    bool ok = true;
    std::string detail;
    for (const auto& c : all) {
        const double f = c.fixed.mean_return, r = c.ril.mean_return;
        bool pass;
        if (c.kind == WorkerKind::Mwu) {
            const double pooled = std::sqrt((c.fixed.std_return * c.fixed.std_return + c.ril.std_return * c.ril.std_return) / 2.0);
            pass = r > f && r - f >= kSeparationSigma * pooled;
            detail += fmt(" mwu: ril %.3f", r) + fmt(" vs fixed %.3f", f) + fmt(" (sep %.2f sigma)", pooled > 0 ? (r - f) / pooled : 0.0);
        } else {
            pass = std::abs(r - f) <= kWithinFraction * std::abs(f);
            detail += " " + to_string(c.kind) + fmt(": ril %.3f", r) + fmt(" vs fixed %.3f", f);
        }
        ok = ok && pass;
    }
    if (keep) policy_cache = std::move(all);
    return {ok, detail.substr(1), d.value()};
}

// 9. Estimated return tracks the true return after training.
Outcome reward_fidelity() {
    Digest d;
    const double tol = kRewardGapPerTask * default_spec().tasks;
    bool ok = !policy_cache.empty();
    std::string detail;
    for (const auto& c : policy_cache) {
        ok = ok && c.worst_reward_gap <= tol;
        detail += " " + to_string(c.kind) + fmt(": max |R^ - R| = %.3f", c.worst_reward_gap);
        d.add(c.worst_reward_gap);
    }
    if (policy_cache.empty()) detail = " needs criterion 8";
    return {ok, detail.substr(1) + fmt(" (tol %.1f)", tol), d.value()};
}

// 10. GP-TD: Bellman consistency on a toy chain, hand-solved systems, budget.
Outcome gp_td(long observations) {
    Digest d;
    std::string detail;

    // Toy MDP: phi cycles through {0.2, 0.4, 0.6, 0.8}; action 1 advances two
    // positions, action 0 one. Reward phi - 0.25 a. Uniform random behaviour.
    const std::vector<double> grid{0.0, 1.0};
    const double gamma = 0.5;
    QModelParams p;
    p.gamma = gamma;
    p.noise_var = 1e-6;
    p.grid = grid;
    p.length = {0.1, 1.0};
    p.novelty = 0.01;
    p.budget = 64;
    QModel model(p);
    Rng rng(kSeed);
    int pos = 0;
    double prev = 0.0;
    const int steps = 500;
    auto phi_of = [](int k) { return 0.2 * (k + 1); };
    for (int t = 0; t < steps; ++t) {
        const double a = rng.bernoulli(0.5) ? 1.0 : 0.0;
        model.observe({phi_of(pos), prev}, a, phi_of(pos) - 0.25 * a, t == steps - 1);
        pos = (pos + (a == 1.0 ? 2 : 1)) % 4;
        prev = a;
    }
    // Oracle: policy evaluation of the uniform policy by fixed-point iteration.
    double q[4][2] = {};
    for (int it = 0; it < 2000; ++it) {
        double next[4][2];
        for (int k = 0; k < 4; ++k) {
            for (int a = 0; a < 2; ++a) {
                const int k2 = (k + (a == 1 ? 2 : 1)) % 4;
                next[k][a] = phi_of(k) - 0.25 * a + gamma * 0.5 * (q[k2][0] + q[k2][1]);
            }
        }
        std::memcpy(q, next, sizeof q);
    }
    double bellman = 0.0;
    for (int k = 0; k < 4; ++k) {
        for (double ap : grid) {
            for (int a = 0; a < 2; ++a) {
                const double v = model.q_value({phi_of(k), ap}, grid[static_cast<std::size_t>(a)]);
                bellman = std::max(bellman, std::abs(v - q[k][a]));
                d.add(v);
            }
        }
    }
    detail += fmt("toy max err %.4f", bellman);

    // Scalar: one terminal point, Q = r / (1 + sigma^2).
    double exact_err = 0.0;
    {
        QModelParams s;
        s.noise_var = 0.5;
        s.grid = {1.0};
        QModel m(s);
        m.observe({0.3, 1.0}, 1.0, 1.5, true);
        exact_err = std::max(exact_err, std::abs(m.q_value({0.3, 1.0}, 1.0) - 1.5 / 1.5));
    }
    // 2 x 2: two-step episode. Q^ = (r1 + g r2, r2); w = (K + s I)^{-1} Q^.
    {
        QModelParams s;
        s.gamma = 0.8;
        s.noise_var = 0.3;
        s.grid = {0.1, 10.0};
        QModel m(s);
        const AugmentedState s1{0.4, 0.1}, s2{0.5, 10.0};
        const double r1 = 0.6, r2 = -0.2;
        m.observe(s1, 0.1, r1, false);
        m.observe(s2, 10.0, r2, true);
        const double k12 = kernel(KernelPoint{0.4, 0.0, 0.0}, KernelPoint{0.5, 1.0, 1.0}, s.length);
        const double qa = r1 + s.gamma * r2, qb = r2;
        const double a11 = 1.0 + s.noise_var, det = a11 * a11 - k12 * k12;
        const double w1 = (a11 * qa - k12 * qb) / det, w2 = (a11 * qb - k12 * qa) / det;
        exact_err = std::max(exact_err, std::abs(m.q_value(s1, 0.1) - (w1 + k12 * w2)));
        exact_err = std::max(exact_err, std::abs(m.q_value(s2, 10.0) - (k12 * w1 + w2)));
    }
    detail += fmt(", hand-solved err %.2g", exact_err);

    // Budget under a long random stream.
    QModelParams b;
    b.budget = 50;
    b.length.phi = 0.05;
    b.grid = {0.1, 1.0, 5.0, 10.0};
    QModel big(b);
    int largest = 0;
    Rng stream(kSeed + 7);
    for (long t = 0; t < observations; ++t) {
        const double ap = b.grid[stream.below(4)], a = b.grid[stream.below(4)];
        big.observe({stream.uniform(), ap}, a, stream.uniform(), t % 28 == 27);
        largest = std::max(largest, big.size());
    }
    d.add(static_cast<std::int64_t>(largest));
    detail += ", max dictionary " + std::to_string(largest) + "/" + std::to_string(b.budget) + " over " +
              std::to_string(observations) + " observations";

    const bool ok = bellman <= kBellmanTol && exact_err <= kExactTol && largest <= b.budget;
    return {ok, detail, d.value()};
}

// 11. Reduced versions of every criterion, run twice, give identical digests.
Outcome determinism() {
    auto reduced = [] {
        std::vector<std::uint64_t> out;
        out.push_back(oracle_equivalence(3).digest);
        out.push_back(flip_symmetry(5).digest);
        out.push_back(convergence(5).digest);
        out.push_back(bias_ordering(2).digest);
        out.push_back(one_step_ic(5).digest);
        out.push_back(payment_robustness(20).digest);
        out.push_back(collusion_defense(5).digest);
        out.push_back(ril_learning(1, 5, false).digest);
        out.push_back(gp_td(2000).digest);
        return out;
    };
    const auto first = reduced();
    const auto second = reduced();
    int same = 0;
    for (std::size_t k = 0; k < first.size(); ++k) same += first[k] == second[k];
    return {same == static_cast<int>(first.size()),
            std::to_string(same) + "/" + std::to_string(first.size()) + " reduced criteria replay bit-identically", 0};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int k = 1; k < argc; ++k) {
        if (std::strcmp(argv[k], "--only") == 0 && k + 1 < argc) only = std::atoi(argv[++k]);
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle equivalence", [] { return oracle_equivalence(kOracleInstances); }},
        {"flip symmetry", [] { return flip_symmetry(50); }},
        {"convergence", [] { return convergence(kConvergenceRuns); }},
        {"bias ordering", [] { return bias_ordering(kBiasRuns); }},
        {"one-step IC", [] { return one_step_ic(kBestResponseBudget); }},
        {"payment robustness", [] { return payment_robustness(kPaymentRuns); }},
        {"collusion defense", [] { return collusion_defense(kCollusionRuns); }},
        {"RIL learning", [] { return ril_learning(5, 100, true); }},
        {"reward fidelity", [] {
             if (policy_cache.empty()) ril_learning(5, 100, true);
             return reward_fidelity();
         }},
        {"GP-TD correctness", [] { return gp_td(kBudgetObservations); }},
        {"determinism", [] { return determinism(); }},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (only != 0 && only != id) continue;
        const auto t0 = std::chrono::steady_clock::now();
        const auto out = criteria[k].second();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !out.pass;
        std::printf("%s %2d %-20s %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                    out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed;
}
