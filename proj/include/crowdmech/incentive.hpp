#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crowdmech/core.hpp"
#include "crowdmech/inference.hpp"

namespace crowdmech {

struct PaymentRule {
    double scale = 1.0;  // a_t
    double base = 0.0;   // b
};

void validate(const PaymentRule& rule);

struct PaymentRecord {
    Eigen::MatrixXd per_task;  // N x M, 0 where unassigned
    Eigen::VectorXd totals;    // row sums
    double grand_total = 0.0;
    int skipped_cells = 0;     // DG13 only: cells without a usable peer
};

struct RequesterUtilityParams {
    std::function<double(double)> curve = [](double a) {
        double a2 = a * a, a4 = a2 * a2, a8 = a4 * a4;
        return a8 * a2;
    };
    double eta = 0.001;
};

/// Throws ConfigError if eta <= 0 or the curve decreases somewhere on a
/// 1/1000 grid of [0, 1].
void validate(const RequesterUtilityParams& params);

/// a * (sc - 0.5) + b on every assigned cell; sc is read as 0 when the
/// round was flagged uninformative.
PaymentRecord payment(const PaymentRule& rule, const Eigen::MatrixXd& scores, const Assignment& assignment,
                      bool uninformative);

/// totals[i] - m_i * c_H * eft_i.
double worker_utility(const PaymentRecord& record, int worker, const WorkerProfile& profile,
                      const WorkerStrategy& strategy, int assigned);

/// F(accuracy) - eta * grand_total.
double requester_reward(double accuracy, const PaymentRecord& record, const RequesterUtilityParams& params);
double requester_reward(double accuracy, double grand_total, const RequesterUtilityParams& params);

/// 1[agree] - f_i f_k - (1 - f_i)(1 - f_k).
double dg13_score(Label own, Label peer, double f_own, double f_peer);

/// DG13 peer-prediction payments a * score + b with a uniformly drawn peer per
/// cell and +1-frequencies from disjoint halves of the other shared tasks.
PaymentRecord dg13_payment(const LabelMatrix& matrix, const PaymentRule& rule, std::uint64_t seed);

/// Same scoring restricted to one worker's row; other rows stay zero.
PaymentRecord dg13_payment_for(const LabelMatrix& matrix, int worker, const PaymentRule& rule, std::uint64_t seed);

/// max_i c_H / (P_H - 0.5). ConfigError when some P_H <= 0.5.
double one_step_ic_threshold(std::span<const WorkerProfile> profiles);

struct LongTermIcReport {
    double psi = 0.0;
    double grid_gap = 0.0;  // G_A
    double lhs = 0.0;       // eta * M * sum_{x != i} P_xH * G_A
    double rhs = 0.0;       // (F(1) - F(1 - psi)) / (1 - gamma)
    bool holds = false;
};

/// Smallest gap between two grid values. ConfigError for fewer than 2 values.
double grid_gap(std::span<const double> grid);

double psi(std::span<const WorkerProfile> profiles, const TrueLabelPrior& prior, int worker);

LongTermIcReport long_term_ic_check(const RequesterUtilityParams& params, std::span<const WorkerProfile> profiles,
                                    const TrueLabelPrior& prior, std::span<const double> grid, double gamma,
                                    int worker, int tasks);

/// One pass of generate -> infer -> detect -> pay.
struct RoundSetup {
    std::vector<WorkerProfile> profiles;
    std::vector<WorkerStrategy> strategies;
    TrueLabelPrior prior;
    int tasks = 100;
    std::vector<int> per_worker;  // empty means every worker labels every task
    Priors priors;
    int gibbs_samples = 500;
    int burn_in = 100;
    GibbsInit gibbs_init = GibbsInit::Majority;
    std::vector<int> constant_reporters;  // labels overwritten by constant_label
    Label constant_label = 1;
};

struct RoundOutcome {
    LabelDraw draw;  // matrix holds the submitted labels, after any constant reports
    PosteriorEstimate posterior;
    bool uninformative = false;
    PaymentRecord paid;
};

std::vector<int> resolve_per_worker(const RoundSetup& setup);

RoundOutcome run_round(const RoundSetup& setup, const PaymentRule& rule, const RunSeed& path);
/// Same, with the task assignment drawn from its own path.
RoundOutcome run_round(const RoundSetup& setup, const PaymentRule& rule, const RunSeed& path,
                       const RunSeed& assignment_path);

inline constexpr std::array<double, 5> kStrategyGrid{0.0, 0.25, 0.5, 0.75, 1.0};

struct BestResponse {
    WorkerStrategy strategy;
    double utility = 0.0;
    Eigen::Matrix<double, 5, 5> utilities;  // row = rpt index, column = eft index
};

/// Monte Carlo best response of one worker over the 5 x 5 (rpt, eft) grid,
/// everyone else playing setup.strategies. Replicate r uses the same random
/// path for every grid point. Ties go to lower eft, then lower rpt.
BestResponse best_response_grid(int worker, const RoundSetup& setup, const PaymentRule& rule, int budget,
                                std::uint64_t seed);

}  // namespace crowdmech
