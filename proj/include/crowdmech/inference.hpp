#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "crowdmech/core.hpp"

namespace crowdmech {

/// Dirichlet pseudo-counts. alpha1 > alpha2 encodes "workers beat a coin"
/// and breaks the global flip symmetry of the posterior.
struct Priors {
    double alpha1 = 2.0;
    double alpha2 = 1.0;
    double beta_minus = 1.0;
    double beta_plus = 1.0;
};

void validate(const Priors& priors);

/// Starting truth vector of the chain. Majority starts every task at its
/// majority label (ties to +1), which keeps a weak crowd out of the flipped mode.
enum class GibbsInit { Uniform, Majority };

struct GibbsConfig {
    int total_samples = 500;  // W
    int burn_in = 100;        // W0; samples W0+1..W are retained
    std::uint64_t seed = 0;
    GibbsInit init = GibbsInit::Uniform;

    int retained() const { return total_samples - burn_in; }
};

void validate(const GibbsConfig& config);

/// Retained truth samples, row s = sample s, one column per task.
struct SampleSequence {
    Eigen::Matrix<Label, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> samples;

    int size() const { return static_cast<int>(samples.rows()); }
    int tasks() const { return static_cast<int>(samples.cols()); }
};

struct PosteriorEstimate {
    Eigen::MatrixXd scores;        // N x M, 0 where unassigned
    Eigen::VectorXd pobc_hat;      // per worker
    TrueLabelPrior tau_hat;
    Eigen::VectorXd sigma;         // per-task log-ratio log P[-1] / P[+1]
    std::vector<Label> labels_hat;
    double accuracy_hat = 0.5;
};

/// log[B(beta_hat) * prod_i B(alpha_hat_i)] for a candidate truth vector: the
/// unnormalized collapsed log-posterior of the truth given the labels.
double joint_weight(std::span<const Label> candidate_truth, const LabelMatrix& matrix, const Priors& priors);

/// P[truth_j = -1 | labels, truth_{-j}] as the logistic of a log-weight
/// difference. Reference route through joint_weight; the sampler below uses
/// the equivalent count-ratio form.
double gibbs_conditional(int task, std::span<const Label> current, const LabelMatrix& matrix, const Priors& priors);

/// Single-chain Gibbs sampler: start per config.init, in-place sweeps over the
/// tasks, keeps sweeps W0+1..W.
SampleSequence gibbs_sample(const LabelMatrix& matrix, const Priors& priors, const GibbsConfig& config);

PosteriorEstimate estimate(const SampleSequence& samples, const LabelMatrix& matrix, const Priors& priors);

/// gibbs_sample followed by estimate.
PosteriorEstimate infer(const LabelMatrix& matrix, const Priors& priors, const GibbsConfig& config);

/// mean_i log P~_i + log max(tau~).
double uninformative_signal(const PosteriorEstimate& est);
double uninformative_threshold(int tasks);
bool detect_uninformative(const PosteriorEstimate& est, int tasks);

/// Mean of e^{|s|} / (1 + e^{|s|}) over tasks.
double accuracy_from_sigma(std::span<const double> sigma);

struct MajorityResult {
    std::vector<Label> labels_hat;
    double vote_confidence = 0.5;        // mean winning-vote share, used as its accuracy estimate
    std::optional<double> accuracy;      // against ground truth when present
};

/// Per-task majority, ties to +1. Throws CoverageError for an unlabeled task.
MajorityResult majority_vote(const LabelMatrix& matrix);

struct EmResult {
    std::vector<Label> labels_hat;
    Eigen::VectorXd pobc_hat;
    Eigen::VectorXd posterior_minus;  // per task P[truth = -1]
    double tau_minus = 0.5;
    double accuracy_hat = 0.5;        // mean max-posterior probability
    int iterations = 0;
    bool converged = false;
};

/// One-coin binary Dawid-Skene EM, started from soft majority vote.
EmResult em_estimate(const LabelMatrix& matrix, int max_iters = 200, double tol = 1e-10);

/// Exact per-task P[truth_j = -1] by enumerating every truth vector. M <= 16.
std::vector<double> exact_posterior_oracle(const LabelMatrix& matrix, const Priors& priors);

/// Exact joint posterior over all 2^M truth vectors. Index bit j set means
/// truth_j = +1. M <= 16.
std::vector<double> exact_joint_posterior(const LabelMatrix& matrix, const Priors& priors);

inline constexpr int kOracleMaxTasks = 16;

/// `task_id,sigma,label_hat` rows.
void write_task_estimates(const PosteriorEstimate& est, std::ostream& out);
/// `worker_id,pobc_hat` rows.
void write_worker_estimates(const PosteriorEstimate& est, std::ostream& out);

}  // namespace crowdmech
