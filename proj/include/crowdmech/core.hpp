#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "crowdmech/rng.hpp"

namespace crowdmech {

/// Binary label. 0 is reserved for "not assigned" and never enters inference.
using Label = std::int8_t;
inline constexpr Label kUnassigned = 0;

using LabelTable = Eigen::Matrix<Label, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Assignment = std::vector<std::vector<int>>;

inline bool is_binary_label(int v) { return v == -1 || v == 1; }

/// N x M worker-label table plus optional ground truth.
///
/// The assignment (task set of each worker) is derived from the non-zero
/// entries, so `labels(i, j) != 0` iff `j` is in `assignment()[i]` holds by
/// construction. Instances are immutable once built.
class LabelMatrix {
public:
    LabelMatrix() = default;
    explicit LabelMatrix(LabelTable labels, std::optional<std::vector<Label>> ground_truth = std::nullopt);

    int workers() const { return static_cast<int>(labels_.rows()); }
    int tasks() const { return static_cast<int>(labels_.cols()); }

    Label at(int worker, int task) const { return labels_(worker, task); }
    const LabelTable& labels() const { return labels_; }
    const Assignment& assignment() const { return assignment_; }
    int assigned_count(int worker) const { return static_cast<int>(assignment_[static_cast<std::size_t>(worker)].size()); }
    std::size_t total_assigned() const { return total_assigned_; }

    bool has_ground_truth() const { return ground_truth_.has_value(); }
    const std::vector<Label>& ground_truth() const;
    const std::optional<std::vector<Label>>& maybe_ground_truth() const { return ground_truth_; }

    /// Workers that labeled task j, in increasing index order.
    std::vector<int> labelers(int task) const;

    friend bool operator==(const LabelMatrix& a, const LabelMatrix& b);

private:
    LabelTable labels_;
    std::optional<std::vector<Label>> ground_truth_;
    Assignment assignment_;
    std::size_t total_assigned_ = 0;
};

/// Worker type. Low-effort accuracy is pinned at 0.5 and low-effort cost at 0.
struct WorkerProfile {
    double p_high = 0.9;
    double cost_high = 0.02;
};

struct WorkerStrategy {
    double rpt = 1.0;  // probability of truthful reporting
    double eft = 1.0;  // probability of high effort
};

/// Distribution of true labels; tau_minus + tau_plus = 1.
struct TrueLabelPrior {
    double tau_minus = 0.5;
    double tau_plus = 0.5;

    static TrueLabelPrior from_plus(double tau_plus) { return {1.0 - tau_plus, tau_plus}; }
};

void validate(const WorkerProfile& profile);
void validate(const WorkerStrategy& strategy);
void validate(const TrueLabelPrior& prior);

/// Probability that one submitted label equals the truth.
double pobc(const WorkerStrategy& strategy, const WorkerProfile& profile);

/// Uniform m_i-subset of the M tasks for every worker, independently.
/// Throws ConfigError when some m_i is negative or exceeds M.
Assignment assign_tasks(int tasks, std::span<const int> per_worker, Rng& rng);

/// Labels together with the realized per-cell effort draws (1 = high effort).
/// Worker learning models need the effort realization; inference never sees it.
struct LabelDraw {
    LabelMatrix matrix;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> high_effort;
};

/// Draws ground truth i.i.d. from `prior`, then each assigned label through
/// effort -> observation -> report. Marginally a label is correct with
/// probability pobc(strategy_i, profile_i), independently across cells.
LabelDraw simulate_labels(std::span<const WorkerProfile> profiles, std::span<const WorkerStrategy> strategies,
                          const TrueLabelPrior& prior, const Assignment& assignment, int tasks, Rng& rng);

LabelMatrix generate_labels(std::span<const WorkerProfile> profiles, std::span<const WorkerStrategy> strategies,
                            const TrueLabelPrior& prior, const Assignment& assignment, int tasks, Rng& rng);

/// Replaces every assigned label of the given workers by `label` (collusion on
/// a single answer). Ground truth is kept.
LabelMatrix with_constant_reports(const LabelMatrix& matrix, std::span<const int> workers, Label label);

/// Replaces a uniformly chosen floor(fraction * assigned) subset of assigned
/// labels by fair coins. Assignment and ground truth are unchanged.
LabelMatrix mix_noise(const LabelMatrix& matrix, double fraction, Rng& rng);

/// Reads `task_id,worker_id,label,gold` CSV. Ids are compacted to dense
/// indices in sorted order (numeric when every id is an integer).
LabelMatrix ingest_dataset(const std::filesystem::path& path);
LabelMatrix ingest_dataset(std::istream& in);

/// Writes the same format; ids are the dense indices.
void export_dataset(const LabelMatrix& matrix, std::ostream& out);
void export_dataset(const LabelMatrix& matrix, const std::filesystem::path& path);

/// Fraction of `estimate` entries equal to the ground truth.
double label_accuracy(std::span<const Label> estimate, std::span<const Label> truth);

}  // namespace crowdmech
