#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "crowdmech/incentive.hpp"
#include "crowdmech/inference.hpp"
#include "crowdmech/rng.hpp"

namespace crowdmech {

struct AugmentedState {
    double phi_prev = 0.5;  // previous mean PoBC estimate
    double a_prev = 0.0;    // previous scaling factor
};

struct LengthScales {
    double phi = 0.02;
    double action = 0.5;   // in grid-index units
};

/// Point in kernel coordinates: (phi, previous action, action).
struct KernelPoint {
    double phi = 0.0;
    double a_prev = 0.0;
    double a = 0.0;
};

/// Gaussian kernel exp(-[(dphi/l_phi)^2 + (da_prev/l_a)^2 + (da/l_a)^2] / 2).
double kernel(const KernelPoint& p, const KernelPoint& q, const LengthScales& ls);

struct QModelParams {
    double gamma = 0.99;
    double noise_var = 5.0;  // sigma^2
    LengthScales length;
    int budget = 200;
    double novelty = 0.1;    // nu
    std::vector<double> grid{0.1, 1.0, 5.0, 10.0};
};

void validate(const QModelParams& params);

/// One dictionary entry with the statistics of every observation it absorbed.
struct DictionaryPoint {
    std::uint64_t id = 0;
    AugmentedState state;
    double action = 0.0;
    double reward_mean = 0.0;
    double count = 0.0;
    double terminal = 0.0;                                    // observations that ended an episode
    std::unordered_map<std::uint64_t, double> successors;     // id -> transitions observed
};

/// GP temporal-difference Q-function
///
///     Q(x) = k(x)^T (K + diag(sigma^2 / n))^{-1} H^{-1} r
///
/// over a sparse dictionary of (state, action) points. H = I - gamma P where
/// P is the empirical successor distribution between dictionary points, so a
/// chain of distinct points gives the familiar unit diagonal with -gamma on
/// the link to the next point, and episode ends give plain unit rows.
///
/// Actions enter the kernel through their index in the grid.
class QModel {
public:
    explicit QModel(QModelParams params = {});

    const QModelParams& params() const { return params_; }
    int size() const { return static_cast<int>(points_.size()); }
    const std::vector<DictionaryPoint>& dictionary() const { return points_; }

    /// Records reward r for (s, a). Unless `episode_boundary`, the next
    /// observation is linked as the successor of this one.
    void observe(const AugmentedState& s, double action, double reward, bool episode_boundary);

    /// Drops the pending successor link (start of a fresh episode).
    void end_episode() { pending_ = -1; }

    /// 0 for an empty dictionary.
    double q_value(const AugmentedState& s, double action) const;

    /// Solves for the weights now. q_value refreshes lazily; call this before
    /// sharing the model across reader threads.
    void refresh() const;

    Eigen::MatrixXd kernel_matrix() const;
    Eigen::MatrixXd h_matrix() const;
    Eigen::VectorXd rewards() const;

    void save(std::ostream& out) const;
    static QModel load(std::istream& in);

private:
    KernelPoint embed(const AugmentedState& s, double action) const;
    int grid_index(double action) const;
    Eigen::VectorXd kernel_vector(const KernelPoint& x) const;
    void add_point(const KernelPoint& x, const Eigen::VectorXd& k, DictionaryPoint p);
    void evict(int index);
    void rebuild_inverse();

    QModelParams params_;
    std::vector<DictionaryPoint> points_;
    std::vector<KernelPoint> coords_;
    Eigen::MatrixXd k_inv_;  // (K + jitter I)^{-1}
    std::uint64_t next_id_ = 0;
    int pending_ = -1;
    int updates_since_rebuild_ = 0;

    mutable bool dirty_ = true;
    mutable Eigen::VectorXd weights_;
};

struct Policy {
    double epsilon = 0.2;
    std::vector<double> grid{0.1, 1.0, 5.0, 10.0};
};

void validate(const Policy& policy);

/// argmax_a Q(s, a); ties go to the smallest action.
double greedy_action(const QModel& model, const AugmentedState& s, std::span<const double> grid);

/// epsilon-greedy. Always consumes one uniform draw, plus one more when exploring.
double select_action(const QModel& model, const AugmentedState& s, const Policy& policy, Rng& rng);

/// Mean of pobc_hat over workers.
double state_repr(const PosteriorEstimate& est);

/// requester_reward evaluated at the estimated accuracy.
double reward_signal(const PosteriorEstimate& est, const PaymentRecord& record, const RequesterUtilityParams& params);

}  // namespace crowdmech
