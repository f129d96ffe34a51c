#pragma once

#include <span>
#include <string>
#include <vector>

#include "crowdmech/core.hpp"
#include "crowdmech/incentive.hpp"

namespace crowdmech {

struct ExpectedUtilities {
    double u_high = 0.0;
    double u_low = 0.0;
};

/// Closed-form per-step utilities under truthful reporting:
/// u_high = m [a (P_H - 0.5) + b - c_H], u_low = m b.
ExpectedUtilities expected_utilities(const PaymentRule& rule, const WorkerProfile& profile, int assigned);

/// eft = 1 iff u_high > u_low.
WorkerStrategy rational_response(const ExpectedUtilities& u);

/// eft = logistic(lambda (u_high - u_low)).
WorkerStrategy qr_response(const ExpectedUtilities& u, double lambda);

/// eft (1 + uh) / (eft (uh - ul) + ul + 1). ConfigError if uh or ul <= -1.
double mwu_update(double eft, double avg_high, double avg_low);

enum class WorkerKind { Rational, QuantalResponse, Mwu, Colluder };

WorkerKind parse_worker_kind(const std::string& name);
std::string to_string(WorkerKind kind);

struct WorkerModel {
    WorkerKind kind = WorkerKind::Rational;
    double lambda = 3.0;  // QR only
    double eft0 = 0.2;    // MWU only
    // MWU only: realized per-task utilities are divided by this before
    // averaging. 0 means the payment bound a_max / 2 + b + c_H.
    double utility_scale = 1.0;
};

struct PopulationMember {
    WorkerProfile profile;
    WorkerModel model;
};

void validate(const WorkerModel& model);

/// Mutable state of a worker population across the steps of an episode.
///
/// Workers see only the announced rule, their own assignment, their own
/// realized effort draws and their own payments.
class Population {
public:
    /// `scale_max` and `base` fix the MWU utility normalizer a_max / 2 + b + c_H.
    Population(std::vector<PopulationMember> members, double scale_max, double base);

    int size() const { return static_cast<int>(members_.size()); }
    const std::vector<PopulationMember>& members() const { return members_; }
    std::vector<WorkerProfile> profiles() const;

    /// Restores every MWU worker to eft0 and clears its running averages.
    void reset_episode();

    /// Strategies for the coming step, given the announced rule.
    std::vector<WorkerStrategy> strategies(const PaymentRule& rule, std::span<const int> assigned) const;

    /// Feeds the realized step back to the learners.
    void observe(const LabelDraw& draw, const PaymentRecord& paid);

    std::vector<int> colluders() const;

    /// Current MWU probability (eft0 for non-MWU workers).
    double mwu_eft(int worker) const { return state_[static_cast<std::size_t>(worker)].eft; }

private:
    struct State {
        double eft = 0.2;
        double sum_high = 0.0;
        double sum_low = 0.0;
        long count_high = 0;
        long count_low = 0;
    };

    std::vector<PopulationMember> members_;
    std::vector<State> state_;
    double scale_max_;
    double base_;
};

/// Colluders report this label on every assigned task.
inline constexpr Label kColluderLabel = 1;

}  // namespace crowdmech
