#include "crowdmech/workers.hpp"

#include <algorithm>
#include <cmath>

#include "crowdmech/error.hpp"
#include "crowdmech/numeric.hpp"

namespace crowdmech {

ExpectedUtilities expected_utilities(const PaymentRule& rule, const WorkerProfile& profile, int assigned) {
    return {assigned * (rule.scale * (profile.p_high - 0.5) + rule.base - profile.cost_high), assigned * rule.base};
}

WorkerStrategy rational_response(const ExpectedUtilities& u) {
    return {1.0, u.u_high > u.u_low ? 1.0 : 0.0};
}

WorkerStrategy qr_response(const ExpectedUtilities& u, double lambda) {
    if (!(lambda > 0.0)) throw ConfigError("QR lambda must be positive");
    return {1.0, logistic(lambda * (u.u_high - u.u_low))};
}

double mwu_update(double eft, double avg_high, double avg_low) {
    if (!(avg_high > -1.0) || !(avg_low > -1.0)) {
        throw ConfigError("MWU averages must exceed -1; utilities are not normalized");
    }
    return eft * (1.0 + avg_high) / (eft * (avg_high - avg_low) + avg_low + 1.0);
}

WorkerKind parse_worker_kind(const std::string& name) {
    if (name == "rational") return WorkerKind::Rational;
    if (name == "qr") return WorkerKind::QuantalResponse;
    if (name == "mwu") return WorkerKind::Mwu;
    if (name == "colluder") return WorkerKind::Colluder;
    throw ConfigError("unknown worker model '" + name + "'");
}

std::string to_string(WorkerKind kind) {
    switch (kind) {
        case WorkerKind::Rational: return "rational";
        case WorkerKind::QuantalResponse: return "qr";
        case WorkerKind::Mwu: return "mwu";
        case WorkerKind::Colluder: return "colluder";
    }
    return "?";
}

void validate(const WorkerModel& model) {
    if (model.kind == WorkerKind::QuantalResponse && !(model.lambda > 0.0)) throw ConfigError("QR lambda must be positive");
    if (model.kind == WorkerKind::Mwu && !(model.eft0 > 0.0 && model.eft0 < 1.0)) {
        throw ConfigError("MWU eft0 must lie in (0, 1)");
    }
    if (!(model.utility_scale >= 0.0)) throw ConfigError("MWU utility_scale must be nonnegative");
}

Population::Population(std::vector<PopulationMember> members, double scale_max, double base)
    : members_(std::move(members)), state_(members_.size()), scale_max_(scale_max), base_(base) {
    if (!(scale_max >= 0.0) || !(base >= 0.0)) throw ConfigError("payment bounds must be nonnegative");
    for (const auto& m : members_) {
        validate(m.profile);
        validate(m.model);
    }
    reset_episode();
}

std::vector<WorkerProfile> Population::profiles() const {
    std::vector<WorkerProfile> out;
    out.reserve(members_.size());
    for (const auto& m : members_) out.push_back(m.profile);
    return out;
}

void Population::reset_episode() {
    for (std::size_t i = 0; i < members_.size(); ++i) state_[i] = State{members_[i].model.eft0};
}

std::vector<WorkerStrategy> Population::strategies(const PaymentRule& rule, std::span<const int> assigned) const {
    if (assigned.size() != members_.size()) throw ConfigError("assigned counts differ in length from the population");
    std::vector<WorkerStrategy> out(members_.size());
    for (std::size_t i = 0; i < members_.size(); ++i) {
        const auto& m = members_[i];
        const auto u = expected_utilities(rule, m.profile, assigned[i]);
        switch (m.model.kind) {
            case WorkerKind::Rational: out[i] = rational_response(u); break;
            case WorkerKind::QuantalResponse: out[i] = qr_response(u, m.model.lambda); break;
            case WorkerKind::Mwu: out[i] = {1.0, state_[i].eft}; break;
            case WorkerKind::Colluder: out[i] = {1.0, 0.0}; break;
        }
    }
    return out;
}

void Population::observe(const LabelDraw& draw, const PaymentRecord& paid) {
    const auto& assignment = draw.matrix.assignment();
    if (assignment.size() != members_.size()) throw ConfigError("label draw differs in size from the population");
    // Just above -1 so the update stays defined when a step pays the floor b - a_max / 2.
    constexpr double kFloor = -1.0 + 1e-9;
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (members_[i].model.kind != WorkerKind::Mwu) continue;
        const auto& p = members_[i].profile;
        const double scale = members_[i].model.utility_scale;
        const double norm = scale > 0.0 ? scale : scale_max_ / 2.0 + base_ + p.cost_high;
        if (!(norm > 0.0)) continue;
        auto& s = state_[i];
        for (int j : assignment[i]) {
            const bool high = draw.high_effort(static_cast<Eigen::Index>(i), j) != 0;
            const double u = (paid.per_task(static_cast<Eigen::Index>(i), j) - (high ? p.cost_high : 0.0)) / norm;
            if (high) {
                s.sum_high += u;
                ++s.count_high;
            } else {
                s.sum_low += u;
                ++s.count_low;
            }
        }
        const double avg_high = s.count_high > 0 ? std::max(kFloor, s.sum_high / s.count_high) : 0.0;
        const double avg_low = s.count_low > 0 ? std::max(kFloor, s.sum_low / s.count_low) : 0.0;
        s.eft = std::clamp(mwu_update(s.eft, avg_high, avg_low), 1e-6, 1.0 - 1e-6);
    }
}

std::vector<int> Population::colluders() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (members_[i].model.kind == WorkerKind::Colluder) out.push_back(static_cast<int>(i));
    }
    return out;
}

}  // namespace crowdmech
