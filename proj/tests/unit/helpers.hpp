#pragma once

#include <initializer_list>
#include <optional>
#include <vector>

#include "crowdmech/core.hpp"

namespace testing {

inline crowdmech::LabelMatrix matrix(std::initializer_list<std::initializer_list<int>> rows,
                                     std::optional<std::vector<crowdmech::Label>> truth = std::nullopt) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = static_cast<Eigen::Index>(rows.begin()->size());
    crowdmech::LabelTable t(n, m);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        Eigen::Index j = 0;
        for (int v : row) t(i, j++) = static_cast<crowdmech::Label>(v);
        ++i;
    }
    return crowdmech::LabelMatrix(std::move(t), std::move(truth));
}

/// Uniformly random fully-observed-or-not instance with every task labeled at least once.
inline crowdmech::LabelMatrix random_instance(int workers, int tasks, crowdmech::Rng& rng) {
    crowdmech::LabelTable t = crowdmech::LabelTable::Zero(workers, tasks);
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
    return crowdmech::LabelMatrix(std::move(t));
}

}  // namespace testing
