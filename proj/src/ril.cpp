#include "crowdmech/ril.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "crowdmech/error.hpp"

namespace crowdmech {

namespace {

constexpr double kJitter = 1e-8;
constexpr int kRebuildEvery = 200;
constexpr double kMergeSimilarity = 0.5;
constexpr const char* kMagic = "crowdmech-qmodel";
constexpr int kFormatVersion = 1;

}  // namespace

double kernel(const KernelPoint& p, const KernelPoint& q, const LengthScales& ls) {
    const double dp = (p.phi - q.phi) / ls.phi;
    const double dap = (p.a_prev - q.a_prev) / ls.action;
    const double da = (p.a - q.a) / ls.action;
    return std::exp(-0.5 * (dp * dp + dap * dap + da * da));
}

void validate(const QModelParams& p) {
    if (!(p.gamma >= 0.0 && p.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(p.noise_var >= 0.0)) throw ConfigError("noise variance must be >= 0");
    if (!(p.length.phi > 0.0 && p.length.action > 0.0)) throw ConfigError("kernel length-scales must be positive");
    if (p.budget < 1) throw ConfigError("dictionary budget must be >= 1");
    if (!(p.novelty >= 0.0 && p.novelty < 1.0)) throw ConfigError("novelty threshold must lie in [0, 1)");
    if (p.grid.empty()) throw ConfigError("action grid is empty");
    if (!std::is_sorted(p.grid.begin(), p.grid.end()) ||
        std::adjacent_find(p.grid.begin(), p.grid.end()) != p.grid.end()) {
        throw ConfigError("action grid must be strictly increasing");
    }
}

QModel::QModel(QModelParams params) : params_(std::move(params)) { validate(params_); }

int QModel::grid_index(double action) const {
    const auto& g = params_.grid;
    const auto it = std::find(g.begin(), g.end(), action);
    if (it == g.end()) throw ConfigError("action " + std::to_string(action) + " is not on the grid");
    return static_cast<int>(it - g.begin());
}

KernelPoint QModel::embed(const AugmentedState& s, double action) const {
    return {s.phi_prev, static_cast<double>(grid_index(s.a_prev)), static_cast<double>(grid_index(action))};
}

Eigen::VectorXd QModel::kernel_vector(const KernelPoint& x) const {
    Eigen::VectorXd k(size());
    for (int d = 0; d < size(); ++d) k(d) = kernel(x, coords_[static_cast<std::size_t>(d)], params_.length);
    return k;
}

void QModel::add_point(const KernelPoint& x, const Eigen::VectorXd& k, DictionaryPoint p) {
    const int n = size();
    if (n == 0) {
        k_inv_ = Eigen::MatrixXd::Constant(1, 1, 1.0 / (1.0 + kJitter));
    } else {
        // Block inverse of [[K, k], [k^T, 1]].
        const Eigen::VectorXd kb = k_inv_ * k;
        const double s = 1.0 + kJitter - k.dot(kb);
        Eigen::MatrixXd next(n + 1, n + 1);
        next.topLeftCorner(n, n) = k_inv_ + kb * kb.transpose() / s;
        next.topRightCorner(n, 1) = -kb / s;
        next.bottomLeftCorner(1, n) = -kb.transpose() / s;
        next(n, n) = 1.0 / s;
        k_inv_ = std::move(next);
    }
    points_.push_back(std::move(p));
    coords_.push_back(x);
    if (++updates_since_rebuild_ >= kRebuildEvery) rebuild_inverse();
}

void QModel::rebuild_inverse() {
    updates_since_rebuild_ = 0;
    const int n = size();
    if (n == 0) {
        k_inv_.resize(0, 0);
        return;
    }
    Eigen::MatrixXd k = kernel_matrix();
    k.diagonal().array() += kJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) throw NumericalError("kernel matrix is not positive definite");
    k_inv_ = llt.solve(Eigen::MatrixXd::Identity(n, n));
}

void QModel::evict(int d) {
    const int n = size();
    const auto du = static_cast<std::size_t>(d);
    const std::uint64_t gone = points_[du].id;

    int target = -1;
    double best = -1.0;
    for (int e = 0; e < n; ++e) {
        if (e == d) continue;
        const double k = kernel(coords_[du], coords_[static_cast<std::size_t>(e)], params_.length);
        if (k > best) {
            best = k;
            target = e;
        }
    }
    const bool merge = target >= 0 && best >= kMergeSimilarity;
    const std::uint64_t target_id = merge ? points_[static_cast<std::size_t>(target)].id : 0;

    if (merge) {
        auto& t = points_[static_cast<std::size_t>(target)];
        const auto& g = points_[du];
        const double total = t.count + g.count;
        if (total > 0.0) t.reward_mean = (t.reward_mean * t.count + g.reward_mean * g.count) / total;
        t.count = total;
        t.terminal += g.terminal;
        for (const auto& [id, c] : g.successors) t.successors[id == gone ? target_id : id] += c;
    }
    for (auto& p : points_) {
        const auto it = p.successors.find(gone);
        if (it == p.successors.end()) continue;
        const double c = it->second;
        p.successors.erase(it);
        if (merge) p.successors[target_id] += c;
    }

    // Rank-one downdate of the inverse after removing row/column d.
    const double e = k_inv_(d, d);
    Eigen::MatrixXd reduced(n - 1, n - 1);
    Eigen::VectorXd u(n - 1);
    for (int r = 0, rr = 0; r < n; ++r) {
        if (r == d) continue;
        u(rr) = k_inv_(r, d);
        for (int c = 0, cc = 0; c < n; ++c) {
            if (c == d) continue;
            reduced(rr, cc++) = k_inv_(r, c);
        }
        ++rr;
    }
    k_inv_ = reduced - u * u.transpose() / e;

    if (pending_ == d) pending_ = merge ? target : -1;
    if (pending_ > d) --pending_;
    points_.erase(points_.begin() + d);
    coords_.erase(coords_.begin() + d);
    if (++updates_since_rebuild_ >= kRebuildEvery) rebuild_inverse();
}

void QModel::observe(const AugmentedState& s, double action, double reward, bool episode_boundary) {
    if (!std::isfinite(reward)) throw ConfigError("reward must be finite");
    if (!(s.phi_prev >= 0.0 && s.phi_prev <= 1.0)) throw ConfigError("phi_prev must lie in [0, 1]");
    const KernelPoint x = embed(s, action);
    dirty_ = true;

    int idx = -1;
    bool added = false;
    if (size() > 0) {
        const Eigen::VectorXd k = kernel_vector(x);
        const double novelty = 1.0 - k.dot(k_inv_ * k);
        if (novelty < params_.novelty) {
            k.maxCoeff(&idx);
            auto& p = points_[static_cast<std::size_t>(idx)];
            p.count += 1.0;
            p.reward_mean += (reward - p.reward_mean) / p.count;
        } else {
            add_point(x, k, DictionaryPoint{next_id_++, s, action, reward, 1.0, 0.0, {}});
            idx = size() - 1;
            added = true;
        }
    } else {
        add_point(x, Eigen::VectorXd(), DictionaryPoint{next_id_++, s, action, reward, 1.0, 0.0, {}});
        idx = 0;
        added = true;
    }

    if (pending_ >= 0) points_[static_cast<std::size_t>(pending_)].successors[points_[static_cast<std::size_t>(idx)].id] += 1.0;
    if (episode_boundary) {
        points_[static_cast<std::size_t>(idx)].terminal += 1.0;
        pending_ = -1;
    } else {
        pending_ = idx;
    }

    if (added && size() > params_.budget) {
        // Smallest residual 1 / (K^{-1})_dd, never the point just added; ties go to the oldest.
        int victim = 0;
        double lowest = std::numeric_limits<double>::infinity();
        for (int d = 0; d < size() - 1; ++d) {
            const double residual = 1.0 / k_inv_(d, d);
            if (residual < lowest - 1e-12) {
                lowest = residual;
                victim = d;
            }
        }
        evict(victim);
    }
}

Eigen::MatrixXd QModel::kernel_matrix() const {
    const int n = size();
    Eigen::MatrixXd k(n, n);
    for (int r = 0; r < n; ++r) {
        k(r, r) = 1.0;
        for (int c = 0; c < r; ++c) {
            k(r, c) = k(c, r) = kernel(coords_[static_cast<std::size_t>(r)], coords_[static_cast<std::size_t>(c)], params_.length);
        }
    }
    return k;
}

Eigen::MatrixXd QModel::h_matrix() const {
    const int n = size();
    std::unordered_map<std::uint64_t, int> index;
    for (int d = 0; d < n; ++d) index[points_[static_cast<std::size_t>(d)].id] = d;
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    for (int d = 0; d < n; ++d) {
        const auto& p = points_[static_cast<std::size_t>(d)];
        double out = p.terminal;
        for (const auto& [id, c] : p.successors) out += c;
        if (out <= 0.0) continue;
        for (const auto& [id, c] : p.successors) h(d, index.at(id)) -= params_.gamma * c / out;
    }
    return h;
}

Eigen::VectorXd QModel::rewards() const {
    Eigen::VectorXd r(size());
    for (int d = 0; d < size(); ++d) r(d) = points_[static_cast<std::size_t>(d)].reward_mean;
    return r;
}

void QModel::refresh() const {
    if (!dirty_) return;
    const int n = size();
    if (n == 0) {
        weights_.resize(0);
        dirty_ = false;
        return;
    }
    const Eigen::VectorXd q_hat = h_matrix().partialPivLu().solve(rewards());
    if (!q_hat.allFinite()) throw NumericalError("TD system I - gamma P is singular");

    Eigen::MatrixXd g = kernel_matrix();
    for (int d = 0; d < n; ++d) g(d, d) += params_.noise_var / points_[static_cast<std::size_t>(d)].count;
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    for (double jitter = kJitter; llt.info() != Eigen::Success; jitter *= 10.0) {
        if (jitter > 1e-2) throw NumericalError("GP system stays indefinite after jitter");
        Eigen::MatrixXd gj = g;
        gj.diagonal().array() += jitter;
        llt.compute(gj);
    }
    weights_ = llt.solve(q_hat);
    if (!weights_.allFinite()) throw NumericalError("GP weight solve produced non-finite values");
    dirty_ = false;
}

double QModel::q_value(const AugmentedState& s, double action) const {
    if (points_.empty()) return 0.0;
    refresh();
    return kernel_vector(embed(s, action)).dot(weights_);
}

void QModel::save(std::ostream& out) const {
    out.precision(std::numeric_limits<double>::max_digits10);
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "gamma " << params_.gamma << '\n';
    out << "noise_var " << params_.noise_var << '\n';
    out << "length_phi " << params_.length.phi << '\n';
    out << "length_action " << params_.length.action << '\n';
    out << "budget " << params_.budget << '\n';
    out << "novelty " << params_.novelty << '\n';
    out << "grid " << params_.grid.size();
    for (double a : params_.grid) out << ' ' << a;
    out << '\n';
    out << "next_id " << next_id_ << '\n';
    out << "points " << points_.size() << '\n';
    for (const auto& p : points_) {
        out << p.id << ' ' << p.state.phi_prev << ' ' << p.state.a_prev << ' ' << p.action << ' ' << p.reward_mean
            << ' ' << p.count << ' ' << p.terminal << ' ' << p.successors.size();
        std::vector<std::pair<std::uint64_t, double>> links(p.successors.begin(), p.successors.end());
        std::sort(links.begin(), links.end());
        for (const auto& [id, c] : links) out << ' ' << id << ' ' << c;
        out << '\n';
    }
}

namespace {

template <class T>
T read_field(std::istream& in, const std::string& key, std::size_t line) {
    std::string name;
    T value{};
    if (!(in >> name) || name != key || !(in >> value)) throw ParseError("expected '" + key + "'", line);
    return value;
}

}  // namespace

QModel QModel::load(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic) throw ParseError("not a Q-model file", 1);
    if (version != kFormatVersion) throw ParseError("unsupported Q-model version " + std::to_string(version), 1);
    QModelParams p;
    p.gamma = read_field<double>(in, "gamma", 2);
    p.noise_var = read_field<double>(in, "noise_var", 3);
    p.length.phi = read_field<double>(in, "length_phi", 4);
    p.length.action = read_field<double>(in, "length_action", 5);
    p.budget = read_field<int>(in, "budget", 6);
    p.novelty = read_field<double>(in, "novelty", 7);
    const auto grid_size = read_field<std::size_t>(in, "grid", 8);
    p.grid.resize(grid_size);
    for (auto& a : p.grid) {
        if (!(in >> a)) throw ParseError("truncated grid", 8);
    }
    QModel model(p);
    model.next_id_ = read_field<std::uint64_t>(in, "next_id", 9);
    const auto count = read_field<std::size_t>(in, "points", 10);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t line = 11 + k;
        DictionaryPoint d;
        std::size_t links = 0;
        if (!(in >> d.id >> d.state.phi_prev >> d.state.a_prev >> d.action >> d.reward_mean >> d.count >> d.terminal >> links)) {
            throw ParseError("malformed dictionary row", line);
        }
        for (std::size_t l = 0; l < links; ++l) {
            std::uint64_t id = 0;
            double c = 0.0;
            if (!(in >> id >> c)) throw ParseError("malformed successor list", line);
            d.successors[id] = c;
        }
        model.coords_.push_back(model.embed(d.state, d.action));
        model.points_.push_back(std::move(d));
    }
    model.rebuild_inverse();
    return model;
}

void validate(const Policy& policy) {
    if (!(policy.epsilon >= 0.0 && policy.epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (policy.grid.empty()) throw ConfigError("action grid is empty");
}

double greedy_action(const QModel& model, const AugmentedState& s, std::span<const double> grid) {
    if (grid.empty()) throw ConfigError("action grid is empty");
    std::vector<double> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    double best_a = sorted.front();
    double best_q = model.q_value(s, best_a);
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        const double q = model.q_value(s, sorted[k]);
        if (q > best_q) {
            best_q = q;
            best_a = sorted[k];
        }
    }
    return best_a;
}

double select_action(const QModel& model, const AugmentedState& s, const Policy& policy, Rng& rng) {
    validate(policy);
    if (rng.uniform() < policy.epsilon) return policy.grid[static_cast<std::size_t>(rng.below(policy.grid.size()))];
    return greedy_action(model, s, policy.grid);
}

double state_repr(const PosteriorEstimate& est) {
    if (est.pobc_hat.size() == 0) throw ConfigError("estimate has no workers");
    return est.pobc_hat.mean();
}

double reward_signal(const PosteriorEstimate& est, const PaymentRecord& record, const RequesterUtilityParams& params) {
    return requester_reward(est.accuracy_hat, record, params);
}

}  // namespace crowdmech
