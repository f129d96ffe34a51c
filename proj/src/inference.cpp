#include "crowdmech/inference.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "crowdmech/error.hpp"
#include "crowdmech/numeric.hpp"

namespace crowdmech {

void validate(const Priors& p) {
    if (!(p.alpha1 > 0.0 && p.alpha2 > 0.0 && p.beta_minus > 0.0 && p.beta_plus > 0.0)) {
        throw InvalidPriorError("Dirichlet pseudo-counts must be strictly positive");
    }
}

void validate(const GibbsConfig& c) {
    if (c.burn_in < 0 || c.total_samples <= c.burn_in) {
        throw ConfigError("Gibbs config requires 0 <= W0 < W");
    }
}

namespace {

// B is symmetric; evaluating the smaller argument first keeps
// log_beta(x, y) and log_beta(y, x) bitwise identical.
double log_beta(double x, double y) {
    if (!(x > 0.0) || !(y > 0.0)) {
        throw InvalidPriorError("beta-function argument collapsed to a non-positive value");
    }
    const double lo = std::min(x, y);
    const double hi = std::max(x, y);
    return std::lgamma(lo) + std::lgamma(hi) - std::lgamma(lo + hi);
}

// Compressed per-task view of the labels: entries[offset[j] .. offset[j+1]).
struct TaskLabels {
    struct Entry {
        int worker;
        Label label;
    };
    std::vector<std::size_t> offset;
    std::vector<Entry> entries;

    explicit TaskLabels(const LabelMatrix& m) : offset(static_cast<std::size_t>(m.tasks()) + 1, 0) {
        entries.reserve(m.total_assigned());
        for (int j = 0; j < m.tasks(); ++j) {
            offset[static_cast<std::size_t>(j)] = entries.size();
            for (int i = 0; i < m.workers(); ++i) {
                const Label v = m.at(i, j);
                if (v != kUnassigned) entries.push_back({i, v});
            }
        }
        offset.back() = entries.size();
    }
};

// log(k + c) for k = 0..n, the only logarithms the sampler ever needs.
std::vector<double> log_table(int n, double c) {
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) t[static_cast<std::size_t>(k)] = std::log(k + c);
    return t;
}

}  // namespace

double joint_weight(std::span<const Label> truth, const LabelMatrix& matrix, const Priors& priors) {
    validate(priors);
    if (static_cast<int>(truth.size()) != matrix.tasks()) {
        throw ConfigError("candidate truth must cover every task");
    }
    int n_minus = 0;
    for (Label t : truth) {
        if (!is_binary_label(t)) throw ConfigError("candidate truth entries must be -1 or +1");
        n_minus += t == -1 ? 1 : 0;
    }
    const int n_plus = matrix.tasks() - n_minus;
    double lw = log_beta(n_minus + 2.0 * priors.beta_minus - 1.0, n_plus + 2.0 * priors.beta_plus - 1.0);
    for (int i = 0; i < matrix.workers(); ++i) {
        int agree = 0;
        const auto& tasks = matrix.assignment()[static_cast<std::size_t>(i)];
        for (int j : tasks) agree += matrix.at(i, j) == truth[static_cast<std::size_t>(j)] ? 1 : 0;
        const int disagree = static_cast<int>(tasks.size()) - agree;
        lw += log_beta(agree + 2.0 * priors.alpha1 - 1.0, disagree + 2.0 * priors.alpha2 - 1.0);
    }
    return lw;
}

double gibbs_conditional(int task, std::span<const Label> current, const LabelMatrix& matrix, const Priors& priors) {
    if (task < 0 || task >= matrix.tasks()) throw ConfigError("task index out of range");
    std::vector<Label> candidate(current.begin(), current.end());
    candidate[static_cast<std::size_t>(task)] = -1;
    const double x_minus = joint_weight(candidate, matrix, priors);
    candidate[static_cast<std::size_t>(task)] = 1;
    const double x_plus = joint_weight(candidate, matrix, priors);
    return logistic(x_minus - x_plus);
}

SampleSequence gibbs_sample(const LabelMatrix& matrix, const Priors& priors, const GibbsConfig& config) {
    validate(priors);
    validate(config);
    const double c1 = 2.0 * priors.alpha1 - 1.0;
    const double c2 = 2.0 * priors.alpha2 - 1.0;
    const double cm = 2.0 * priors.beta_minus - 1.0;
    const double cp = 2.0 * priors.beta_plus - 1.0;
    if (!(c1 > 0.0 && c2 > 0.0 && cm > 0.0 && cp > 0.0)) {
        // With a pseudo-count offset <= 0 a zero count makes B(.) undefined.
        throw InvalidPriorError("Gibbs sampling needs every prior pseudo-count above 0.5");
    }

    const int n_tasks = matrix.tasks();
    const int n_workers = matrix.workers();
    const TaskLabels by_task(matrix);
    int max_m = 0;
    for (int i = 0; i < n_workers; ++i) max_m = std::max(max_m, matrix.assigned_count(i));
    const auto log_agree = log_table(max_m, c1);
    const auto log_disagree = log_table(max_m, c2);
    const auto log_minus = log_table(n_tasks, cm);
    const auto log_plus = log_table(n_tasks, cp);

    Rng rng(config.seed);
    std::vector<Label> truth(static_cast<std::size_t>(n_tasks));
    for (int j = 0; j < n_tasks; ++j) {
        Label& t = truth[static_cast<std::size_t>(j)];
        if (config.init == GibbsInit::Uniform) {
            t = rng.coin_label();
            continue;
        }
        int votes = 0;
        for (auto k = by_task.offset[static_cast<std::size_t>(j)]; k < by_task.offset[static_cast<std::size_t>(j) + 1]; ++k) {
            votes += by_task.entries[k].label;
        }
        t = votes >= 0 ? Label{1} : Label{-1};
    }

    std::vector<int> agree(static_cast<std::size_t>(n_workers), 0);
    std::vector<int> disagree(static_cast<std::size_t>(n_workers), 0);
    int n_minus = 0;
    for (int j = 0; j < n_tasks; ++j) {
        const Label t = truth[static_cast<std::size_t>(j)];
        n_minus += t == -1 ? 1 : 0;
        for (auto k = by_task.offset[static_cast<std::size_t>(j)]; k < by_task.offset[static_cast<std::size_t>(j) + 1]; ++k) {
            const auto& e = by_task.entries[k];
            (e.label == t ? agree : disagree)[static_cast<std::size_t>(e.worker)] += 1;
        }
    }
    int n_plus = n_tasks - n_minus;

    SampleSequence out;
    out.samples.resize(config.retained(), n_tasks);
    for (int s = 1; s <= config.total_samples; ++s) {
        for (int j = 0; j < n_tasks; ++j) {
            const auto begin = by_task.offset[static_cast<std::size_t>(j)];
            const auto end = by_task.offset[static_cast<std::size_t>(j) + 1];
            Label& t = truth[static_cast<std::size_t>(j)];
            // Take task j out of every count.
            (t == -1 ? n_minus : n_plus) -= 1;
            for (auto k = begin; k < end; ++k) {
                const auto& e = by_task.entries[k];
                (e.label == t ? agree : disagree)[static_cast<std::size_t>(e.worker)] -= 1;
            }
            // log x(-1) - log x(+1) collapses to ratios of the hatted counts.
            double diff = log_minus[static_cast<std::size_t>(n_minus)] - log_plus[static_cast<std::size_t>(n_plus)];
            for (auto k = begin; k < end; ++k) {
                const auto& e = by_task.entries[k];
                const auto w = static_cast<std::size_t>(e.worker);
                const double term = log_agree[static_cast<std::size_t>(agree[w])] -
                                    log_disagree[static_cast<std::size_t>(disagree[w])];
                diff += e.label == -1 ? term : -term;
            }
            t = rng.uniform() < logistic(diff) ? Label{-1} : Label{1};
            (t == -1 ? n_minus : n_plus) += 1;
            for (auto k = begin; k < end; ++k) {
                const auto& e = by_task.entries[k];
                (e.label == t ? agree : disagree)[static_cast<std::size_t>(e.worker)] += 1;
            }
        }
        if (s > config.burn_in) {
            const int row = s - config.burn_in - 1;
            for (int j = 0; j < n_tasks; ++j) out.samples(row, j) = truth[static_cast<std::size_t>(j)];
        }
    }
    return out;
}

PosteriorEstimate estimate(const SampleSequence& seq, const LabelMatrix& matrix, const Priors& priors) {
    validate(priors);
    if (seq.size() == 0) throw ConfigError("estimate needs at least one retained sample");
    if (seq.tasks() != matrix.tasks()) throw ConfigError("sample width does not match the number of tasks");
    const int n_tasks = matrix.tasks();
    const int n_workers = matrix.workers();
    const double s_count = static_cast<double>(seq.size());

    std::vector<double> frac_minus(static_cast<std::size_t>(n_tasks));
    for (int j = 0; j < n_tasks; ++j) {
        int c = 0;
        for (int s = 0; s < seq.size(); ++s) c += seq.samples(s, j) == -1 ? 1 : 0;
        frac_minus[static_cast<std::size_t>(j)] = c;
    }

    PosteriorEstimate est;
    est.scores = Eigen::MatrixXd::Zero(n_workers, n_tasks);
    est.pobc_hat.resize(n_workers);
    const double c1 = 2.0 * priors.alpha1 - 1.0;
    const double c2 = 2.0 * priors.alpha2 - 1.0;
    for (int i = 0; i < n_workers; ++i) {
        double agree_sum = 0.0;
        for (int j : matrix.assignment()[static_cast<std::size_t>(i)]) {
            const double minus = frac_minus[static_cast<std::size_t>(j)] / s_count;
            const double sc = matrix.at(i, j) == -1 ? minus : 1.0 - minus;
            est.scores(i, j) = sc;
            agree_sum += sc;
        }
        est.pobc_hat(i) = (c1 + agree_sum) / (c1 + c2 + matrix.assigned_count(i));
    }

    const double cm = 2.0 * priors.beta_minus - 1.0;
    const double cp = 2.0 * priors.beta_plus - 1.0;
    double minus_sum = 0.0;
    for (double c : frac_minus) minus_sum += c / s_count;
    est.tau_hat.tau_minus = (cm + minus_sum) / (cm + cp + n_tasks);
    est.tau_hat.tau_plus = 1.0 - est.tau_hat.tau_minus;

    est.sigma.resize(n_tasks);
    est.labels_hat.resize(static_cast<std::size_t>(n_tasks));
    for (int j = 0; j < n_tasks; ++j) {
        const double c = frac_minus[static_cast<std::size_t>(j)];
        // Add-one smoothing keeps the ratio finite when every sample agrees.
        est.sigma(j) = std::log((c + 1.0) / (s_count - c + 1.0));
        est.labels_hat[static_cast<std::size_t>(j)] = est.sigma(j) > 0.0 ? Label{-1} : Label{1};
    }
    est.accuracy_hat = accuracy_from_sigma(std::span<const double>(est.sigma.data(), static_cast<std::size_t>(n_tasks)));
    return est;
}

PosteriorEstimate infer(const LabelMatrix& matrix, const Priors& priors, const GibbsConfig& config) {
    return estimate(gibbs_sample(matrix, priors, config), matrix, priors);
}

double accuracy_from_sigma(std::span<const double> sigma) {
    if (sigma.empty()) return 0.5;
    double total = 0.0;
    for (double s : sigma) total += logistic(std::abs(s));
    return total / static_cast<double>(sigma.size());
}

double uninformative_signal(const PosteriorEstimate& est) {
    const auto n = est.pobc_hat.size();
    double mean_log = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mean_log += std::log(est.pobc_hat(i));
    mean_log /= static_cast<double>(std::max<Eigen::Index>(n, 1));
    return mean_log + std::log(std::max(est.tau_hat.tau_minus, est.tau_hat.tau_plus));
}

double uninformative_threshold(int tasks) {
    return std::log((tasks + 1.0) / (tasks + 3.0));
}

bool detect_uninformative(const PosteriorEstimate& est, int tasks) {
    return uninformative_signal(est) >= uninformative_threshold(tasks);
}

MajorityResult majority_vote(const LabelMatrix& matrix) {
    MajorityResult out;
    out.labels_hat.resize(static_cast<std::size_t>(matrix.tasks()));
    double confidence = 0.0;
    for (int j = 0; j < matrix.tasks(); ++j) {
        int plus = 0, minus = 0;
        for (int i = 0; i < matrix.workers(); ++i) {
            const Label v = matrix.at(i, j);
            plus += v == 1 ? 1 : 0;
            minus += v == -1 ? 1 : 0;
        }
        if (plus + minus == 0) throw CoverageError("task " + std::to_string(j) + " has no labels");
        out.labels_hat[static_cast<std::size_t>(j)] = minus > plus ? Label{-1} : Label{1};
        confidence += static_cast<double>(std::max(plus, minus)) / (plus + minus);
    }
    if (matrix.tasks() > 0) out.vote_confidence = confidence / matrix.tasks();
    if (matrix.has_ground_truth()) out.accuracy = label_accuracy(out.labels_hat, matrix.ground_truth());
    return out;
}

EmResult em_estimate(const LabelMatrix& matrix, int max_iters, double tol) {
    constexpr double kClamp = 1e-6;
    const int n_tasks = matrix.tasks();
    const int n_workers = matrix.workers();
    const TaskLabels by_task(matrix);

    // Soft majority vote start: q_j = share of -1 votes.
    Eigen::VectorXd q = Eigen::VectorXd::Constant(n_tasks, 0.5);
    for (int j = 0; j < n_tasks; ++j) {
        const auto begin = by_task.offset[static_cast<std::size_t>(j)];
        const auto end = by_task.offset[static_cast<std::size_t>(j) + 1];
        if (begin == end) continue;
        int minus = 0;
        for (auto k = begin; k < end; ++k) minus += by_task.entries[k].label == -1 ? 1 : 0;
        q(j) = static_cast<double>(minus) / static_cast<double>(end - begin);
    }

    EmResult out;
    Eigen::VectorXd p(n_workers);
    double tau_minus = 0.5;
    auto m_step = [&] {
        for (int i = 0; i < n_workers; ++i) {
            const auto& tasks = matrix.assignment()[static_cast<std::size_t>(i)];
            if (tasks.empty()) {
                p(i) = 0.5;
                continue;
            }
            double agree = 0.0;
            for (int j : tasks) agree += matrix.at(i, j) == -1 ? q(j) : 1.0 - q(j);
            p(i) = std::clamp(agree / static_cast<double>(tasks.size()), kClamp, 1.0 - kClamp);
        }
        tau_minus = n_tasks > 0 ? std::clamp(q.mean(), kClamp, 1.0 - kClamp) : 0.5;
    };

    for (int it = 1; it <= max_iters; ++it) {
        m_step();
        Eigen::VectorXd next(n_tasks);
        const double prior_logit = std::log(tau_minus / (1.0 - tau_minus));
        for (int j = 0; j < n_tasks; ++j) {
            double logit = prior_logit;
            for (auto k = by_task.offset[static_cast<std::size_t>(j)]; k < by_task.offset[static_cast<std::size_t>(j) + 1]; ++k) {
                const auto& e = by_task.entries[k];
                const double w = std::log(p(e.worker) / (1.0 - p(e.worker)));
                logit += e.label == -1 ? w : -w;
            }
            next(j) = logistic(logit);
        }
        const double delta = n_tasks > 0 ? (next - q).cwiseAbs().maxCoeff() : 0.0;
        q = std::move(next);
        out.iterations = it;
        if (delta < tol) {
            out.converged = true;
            break;
        }
    }
    m_step();

    out.pobc_hat = p;
    out.posterior_minus = q;
    out.tau_minus = tau_minus;
    out.labels_hat.resize(static_cast<std::size_t>(n_tasks));
    double conf = 0.0;
    for (int j = 0; j < n_tasks; ++j) {
        out.labels_hat[static_cast<std::size_t>(j)] = q(j) > 0.5 ? Label{-1} : Label{1};
        conf += std::max(q(j), 1.0 - q(j));
    }
    out.accuracy_hat = n_tasks > 0 ? conf / n_tasks : 0.5;
    return out;
}

namespace {

std::vector<double> enumerate_log_weights(const LabelMatrix& matrix, const Priors& priors) {
    const int m = matrix.tasks();
    if (m > kOracleMaxTasks) {
        throw ConfigError("exact posterior refuses M > " + std::to_string(kOracleMaxTasks) + " tasks");
    }
    const std::size_t count = std::size_t{1} << m;
    std::vector<double> lw(count);
    std::vector<Label> truth(static_cast<std::size_t>(m));
    for (std::size_t v = 0; v < count; ++v) {
        for (int j = 0; j < m; ++j) truth[static_cast<std::size_t>(j)] = (v >> j) & 1U ? Label{1} : Label{-1};
        lw[v] = joint_weight(truth, matrix, priors);
    }
    return lw;
}

}  // namespace

std::vector<double> exact_joint_posterior(const LabelMatrix& matrix, const Priors& priors) {
    auto w = enumerate_log_weights(matrix, priors);
    const double top = *std::max_element(w.begin(), w.end());
    double total = 0.0;
    for (auto& x : w) {
        x = std::exp(x - top);
        total += x;
    }
    for (auto& x : w) x /= total;
    return w;
}

std::vector<double> exact_posterior_oracle(const LabelMatrix& matrix, const Priors& priors) {
    const auto lw = enumerate_log_weights(matrix, priors);
    const double top = *std::max_element(lw.begin(), lw.end());
    const int m = matrix.tasks();
    std::vector<double> minus(static_cast<std::size_t>(m), 0.0), plus(static_cast<std::size_t>(m), 0.0);
    for (std::size_t v = 0; v < lw.size(); ++v) {
        const double w = std::exp(lw[v] - top);
        for (int j = 0; j < m; ++j) ((v >> j) & 1U ? plus : minus)[static_cast<std::size_t>(j)] += w;
    }
    std::vector<double> out(static_cast<std::size_t>(m));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = minus[j] / (minus[j] + plus[j]);
    return out;
}

void write_task_estimates(const PosteriorEstimate& est, std::ostream& out) {
    out << "task_id,sigma,label_hat\n";
    for (Eigen::Index j = 0; j < est.sigma.size(); ++j) {
        out << j << ',' << est.sigma(j) << ',' << static_cast<int>(est.labels_hat[static_cast<std::size_t>(j)]) << '\n';
    }
}

void write_worker_estimates(const PosteriorEstimate& est, std::ostream& out) {
    out << "worker_id,pobc_hat\n";
    for (Eigen::Index i = 0; i < est.pobc_hat.size(); ++i) out << i << ',' << est.pobc_hat(i) << '\n';
}

}  // namespace crowdmech
