#include <cmath>
#include <sstream>

#include "crowdmech/error.hpp"
#include "crowdmech/inference.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace crowdmech;

namespace {

// Beta-function product through tgamma, independent of the library's lgamma route.
double beta_fn(double x, double y) { return std::tgamma(x) * std::tgamma(y) / std::tgamma(x + y); }

double weight_by_tgamma(const std::vector<Label>& truth, const LabelMatrix& m, const Priors& p) {
    int nm = 0;
    for (Label t : truth) nm += t == -1;
    double w = beta_fn(nm + 2 * p.beta_minus - 1, static_cast<double>(truth.size()) - nm + 2 * p.beta_plus - 1);
    for (int i = 0; i < m.workers(); ++i) {
        int agree = 0, total = 0;
        for (int j = 0; j < m.tasks(); ++j) {
            if (m.at(i, j) == 0) continue;
            ++total;
            agree += m.at(i, j) == truth[static_cast<std::size_t>(j)];
        }
        w *= beta_fn(agree + 2 * p.alpha1 - 1, total - agree + 2 * p.alpha2 - 1);
    }
    return w;
}

// Plain one-coin EM written from scratch over the dense table.
struct RefEm {
    std::vector<double> q, p;
};

RefEm reference_em(const LabelMatrix& m, int iters, double tol) {
    const int n = m.workers(), t = m.tasks();
    RefEm r;
    r.q.assign(static_cast<std::size_t>(t), 0.5);
    for (int j = 0; j < t; ++j) {
        double votes = 0, minus = 0;
        for (int i = 0; i < n; ++i) {
            if (m.at(i, j) != 0) {
                votes += 1;
                minus += m.at(i, j) == -1;
            }
        }
        if (votes > 0) r.q[static_cast<std::size_t>(j)] = minus / votes;
    }
    r.p.assign(static_cast<std::size_t>(n), 0.5);
    double tau = 0.5;
    auto mstep = [&] {
        for (int i = 0; i < n; ++i) {
            double num = 0, den = 0;
            for (int j = 0; j < t; ++j) {
                if (m.at(i, j) == 0) continue;
                den += 1;
                num += m.at(i, j) == -1 ? r.q[static_cast<std::size_t>(j)] : 1 - r.q[static_cast<std::size_t>(j)];
            }
            r.p[static_cast<std::size_t>(i)] = den > 0 ? std::min(std::max(num / den, 1e-6), 1 - 1e-6) : 0.5;
        }
        double s = 0;
        for (double x : r.q) s += x;
        tau = std::min(std::max(s / t, 1e-6), 1 - 1e-6);
    };
    for (int it = 0; it < iters; ++it) {
        mstep();
        double delta = 0;
        std::vector<double> next(static_cast<std::size_t>(t));
        for (int j = 0; j < t; ++j) {
            double lm = std::log(tau), lp = std::log(1 - tau);
            for (int i = 0; i < n; ++i) {
                const double pi = r.p[static_cast<std::size_t>(i)];
                if (m.at(i, j) == -1) {
                    lm += std::log(pi);
                    lp += std::log(1 - pi);
                } else if (m.at(i, j) == 1) {
                    lm += std::log(1 - pi);
                    lp += std::log(pi);
                }
            }
            next[static_cast<std::size_t>(j)] = 1 / (1 + std::exp(lp - lm));
            delta = std::max(delta, std::abs(next[static_cast<std::size_t>(j)] - r.q[static_cast<std::size_t>(j)]));
        }
        r.q = next;
        if (delta < tol) break;
    }
    mstep();
    return r;
}

SampleSequence samples_from(std::initializer_list<std::initializer_list<int>> rows) {
    SampleSequence s;
    s.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (int v : row) s.samples(r, c++) = static_cast<Label>(v);
        ++r;
    }
    return s;
}

}  // namespace

TEST_CASE("joint weight matches a tgamma evaluation") {
    Rng rng(21);
    const Priors p{2.0, 1.0, 1.5, 1.2};
    for (int rep = 0; rep < 20; ++rep) {
        const auto m = testing::random_instance(3, 5, rng);
        std::vector<Label> truth(5);
        for (auto& t : truth) t = rng.coin_label();
        CHECK(joint_weight(truth, m, p) == doctest::Approx(std::log(weight_by_tgamma(truth, m, p))).epsilon(1e-12));
    }
}

TEST_CASE("gibbs conditional equals the normalized weight ratio") {
    Rng rng(4);
    const Priors p;
    const auto m = testing::random_instance(3, 4, rng);
    std::vector<Label> cur{1, -1, 1, 1};
    for (int j = 0; j < 4; ++j) {
        auto a = cur, b = cur;
        a[static_cast<std::size_t>(j)] = -1;
        b[static_cast<std::size_t>(j)] = 1;
        const double wa = weight_by_tgamma(a, m, p), wb = weight_by_tgamma(b, m, p);
        CHECK(gibbs_conditional(j, cur, m, p) == doctest::Approx(wa / (wa + wb)).epsilon(1e-12));
    }
}

TEST_CASE("invalid priors are rejected") {
    const auto m = testing::matrix({{1, -1}});
    CHECK_THROWS_AS(validate(Priors{0.0, 1.0, 1.0, 1.0}), InvalidPriorError);
    CHECK_THROWS_AS(gibbs_sample(m, Priors{0.4, 1.0, 1.0, 1.0}, {}), InvalidPriorError);
    CHECK_THROWS_AS(gibbs_sample(m, Priors{}, GibbsConfig{100, 100, 0}), ConfigError);
}

TEST_CASE("gibbs sample sequence shape and replay") {
    Rng rng(8);
    const auto m = testing::random_instance(4, 6, rng);
    const GibbsConfig cfg{60, 10, 99};
    const auto a = gibbs_sample(m, Priors{}, cfg);
    const auto b = gibbs_sample(m, Priors{}, cfg);
    CHECK(a.size() == 50);
    CHECK(a.tasks() == 6);
    CHECK(a.samples == b.samples);
    for (Eigen::Index k = 0; k < a.samples.size(); ++k) CHECK((a.samples.data()[k] == 1 || a.samples.data()[k] == -1));
}

TEST_CASE("gibbs marginals approach the exact posterior") {
    Rng rng(17);
    const Priors p;
    const auto m = testing::random_instance(3, 4, rng);
    const auto exact = exact_posterior_oracle(m, p);
    const auto seq = gibbs_sample(m, p, GibbsConfig{20000, 2000, 5});
    for (int j = 0; j < 4; ++j) {
        double minus = 0;
        for (int s = 0; s < seq.size(); ++s) minus += seq.samples(s, j) == -1;
        CHECK(minus / seq.size() == doctest::Approx(exact[static_cast<std::size_t>(j)]).epsilon(0.03));
    }
}

TEST_CASE("exact oracle marginals sum the joint posterior") {
    Rng rng(2);
    const Priors p;
    const auto m = testing::random_instance(2, 3, rng);
    const auto joint = exact_joint_posterior(m, p);
    const auto marg = exact_posterior_oracle(m, p);
    double total = 0;
    for (double x : joint) total += x;
    CHECK(total == doctest::Approx(1.0));
    for (int j = 0; j < 3; ++j) {
        double minus = 0;
        for (std::size_t v = 0; v < joint.size(); ++v) {
            if (!((v >> j) & 1U)) minus += joint[v];
        }
        CHECK(marg[static_cast<std::size_t>(j)] == doctest::Approx(minus).epsilon(1e-12));
    }
    const auto big = testing::matrix({{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}});
    CHECK_THROWS_AS(exact_posterior_oracle(big, p), ConfigError);
}

TEST_CASE("symmetric priors give exactly flat marginals") {
    Rng rng(31);
    const Priors sym{1.5, 1.5, 1.0, 1.0};
    for (int rep = 0; rep < 10; ++rep) {
        for (double x : exact_posterior_oracle(testing::random_instance(3, 3, rng), sym)) CHECK(std::abs(x - 0.5) <= 1e-12);
    }
}

TEST_CASE("estimator closed forms") {
    // One worker agreeing with every sample on 10 tasks: P~ = (3 + 10) / (3 + 1 + 10).
    const auto m = testing::matrix({{1, 1, 1, 1, 1, 1, 1, 1, 1, 1}});
    const auto s = samples_from({{1, 1, 1, 1, 1, 1, 1, 1, 1, 1}});
    const auto est = estimate(s, m, Priors{});
    CHECK(est.pobc_hat(0) == doctest::Approx(13.0 / 14.0));
    CHECK(est.tau_hat.tau_minus == doctest::Approx(1.0 / 12.0));
    CHECK(est.sigma(0) == doctest::Approx(std::log(1.0 / 2.0)));
    CHECK(est.labels_hat[0] == 1);
    CHECK(est.scores(0, 3) == 1.0);
}

TEST_CASE("scores average agreement over retained samples") {
    const auto m = testing::matrix({{-1, 1}, {1, 0}});
    const auto s = samples_from({{-1, 1}, {1, 1}, {-1, -1}, {-1, 1}});
    const auto est = estimate(s, m, Priors{});
    CHECK(est.scores(0, 0) == doctest::Approx(0.75));
    CHECK(est.scores(1, 0) == doctest::Approx(0.25));
    CHECK(est.scores(0, 1) == doctest::Approx(0.75));
    CHECK(est.scores(1, 1) == 0.0);
    CHECK(est.sigma(0) == doctest::Approx(std::log(4.0 / 2.0)));
    CHECK(est.labels_hat[0] == -1);
}

TEST_CASE("accuracy from sigma") {
    const std::vector<double> sigma{0.0, std::log(3.0)};
    CHECK(accuracy_from_sigma(sigma) == doctest::Approx(0.625));
    const std::vector<double> neg{-std::log(3.0)};
    CHECK(accuracy_from_sigma(neg) == doctest::Approx(0.75));
}

TEST_CASE("uninformative threshold and collusion signal") {
    CHECK(uninformative_threshold(100) == doctest::Approx(-0.0196085).epsilon(1e-5));
    // Ten colluders answering +1 on 100 tasks, with every sample +1.
    LabelTable t = LabelTable::Constant(10, 100, 1);
    const LabelMatrix m(t);
    SampleSequence s;
    s.samples = decltype(s.samples)::Constant(400, 100, 1);
    const auto est = estimate(s, m, Priors{});
    CHECK(uninformative_signal(est) == doctest::Approx(std::log(103.0 / 104.0) + std::log(101.0 / 102.0)));
    CHECK(detect_uninformative(est, 100));
}

TEST_CASE("majority vote ties to +1 and needs coverage") {
    const auto m = testing::matrix({{1, -1, -1}, {-1, -1, 1}}, std::vector<Label>{1, -1, -1});
    const auto mv = majority_vote(m);
    CHECK(mv.labels_hat == std::vector<Label>{1, -1, 1});
    CHECK(mv.vote_confidence == doctest::Approx((0.5 + 1.0 + 0.5) / 3));
    CHECK(*mv.accuracy == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(majority_vote(testing::matrix({{1, 0}})), CoverageError);
}

TEST_CASE("em matches an independent implementation") {
    Rng rng(12);
    for (int rep = 0; rep < 5; ++rep) {
        const auto m = testing::random_instance(6, 30, rng);
        const auto em = em_estimate(m, 200, 1e-12);
        const auto ref = reference_em(m, 200, 1e-12);
        for (int j = 0; j < 30; ++j) CHECK(em.posterior_minus(j) == doctest::Approx(ref.q[static_cast<std::size_t>(j)]).epsilon(1e-8));
        for (int i = 0; i < 6; ++i) CHECK(em.pobc_hat(i) == doctest::Approx(ref.p[static_cast<std::size_t>(i)]).epsilon(1e-8));
    }
}

TEST_CASE("em on a symmetric tie stays at one half") {
    const auto em = em_estimate(testing::matrix({{1}, {-1}}));
    CHECK(em.posterior_minus(0) == doctest::Approx(0.5));
    CHECK(em.converged);
    CHECK(em.labels_hat[0] == 1);
}

TEST_CASE("estimate writers") {
    const auto m = testing::matrix({{-1, 1}});
    const auto est = estimate(samples_from({{-1, 1}}), m, Priors{});
    std::ostringstream tasks, workers;
    write_task_estimates(est, tasks);
    write_worker_estimates(est, workers);
    CHECK(tasks.str().rfind("task_id,sigma,label_hat\n0,", 0) == 0);
    CHECK(workers.str().rfind("worker_id,pobc_hat\n0,", 0) == 0);
}

TEST_CASE("majority start keeps a weak crowd out of the flipped mode") {
    // Ten workers at label accuracy 0.7: the flipped mode is a deep local optimum.
    const std::vector<WorkerProfile> profiles(10, WorkerProfile{0.9, 0.02});
    const std::vector<WorkerStrategy> strategies(10, WorkerStrategy{1.0, 0.5});
    const std::vector<int> per(10, 100);
    int flipped_uniform = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const auto assignment = assign_tasks(100, per, rng);
        const auto m = generate_labels(profiles, strategies, TrueLabelPrior{}, assignment, 100, rng);
        const auto majority = infer(m, Priors{}, GibbsConfig{200, 50, seed, GibbsInit::Majority});
        CHECK(label_accuracy(majority.labels_hat, m.ground_truth()) > 0.8);
        const auto uniform = infer(m, Priors{}, GibbsConfig{200, 50, seed, GibbsInit::Uniform});
        flipped_uniform += label_accuracy(uniform.labels_hat, m.ground_truth()) < 0.5;
    }
    MESSAGE("uniform starts ending flipped: " << flipped_uniform << "/20");
}
