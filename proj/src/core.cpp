#include "crowdmech/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>

#include "crowdmech/error.hpp"

namespace crowdmech {

LabelMatrix::LabelMatrix(LabelTable labels, std::optional<std::vector<Label>> ground_truth)
    : labels_(std::move(labels)), ground_truth_(std::move(ground_truth)) {
    if (ground_truth_ && static_cast<Eigen::Index>(ground_truth_->size()) != labels_.cols()) {
        throw ConfigError("ground truth length does not match the number of tasks");
    }
    if (ground_truth_) {
        for (Label g : *ground_truth_) {
            if (!is_binary_label(g)) throw ConfigError("ground truth entries must be -1 or +1");
        }
    }
    assignment_.resize(static_cast<std::size_t>(labels_.rows()));
    for (Eigen::Index i = 0; i < labels_.rows(); ++i) {
        auto& row = assignment_[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < labels_.cols(); ++j) {
            const Label v = labels_(i, j);
            if (v == kUnassigned) continue;
            if (!is_binary_label(v)) throw ConfigError("labels must be -1, +1 or 0 (unassigned)");
            row.push_back(static_cast<int>(j));
        }
        total_assigned_ += row.size();
    }
}

const std::vector<Label>& LabelMatrix::ground_truth() const {
    if (!ground_truth_) throw ConfigError("label matrix has no ground truth");
    return *ground_truth_;
}

std::vector<int> LabelMatrix::labelers(int task) const {
    std::vector<int> out;
    for (int i = 0; i < workers(); ++i) {
        if (labels_(i, task) != kUnassigned) out.push_back(i);
    }
    return out;
}

bool operator==(const LabelMatrix& a, const LabelMatrix& b) {
    return a.labels_.rows() == b.labels_.rows() && a.labels_.cols() == b.labels_.cols() &&
           a.labels_ == b.labels_ && a.ground_truth_ == b.ground_truth_;
}

void validate(const WorkerProfile& profile) {
    if (!(profile.p_high > 0.5 && profile.p_high <= 1.0)) {
        throw ConfigError("p_high must lie in (0.5, 1]");
    }
    if (!(profile.cost_high >= 0.0)) throw ConfigError("cost_high must be nonnegative");
}

void validate(const WorkerStrategy& strategy) {
    if (!(strategy.rpt >= 0.0 && strategy.rpt <= 1.0) || !(strategy.eft >= 0.0 && strategy.eft <= 1.0)) {
        throw ConfigError("strategy probabilities must lie in [0, 1]");
    }
}

void validate(const TrueLabelPrior& prior) {
    if (!(prior.tau_minus > 0.0 && prior.tau_minus < 1.0) || !(prior.tau_plus > 0.0 && prior.tau_plus < 1.0) ||
        std::abs(prior.tau_minus + prior.tau_plus - 1.0) > 1e-12) {
        throw ConfigError("true-label prior must have both components in (0, 1) summing to 1");
    }
}

double pobc(const WorkerStrategy& s, const WorkerProfile& p) {
    constexpr double p_low = 0.5;
    return s.rpt * s.eft * p.p_high + (1.0 - s.rpt) * s.eft * (1.0 - p.p_high) + s.rpt * (1.0 - s.eft) * p_low +
           (1.0 - s.rpt) * (1.0 - s.eft) * (1.0 - p_low);
}

Assignment assign_tasks(int tasks, std::span<const int> per_worker, Rng& rng) {
    if (tasks < 0) throw ConfigError("number of tasks must be nonnegative");
    Assignment out;
    out.reserve(per_worker.size());
    for (int m : per_worker) {
        if (m < 0 || m > tasks) {
            throw ConfigError("per-worker task count " + std::to_string(m) + " outside [0, " +
                              std::to_string(tasks) + "]");
        }
        out.push_back(rng.sample_subset(tasks, m));
    }
    return out;
}

LabelDraw simulate_labels(std::span<const WorkerProfile> profiles, std::span<const WorkerStrategy> strategies,
                          const TrueLabelPrior& prior, const Assignment& assignment, int tasks, Rng& rng) {
    const auto n = profiles.size();
    if (strategies.size() != n || assignment.size() != n) {
        throw ConfigError("profiles, strategies and assignment must cover the same workers");
    }
    std::vector<Label> truth(static_cast<std::size_t>(tasks));
    for (auto& t : truth) t = rng.bernoulli(prior.tau_plus) ? Label{1} : Label{-1};

    LabelTable labels = LabelTable::Zero(static_cast<Eigen::Index>(n), tasks);
    LabelDraw draw;
    draw.high_effort.setZero(static_cast<Eigen::Index>(n), tasks);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& prof = profiles[i];
        const auto& strat = strategies[i];
        for (int j : assignment[i]) {
            if (j < 0 || j >= tasks) throw ConfigError("assignment refers to a task out of range");
            const bool high = rng.bernoulli(strat.eft);
            const bool observed_correct = rng.bernoulli(high ? prof.p_high : 0.5);
            const bool truthful = rng.bernoulli(strat.rpt);
            const bool correct = observed_correct == truthful;
            const Label t = truth[static_cast<std::size_t>(j)];
            labels(static_cast<Eigen::Index>(i), j) = correct ? t : static_cast<Label>(-t);
            draw.high_effort(static_cast<Eigen::Index>(i), j) = high ? 1 : 0;
        }
    }
    draw.matrix = LabelMatrix(std::move(labels), std::move(truth));
    return draw;
}

LabelMatrix generate_labels(std::span<const WorkerProfile> profiles, std::span<const WorkerStrategy> strategies,
                            const TrueLabelPrior& prior, const Assignment& assignment, int tasks, Rng& rng) {
    return simulate_labels(profiles, strategies, prior, assignment, tasks, rng).matrix;
}

LabelMatrix with_constant_reports(const LabelMatrix& matrix, std::span<const int> workers, Label label) {
    if (!is_binary_label(label)) throw ConfigError("colluding report must be -1 or +1");
    LabelTable labels = matrix.labels();
    for (int i : workers) {
        for (int j : matrix.assignment()[static_cast<std::size_t>(i)]) labels(i, j) = label;
    }
    return LabelMatrix(std::move(labels), matrix.maybe_ground_truth());
}

LabelMatrix mix_noise(const LabelMatrix& matrix, double fraction, Rng& rng) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("noise fraction must lie in [0, 1]");
    std::vector<std::pair<int, int>> cells;
    cells.reserve(matrix.total_assigned());
    for (int i = 0; i < matrix.workers(); ++i) {
        for (int j : matrix.assignment()[static_cast<std::size_t>(i)]) cells.emplace_back(i, j);
    }
    const auto total = static_cast<int>(cells.size());
    // Guard against 0.29 * 100 = 28.999...
    const int replace = std::min(total, static_cast<int>(std::floor(fraction * total + 1e-9)));
    LabelTable labels = matrix.labels();
    for (int idx : rng.sample_subset(total, replace)) {
        const auto [i, j] = cells[static_cast<std::size_t>(idx)];
        labels(i, j) = rng.coin_label();
    }
    return LabelMatrix(std::move(labels), matrix.maybe_ground_truth());
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

std::optional<Label> parse_label(std::string_view field) {
    if (field == "1" || field == "+1") return Label{1};
    if (field == "-1") return Label{-1};
    return std::nullopt;
}

bool is_integer(std::string_view s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// Dense index per id, in sorted order (numeric when all ids are integers).
std::unordered_map<std::string, int> compact(const std::vector<std::string>& ids) {
    std::vector<std::string> sorted = ids;
    const bool numeric = std::all_of(sorted.begin(), sorted.end(), [](const std::string& s) { return is_integer(s); });
    if (numeric) {
        std::sort(sorted.begin(), sorted.end(),
                  [](const std::string& a, const std::string& b) { return std::stoll(a) < std::stoll(b); });
    } else {
        std::sort(sorted.begin(), sorted.end());
    }
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::unordered_map<std::string, int> index;
    for (std::size_t k = 0; k < sorted.size(); ++k) index.emplace(sorted[k], static_cast<int>(k));
    return index;
}

struct Row {
    std::string task;
    std::string worker;
    Label label;
    std::optional<Label> gold;
    std::size_t line;
};

}  // namespace

LabelMatrix ingest_dataset(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty()) continue;
        if (!header_seen) {
            if (content != "task_id,worker_id,label,gold") {
                throw ParseError("expected header 'task_id,worker_id,label,gold'", line_no);
            }
            header_seen = true;
            continue;
        }
        const auto fields = split_commas(content);
        if (fields.size() != 4) throw ParseError("expected 4 comma-separated fields", line_no);
        if (fields[0].empty() || fields[1].empty()) throw ParseError("empty task or worker id", line_no);
        const auto label = parse_label(fields[2]);
        if (!label) throw ParseError("label must be -1 or 1, got '" + std::string(fields[2]) + "'", line_no);
        std::optional<Label> gold;
        if (fields[3] != "?") {
            gold = parse_label(fields[3]);
            if (!gold) throw ParseError("gold must be -1, 1 or ?, got '" + std::string(fields[3]) + "'", line_no);
        }
        rows.push_back({std::string(fields[0]), std::string(fields[1]), *label, gold, line_no});
    }
    if (!header_seen) throw ParseError("empty dataset: missing header", line_no == 0 ? 1 : line_no);

    std::vector<std::string> task_ids, worker_ids;
    for (const auto& r : rows) {
        task_ids.push_back(r.task);
        worker_ids.push_back(r.worker);
    }
    const auto task_index = compact(task_ids);
    const auto worker_index = compact(worker_ids);

    LabelTable labels = LabelTable::Zero(static_cast<Eigen::Index>(worker_index.size()),
                                         static_cast<Eigen::Index>(task_index.size()));
    // Per task: gold token seen so far (0 = '?').
    std::vector<std::optional<Label>> gold(task_index.size());
    std::vector<bool> gold_seen(task_index.size(), false);
    for (const auto& r : rows) {
        const int j = task_index.at(r.task);
        const int i = worker_index.at(r.worker);
        if (labels(i, j) != kUnassigned) {
            throw ConflictError("line " + std::to_string(r.line) + ": duplicate label for task '" + r.task +
                                "' by worker '" + r.worker + "'");
        }
        labels(i, j) = r.label;
        const auto ju = static_cast<std::size_t>(j);
        if (!gold_seen[ju]) {
            gold[ju] = r.gold;
            gold_seen[ju] = true;
        } else if (gold[ju] != r.gold) {
            throw ConflictError("line " + std::to_string(r.line) + ": inconsistent gold for task '" + r.task + "'");
        }
    }
    std::optional<std::vector<Label>> truth;
    if (!gold.empty() && std::all_of(gold.begin(), gold.end(), [](const auto& g) { return g.has_value(); })) {
        truth.emplace();
        for (const auto& g : gold) truth->push_back(*g);
    }
    return LabelMatrix(std::move(labels), std::move(truth));
}

LabelMatrix ingest_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file '" + path.string() + "'");
    return ingest_dataset(in);
}

void export_dataset(const LabelMatrix& matrix, std::ostream& out) {
    out << "task_id,worker_id,label,gold\n";
    for (int j = 0; j < matrix.tasks(); ++j) {
        for (int i = 0; i < matrix.workers(); ++i) {
            const Label v = matrix.at(i, j);
            if (v == kUnassigned) continue;
            out << j << ',' << i << ',' << static_cast<int>(v) << ',';
            if (matrix.has_ground_truth()) {
                out << static_cast<int>(matrix.ground_truth()[static_cast<std::size_t>(j)]);
            } else {
                out << '?';
            }
            out << '\n';
        }
    }
}

void export_dataset(const LabelMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write dataset file '" + path.string() + "'");
    export_dataset(matrix, out);
}

double label_accuracy(std::span<const Label> estimate, std::span<const Label> truth) {
    if (estimate.size() != truth.size()) throw ConfigError("accuracy: length mismatch");
    if (truth.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) hits += estimate[j] == truth[j] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace crowdmech
