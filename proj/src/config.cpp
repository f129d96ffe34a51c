#include <fstream>
#include <set>

#include "crowdmech/error.hpp"
#include "crowdmech/harness.hpp"
#include "json.hpp"

namespace crowdmech {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void take(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

PopulationMember member_from(const json& obj, PopulationMember m) {
    if (!obj.is_object()) throw ConfigError("population entries must be objects");
    reject_unknown(obj, {"kind", "p_high", "cost_high", "lambda", "eft0", "utility_scale", "workers", "colluders"}, "population");
    std::string kind = to_string(m.model.kind);
    take(obj, "kind", kind);
    m.model.kind = parse_worker_kind(kind);
    take(obj, "p_high", m.profile.p_high);
    take(obj, "cost_high", m.profile.cost_high);
    take(obj, "lambda", m.model.lambda);
    take(obj, "eft0", m.model.eft0);
    take(obj, "utility_scale", m.model.utility_scale);
    return m;
}

}  // namespace

ExperimentSpec load_spec(std::istream& in, ExperimentSpec spec) {
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what());
    }
    if (!doc.is_object()) throw ParseError("config root must be an object");
    reject_unknown(doc,
                   {"population", "M", "N", "m_i", "grid", "b", "tau_plus", "priors", "gibbs", "ril", "F", "eta",
                    "steps_per_episode", "episodes", "runs", "eval_episodes", "master_seed", "redraw_assignment",
                    "reset_workers_each_episode"},
                   "config");

    take(doc, "M", spec.tasks);
    take(doc, "m_i", spec.per_worker);
    take(doc, "grid", spec.grid);
    take(doc, "b", spec.base);
    if (doc.contains("tau_plus")) {
        double tp = 0.5;
        take(doc, "tau_plus", tp);
        spec.prior = TrueLabelPrior::from_plus(tp);
    }
    if (doc.contains("priors")) {
        const auto& p = doc["priors"];
        reject_unknown(p, {"alpha1", "alpha2", "beta_minus", "beta_plus"}, "priors");
        take(p, "alpha1", spec.priors.alpha1);
        take(p, "alpha2", spec.priors.alpha2);
        take(p, "beta_minus", spec.priors.beta_minus);
        take(p, "beta_plus", spec.priors.beta_plus);
    }
    if (doc.contains("gibbs")) {
        const auto& g = doc["gibbs"];
        reject_unknown(g, {"W", "W0", "init"}, "gibbs");
        take(g, "W", spec.gibbs_samples);
        take(g, "W0", spec.burn_in);
        if (g.contains("init")) {
            std::string init;
            take(g, "init", init);
            if (init == "uniform") spec.gibbs_init = GibbsInit::Uniform;
            else if (init == "majority") spec.gibbs_init = GibbsInit::Majority;
            else throw ConfigError("gibbs.init must be 'uniform' or 'majority'");
        }
    }
    if (doc.contains("ril")) {
        const auto& r = doc["ril"];
        reject_unknown(r, {"gamma", "noise_var", "length_phi", "length_action", "budget", "novelty", "epsilon"}, "ril");
        take(r, "gamma", spec.ril.gamma);
        take(r, "noise_var", spec.ril.noise_var);
        take(r, "length_phi", spec.ril.length.phi);
        take(r, "length_action", spec.ril.length.action);
        take(r, "budget", spec.ril.budget);
        take(r, "novelty", spec.ril.novelty);
        take(r, "epsilon", spec.epsilon);
    }
    if (doc.contains("F")) {
        const auto& f = doc["F"];
        reject_unknown(f, {"exponent"}, "F");
        take(f, "exponent", spec.utility_exponent);
    }
    take(doc, "eta", spec.eta);
    take(doc, "steps_per_episode", spec.steps_per_episode);
    take(doc, "episodes", spec.episodes);
    take(doc, "runs", spec.runs);
    take(doc, "eval_episodes", spec.eval_episodes);
    take(doc, "master_seed", spec.master_seed);
    take(doc, "redraw_assignment", spec.redraw_assignment);
    take(doc, "reset_workers_each_episode", spec.reset_workers_each_episode);

    const PopulationMember templ = spec.population.empty() ? PopulationMember{} : spec.population.front();
    int n = spec.workers() > 0 ? spec.workers() : 10;
    take(doc, "N", n);
    if (doc.contains("population")) {
        const auto& pop = doc["population"];
        if (pop.is_array()) {
            spec.population.clear();
            for (const auto& entry : pop) spec.population.push_back(member_from(entry, templ));
            if (doc.contains("N") && n != spec.workers()) throw ConfigError("N disagrees with the population list");
        } else {
            const auto m = member_from(pop, templ);
            take(pop, "workers", n);
            int colluders = 0;
            take(pop, "colluders", colluders);
            if (colluders < 0 || colluders > n) throw ConfigError("colluders must lie in [0, N]");
            spec.population = uniform_population(n, m);
            for (int i = n - colluders; i < n; ++i) spec.population[static_cast<std::size_t>(i)].model.kind = WorkerKind::Colluder;
        }
    } else if (doc.contains("N")) {
        spec.population = uniform_population(n, templ);
    }
    validate(spec);
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path, ExperimentSpec base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return load_spec(in, std::move(base));
}

}  // namespace crowdmech
