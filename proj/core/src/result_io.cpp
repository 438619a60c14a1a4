#include "morsdp/result_io.hpp"

#include <charconv>
#include <string>

#include <json.hpp>

namespace morsdp {

namespace {

using nlohmann::ordered_json;

std::string shortest(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

ordered_json policy_stages_json(const Mdp& m, const HistoryPolicy& pol) {
    const LayerGraph& g = pol.layers();
    ordered_json stages = ordered_json::array();
    for (std::size_t k = 0; k < pol.stage_policies().size(); ++k) {
        const StagePolicy& rule = pol.stage_policies()[k];
        const Layer& layer = g.layer(rule.layer);
        ordered_json entries = ordered_json::array();
        for (std::size_t j = 0; j < layer.size(); ++j)
            entries.push_back(ordered_json::array(
                {m.state_label(layer.x[j]), layer.d[j], layer.z,
                 m.action_label(rule.action[j])}));
        stages.push_back(ordered_json{{"stage", rule.layer}, {"entries", std::move(entries)}});
    }
    return stages;
}

}  // namespace

std::string finite_result_json(const Mdp& m, const FiniteSolveResult& r) {
    ordered_json out;
    out["value"] = r.value;
    out["policy"] = policy_stages_json(m, r.policy);
    return out.dump(2) + "\n";
}

std::string infinite_result_json(const Mdp& m, const InfiniteSolveResult& r) {
    const ConvergenceCertificate& c = r.certificate;
    ordered_json out;
    out["value"] = r.value;
    out["bracket"] = ordered_json::array({c.lower, c.upper});
    out["iterations"] = c.iterations;
    out["policy"] = policy_stages_json(m, r.policy);
    out["certificate"] = ordered_json{{"iterations", c.iterations},
                                      {"tolerance", c.tolerance},
                                      {"lower", c.lower},
                                      {"upper", c.upper},
                                      {"gap", c.gap},
                                      {"stop_gap", c.stop_gap},
                                      {"residual", c.residual}};
    return out.dump(2) + "\n";
}

namespace {

ordered_json tree_json(const PomdpModel& p, const ObsPolicy::Node& n) {
    ordered_json out;
    out["action"] = p.actions[static_cast<std::size_t>(n.action)];
    if (!n.children.empty()) {
        ordered_json kids = ordered_json::object();
        for (std::size_t y = 0; y < n.children.size(); ++y)
            kids[p.observations[y]] = tree_json(p, n.children[y]);
        out["children"] = std::move(kids);
    }
    return out;
}

}  // namespace

std::string rspomdp_result_json(const PomdpModel& p, const RspomdpResult& r) {
    ordered_json out;
    out["value"] = r.value;
    out["policy"] = tree_json(p, r.policy.root);
    out["pruned_mass"] = r.pruned_mass;
    out["shift_offset"] = r.shift_offset;
    out["info_states"] = r.info_states;
    return out.dump(2) + "\n";
}

std::string mdp_oracle_json(const MdpSearchResult& r, PolicyClass cls) {
    ordered_json out;
    out["value"] = r.best_value;
    out["class"] = cls == PolicyClass::Markov ? "markov" : "history";
    out["policies"] = r.policies;
    out["atoms"] = r.paths;
    return out.dump(2) + "\n";
}

std::string pomdp_oracle_json(const PomdpModel& p, const PomdpSearchResult& r) {
    ordered_json out;
    out["value"] = r.best_value;
    out["policy"] = tree_json(p, r.best_policy.root);
    out["policies"] = r.policies;
    out["atoms"] = r.paths;
    return out.dump(2) + "\n";
}

std::string bandit_result_json(double mu, int horizon, int grid, double value, double analytic) {
    ordered_json out;
    out["mu"] = mu;
    out["horizon"] = horizon;
    out["grid"] = grid;
    out["value"] = value;
    out["analytic"] = analytic;
    return out.dump(2) + "\n";
}

std::string validate_result_json(const std::string& kind) {
    ordered_json out;
    out["ok"] = true;
    out["kind"] = kind;
    return out.dump(2) + "\n";
}

std::string value_table_csv(const Mdp& m, const HistoryPolicy& policy,
                            const std::vector<ValueTable>& tables) {
    const LayerGraph& g = policy.layers();
    const int k_obj = m.num_objectives();
    const bool discounted = g.discount().discounted();

    std::string out = "layer,stage,x";
    for (int i = 1; i <= k_obj; ++i) out += ",d" + std::to_string(i);
    if (discounted)
        for (int i = 1; i <= k_obj; ++i) out += ",z" + std::to_string(i);
    out += ",value,action\n";

    for (const ValueTable& t : tables) {
        const Layer& layer = g.layer(t.layer);
        const StagePolicy* rule =
            t.layer < static_cast<int>(policy.stage_policies().size())
                ? &policy.stage_policies()[static_cast<std::size_t>(t.layer)]
                : nullptr;
        for (std::size_t j = 0; j < layer.size(); ++j) {
            out += std::to_string(t.layer);
            out += ',' + std::to_string(t.stage);
            out += ',' + csv_field(m.state_label(layer.x[j]));
            for (double d : layer.d[j]) out += ',' + shortest(d);
            if (discounted)
                for (double z : layer.z) out += ',' + shortest(z);
            out += ',' + shortest(t.values[j]);
            out += ',';
            if (rule != nullptr) out += csv_field(m.action_label(rule->action[j]));
            out += '\n';
        }
    }
    return out;
}

std::string certificate_csv(const ConvergenceCertificate& c) {
    std::string out = "iteration,lower,upper,useed,frontier_gap,residual\n";
    for (std::size_t i = 0; i < c.lower_history.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',' + shortest(c.lower_history[i]);
        out += ',' + shortest(c.upper_history[i]);
        out += ',' + shortest(c.useed_history[i]);
        out += ',' + shortest(c.frontier_gap_history[i]);
        out += ',';
        if (i >= 1) out += shortest(c.residual_history[i - 1]);
        out += '\n';
    }
    return out;
}

std::string layer_sizes_csv(const LayerGraph& g) {
    std::string out = "layer,nodes\n";
    for (int k = 0; k <= g.depth(); ++k)
        out += std::to_string(k) + ',' + std::to_string(g.layer(k).size()) + '\n';
    return out;
}

std::string layer_sizes_csv(const std::vector<std::size_t>& sizes) {
    std::string out = "layer,nodes\n";
    for (std::size_t k = 0; k < sizes.size(); ++k)
        out += std::to_string(k) + ',' + std::to_string(sizes[k]) + '\n';
    return out;
}

}  // namespace morsdp
