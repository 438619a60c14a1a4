#include "morsdp/model_io.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "morsdp/errors.hpp"
#include "morsdp/expr.hpp"
#include "morsdp/pomdp.hpp"

namespace morsdp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (const char* k : allowed)
            if (key == k) {
                known = true;
                break;
            }
        if (!known) throw ParseError("unknown key \"" + key + "\" in " + where);
    }
}

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError("missing key \"" + std::string(key) + "\" in " + where);
    return *it;
}

std::vector<std::string> string_array(const json& v, const std::string& where) {
    if (!v.is_array()) throw ParseError(where + " must be an array of strings");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_string()) throw ParseError(where + " must contain only strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

double number_at(const json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where + " must be a number");
    return v.get<double>();
}

class LabelIndex {
public:
    LabelIndex(const std::vector<std::string>& labels, std::string what) : what_(std::move(what)) {
        for (std::size_t i = 0; i < labels.size(); ++i)
            map_.emplace(labels[i], static_cast<int>(i));
    }

    int at(const json& v, const std::string& where) const {
        if (!v.is_string()) throw ParseError(where + " must name a " + what_);
        const auto s = v.get<std::string>();
        auto it = map_.find(s);
        if (it == map_.end())
            throw ParseError("unknown " + what_ + " label \"" + s + "\" in " + where);
        return it->second;
    }

private:
    std::string what_;
    std::unordered_map<std::string, int> map_;
};

std::vector<ExpTerm> parse_terms(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty())
        throw ParseError(where + " must be a nonempty array of {w, lambda} objects");
    std::vector<ExpTerm> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& t = v[i];
        const std::string slot = where + "[" + std::to_string(i) + "]";
        if (!t.is_object()) throw ParseError(slot + " must be an object");
        reject_unknown_keys(t, {"w", "lambda"}, slot);
        out.push_back(ExpTerm{number_at(require(t, "w", slot), slot + ".w"),
                              number_at(require(t, "lambda", slot), slot + ".lambda")});
    }
    return out;
}

UtilitySpec parse_utility(const json& v, int arity, const std::vector<CostDecl>& costs) {
    if (!v.is_object()) throw ParseError("utility must be an object");
    const auto& type = require(v, "type", "utility");
    if (!type.is_string()) throw ParseError("utility.type must be a string");
    const auto kind = type.get<std::string>();

    if (kind == "sum_exp") {
        reject_unknown_keys(v, {"type", "terms"}, "utility");
        auto terms = parse_terms(require(v, "terms", "utility"), "utility.terms");
        if (static_cast<int>(terms.size()) != arity)
            throw ValidationError("utility needs one exponential term per cost objective");
        return UtilitySpec::sum_of_exponentials(std::move(terms));
    }
    if (kind == "expr") {
        reject_unknown_keys(v, {"type", "src"}, "utility");
        const auto& src = require(v, "src", "utility");
        if (!src.is_string()) throw ParseError("utility.src must be a string");
        const auto text = src.get<std::string>();
        UtilitySpec u = UtilitySpec::expression(parse_utility_expr(text, arity), arity, text);

        // Monotonicity probe on a box comfortably covering desk-scale
        // reachable cost sums (32 stages of the declared per-step maximum).
        Vec box(costs.size());
        for (std::size_t i = 0; i < costs.size(); ++i) box[i] = 32.0 * costs[i].upper;
        validate_monotone(u, box);
        return u;
    }
    throw ParseError("utility.type must be \"sum_exp\" or \"expr\"");
}

MdpDocument parse_mdp(const json& doc) {
    reject_unknown_keys(doc,
                        {"kind", "states", "actions", "feasible", "transitions", "costs",
                         "allow_zero_cost", "utility", "beta"},
                        "model document");

    auto states = string_array(require(doc, "states", "model document"), "states");
    auto actions = string_array(require(doc, "actions", "model document"), "actions");
    const LabelIndex state_ix(states, "state");
    const LabelIndex action_ix(actions, "action");

    const auto& feas = require(doc, "feasible", "model document");
    if (!feas.is_object()) throw ParseError("feasible must map state labels to action arrays");
    std::vector<std::vector<ActionId>> feasible(states.size());
    for (const auto& [key, value] : feas.items()) {
        const int x = state_ix.at(json(key), "feasible");
        if (!value.is_array()) throw ParseError("feasible." + key + " must be an action array");
        auto& set = feasible[static_cast<std::size_t>(x)];
        for (const auto& e : value)
            set.push_back(action_ix.at(e, "feasible." + key));
        std::sort(set.begin(), set.end());
        if (std::adjacent_find(set.begin(), set.end()) != set.end())
            throw ParseError("feasible." + key + " lists an action twice");
    }

    const auto& trans = require(doc, "transitions", "model document");
    if (!trans.is_array()) throw ParseError("transitions must be an array of [x, a, x', p]");
    std::vector<std::vector<std::vector<Transition>>> rows(
        states.size(), std::vector<std::vector<Transition>>(actions.size()));
    std::map<std::tuple<int, int, int>, std::size_t> slot;  // (x, a, x') -> index within row
    for (std::size_t i = 0; i < trans.size(); ++i) {
        const auto& e = trans[i];
        const std::string where = "transitions[" + std::to_string(i) + "]";
        if (!e.is_array() || e.size() != 4)
            throw ParseError(where + " must be [from, action, to, prob]");
        const int x = state_ix.at(e[0], where);
        const int a = action_ix.at(e[1], where);
        const int nx = state_ix.at(e[2], where);
        const double p = number_at(e[3], where + " prob");
        auto& row = rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
        if (!slot.emplace(std::make_tuple(x, a, nx), row.size()).second)
            throw ParseError(where + " repeats a transition triple");
        row.push_back(Transition{nx, p, {}});
    }

    const auto& costs_v = require(doc, "costs", "model document");
    if (!costs_v.is_array() || costs_v.empty())
        throw ParseError("costs must be a nonempty array of objective objects");
    std::vector<CostDecl> decls;
    decls.reserve(costs_v.size());

    // Pre-size every transition's cost vector, then fill from the entries.
    for (auto& per_state : rows)
        for (auto& row : per_state)
            for (auto& t : row) t.cost.assign(costs_v.size(), 0.0);

    for (std::size_t i = 0; i < costs_v.size(); ++i) {
        const auto& c = costs_v[i];
        const std::string where = "costs[" + std::to_string(i) + "]";
        if (!c.is_object()) throw ParseError(where + " must be an object");
        reject_unknown_keys(c, {"name", "entries", "lower", "upper"}, where);
        const auto& name = require(c, "name", where);
        if (!name.is_string()) throw ParseError(where + ".name must be a string");
        decls.push_back(CostDecl{name.get<std::string>(),
                                 number_at(require(c, "lower", where), where + ".lower"),
                                 number_at(require(c, "upper", where), where + ".upper")});
        if (decls.back().lower < 0.0)
            throw ValidationError("cost \"" + decls.back().name +
                                  "\" declares a negative lower bound");

        const auto& entries = require(c, "entries", where);
        if (!entries.is_array()) throw ParseError(where + ".entries must be an array");
        for (std::size_t j = 0; j < entries.size(); ++j) {
            const auto& e = entries[j];
            const std::string ew = where + ".entries[" + std::to_string(j) + "]";
            if (!e.is_array() || e.size() != 4)
                throw ParseError(ew + " must be [from, action, to, value]");
            const int x = state_ix.at(e[0], ew);
            const int a = action_ix.at(e[1], ew);
            const int nx = state_ix.at(e[2], ew);
            auto it = slot.find(std::make_tuple(x, a, nx));
            if (it == slot.end())
                throw ParseError(ew + " refers to an undeclared transition (" +
                                 states[static_cast<std::size_t>(x)] + ", " +
                                 actions[static_cast<std::size_t>(a)] + ", " +
                                 states[static_cast<std::size_t>(nx)] + ")");
            rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)][it->second].cost[i] =
                number_at(e[3], ew + " value");
        }
    }

    bool allow_zero = false;
    if (auto it = doc.find("allow_zero_cost"); it != doc.end()) {
        if (!it->is_boolean()) throw ParseError("allow_zero_cost must be a boolean");
        allow_zero = it->get<bool>();
    }

    UtilitySpec utility =
        parse_utility(require(doc, "utility", "model document"),
                      static_cast<int>(decls.size()), decls);

    DiscountSpec discount = DiscountSpec::none();
    if (auto it = doc.find("beta"); it != doc.end()) {
        if (!it->is_array()) throw ParseError("beta must be an array of numbers");
        Vec b;
        b.reserve(it->size());
        for (const auto& e : *it) b.push_back(number_at(e, "beta"));
        discount = DiscountSpec::of(std::move(b), static_cast<int>(decls.size()));
    }

    FiniteMdp model(std::move(states), std::move(actions), std::move(feasible), std::move(rows),
                    std::move(decls), allow_zero);
    return MdpDocument{std::move(model), std::move(utility), std::move(discount)};
}

PomdpDocument parse_pomdp(const json& doc) {
    reject_unknown_keys(
        doc, {"kind", "hidden_states", "observations", "actions", "transition", "signal", "cost",
              "terms"},
        "model document");

    PomdpModel p;
    p.hidden = string_array(require(doc, "hidden_states", "model document"), "hidden_states");
    p.observations = string_array(require(doc, "observations", "model document"), "observations");
    p.actions = string_array(require(doc, "actions", "model document"), "actions");
    const LabelIndex s_ix(p.hidden, "hidden state");
    const LabelIndex y_ix(p.observations, "observation");
    const LabelIndex a_ix(p.actions, "action");

    const auto nS = p.hidden.size();
    const auto nY = p.observations.size();
    const auto nA = p.actions.size();

    p.kernel.assign(nA, std::vector<Vec>(nS, Vec(nS, 0.0)));
    const auto& trans = require(doc, "transition", "model document");
    if (!trans.is_array()) throw ParseError("transition must be an array of [s, a, s', p]");
    for (std::size_t i = 0; i < trans.size(); ++i) {
        const auto& e = trans[i];
        const std::string where = "transition[" + std::to_string(i) + "]";
        if (!e.is_array() || e.size() != 4)
            throw ParseError(where + " must be [from, action, to, prob]");
        const auto s = static_cast<std::size_t>(s_ix.at(e[0], where));
        const auto a = static_cast<std::size_t>(a_ix.at(e[1], where));
        const auto sn = static_cast<std::size_t>(s_ix.at(e[2], where));
        p.kernel[a][s][sn] = number_at(e[3], where + " prob");
    }

    p.signal.assign(nS, Vec(nY, 0.0));
    const auto& sig = require(doc, "signal", "model document");
    if (!sig.is_array()) throw ParseError("signal must be an array of [y, s, q]");
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const auto& e = sig[i];
        const std::string where = "signal[" + std::to_string(i) + "]";
        if (!e.is_array() || e.size() != 3) throw ParseError(where + " must be [y, s, q]");
        const auto y = static_cast<std::size_t>(y_ix.at(e[0], where));
        const auto s = static_cast<std::size_t>(s_ix.at(e[1], where));
        p.signal[s][y] = number_at(e[2], where + " prob");
    }

    p.stage_cost.assign(nS, Vec(nA, 0.0));
    const auto& cost = require(doc, "cost", "model document");
    if (!cost.is_array()) throw ParseError("cost must be an array of [s, a, value]");
    for (std::size_t i = 0; i < cost.size(); ++i) {
        const auto& e = cost[i];
        const std::string where = "cost[" + std::to_string(i) + "]";
        if (!e.is_array() || e.size() != 3) throw ParseError(where + " must be [s, a, value]");
        const auto s = static_cast<std::size_t>(s_ix.at(e[0], where));
        const auto a = static_cast<std::size_t>(a_ix.at(e[1], where));
        p.stage_cost[s][a] = number_at(e[2], where + " value");
    }

    p.terms = parse_terms(require(doc, "terms", "model document"), "terms");
    p.validate();
    return PomdpDocument{std::move(p)};
}

}  // namespace

ModelDocument parse_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("model document is not valid JSON at byte " + std::to_string(e.byte) +
                         ": " + e.what());
    }
    if (!doc.is_object()) throw ParseError("model document must be a JSON object");

    const auto& kind = require(doc, "kind", "model document");
    if (!kind.is_string()) throw ParseError("kind must be a string");
    const auto k = kind.get<std::string>();
    if (k == "mdp") return parse_mdp(doc);
    if (k == "pomdp") return parse_pomdp(doc);
    throw ParseError("kind must be \"mdp\" or \"pomdp\"");
}

std::string print_model(const MdpDocument& doc) {
    const FiniteMdp& m = doc.model;
    ordered_json out;
    out["kind"] = "mdp";
    out["states"] = m.state_labels();
    out["actions"] = m.action_labels();

    ordered_json feas = ordered_json::object();
    for (StateId x = 0; x < m.num_states(); ++x) {
        ordered_json acts = ordered_json::array();
        for (ActionId a : m.feasible(x)) acts.push_back(m.action_label(a));
        feas[m.state_label(x)] = std::move(acts);
    }
    out["feasible"] = std::move(feas);

    ordered_json trans = ordered_json::array();
    for (StateId x = 0; x < m.num_states(); ++x)
        for (ActionId a : m.feasible(x))
            for (const Transition& t : m.successors(x, a))
                trans.push_back(ordered_json::array(
                    {m.state_label(x), m.action_label(a), m.state_label(t.next), t.prob}));
    out["transitions"] = std::move(trans);

    ordered_json costs = ordered_json::array();
    for (std::size_t i = 0; i < m.cost_decls().size(); ++i) {
        const CostDecl& c = m.cost_decls()[i];
        ordered_json entries = ordered_json::array();
        for (StateId x = 0; x < m.num_states(); ++x)
            for (ActionId a : m.feasible(x))
                for (const Transition& t : m.successors(x, a))
                    entries.push_back(ordered_json::array({m.state_label(x), m.action_label(a),
                                                           m.state_label(t.next), t.cost[i]}));
        costs.push_back(ordered_json{
            {"name", c.name}, {"entries", std::move(entries)}, {"lower", c.lower},
            {"upper", c.upper}});
    }
    out["costs"] = std::move(costs);

    if (m.zero_cost_allowed()) out["allow_zero_cost"] = true;

    if (doc.utility.is_sum_exp()) {
        ordered_json terms = ordered_json::array();
        for (const ExpTerm& t : doc.utility.terms())
            terms.push_back(ordered_json{{"w", t.weight}, {"lambda", t.rate}});
        out["utility"] = ordered_json{{"type", "sum_exp"}, {"terms", std::move(terms)}};
    } else {
        out["utility"] = ordered_json{{"type", "expr"}, {"src", print_expr(doc.utility.ast())}};
    }

    if (doc.discount.discounted()) out["beta"] = doc.discount.beta;

    return out.dump(2) + "\n";
}

std::string print_model(const PomdpDocument& doc) {
    const PomdpModel& p = doc.model;
    for (double v : p.cost_offset)
        if (v != 0.0)
            throw ValidationError(
                "a model with per-term cost offsets has no document form; offsets exist only "
                "inside the reduction");

    ordered_json out;
    out["kind"] = "pomdp";
    out["hidden_states"] = p.hidden;
    out["observations"] = p.observations;
    out["actions"] = p.actions;

    ordered_json trans = ordered_json::array();
    for (std::size_t s = 0; s < p.hidden.size(); ++s)
        for (std::size_t a = 0; a < p.actions.size(); ++a)
            for (std::size_t sn = 0; sn < p.hidden.size(); ++sn)
                if (p.kernel[a][s][sn] != 0.0)
                    trans.push_back(ordered_json::array(
                        {p.hidden[s], p.actions[a], p.hidden[sn], p.kernel[a][s][sn]}));
    out["transition"] = std::move(trans);

    ordered_json sig = ordered_json::array();
    for (std::size_t s = 0; s < p.hidden.size(); ++s)
        for (std::size_t y = 0; y < p.observations.size(); ++y)
            if (p.signal[s][y] != 0.0)
                sig.push_back(
                    ordered_json::array({p.observations[y], p.hidden[s], p.signal[s][y]}));
    out["signal"] = std::move(sig);

    ordered_json cost = ordered_json::array();
    for (std::size_t s = 0; s < p.hidden.size(); ++s)
        for (std::size_t a = 0; a < p.actions.size(); ++a)
            if (p.stage_cost[s][a] != 0.0)
                cost.push_back(ordered_json::array({p.hidden[s], p.actions[a], p.stage_cost[s][a]}));
    out["cost"] = std::move(cost);

    ordered_json terms = ordered_json::array();
    for (const ExpTerm& t : p.terms)
        terms.push_back(ordered_json{{"w", t.weight}, {"lambda", t.rate}});
    out["terms"] = std::move(terms);

    return out.dump(2) + "\n";
}

MdpDocument reduce_to_document(const PomdpModel& p, const Vec& theta0, int horizon,
                               std::size_t state_budget) {
    if (horizon < 1) throw ValidationError("horizon must be at least 1");
    ShiftResult sh = shift_costs(p, horizon, theta0);
    InformationMdp imdp(std::move(sh.model), theta0, 0);
    const int nI = imdp.num_objectives();
    const int nA = imdp.num_actions();

    // Depth-limited discovery, mirroring the shift scan: states first seen
    // strictly before the horizon get expanded, the rest form the frontier.
    std::vector<StateId> frontier{0};
    StateId expanded_end = 0;
    StateId known = 1;
    for (int depth = 0; depth < horizon && !frontier.empty(); ++depth) {
        for (StateId x : frontier) {
            for (ActionId a = 0; a < nA; ++a) (void)imdp.successors(x, a);
            expanded_end = std::max(expanded_end, static_cast<StateId>(x + 1));
            if (static_cast<std::size_t>(imdp.num_states()) > state_budget)
                throw BudgetError("reachable-state budget exceeded: more than " +
                                  std::to_string(state_budget) +
                                  " information states at depth " + std::to_string(depth + 1));
        }
        const StateId total = static_cast<StateId>(imdp.num_states());
        frontier.clear();
        for (StateId x = known; x < total; ++x) frontier.push_back(x);
        known = total;
    }

    if (imdp.total_pruned_mass() > 0.0)
        throw ValidationError(
            "reduction pruned zero-likelihood observations; the resulting sub-stochastic rows "
            "have no model-document form");

    const StateId n_states = static_cast<StateId>(imdp.num_states());
    Vec lower(static_cast<std::size_t>(nI), std::numeric_limits<double>::infinity());
    Vec upper(static_cast<std::size_t>(nI), -std::numeric_limits<double>::infinity());
    for (StateId x = 0; x < expanded_end; ++x)
        for (ActionId a = 0; a < nA; ++a)
            for (const Transition& t : imdp.successors(x, a))
                for (int i = 0; i < nI; ++i) {
                    lower[static_cast<std::size_t>(i)] =
                        std::min(lower[static_cast<std::size_t>(i)],
                                 t.cost[static_cast<std::size_t>(i)]);
                    upper[static_cast<std::size_t>(i)] =
                        std::max(upper[static_cast<std::size_t>(i)],
                                 t.cost[static_cast<std::size_t>(i)]);
                }

    std::vector<std::string> states;
    states.reserve(static_cast<std::size_t>(n_states));
    for (StateId x = 0; x < n_states; ++x) states.push_back(imdp.state_label(x));

    std::vector<std::string> actions;
    actions.reserve(static_cast<std::size_t>(nA));
    for (ActionId a = 0; a < nA; ++a) actions.push_back(imdp.action_label(a));

    std::vector<ActionId> all(static_cast<std::size_t>(nA));
    for (ActionId a = 0; a < nA; ++a) all[static_cast<std::size_t>(a)] = a;
    std::vector<std::vector<ActionId>> feasible(static_cast<std::size_t>(n_states), all);

    std::vector<std::vector<std::vector<Transition>>> rows(
        static_cast<std::size_t>(n_states),
        std::vector<std::vector<Transition>>(static_cast<std::size_t>(nA)));
    for (StateId x = 0; x < n_states; ++x)
        for (ActionId a = 0; a < nA; ++a) {
            auto& row = rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
            if (x < expanded_end) {
                row = imdp.successors(x, a);
            } else {
                row.push_back(Transition{x, 1.0, lower});
            }
        }

    bool allow_zero = false;
    for (double v : lower)
        if (v <= 0.0) allow_zero = true;

    std::vector<CostDecl> decls;
    decls.reserve(static_cast<std::size_t>(nI));
    for (int i = 0; i < nI; ++i)
        decls.push_back(CostDecl{"term" + std::to_string(i + 1),
                                 lower[static_cast<std::size_t>(i)],
                                 upper[static_cast<std::size_t>(i)]});

    FiniteMdp model(std::move(states), std::move(actions), std::move(feasible), std::move(rows),
                    std::move(decls), allow_zero);
    UtilitySpec utility = UtilitySpec::sum_of_exponentials(imdp.pomdp().terms);
    return MdpDocument{std::move(model), std::move(utility), DiscountSpec::none()};
}

}  // namespace morsdp
