#include "morsdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "morsdp/errors.hpp"

namespace morsdp {

namespace {
constexpr double kRowSumTol = 1e-12;
}

double DiscountSpec::beta_max() const {
    double m = 0.0;
    for (double b : beta) m = std::max(m, b);
    return m;
}

DiscountSpec DiscountSpec::of(Vec b, int num_objectives) {
    if (static_cast<int>(b.size()) != num_objectives)
        throw ValidationError("discount: expected " + std::to_string(num_objectives) +
                              " factors, got " + std::to_string(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (!(b[i] > 0.0) || !(b[i] < 1.0))
            throw ValidationError("discount: factor " + std::to_string(i + 1) +
                                  " must lie strictly inside (0,1); a factor of 1 is "
                                  "unsupported, use the undiscounted path");
    }
    DiscountSpec d;
    d.beta = std::move(b);
    return d;
}

FiniteMdp::FiniteMdp(std::vector<std::string> states, std::vector<std::string> actions,
                     std::vector<std::vector<ActionId>> feasible,
                     std::vector<std::vector<std::vector<Transition>>> rows,
                     std::vector<CostDecl> costs, bool allow_zero_cost)
    : states_(std::move(states)),
      actions_(std::move(actions)),
      feasible_(std::move(feasible)),
      rows_(std::move(rows)),
      costs_(std::move(costs)),
      allow_zero_cost_(allow_zero_cost) {
    if (states_.empty()) throw ValidationError("model: no states");
    if (actions_.empty()) throw ValidationError("model: no actions");
    if (costs_.empty()) throw ValidationError("model: no cost objectives");
    if (feasible_.size() != states_.size() || rows_.size() != states_.size())
        throw ValidationError("model: per-state table sizes disagree with the state count");

    {
        std::unordered_set<std::string> seen;
        for (const auto& s : states_)
            if (!seen.insert(s).second)
                throw ValidationError("model: duplicate state label '" + s + "'");
        seen.clear();
        for (const auto& a : actions_)
            if (!seen.insert(a).second)
                throw ValidationError("model: duplicate action label '" + a + "'");
        seen.clear();
        for (const auto& c : costs_)
            if (!seen.insert(c.name).second)
                throw ValidationError("model: duplicate cost name '" + c.name + "'");
    }

    const int nA = num_actions();
    const std::size_t iMax = costs_.size();

    for (std::size_t i = 0; i < iMax; ++i) {
        const CostDecl& c = costs_[i];
        if (std::isnan(c.lower) || std::isnan(c.upper) || c.lower > c.upper)
            throw ValidationError("cost '" + c.name + "': bounds are not ordered");
        bool ok = allow_zero_cost_ ? (c.lower >= 0.0) : (c.lower > 0.0);
        if (!ok)
            throw ValidationError("cost '" + c.name + "': lower bound " +
                                  std::to_string(c.lower) +
                                  (allow_zero_cost_ ? " must be >= 0" : " must be > 0"));
    }

    for (StateId x = 0; x < static_cast<StateId>(states_.size()); ++x) {
        auto& feas = feasible_[static_cast<std::size_t>(x)];
        if (feas.empty())
            throw ValidationError("state '" + states_[static_cast<std::size_t>(x)] +
                                  "': empty feasible action set");
        if (!std::is_sorted(feas.begin(), feas.end()) ||
            std::adjacent_find(feas.begin(), feas.end()) != feas.end())
            throw ValidationError("state '" + states_[static_cast<std::size_t>(x)] +
                                  "': feasible actions must be sorted and unique");
        for (ActionId a : feas)
            if (a < 0 || a >= nA)
                throw ValidationError("state '" + states_[static_cast<std::size_t>(x)] +
                                      "': feasible action index out of range");

        auto& per_action = rows_[static_cast<std::size_t>(x)];
        if (per_action.size() != actions_.size())
            throw ValidationError("state '" + states_[static_cast<std::size_t>(x)] +
                                  "': successor table has wrong action arity");
        for (ActionId a = 0; a < nA; ++a) {
            const auto& row = per_action[static_cast<std::size_t>(a)];
            bool is_feasible = std::binary_search(feas.begin(), feas.end(), a);
            if (!is_feasible) {
                if (!row.empty())
                    throw ValidationError("transitions declared for infeasible pair (" +
                                          states_[static_cast<std::size_t>(x)] + ", " +
                                          actions_[static_cast<std::size_t>(a)] + ")");
                continue;
            }
            if (row.empty())
                throw ValidationError("no transitions declared for feasible pair (" +
                                      states_[static_cast<std::size_t>(x)] + ", " +
                                      actions_[static_cast<std::size_t>(a)] + ")");
            double sum = 0.0;
            std::unordered_set<StateId> targets;
            for (const Transition& t : row) {
                if (t.next < 0 || t.next >= static_cast<StateId>(states_.size()))
                    throw ValidationError("transition target out of range from (" +
                                          states_[static_cast<std::size_t>(x)] + ", " +
                                          actions_[static_cast<std::size_t>(a)] + ")");
                if (!targets.insert(t.next).second)
                    throw ValidationError(
                        "duplicate transition entry (" + states_[static_cast<std::size_t>(x)] +
                        ", " + actions_[static_cast<std::size_t>(a)] + ", " +
                        states_[static_cast<std::size_t>(t.next)] + ")");
                if (!(t.prob > 0.0) || t.prob > 1.0 + kRowSumTol)
                    throw ValidationError(
                        "transition probability outside (0,1] for (" +
                        states_[static_cast<std::size_t>(x)] + ", " +
                        actions_[static_cast<std::size_t>(a)] + ", " +
                        states_[static_cast<std::size_t>(t.next)] + ")");
                sum += t.prob;
                if (t.cost.size() != iMax)
                    throw ValidationError("transition cost arity mismatch on (" +
                                          states_[static_cast<std::size_t>(x)] + ", " +
                                          actions_[static_cast<std::size_t>(a)] + ", " +
                                          states_[static_cast<std::size_t>(t.next)] + ")");
                for (std::size_t i = 0; i < iMax; ++i) {
                    const CostDecl& c = costs_[i];
                    if (t.cost[i] < c.lower - kRowSumTol || t.cost[i] > c.upper + kRowSumTol)
                        throw ValidationError(
                            "cost '" + c.name + "' out of declared bounds on triple (" +
                            states_[static_cast<std::size_t>(x)] + ", " +
                            actions_[static_cast<std::size_t>(a)] + ", " +
                            states_[static_cast<std::size_t>(t.next)] + "): value " +
                            std::to_string(t.cost[i]));
                }
            }
            if (std::fabs(sum - 1.0) > kRowSumTol)
                throw ValidationError("row (" + states_[static_cast<std::size_t>(x)] + ", " +
                                      actions_[static_cast<std::size_t>(a)] +
                                      ") sums to " + std::to_string(sum) + ", expected 1");
        }
    }
}

const std::vector<ActionId>& FiniteMdp::feasible(StateId x) const {
    return feasible_[static_cast<std::size_t>(x)];
}

const std::vector<Transition>& FiniteMdp::successors(StateId x, ActionId a) const {
    return rows_[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
}

std::string FiniteMdp::state_label(StateId x) const {
    return states_[static_cast<std::size_t>(x)];
}

std::string FiniteMdp::action_label(ActionId a) const {
    return actions_[static_cast<std::size_t>(a)];
}

StateId FiniteMdp::state_index(const std::string& label) const {
    for (std::size_t i = 0; i < states_.size(); ++i)
        if (states_[i] == label) return static_cast<StateId>(i);
    return -1;
}

}  // namespace morsdp
