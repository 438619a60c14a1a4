#pragma once

#include <string>
#include <vector>

#include "morsdp/types.hpp"

namespace morsdp {

// One successor of a (state, action) pair: target state, transition
// probability, and one accumulated-cost increment per objective.
struct Transition {
    StateId next;
    double prob;
    Vec cost;
};

// Interface the augmentation and the solvers work against: a finite-action
// controlled Markov chain with a cost vector on every transition. States are
// dense integer handles starting at 0; lazily constructed models may grow the
// handle range inside successors(), so expansion must be single-threaded
// (read-only queries afterwards are safe from any thread).
class Mdp {
public:
    virtual ~Mdp() = default;

    virtual int num_objectives() const = 0;
    virtual int num_actions() const = 0;
    virtual const std::vector<ActionId>& feasible(StateId x) const = 0;
    virtual const std::vector<Transition>& successors(StateId x, ActionId a) const = 0;
    virtual std::string state_label(StateId x) const = 0;
    virtual std::string action_label(ActionId a) const = 0;

    // True when every expanded successor row sums to one. Sub-probability
    // reduction products (after zero-likelihood pruning) return false, which
    // disables invariant checks that assume conserved mass.
    virtual bool mass_conserving() const { return true; }
};

// Per-objective discounting. Empty = undiscounted (finite horizon only with
// no weight sequence); otherwise one factor per objective, each strictly
// inside (0,1). A factor of exactly 1 is rejected: run the undiscounted path
// instead.
struct DiscountSpec {
    Vec beta;

    bool discounted() const { return !beta.empty(); }
    double beta_max() const;

    static DiscountSpec none() { return {}; }
    static DiscountSpec of(Vec b, int num_objectives);
};

// Declared name and bounds of one cost objective. Bounds are validated
// against every positive-probability transition at load time.
struct CostDecl {
    std::string name;
    double lower;
    double upper;
};

class FiniteMdp final : public Mdp {
public:
    // rows[x][a] lists the successors of (x, a); rows for infeasible actions
    // must be empty. The constructor validates stochasticity (row sums within
    // 1e-12 of 1), cost bounds on every declared transition, and bound
    // positivity (lower > 0, or >= 0 when allow_zero_cost is set).
    FiniteMdp(std::vector<std::string> states, std::vector<std::string> actions,
              std::vector<std::vector<ActionId>> feasible,
              std::vector<std::vector<std::vector<Transition>>> rows, std::vector<CostDecl> costs,
              bool allow_zero_cost = false);

    int num_objectives() const override { return static_cast<int>(costs_.size()); }
    int num_actions() const override { return static_cast<int>(actions_.size()); }
    int num_states() const { return static_cast<int>(states_.size()); }
    const std::vector<ActionId>& feasible(StateId x) const override;
    const std::vector<Transition>& successors(StateId x, ActionId a) const override;
    std::string state_label(StateId x) const override;
    std::string action_label(ActionId a) const override;

    const std::vector<std::string>& state_labels() const { return states_; }
    const std::vector<std::string>& action_labels() const { return actions_; }
    const std::vector<CostDecl>& cost_decls() const { return costs_; }
    bool zero_cost_allowed() const { return allow_zero_cost_; }

    StateId state_index(const std::string& label) const;  // -1 if unknown

private:
    std::vector<std::string> states_;
    std::vector<std::string> actions_;
    std::vector<std::vector<ActionId>> feasible_;
    std::vector<std::vector<std::vector<Transition>>> rows_;
    std::vector<CostDecl> costs_;
    bool allow_zero_cost_;
};

}  // namespace morsdp
