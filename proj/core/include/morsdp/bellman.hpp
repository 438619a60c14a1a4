#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "morsdp/augment.hpp"
#include "morsdp/model.hpp"
#include "morsdp/utility.hpp"

namespace morsdp {

struct SolveOptions {
    std::size_t state_budget = 10'000'000;
    bool keep_tables = false;
    int max_iterations = 500;  // infinite-horizon bracket iterations
    bool apply_shift = true;   // observation-filter path: shift costs positive
};

// Values over one layer of the reachable augmented graph. `stage` counts
// steps-to-go (the terminal table has stage 0).
struct ValueTable {
    int layer = 0;
    int stage = 0;
    std::vector<double> values;
};

// Decision rule on one layer, parallel to its node order.
struct StagePolicy {
    int layer = 0;
    std::vector<ActionId> action;
};

// One backward-induction step under a fixed decision rule: expectations of
// the next table through the resolved layer edges.
ValueTable backup_policy(const LayerGraph& g, const ValueTable& next, const StagePolicy& rule);

// One minimizing backward-induction step. Ties resolve to the lowest action
// index in the model's action order.
std::pair<ValueTable, StagePolicy> backup_min(const LayerGraph& g, const ValueTable& next);

// A solved policy realized on raw histories (x_0, a_0, x_1, ..., x_n): the
// accumulated weighted cost is folded along the history with the exact
// arithmetic the layer builder used, then the stage rule is looked up at
// (x_n, d, z). Histories that leave the reachable manifold (possible only for
// queries inconsistent with the solved model) fall back to the first feasible
// action; such queries are counted.
class HistoryPolicy {
public:
    HistoryPolicy() = default;
    HistoryPolicy(std::shared_ptr<const LayerGraph> graph, std::vector<StagePolicy> stages,
                  int horizon, bool stationary);

    ActionId action_at(std::span<const StateId> states, std::span<const ActionId> actions) const;

    const LayerGraph& layers() const { return *graph_; }
    const std::vector<StagePolicy>& stage_policies() const { return stages_; }
    int horizon() const { return horizon_; }
    bool stationary() const { return stationary_; }
    std::size_t off_manifold_queries() const { return off_manifold_; }

private:
    std::shared_ptr<const LayerGraph> graph_;
    std::vector<StagePolicy> stages_;
    int horizon_ = 0;
    bool stationary_ = false;
    mutable std::size_t off_manifold_ = 0;
};

ActionId realize_history_policy(const HistoryPolicy& pol, std::span<const StateId> states,
                                std::span<const ActionId> actions);

struct FiniteSolveResult {
    double value = 0.0;
    HistoryPolicy policy;
    std::vector<ValueTable> tables;  // one per layer when keep_tables is set
};

// Exact finite-horizon optimum by layered backward induction from the
// augmented root (x0, d0, 1). Horizon must be >= 1.
FiniteSolveResult solve_finite(const Mdp& m, const UtilitySpec& u, const DiscountSpec& disc,
                               StateId x0, int horizon, const SolveOptions& opts = {},
                               const Vec& d0 = {});

// Expected terminal utility of fixed stage rules (cost iteration). The
// utility may differ from the one the rules were computed under.
double evaluate_policy(const LayerGraph& g, const UtilitySpec& u,
                       std::span<const StagePolicy> stages);

struct ConvergenceCertificate {
    int iterations = 0;        // iterations until the stopping test fired
    double tolerance = 0.0;
    double lower = 0.0;        // lower envelope at the root, final refinement
    double upper = 0.0;        // upper envelope at the root, final refinement
    double gap = 0.0;          // upper - lower at the root
    double stop_gap = 0.0;     // frontier sup of the envelope gap when stopping fired
    double residual = 0.0;     // sup change of the lower-envelope pass in the refinement

    std::vector<double> lower_history;         // lower envelope at the root per iteration
    std::vector<double> upper_history;         // upper envelope at the root per iteration
    std::vector<double> useed_history;         // plain-utility seed at the root per iteration
    std::vector<double> frontier_gap_history;  // sup envelope gap per iteration
    std::vector<double> residual_history;      // from the second iteration on
};

struct InfiniteSolveResult {
    double value = 0.0;  // bracket midpoint
    ConvergenceCertificate certificate;
    HistoryPolicy policy;  // stationary rule, argmins of the lower-envelope pass
};

// Discounted infinite-horizon value via bracketing iteration: three terminal
// seeds (utility of the best-case tail, the plain utility, utility of the
// worst-case tail) are iterated on a lazily grown reachable set until the
// envelope gap drops below tol everywhere evaluated. Requires discounting on
// every objective and strictly positive declared cost lower bounds.
InfiniteSolveResult solve_infinite(const FiniteMdp& m, const UtilitySpec& u,
                                   const DiscountSpec& disc, StateId x0, double tol,
                                   const SolveOptions& opts = {});

}  // namespace morsdp
