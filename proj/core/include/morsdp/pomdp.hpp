#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "morsdp/augment.hpp"
#include "morsdp/model.hpp"
#include "morsdp/types.hpp"
#include "morsdp/utility.hpp"

namespace morsdp {

// Partially observed model with one shared stage cost and a multi-term
// exponential objective. kernel[a][s] is the hidden-state row, signal[s] the
// observation row of the successor state, stage_cost[s][a] the cost charged
// when action a is taken in hidden state s.
struct PomdpModel {
    std::vector<std::string> hidden;
    std::vector<std::string> observations;
    std::vector<std::string> actions;
    std::vector<std::vector<Vec>> kernel;
    std::vector<Vec> signal;
    std::vector<Vec> stage_cost;
    std::vector<ExpTerm> terms;

    // Per-term additive shift applied to the stage cost when the
    // exponentiated matrices are built (empty = no shift). A single shared
    // stage cost cannot carry per-objective shifts, so they live here.
    Vec cost_offset;

    int num_hidden() const { return static_cast<int>(hidden.size()); }
    int num_observations() const { return static_cast<int>(observations.size()); }
    int num_actions() const { return static_cast<int>(actions.size()); }
    int num_terms() const { return static_cast<int>(terms.size()); }
    double offset(int term) const {
        return cost_offset.empty() ? 0.0 : cost_offset[static_cast<std::size_t>(term)];
    }

    void validate() const;
};

// Exponentiated-cost transition matrices: for term i, action a, observation
// y, the matrix entry at (s_next, s_cur) is
//   exp(rate_i * (cost(s_cur, a) + offset_i)) * kernel(s_next | s_cur; a)
//     * signal(y | s_next).
// Entries are stored with the per-(i, a) maximum of rate*(cost+offset)
// factored out so the stabilized values never exceed the kernel mass.
class ExpMatrixSet {
public:
    const std::vector<double>& scaled(int i, int a, int y) const;  // row-major [s_next][s_cur]
    double log_factor(int i, int a) const;
    double entry(int i, int a, int y, int s_next, int s_cur) const;

    int num_hidden() const { return nS_; }
    int num_observations() const { return nY_; }

private:
    friend ExpMatrixSet build_matrices(const PomdpModel& p);

    int nI_ = 0, nA_ = 0, nY_ = 0, nS_ = 0;
    std::vector<std::vector<double>> mats_;  // [(i*nA + a)*nY + y]
    std::vector<double> log_factors_;        // [i*nA + a]
};

ExpMatrixSet build_matrices(const PomdpModel& p);

// One conditioning step of the exponentially tilted filter for term i:
// next_theta is the normalized update, gcost the per-step certainty
// equivalent (1/rate) * log of the unnormalized mass. Throws DomainError
// when the observation has zero likelihood under theta.
struct BayesStep {
    Vec next_theta;
    double gcost;
    double scaled_mass;  // unnormalized mass with the log factor removed
};

BayesStep bayes_step(const PomdpModel& p, const ExpMatrixSet& mats, const Vec& theta, int term,
                     int action, int obs);

// State of the reduced fully observed problem: one tilted filter per term
// plus the last observation.
struct InformationState {
    std::vector<Vec> theta;
    int y = 0;
};

// Successors of an information state under one action: one kept branch per
// observation with positive likelihood, each with probability 1/|Y| and the
// per-term information costs; zero-likelihood observations are pruned and
// their reference-measure mass reported.
struct InfoStep {
    struct Succ {
        InformationState state;
        double prob;
        Vec cost;
    };
    std::vector<Succ> kept;
    double pruned_mass = 0.0;
};

InfoStep info_successors(const InformationState& s, ActionId a, const PomdpModel& p,
                         const ExpMatrixSet& mats);

// The reduced model as an Mdp: information states are hash-consed integer
// handles (filters quantized at 1e-10 per component), discovered lazily by
// successors(). Discovery mutates internal tables and must run single
// threaded; afterwards, queries on discovered pairs are read-only and safe
// from any thread. References returned by successors() stay valid across
// later discovery.
class InformationMdp final : public Mdp {
public:
    InformationMdp(PomdpModel p, Vec theta0, int y0 = 0);

    int num_objectives() const override { return model_.num_terms(); }
    int num_actions() const override { return model_.num_actions(); }
    const std::vector<ActionId>& feasible(StateId x) const override;
    const std::vector<Transition>& successors(StateId x, ActionId a) const override;
    std::string state_label(StateId x) const override;
    std::string action_label(ActionId a) const override;
    bool mass_conserving() const override { return !any_pruned_; }

    const PomdpModel& pomdp() const { return model_; }
    const ExpMatrixSet& matrices() const { return mats_; }
    int num_states() const { return static_cast<int>(states_.size()); }
    const InformationState& info(StateId x) const;
    double pruned_mass(StateId x, ActionId a) const;  // 0 when not yet discovered
    double total_pruned_mass() const { return total_pruned_; }

private:
    struct Row {
        std::vector<Transition> succ;
        double pruned = 0.0;
        bool computed = false;
    };

    StateId intern(InformationState s) const;

    PomdpModel model_;
    ExpMatrixSet mats_;
    std::vector<ActionId> all_actions_;
    mutable std::vector<InformationState> states_;
    mutable std::vector<std::vector<std::unique_ptr<Row>>> rows_;
    mutable std::unordered_map<std::vector<std::int64_t>, StateId, KeyHash> index_;
    mutable double total_pruned_ = 0.0;
    mutable bool any_pruned_ = false;
};

// Cost shift making every reachable information cost strictly positive:
// offset_i = 2*|m_i| where m_i is the infimum of the information cost of
// term i over the successors reachable from theta0 within `horizon` steps
// (exact scan; pruned branches excluded). Weights are rescaled by
// exp(-horizon * rate_i * offset_i), which cancels exactly at the stated
// horizon. No-op for terms with m_i > 0.
struct ShiftResult {
    PomdpModel model;
    Vec infimum;
    Vec offset;
};

ShiftResult shift_costs(const PomdpModel& p, int horizon, const Vec& theta0);

// Deterministic action tree over observation histories: level k (root =
// level 0) holds the action taken at time k after observing y_1..y_k.
struct ObsPolicy {
    struct Node {
        ActionId action = 0;
        std::vector<Node> children;
    };
    Node root;
    int levels = 0;

    static ObsPolicy constant(int horizon, int num_obs, ActionId a);
};

// Per-term expectations E[exp(rate_i * sum of information costs)] under the
// uniform observation chain for a fixed observation-tree policy, by exact
// enumeration of observation paths through the filter recursion.
struct InfoChainResult {
    Vec per_term;
    double value;
    double pruned_mass;
};

InfoChainResult info_chain_expectations(const PomdpModel& p, const Vec& theta0,
                                        const ObsPolicy& policy, int horizon);

struct RspomdpResult {
    double value = 0.0;
    ObsPolicy policy;
    double pruned_mass = 0.0;   // reference-measure mass pruned during expansion
    Vec shift_offset;           // applied per-term cost shift (empty when unshifted)
    int info_states = 0;        // discovered information states
    std::vector<std::size_t> layer_sizes;  // augmented-layer node counts, depth 0..horizon
};

struct SolveOptions;

// Exact horizon-N optimum of the partially observed risk objective via the
// information-state reduction plus layered backward induction, with the
// optimal policy realized as an observation tree.
RspomdpResult solve_rspomdp(const PomdpModel& p, const Vec& theta0, int horizon,
                            const SolveOptions& opts);
RspomdpResult solve_rspomdp(const PomdpModel& p, const Vec& theta0, int horizon);

}  // namespace morsdp
