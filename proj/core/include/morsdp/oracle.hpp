#pragma once

#include <cstddef>
#include <vector>

#include "morsdp/bellman.hpp"
#include "morsdp/model.hpp"
#include "morsdp/pomdp.hpp"
#include "morsdp/utility.hpp"

namespace morsdp {

// Brute-force reference evaluators. These deliberately share no machinery
// with the solvers beyond the one-step cost fold: values come from explicit
// path sums in a fixed lexicographic order with compensated accumulation, so
// they are slow, exact per path, and bit-reproducible.

// One terminal path contribution: the full hidden trajectory with its
// observations, the path probability under the true signal kernel, the path
// probability when observations are instead drawn uniformly, the likelihood
// ratio tying the two together, and the raw accumulated stage cost.
struct PathAtom {
    std::vector<int> states;        // s_0 .. s_N
    std::vector<ActionId> actions;  // a_0 .. a_{N-1}
    std::vector<int> obs;           // y_1 .. y_N
    double prob_hat;  // theta0(s_0) * prod of P(s_{k+1}|s_k;a_k) * Q(y_{k+1}|s_{k+1})
    double prob;      // same product with every signal factor replaced by 1/|Y|
    double rn;        // prod of |Y| * Q(y_{k+1}|s_{k+1}); prob_hat == prob * rn
    double cost;      // sum of stage costs, before any per-objective offset
};

struct PomdpOracleResult {
    double value = 0.0;
    Vec per_term;  // E[exp(rate_i * (cost sum + horizon * offset_i))] under the true signals
    double total_prob_hat = 0.0;  // leaf mass under the true signal kernel; 1 up to rounding
    double total_prob = 0.0;      // leaf mass under uniform observations; 1 up to rounding
    std::size_t paths = 0;
    std::vector<PathAtom> atoms;  // populated only when keep_atoms is set
};

// Expected objective of a fixed observation tree by enumerating every hidden
// path (s_0, s_1, y_1, ..., s_N, y_N) under the physical measure. Works on
// the raw model data only; the exponentiated matrices are never formed.
PomdpOracleResult enumerate_pomdp(const PomdpModel& p, const Vec& theta0, const ObsPolicy& policy,
                                  int horizon, std::size_t atom_budget = 10'000'000,
                                  bool keep_atoms = false);

struct PomdpSearchResult {
    double best_value = 0.0;
    ObsPolicy best_policy;
    std::size_t policies = 0;
    std::size_t paths = 0;
};

// Exhaustive minimum over all observation-tree policies. Trees are indexed
// by assigning actions to nodes in breadth-first order, the last node moving
// fastest; ties keep the earliest tree.
PomdpSearchResult enumerate_pomdp_policies(const PomdpModel& p, const Vec& theta0, int horizon,
                                           std::size_t atom_budget = 10'000'000);

enum class PolicyClass {
    Markov,   // one action per (depth, base state, accumulated cost) node
    History,  // one action per state-action history prefix
};

struct MdpSearchResult {
    double best_value = 0.0;
    std::size_t policies = 0;
    std::size_t paths = 0;
};

// Exhaustive minimum over deterministic policies of the given class for the
// augmented finite-horizon problem. The Markov class deduplicates decision
// nodes by exact accumulated cost (no quantization, own bookkeeping); the
// History class assigns an action to every node of the full history tree.
MdpSearchResult enumerate_mdp_policies(const Mdp& m, const UtilitySpec& u,
                                       const DiscountSpec& disc, StateId x0, int horizon,
                                       PolicyClass cls, std::size_t atom_budget = 10'000'000,
                                       const Vec& d0 = {});

}  // namespace morsdp
