#pragma once

#include <string>
#include <vector>

#include "morsdp/bellman.hpp"
#include "morsdp/oracle.hpp"
#include "morsdp/pomdp.hpp"

namespace morsdp {

// Serialization of solver results. All output is deterministic: fixed key
// order, entries in layer/node order, numbers printed shortest-round-trip.

// {value, policy: [{stage, entries: [[x, d, z, action], ...]}, ...]}
std::string finite_result_json(const Mdp& m, const FiniteSolveResult& r);

// {value, bracket: [lo, hi], iterations, policy: ..., certificate: {...}}
std::string infinite_result_json(const Mdp& m, const InfiniteSolveResult& r);

// {value, policy: decision tree keyed by observation label, pruned_mass,
//  shift_offset, info_states}
std::string rspomdp_result_json(const PomdpModel& p, const RspomdpResult& r);

// {value, class, policies, atoms}
std::string mdp_oracle_json(const MdpSearchResult& r, PolicyClass cls);

// {value, policy: decision tree, policies, atoms}
std::string pomdp_oracle_json(const PomdpModel& p, const PomdpSearchResult& r);

// {mu, horizon, grid, value, analytic}
std::string bandit_result_json(double mu, int horizon, int grid, double value, double analytic);

// {ok: true, kind}
std::string validate_result_json(const std::string& kind);

// One row per augmented node: layer, stage (steps to go), state label, cost
// coordinates, weight coordinates, value, chosen action (blank on the
// terminal layer). Fields are quoted where needed (RFC 4180).
std::string value_table_csv(const Mdp& m, const HistoryPolicy& policy,
                            const std::vector<ValueTable>& tables);

// Iteration trace of the bracketing solve, one row per iteration including
// the final refinement pass. The residual column is blank on the first row
// (it compares consecutive passes).
std::string certificate_csv(const ConvergenceCertificate& c);

// Two columns: layer index and node count.
std::string layer_sizes_csv(const LayerGraph& g);
std::string layer_sizes_csv(const std::vector<std::size_t>& sizes);

}  // namespace morsdp
