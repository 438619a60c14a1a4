#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

#include "morsdp/model.hpp"
#include "morsdp/types.hpp"

namespace morsdp {

// State of the cost-augmented chain: base state, accumulated (weighted) cost
// per objective, and the running discount weight per objective. An empty z
// means the undiscounted case (weight identically 1).
struct AugmentedState {
    StateId x;
    Vec d;
    Vec z;
};

// One-step cost fold shared by the layer builder and history-policy queries,
// so both produce bit-identical accumulated costs for the same history.
inline Vec fold_cost(const Vec& d, const Vec& z, const Vec& cost) {
    Vec out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        out[i] = d[i] + (z.empty() ? cost[i] : z[i] * cost[i]);
    return out;
}

inline Vec advance_weight(const Vec& z, const DiscountSpec& disc) {
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * disc.beta[i];
    return out;
}

// Successor distribution of one augmented state under one action.
std::vector<std::pair<AugmentedState, double>> augment_successors(const Mdp& m,
                                                                  const DiscountSpec& disc,
                                                                  const AugmentedState& s,
                                                                  ActionId a);

// Quantization key for deduplicating accumulated-cost vectors at 1e-12
// relative resolution (binary mantissa rounded to 41 bits). Exact duplicates
// always collide; values further apart than ~2e-12 relative never do.
std::vector<std::int64_t> quantize_key(StateId x, const Vec& d);

struct KeyHash {
    std::size_t operator()(const std::vector<std::int64_t>& k) const;
};

// One depth level of the reachable augmented graph. All nodes in a layer
// share the discount weight (z = z0 * beta^depth). Outgoing edges are
// resolved to node indices in the next layer; the deepest layer has none.
struct Layer {
    Vec z;
    std::vector<StateId> x;
    std::vector<Vec> d;

    struct ActionEdges {
        ActionId action;
        std::vector<std::pair<int, double>> to;  // (next-layer node index, probability)
    };
    std::vector<std::vector<ActionEdges>> out;

    std::unordered_map<std::vector<std::int64_t>, int, KeyHash> index;

    std::size_t size() const { return x.size(); }
    int find(StateId xs, const Vec& ds) const;  // -1 when absent
};

// Layered exact enumeration of the reachable augmented states from a root,
// deduplicated per layer. Deterministic: expansion follows node order, the
// model's feasible-action order and successor order, so two runs over the
// same model produce identical layers.
class LayerGraph {
public:
    LayerGraph(const Mdp& m, DiscountSpec disc, StateId x0, Vec d0);

    // Expands layers until `depth + 1` of them exist. Throws BudgetError when
    // the total node count would exceed state_budget.
    void extend_to(int depth, std::size_t state_budget);

    const Mdp& model() const { return *model_; }
    const DiscountSpec& discount() const { return disc_; }
    int depth() const { return static_cast<int>(layers_.size()) - 1; }
    const Layer& layer(int k) const { return layers_[static_cast<std::size_t>(k)]; }
    std::size_t total_states() const { return total_states_; }

private:
    const Mdp* model_;
    DiscountSpec disc_;
    std::vector<Layer> layers_;
    std::size_t total_states_ = 0;
};

// Convenience wrapper: the full layered reachable set for a fixed horizon.
LayerGraph reachable_layers(const Mdp& m, const DiscountSpec& disc, StateId x0, const Vec& d0,
                            int horizon, std::size_t state_budget);

}  // namespace morsdp
