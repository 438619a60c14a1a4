#include "morsdp/augment.hpp"

#include <cmath>

#include "morsdp/errors.hpp"

namespace morsdp {

std::vector<std::pair<AugmentedState, double>> augment_successors(const Mdp& m,
                                                                  const DiscountSpec& disc,
                                                                  const AugmentedState& s,
                                                                  ActionId a) {
    std::vector<std::pair<AugmentedState, double>> out;
    const auto& row = m.successors(s.x, a);
    out.reserve(row.size());
    Vec z_next = advance_weight(s.z, disc);
    for (const Transition& t : row) {
        AugmentedState nxt;
        nxt.x = t.next;
        nxt.d = fold_cost(s.d, s.z, t.cost);
        nxt.z = z_next;
        out.emplace_back(std::move(nxt), t.prob);
    }
    return out;
}

std::vector<std::int64_t> quantize_key(StateId x, const Vec& d) {
    std::vector<std::int64_t> key;
    key.reserve(1 + d.size());
    key.push_back(x);
    for (double v : d) {
        if (v == 0.0) {
            key.push_back(0);
            continue;
        }
        int e = 0;
        double m = std::frexp(v, &e);  // |m| in [0.5, 1)
        // 41-bit mantissa (~4.5e-13 relative step) plus the binary exponent,
        // packed into one word.
        auto mant = static_cast<std::int64_t>(std::llround(m * 2199023255552.0));  // 2^41
        key.push_back(mant * 4096 + (e + 2048));
    }
    return key;
}

std::size_t KeyHash::operator()(const std::vector<std::int64_t>& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t w : k) {
        h ^= static_cast<std::uint64_t>(w);
        h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
}

int Layer::find(StateId xs, const Vec& ds) const {
    auto it = index.find(quantize_key(xs, ds));
    return it == index.end() ? -1 : it->second;
}

LayerGraph::LayerGraph(const Mdp& m, DiscountSpec disc, StateId x0, Vec d0)
    : model_(&m), disc_(std::move(disc)) {
    if (d0.empty()) d0.assign(static_cast<std::size_t>(m.num_objectives()), 0.0);
    if (static_cast<int>(d0.size()) != m.num_objectives())
        throw ValidationError("layer root: initial cost offset arity mismatch");
    Layer root;
    if (disc_.discounted()) root.z.assign(disc_.beta.size(), 1.0);
    root.x.push_back(x0);
    root.index.emplace(quantize_key(x0, d0), 0);
    root.d.push_back(std::move(d0));
    layers_.push_back(std::move(root));
    total_states_ = 1;
}

void LayerGraph::extend_to(int depth, std::size_t state_budget) {
    while (this->depth() < depth) {
        Layer& cur = layers_.back();
        Layer next;
        next.z = advance_weight(cur.z, disc_);

        cur.out.resize(cur.size());
        for (std::size_t j = 0; j < cur.size(); ++j) {
            AugmentedState src{cur.x[j], cur.d[j], cur.z};
            const auto& feas = model_->feasible(src.x);
            auto& per_action = cur.out[j];
            per_action.reserve(feas.size());
            for (ActionId a : feas) {
                Layer::ActionEdges edges;
                edges.action = a;
                auto succ = augment_successors(*model_, disc_, src, a);
                edges.to.reserve(succ.size());
                for (auto& [ns, p] : succ) {
                    auto key = quantize_key(ns.x, ns.d);
                    auto it = next.index.find(key);
                    int target;
                    if (it == next.index.end()) {
                        target = static_cast<int>(next.size());
                        if (++total_states_ > state_budget)
                            throw BudgetError(
                                "reachable-state budget exceeded: more than " +
                                std::to_string(state_budget) +
                                " augmented states at depth " +
                                std::to_string(layers_.size()));
                        next.index.emplace(std::move(key), target);
                        next.x.push_back(ns.x);
                        next.d.push_back(std::move(ns.d));
                    } else {
                        target = it->second;
                    }
                    edges.to.emplace_back(target, p);
                }
                per_action.push_back(std::move(edges));
            }
        }
        layers_.push_back(std::move(next));
    }
}

LayerGraph reachable_layers(const Mdp& m, const DiscountSpec& disc, StateId x0, const Vec& d0,
                            int horizon, std::size_t state_budget) {
    if (horizon < 0) throw ValidationError("horizon must be non-negative");
    LayerGraph g(m, disc, x0, d0);
    g.extend_to(horizon, state_budget);
    return g;
}

}  // namespace morsdp
