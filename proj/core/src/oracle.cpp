#include "morsdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "morsdp/augment.hpp"
#include "morsdp/errors.hpp"

namespace morsdp {

namespace {

void bump_paths(std::size_t& paths, std::size_t budget) {
    if (++paths > budget)
        throw BudgetError("path budget exceeded: more than " + std::to_string(budget) +
                          " path atoms");
}

struct PomdpWalk {
    const PomdpModel& p;
    int horizon;
    std::size_t budget;
    bool keep_atoms;

    std::vector<NeumaierSum> per_term;
    NeumaierSum total_hat;
    NeumaierSum total_uniform;
    std::size_t paths = 0;
    std::vector<PathAtom> atoms;
    std::vector<int> state_prefix;
    std::vector<ActionId> action_prefix;
    std::vector<int> obs_prefix;

    PomdpWalk(const PomdpModel& model, int n, std::size_t b, bool keep)
        : p(model), horizon(n), budget(b), keep_atoms(keep),
          per_term(static_cast<std::size_t>(model.num_terms())) {}

    void leaf(double prob_hat, double prob, double rn, double cost_sum) {
        bump_paths(paths, budget);
        total_hat.add(prob_hat);
        total_uniform.add(prob);
        if (prob_hat != 0.0)
            for (int i = 0; i < p.num_terms(); ++i)
                per_term[static_cast<std::size_t>(i)].add(
                    prob_hat * std::exp(p.terms[static_cast<std::size_t>(i)].rate *
                                        (cost_sum + horizon * p.offset(i))));
        if (keep_atoms)
            atoms.push_back(
                PathAtom{state_prefix, action_prefix, obs_prefix, prob_hat, prob, rn, cost_sum});
    }

    // Transitions with zero probability carry no mass under either measure and
    // are skipped; zero-likelihood observations still carry reference-measure
    // mass and are walked with prob_hat = 0.
    void go(int s, int depth, double prob_hat, double prob, double rn, double cost_sum,
            const ObsPolicy::Node& node) {
        if (depth == horizon) {
            leaf(prob_hat, prob, rn, cost_sum);
            return;
        }
        const ActionId a = node.action;
        const double next_cost =
            cost_sum +
            p.stage_cost[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
        const int ny = p.num_observations();
        const double inv = 1.0 / ny;
        action_prefix.push_back(a);
        for (int sn = 0; sn < p.num_hidden(); ++sn) {
            const double pt = p.kernel[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)]
                                      [static_cast<std::size_t>(sn)];
            if (pt == 0.0) continue;
            state_prefix.push_back(sn);
            for (int y = 0; y < ny; ++y) {
                const double q =
                    p.signal[static_cast<std::size_t>(sn)][static_cast<std::size_t>(y)];
                const ObsPolicy::Node& child =
                    (depth + 1 < horizon) ? node.children[static_cast<std::size_t>(y)] : node;
                obs_prefix.push_back(y);
                go(sn, depth + 1, prob_hat * pt * q, prob * pt * inv, rn * ny * q, next_cost,
                   child);
                obs_prefix.pop_back();
            }
            state_prefix.pop_back();
        }
        action_prefix.pop_back();
    }
};

void check_policy_tree(const ObsPolicy& policy, const PomdpModel& p, int horizon);

void check_node(const ObsPolicy::Node& n, int remaining, int num_obs, int num_actions) {
    if (n.action < 0 || n.action >= num_actions)
        throw ValidationError("policy tree action out of range");
    if (remaining > 1) {
        if (static_cast<int>(n.children.size()) != num_obs)
            throw ValidationError("policy tree node must have one child per observation");
        for (const auto& c : n.children) check_node(c, remaining - 1, num_obs, num_actions);
    } else if (!n.children.empty()) {
        throw ValidationError("policy tree leaves must not have children");
    }
}

void check_policy_tree(const ObsPolicy& policy, const PomdpModel& p, int horizon) {
    if (policy.levels != horizon)
        throw ValidationError("policy tree depth does not match the horizon");
    check_node(policy.root, horizon, p.num_observations(), p.num_actions());
}

void check_theta0(const PomdpModel& p, const Vec& theta0) {
    if (static_cast<int>(theta0.size()) != p.num_hidden())
        throw ValidationError("initial distribution arity does not match the hidden-state count");
    double sum = 0.0;
    for (double v : theta0) {
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError("initial distribution has a negative or non-finite entry");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ValidationError("initial distribution does not sum to 1");
}

}  // namespace

PomdpOracleResult enumerate_pomdp(const PomdpModel& p, const Vec& theta0, const ObsPolicy& policy,
                                  int horizon, std::size_t atom_budget, bool keep_atoms) {
    p.validate();
    check_theta0(p, theta0);
    if (horizon < 1) throw ValidationError("horizon must be at least 1");
    check_policy_tree(policy, p, horizon);

    PomdpWalk walk(p, horizon, atom_budget, keep_atoms);
    for (int s0 = 0; s0 < p.num_hidden(); ++s0) {
        const double w = theta0[static_cast<std::size_t>(s0)];
        if (w == 0.0) continue;
        walk.state_prefix.push_back(s0);
        walk.go(s0, 0, w, w, 1.0, 0.0, policy.root);
        walk.state_prefix.pop_back();
    }

    PomdpOracleResult out;
    out.paths = walk.paths;
    out.total_prob_hat = walk.total_hat.value();
    out.total_prob = walk.total_uniform.value();
    out.atoms = std::move(walk.atoms);
    out.per_term.resize(static_cast<std::size_t>(p.num_terms()));
    NeumaierSum value;
    for (int i = 0; i < p.num_terms(); ++i) {
        out.per_term[static_cast<std::size_t>(i)] =
            walk.per_term[static_cast<std::size_t>(i)].value();
        const auto& t = p.terms[static_cast<std::size_t>(i)];
        value.add(t.weight * (t.rate > 0.0 ? 1.0 : -1.0) *
                  out.per_term[static_cast<std::size_t>(i)]);
    }
    out.value = value.value();
    return out;
}

namespace {

// Builds the tree for one assignment of actions to breadth-first node slots.
ObsPolicy tree_from_assignment(const std::vector<ActionId>& actions, int horizon, int num_obs) {
    ObsPolicy out;
    out.levels = horizon;

    // Node slots in breadth-first order; children of slot j at level k start
    // at the level offset of k+1 plus (j - offset_k) * num_obs.
    std::vector<std::size_t> level_offset(static_cast<std::size_t>(horizon) + 1);
    std::size_t count = 0, width = 1;
    for (int k = 0; k < horizon; ++k) {
        level_offset[static_cast<std::size_t>(k)] = count;
        count += width;
        width *= static_cast<std::size_t>(num_obs);
    }
    level_offset[static_cast<std::size_t>(horizon)] = count;

    struct Rec {
        const std::vector<ActionId>& acts;
        const std::vector<std::size_t>& offs;
        int horizon;
        int num_obs;

        ObsPolicy::Node build(int level, std::size_t slot) const {
            ObsPolicy::Node n;
            n.action = acts[slot];
            if (level + 1 < horizon) {
                const std::size_t base =
                    offs[static_cast<std::size_t>(level) + 1] +
                    (slot - offs[static_cast<std::size_t>(level)]) *
                        static_cast<std::size_t>(num_obs);
                n.children.reserve(static_cast<std::size_t>(num_obs));
                for (int y = 0; y < num_obs; ++y)
                    n.children.push_back(build(level + 1, base + static_cast<std::size_t>(y)));
            }
            return n;
        }
    };
    out.root = Rec{actions, level_offset, horizon, num_obs}.build(0, 0);
    return out;
}

}  // namespace

PomdpSearchResult enumerate_pomdp_policies(const PomdpModel& p, const Vec& theta0, int horizon,
                                           std::size_t atom_budget) {
    p.validate();
    check_theta0(p, theta0);
    if (horizon < 1) throw ValidationError("horizon must be at least 1");

    std::size_t nodes = 0, width = 1;
    for (int k = 0; k < horizon; ++k) {
        nodes += width;
        width *= static_cast<std::size_t>(p.num_observations());
        if (nodes > 1'000'000)
            throw BudgetError("path budget exceeded: the observation tree alone needs more than "
                              "1000000 slots");
    }

    std::vector<ActionId> assignment(nodes, 0);
    PomdpSearchResult out;
    std::size_t remaining = atom_budget;
    bool first = true;

    for (;;) {
        ObsPolicy tree = tree_from_assignment(assignment, horizon, p.num_observations());
        PomdpOracleResult r = enumerate_pomdp(p, theta0, tree, horizon, remaining, false);
        remaining -= r.paths;
        out.paths += r.paths;
        ++out.policies;
        if (first || r.value < out.best_value) {
            out.best_value = r.value;
            out.best_policy = std::move(tree);
            first = false;
        }

        // Odometer over breadth-first slots, last slot fastest.
        std::size_t j = nodes;
        while (j > 0) {
            --j;
            if (++assignment[j] < p.num_actions()) break;
            assignment[j] = 0;
            if (j == 0) return out;
        }
    }
}

namespace {

// Decision node of the exact-fold layered graph (Markov class) or of the
// full history tree (History class). Edges are resolved child indices in the
// next layer, grouped per feasible action.
struct OracleNode {
    StateId x;
    Vec d;
    std::vector<std::vector<std::pair<int, double>>> edges;  // [feasible slot] -> (child, prob)
};

struct OracleLayers {
    std::vector<std::vector<OracleNode>> level;
    std::vector<Vec> z;  // weight per level (empty vectors when undiscounted)
};

OracleLayers build_layers(const Mdp& m, const DiscountSpec& disc, StateId x0, int horizon,
                          const Vec& d0, PolicyClass cls, std::size_t node_budget) {
    OracleLayers out;
    out.level.resize(static_cast<std::size_t>(horizon) + 1);
    out.z.resize(static_cast<std::size_t>(horizon) + 1);

    Vec z;
    if (disc.discounted()) z.assign(disc.beta.size(), 1.0);
    out.z[0] = z;

    Vec root_d = d0;
    if (root_d.empty()) root_d.assign(static_cast<std::size_t>(m.num_objectives()), 0.0);
    out.level[0].push_back(OracleNode{x0, root_d, {}});

    std::size_t total = 1;
    for (int k = 0; k < horizon; ++k) {
        auto& cur = out.level[static_cast<std::size_t>(k)];
        auto& nxt = out.level[static_cast<std::size_t>(k) + 1];
        std::map<std::pair<StateId, Vec>, int> dedup;

        for (auto& node : cur) {
            const auto& acts = m.feasible(node.x);
            node.edges.resize(acts.size());
            for (std::size_t ai = 0; ai < acts.size(); ++ai) {
                for (const Transition& t : m.successors(node.x, acts[ai])) {
                    Vec dn = fold_cost(node.d, out.z[static_cast<std::size_t>(k)], t.cost);
                    int child;
                    if (cls == PolicyClass::Markov) {
                        auto key = std::make_pair(t.next, dn);
                        auto it = dedup.find(key);
                        if (it != dedup.end()) {
                            child = it->second;
                        } else {
                            child = static_cast<int>(nxt.size());
                            dedup.emplace(std::move(key), child);
                            nxt.push_back(OracleNode{t.next, std::move(dn), {}});
                            ++total;
                        }
                    } else {
                        child = static_cast<int>(nxt.size());
                        nxt.push_back(OracleNode{t.next, std::move(dn), {}});
                        ++total;
                    }
                    if (total > node_budget)
                        throw BudgetError("reachable-state budget exceeded: more than " +
                                          std::to_string(node_budget) +
                                          " decision nodes at depth " + std::to_string(k + 1));
                    node.edges[ai].emplace_back(child, t.prob);
                }
            }
        }
        if (disc.discounted()) z = advance_weight(z, disc);
        out.z[static_cast<std::size_t>(k) + 1] = z;
    }
    return out;
}

struct MdpWalk {
    const OracleLayers& layers;
    const UtilitySpec& u;
    const std::vector<std::vector<ActionId>>& choice;  // [level][node] -> feasible slot
    std::size_t budget;

    NeumaierSum acc;
    std::size_t paths = 0;

    void go(int level, int node, double prob) {
        const auto& nd =
            layers.level[static_cast<std::size_t>(level)][static_cast<std::size_t>(node)];
        if (nd.edges.empty()) {
            bump_paths(paths, budget);
            acc.add(prob * u.evaluate(nd.d));
            return;
        }
        const auto slot = static_cast<std::size_t>(
            choice[static_cast<std::size_t>(level)][static_cast<std::size_t>(node)]);
        for (const auto& [child, p] : nd.edges[slot]) go(level + 1, child, prob * p);
    }
};

}  // namespace

MdpSearchResult enumerate_mdp_policies(const Mdp& m, const UtilitySpec& u,
                                       const DiscountSpec& disc, StateId x0, int horizon,
                                       PolicyClass cls, std::size_t atom_budget, const Vec& d0) {
    if (horizon < 1) throw ValidationError("horizon must be at least 1");
    if (u.arity() != m.num_objectives())
        throw ValidationError("utility arity does not match the objective count");
    if (disc.discounted() && static_cast<int>(disc.beta.size()) != m.num_objectives())
        throw ValidationError("discount arity does not match the objective count");

    OracleLayers layers = build_layers(m, disc, x0, horizon, d0, cls, atom_budget);

    // Flat odometer over every decision node of levels 0..horizon-1, in
    // (level, node) order with the last node moving fastest.
    struct Slot {
        int level;
        int node;
        int arity;
    };
    std::vector<Slot> slots;
    for (int k = 0; k < horizon; ++k)
        for (std::size_t j = 0; j < layers.level[static_cast<std::size_t>(k)].size(); ++j) {
            const auto& nd = layers.level[static_cast<std::size_t>(k)][j];
            slots.push_back(Slot{k, static_cast<int>(j), static_cast<int>(nd.edges.size())});
        }

    std::vector<std::vector<ActionId>> choice(static_cast<std::size_t>(horizon) + 1);
    for (int k = 0; k <= horizon; ++k)
        choice[static_cast<std::size_t>(k)]
            .assign(layers.level[static_cast<std::size_t>(k)].size(), 0);

    MdpSearchResult out;
    std::size_t remaining = atom_budget;
    bool first = true;

    for (;;) {
        MdpWalk walk{layers, u, choice, remaining, {}, 0};
        walk.go(0, 0, 1.0);
        remaining -= walk.paths;
        out.paths += walk.paths;
        ++out.policies;
        const double v = walk.acc.value();
        if (first || v < out.best_value) {
            out.best_value = v;
            first = false;
        }

        std::size_t j = slots.size();
        for (;;) {
            if (j == 0) return out;
            --j;
            const Slot& s = slots[j];
            auto& c = choice[static_cast<std::size_t>(s.level)][static_cast<std::size_t>(s.node)];
            if (++c < s.arity) break;
            c = 0;
        }
    }
}

}  // namespace morsdp
