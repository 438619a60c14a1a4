#include "morsdp/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "morsdp/errors.hpp"
#include "morsdp/parallel.hpp"

namespace morsdp {

namespace {

// Minimizing backup of one layer. `fixed` (when non-null) selects the action
// per node instead; it must be pre-validated as feasible.
void backup_layer(const LayerGraph& g, int k, const std::vector<double>& next_vals,
                  std::vector<double>& out, std::vector<ActionId>* argmin_out,
                  const std::vector<ActionId>* fixed) {
    const Layer& L = g.layer(k);
    out.resize(L.size());
    if (argmin_out) argmin_out->resize(L.size());
    parallel_for(L.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            const auto& acts = L.out[j];
            double best = std::numeric_limits<double>::infinity();
            ActionId best_a = -1;
            for (const auto& ae : acts) {
                if (fixed && ae.action != (*fixed)[j]) continue;
                double q = 0.0;
                for (const auto& [to, p] : ae.to)
                    q += p * next_vals[static_cast<std::size_t>(to)];
                if (q < best) {
                    best = q;
                    best_a = ae.action;
                }
            }
            out[j] = best;
            if (argmin_out) (*argmin_out)[j] = best_a;
        }
    });
}

// Terminal values, then backward to the root; returns values for layers
// 0..depth and optionally the argmin rules for layers 0..depth-1.
std::vector<std::vector<double>> backward_pass(
    const LayerGraph& g, int depth, const std::function<double(const Vec&, const Vec&)>& seed,
    std::vector<std::vector<ActionId>>* rules_out) {
    std::vector<std::vector<double>> vals(static_cast<std::size_t>(depth) + 1);
    const Layer& deepest = g.layer(depth);
    auto& terminal = vals[static_cast<std::size_t>(depth)];
    terminal.resize(deepest.size());
    parallel_for(deepest.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) terminal[j] = seed(deepest.d[j], deepest.z);
    });
    if (rules_out) rules_out->assign(static_cast<std::size_t>(depth), {});
    for (int k = depth - 1; k >= 0; --k)
        backup_layer(g, k, vals[static_cast<std::size_t>(k) + 1],
                     vals[static_cast<std::size_t>(k)],
                     rules_out ? &(*rules_out)[static_cast<std::size_t>(k)] : nullptr, nullptr);
    return vals;
}

void check_rule_feasible(const LayerGraph& g, const StagePolicy& rule) {
    const Layer& L = g.layer(rule.layer);
    if (rule.action.size() != L.size())
        throw ValidationError("stage rule size disagrees with its layer");
    for (std::size_t j = 0; j < L.size(); ++j) {
        const auto& feas = g.model().feasible(L.x[j]);
        if (!std::binary_search(feas.begin(), feas.end(), rule.action[j]))
            throw ValidationError("stage rule selects an infeasible action at layer " +
                                  std::to_string(rule.layer) + " node " + std::to_string(j));
    }
}

}  // namespace

ValueTable backup_policy(const LayerGraph& g, const ValueTable& next, const StagePolicy& rule) {
    if (next.layer < 1 || next.layer > g.depth())
        throw ValidationError("backup: next table layer out of range");
    if (rule.layer != next.layer - 1)
        throw ValidationError("backup: rule layer does not precede the table layer");
    check_rule_feasible(g, rule);
    ValueTable out;
    out.layer = next.layer - 1;
    out.stage = next.stage + 1;
    backup_layer(g, out.layer, next.values, out.values, nullptr, &rule.action);
    return out;
}

std::pair<ValueTable, StagePolicy> backup_min(const LayerGraph& g, const ValueTable& next) {
    if (next.layer < 1 || next.layer > g.depth())
        throw ValidationError("backup: next table layer out of range");
    ValueTable out;
    out.layer = next.layer - 1;
    out.stage = next.stage + 1;
    StagePolicy rule;
    rule.layer = out.layer;
    backup_layer(g, out.layer, next.values, out.values, &rule.action, nullptr);
    return {std::move(out), std::move(rule)};
}

HistoryPolicy::HistoryPolicy(std::shared_ptr<const LayerGraph> graph,
                             std::vector<StagePolicy> stages, int horizon, bool stationary)
    : graph_(std::move(graph)),
      stages_(std::move(stages)),
      horizon_(horizon),
      stationary_(stationary) {}

ActionId HistoryPolicy::action_at(std::span<const StateId> states,
                                  std::span<const ActionId> actions) const {
    if (!graph_) throw QueryError("policy query: empty policy");
    if (states.size() != actions.size() + 1)
        throw QueryError("policy query: history must contain one more state than actions");
    const int n = static_cast<int>(actions.size());
    if (!stationary_ && n >= horizon_)
        throw QueryError("policy query: history length " + std::to_string(n) +
                         " has no decision under horizon " + std::to_string(horizon_));
    const Mdp& m = graph_->model();
    const Layer& root = graph_->layer(0);
    if (states[0] != root.x[0])
        throw QueryError("policy query: history does not start at the solve root");

    Vec d = root.d[0];
    Vec z = root.z;
    for (int k = 0; k < n; ++k) {
        StateId x = states[static_cast<std::size_t>(k)];
        ActionId a = actions[static_cast<std::size_t>(k)];
        StateId xn = states[static_cast<std::size_t>(k) + 1];
        const auto& feas = m.feasible(x);
        if (!std::binary_search(feas.begin(), feas.end(), a))
            throw QueryError("policy query: infeasible action at step " + std::to_string(k));
        const Transition* hit = nullptr;
        for (const Transition& t : m.successors(x, a))
            if (t.next == xn) {
                hit = &t;
                break;
            }
        if (!hit || !(hit->prob > 0.0))
            throw QueryError("policy query: impossible transition at step " + std::to_string(k));
        d = fold_cost(d, z, hit->cost);
        z = advance_weight(z, graph_->discount());
    }

    StateId xn = states[static_cast<std::size_t>(n)];
    auto fallback = [&]() {
        ++off_manifold_;
        return m.feasible(xn).front();
    };
    if (n > graph_->depth() || n >= static_cast<int>(stages_.size())) return fallback();
    int idx = graph_->layer(n).find(xn, d);
    if (idx < 0) return fallback();
    return stages_[static_cast<std::size_t>(n)].action[static_cast<std::size_t>(idx)];
}

ActionId realize_history_policy(const HistoryPolicy& pol, std::span<const StateId> states,
                                std::span<const ActionId> actions) {
    return pol.action_at(states, actions);
}

FiniteSolveResult solve_finite(const Mdp& m, const UtilitySpec& u, const DiscountSpec& disc,
                               StateId x0, int horizon, const SolveOptions& opts, const Vec& d0) {
    if (horizon < 1) throw ValidationError("finite-horizon solve requires horizon >= 1");
    if (u.arity() != m.num_objectives())
        throw ValidationError("utility arity " + std::to_string(u.arity()) +
                              " does not match the " + std::to_string(m.num_objectives()) +
                              " cost objectives");
    if (disc.discounted() && static_cast<int>(disc.beta.size()) != m.num_objectives())
        throw ValidationError("discount arity does not match the cost objectives");

    auto graph = std::make_shared<LayerGraph>(m, disc, x0, d0);
    graph->extend_to(horizon, opts.state_budget);

    std::vector<std::vector<ActionId>> rules;
    auto vals = backward_pass(*graph, horizon,
                              [&u](const Vec& d, const Vec&) { return u.evaluate(d); }, &rules);

    FiniteSolveResult res;
    res.value = vals[0][0];
    std::vector<StagePolicy> stages(static_cast<std::size_t>(horizon));
    for (int k = 0; k < horizon; ++k) {
        stages[static_cast<std::size_t>(k)].layer = k;
        stages[static_cast<std::size_t>(k)].action = std::move(rules[static_cast<std::size_t>(k)]);
    }
    if (opts.keep_tables) {
        res.tables.reserve(static_cast<std::size_t>(horizon) + 1);
        for (int k = 0; k <= horizon; ++k)
            res.tables.push_back(
                ValueTable{k, horizon - k, std::move(vals[static_cast<std::size_t>(k)])});
    }
    res.policy = HistoryPolicy(std::move(graph), std::move(stages), horizon, false);
    return res;
}

double evaluate_policy(const LayerGraph& g, const UtilitySpec& u,
                       std::span<const StagePolicy> stages) {
    const int n = static_cast<int>(stages.size());
    if (n < 1 || n > g.depth()) throw ValidationError("policy evaluation: bad stage count");
    for (const StagePolicy& s : stages) check_rule_feasible(g, s);

    const Layer& deepest = g.layer(n);
    std::vector<double> vals(deepest.size());
    parallel_for(deepest.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) vals[j] = u.evaluate(deepest.d[j]);
    });
    std::vector<double> prev;
    for (int k = n - 1; k >= 0; --k) {
        prev.swap(vals);
        backup_layer(g, k, prev, vals, nullptr, &stages[static_cast<std::size_t>(k)].action);
    }
    return vals[0];
}

InfiniteSolveResult solve_infinite(const FiniteMdp& m, const UtilitySpec& u,
                                   const DiscountSpec& disc, StateId x0, double tol,
                                   const SolveOptions& opts) {
    if (!disc.discounted())
        throw ValidationError("infinite-horizon solve requires discount factors on every "
                              "objective");
    if (static_cast<int>(disc.beta.size()) != m.num_objectives())
        throw ValidationError("discount arity does not match the cost objectives");
    if (u.arity() != m.num_objectives())
        throw ValidationError("utility arity does not match the cost objectives");
    if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
    for (const CostDecl& c : m.cost_decls())
        if (!(c.lower > 0.0))
            throw ValidationError("infinite-horizon solve requires a strictly positive lower "
                                  "bound on cost '" + c.name +
                                  "' (zero-cost models are finite-horizon only)");

    const std::size_t iMax = static_cast<std::size_t>(m.num_objectives());
    Vec lo_tail(iMax), hi_tail(iMax);
    for (std::size_t i = 0; i < iMax; ++i) {
        lo_tail[i] = m.cost_decls()[i].lower / (1.0 - disc.beta[i]);
        hi_tail[i] = m.cost_decls()[i].upper / (1.0 - disc.beta[i]);
    }
    auto tail_seed = [&u, iMax](const Vec& tail) {
        return [&u, &tail, iMax](const Vec& d, const Vec& z) {
            Vec arg(iMax);
            for (std::size_t i = 0; i < iMax; ++i) arg[i] = z[i] * tail[i] + d[i];
            return u.evaluate(arg);
        };
    };
    auto seed_lo = tail_seed(lo_tail);
    auto seed_hi = tail_seed(hi_tail);
    auto seed_plain = [&u](const Vec& d, const Vec&) { return u.evaluate(d); };

    auto graph = std::make_shared<LayerGraph>(m, disc, x0, Vec{});
    ConvergenceCertificate cert;
    cert.tolerance = tol;

    std::vector<std::vector<double>> prev_lo;
    double prev_frontier_gap = std::numeric_limits<double>::infinity();
    int no_decrease_streak = 0;
    int stop_iter = -1;
    std::vector<std::vector<double>> lo_at_stop;
    double frontier_gap = std::numeric_limits<double>::infinity();

    for (int n = 1; n <= opts.max_iterations; ++n) {
        graph->extend_to(n, opts.state_budget);
        auto lo = backward_pass(*graph, n, seed_lo, nullptr);
        auto hi = backward_pass(*graph, n, seed_hi, nullptr);
        auto mid = backward_pass(*graph, n, seed_plain, nullptr);

        frontier_gap = 0.0;
        for (int k = 0; k <= n; ++k) {
            const auto& lk = lo[static_cast<std::size_t>(k)];
            const auto& hk = hi[static_cast<std::size_t>(k)];
            for (std::size_t j = 0; j < lk.size(); ++j)
                frontier_gap = std::max(frontier_gap, hk[j] - lk[j]);
        }
        cert.lower_history.push_back(lo[0][0]);
        cert.upper_history.push_back(hi[0][0]);
        cert.useed_history.push_back(mid[0][0]);
        cert.frontier_gap_history.push_back(frontier_gap);
        if (n >= 2) {
            double res = 0.0;
            for (std::size_t k = 0; k < prev_lo.size(); ++k)
                for (std::size_t j = 0; j < prev_lo[k].size(); ++j)
                    res = std::max(res, std::fabs(lo[k][j] - prev_lo[k][j]));
            cert.residual_history.push_back(res);
        }

        if (frontier_gap <= tol) {
            stop_iter = n;
            lo_at_stop = std::move(lo);
            break;
        }
        if (frontier_gap >= prev_frontier_gap) {
            if (++no_decrease_streak >= 3)
                throw NumericError(
                    "bracket gap failed to decrease for 3 consecutive iterations (gap " +
                    std::to_string(frontier_gap) + " at iteration " + std::to_string(n) +
                    "); the composed operator is not contracting on this instance");
        } else {
            no_decrease_streak = 0;
        }
        prev_frontier_gap = frontier_gap;
        prev_lo = std::move(lo);
    }
    if (stop_iter < 0)
        throw NumericError("no convergence within " + std::to_string(opts.max_iterations) +
                           " iterations (bracket gap " + std::to_string(frontier_gap) + ")");

    // One refinement pass past the stopping iteration: its change in the
    // lower envelope is a certified fixed-point residual (bounded by the
    // stopping gap), and its root values tighten the reported bracket.
    const int nf = stop_iter + 1;
    graph->extend_to(nf, opts.state_budget);
    std::vector<std::vector<ActionId>> rules;
    auto lo2 = backward_pass(*graph, nf, seed_lo, &rules);
    auto hi2 = backward_pass(*graph, nf, seed_hi, nullptr);
    auto mid2 = backward_pass(*graph, nf, seed_plain, nullptr);

    double residual = 0.0;
    for (std::size_t k = 0; k < lo_at_stop.size(); ++k)
        for (std::size_t j = 0; j < lo_at_stop[k].size(); ++j)
            residual = std::max(residual, std::fabs(lo2[k][j] - lo_at_stop[k][j]));

    double fg2 = 0.0;
    for (int k = 0; k <= nf; ++k) {
        const auto& lk = lo2[static_cast<std::size_t>(k)];
        const auto& hk = hi2[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < lk.size(); ++j) fg2 = std::max(fg2, hk[j] - lk[j]);
    }
    cert.lower_history.push_back(lo2[0][0]);
    cert.upper_history.push_back(hi2[0][0]);
    cert.useed_history.push_back(mid2[0][0]);
    cert.frontier_gap_history.push_back(fg2);
    cert.residual_history.push_back(residual);

    cert.iterations = stop_iter;
    cert.lower = lo2[0][0];
    cert.upper = hi2[0][0];
    cert.gap = cert.upper - cert.lower;
    cert.stop_gap = cert.frontier_gap_history[static_cast<std::size_t>(stop_iter) - 1];
    cert.residual = residual;

    std::vector<StagePolicy> stages(static_cast<std::size_t>(nf));
    for (int k = 0; k < nf; ++k) {
        stages[static_cast<std::size_t>(k)].layer = k;
        stages[static_cast<std::size_t>(k)].action = std::move(rules[static_cast<std::size_t>(k)]);
    }

    InfiniteSolveResult res;
    res.value = 0.5 * (cert.lower + cert.upper);
    res.certificate = std::move(cert);
    res.policy = HistoryPolicy(std::move(graph), std::move(stages), nf, true);
    return res;
}

}  // namespace morsdp
