#include "morsdp/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_set>
#include <utility>

#include "morsdp/bellman.hpp"
#include "morsdp/errors.hpp"

namespace morsdp {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kThetaSumTol = 1e-9;
constexpr double kThetaQuantum = 1e10;  // reciprocal of the interning resolution

void check_stochastic_row(const Vec& row, std::size_t want, const char* what, int which) {
    if (row.size() != want)
        throw ValidationError(std::string(what) + " row " + std::to_string(which) +
                              " has the wrong arity");
    double sum = 0.0;
    for (double v : row) {
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError(std::string(what) + " row " + std::to_string(which) +
                                  " has a negative or non-finite entry");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > kRowSumTol)
        throw ValidationError(std::string(what) + " row " + std::to_string(which) +
                              " does not sum to 1");
}

void check_labels(const std::vector<std::string>& labels, const char* what) {
    if (labels.empty()) throw ValidationError(std::string(what) + " set is empty");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels) {
        if (l.empty()) throw ValidationError(std::string(what) + " label is empty");
        if (!seen.insert(l).second)
            throw ValidationError("duplicate " + std::string(what) + " label: " + l);
    }
}

void check_theta(const PomdpModel& p, const Vec& theta) {
    if (static_cast<int>(theta.size()) != p.num_hidden())
        throw ValidationError("initial distribution arity does not match the hidden-state count");
    double sum = 0.0;
    for (double v : theta) {
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError("initial distribution has a negative or non-finite entry");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > kThetaSumTol)
        throw ValidationError("initial distribution does not sum to 1");
}

std::string format_compact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

void PomdpModel::validate() const {
    check_labels(hidden, "hidden state");
    check_labels(observations, "observation");
    check_labels(actions, "action");

    const auto nS = hidden.size();
    const auto nY = observations.size();
    const auto nA = actions.size();

    if (kernel.size() != nA) throw ValidationError("kernel must have one block per action");
    for (std::size_t a = 0; a < nA; ++a) {
        if (kernel[a].size() != nS)
            throw ValidationError("kernel block for action " + actions[a] +
                                  " has the wrong number of rows");
        for (std::size_t s = 0; s < nS; ++s)
            check_stochastic_row(kernel[a][s], nS, "kernel", static_cast<int>(s));
    }

    if (signal.size() != nS) throw ValidationError("signal must have one row per hidden state");
    for (std::size_t s = 0; s < nS; ++s)
        check_stochastic_row(signal[s], nY, "signal", static_cast<int>(s));

    if (stage_cost.size() != nS)
        throw ValidationError("stage cost must have one row per hidden state");
    for (std::size_t s = 0; s < nS; ++s) {
        if (stage_cost[s].size() != nA)
            throw ValidationError("stage cost row " + std::to_string(s) +
                                  " must have one entry per action");
        for (double c : stage_cost[s])
            if (!std::isfinite(c))
                throw ValidationError("stage cost row " + std::to_string(s) +
                                      " has a non-finite entry");
    }

    if (terms.empty()) throw ValidationError("objective needs at least one term");
    for (const auto& t : terms) {
        if (!(t.weight > 0.0) || !std::isfinite(t.weight))
            throw ValidationError("term weights must be positive and finite");
        if (t.rate == 0.0 || !std::isfinite(t.rate))
            throw ValidationError("term rates must be non-zero and finite");
    }

    if (!cost_offset.empty()) {
        if (cost_offset.size() != terms.size())
            throw ValidationError("cost offset arity does not match the term count");
        for (double v : cost_offset)
            if (!std::isfinite(v)) throw ValidationError("cost offset has a non-finite entry");
    }
}

const std::vector<double>& ExpMatrixSet::scaled(int i, int a, int y) const {
    return mats_[static_cast<std::size_t>((i * nA_ + a) * nY_ + y)];
}

double ExpMatrixSet::log_factor(int i, int a) const {
    return log_factors_[static_cast<std::size_t>(i * nA_ + a)];
}

double ExpMatrixSet::entry(int i, int a, int y, int s_next, int s_cur) const {
    return std::exp(log_factor(i, a)) * scaled(i, a, y)[static_cast<std::size_t>(s_next * nS_ + s_cur)];
}

ExpMatrixSet build_matrices(const PomdpModel& p) {
    ExpMatrixSet out;
    out.nI_ = p.num_terms();
    out.nA_ = p.num_actions();
    out.nY_ = p.num_observations();
    out.nS_ = p.num_hidden();

    out.log_factors_.resize(static_cast<std::size_t>(out.nI_ * out.nA_));
    out.mats_.resize(static_cast<std::size_t>(out.nI_ * out.nA_ * out.nY_));

    for (int i = 0; i < out.nI_; ++i) {
        const double rate = p.terms[static_cast<std::size_t>(i)].rate;
        const double delta = p.offset(i);
        for (int a = 0; a < out.nA_; ++a) {
            double k = -std::numeric_limits<double>::infinity();
            for (int s = 0; s < out.nS_; ++s)
                k = std::max(k, rate * (p.stage_cost[static_cast<std::size_t>(s)]
                                                    [static_cast<std::size_t>(a)] +
                                        delta));
            out.log_factors_[static_cast<std::size_t>(i * out.nA_ + a)] = k;

            for (int y = 0; y < out.nY_; ++y) {
                auto& m = out.mats_[static_cast<std::size_t>((i * out.nA_ + a) * out.nY_ + y)];
                m.assign(static_cast<std::size_t>(out.nS_ * out.nS_), 0.0);
                for (int sn = 0; sn < out.nS_; ++sn)
                    for (int sc = 0; sc < out.nS_; ++sc) {
                        const double tilt =
                            std::exp(rate * (p.stage_cost[static_cast<std::size_t>(sc)]
                                                         [static_cast<std::size_t>(a)] +
                                             delta) -
                                     k);
                        m[static_cast<std::size_t>(sn * out.nS_ + sc)] =
                            tilt *
                            p.kernel[static_cast<std::size_t>(a)][static_cast<std::size_t>(sc)]
                                    [static_cast<std::size_t>(sn)] *
                            p.signal[static_cast<std::size_t>(sn)][static_cast<std::size_t>(y)];
                    }
            }
        }
    }
    return out;
}

BayesStep bayes_step(const PomdpModel& p, const ExpMatrixSet& mats, const Vec& theta, int term,
                     int action, int obs) {
    const int nS = p.num_hidden();
    if (static_cast<int>(theta.size()) != nS)
        throw ValidationError("filter arity does not match the hidden-state count");

    const auto& m = mats.scaled(term, action, obs);
    Vec unnorm(static_cast<std::size_t>(nS), 0.0);
    NeumaierSum mass;
    for (int sn = 0; sn < nS; ++sn) {
        NeumaierSum row;
        for (int sc = 0; sc < nS; ++sc)
            row.add(m[static_cast<std::size_t>(sn * nS + sc)] *
                    theta[static_cast<std::size_t>(sc)]);
        unnorm[static_cast<std::size_t>(sn)] = row.value();
        mass.add(row.value());
    }
    const double t = mass.value();
    if (!(t > 0.0))
        throw DomainError("observation " + p.observations[static_cast<std::size_t>(obs)] +
                          " has zero likelihood under the current filter");

    BayesStep out;
    out.scaled_mass = t;
    const double rate = p.terms[static_cast<std::size_t>(term)].rate;
    out.gcost = (mats.log_factor(term, action) + std::log(t)) / rate;
    out.next_theta.resize(static_cast<std::size_t>(nS));
    for (int sn = 0; sn < nS; ++sn)
        out.next_theta[static_cast<std::size_t>(sn)] = unnorm[static_cast<std::size_t>(sn)] / t;
    return out;
}

InfoStep info_successors(const InformationState& s, ActionId a, const PomdpModel& p,
                         const ExpMatrixSet& mats) {
    const int nI = p.num_terms();
    const int nY = p.num_observations();
    const double py = 1.0 / nY;
    const double log_ny = std::log(static_cast<double>(nY));

    InfoStep out;
    for (int y = 0; y < nY; ++y) {
        std::vector<BayesStep> steps;
        steps.reserve(static_cast<std::size_t>(nI));
        int zeros = 0;
        for (int i = 0; i < nI; ++i) {
            const auto& m = mats.scaled(i, a, y);
            const auto& th = s.theta[static_cast<std::size_t>(i)];
            const int nS = p.num_hidden();
            double probe = 0.0;
            for (int sn = 0; sn < nS; ++sn)
                for (int sc = 0; sc < nS; ++sc)
                    probe += m[static_cast<std::size_t>(sn * nS + sc)] *
                             th[static_cast<std::size_t>(sc)];
            if (!(probe > 0.0)) {
                ++zeros;
                continue;
            }
            steps.push_back(bayes_step(p, mats, th, i, a, y));
        }
        if (zeros == nI) {
            out.pruned_mass += py;
            continue;
        }
        if (zeros != 0)
            throw NumericError(
                "internal: filter supports diverged across objectives; the tilted filters share "
                "one support when started from a common distribution");

        InfoStep::Succ succ;
        succ.prob = py;
        succ.state.y = y;
        succ.state.theta.reserve(static_cast<std::size_t>(nI));
        succ.cost.resize(static_cast<std::size_t>(nI));
        for (int i = 0; i < nI; ++i) {
            succ.state.theta.push_back(std::move(steps[static_cast<std::size_t>(i)].next_theta));
            const double rate = p.terms[static_cast<std::size_t>(i)].rate;
            succ.cost[static_cast<std::size_t>(i)] =
                steps[static_cast<std::size_t>(i)].gcost + log_ny / rate;
        }
        out.kept.push_back(std::move(succ));
    }
    return out;
}

InformationMdp::InformationMdp(PomdpModel p, Vec theta0, int y0) : model_(std::move(p)) {
    model_.validate();
    check_theta(model_, theta0);
    if (y0 < 0 || y0 >= model_.num_observations())
        throw ValidationError("anchor observation index out of range");
    mats_ = build_matrices(model_);
    all_actions_.resize(static_cast<std::size_t>(model_.num_actions()));
    for (int a = 0; a < model_.num_actions(); ++a) all_actions_[static_cast<std::size_t>(a)] = a;

    InformationState root;
    root.y = y0;
    root.theta.assign(static_cast<std::size_t>(model_.num_terms()), theta0);
    intern(std::move(root));
}

StateId InformationMdp::intern(InformationState s) const {
    std::vector<std::int64_t> key;
    key.reserve(1 + s.theta.size() * s.theta.front().size());
    key.push_back(s.y);
    for (const auto& th : s.theta)
        for (double v : th) key.push_back(std::llround(v * kThetaQuantum));

    auto it = index_.find(key);
    if (it != index_.end()) return it->second;

    const StateId id = static_cast<StateId>(states_.size());
    index_.emplace(std::move(key), id);
    states_.push_back(std::move(s));
    rows_.emplace_back();
    auto& per_action = rows_.back();
    per_action.reserve(all_actions_.size());
    for (std::size_t a = 0; a < all_actions_.size(); ++a)
        per_action.push_back(std::make_unique<Row>());
    return id;
}

const std::vector<ActionId>& InformationMdp::feasible(StateId x) const {
    if (x < 0 || static_cast<std::size_t>(x) >= states_.size())
        throw QueryError("information state handle out of range");
    return all_actions_;
}

const std::vector<Transition>& InformationMdp::successors(StateId x, ActionId a) const {
    if (x < 0 || static_cast<std::size_t>(x) >= states_.size())
        throw QueryError("information state handle out of range");
    if (a < 0 || a >= model_.num_actions()) throw QueryError("action handle out of range");

    Row& row = *rows_[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
    if (row.computed) return row.succ;

    InfoStep step = info_successors(states_[static_cast<std::size_t>(x)], a, model_, mats_);
    row.succ.reserve(step.kept.size());
    for (auto& sc : step.kept) {
        const StateId nid = intern(std::move(sc.state));
        row.succ.push_back(Transition{nid, sc.prob, std::move(sc.cost)});
    }
    row.pruned = step.pruned_mass;
    row.computed = true;
    if (step.pruned_mass > 0.0) {
        any_pruned_ = true;
        total_pruned_ += step.pruned_mass;
    }
    return row.succ;
}

std::string InformationMdp::state_label(StateId x) const {
    const InformationState& s = info(x);
    std::string out = "x" + std::to_string(x) +
                      ";y=" + model_.observations[static_cast<std::size_t>(s.y)];
    for (std::size_t i = 0; i < s.theta.size(); ++i) {
        out += ";th" + std::to_string(i + 1) + "=";
        for (std::size_t k = 0; k < s.theta[i].size(); ++k) {
            if (k != 0) out += ',';
            out += format_compact(s.theta[i][k]);
        }
    }
    return out;
}

std::string InformationMdp::action_label(ActionId a) const {
    if (a < 0 || a >= model_.num_actions()) throw QueryError("action handle out of range");
    return model_.actions[static_cast<std::size_t>(a)];
}

const InformationState& InformationMdp::info(StateId x) const {
    if (x < 0 || static_cast<std::size_t>(x) >= states_.size())
        throw QueryError("information state handle out of range");
    return states_[static_cast<std::size_t>(x)];
}

double InformationMdp::pruned_mass(StateId x, ActionId a) const {
    if (x < 0 || static_cast<std::size_t>(x) >= states_.size())
        throw QueryError("information state handle out of range");
    if (a < 0 || a >= model_.num_actions()) throw QueryError("action handle out of range");
    const Row& row = *rows_[static_cast<std::size_t>(x)][static_cast<std::size_t>(a)];
    return row.computed ? row.pruned : 0.0;
}

ShiftResult shift_costs(const PomdpModel& p, int horizon, const Vec& theta0) {
    p.validate();
    if (horizon < 1) throw ValidationError("horizon must be at least 1");

    InformationMdp scan(p, theta0, 0);
    const int nI = p.num_terms();
    Vec inf_cost(static_cast<std::size_t>(nI), std::numeric_limits<double>::infinity());

    // Exact reachable scan: expand each discovered information state once.
    // Costs depend only on (state, action, observation), so one expansion per
    // state covers every depth at which it recurs.
    std::vector<StateId> frontier{0};
    StateId known = 1;
    for (int depth = 0; depth < horizon && !frontier.empty(); ++depth) {
        for (StateId x : frontier)
            for (ActionId a = 0; a < p.num_actions(); ++a)
                for (const Transition& t : scan.successors(x, a))
                    for (int i = 0; i < nI; ++i)
                        inf_cost[static_cast<std::size_t>(i)] =
                            std::min(inf_cost[static_cast<std::size_t>(i)],
                                     t.cost[static_cast<std::size_t>(i)]);
        const StateId total = static_cast<StateId>(scan.num_states());
        frontier.clear();
        for (StateId x = known; x < total; ++x) frontier.push_back(x);
        known = total;
    }

    ShiftResult out;
    out.model = p;
    out.infimum = inf_cost;
    out.offset.assign(static_cast<std::size_t>(nI), 0.0);
    out.model.cost_offset.resize(static_cast<std::size_t>(nI));
    for (int i = 0; i < nI; ++i) {
        const double m = inf_cost[static_cast<std::size_t>(i)];
        const double delta = (m <= 0.0) ? 2.0 * std::fabs(m) : 0.0;
        out.offset[static_cast<std::size_t>(i)] = delta;
        out.model.cost_offset[static_cast<std::size_t>(i)] = p.offset(i) + delta;
        out.model.terms[static_cast<std::size_t>(i)].weight *=
            std::exp(-static_cast<double>(horizon) * p.terms[static_cast<std::size_t>(i)].rate *
                     delta);
    }
    return out;
}

namespace {

ObsPolicy::Node constant_node(int remaining, int num_obs, ActionId a) {
    ObsPolicy::Node n;
    n.action = a;
    if (remaining > 1) {
        n.children.reserve(static_cast<std::size_t>(num_obs));
        for (int y = 0; y < num_obs; ++y)
            n.children.push_back(constant_node(remaining - 1, num_obs, a));
    }
    return n;
}

void check_tree(const ObsPolicy::Node& n, int remaining, int num_obs, int num_actions) {
    if (n.action < 0 || n.action >= num_actions)
        throw ValidationError("policy tree action out of range");
    if (remaining > 1) {
        if (static_cast<int>(n.children.size()) != num_obs)
            throw ValidationError("policy tree node must have one child per observation");
        for (const auto& c : n.children) check_tree(c, remaining - 1, num_obs, num_actions);
    } else if (!n.children.empty()) {
        throw ValidationError("policy tree leaves must not have children");
    }
}

struct ChainWalk {
    const PomdpModel& p;
    const ExpMatrixSet& mats;
    int horizon;
    int nI;
    int nY;
    double log_ny;
    std::vector<NeumaierSum> acc;
    NeumaierSum pruned;

    void go(const std::vector<Vec>& theta, const Vec& csum, const ObsPolicy::Node& node,
            int depth, double prob) {
        if (depth == horizon) {
            for (int i = 0; i < nI; ++i)
                acc[static_cast<std::size_t>(i)].add(
                    prob * std::exp(p.terms[static_cast<std::size_t>(i)].rate *
                                    csum[static_cast<std::size_t>(i)]));
            return;
        }
        const ActionId a = node.action;
        for (int y = 0; y < nY; ++y) {
            int zeros = 0;
            std::vector<BayesStep> steps;
            steps.reserve(static_cast<std::size_t>(nI));
            for (int i = 0; i < nI; ++i) {
                const auto& m = mats.scaled(i, a, y);
                const auto& th = theta[static_cast<std::size_t>(i)];
                const int nS = p.num_hidden();
                double probe = 0.0;
                for (int sn = 0; sn < nS; ++sn)
                    for (int sc = 0; sc < nS; ++sc)
                        probe += m[static_cast<std::size_t>(sn * nS + sc)] *
                                 th[static_cast<std::size_t>(sc)];
                if (!(probe > 0.0)) {
                    ++zeros;
                    continue;
                }
                steps.push_back(bayes_step(p, mats, th, i, a, y));
            }
            if (zeros == nI) {
                pruned.add(prob / nY);
                continue;
            }
            if (zeros != 0)
                throw NumericError(
                    "internal: filter supports diverged across objectives; the tilted filters "
                    "share one support when started from a common distribution");

            std::vector<Vec> next_theta;
            next_theta.reserve(static_cast<std::size_t>(nI));
            Vec next_csum(static_cast<std::size_t>(nI));
            for (int i = 0; i < nI; ++i) {
                const double rate = p.terms[static_cast<std::size_t>(i)].rate;
                next_csum[static_cast<std::size_t>(i)] =
                    csum[static_cast<std::size_t>(i)] +
                    steps[static_cast<std::size_t>(i)].gcost + log_ny / rate;
                next_theta.push_back(std::move(steps[static_cast<std::size_t>(i)].next_theta));
            }
            const ObsPolicy::Node& child =
                (depth + 1 < horizon) ? node.children[static_cast<std::size_t>(y)] : node;
            go(next_theta, next_csum, child, depth + 1, prob / nY);
        }
    }
};

}  // namespace

ObsPolicy ObsPolicy::constant(int horizon, int num_obs, ActionId a) {
    if (horizon < 1) throw ValidationError("horizon must be at least 1");
    ObsPolicy out;
    out.levels = horizon;
    out.root = constant_node(horizon, num_obs, a);
    return out;
}

InfoChainResult info_chain_expectations(const PomdpModel& p, const Vec& theta0,
                                        const ObsPolicy& policy, int horizon) {
    p.validate();
    check_theta(p, theta0);
    if (horizon < 1) throw ValidationError("horizon must be at least 1");
    if (policy.levels != horizon)
        throw ValidationError("policy tree depth does not match the horizon");
    check_tree(policy.root, horizon, p.num_observations(), p.num_actions());

    const ExpMatrixSet mats = build_matrices(p);
    ChainWalk walk{p,
                   mats,
                   horizon,
                   p.num_terms(),
                   p.num_observations(),
                   std::log(static_cast<double>(p.num_observations())),
                   std::vector<NeumaierSum>(static_cast<std::size_t>(p.num_terms())),
                   NeumaierSum{}};

    std::vector<Vec> theta(static_cast<std::size_t>(p.num_terms()), theta0);
    walk.go(theta, Vec(static_cast<std::size_t>(p.num_terms()), 0.0), policy.root, 0, 1.0);

    InfoChainResult out;
    out.per_term.resize(static_cast<std::size_t>(p.num_terms()));
    NeumaierSum value;
    for (int i = 0; i < p.num_terms(); ++i) {
        out.per_term[static_cast<std::size_t>(i)] = walk.acc[static_cast<std::size_t>(i)].value();
        const auto& t = p.terms[static_cast<std::size_t>(i)];
        const double sign = t.rate > 0.0 ? 1.0 : -1.0;
        value.add(t.weight * sign * out.per_term[static_cast<std::size_t>(i)]);
    }
    out.value = value.value();
    out.pruned_mass = walk.pruned.value();
    return out;
}

namespace {

// Reads the optimal observation tree off the solved layer graph: at each
// layer node the stage rule picks the action, and the resolved edges map
// observations to next-layer nodes. Observations pruned during expansion get
// a constant default subtree on action 0.
ObsPolicy::Node extract_tree(const InformationMdp& imdp, const LayerGraph& g,
                             const std::vector<StagePolicy>& stages, int k, int node,
                             int horizon) {
    ObsPolicy::Node out;
    out.action = stages[static_cast<std::size_t>(k)].action[static_cast<std::size_t>(node)];
    if (k + 1 >= horizon) return out;

    const Layer& cur = g.layer(k);
    const Layer& next = g.layer(k + 1);
    const int nY = imdp.pomdp().num_observations();
    out.children.resize(static_cast<std::size_t>(nY));

    const auto& edges = cur.out[static_cast<std::size_t>(node)];
    const Layer::ActionEdges* chosen = nullptr;
    for (const auto& ae : edges)
        if (ae.action == out.action) {
            chosen = &ae;
            break;
        }
    if (chosen == nullptr) throw NumericError("internal: stage rule picked an unresolved action");

    std::vector<bool> filled(static_cast<std::size_t>(nY), false);
    for (const auto& [to, prob] : chosen->to) {
        (void)prob;
        const int y = imdp.info(next.x[static_cast<std::size_t>(to)]).y;
        out.children[static_cast<std::size_t>(y)] =
            extract_tree(imdp, g, stages, k + 1, to, horizon);
        filled[static_cast<std::size_t>(y)] = true;
    }
    for (int y = 0; y < nY; ++y)
        if (!filled[static_cast<std::size_t>(y)])
            out.children[static_cast<std::size_t>(y)] = constant_node(horizon - k - 1, nY, 0);
    return out;
}

}  // namespace

RspomdpResult solve_rspomdp(const PomdpModel& p, const Vec& theta0, int horizon,
                            const SolveOptions& opts) {
    p.validate();
    if (horizon < 1) throw ValidationError("horizon must be at least 1");

    PomdpModel working = p;
    Vec applied_offset;
    if (opts.apply_shift) {
        ShiftResult sh = shift_costs(p, horizon, theta0);
        working = std::move(sh.model);
        applied_offset = std::move(sh.offset);
    }

    InformationMdp imdp(std::move(working), theta0, 0);
    const UtilitySpec u = UtilitySpec::sum_of_exponentials(imdp.pomdp().terms);
    FiniteSolveResult fin = solve_finite(imdp, u, DiscountSpec::none(), 0, horizon, opts);

    RspomdpResult out;
    out.value = fin.value;
    out.shift_offset = std::move(applied_offset);
    out.pruned_mass = imdp.total_pruned_mass();
    out.info_states = imdp.num_states();
    out.policy.levels = horizon;
    out.policy.root =
        extract_tree(imdp, fin.policy.layers(), fin.policy.stage_policies(), 0, 0, horizon);
    const LayerGraph& g = fin.policy.layers();
    for (int k = 0; k <= g.depth(); ++k) out.layer_sizes.push_back(g.layer(k).size());
    return out;
}

RspomdpResult solve_rspomdp(const PomdpModel& p, const Vec& theta0, int horizon) {
    return solve_rspomdp(p, theta0, horizon, SolveOptions{});
}

}  // namespace morsdp
