#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "morsdp/bellman.hpp"
#include "morsdp/errors.hpp"
#include "morsdp/model_io.hpp"
#include "morsdp/oracle.hpp"
#include "morsdp/pomdp.hpp"
#include "morsdp/utility.hpp"

using namespace morsdp;

namespace {

// Two-state reference instance used across the suite; all expected values
// below were computed once with 50-digit interval arithmetic and frozen.
PomdpModel fixture() {
    PomdpModel p;
    p.hidden = {"s0", "s1"};
    p.observations = {"y0", "y1"};
    p.actions = {"a0", "a1"};
    p.kernel = {{{0.7, 0.3}, {0.4, 0.6}}, {{0.2, 0.8}, {0.9, 0.1}}};
    p.signal = {{0.6, 0.4}, {0.25, 0.75}};
    p.stage_cost = {{0.5, 1.25}, {0.75, 0.25}};
    p.terms = {{1.0, 0.5}, {0.5, -1.0}};
    return p;
}

const Vec kTheta0 = {0.35, 0.65};

// Root takes a1; after y0 the leaf takes a0, after y1 it takes a1.
ObsPolicy fixed_tree() {
    ObsPolicy pol;
    pol.levels = 2;
    pol.root.action = 1;
    pol.root.children = {{0, {}}, {1, {}}};
    return pol;
}

bool trees_equal(const ObsPolicy::Node& a, const ObsPolicy::Node& b) {
    if (a.action != b.action || a.children.size() != b.children.size()) return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!trees_equal(a.children[i], b.children[i])) return false;
    return true;
}

PomdpModel random_pomdp(std::uint32_t seed, int nS, int nY, int nA, int nI) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> mass(0.05, 1.0);
    std::uniform_real_distribution<double> cost(0.1, 1.5);
    std::uniform_real_distribution<double> weight(0.5, 2.0);
    std::uniform_real_distribution<double> rate(0.3, 1.4);

    auto normalized_row = [&](int n) {
        Vec row(static_cast<std::size_t>(n));
        double tot = 0.0;
        for (double& v : row) tot += (v = mass(rng));
        for (double& v : row) v /= tot;
        return row;
    };

    PomdpModel p;
    for (int s = 0; s < nS; ++s) p.hidden.push_back("s" + std::to_string(s));
    for (int y = 0; y < nY; ++y) p.observations.push_back("y" + std::to_string(y));
    for (int a = 0; a < nA; ++a) p.actions.push_back("a" + std::to_string(a));
    p.kernel.resize(static_cast<std::size_t>(nA));
    for (int a = 0; a < nA; ++a)
        for (int s = 0; s < nS; ++s)
            p.kernel[static_cast<std::size_t>(a)].push_back(normalized_row(nS));
    for (int s = 0; s < nS; ++s) p.signal.push_back(normalized_row(nY));
    p.stage_cost.resize(static_cast<std::size_t>(nS));
    for (int s = 0; s < nS; ++s)
        for (int a = 0; a < nA; ++a)
            p.stage_cost[static_cast<std::size_t>(s)].push_back(cost(rng));
    for (int i = 0; i < nI; ++i) {
        const double sgn = (i % 2 == 1) ? -1.0 : 1.0;
        p.terms.push_back({weight(rng), sgn * rate(rng)});
    }
    p.validate();
    return p;
}

Vec random_theta(std::uint32_t seed, int nS) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> mass(0.1, 1.0);
    Vec t(static_cast<std::size_t>(nS));
    double tot = 0.0;
    for (double& v : t) tot += (v = mass(rng));
    for (double& v : t) v /= tot;
    return t;
}

ObsPolicy random_tree(std::uint32_t seed, int horizon, int nY, int nA) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> pick(0, nA - 1);
    ObsPolicy pol;
    pol.levels = horizon;
    std::function<void(ObsPolicy::Node&, int)> fill = [&](ObsPolicy::Node& node, int level) {
        node.action = pick(rng);
        if (level + 1 < horizon) {
            node.children.resize(static_cast<std::size_t>(nY));
            for (auto& ch : node.children) fill(ch, level + 1);
        }
    };
    fill(pol.root, 0);
    return pol;
}

}  // namespace

TEST_CASE("matrix rows refactor into the exponentiated stage cost") {
    PomdpModel p = fixture();
    SUBCASE("without offsets") {}
    SUBCASE("with per-term offsets") { p.cost_offset = {0.5, 0.25}; }

    ExpMatrixSet mats = build_matrices(p);
    for (int i = 0; i < p.num_terms(); ++i) {
        const double rate = p.terms[static_cast<std::size_t>(i)].rate;
        for (int a = 0; a < p.num_actions(); ++a) {
            double max_exponent = -std::numeric_limits<double>::infinity();
            for (int s = 0; s < p.num_hidden(); ++s)
                max_exponent = std::max(
                    max_exponent,
                    rate * (p.stage_cost[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] +
                            p.offset(i)));
            CHECK(mats.log_factor(i, a) == max_exponent);

            for (int s = 0; s < p.num_hidden(); ++s) {
                // Summing the matrix column over observations and successor
                // states recovers exp(rate * (cost + offset)) exactly: the
                // kernel row and the signal rows each sum to one.
                double col = 0.0;
                for (int y = 0; y < p.num_observations(); ++y)
                    for (int sn = 0; sn < p.num_hidden(); ++sn)
                        col += mats.entry(i, a, y, sn, s);
                const double want = std::exp(
                    rate * (p.stage_cost[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] +
                            p.offset(i)));
                CHECK(col == doctest::Approx(want).epsilon(1e-12));

                for (int y = 0; y < p.num_observations(); ++y)
                    for (int sn = 0; sn < p.num_hidden(); ++sn) {
                        const double scaled =
                            mats.scaled(i, a, y)[static_cast<std::size_t>(sn) *
                                                     static_cast<std::size_t>(p.num_hidden()) +
                                                 static_cast<std::size_t>(s)];
                        CHECK(scaled <=
                              p.kernel[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)]
                                      [static_cast<std::size_t>(sn)] *
                                      p.signal[static_cast<std::size_t>(sn)]
                                              [static_cast<std::size_t>(y)] +
                                  1e-15);
                        CHECK(mats.entry(i, a, y, sn, s) ==
                              doctest::Approx(scaled * std::exp(mats.log_factor(i, a)))
                                  .epsilon(1e-13));
                    }
            }
        }
    }
}

TEST_CASE("single-hidden-state filters reduce to scalar identities") {
    PomdpModel p;
    p.hidden = {"s0"};
    p.observations = {"y0", "y1", "y2"};
    p.actions = {"a0", "a1"};
    p.kernel = {{{1.0}}, {{1.0}}};
    p.signal = {{0.2, 0.5, 0.3}};
    p.stage_cost = {{0.4, 1.1}};
    p.terms = {{1.0, 1.0}, {0.5, 2.0}};
    p.validate();

    ExpMatrixSet mats = build_matrices(p);
    for (int i = 0; i < 2; ++i) {
        const double rate = p.terms[static_cast<std::size_t>(i)].rate;
        for (int a = 0; a < 2; ++a)
            for (int y = 0; y < 3; ++y) {
                BayesStep bs = bayes_step(p, mats, {1.0}, i, a, y);
                REQUIRE(bs.next_theta.size() == 1);
                CHECK(bs.next_theta[0] == 1.0);
                const double want = p.stage_cost[0][static_cast<std::size_t>(a)] +
                                    std::log(p.signal[0][static_cast<std::size_t>(y)]) / rate;
                CHECK(bs.gcost == doctest::Approx(want).epsilon(1e-14));
            }
    }
}

TEST_CASE("zero cost and uniform signals leave the risk-neutral predictor") {
    PomdpModel p = fixture();
    p.stage_cost = {{0.0, 0.0}, {0.0, 0.0}};
    p.signal = {{0.5, 0.5}, {0.5, 0.5}};
    PomdpModel q = p;
    q.validate();  // zero cost is legal for the filter itself

    ExpMatrixSet mats = build_matrices(p);
    const Vec theta = {0.35, 0.65};
    for (int i = 0; i < 2; ++i) {
        const double rate = p.terms[static_cast<std::size_t>(i)].rate;
        for (int a = 0; a < 2; ++a)
            for (int y = 0; y < 2; ++y) {
                BayesStep bs = bayes_step(p, mats, theta, i, a, y);
                for (int sn = 0; sn < 2; ++sn) {
                    double pred = 0.0;
                    for (int s = 0; s < 2; ++s)
                        pred += p.kernel[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)]
                                        [static_cast<std::size_t>(sn)] *
                                theta[static_cast<std::size_t>(s)];
                    CHECK(bs.next_theta[static_cast<std::size_t>(sn)] ==
                          doctest::Approx(pred).epsilon(1e-14));
                }
                CHECK(bs.gcost == doctest::Approx(std::log(0.5) / rate).epsilon(1e-14));
            }
    }
}

TEST_CASE("point-mass filters follow the kernel row") {
    PomdpModel p = fixture();
    ExpMatrixSet mats = build_matrices(p);
    for (int s = 0; s < 2; ++s) {
        Vec theta = {0.0, 0.0};
        theta[static_cast<std::size_t>(s)] = 1.0;
        for (int i = 0; i < 2; ++i) {
            const double rate = p.terms[static_cast<std::size_t>(i)].rate;
            for (int a = 0; a < 2; ++a)
                for (int y = 0; y < 2; ++y) {
                    BayesStep bs = bayes_step(p, mats, theta, i, a, y);
                    double mass = 0.0;
                    Vec unnorm(2);
                    for (int sn = 0; sn < 2; ++sn) {
                        unnorm[static_cast<std::size_t>(sn)] =
                            p.kernel[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)]
                                    [static_cast<std::size_t>(sn)] *
                            p.signal[static_cast<std::size_t>(sn)][static_cast<std::size_t>(y)];
                        mass += unnorm[static_cast<std::size_t>(sn)];
                    }
                    for (int sn = 0; sn < 2; ++sn)
                        CHECK(bs.next_theta[static_cast<std::size_t>(sn)] ==
                              doctest::Approx(unnorm[static_cast<std::size_t>(sn)] / mass)
                                  .epsilon(1e-14));
                    const double want =
                        p.stage_cost[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] +
                        std::log(mass) / rate;
                    CHECK(bs.gcost == doctest::Approx(want).epsilon(1e-13));
                }
        }
    }
}

TEST_CASE("filters stay normalized along every branch") {
    PomdpModel p = fixture();
    ExpMatrixSet mats = build_matrices(p);
    std::mt19937 rng(7u);
    std::uniform_int_distribution<int> pick(0, 1);
    for (int walk = 0; walk < 50; ++walk) {
        Vec theta = kTheta0;
        for (int depth = 0; depth < 4; ++depth) {
            const int i = pick(rng), a = pick(rng), y = pick(rng);
            BayesStep bs = bayes_step(p, mats, theta, i, a, y);
            double tot = 0.0;
            for (double v : bs.next_theta) {
                CHECK(v >= 0.0);
                tot += v;
            }
            CHECK(tot == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(bs.scaled_mass > 0.0);
            theta = bs.next_theta;
        }
    }
}

TEST_CASE("information successors split the uniform observation mass") {
    PomdpModel p = fixture();
    ExpMatrixSet mats = build_matrices(p);
    InformationState root{{kTheta0, kTheta0}, 0};
    for (int a = 0; a < 2; ++a) {
        InfoStep step = info_successors(root, a, p, mats);
        CHECK(step.pruned_mass == 0.0);
        REQUIRE(step.kept.size() == 2);
        for (int y = 0; y < 2; ++y) {
            const auto& succ = step.kept[static_cast<std::size_t>(y)];
            CHECK(succ.prob == 0.5);
            CHECK(succ.state.y == y);
            REQUIRE(succ.cost.size() == 2);
            for (int i = 0; i < 2; ++i) {
                BayesStep bs = bayes_step(p, mats, kTheta0, i, a, y);
                const double rate = p.terms[static_cast<std::size_t>(i)].rate;
                CHECK(succ.cost[static_cast<std::size_t>(i)] ==
                      doctest::Approx(bs.gcost + std::log(2.0) / rate).epsilon(1e-13));
                for (std::size_t sn = 0; sn < 2; ++sn)
                    CHECK(succ.state.theta[static_cast<std::size_t>(i)][sn] ==
                          doctest::Approx(bs.next_theta[sn]).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("tilted filter chain reproduces raw path sums") {
    // The defining identity of the reduction: expectations under the uniform
    // observation chain equal physical-measure path sums, term by term.
    struct Case {
        PomdpModel model;
        Vec theta0;
        int horizon;
    };
    std::vector<Case> cases;
    cases.push_back({fixture(), kTheta0, 2});
    cases.push_back({random_pomdp(11u, 2, 2, 2, 2), random_theta(12u, 2), 3});
    cases.push_back({random_pomdp(21u, 3, 2, 2, 2), random_theta(22u, 3), 2});
    cases.push_back({random_pomdp(31u, 2, 3, 2, 1), random_theta(32u, 2), 3});
    cases.push_back({random_pomdp(41u, 3, 3, 2, 2), random_theta(42u, 3), 2});

    int checked = 0;
    for (const Case& c : cases) {
        const int nY = c.model.num_observations();
        const int nA = c.model.num_actions();
        std::vector<ObsPolicy> trees;
        for (int a = 0; a < nA; ++a) trees.push_back(ObsPolicy::constant(c.horizon, nY, a));
        trees.push_back(random_tree(100u + static_cast<std::uint32_t>(checked), c.horizon, nY,
                                    nA));
        for (const ObsPolicy& tree : trees) {
            InfoChainResult chain = info_chain_expectations(c.model, c.theta0, tree, c.horizon);
            PomdpOracleResult oracle = enumerate_pomdp(c.model, c.theta0, tree, c.horizon);
            REQUIRE(chain.per_term.size() == oracle.per_term.size());
            for (std::size_t i = 0; i < chain.per_term.size(); ++i)
                CHECK(chain.per_term[i] ==
                      doctest::Approx(oracle.per_term[i]).epsilon(1e-9));
            CHECK(chain.value == doctest::Approx(oracle.value).epsilon(1e-9));
            ++checked;
        }
    }
    CHECK(checked == 5 * 3);
}

TEST_CASE("frozen instance reproduces its pinned values") {
    PomdpModel p = fixture();

    InfoChainResult fixed = info_chain_expectations(p, kTheta0, fixed_tree(), 2);
    CHECK(fixed.per_term[0] == doctest::Approx(1.9288000467671036).epsilon(1e-13));
    CHECK(fixed.per_term[1] == doctest::Approx(0.3194872171109766).epsilon(1e-13));
    CHECK(fixed.value == doctest::Approx(1.7690564382116154).epsilon(1e-13));
    CHECK(fixed.pruned_mass == 0.0);

    auto res = solve_rspomdp(p, kTheta0, 2);
    CHECK(res.value == doctest::Approx(1.7122247165046756).epsilon(1e-13));
    CHECK(res.info_states == 21);
    CHECK(res.pruned_mass == 0.0);
    REQUIRE(res.shift_offset.size() == 2);
    CHECK(res.shift_offset[0] == 0.0);
    CHECK(res.shift_offset[1] == 0.0);
    REQUIRE(res.layer_sizes.size() == 3);
    CHECK(res.layer_sizes[0] == 1);
    CHECK(res.layer_sizes[1] == 4);
    CHECK(res.layer_sizes[2] == 16);

    // Optimal tree: a1 at the root, a0 after either observation.
    ObsPolicy best;
    best.levels = 2;
    best.root.action = 1;
    best.root.children = {{0, {}}, {0, {}}};
    CHECK(trees_equal(res.policy.root, best.root));

    // Bit-reproducible across repeated solves.
    auto res2 = solve_rspomdp(p, kTheta0, 2);
    CHECK(res2.value == res.value);

    // The returned tree evaluates to the returned value under the raw model.
    PomdpOracleResult check = enumerate_pomdp(p, kTheta0, res.policy, 2);
    CHECK(check.value == doctest::Approx(res.value).epsilon(1e-12));
}

TEST_CASE("state-independent costs with blind signals solve open loop") {
    PomdpModel p;
    p.hidden = {"s0", "s1"};
    p.observations = {"y0", "y1"};
    p.actions = {"a0", "a1"};
    p.kernel = {{{0.7, 0.3}, {0.4, 0.6}}, {{0.2, 0.8}, {0.9, 0.1}}};
    p.signal = {{0.5, 0.5}, {0.5, 0.5}};
    p.stage_cost = {{0.4, 0.7}, {0.4, 0.7}};
    p.terms = {{1.0, 0.8}, {0.5, -1.1}};
    p.validate();

    auto res = solve_rspomdp(p, {0.5, 0.5}, 2);

    double best = std::numeric_limits<double>::infinity();
    const double costs[2] = {0.4, 0.7};
    for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1) {
            const double total = costs[a0] + costs[a1];
            const double val = 1.0 * std::exp(0.8 * total) - 0.5 * std::exp(-1.1 * total);
            best = std::min(best, val);
        }
    CHECK(res.value == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("cost shift doubles the negative infimum and rescales weights") {
    // One hidden state, zero stage cost: the information cost of (a, y) is
    // log(|Y| * Q(y)) / rate, so picking Q(y0) = exp(-1)/2 pins the reachable
    // infimum at exactly -1.
    PomdpModel p;
    p.hidden = {"s0"};
    p.observations = {"y0", "y1"};
    p.actions = {"a0"};
    p.kernel = {{{1.0}}};
    const double q0 = std::exp(-1.0) / 2.0;
    p.signal = {{q0, 1.0 - q0}};
    p.stage_cost = {{0.0}};
    p.terms = {{1.0, 1.0}};
    p.validate();

    ShiftResult sh = shift_costs(p, 2, {1.0});
    REQUIRE(sh.infimum.size() == 1);
    CHECK(sh.infimum[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(sh.offset[0] == doctest::Approx(2.0).epsilon(1e-12));
    REQUIRE(sh.model.cost_offset.size() == 1);
    CHECK(sh.model.cost_offset[0] == sh.offset[0]);
    // weight' = weight * exp(-horizon * rate * offset) = exp(-4).
    CHECK(sh.model.terms[0].weight ==
          doctest::Approx(std::exp(-2.0 * 1.0 * sh.offset[0])).epsilon(1e-14));

    // All shifted information costs are strictly positive.
    ExpMatrixSet mats = build_matrices(sh.model);
    InformationState root{{{1.0}}, 0};
    InfoStep step = info_successors(root, 0, sh.model, mats);
    for (const auto& succ : step.kept)
        for (double c : succ.cost) CHECK(c > 0.0);

    // A second shift finds a positive infimum and changes nothing.
    ShiftResult again = shift_costs(sh.model, 2, {1.0});
    CHECK(again.infimum[0] > 0.0);
    CHECK(again.offset[0] == 0.0);
    CHECK(again.model.cost_offset[0] == sh.model.cost_offset[0]);
    CHECK(again.model.terms[0].weight == sh.model.terms[0].weight);

    // Already-positive infima on the reference instance are left alone.
    ShiftResult none = shift_costs(fixture(), 2, kTheta0);
    CHECK(none.offset[0] == 0.0);
    CHECK(none.offset[1] == 0.0);
    CHECK(none.model.terms[0].weight == fixture().terms[0].weight);
}

TEST_CASE("shift leaves the value and the argmin tree unchanged") {
    SolveOptions raw;
    raw.apply_shift = false;
    for (std::uint32_t seed : {51u, 52u, 53u, 54u, 55u}) {
        PomdpModel p = random_pomdp(seed, 2, 2, 2, 2);
        Vec theta0 = random_theta(seed + 1000u, 2);
        auto shifted = solve_rspomdp(p, theta0, 2);
        auto plain = solve_rspomdp(p, theta0, 2, raw);
        CHECK(shifted.value == doctest::Approx(plain.value).epsilon(1e-10));
        CHECK(trees_equal(shifted.policy.root, plain.policy.root));
        CHECK(plain.shift_offset.empty());
    }
}

TEST_CASE("objective order does not affect the solution") {
    PomdpModel p = fixture();
    PomdpModel swapped = p;
    std::swap(swapped.terms[0], swapped.terms[1]);

    auto a = solve_rspomdp(p, kTheta0, 2);
    auto b = solve_rspomdp(swapped, kTheta0, 2);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    CHECK(trees_equal(a.policy.root, b.policy.root));
}

TEST_CASE("root observation label is a naming choice only") {
    PomdpModel p = fixture();
    UtilitySpec u = UtilitySpec::sum_of_exponentials(p.terms);
    const InformationState root{{kTheta0, kTheta0}, 0};

    double values[2];
    for (int y0 = 0; y0 < 2; ++y0) {
        InformationMdp imdp(p, kTheta0, y0);
        auto res = solve_finite(imdp, u, DiscountSpec::none(), 0, 2);
        values[y0] = res.value;
    }
    CHECK(values[0] == doctest::Approx(values[1]).epsilon(1e-13));
}

TEST_CASE("zero-likelihood observations are pruned with their mass accounted") {
    PomdpModel p;
    p.hidden = {"s0", "s1"};
    p.observations = {"y0", "y1"};
    p.actions = {"a0"};
    p.kernel = {{{1.0, 0.0}, {1.0, 0.0}}};
    p.signal = {{1.0, 0.0}, {0.3, 0.7}};
    p.stage_cost = {{0.5}, {0.7}};
    p.terms = {{1.0, 1.0}};
    p.validate();
    const Vec theta0 = {0.5, 0.5};

    // Every successor is s0 and s0 only emits y0, so y1 is impossible.
    ExpMatrixSet mats = build_matrices(p);
    InfoStep step = info_successors(InformationState{{theta0}, 0}, 0, p, mats);
    REQUIRE(step.kept.size() == 1);
    CHECK(step.kept[0].state.y == 0);
    CHECK(step.kept[0].prob == 0.5);
    CHECK(step.pruned_mass == 0.5);

    InformationMdp imdp(p, theta0);
    const auto& succ = imdp.successors(0, 0);
    REQUIRE(succ.size() == 1);
    CHECK(succ[0].prob == 0.5);
    CHECK(!imdp.mass_conserving());
    CHECK(imdp.pruned_mass(0, 0) == 0.5);
    CHECK(imdp.total_pruned_mass() == 0.5);

    // The filter chain and the raw-path oracle still agree: pruned branches
    // carry no physical mass, and the pruned reference mass matches the
    // uniform-measure mass of the dropped atoms.
    ObsPolicy tree = ObsPolicy::constant(2, 2, 0);
    InfoChainResult chain = info_chain_expectations(p, theta0, tree, 2);
    PomdpOracleResult oracle = enumerate_pomdp(p, theta0, tree, 2, 1000000, true);
    CHECK(chain.per_term[0] == doctest::Approx(oracle.per_term[0]).epsilon(1e-12));
    double kept_uniform = 0.0;
    for (const PathAtom& atom : oracle.atoms)
        if (atom.rn > 0.0) kept_uniform += atom.prob;
    CHECK(chain.pruned_mass == doctest::Approx(1.0 - kept_uniform).epsilon(1e-12));

    auto res = solve_rspomdp(p, theta0, 2);
    PomdpOracleResult best = enumerate_pomdp(p, theta0, res.policy, 2);
    CHECK(res.value == doctest::Approx(best.value).epsilon(1e-12));
    CHECK(res.pruned_mass > 0.0);
}

TEST_CASE("solver matches exhaustive tree search on random instances") {
    for (std::uint32_t seed : {61u, 62u, 63u, 64u, 65u}) {
        PomdpModel p = random_pomdp(seed, 2, 2, 2, 2);
        Vec theta0 = random_theta(seed + 2000u, 2);
        auto solved = solve_rspomdp(p, theta0, 2);
        auto searched = enumerate_pomdp_policies(p, theta0, 2);
        CHECK(solved.value == doctest::Approx(searched.best_value).epsilon(1e-9));
        CHECK(trees_equal(solved.policy.root, searched.best_policy.root));
        PomdpOracleResult replay = enumerate_pomdp(p, theta0, solved.policy, 2);
        CHECK(replay.value == doctest::Approx(solved.value).epsilon(1e-9));
    }
}

TEST_CASE("reduction to a document reproduces the solved value") {
    PomdpModel p = fixture();
    MdpDocument doc = reduce_to_document(p, kTheta0, 2);
    CHECK(doc.model.num_states() == 21);
    CHECK(!doc.discount.discounted());
    REQUIRE(doc.utility.is_sum_exp());

    auto direct = solve_rspomdp(p, kTheta0, 2);
    auto reduced = solve_finite(doc.model, doc.utility, doc.discount, 0, 2);
    CHECK(reduced.value == doctest::Approx(direct.value).epsilon(1e-12));

    // The document survives its own serialization.
    ModelDocument parsed = parse_model(print_model(doc));
    REQUIRE(std::holds_alternative<MdpDocument>(parsed));
    const MdpDocument& back = std::get<MdpDocument>(parsed);
    auto reparsed = solve_finite(back.model, back.utility, back.discount, 0, 2);
    CHECK(reparsed.value == doctest::Approx(direct.value).epsilon(1e-12));

    CHECK_THROWS_AS(reduce_to_document(p, kTheta0, 2, 3), BudgetError);
    CHECK_THROWS_AS(reduce_to_document(p, kTheta0, 0), ValidationError);
}

TEST_CASE("reduction refuses models whose expansion pruned observations") {
    PomdpModel p;
    p.hidden = {"s0", "s1"};
    p.observations = {"y0", "y1"};
    p.actions = {"a0"};
    p.kernel = {{{1.0, 0.0}, {1.0, 0.0}}};
    p.signal = {{1.0, 0.0}, {0.3, 0.7}};
    p.stage_cost = {{0.5}, {0.7}};
    p.terms = {{1.0, 1.0}};
    p.validate();
    CHECK_THROWS_AS(reduce_to_document(p, {0.5, 0.5}, 2), ValidationError);
}

TEST_CASE("constant observation trees have the documented shape") {
    ObsPolicy pol = ObsPolicy::constant(3, 2, 1);
    CHECK(pol.levels == 3);
    CHECK(pol.root.action == 1);
    REQUIRE(pol.root.children.size() == 2);
    for (const auto& child : pol.root.children) {
        CHECK(child.action == 1);
        REQUIRE(child.children.size() == 2);
        for (const auto& leaf : child.children) {
            CHECK(leaf.action == 1);
            CHECK(leaf.children.empty());
        }
    }
}
