#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "morsdp/bellman.hpp"
#include "morsdp/errors.hpp"
#include "morsdp/model.hpp"
#include "morsdp/result_io.hpp"
#include "morsdp/utility.hpp"

using namespace morsdp;

namespace {

// Every transition carries the same cost vector, so each layer holds exactly
// one accumulated-cost node per state and the exact value is the utility of
// the deterministic discounted total. Loose declared bounds keep the
// envelope bracket open.
FiniteMdp constant_cost_pair(Vec cost, Vec lower, Vec upper) {
    std::vector<std::vector<std::vector<Transition>>> rows(2,
        std::vector<std::vector<Transition>>(2));
    rows[0][0] = {{0, 0.5, cost}, {1, 0.5, cost}};
    rows[0][1] = {{1, 1.0, cost}};
    rows[1][0] = {{0, 1.0, cost}};
    rows[1][1] = {{0, 0.5, cost}, {1, 0.5, cost}};
    std::vector<CostDecl> decls;
    for (std::size_t i = 0; i < cost.size(); ++i)
        decls.push_back({"c" + std::to_string(i + 1), lower[i], upper[i]});
    return FiniteMdp({"A", "B"}, {"u0", "u1"}, {{0, 1}, {0, 1}}, std::move(rows),
                     std::move(decls));
}

}  // namespace

TEST_CASE("tight cost bounds collapse the bracket at the first iteration") {
    std::vector<std::vector<std::vector<Transition>>> rows(1);
    rows[0] = {{{0, 1.0, {1.0}}}};
    FiniteMdp loop({"A"}, {"u"}, {{0}}, std::move(rows), {{"c1", 1.0, 1.0}});
    UtilitySpec u = UtilitySpec::sum_of_exponentials({{1.0, 1.0}});

    auto res = solve_infinite(loop, u, DiscountSpec::of(Vec{0.5}, 1), 0, 1e-9);
    // Total discounted cost is exactly 1/(1-1/2) = 2.
    CHECK(res.value == std::exp(2.0));
    CHECK(res.certificate.iterations == 1);
    CHECK(res.certificate.gap == 0.0);
    CHECK(res.certificate.stop_gap == 0.0);
    CHECK(res.certificate.residual <= 1e-12);
    REQUIRE(res.certificate.lower_history.size() == 2);
    REQUIRE(res.certificate.residual_history.size() == 1);
}

TEST_CASE("bracketing iteration certifies a one-objective fixed point") {
    FiniteMdp m = constant_cost_pair({1.5}, {1.0}, {2.0});
    UtilitySpec u = UtilitySpec::sum_of_exponentials({{1.0, 1.0}});
    const double tol = 1e-8;
    auto res = solve_infinite(m, u, DiscountSpec::of(Vec{0.5}, 1), 0, tol);
    const ConvergenceCertificate& c = res.certificate;

    // Exact value: the discounted total cost is 1.5 / (1 - 1/2) = 3.
    CHECK(res.value == doctest::Approx(std::exp(3.0)).epsilon(1e-9));
    CHECK(c.lower <= res.value);
    CHECK(res.value <= c.upper);
    CHECK(res.value == 0.5 * (c.lower + c.upper));
    CHECK(c.gap == c.upper - c.lower);
    CHECK(c.gap <= c.stop_gap + 1e-15);
    CHECK(c.stop_gap <= tol);
    CHECK(c.residual <= c.stop_gap + 1e-15);
    CHECK(c.tolerance == tol);
    CHECK(c.iterations >= 5);

    REQUIRE(c.lower_history.size() == static_cast<std::size_t>(c.iterations) + 1);
    CHECK(c.upper_history.size() == c.lower_history.size());
    CHECK(c.useed_history.size() == c.lower_history.size());
    CHECK(c.frontier_gap_history.size() == c.lower_history.size());
    CHECK(c.residual_history.size() == static_cast<std::size_t>(c.iterations));
    CHECK(c.stop_gap == c.frontier_gap_history[static_cast<std::size_t>(c.iterations) - 1]);

    for (std::size_t i = 0; i < c.lower_history.size(); ++i) {
        const double slack = 1e-12 * std::fabs(c.upper_history[i]);
        // The lower envelope rises, the upper envelope falls, and the
        // plain-utility iterate trails the lower envelope from below.
        CHECK(c.lower_history[i] <= c.upper_history[i] + slack);
        CHECK(c.useed_history[i] <= c.lower_history[i] + slack);
        if (i > 0) {
            CHECK(c.lower_history[i] >= c.lower_history[i - 1] - slack);
            CHECK(c.upper_history[i] <= c.upper_history[i - 1] + slack);
        }
    }

    CHECK(res.policy.stationary());
    CHECK(res.policy.horizon() == c.iterations + 1);
    CHECK(res.policy.stage_policies().size() == static_cast<std::size_t>(c.iterations) + 1);
}

TEST_CASE("per-objective discounting reaches the exact two-term value") {
    FiniteMdp m = constant_cost_pair({1.5, 1.25}, {1.0, 1.0}, {2.0, 2.0});
    UtilitySpec u = UtilitySpec::sum_of_exponentials({{1.0, 1.0}, {0.5, 2.0}});
    const double tol = 1e-7;
    auto res = solve_infinite(m, u, DiscountSpec::of(Vec{0.5, 0.25}, 2), 0, tol);

    // Totals per objective: 1.5 / 0.5 = 3 and 1.25 / 0.75 = 5/3.
    const double exact = std::exp(3.0) + 0.5 * std::exp(2.0 * 1.25 / 0.75);
    CHECK(res.value == doctest::Approx(exact).epsilon(1e-8));
    CHECK(res.certificate.lower <= exact + 1e-9);
    CHECK(exact <= res.certificate.upper + 1e-9);

    const auto& c = res.certificate;
    for (std::size_t i = 1; i < c.frontier_gap_history.size() - 1; ++i)
        CHECK(c.frontier_gap_history[i] <= c.frontier_gap_history[i - 1] + 1e-12);
}

TEST_CASE("the stationary rule picks the cheaper arm") {
    // Action u1 costs 1 on every step, u0 costs 2. Coarse tolerance keeps the
    // branching accumulated-cost set small.
    std::vector<std::vector<std::vector<Transition>>> rows(1,
        std::vector<std::vector<Transition>>(2));
    rows[0][0] = {{0, 1.0, {2.0}}};
    rows[0][1] = {{0, 1.0, {1.0}}};
    FiniteMdp m({"A"}, {"u0", "u1"}, {{0, 1}}, std::move(rows), {{"c1", 1.0, 2.0}});
    UtilitySpec u = UtilitySpec::sum_of_exponentials({{1.0, 1.0}});

    const double tol = 0.05;
    auto res = solve_infinite(m, u, DiscountSpec::of(Vec{0.25}, 1), 0, tol);
    const double exact = std::exp(1.0 / 0.75);
    CHECK(res.certificate.lower <= exact + 1e-12);
    CHECK(exact <= res.certificate.upper + 1e-12);
    CHECK(res.certificate.gap <= tol);
    CHECK(std::fabs(res.value - exact) <= 0.5 * tol + 1e-12);

    const StateId root[] = {0};
    CHECK(res.policy.action_at(std::span<const StateId>(root, 1), {}) == 1);
    CHECK(res.policy.off_manifold_queries() == 0);
}

TEST_CASE("stationary policies answer histories beyond the expanded depth") {
    FiniteMdp m = constant_cost_pair({1.5}, {1.0}, {2.0});
    UtilitySpec u = UtilitySpec::sum_of_exponentials({{1.0, 1.0}});
    auto res = solve_infinite(m, u, DiscountSpec::of(Vec{0.5}, 1), 0, 1e-6);
    const HistoryPolicy& pol = res.policy;

    // On-manifold query: one valid step, looked up on layer 1.
    {
        const StateId states[] = {0, 1};
        const ActionId actions[] = {1};
        const ActionId got = pol.action_at(std::span<const StateId>(states, 2),
                                           std::span<const ActionId>(actions, 1));
        const int idx = pol.layers().layer(1).find(1, {1.5});
        REQUIRE(idx >= 0);
        CHECK(got == pol.stage_policies()[1].action[static_cast<std::size_t>(idx)]);
        CHECK(pol.off_manifold_queries() == 0);
    }

    // A valid history longer than the expanded table falls back to the first
    // feasible action and is counted.
    {
        const std::size_t n = pol.stage_policies().size();
        std::vector<StateId> states(n + 1, 0);
        std::vector<ActionId> actions(n, 0);
        const ActionId got = pol.action_at(states, actions);
        CHECK(got == m.feasible(0).front());
        CHECK(pol.off_manifold_queries() == 1);
    }
}

TEST_CASE("infinite-horizon preconditions are enforced") {
    FiniteMdp m = constant_cost_pair({1.5}, {1.0}, {2.0});
    UtilitySpec u = UtilitySpec::sum_of_exponentials({{1.0, 1.0}});
    DiscountSpec half = DiscountSpec::of(Vec{0.5}, 1);

    CHECK_THROWS_AS(solve_infinite(m, u, DiscountSpec::none(), 0, 1e-6), ValidationError);
    CHECK_THROWS_AS(solve_infinite(m, u, half, 0, 0.0), ValidationError);
    CHECK_THROWS_AS(solve_infinite(m, u, half, 0, -1.0), ValidationError);
    CHECK_THROWS_AS(DiscountSpec::of(Vec{1.0}, 1), ValidationError);

    UtilitySpec two = UtilitySpec::sum_of_exponentials({{1.0, 1.0}, {1.0, 1.0}});
    CHECK_THROWS_AS(solve_infinite(m, two, half, 0, 1e-6), ValidationError);
    CHECK_THROWS_AS(solve_infinite(m, u, DiscountSpec::of(Vec{0.5, 0.5}, 2), 0, 1e-6),
                    ValidationError);

    // A zero cost floor breaks the positive-tail argument.
    std::vector<std::vector<std::vector<Transition>>> rows(1);
    rows[0] = {{{0, 1.0, {0.0}}}};
    FiniteMdp zero({"A"}, {"u"}, {{0}}, std::move(rows), {{"c1", 0.0, 1.0}}, true);
    try {
        solve_infinite(zero, u, half, 0, 1e-6);
        FAIL("zero cost floor must be rejected");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("finite-horizon only") != std::string::npos);
    }

    SolveOptions capped;
    capped.max_iterations = 3;
    try {
        solve_infinite(m, u, half, 0, 1e-12, capped);
        FAIL("three iterations cannot reach 1e-12");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("no convergence") != std::string::npos);
    }
}

TEST_CASE("certificate tables serialize one row per iteration") {
    FiniteMdp m = constant_cost_pair({1.5}, {1.0}, {2.0});
    UtilitySpec u = UtilitySpec::sum_of_exponentials({{1.0, 1.0}});
    auto res = solve_infinite(m, u, DiscountSpec::of(Vec{0.5}, 1), 0, 1e-4);
    const ConvergenceCertificate& c = res.certificate;

    const std::string csv = certificate_csv(c);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t nl = csv.find('\n', pos);
        REQUIRE(nl != std::string::npos);
        lines.push_back(csv.substr(pos, nl - pos));
        pos = nl + 1;
    }
    REQUIRE(lines.size() == c.lower_history.size() + 1);
    CHECK(lines[0] == "iteration,lower,upper,useed,frontier_gap,residual");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        CHECK(std::count(lines[i].begin(), lines[i].end(), ',') == 5);
        CHECK(lines[i].substr(0, lines[i].find(',')) == std::to_string(i));
    }
    // No residual is defined before the second iteration.
    CHECK(lines[1].back() == ',');
    CHECK(lines.back().back() != ',');
}
