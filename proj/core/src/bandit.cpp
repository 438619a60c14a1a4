#include "morsdp/bandit.hpp"

#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "morsdp/errors.hpp"
#include "morsdp/expr.hpp"

namespace morsdp {

namespace {

void check_mu(double mu) {
    if (!(mu > 0.0) || !(mu <= 2.0) || !std::isfinite(mu))
        throw ValidationError("mu must lie in (0, 2]: outside that range the optimal stake "
                              "leaves the unit interval");
}

std::string shortest(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

}  // namespace

BanditInstance make_bandit(double mu, int grid_points) {
    check_mu(mu);
    if (grid_points < 2) throw ValidationError("stake grid needs at least 2 points");

    // State index 2*g + s for indicator pair (g, s).
    std::vector<std::string> states{"g0s0", "g0s1", "g1s0", "g1s1"};

    std::vector<std::string> actions;
    std::vector<double> stakes;
    actions.reserve(static_cast<std::size_t>(grid_points));
    stakes.reserve(static_cast<std::size_t>(grid_points));
    for (int k = 0; k < grid_points; ++k) {
        const double a = static_cast<double>(k) / (grid_points - 1);
        stakes.push_back(a);
        actions.push_back(shortest(a));
    }

    std::vector<ActionId> all(static_cast<std::size_t>(grid_points));
    for (int k = 0; k < grid_points; ++k) all[static_cast<std::size_t>(k)] = k;
    std::vector<std::vector<ActionId>> feasible(4, all);

    std::vector<std::vector<std::vector<Transition>>> rows(
        4, std::vector<std::vector<Transition>>(static_cast<std::size_t>(grid_points)));
    for (StateId x = 0; x < 4; ++x)
        for (int k = 0; k < grid_points; ++k) {
            auto& row = rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(k)];
            row.reserve(4);
            const double a = stakes[static_cast<std::size_t>(k)];
            for (StateId nx = 0; nx < 4; ++nx) {
                const double gold = (nx & 2) ? 1.0 : 0.0;
                const double silver = (nx & 1) ? 1.0 : 0.0;
                row.push_back(Transition{nx, 0.25, Vec{a * gold, (1.0 - a) * silver}});
            }
        }

    std::vector<CostDecl> costs{{"gold", 0.0, 1.0}, {"silver", 0.0, 1.0}};
    FiniteMdp model(std::move(states), std::move(actions), std::move(feasible), std::move(rows),
                    std::move(costs), /*allow_zero_cost=*/true);

    const std::string src = "d1^2+" + shortest(mu) + "*d2";
    UtilitySpec u = UtilitySpec::expression(parse_utility_expr(src, 2), 2, src);

    return BanditInstance{std::move(model), std::move(u), mu, grid_points, 0};
}

double bandit_analytic_action(double gold, double mu) {
    check_mu(mu);
    if (!(gold >= 0.0)) throw ValidationError("accumulated gold must be non-negative");
    return std::max(0.0, mu / 2.0 - gold);
}

double bandit_analytic_value(int horizon, double gold, double silver, double mu) {
    check_mu(mu);
    if (horizon < 0) throw ValidationError("horizon must be non-negative");
    if (!(gold >= 0.0) || !(silver >= 0.0))
        throw ValidationError("accumulated costs must be non-negative");

    if (gold >= mu / 2.0) return gold * gold + mu * silver + horizon * mu / 2.0;

    const double pow2 = std::ldexp(1.0, -horizon);  // 2^-horizon
    const double c1 = pow2;
    const double c2 = 1.0 - pow2;
    const double c3 = pow2 / 4.0 - 0.25;
    const double c4 = static_cast<double>(horizon) / 2.0;
    return c1 * gold * gold + c2 * mu * gold + c3 * mu * mu + mu * silver + c4 * mu;
}

}  // namespace morsdp
