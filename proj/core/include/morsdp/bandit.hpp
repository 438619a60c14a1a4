#pragma once

#include "morsdp/model.hpp"
#include "morsdp/utility.hpp"

namespace morsdp {

// Two-armed benchmark chain: both arm indicators resample uniformly and
// independently each step, the action a in [0, 1] is the fraction staked on
// the gold arm, and the stage cost is (a * gold', (1 - a) * silver') on the
// successor indicators. Terminal utility gold^2 + mu * silver. Admits a
// closed-form optimum for 0 < mu <= 2, used to cross-check the solver.
struct BanditInstance {
    FiniteMdp model;
    UtilitySpec utility;
    double mu;
    int grid_points;
    StateId start;  // state g0s0
};

// Discretizes the action interval to grid_points evenly spaced stakes. The
// closed form is attained on the grid whenever mu/2 is a grid point (the
// optimal trajectory only mixes stakes 0 and mu/2).
BanditInstance make_bandit(double mu, int grid_points = 5);

// Optimal cost-to-go with `horizon` pulls left, accumulated gold g and
// silver s. Piecewise quadratic in g with the branch point at mu/2.
double bandit_analytic_value(int horizon, double gold, double silver, double mu);

// Optimal stake as a function of accumulated gold: (mu/2 - g) clipped at 0.
double bandit_analytic_action(double gold, double mu);

}  // namespace morsdp
