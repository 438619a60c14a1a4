#pragma once

#include <string>
#include <variant>

#include "morsdp/model.hpp"
#include "morsdp/pomdp.hpp"
#include "morsdp/utility.hpp"

namespace morsdp {

// A parsed model document: the model plus the objective data that travels
// with it. kind "mdp" carries a utility and an optional discount vector;
// kind "pomdp" carries its exponential terms inside the model.
struct MdpDocument {
    FiniteMdp model;
    UtilitySpec utility;
    DiscountSpec discount;
};

struct PomdpDocument {
    PomdpModel model;
};

using ModelDocument = std::variant<MdpDocument, PomdpDocument>;

// Parses and fully validates a JSON model document. Syntax errors carry the
// byte position; semantic errors name the offending key or entry. Unknown
// keys are rejected at every object level.
ModelDocument parse_model(const std::string& text);

// Canonical serialization: fixed key order, entries in model order, numbers
// printed shortest-round-trip. parse_model(print_model(doc)) reproduces a
// document with identical evaluation behavior.
std::string print_model(const MdpDocument& doc);
std::string print_model(const PomdpDocument& doc);

// Materializes the shifted information MDP reachable from theta0 within
// `horizon` steps as an mdp document. States first reached at the horizon
// depth become absorbing (a unit self-loop per action, charged the declared
// per-objective lower bound), which a path of length <= horizon never pays,
// so solving the document at that horizon reproduces solve_rspomdp's value.
// Refuses models where expansion pruned zero-likelihood observations: their
// sub-stochastic rows have no document form.
MdpDocument reduce_to_document(const PomdpModel& p, const Vec& theta0, int horizon,
                               std::size_t state_budget = 10'000'000);

}  // namespace morsdp
