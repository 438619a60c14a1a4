#pragma once

#include <span>
#include <string>
#include <vector>

#include "morsdp/expr.hpp"
#include "morsdp/types.hpp"

namespace morsdp {

// One exponential term w * sign(rate) * exp(rate * d_i); `rate` is the risk
// parameter (positive: risk-seeking in the minimized cost, negative:
// risk-averse). Weight must be positive, rate non-zero.
struct ExpTerm {
    double weight;
    double rate;
};

// Componentwise-nondecreasing terminal utility over accumulated cost vectors.
// Two forms: a sum of exponentials (term i reads coordinate i, so arity ==
// number of terms) or a parsed arithmetic expression over d1..dk.
class UtilitySpec {
public:
    static UtilitySpec sum_of_exponentials(std::vector<ExpTerm> terms);
    static UtilitySpec expression(ExprPtr ast, int arity, std::string source = "");

    int arity() const { return arity_; }
    bool is_sum_exp() const { return ast_ == nullptr; }
    const std::vector<ExpTerm>& terms() const { return terms_; }
    const ExprNode& ast() const { return *ast_; }
    const std::string& source() const { return source_; }

    double evaluate(std::span<const double> d) const;

private:
    UtilitySpec() = default;

    std::vector<ExpTerm> terms_;
    ExprPtr ast_;
    std::string source_;
    int arity_ = 0;
};

double eval_utility(const UtilitySpec& u, std::span<const double> d);

// Numeric monotonicity probe for expression utilities: samples a grid on the
// box [0, box_upper_i] per coordinate and rejects (ValidationError) if any
// forward difference is negative beyond rounding slack, or if evaluation is
// not total on the box. Sum-of-exponentials utilities are monotone by
// construction and pass without sampling.
void validate_monotone(const UtilitySpec& u, std::span<const double> box_upper);

}  // namespace morsdp
