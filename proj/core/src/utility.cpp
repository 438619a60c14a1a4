#include "morsdp/utility.hpp"

#include <cmath>
#include <cstddef>

#include "morsdp/errors.hpp"

namespace morsdp {

UtilitySpec UtilitySpec::sum_of_exponentials(std::vector<ExpTerm> terms) {
    if (terms.empty()) throw ValidationError("utility: at least one exponential term required");
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!(terms[i].weight > 0.0))
            throw ValidationError("utility: term " + std::to_string(i + 1) +
                                  " has non-positive weight");
        if (terms[i].rate == 0.0 || std::isnan(terms[i].rate) || std::isinf(terms[i].rate))
            throw ValidationError("utility: term " + std::to_string(i + 1) +
                                  " has invalid rate (must be finite and non-zero)");
    }
    UtilitySpec u;
    u.arity_ = static_cast<int>(terms.size());
    u.terms_ = std::move(terms);
    return u;
}

UtilitySpec UtilitySpec::expression(ExprPtr ast, int arity, std::string source) {
    if (!ast) throw ValidationError("utility: null expression");
    if (arity < 1) throw ValidationError("utility: arity must be at least 1");
    UtilitySpec u;
    u.ast_ = std::move(ast);
    u.arity_ = arity;
    u.source_ = std::move(source);
    return u;
}

double UtilitySpec::evaluate(std::span<const double> d) const {
    if (static_cast<int>(d.size()) != arity_)
        throw DomainError("utility: expected " + std::to_string(arity_) +
                          " cost coordinates, got " + std::to_string(d.size()));
    if (ast_) return eval_expr(*ast_, d);
    double v = 0.0;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        double sign = terms_[i].rate > 0.0 ? 1.0 : -1.0;
        v += terms_[i].weight * sign * std::exp(terms_[i].rate * d[i]);
    }
    return v;
}

double eval_utility(const UtilitySpec& u, std::span<const double> d) { return u.evaluate(d); }

void validate_monotone(const UtilitySpec& u, std::span<const double> box_upper) {
    if (u.is_sum_exp()) return;
    int k = u.arity();
    if (static_cast<int>(box_upper.size()) != k)
        throw ValidationError("monotonicity probe: box dimension mismatch");

    // Grid resolution chosen so the total point count stays near 4096.
    int per_dim = k == 1 ? 65 : static_cast<int>(std::floor(std::pow(4096.0, 1.0 / k)));
    if (per_dim < 3) per_dim = 3;

    std::vector<double> span(box_upper.begin(), box_upper.end());
    for (double& s : span)
        if (!(s > 0.0)) s = 1.0;

    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    std::vector<double> pt(static_cast<std::size_t>(k), 0.0);
    for (;;) {
        for (int c = 0; c < k; ++c)
            pt[static_cast<std::size_t>(c)] = span[static_cast<std::size_t>(c)] * 0.999 *
                                              idx[static_cast<std::size_t>(c)] / (per_dim - 1);
        double base;
        try {
            base = u.evaluate(pt);
        } catch (const DomainError& e) {
            throw ValidationError(std::string("utility is not total on the reachable cost box: ") +
                                  e.what());
        }
        for (int c = 0; c < k; ++c) {
            double h = span[static_cast<std::size_t>(c)] * 1e-4;
            double saved = pt[static_cast<std::size_t>(c)];
            pt[static_cast<std::size_t>(c)] = saved + h;
            double up;
            try {
                up = u.evaluate(pt);
            } catch (const DomainError& e) {
                throw ValidationError(
                    std::string("utility is not total on the reachable cost box: ") + e.what());
            }
            pt[static_cast<std::size_t>(c)] = saved;
            if (up - base < -1e-9 * (1.0 + std::fabs(base)))
                throw ValidationError(
                    "utility is not componentwise nondecreasing: decreasing in d" +
                    std::to_string(c + 1) + " near sampled point");
        }
        int c = 0;
        while (c < k && ++idx[static_cast<std::size_t>(c)] == per_dim) {
            idx[static_cast<std::size_t>(c)] = 0;
            ++c;
        }
        if (c == k) break;
    }
}

}  // namespace morsdp
