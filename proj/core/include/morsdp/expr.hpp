#pragma once

#include <memory>
#include <span>
#include <string>

#include "morsdp/types.hpp"

namespace morsdp {

// Arithmetic expression over cost-coordinate variables d1..dk, used for
// utilities given in closed form. Supported: + - * / ^ with the usual
// precedence (^ binds tightest and is right-associative), unary minus,
// exp(...) and log(...), decimal literals with optional exponent.

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Log };

    Kind kind;
    double number = 0.0;  // Kind::Number
    int var = 0;          // Kind::Var, zero-based coordinate index
    ExprPtr lhs, rhs;     // children; unary nodes use lhs only
};

ExprPtr make_number(double v);
ExprPtr make_var(int index);
ExprPtr make_unary(ExprNode::Kind k, ExprPtr child);
ExprPtr make_binary(ExprNode::Kind k, ExprPtr lhs, ExprPtr rhs);

// Parses an expression with variables d1..d<arity>. Unknown identifiers,
// out-of-range variables and syntax errors raise ParseError with the
// character position. Unary minus applied directly to a literal is folded
// into the literal, so printing and re-parsing is structure-preserving.
ExprPtr parse_utility_expr(const std::string& src, int arity);

// Prints with the minimal parenthesization that re-parses to the identical
// tree (associativity is made explicit where the grammar would regroup).
std::string print_expr(const ExprNode& e);

// Evaluates at the point d. Throws DomainError for log of a non-positive
// value and for any operation yielding NaN.
double eval_expr(const ExprNode& e, std::span<const double> d);

// Structural equality (numbers compared exactly).
bool expr_equal(const ExprNode& a, const ExprNode& b);

}  // namespace morsdp
