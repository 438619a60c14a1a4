#include "morsdp/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "morsdp/errors.hpp"

namespace morsdp {

ExprPtr make_number(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Number;
    n->number = v;
    return n;
}

ExprPtr make_var(int index) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Var;
    n->var = index;
    return n;
}

ExprPtr make_unary(ExprNode::Kind k, ExprPtr child) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->lhs = std::move(child);
    return n;
}

ExprPtr make_binary(ExprNode::Kind k, ExprPtr lhs, ExprPtr rhs) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

namespace {

struct Token {
    enum class Kind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };
    Kind kind;
    double num = 0.0;
    std::string text;
    int pos = 0;
};

[[noreturn]] void fail_at(const std::string& what, int pos) {
    throw ParseError("utility expression: " + what + " at position " + std::to_string(pos));
}

std::vector<Token> lex(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        int pos = static_cast<int>(i);
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s.c_str() + i;
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            if (end == begin) fail_at("malformed number", pos);
            out.push_back({Token::Kind::Number, v,
                           std::string(begin, static_cast<std::size_t>(end - begin)), pos});
            i += static_cast<std::size_t>(end - begin);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_'))
                ++j;
            out.push_back({Token::Kind::Ident, 0.0, s.substr(i, j - i), pos});
            i = j;
            continue;
        }
        Token::Kind k;
        switch (c) {
            case '+': k = Token::Kind::Plus; break;
            case '-': k = Token::Kind::Minus; break;
            case '*': k = Token::Kind::Star; break;
            case '/': k = Token::Kind::Slash; break;
            case '^': k = Token::Kind::Caret; break;
            case '(': k = Token::Kind::LParen; break;
            case ')': k = Token::Kind::RParen; break;
            default: fail_at(std::string("unexpected character '") + c + "'", pos);
        }
        out.push_back({k, 0.0, std::string(1, c), pos});
        ++i;
    }
    out.push_back({Token::Kind::End, 0.0, "", static_cast<int>(s.size())});
    return out;
}

class Parser {
public:
    Parser(std::vector<Token> toks, int arity) : toks_(std::move(toks)), arity_(arity) {}

    ExprPtr run() {
        ExprPtr e = expr();
        if (cur().kind != Token::Kind::End)
            fail_at("trailing input '" + cur().text + "'", cur().pos);
        return e;
    }

private:
    const Token& cur() const { return toks_[i_]; }
    void advance() { ++i_; }

    bool accept(Token::Kind k) {
        if (cur().kind != k) return false;
        advance();
        return true;
    }

    ExprPtr expr() {
        ExprPtr e = term();
        for (;;) {
            if (accept(Token::Kind::Plus))
                e = make_binary(ExprNode::Kind::Add, e, term());
            else if (accept(Token::Kind::Minus))
                e = make_binary(ExprNode::Kind::Sub, e, term());
            else
                return e;
        }
    }

    ExprPtr term() {
        ExprPtr e = unary();
        for (;;) {
            if (accept(Token::Kind::Star))
                e = make_binary(ExprNode::Kind::Mul, e, unary());
            else if (accept(Token::Kind::Slash))
                e = make_binary(ExprNode::Kind::Div, e, unary());
            else
                return e;
        }
    }

    ExprPtr unary() {
        if (accept(Token::Kind::Minus)) {
            ExprPtr e = unary();
            // Fold a negated literal so print/parse round-trips structurally.
            if (e->kind == ExprNode::Kind::Number) return make_number(-e->number);
            return make_unary(ExprNode::Kind::Neg, e);
        }
        return power();
    }

    ExprPtr power() {
        ExprPtr base = primary();
        if (accept(Token::Kind::Caret)) return make_binary(ExprNode::Kind::Pow, base, unary());
        return base;
    }

    ExprPtr primary() {
        const Token& t = cur();
        switch (t.kind) {
            case Token::Kind::Number:
                advance();
                return make_number(t.num);
            case Token::Kind::Ident: {
                advance();
                if (t.text == "exp" || t.text == "log") {
                    if (!accept(Token::Kind::LParen))
                        fail_at("expected '(' after " + t.text, cur().pos);
                    ExprPtr arg = expr();
                    if (!accept(Token::Kind::RParen)) fail_at("expected ')'", cur().pos);
                    return make_unary(
                        t.text == "exp" ? ExprNode::Kind::Exp : ExprNode::Kind::Log, arg);
                }
                if (t.text.size() >= 2 && t.text[0] == 'd') {
                    bool digits = true;
                    for (std::size_t k = 1; k < t.text.size(); ++k)
                        if (!std::isdigit(static_cast<unsigned char>(t.text[k]))) digits = false;
                    if (digits) {
                        int idx = std::atoi(t.text.c_str() + 1);
                        if (idx < 1 || idx > arity_)
                            fail_at("variable " + t.text + " out of range (arity " +
                                        std::to_string(arity_) + ")",
                                    t.pos);
                        return make_var(idx - 1);
                    }
                }
                fail_at("unknown identifier '" + t.text + "'", t.pos);
            }
            case Token::Kind::LParen: {
                advance();
                ExprPtr e = expr();
                if (!accept(Token::Kind::RParen)) fail_at("expected ')'", cur().pos);
                return e;
            }
            default:
                fail_at("unexpected token '" + t.text + "'", t.pos);
        }
    }

    std::vector<Token> toks_;
    int arity_;
    std::size_t i_ = 0;
};

// Precedence levels for the printer; higher binds tighter. A negative
// literal prints with a leading minus, so it parenthesizes like a negation.
int prec(const ExprNode& e) {
    switch (e.kind) {
        case ExprNode::Kind::Add:
        case ExprNode::Kind::Sub: return 1;
        case ExprNode::Kind::Mul:
        case ExprNode::Kind::Div: return 2;
        case ExprNode::Kind::Neg: return 3;
        case ExprNode::Kind::Pow: return 4;
        case ExprNode::Kind::Number: return e.number < 0.0 ? 3 : 5;
        default: return 5;
    }
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

void print_rec(const ExprNode& e, std::string& out) {
    auto child = [&out](const ExprNode& c, bool parens) {
        if (parens) out.push_back('(');
        print_rec(c, out);
        if (parens) out.push_back(')');
    };
    switch (e.kind) {
        case ExprNode::Kind::Number:
            out += format_double(e.number);
            return;
        case ExprNode::Kind::Var:
            out += "d" + std::to_string(e.var + 1);
            return;
        case ExprNode::Kind::Neg:
            out.push_back('-');
            child(*e.lhs, prec(*e.lhs) < 3);
            return;
        case ExprNode::Kind::Exp:
        case ExprNode::Kind::Log:
            out += e.kind == ExprNode::Kind::Exp ? "exp(" : "log(";
            print_rec(*e.lhs, out);
            out.push_back(')');
            return;
        case ExprNode::Kind::Pow:
            // right-associative: parenthesize an equal-precedence left child
            child(*e.lhs, prec(*e.lhs) <= 4);
            out.push_back('^');
            child(*e.rhs, prec(*e.rhs) < 4);
            return;
        default: {
            int p = prec(e);
            const char* op = e.kind == ExprNode::Kind::Add   ? "+"
                             : e.kind == ExprNode::Kind::Sub ? "-"
                             : e.kind == ExprNode::Kind::Mul ? "*"
                                                             : "/";
            child(*e.lhs, prec(*e.lhs) < p);
            out += op;
            // left-associative: parenthesize an equal-precedence right child
            child(*e.rhs, prec(*e.rhs) <= p);
            return;
        }
    }
}

}  // namespace

ExprPtr parse_utility_expr(const std::string& src, int arity) {
    if (arity < 1) throw ValidationError("utility expression arity must be at least 1");
    return Parser(lex(src), arity).run();
}

std::string print_expr(const ExprNode& e) {
    std::string out;
    print_rec(e, out);
    return out;
}

double eval_expr(const ExprNode& e, std::span<const double> d) {
    double v;
    switch (e.kind) {
        case ExprNode::Kind::Number: return e.number;
        case ExprNode::Kind::Var:
            if (e.var < 0 || static_cast<std::size_t>(e.var) >= d.size())
                throw DomainError("utility expression: variable index out of range");
            return d[static_cast<std::size_t>(e.var)];
        case ExprNode::Kind::Neg: return -eval_expr(*e.lhs, d);
        case ExprNode::Kind::Exp: return std::exp(eval_expr(*e.lhs, d));
        case ExprNode::Kind::Log: {
            double a = eval_expr(*e.lhs, d);
            if (!(a > 0.0)) throw DomainError("utility expression: log of non-positive value");
            return std::log(a);
        }
        case ExprNode::Kind::Add: v = eval_expr(*e.lhs, d) + eval_expr(*e.rhs, d); break;
        case ExprNode::Kind::Sub: v = eval_expr(*e.lhs, d) - eval_expr(*e.rhs, d); break;
        case ExprNode::Kind::Mul: v = eval_expr(*e.lhs, d) * eval_expr(*e.rhs, d); break;
        case ExprNode::Kind::Div: v = eval_expr(*e.lhs, d) / eval_expr(*e.rhs, d); break;
        case ExprNode::Kind::Pow: v = std::pow(eval_expr(*e.lhs, d), eval_expr(*e.rhs, d)); break;
        default: throw NumericError("utility expression: corrupt node");
    }
    if (std::isnan(v)) throw DomainError("utility expression: evaluation produced NaN");
    return v;
}

bool expr_equal(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ExprNode::Kind::Number: return a.number == b.number;
        case ExprNode::Kind::Var: return a.var == b.var;
        case ExprNode::Kind::Neg:
        case ExprNode::Kind::Exp:
        case ExprNode::Kind::Log: return expr_equal(*a.lhs, *b.lhs);
        default: return expr_equal(*a.lhs, *b.lhs) && expr_equal(*a.rhs, *b.rhs);
    }
}

}  // namespace morsdp
