#include "refctl/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "refctl/errors.hpp"

namespace refctl {

namespace detail {

enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sqrt, Sin, Cos, Tanh, Cosh, Sinh };

struct ExprNode {
    Op op;
    double value = 0.0;
    std::shared_ptr<const ExprNode> a, b;
};

}  // namespace detail

namespace {

using detail::ExprNode;
using detail::Op;
using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_const(double v) { return std::make_shared<const ExprNode>(ExprNode{Op::Const, v, nullptr, nullptr}); }
NodePtr make_var() { return std::make_shared<const ExprNode>(ExprNode{Op::Var, 0.0, nullptr, nullptr}); }

bool is_const(const NodePtr& n) { return n->op == Op::Const; }
bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

double apply_unary(Op op, double v) {
    switch (op) {
        case Op::Neg: return -v;
        case Op::Exp: return std::exp(v);
        case Op::Log: return std::log(v);
        case Op::Sqrt: return std::sqrt(v);
        case Op::Sin: return std::sin(v);
        case Op::Cos: return std::cos(v);
        case Op::Tanh: return std::tanh(v);
        case Op::Cosh: return std::cosh(v);
        case Op::Sinh: return std::sinh(v);
        default: break;
    }
    return std::nan("");
}

double apply_binary(Op op, double u, double v) {
    switch (op) {
        case Op::Add: return u + v;
        case Op::Sub: return u - v;
        case Op::Mul: return u * v;
        case Op::Div: return u / v;
        case Op::Pow: return std::pow(u, v);
        default: break;
    }
    return std::nan("");
}

// Constructors with constant folding and the usual 0/1 identities.
NodePtr unary(Op op, NodePtr a) {
    if (is_const(a)) return make_const(apply_unary(op, a->value));
    if (op == Op::Neg && a->op == Op::Neg) return a->a;
    return std::make_shared<const ExprNode>(ExprNode{op, 0.0, std::move(a), nullptr});
}

NodePtr binary(Op op, NodePtr a, NodePtr b) {
    if (is_const(a) && is_const(b)) return make_const(apply_binary(op, a->value, b->value));
    switch (op) {
        case Op::Add:
            if (is_const(a, 0.0)) return b;
            if (is_const(b, 0.0)) return a;
            break;
        case Op::Sub:
            if (is_const(b, 0.0)) return a;
            if (is_const(a, 0.0)) return unary(Op::Neg, b);
            break;
        case Op::Mul:
            if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
            if (is_const(a, 1.0)) return b;
            if (is_const(b, 1.0)) return a;
            if (is_const(a, -1.0)) return unary(Op::Neg, b);
            if (is_const(b, -1.0)) return unary(Op::Neg, a);
            break;
        case Op::Div:
            if (is_const(a, 0.0)) return make_const(0.0);
            if (is_const(b, 1.0)) return a;
            break;
        case Op::Pow:
            if (is_const(b, 0.0)) return make_const(1.0);
            if (is_const(b, 1.0)) return a;
            break;
        default: break;
    }
    return std::make_shared<const ExprNode>(ExprNode{op, 0.0, std::move(a), std::move(b)});
}

double eval(const ExprNode& n, double x) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return x;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow: return apply_binary(n.op, eval(*n.a, x), eval(*n.b, x));
        default: return apply_unary(n.op, eval(*n.a, x));
    }
}

NodePtr diff(const NodePtr& n) {
    const NodePtr& u = n->a;
    const NodePtr& v = n->b;
    switch (n->op) {
        case Op::Const: return make_const(0.0);
        case Op::Var: return make_const(1.0);
        case Op::Add: return binary(Op::Add, diff(u), diff(v));
        case Op::Sub: return binary(Op::Sub, diff(u), diff(v));
        case Op::Neg: return unary(Op::Neg, diff(u));
        case Op::Mul: return binary(Op::Add, binary(Op::Mul, diff(u), v), binary(Op::Mul, u, diff(v)));
        case Op::Div:
            // (u'v - uv') / v^2
            return binary(Op::Div, binary(Op::Sub, binary(Op::Mul, diff(u), v), binary(Op::Mul, u, diff(v))),
                          binary(Op::Mul, v, v));
        case Op::Pow: {
            if (is_const(v)) {
                const double c = v->value;
                return binary(Op::Mul, binary(Op::Mul, make_const(c), binary(Op::Pow, u, make_const(c - 1.0))),
                              diff(u));
            }
            // u^v (v' log u + v u'/u)
            NodePtr inner = binary(Op::Add, binary(Op::Mul, diff(v), unary(Op::Log, u)),
                                   binary(Op::Div, binary(Op::Mul, v, diff(u)), u));
            return binary(Op::Mul, n, inner);
        }
        case Op::Exp: return binary(Op::Mul, n, diff(u));
        case Op::Log: return binary(Op::Div, diff(u), u);
        case Op::Sqrt: return binary(Op::Div, diff(u), binary(Op::Mul, make_const(2.0), n));
        case Op::Sin: return binary(Op::Mul, unary(Op::Cos, u), diff(u));
        case Op::Cos: return unary(Op::Neg, binary(Op::Mul, unary(Op::Sin, u), diff(u)));
        case Op::Tanh:
            return binary(Op::Mul, binary(Op::Sub, make_const(1.0), binary(Op::Mul, n, n)), diff(u));
        case Op::Cosh: return binary(Op::Mul, unary(Op::Sinh, u), diff(u));
        case Op::Sinh: return binary(Op::Mul, unary(Op::Cosh, u), diff(u));
    }
    return make_const(std::nan(""));
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Tanh: return "tanh";
        case Op::Cosh: return "cosh";
        case Op::Sinh: return "sinh";
        default: return "?";
    }
}

void print(const ExprNode& n, std::ostringstream& os) {
    switch (n.op) {
        case Op::Const: {
            os.precision(17);
            os << n.value;
            return;
        }
        case Op::Var: os << 'x'; return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Pow: {
            static const char sym[] = {'+', '-', '*', '/', '^'};
            const int idx = static_cast<int>(n.op) - static_cast<int>(Op::Add);
            os << '(';
            print(*n.a, os);
            os << ' ' << sym[idx] << ' ';
            print(*n.b, os);
            os << ')';
            return;
        }
        case Op::Neg:
            os << "(-";
            print(*n.a, os);
            os << ')';
            return;
        default:
            os << op_name(n.op) << '(';
            print(*n.a, os);
            os << ')';
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw InputError("expression \"" + std::string(s_) + "\": " + msg + " at offset " + std::to_string(pos_));
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = binary(Op::Add, lhs, term());
            else if (accept('-')) lhs = binary(Op::Sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        for (;;) {
            if (accept('*')) lhs = binary(Op::Mul, lhs, factor());
            else if (accept('/')) lhs = binary(Op::Div, lhs, factor());
            else return lhs;
        }
    }

    // Unary minus binds looser than '^', so -x^2 = -(x^2).
    NodePtr factor() {
        if (accept('-')) return unary(Op::Neg, factor());
        if (accept('+')) return factor();
        NodePtr base = primary();
        if (accept('^')) return binary(Op::Pow, base, factor());
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (accept('(')) {
            NodePtr e = expr();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        const std::string rest(s_.substr(pos_));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(rest, &used);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        pos_ += used;
        return make_const(v);
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string name(s_.substr(start, pos_ - start));
        if (name == "x") return make_var();
        if (name == "pi") return make_const(std::numbers::pi);
        if (name == "e") return make_const(std::numbers::e);
        static const std::pair<const char*, Op> funcs[] = {{"exp", Op::Exp},   {"log", Op::Log},   {"sqrt", Op::Sqrt},
                                                           {"sin", Op::Sin},   {"cos", Op::Cos},   {"tanh", Op::Tanh},
                                                           {"cosh", Op::Cosh}, {"sinh", Op::Sinh}};
        for (const auto& [fname, op] : funcs) {
            if (name == fname) {
                if (!accept('(')) fail("expected '(' after " + name);
                NodePtr arg = expr();
                if (!accept(')')) fail("expected ')'");
                return unary(op, arg);
            }
        }
        pos_ = start;
        fail("unknown identifier '" + name + "'");
    }
};

}  // namespace

Expression Expression::parse(std::string_view text) { return Expression(Parser(text).parse()); }
Expression Expression::constant(double c) { return Expression(make_const(c)); }
Expression Expression::variable() { return Expression(make_var()); }

double Expression::operator()(double x) const { return eval(*node_, x); }
Expression Expression::derivative() const { return Expression(diff(node_)); }
bool Expression::is_constant() const { return node_->op == Op::Const; }
double Expression::constant_value() const { return node_->value; }

std::string Expression::str() const {
    std::ostringstream os;
    print(*node_, os);
    return os.str();
}

// ---------------------------------------------------------------------------

SmoothFunction::SmoothFunction(Fn f, Fn d1, Fn d2, bool fd, std::optional<Affine> aff, std::string description)
    : f_(std::move(f)),
      d1_(std::move(d1)),
      d2_(std::move(d2)),
      finite_differences_(fd),
      affine_(aff),
      description_(std::move(description)) {}

SmoothFunction SmoothFunction::parse(std::string_view text) { return from_expression(Expression::parse(text)); }

SmoothFunction SmoothFunction::from_expression(const Expression& e) {
    const Expression e1 = e.derivative();
    const Expression e2 = e1.derivative();
    std::optional<Affine> aff;
    if (e1.is_constant()) aff = Affine{e(0.0), e1.constant_value()};
    return SmoothFunction([e](double x) { return e(x); }, [e1](double x) { return e1(x); },
                          [e2](double x) { return e2(x); }, false, aff, e.str());
}

SmoothFunction SmoothFunction::constant(double c) {
    std::ostringstream os;
    os.precision(17);
    os << c;
    return SmoothFunction([c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; }, false,
                          Affine{c, 0.0}, os.str());
}

SmoothFunction SmoothFunction::affine(double intercept, double slope) {
    std::ostringstream os;
    os.precision(17);
    os << intercept << " + " << slope << "*x";
    return SmoothFunction([=](double x) { return intercept + slope * x; }, [=](double) { return slope; },
                          [](double) { return 0.0; }, false, Affine{intercept, slope}, os.str());
}

SmoothFunction SmoothFunction::from_callables(Fn f, Fn d1, Fn d2, std::string description) {
    return SmoothFunction(std::move(f), std::move(d1), std::move(d2), false, std::nullopt, std::move(description));
}

SmoothFunction SmoothFunction::from_callable(Fn f, std::string description) {
    // Central differences; the second derivative uses a larger step to keep
    // roundoff (which scales like eps/h^2) in check.
    auto d1 = [f](double x) {
        const double h = std::max(1e-6, 1e-6 * std::abs(x));
        return (f(x + h) - f(x - h)) / (2.0 * h);
    };
    auto d2 = [f](double x) {
        const double h = std::max(1e-4, 1e-4 * std::abs(x));
        return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    };
    return SmoothFunction(std::move(f), std::move(d1), std::move(d2), true, std::nullopt, std::move(description));
}

SmoothFunction SmoothFunction::scaled(double c) const {
    std::optional<Affine> aff;
    if (affine_) aff = Affine{c * affine_->intercept, c * affine_->slope};
    std::ostringstream os;
    os.precision(17);
    os << c << "*(" << description_ << ")";
    return SmoothFunction([c, f = f_](double x) { return c * f(x); }, [c, f = d1_](double x) { return c * f(x); },
                          [c, f = d2_](double x) { return c * f(x); }, finite_differences_, aff, os.str());
}

}  // namespace refctl
