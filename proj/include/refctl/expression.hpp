#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace refctl {

namespace detail {
struct ExprNode;
}

/// A parsed scalar expression in the single variable `x`.
///
/// Grammar: numbers, `x`, the constants `pi` and `e`, binary `+ - * / ^`,
/// unary minus, parentheses and the functions exp, log, sqrt, sin, cos,
/// tanh, cosh, sinh. Derivatives are symbolic and simplified by constant
/// folding, so `derivative().is_constant()` detects affine expressions.
class Expression {
public:
    static Expression parse(std::string_view text);
    static Expression constant(double c);
    static Expression variable();

    double operator()(double x) const;
    Expression derivative() const;

    bool is_constant() const;
    /// Value of a constant expression; only meaningful when is_constant().
    double constant_value() const;
    std::string str() const;

    const std::shared_ptr<const detail::ExprNode>& node() const { return node_; }
    explicit Expression(std::shared_ptr<const detail::ExprNode> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<const detail::ExprNode> node_;
};

/// Coefficients of an affine function a + b*x.
struct Affine {
    double intercept = 0.0;
    double slope = 0.0;
};

/// A real function with first and second derivatives.
///
/// Derivatives are analytic when the function comes from an Expression or
/// from explicit callables; `from_callable` falls back to central finite
/// differences and reports it through `uses_finite_differences()`.
class SmoothFunction {
public:
    using Fn = std::function<double(double)>;

    SmoothFunction() : SmoothFunction(constant(0.0)) {}

    static SmoothFunction parse(std::string_view text);
    static SmoothFunction from_expression(const Expression& e);
    static SmoothFunction constant(double c);
    static SmoothFunction affine(double intercept, double slope);
    static SmoothFunction from_callables(Fn f, Fn d1, Fn d2, std::string description = "callable");
    static SmoothFunction from_callable(Fn f, std::string description = "callable");

    double operator()(double x) const { return f_(x); }
    double value(double x) const { return f_(x); }
    double d1(double x) const { return d1_(x); }
    double d2(double x) const { return d2_(x); }

    bool uses_finite_differences() const { return finite_differences_; }
    /// Present when the function is known to be affine.
    const std::optional<Affine>& affine_form() const { return affine_; }
    const std::string& description() const { return description_; }

    /// c * f, keeping the affine form and derivative provenance.
    SmoothFunction scaled(double c) const;

private:
    SmoothFunction(Fn f, Fn d1, Fn d2, bool fd, std::optional<Affine> aff, std::string description);

    Fn f_, d1_, d2_;
    bool finite_differences_ = false;
    std::optional<Affine> affine_;
    std::string description_;
};

}  // namespace refctl
