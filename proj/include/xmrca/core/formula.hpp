#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xmrca {

// Arithmetic over metric names used to define derived metrics, e.g.
// "conversions / views". Grammar: + - * / ^ (right-associative), unary minus,
// parentheses, decimal literals, and the functions log, exp, sin, sqrt.
enum class FormulaOp {
  kNumber,
  kVariable,
  kNegate,
  kAdd,
  kSubtract,
  kMultiply,
  kDivide,
  kPower,
  kLog,
  kExp,
  kSin,
  kSqrt,
};

struct FormulaNode {
  FormulaOp op = FormulaOp::kNumber;
  double number = 0.0;
  std::string name;
  std::vector<std::shared_ptr<const FormulaNode>> args;
};

using FormulaPtr = std::shared_ptr<const FormulaNode>;
using Bindings = std::map<std::string, double, std::less<>>;

// Throws FormulaParseError with the offending character offset.
FormulaPtr parse_formula(std::string_view text);

// Fully parenthesised text; parse_formula(print_formula(x)) is structurally
// equal to x.
std::string print_formula(const FormulaNode& node);

bool same_formula(const FormulaNode& a, const FormulaNode& b);

// Sorted, de-duplicated identifiers referenced by the expression.
std::vector<std::string> formula_variables(const FormulaNode& node);

// Domain failures (division by zero, log of a non-positive value, sqrt of a
// negative value, non-finite results) throw Error{kFormulaDomain}; unbound
// names throw Error{kFormulaUnbound}.
double evaluate_formula(const FormulaNode& node, const Bindings& bindings);
double evaluate_formula(std::string_view text, const Bindings& bindings);

// Postfix program with variables resolved to slot indices, for evaluating the
// same formula at many tree nodes.
class CompiledFormula {
 public:
  using Resolver = std::function<std::optional<std::size_t>(std::string_view)>;

  CompiledFormula(const FormulaNode& root, const Resolver& resolve);

  double evaluate(std::span<const double> slots) const;

 private:
  struct Instruction {
    FormulaOp op;
    double number;
    std::size_t slot;
  };

  std::vector<Instruction> program_;
  std::size_t max_stack_ = 0;
};

}  // namespace xmrca
