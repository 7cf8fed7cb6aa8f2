#include "xmrca/core/formula.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "xmrca/core/error.hpp"

namespace xmrca {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  FormulaPtr parse() {
    skip_space();
    if (pos_ == text_.size()) throw FormulaParseError(pos_, "empty expression");
    auto node = parse_expr();
    skip_space();
    if (pos_ != text_.size()) throw FormulaParseError(pos_, "unexpected trailing input");
    return node;
  }

 private:
  static FormulaPtr make(FormulaOp op, std::vector<FormulaPtr> args) {
    auto node = std::make_shared<FormulaNode>();
    node->op = op;
    node->args = std::move(args);
    return node;
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  FormulaPtr parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make(FormulaOp::kAdd, {lhs, parse_term()});
      } else if (accept('-')) {
        lhs = make(FormulaOp::kSubtract, {lhs, parse_term()});
      } else {
        return lhs;
      }
    }
  }

  FormulaPtr parse_term() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(FormulaOp::kMultiply, {lhs, parse_unary()});
      } else if (accept('/')) {
        lhs = make(FormulaOp::kDivide, {lhs, parse_unary()});
      } else {
        return lhs;
      }
    }
  }

  FormulaPtr parse_unary() {
    if (accept('-')) return make(FormulaOp::kNegate, {parse_unary()});
    return parse_power();
  }

  FormulaPtr parse_power() {
    auto base = parse_primary();
    if (accept('^')) return make(FormulaOp::kPower, {base, parse_unary()});
    return base;
  }

  FormulaPtr parse_primary() {
    skip_space();
    if (pos_ == text_.size()) throw FormulaParseError(pos_, "unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = parse_expr();
      if (!accept(')')) throw FormulaParseError(pos_, "expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw FormulaParseError(pos_, std::string("unexpected character '") + c + "'");
  }

  FormulaPtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) throw FormulaParseError(start, "malformed number");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) throw FormulaParseError(pos_, "malformed exponent");
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc() || ptr != text_.data() + pos_) throw FormulaParseError(start, "malformed number");
    auto node = std::make_shared<FormulaNode>();
    node->op = FormulaOp::kNumber;
    node->number = value;
    return node;
  }

  FormulaPtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    std::string name(text_.substr(start, pos_ - start));
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      FormulaOp op;
      if (name == "log") {
        op = FormulaOp::kLog;
      } else if (name == "exp") {
        op = FormulaOp::kExp;
      } else if (name == "sin") {
        op = FormulaOp::kSin;
      } else if (name == "sqrt") {
        op = FormulaOp::kSqrt;
      } else {
        throw FormulaParseError(start, "unknown function '" + name + "'");
      }
      ++pos_;
      auto arg = parse_expr();
      if (!accept(')')) throw FormulaParseError(pos_, "expected ')' after function argument");
      return make(op, {arg});
    }
    auto node = std::make_shared<FormulaNode>();
    node->op = FormulaOp::kVariable;
    node->name = std::move(name);
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

const char* function_name(FormulaOp op) {
  switch (op) {
    case FormulaOp::kLog: return "log";
    case FormulaOp::kExp: return "exp";
    case FormulaOp::kSin: return "sin";
    case FormulaOp::kSqrt: return "sqrt";
    default: return nullptr;
  }
}

char operator_symbol(FormulaOp op) {
  switch (op) {
    case FormulaOp::kAdd: return '+';
    case FormulaOp::kSubtract: return '-';
    case FormulaOp::kMultiply: return '*';
    case FormulaOp::kDivide: return '/';
    case FormulaOp::kPower: return '^';
    default: return '?';
  }
}

[[noreturn]] void domain_error(const std::string& what) { throw Error(ErrorCode::kFormulaDomain, what); }

double apply_unary(FormulaOp op, double x) {
  switch (op) {
    case FormulaOp::kNegate: return -x;
    case FormulaOp::kLog:
      if (!(x > 0.0)) domain_error("log of non-positive value " + std::to_string(x));
      return std::log(x);
    case FormulaOp::kExp: {
      const double r = std::exp(x);
      if (!std::isfinite(r)) domain_error("exp overflow at " + std::to_string(x));
      return r;
    }
    case FormulaOp::kSin: return std::sin(x);
    case FormulaOp::kSqrt:
      if (x < 0.0) domain_error("sqrt of negative value " + std::to_string(x));
      return std::sqrt(x);
    default: return x;
  }
}

double apply_binary(FormulaOp op, double a, double b) {
  double r = 0.0;
  switch (op) {
    case FormulaOp::kAdd: r = a + b; break;
    case FormulaOp::kSubtract: r = a - b; break;
    case FormulaOp::kMultiply: r = a * b; break;
    case FormulaOp::kDivide:
      if (b == 0.0) domain_error("division by zero");
      r = a / b;
      break;
    case FormulaOp::kPower: r = std::pow(a, b); break;
    default: break;
  }
  if (!std::isfinite(r)) {
    domain_error(std::string("non-finite result of '") + operator_symbol(op) + "'");
  }
  return r;
}

void collect_variables(const FormulaNode& node, std::vector<std::string>& out) {
  if (node.op == FormulaOp::kVariable) out.push_back(node.name);
  for (const auto& arg : node.args) collect_variables(*arg, out);
}

std::string format_number(double value) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return buf.data();
}

}  // namespace

FormulaPtr parse_formula(std::string_view text) { return Parser(text).parse(); }

std::string print_formula(const FormulaNode& node) {
  switch (node.op) {
    case FormulaOp::kNumber: return format_number(node.number);
    case FormulaOp::kVariable: return node.name;
    case FormulaOp::kNegate: return "(-" + print_formula(*node.args[0]) + ")";
    case FormulaOp::kLog:
    case FormulaOp::kExp:
    case FormulaOp::kSin:
    case FormulaOp::kSqrt:
      return std::string(function_name(node.op)) + "(" + print_formula(*node.args[0]) + ")";
    default:
      return "(" + print_formula(*node.args[0]) + " " + operator_symbol(node.op) + " " +
             print_formula(*node.args[1]) + ")";
  }
}

bool same_formula(const FormulaNode& a, const FormulaNode& b) {
  if (a.op != b.op || a.args.size() != b.args.size()) return false;
  if (a.op == FormulaOp::kNumber && a.number != b.number) return false;
  if (a.op == FormulaOp::kVariable && a.name != b.name) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_formula(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

std::vector<std::string> formula_variables(const FormulaNode& node) {
  std::vector<std::string> names;
  collect_variables(node, names);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

double evaluate_formula(const FormulaNode& node, const Bindings& bindings) {
  switch (node.op) {
    case FormulaOp::kNumber: return node.number;
    case FormulaOp::kVariable: {
      auto it = bindings.find(node.name);
      if (it == bindings.end()) throw Error(ErrorCode::kFormulaUnbound, "unbound name '" + node.name + "'");
      return it->second;
    }
    case FormulaOp::kNegate:
    case FormulaOp::kLog:
    case FormulaOp::kExp:
    case FormulaOp::kSin:
    case FormulaOp::kSqrt:
      return apply_unary(node.op, evaluate_formula(*node.args[0], bindings));
    default:
      return apply_binary(node.op, evaluate_formula(*node.args[0], bindings),
                          evaluate_formula(*node.args[1], bindings));
  }
}

double evaluate_formula(std::string_view text, const Bindings& bindings) {
  return evaluate_formula(*parse_formula(text), bindings);
}

CompiledFormula::CompiledFormula(const FormulaNode& root, const Resolver& resolve) {
  std::size_t depth = 0;
  std::function<void(const FormulaNode&)> emit = [&](const FormulaNode& node) {
    for (const auto& arg : node.args) emit(*arg);
    Instruction ins{node.op, node.number, 0};
    if (node.op == FormulaOp::kVariable) {
      auto slot = resolve(node.name);
      if (!slot) throw Error(ErrorCode::kFormulaUnbound, "unbound name '" + node.name + "'");
      ins.slot = *slot;
    }
    if (node.op == FormulaOp::kNumber || node.op == FormulaOp::kVariable) {
      ++depth;
    } else if (node.args.size() == 2) {
      --depth;
    }
    max_stack_ = std::max(max_stack_, depth);
    program_.push_back(ins);
  };
  emit(root);
}

double CompiledFormula::evaluate(std::span<const double> slots) const {
  std::array<double, 64> fixed{};
  std::vector<double> heap;
  double* stack = fixed.data();
  if (max_stack_ > fixed.size()) {
    heap.resize(max_stack_);
    stack = heap.data();
  }
  std::size_t top = 0;
  for (const auto& ins : program_) {
    switch (ins.op) {
      case FormulaOp::kNumber: stack[top++] = ins.number; break;
      case FormulaOp::kVariable: stack[top++] = slots[ins.slot]; break;
      case FormulaOp::kNegate:
      case FormulaOp::kLog:
      case FormulaOp::kExp:
      case FormulaOp::kSin:
      case FormulaOp::kSqrt:
        stack[top - 1] = apply_unary(ins.op, stack[top - 1]);
        break;
      default:
        stack[top - 2] = apply_binary(ins.op, stack[top - 2], stack[top - 1]);
        --top;
        break;
    }
  }
  return stack[0];
}

}  // namespace xmrca
