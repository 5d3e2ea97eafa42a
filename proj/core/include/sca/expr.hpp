#pragma once

#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sca {

// Builtin catalogue. MIN/MAX take two arguments, EXP/LN/ABS one,
// LOOKUP takes a table name plus one argument, delay/smooth builtins take
// (input, delay-time) where the delay time must be constant-evaluable.
enum class Builtin { Min, Max, Exp, Ln, Abs, Lookup, Delay1, Delay3, Smth1, Smth3 };

bool is_delay_builtin(Builtin b);
int delay_order(Builtin b);  // 1 or 3 for delay/smooth builtins
int builtin_expr_arity(Builtin b);
std::string_view builtin_name(Builtin b);
std::optional<Builtin> builtin_from_name(std::string_view name);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct NumberNode {
  double value;
};
struct VarNode {
  std::string name;
};
struct NegNode {
  ExprPtr operand;
};
struct BinaryNode {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
// For Lookup, `table` names the table and args holds the single argument.
// For every other builtin `table` is empty.
struct CallNode {
  Builtin fn;
  std::string table;
  std::vector<ExprPtr> args;
};

// Immutable expression tree; shared freely across threads.
struct Expr {
  std::variant<NumberNode, VarNode, NegNode, BinaryNode, CallNode> node;
};

ExprPtr make_number(double value);
ExprPtr make_var(std::string name);
ExprPtr make_neg(ExprPtr operand);
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_call(Builtin fn, std::vector<ExprPtr> args);
ExprPtr make_lookup(std::string table, ExprPtr arg);

bool expr_equal(const ExprPtr& a, const ExprPtr& b);

// Identifiers of every Var node in the tree (LOOKUP table names excluded).
std::set<std::string> free_vars(const ExprPtr& expr);

// True if any DELAYn/SMTHn call appears anywhere in the tree.
bool contains_delay_call(const ExprPtr& expr);

class EvalError : public std::runtime_error {
 public:
  enum class Kind {
    UnboundVariable,
    UnknownTable,
    DivByZero,
    LnDomain,
    PowDomain,
    NonFiniteResult,
    DelayPresent,
  };

  EvalError(Kind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  Kind kind() const { return kind_; }

  // Name of the model variable under evaluation when the error surfaced,
  // filled in by callers that know it.
  std::string variable;

 private:
  Kind kind_;
};

}  // namespace sca
