#include "sca/expr.hpp"

#include <array>
#include <utility>

namespace sca {

namespace {

struct BuiltinInfo {
  Builtin fn;
  std::string_view name;
  int expr_arity;
};

constexpr std::array<BuiltinInfo, 10> kBuiltins = {{
    {Builtin::Min, "MIN", 2},
    {Builtin::Max, "MAX", 2},
    {Builtin::Exp, "EXP", 1},
    {Builtin::Ln, "LN", 1},
    {Builtin::Abs, "ABS", 1},
    {Builtin::Lookup, "LOOKUP", 1},
    {Builtin::Delay1, "DELAY1", 2},
    {Builtin::Delay3, "DELAY3", 2},
    {Builtin::Smth1, "SMTH1", 2},
    {Builtin::Smth3, "SMTH3", 2},
}};

const BuiltinInfo& info(Builtin b) {
  for (const auto& i : kBuiltins) {
    if (i.fn == b) return i;
  }
  throw std::logic_error("unknown builtin");
}

}  // namespace

bool is_delay_builtin(Builtin b) {
  return b == Builtin::Delay1 || b == Builtin::Delay3 || b == Builtin::Smth1 ||
         b == Builtin::Smth3;
}

int delay_order(Builtin b) {
  switch (b) {
    case Builtin::Delay1:
    case Builtin::Smth1:
      return 1;
    case Builtin::Delay3:
    case Builtin::Smth3:
      return 3;
    default:
      throw std::logic_error("not a delay builtin");
  }
}

int builtin_expr_arity(Builtin b) { return info(b).expr_arity; }

std::string_view builtin_name(Builtin b) { return info(b).name; }

std::optional<Builtin> builtin_from_name(std::string_view name) {
  for (const auto& i : kBuiltins) {
    if (i.name == name) return i.fn;
  }
  return std::nullopt;
}

ExprPtr make_number(double value) {
  return std::make_shared<const Expr>(Expr{NumberNode{value}});
}

ExprPtr make_var(std::string name) {
  return std::make_shared<const Expr>(Expr{VarNode{std::move(name)}});
}

ExprPtr make_neg(ExprPtr operand) {
  return std::make_shared<const Expr>(Expr{NegNode{std::move(operand)}});
}

ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(
      Expr{BinaryNode{op, std::move(lhs), std::move(rhs)}});
}

ExprPtr make_call(Builtin fn, std::vector<ExprPtr> args) {
  return std::make_shared<const Expr>(Expr{CallNode{fn, "", std::move(args)}});
}

ExprPtr make_lookup(std::string table, ExprPtr arg) {
  std::vector<ExprPtr> args;
  args.push_back(std::move(arg));
  return std::make_shared<const Expr>(
      Expr{CallNode{Builtin::Lookup, std::move(table), std::move(args)}});
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->node.index() != b->node.index()) return false;
  if (const auto* na = std::get_if<NumberNode>(&a->node)) {
    return na->value == std::get<NumberNode>(b->node).value;
  }
  if (const auto* va = std::get_if<VarNode>(&a->node)) {
    return va->name == std::get<VarNode>(b->node).name;
  }
  if (const auto* ga = std::get_if<NegNode>(&a->node)) {
    return expr_equal(ga->operand, std::get<NegNode>(b->node).operand);
  }
  if (const auto* ba = std::get_if<BinaryNode>(&a->node)) {
    const auto& bb = std::get<BinaryNode>(b->node);
    return ba->op == bb.op && expr_equal(ba->lhs, bb.lhs) &&
           expr_equal(ba->rhs, bb.rhs);
  }
  const auto& ca = std::get<CallNode>(a->node);
  const auto& cb = std::get<CallNode>(b->node);
  if (ca.fn != cb.fn || ca.table != cb.table ||
      ca.args.size() != cb.args.size()) {
    return false;
  }
  for (std::size_t i = 0; i < ca.args.size(); ++i) {
    if (!expr_equal(ca.args[i], cb.args[i])) return false;
  }
  return true;
}

namespace {

void collect_vars(const ExprPtr& expr, std::set<std::string>& out) {
  if (!expr) return;
  if (const auto* v = std::get_if<VarNode>(&expr->node)) {
    out.insert(v->name);
  } else if (const auto* g = std::get_if<NegNode>(&expr->node)) {
    collect_vars(g->operand, out);
  } else if (const auto* b = std::get_if<BinaryNode>(&expr->node)) {
    collect_vars(b->lhs, out);
    collect_vars(b->rhs, out);
  } else if (const auto* c = std::get_if<CallNode>(&expr->node)) {
    for (const auto& arg : c->args) collect_vars(arg, out);
  }
}

}  // namespace

std::set<std::string> free_vars(const ExprPtr& expr) {
  std::set<std::string> out;
  collect_vars(expr, out);
  return out;
}

bool contains_delay_call(const ExprPtr& expr) {
  if (!expr) return false;
  if (const auto* g = std::get_if<NegNode>(&expr->node)) {
    return contains_delay_call(g->operand);
  }
  if (const auto* b = std::get_if<BinaryNode>(&expr->node)) {
    return contains_delay_call(b->lhs) || contains_delay_call(b->rhs);
  }
  if (const auto* c = std::get_if<CallNode>(&expr->node)) {
    if (is_delay_builtin(c->fn)) return true;
    for (const auto& arg : c->args) {
      if (contains_delay_call(arg)) return true;
    }
  }
  return false;
}

}  // namespace sca
