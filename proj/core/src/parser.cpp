#include "sca/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace sca {

std::string ParseError::to_string() const {
  std::ostringstream os;
  os << span.line << ":" << span.column << ": expected " << expected
     << ", found " << (found.empty() ? "end of input" : "'" + found + "'");
  return os.str();
}

namespace {

enum class Tok {
  Ident,
  Number,
  LParen,
  RParen,
  LBrace,
  RBrace,
  Comma,
  Colon,
  Equals,
  Plus,
  Minus,
  Star,
  Slash,
  Caret,
  End,
  Bad,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  SourceSpan span;
};

bool is_ident_head(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
bool is_ident_tail(char c) { return is_ident_head(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Tokenizes a single line. Never throws; malformed characters become Bad
// tokens the statement parser reports.
std::vector<Token> lex_line(const std::string& line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == '#') break;  // comment to end of line
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    Token t;
    t.span = {line_no, static_cast<int>(i) + 1, 1};
    if (is_ident_head(c)) {
      std::size_t j = i;
      while (j < line.size() && is_ident_tail(line[j])) ++j;
      t.kind = Tok::Ident;
      t.text = line.substr(i, j - i);
      t.span.length = static_cast<int>(j - i);
      i = j;
    } else if (is_digit(c)) {
      std::size_t j = i;
      while (j < line.size() && is_digit(line[j])) ++j;
      if (j < line.size() && line[j] == '.') {
        ++j;
        while (j < line.size() && is_digit(line[j])) ++j;
      }
      if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
        if (k < line.size() && is_digit(line[k])) {
          while (k < line.size() && is_digit(line[k])) ++k;
          j = k;
        }
      }
      t.text = line.substr(i, j - i);
      t.span.length = static_cast<int>(j - i);
      double value = 0.0;
      auto [ptr, ec] =
          std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
      if (ec == std::errc() && ptr == t.text.data() + t.text.size() &&
          std::isfinite(value)) {
        t.kind = Tok::Number;
        t.number = value;
      } else {
        t.kind = Tok::Bad;
      }
      i = j;
    } else {
      switch (c) {
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '{': t.kind = Tok::LBrace; break;
        case '}': t.kind = Tok::RBrace; break;
        case ',': t.kind = Tok::Comma; break;
        case ':': t.kind = Tok::Colon; break;
        case '=': t.kind = Tok::Equals; break;
        case '+': t.kind = Tok::Plus; break;
        case '-': t.kind = Tok::Minus; break;
        case '*': t.kind = Tok::Star; break;
        case '/': t.kind = Tok::Slash; break;
        case '^': t.kind = Tok::Caret; break;
        default: t.kind = Tok::Bad; break;
      }
      t.text = std::string(1, c);
      ++i;
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.span = {line_no, static_cast<int>(line.size()) + 1, 1};
  out.push_back(end);
  return out;
}

const std::set<std::string> kKeywords = {
    "model", "stock", "aux", "exo", "table", "inflow", "outflow",
    "clamp", "extrapolate"};

class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens)
      : tokens_(std::move(tokens)) {}

  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }
  bool at_end() const { return tokens_[pos_].kind == Tok::End; }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

struct ExprParser {
  TokenStream& ts;
  std::optional<ParseError> error;
  int depth = 0;

  static constexpr int kMaxDepth = 256;

  struct DepthGuard {
    ExprParser& p;
    bool ok;
    explicit DepthGuard(ExprParser& p) : p(p), ok(++p.depth <= kMaxDepth) {
      if (!ok) p.fail("a less deeply nested expression");
    }
    ~DepthGuard() { --p.depth; }
  };

  void fail(const std::string& expected) {
    if (error) return;
    const Token& t = ts.peek();
    error = ParseError{t.span, expected,
                       t.kind == Tok::End ? "" : t.text};
  }

  ExprPtr parse() { return parse_add(); }

  ExprPtr parse_add() {
    DepthGuard guard(*this);
    if (!guard.ok) return nullptr;
    ExprPtr lhs = parse_mul();
    if (!lhs) return nullptr;
    while (!error) {
      Tok k = ts.peek().kind;
      if (k != Tok::Plus && k != Tok::Minus) break;
      ts.next();
      ExprPtr rhs = parse_mul();
      if (!rhs) return nullptr;
      lhs = make_binary(k == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub,
                        std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  ExprPtr parse_mul() {
    ExprPtr lhs = parse_unary();
    if (!lhs) return nullptr;
    while (!error) {
      Tok k = ts.peek().kind;
      if (k != Tok::Star && k != Tok::Slash) break;
      ts.next();
      ExprPtr rhs = parse_unary();
      if (!rhs) return nullptr;
      lhs = make_binary(k == Tok::Star ? BinaryOp::Mul : BinaryOp::Div,
                        std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  // `^` binds tighter than unary minus, so -2^2 parses as -(2^2).
  ExprPtr parse_unary() {
    if (ts.peek().kind == Tok::Minus) {
      ts.next();
      ExprPtr operand = parse_unary();
      if (!operand) return nullptr;
      return make_neg(std::move(operand));
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_primary();
    if (!base) return nullptr;
    if (ts.peek().kind == Tok::Caret) {
      ts.next();
      ExprPtr exponent = parse_unary();  // right-assoc, signed exponent ok
      if (!exponent) return nullptr;
      return make_binary(BinaryOp::Pow, std::move(base), std::move(exponent));
    }
    return base;
  }

  ExprPtr parse_primary() {
    const Token& t = ts.peek();
    if (t.kind == Tok::Number) {
      ts.next();
      return make_number(t.number);
    }
    if (t.kind == Tok::LParen) {
      ts.next();
      ExprPtr inner = parse_add();
      if (!inner) return nullptr;
      if (ts.peek().kind != Tok::RParen) {
        fail("')'");
        return nullptr;
      }
      ts.next();
      return inner;
    }
    if (t.kind == Tok::Ident) {
      Token name = ts.next();
      if (ts.peek().kind != Tok::LParen) {
        return make_var(name.text);
      }
      auto builtin = builtin_from_name(name.text);
      if (!builtin) {
        error = ParseError{name.span, "a builtin function name", name.text};
        return nullptr;
      }
      ts.next();  // '('
      if (*builtin == Builtin::Lookup) return parse_lookup_call(name);
      std::vector<ExprPtr> args;
      if (ts.peek().kind != Tok::RParen) {
        while (true) {
          ExprPtr arg = parse_add();
          if (!arg) return nullptr;
          args.push_back(std::move(arg));
          if (ts.peek().kind == Tok::Comma) {
            ts.next();
            continue;
          }
          break;
        }
      }
      if (ts.peek().kind != Tok::RParen) {
        fail("')'");
        return nullptr;
      }
      ts.next();
      int want = builtin_expr_arity(*builtin);
      if (static_cast<int>(args.size()) != want) {
        error = ParseError{name.span,
                           name.text + " with " + std::to_string(want) +
                               " argument(s)",
                           std::to_string(args.size()) + " argument(s)"};
        return nullptr;
      }
      return make_call(*builtin, std::move(args));
    }
    fail("an expression");
    return nullptr;
  }

  ExprPtr parse_lookup_call(const Token& name) {
    if (ts.peek().kind != Tok::Ident) {
      fail("a table name");
      return nullptr;
    }
    Token table = ts.next();
    if (ts.peek().kind != Tok::Comma) {
      fail("','");
      return nullptr;
    }
    ts.next();
    ExprPtr arg = parse_add();
    if (!arg) return nullptr;
    if (ts.peek().kind != Tok::RParen) {
      fail("')'");
      return nullptr;
    }
    ts.next();
    (void)name;
    return make_lookup(table.text, std::move(arg));
  }
};

struct StatementParser {
  Model model;
  std::vector<ParseError> errors;
  bool saw_model_line = false;
  std::map<std::string, SourceSpan> decl_spans;

  void fail(const Token& t, const std::string& expected) {
    errors.push_back(
        {t.span, expected, t.kind == Tok::End ? "" : t.text});
  }

  // Returns nullptr and records the error on failure.
  ExprPtr parse_expr(TokenStream& ts) {
    ExprParser p{ts, std::nullopt};
    ExprPtr e = p.parse();
    if (!e) {
      if (p.error) errors.push_back(*p.error);
      return nullptr;
    }
    return e;
  }

  bool expect(TokenStream& ts, Tok kind, const std::string& what) {
    if (ts.peek().kind != kind) {
      fail(ts.peek(), what);
      return false;
    }
    ts.next();
    return true;
  }

  std::optional<Token> expect_name(TokenStream& ts, const char* what) {
    if (ts.peek().kind != Tok::Ident) {
      fail(ts.peek(), std::string("a ") + what + " name");
      return std::nullopt;
    }
    Token t = ts.next();
    if (kKeywords.count(t.text)) {
      errors.push_back({t.span, std::string("a ") + what + " name",
                        t.text + " (reserved word)"});
      return std::nullopt;
    }
    if (builtin_from_name(t.text)) {
      errors.push_back({t.span, std::string("a ") + what + " name",
                        t.text + " (builtin name)"});
      return std::nullopt;
    }
    return t;
  }

  bool expect_line_end(TokenStream& ts) {
    if (!ts.at_end()) {
      fail(ts.peek(), "end of statement");
      return false;
    }
    return true;
  }

  std::optional<double> parse_signed_number(TokenStream& ts) {
    bool negative = false;
    if (ts.peek().kind == Tok::Minus) {
      ts.next();
      negative = true;
    }
    if (ts.peek().kind != Tok::Number) {
      fail(ts.peek(), "a number");
      return std::nullopt;
    }
    double v = ts.next().number;
    return negative ? -v : v;
  }

  void parse_model_line(TokenStream& ts) {
    if (ts.peek().kind != Tok::Ident) {
      fail(ts.peek(), "a model name");
      return;
    }
    Token name = ts.next();
    if (!is_identifier(name.text)) {
      fail(name, "a model name");
      return;
    }
    if (saw_model_line) {
      errors.push_back({name.span, "a single model statement", name.text});
      return;
    }
    saw_model_line = true;
    model.name = name.text;
    expect_line_end(ts);
  }

  void parse_stock(TokenStream& ts) {
    auto name = expect_name(ts, "stock");
    if (!name) return;
    if (!expect(ts, Tok::Equals, "'='")) return;
    ExprPtr initial = parse_expr(ts);
    if (!initial) return;
    if (!expect(ts, Tok::LBrace, "'{' with inflow/outflow")) return;

    Stock stock;
    stock.name = name->text;
    stock.initial = std::move(initial);
    bool first = true;
    while (true) {
      if (ts.peek().kind == Tok::RBrace && first) {
        fail(ts.peek(), "inflow or outflow");
        return;
      }
      if (ts.peek().kind != Tok::Ident ||
          (ts.peek().text != "inflow" && ts.peek().text != "outflow")) {
        fail(ts.peek(), "'inflow' or 'outflow'");
        return;
      }
      Token which = ts.next();
      if (!expect(ts, Tok::Colon, "':'")) return;
      ExprPtr flow = parse_expr(ts);
      if (!flow) return;
      if (which.text == "inflow") {
        if (stock.inflow) {
          fail(which, "a single inflow clause");
          return;
        }
        stock.inflow = std::move(flow);
      } else {
        if (stock.outflow) {
          fail(which, "a single outflow clause");
          return;
        }
        stock.outflow = std::move(flow);
      }
      first = false;
      if (ts.peek().kind == Tok::Comma) {
        ts.next();
        continue;
      }
      break;
    }
    if (!expect(ts, Tok::RBrace, "'}'")) return;
    if (!expect_line_end(ts)) return;
    decl_spans[stock.name] = name->span;
    model.stocks.push_back(std::move(stock));
  }

  void parse_aux(TokenStream& ts) {
    auto name = expect_name(ts, "auxiliary");
    if (!name) return;
    if (!expect(ts, Tok::Equals, "'='")) return;
    ExprPtr def = parse_expr(ts);
    if (!def) return;
    if (!expect_line_end(ts)) return;
    decl_spans[name->text] = name->span;
    model.auxes.push_back({name->text, std::move(def)});
  }

  void parse_exo(TokenStream& ts) {
    auto name = expect_name(ts, "exogenous");
    if (!name) return;
    if (!expect(ts, Tok::Equals, "'='")) return;
    auto value = parse_signed_number(ts);
    if (!value) return;
    if (!expect_line_end(ts)) return;
    decl_spans[name->text] = name->span;
    model.exos.push_back({name->text, *value});
  }

  void parse_table(TokenStream& ts) {
    auto name = expect_name(ts, "table");
    if (!name) return;
    if (!expect(ts, Tok::Colon, "':'")) return;
    Table table;
    table.name = name->text;
    while (ts.peek().kind == Tok::LParen) {
      ts.next();
      auto x = parse_signed_number(ts);
      if (!x) return;
      if (!expect(ts, Tok::Comma, "','")) return;
      auto y = parse_signed_number(ts);
      if (!y) return;
      if (!expect(ts, Tok::RParen, "')'")) return;
      table.points.emplace_back(*x, *y);
    }
    if (ts.peek().kind != Tok::Ident ||
        (ts.peek().text != "clamp" && ts.peek().text != "extrapolate")) {
      fail(ts.peek(), "'clamp' or 'extrapolate'");
      return;
    }
    table.policy = ts.next().text == "clamp" ? OutOfRange::Clamp
                                             : OutOfRange::Extrapolate;
    if (!expect_line_end(ts)) return;
    decl_spans[table.name] = name->span;
    model.tables.push_back(std::move(table));
  }

  void parse_line(const std::string& line, int line_no) {
    TokenStream ts(lex_line(line, line_no));
    if (ts.at_end()) return;  // blank or comment-only line
    const Token& head = ts.peek();
    if (head.kind != Tok::Ident) {
      fail(head, "a statement keyword");
      return;
    }
    if (head.text == "model") {
      ts.next();
      parse_model_line(ts);
    } else if (head.text == "stock") {
      ts.next();
      parse_stock(ts);
    } else if (head.text == "aux") {
      ts.next();
      parse_aux(ts);
    } else if (head.text == "exo") {
      ts.next();
      parse_exo(ts);
    } else if (head.text == "table") {
      ts.next();
      parse_table(ts);
    } else {
      fail(head, "'model', 'stock', 'aux', 'exo' or 'table'");
    }
  }
};

}  // namespace

ParseResult parse_model(const std::string& text) {
  StatementParser sp;
  int line_no = 1;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line = nl == std::string::npos
                           ? text.substr(start)
                           : text.substr(start, nl - start);
    sp.parse_line(line, line_no);
    if (nl == std::string::npos) break;
    start = nl + 1;
    ++line_no;
  }
  if (!sp.saw_model_line) {
    sp.errors.insert(sp.errors.begin(),
                     {{1, 1, 1}, "a 'model NAME' statement", ""});
  }

  ParseResult result;
  if (!sp.errors.empty()) {
    result.errors = std::move(sp.errors);
    return result;
  }

  auto diags = validate(sp.model);
  for (const auto& d : diags) {
    if (d.severity == Severity::Warning) {
      result.warnings.push_back(d);
      continue;
    }
    SourceSpan span{1, 1, 1};
    if (auto it = sp.decl_spans.find(d.variable); it != sp.decl_spans.end()) {
      span = it->second;
    }
    result.errors.push_back(
        {span, "valid model (" + std::string(diag_code_name(d.code)) + ")",
         d.message});
  }
  if (!result.errors.empty()) {
    result.warnings.clear();
    return result;
  }
  result.model = std::move(sp.model);
  return result;
}

ExprParseResult parse_expression(const std::string& text) {
  TokenStream ts(lex_line(text, 1));
  ExprParser p{ts, std::nullopt};
  ExprPtr e = p.parse();
  ExprParseResult result;
  if (!e) {
    result.error = p.error.value_or(
        ParseError{{1, 1, 1}, "an expression", ""});
    return result;
  }
  if (!ts.at_end()) {
    result.error =
        ParseError{ts.peek().span, "end of expression", ts.peek().text};
    return result;
  }
  result.expr = std::move(e);
  return result;
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "0";
  return std::string(buf, ptr);
}

namespace {

int prec_of(const Expr& e) {
  if (std::holds_alternative<BinaryNode>(e.node)) {
    switch (std::get<BinaryNode>(e.node).op) {
      case BinaryOp::Add:
      case BinaryOp::Sub: return 1;
      case BinaryOp::Mul:
      case BinaryOp::Div: return 2;
      case BinaryOp::Pow: return 4;
    }
  }
  if (std::holds_alternative<NegNode>(e.node)) return 3;
  return 5;
}

const char* op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return " + ";
    case BinaryOp::Sub: return " - ";
    case BinaryOp::Mul: return " * ";
    case BinaryOp::Div: return " / ";
    case BinaryOp::Pow: return " ^ ";
  }
  return "?";
}

void print_expr(const ExprPtr& e, std::string& out);

void print_child(const ExprPtr& child, int parent_prec, bool needs_higher,
                 std::string& out) {
  int p = prec_of(*child);
  bool parens = needs_higher ? p <= parent_prec : p < parent_prec;
  if (parens) out += "(";
  print_expr(child, out);
  if (parens) out += ")";
}

void print_expr(const ExprPtr& e, std::string& out) {
  if (const auto* n = std::get_if<NumberNode>(&e->node)) {
    out += format_number(n->value);
  } else if (const auto* v = std::get_if<VarNode>(&e->node)) {
    out += v->name;
  } else if (const auto* g = std::get_if<NegNode>(&e->node)) {
    out += "-";
    print_child(g->operand, 3, false, out);
  } else if (const auto* b = std::get_if<BinaryNode>(&e->node)) {
    int p = prec_of(*e);
    bool right_assoc = b->op == BinaryOp::Pow;
    print_child(b->lhs, p, right_assoc, out);
    out += op_text(b->op);
    print_child(b->rhs, p, !right_assoc, out);
  } else {
    const auto& c = std::get<CallNode>(e->node);
    out += builtin_name(c.fn);
    out += "(";
    if (c.fn == Builtin::Lookup) {
      out += c.table;
      out += ", ";
    }
    for (std::size_t i = 0; i < c.args.size(); ++i) {
      if (i) out += ", ";
      print_expr(c.args[i], out);
    }
    out += ")";
  }
}

}  // namespace

std::string serialize_expression(const ExprPtr& expr) {
  std::string out;
  print_expr(expr, out);
  return out;
}

std::string serialize_model(const Model& model) {
  std::string out = "model " + model.name + "\n";
  for (const auto& s : model.stocks) {
    out += "stock " + s.name + " = " + serialize_expression(s.initial) + " {";
    bool first = true;
    if (s.inflow) {
      out += " inflow: " + serialize_expression(s.inflow);
      first = false;
    }
    if (s.outflow) {
      out += first ? " " : ", ";
      out += "outflow: " + serialize_expression(s.outflow);
    }
    out += " }\n";
  }
  for (const auto& a : model.auxes) {
    out += "aux " + a.name + " = " + serialize_expression(a.definition) + "\n";
  }
  for (const auto& e : model.exos) {
    out += "exo " + e.name + " = " + format_number(e.value) + "\n";
  }
  for (const auto& t : model.tables) {
    out += "table " + t.name + " :";
    for (const auto& [x, y] : t.points) {
      out += " (" + format_number(x) + "," + format_number(y) + ")";
    }
    out += t.policy == OutOfRange::Clamp ? " clamp\n" : " extrapolate\n";
  }
  return out;
}

}  // namespace sca
