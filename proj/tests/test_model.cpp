#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sca/model.hpp"
#include "sca/parser.hpp"
#include "support.hpp"

using namespace sca;

namespace {

ExprPtr expr(const std::string& text) {
  auto r = parse_expression(text);
  REQUIRE(r.ok());
  return r.expr;
}

bool has_code(const std::vector<Diagnostic>& diags, DiagCode code,
              Severity severity) {
  for (const auto& d : diags) {
    if (d.code == code && d.severity == severity) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("the stock management fixture validates cleanly") {
  auto model = testsupport::load_model("stock_management.sdm");
  auto diags = validate(model);
  CHECK(diags.empty());
}

TEST_CASE("algebraic loops among auxiliaries are errors") {
  Model m;
  m.name = "Loop";
  m.auxes.push_back({"A", expr("B")});
  m.auxes.push_back({"B", expr("A")});
  auto diags = validate(m);
  CHECK(has_code(diags, DiagCode::AlgebraicLoop, Severity::Error));
  for (const auto& d : diags) {
    if (d.code == DiagCode::AlgebraicLoop) {
      CHECK(d.message.find("A") != std::string::npos);
      CHECK(d.message.find("B") != std::string::npos);
    }
  }
}

TEST_CASE("a self-referential auxiliary is an algebraic loop") {
  Model m;
  m.name = "M";
  m.auxes.push_back({"A", expr("A + 1")});
  CHECK(has_code(validate(m), DiagCode::AlgebraicLoop, Severity::Error));
}

TEST_CASE("a delay breaks an auxiliary cycle") {
  Model m;
  m.name = "DelayedLoop";
  m.auxes.push_back({"A", expr("B + 1")});
  m.auxes.push_back({"B", expr("SMTH1(A, 4)")});
  CHECK_FALSE(has_errors(validate(m)));
}

TEST_CASE("constant-like auxiliaries warn") {
  Model m;
  m.name = "M";
  m.auxes.push_back({"C", expr("3.0")});
  auto diags = validate(m);
  CHECK(has_code(diags, DiagCode::ConstantAux, Severity::Warning));
  CHECK_FALSE(has_errors(diags));
}

TEST_CASE("stocks need at least one flow and a constant initial") {
  Model m;
  m.name = "M";
  Stock s;
  s.name = "S";
  s.initial = expr("1");
  m.stocks.push_back(s);
  CHECK(has_code(validate(m), DiagCode::MissingFlow, Severity::Error));

  Model m2;
  m2.name = "M";
  Stock s2;
  s2.name = "S";
  s2.initial = expr("Other");
  s2.outflow = expr("S / 2");
  m2.stocks.push_back(s2);
  m2.auxes.push_back({"Other", expr("S * 2")});
  CHECK(has_code(validate(m2), DiagCode::InitialNotConstant, Severity::Error));
}

TEST_CASE("initial values may reference exogenous constants") {
  Model m;
  m.name = "M";
  m.exos.push_back({"S0", 7.0});
  Stock s;
  s.name = "S";
  s.initial = expr("S0 * 2");
  s.outflow = expr("S / 2");
  m.stocks.push_back(s);
  CHECK_FALSE(has_errors(validate(m)));
}

TEST_CASE("delay calls are restricted to whole definitions") {
  Model m;
  m.name = "M";
  m.exos.push_back({"Q", 1.0});
  m.auxes.push_back({"D", expr("1 + SMTH1(Q, 2)")});
  CHECK(has_code(validate(m), DiagCode::DelayPlacement, Severity::Error));

  Model m2;
  m2.name = "M";
  m2.exos.push_back({"Q", 1.0});
  Stock s;
  s.name = "S";
  s.initial = expr("0");
  s.inflow = expr("DELAY1(Q, 3)");
  m2.stocks.push_back(s);
  CHECK(has_code(validate(m2), DiagCode::DelayPlacement, Severity::Error));
}

TEST_CASE("delay times must be positive constants") {
  Model m;
  m.name = "M";
  m.exos.push_back({"Q", 1.0});
  m.auxes.push_back({"D", expr("SMTH1(Q, 0)")});
  CHECK(has_code(validate(m), DiagCode::DelayTimeNotPositive, Severity::Error));

  Model m2;
  m2.name = "M";
  m2.exos.push_back({"Q", 1.0});
  m2.auxes.push_back({"A", expr("Q * 2")});
  m2.auxes.push_back({"D", expr("SMTH1(Q, A)")});
  CHECK(
      has_code(validate(m2), DiagCode::DelayTimeNotConstant, Severity::Error));

  // Exogenous constants are fine as delay times.
  Model m3;
  m3.name = "M";
  m3.exos.push_back({"Q", 1.0});
  m3.exos.push_back({"T", 4.0});
  m3.auxes.push_back({"D", expr("SMTH1(Q, T)")});
  CHECK_FALSE(has_errors(validate(m3)));
}

TEST_CASE("tables need two strictly increasing finite points") {
  Model m;
  m.name = "M";
  m.tables.push_back({"t", {{0, 0}}, OutOfRange::Clamp});
  CHECK(has_code(validate(m), DiagCode::BadTable, Severity::Error));

  Model m2;
  m2.name = "M";
  m2.tables.push_back({"t", {{0, 0}, {0, 1}}, OutOfRange::Clamp});
  CHECK(has_code(validate(m2), DiagCode::BadTable, Severity::Error));
}

TEST_CASE("name rules: uniqueness, identifiers, builtin collisions") {
  Model m;
  m.name = "M";
  m.exos.push_back({"x", 1.0});
  m.auxes.push_back({"x", expr("1 + x")});
  CHECK(has_code(validate(m), DiagCode::DuplicateName, Severity::Error));

  Model m2;
  m2.name = "M";
  m2.exos.push_back({"2bad", 1.0});
  CHECK(has_code(validate(m2), DiagCode::BadIdentifier, Severity::Error));

  Model m3;
  m3.name = "M";
  m3.exos.push_back({"MAX", 1.0});
  CHECK(
      has_code(validate(m3), DiagCode::BuiltinNameCollision, Severity::Error));

  // Tables share the namespace.
  Model m4;
  m4.name = "M";
  m4.exos.push_back({"t", 1.0});
  m4.tables.push_back({"t", {{0, 0}, {1, 1}}, OutOfRange::Clamp});
  CHECK(has_code(validate(m4), DiagCode::DuplicateName, Severity::Error));
}

TEST_CASE("unresolved references are reported per owner") {
  Model m;
  m.name = "M";
  m.auxes.push_back({"A", expr("Ghost + 1")});
  auto diags = validate(m);
  CHECK(has_code(diags, DiagCode::UnresolvedReference, Severity::Error));

  Model m2;
  m2.name = "M";
  m2.exos.push_back({"x", 1.0});
  m2.auxes.push_back({"A", expr("LOOKUP(ghost_table, x)")});
  CHECK(
      has_code(validate(m2), DiagCode::UnresolvedReference, Severity::Error));
}

TEST_CASE("non-finite exogenous values are rejected") {
  Model m;
  m.name = "M";
  m.exos.push_back({"bad", std::numeric_limits<double>::infinity()});
  CHECK(has_code(validate(m), DiagCode::NonFiniteValue, Severity::Error));
}
