#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sca/simulator.hpp"
#include "sca/parser.hpp"
#include "support.hpp"

using namespace sca;

namespace {

Model parse(const std::string& text) {
  auto r = parse_model(text);
  REQUIRE_MESSAGE(r.ok(), text);
  return *r.model;
}

}  // namespace

TEST_CASE("SMTH1 expands to one hidden stock plus an alias aux") {
  Model m = parse(
      "model M\n"
      "exo Q = 2\n"
      "aux P = SMTH1(Q, 5)\n");
  Model e = expand_delays(m);
  REQUIRE(e.stocks.size() == 1);
  CHECK(e.stocks[0].name == "P__d1");
  CHECK(e.stocks[0].hidden);
  const Aux* alias = e.find_aux("P");
  REQUIRE(alias != nullptr);
  const auto* v = std::get_if<VarNode>(&alias->definition->node);
  REQUIRE(v != nullptr);
  CHECK(v->name == "P__d1");
  CHECK(e.delay_aliases.at("P") == "P__d1");
  // steady-state initial = input value
  CHECK(eval_constant(e.stocks[0].initial, e) == 2.0);
}

TEST_CASE("a delay-free model expands to itself") {
  Model m = testsupport::load_model("stock_management.sdm");
  CHECK(expand_delays(m) == m);
}

TEST_CASE("expansion is idempotent") {
  Model m = testsupport::load_model("smooth_loop.sdm");
  Model once = expand_delays(m);
  CHECK(expand_delays(once) == once);
}

TEST_CASE("SMTH3 builds a three-stage cascade with stage time T/3") {
  Model m = parse(
      "model M\n"
      "exo Q = 0\n"
      "aux P = SMTH3(Q, 6)\n"
      "stock W = 0 { inflow: P }\n");
  Model e = expand_delays(m);
  std::vector<std::string> hidden;
  for (const auto& s : e.stocks) {
    if (s.hidden) hidden.push_back(s.name);
  }
  CHECK(hidden == std::vector<std::string>{"P__d1", "P__d2", "P__d3"});

  // Third-order smooth step response at t = T (stage time 2):
  // 1 - e^-3 (1 + 3 + 4.5) = 0.57681...
  SimConfig cfg;
  cfg.dt = 6.0 / 1000;
  cfg.horizon = 6.0;
  cfg.overrides["Q"] = StepSchedule{cfg.dt, 0.0, 1.0};  // step after t=0
  auto traj = simulate(m, cfg);
  double got = traj.values.at("P").back();
  double expected = 1 - std::exp(-3.0) * (1 + 3 + 4.5);
  CHECK(got == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("DELAY3 passes steady flow through and responds like a pipeline") {
  Model m = parse(
      "model M\n"
      "exo Q = 0\n"
      "aux P = DELAY3(Q, 6)\n"
      "stock W = 0 { inflow: P }\n");
  Model e = expand_delays(m);
  int hidden = 0;
  for (const auto& s : e.stocks) hidden += s.hidden ? 1 : 0;
  CHECK(hidden == 3);

  // Outflow response of a 3-stage pipeline to a unit rate step equals the
  // third-order smooth response: 0.57681 at t = T.
  SimConfig cfg;
  cfg.dt = 6.0 / 1000;
  cfg.horizon = 6.0;
  cfg.overrides["Q"] = StepSchedule{cfg.dt, 0.0, 1.0};
  auto traj = simulate(m, cfg);
  double expected = 1 - std::exp(-3.0) * (1 + 3 + 4.5);
  CHECK(traj.values.at("P").back() == doctest::Approx(expected).epsilon(0.01));

  // At steady input the output equals the input exactly.
  Model steady = parse(
      "model M\n"
      "exo Q = 5\n"
      "aux P = DELAY3(Q, 6)\n"
      "stock W = 0 { inflow: P }\n");
  SimConfig scfg;
  scfg.dt = 0.25;
  scfg.horizon = 10.0;
  auto straj = simulate(steady, scfg);
  for (double v : straj.values.at("P")) CHECK(v == doctest::Approx(5.0));
}

TEST_CASE("hidden stage names dodge user-taken names") {
  Model m = parse(
      "model M\n"
      "exo Q = 1\n"
      "aux P = SMTH1(Q, 2)\n"
      "stock P__d1 = 0 { inflow: P }\n");
  Model e = expand_delays(m);
  CHECK(e.delay_aliases.at("P") == "P__d1_");
  CHECK(e.find_stock("P__d1_") != nullptr);
  CHECK_FALSE(has_errors(validate(e)));
}

TEST_CASE("delays feeding each other initialise with a warning") {
  Model m = parse(
      "model M\n"
      "aux A = SMTH1(B, 2)\n"
      "aux B = SMTH1(A + 1, 2)\n"
      "stock W = 0 { inflow: A + B }\n");
  auto result = expand_delays_ex(m);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].code == DiagCode::DelayInitCircular);
  // still integrable
  SimConfig cfg;
  cfg.dt = 0.125;
  cfg.horizon = 4.0;
  CHECK_NOTHROW(simulate(m, cfg));
}

TEST_CASE("DELAY1 expansion matches the direct recurrence") {
  Model m = parse(
      "model M\n"
      "exo Q = 3\n"
      "aux P = DELAY1(Q, 5)\n"
      "stock W = 0 { inflow: P }\n");
  SimConfig cfg;
  cfg.dt = 0.125;
  cfg.horizon = 20.0;
  cfg.overrides["Q"] = StepSchedule{2.0, 3.0, 7.0};
  auto traj = simulate(m, cfg);

  // Reference: L' = q - L/T, out = L/T, L0 = q0 * T.
  double T = 5.0, L = 3.0 * T;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    double t = traj.times[k];
    double q = t < 2.0 ? 3.0 : 7.0;
    double out = L / T;
    CHECK(std::fabs(traj.values.at("P")[k] - out) <= 1e-9);
    L += cfg.dt * (q - out);
  }
}

TEST_CASE("stock derivatives at the fixture's equilibrium vanish") {
  Model m = testsupport::load_model("stock_management.sdm");
  Model e = expand_delays(m);
  auto d = stock_derivatives(e, initial_state(e), exo_env(e));
  CHECK(d.at("SupplyLine") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.at("Stock") == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("first-order outflow gives the expected derivative") {
  Model m = parse(
      "model M\n"
      "exo tau = 2\n"
      "stock S = 10 { outflow: S / tau }\n");
  auto d = stock_derivatives(m, {{"S", 10.0}}, exo_env(m));
  CHECK(d.at("S") == -5.0);
}

TEST_CASE("a MAX guard zeroes the deficit side") {
  Model m = parse(
      "model M\n"
      "exo Target = 5\n"
      "stock S = 10 { inflow: MAX(0, Target - S) }\n");
  auto d = stock_derivatives(m, {{"S", 10.0}}, exo_env(m));
  CHECK(d.at("S") == 0.0);
  auto d2 = stock_derivatives(m, {{"S", 2.0}}, exo_env(m));
  CHECK(d2.at("S") == 3.0);
}

TEST_CASE("exponential decay stays within 1% of scale at dt = tau/100") {
  Model m = parse("model M\nstock S = 1 { outflow: S / 1 }\n");
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = 5.0;
  auto traj = simulate(m, cfg);
  double max_err = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    double exact = std::exp(-traj.times[k]);
    max_err = std::max(max_err, std::fabs(traj.values.at("S")[k] - exact));
  }
  CHECK(max_err <= 0.01);  // relative to the unit initial value
}

TEST_CASE("halving dt roughly halves the global error") {
  auto global_error = [](double dt) {
    Model m = parse_model("model M\nstock S = 1 { outflow: S / 1 }\n")
                  .model.value();
    SimConfig cfg;
    cfg.dt = dt;
    cfg.horizon = 5.0;
    auto traj = simulate(m, cfg);
    double max_err = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      double exact = std::exp(-traj.times[k]);
      max_err = std::max(max_err, std::fabs(traj.values.at("S")[k] - exact));
    }
    return max_err;
  };
  double ratio = global_error(0.005) / global_error(0.01);
  CHECK(ratio >= 0.4);
  CHECK(ratio <= 0.6);
}

TEST_CASE("SMTH1 step response reaches 63.2% at t = T") {
  Model m = parse(
      "model M\n"
      "exo u = 0\n"
      "aux P = SMTH1(u, 4)\n"
      "stock W = 0 { inflow: P }\n");
  SimConfig cfg;
  cfg.dt = 4.0 / 1000;
  cfg.horizon = 4.0;
  cfg.overrides["u"] = StepSchedule{cfg.dt, 0.0, 1.0};  // step after t=0
  auto traj = simulate(m, cfg);
  double at_T = traj.values.at("P").back();
  CHECK(std::fabs(at_T - 0.632) <= 0.02);
}

TEST_CASE("zero-net-flow stocks are exactly constant") {
  Model m = parse("model M\nstock S = 5 { inflow: 1, outflow: 1 }\n");
  SimConfig cfg;
  cfg.dt = 0.25;
  cfg.horizon = 10.0;
  auto traj = simulate(m, cfg);
  for (double v : traj.values.at("S")) CHECK(v == 5.0);
}

TEST_CASE("trajectories are uniformly spaced and finite") {
  Model m = testsupport::load_model("stock_management.sdm");
  SimConfig cfg;
  cfg.dt = 0.5;
  cfg.horizon = 8.0;
  auto traj = simulate(m, cfg);
  REQUIRE(traj.times.size() == 17);
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    CHECK(traj.times[k] - traj.times[k - 1] == doctest::Approx(0.5));
  }
}

TEST_CASE("non-finite values abort with the offending variable") {
  Model m = parse("model M\nstock S = 2 { inflow: EXP(S) }\n");
  SimConfig cfg;
  cfg.dt = 1.0;
  cfg.horizon = 1000.0;
  try {
    simulate(m, cfg);
    FAIL("expected NonFiniteAbort");
  } catch (const NonFiniteAbort& e) {
    CHECK(e.variable == "S");
    CHECK(e.t > 0.0);
  }
}

TEST_CASE("CSV export: sorted header, %.12g rows") {
  Model m = parse("model M\nexo k = 2\nstock S = 1 { outflow: S * k }\n");
  SimConfig cfg;
  cfg.dt = 0.1;
  cfg.horizon = 0.2;
  auto csv = trajectory_to_csv(simulate(m, cfg));
  CHECK(csv.rfind("time,S,k\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
}
