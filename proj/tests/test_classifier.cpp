#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sca/classifier.hpp"
#include "sca/parser.hpp"
#include "support.hpp"

using namespace sca;

namespace {

Model parse(const std::string& text) {
  auto r = parse_model(text);
  REQUIRE_MESSAGE(r.ok(), text);
  return *r.model;
}

std::map<std::string, ExoVerdict> verdicts_of(const Model& m,
                                              ClassifyOptions opts = {}) {
  std::map<std::string, ExoVerdict> out;
  for (const auto& c : classify_exogenous(m, opts)) out[c.exo] = c.verdict;
  return out;
}

}  // namespace

TEST_CASE("jacobian of a linear outflow") {
  Model m = parse("model M\nexo tau = 2\nstock S = 10 { outflow: S / tau }\n");
  auto j = jacobian(m, {{"S", 10.0}}, exo_env(m));
  REQUIRE(j.stocks == std::vector<std::string>{"S"});
  CHECK(std::fabs(j.d[0][0] - (-0.5)) <= 1e-6);
}

TEST_CASE("jacobian of a two-stock chain is lower triangular") {
  Model m = parse(
      "model M\n"
      "stock S1 = 8 { outflow: S1 / 2 }\n"
      "stock S2 = 4 { inflow: S1 / 2, outflow: S2 / 4 }\n");
  auto j = jacobian(m, {{"S1", 8.0}, {"S2", 4.0}}, exo_env(m));
  REQUIRE(j.stocks == std::vector<std::string>{"S1", "S2"});
  CHECK(std::fabs(j.d[0][0] - (-0.5)) <= 1e-6);
  CHECK(std::fabs(j.d[0][1]) <= 1e-9);  // S1 does not feel S2
  CHECK(std::fabs(j.d[1][0] - 0.5) <= 1e-6);
  CHECK(std::fabs(j.d[1][1] - (-0.25)) <= 1e-6);
}

TEST_CASE("jacobian across a MAX guard sees the active region's slope") {
  Model m = parse(
      "model M\n"
      "stock S = 6 { outflow: MAX(0, S - 5) }\n");
  auto above = jacobian(m, {{"S", 6.0}}, exo_env(m));
  CHECK(std::fabs(above.d[0][0] - (-1.0)) <= 1e-6);
  auto below = jacobian(m, {{"S", 4.0}}, exo_env(m));
  CHECK(std::fabs(below.d[0][0]) <= 1e-9);
}

TEST_CASE("porc separates an additive input from a rate constant") {
  // xdot = -x/tau + u
  Model m = parse(
      "model M\n"
      "exo u = 1\n"
      "exo tau = 2\n"
      "stock x = 1 { inflow: u, outflow: x / tau }\n");
  std::vector<StateVector> samples{{{"x", 1.0}}, {{"x", 1.7}}, {{"x", 0.6}}};

  auto ev_u = porc(m, "u", samples);
  CHECK(ev_u.max_porc_term() <= 1e-7);
  CHECK(ev_u.max_d_xdot_dz() == doctest::Approx(1.0));
  CHECK(ev_u.agreement);
  CHECK(ev_u.samples_used == 3);

  // d^2 xdot / (dtau dx) = 1/tau^2 = 0.25
  auto ev_tau = porc(m, "tau", samples);
  CHECK(ev_tau.max_porc_term() == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("porc rejects samples that straddle a kink") {
  Model m = parse(
      "model M\n"
      "exo Target = 5\n"
      "stock S = 5 { inflow: MAX(0, Target - S), outflow: S / 10 }\n");
  // S == Target sits exactly on the MAX kink.
  CHECK_THROWS_AS(porc(m, "Target", {{{"S", 5.0}}}), SampleRejected);
}

TEST_CASE("the stock management exos classify exactly") {
  Model m = testsupport::load_model("stock_management.sdm");
  auto v = verdicts_of(m);
  CHECK(v.at("SL_star") == ExoVerdict::ControlInput);
  CHECK(v.at("S_star") == ExoVerdict::ControlInput);
  CHECK(v.at("SLAT") == ExoVerdict::Parameter);
  CHECK(v.at("SAT") == ExoVerdict::Parameter);
}

TEST_CASE("an unreferenced exo is inert") {
  Model m = parse(
      "model M\n"
      "exo unused = 3\n"
      "stock S = 1 { outflow: S / 2 }\n");
  CHECK(verdicts_of(m).at("unused") == ExoVerdict::Inert);
}

TEST_CASE("an exo used only in an initial value is inert") {
  Model m = parse(
      "model M\n"
      "exo S0 = 4\n"
      "stock S = S0 { outflow: S / 2 }\n");
  CHECK(verdicts_of(m).at("S0") == ExoVerdict::Inert);
}

TEST_CASE("a multiplicative coefficient is a parameter") {
  Model m = parse(
      "model M\n"
      "exo z = 0.5\n"
      "aux A = z * S\n"
      "stock S = 1 { outflow: A }\n");
  CHECK(verdicts_of(m).at("z") == ExoVerdict::Parameter);
}

TEST_CASE("an exo only inside a delay time is a granted parameter") {
  Model m = parse(
      "model M\n"
      "exo Tau = 4\n"
      "stock S = 1 { outflow: S / 2 }\n"
      "aux P = SMTH1(S, Tau)\n"
      "stock W = 1 { inflow: P }\n");
  CHECK(verdicts_of(m).at("Tau") == ExoVerdict::Parameter);
}

TEST_CASE("inputs reaching flows through a delay still classify as inputs") {
  Model m = parse(
      "model M\n"
      "exo z = 2\n"
      "aux Q = z + S\n"
      "aux P = SMTH1(Q, 4)\n"
      "stock S = 1 { outflow: S / 2 }\n"
      "stock W = 1 { inflow: P }\n");
  CHECK(verdicts_of(m).at("z") == ExoVerdict::ControlInput);
}

TEST_CASE("region disagreement across samples yields Undetermined") {
  Model m = parse(
      "model M\n"
      "exo z = -1\n"
      "stock S = 1 { inflow: MAX(0, z + S), outflow: S / 2 }\n");
  CHECK(verdicts_of(m).at("z") == ExoVerdict::Undetermined);
}

TEST_CASE("verdicts are invariant to doubling the baseline state") {
  std::vector<std::string> sources = {
      "model M\nexo u = 1\nexo tau = 2\n"
      "stock x = 1 { inflow: u, outflow: x / tau }\n",
      "model M\nexo z = 0.5\naux A = z * S\nstock S = 1 { outflow: A }\n",
      "model M\nexo u = 3\nexo k = 0.25\n"
      "stock a = 2 { inflow: u, outflow: a * k }\n"
      "stock b = 1 { inflow: a * k, outflow: b / 4 }\n",
  };
  for (const auto& src : sources) {
    Model m = parse(src);
    Model doubled = m;
    for (auto& s : doubled.stocks) {
      s.initial = make_binary(BinaryOp::Mul, make_number(2.0), s.initial);
    }
    CHECK(verdicts_of(m) == verdicts_of(doubled));
  }
}

TEST_CASE("additive inputs classify as control inputs across a suite") {
  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 12; ++trial) {
    // Random little linear chain with z added to one flow.
    int n = 1 + static_cast<int>(rng() % 3);
    std::string src = "model M\nexo z = 1\n";
    for (int i = 0; i < n; ++i) {
      std::string name = "s" + std::to_string(i);
      double tau = 1 + static_cast<int>(rng() % 4);
      src += "stock " + name + " = " +
             std::to_string(1 + static_cast<int>(rng() % 5)) + " { ";
      if (i > 0) {
        src += "inflow: s" + std::to_string(i - 1) + " / 2, ";
      } else {
        src += "inflow: z, ";
      }
      src += "outflow: " + name + " / " + std::to_string(tau) + " }\n";
    }
    Model m = parse(src);
    CHECK(verdicts_of(m).at("z") == ExoVerdict::ControlInput);
  }
}

TEST_CASE("fixture verdicts do not depend on the sampling seed") {
  Model m = testsupport::load_model("stock_management.sdm");
  for (std::uint64_t seed : {1ULL, 7ULL, 42ULL, 1000ULL, 31337ULL}) {
    ClassifyOptions opts;
    opts.seed = seed;
    auto v = verdicts_of(m, opts);
    CHECK(v.at("SL_star") == ExoVerdict::ControlInput);
    CHECK(v.at("S_star") == ExoVerdict::ControlInput);
    CHECK(v.at("SLAT") == ExoVerdict::Parameter);
    CHECK(v.at("SAT") == ExoVerdict::Parameter);
  }
}

TEST_CASE("classification is deterministic for a fixed seed") {
  Model m = testsupport::load_model("stock_management.sdm");
  ClassifyOptions opts;
  opts.seed = 1234;
  auto a = classify_exogenous(m, opts);
  auto b = classify_exogenous(m, opts);
  CHECK(a == b);
}
