#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mfbsde/dsl.hpp"

using mfbsde::dsl::eval_values;
using mfbsde::dsl::expression;
using mfbsde::dsl::parse;
using mfbsde::dsl::profile;

namespace {

double eval(const std::string& text, const eval_values& v, int n_states = 0) {
  return parse(text, profile::driver, n_states).evaluate(v);
}

}  // namespace

TEST_CASE("single variables and literals") {
  eval_values v;
  v.yp = 1.5;
  CHECK(eval("yp", v) == 1.5);

  v.t = 0.25;
  v.y = -2.0;
  v.i = 3.0;
  v.ip = 1.0;
  CHECK(eval("t", v) == 0.25);
  CHECK(eval("y", v) == -2.0);
  CHECK(eval("i", v) == 3.0);
  CHECK(eval("ip", v) == 1.0);
  CHECK(eval("42", v) == 42.0);
  CHECK(eval("0.5", v) == 0.5);
  CHECK(eval("1e-3", v) == 1e-3);
}

TEST_CASE("precedence, associativity, unary minus") {
  eval_values v;
  CHECK(eval("1 + 2*3", v) == 7.0);
  CHECK(eval("2*3 + 1", v) == 7.0);
  CHECK(eval("1 - 2 - 3", v) == -4.0);
  CHECK(eval("12/4/3", v) == 1.0);
  CHECK(eval("(1 + 2)*3", v) == 9.0);
  CHECK(eval("-2*3", v) == -6.0);
  CHECK(eval("2*-3", v) == -6.0);
  CHECK(eval("-(2 + 3)", v) == -5.0);
  CHECK(eval("--4", v) == 4.0);
  CHECK(eval("2 - -3", v) == 5.0);
}

TEST_CASE("function catalog") {
  eval_values v;
  CHECK(eval("min(2, 3)", v) == 2.0);
  CHECK(eval("max(2, 3)", v) == 3.0);
  CHECK(eval("abs(-2)", v) == 2.0);
  CHECK(eval("sin(0)", v) == 0.0);
  CHECK(eval("cos(0)", v) == 1.0);
  CHECK(eval("tanh(0)", v) == 0.0);
  CHECK(eval("tanh(1)", v) == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
}

TEST_CASE("z components are 1-based") {
  eval_values v;
  double z[3] = {10.0, 20.0, 30.0};
  double zp[3] = {-1.0, -2.0, -3.0};
  v.z = z;
  v.zp = zp;
  CHECK(eval("z1", v, 3) == 10.0);
  CHECK(eval("z3", v, 3) == 30.0);
  CHECK(eval("zp2", v, 3) == -2.0);
  CHECK(eval("z2 + zp1", v, 3) == 19.0);

  const expression e = parse("z2*zp3", profile::driver, 3);
  CHECK(e.max_z_index() == 2);
  CHECK(e.max_zp_index() == 3);
}

TEST_CASE("seminorm atoms") {
  eval_values v;
  v.snorm_z = 2.0;
  v.snorm_zp = 0.5;
  CHECK(eval("snorm(z)", v) == 2.0);
  CHECK(eval("snorm_p(zp)", v) == 0.5);

  const expression e = parse("max(y, 0) - 0.5*snorm(z)", profile::driver, 0);
  CHECK(e.uses_snorm_z());
  CHECK(!e.uses_snorm_zp());
  eval_values w;
  w.y = -1.0;
  w.snorm_z = 2.0;
  CHECK(e.evaluate(w) == -1.0);

  CHECK_THROWS_AS(parse("snorm(z1)", profile::driver, 2), mfbsde::syntax_error);
  CHECK_THROWS_AS(parse("snorm(y)", profile::driver, 2), mfbsde::syntax_error);
  CHECK_THROWS_AS(parse("snorm_p(z)", profile::driver, 2), mfbsde::syntax_error);
  try {
    parse("snorm(w)", profile::driver, 2);
    FAIL("expected syntax_error");
  } catch (const mfbsde::syntax_error& e2) {
    CHECK(e2.expected.find("'z' as the argument of snorm") != std::string::npos);
  }
}

TEST_CASE("unknown variables carry name and position") {
  try {
    parse("y + q", profile::driver, 0);
    FAIL("expected unknown_variable_error");
  } catch (const mfbsde::unknown_variable_error& e) {
    CHECK(e.name == "q");
    CHECK(e.position == 4);
  }

  CHECK_THROWS_AS(parse("z0", profile::driver, 2), mfbsde::unknown_variable_error);
  CHECK_THROWS_AS(parse("z3", profile::driver, 2), mfbsde::unknown_variable_error);
  CHECK_THROWS_AS(parse("z1234567", profile::driver, 0),
                  mfbsde::unknown_variable_error);
  CHECK_NOTHROW(parse("z3", profile::driver, 0));
  CHECK_NOTHROW(parse("z3", profile::driver, 3));
}

TEST_CASE("syntax errors carry position and expectation") {
  CHECK_THROWS_AS(parse("", profile::driver, 0), mfbsde::syntax_error);
  CHECK_THROWS_AS(parse("y +", profile::driver, 0), mfbsde::syntax_error);
  CHECK_THROWS_AS(parse("(y", profile::driver, 0), mfbsde::syntax_error);
  CHECK_THROWS_AS(parse("min(1)", profile::driver, 0), mfbsde::syntax_error);
  CHECK_THROWS_AS(parse("abs(1, 2)", profile::driver, 0), mfbsde::syntax_error);
  CHECK_THROWS_AS(parse("foo(1)", profile::driver, 0),
                  mfbsde::unknown_variable_error);

  try {
    parse("y y", profile::driver, 0);
    FAIL("expected syntax_error");
  } catch (const mfbsde::syntax_error& e) {
    CHECK(e.expected == "end of input");
    CHECK(e.position == 2);
  }
}

TEST_CASE("profiles gate the operator and variable sets") {
  // unbounded functions are rejected for drivers with a pointed message
  try {
    parse("exp(y)", profile::driver, 0);
    FAIL("expected syntax_error");
  } catch (const mfbsde::syntax_error& e) {
    CHECK(e.expected.find("bounded function") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("sqrt(y)", profile::driver, 0), mfbsde::syntax_error);
  CHECK_THROWS_AS(parse("pow(y, 2)", profile::driver, 0), mfbsde::syntax_error);

  // ...but allowed in terminal expressions, which only see i and n
  eval_values v;
  v.i = 3.0;
  v.n = 4.0;
  CHECK(parse("exp(1)", profile::terminal, 0).evaluate(v) ==
        doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(parse("sqrt(4)", profile::terminal, 0).evaluate(v) == 2.0);
  CHECK(parse("pow(i, 2)", profile::terminal, 0).evaluate(v) == 9.0);
  CHECK(parse("i/n", profile::terminal, 0).evaluate(v) == 0.75);

  CHECK_THROWS_AS(parse("y", profile::terminal, 0), mfbsde::unknown_variable_error);
  CHECK_THROWS_AS(parse("snorm(z)", profile::terminal, 0),
                  mfbsde::unknown_variable_error);
  CHECK_THROWS_AS(parse("n", profile::driver, 0), mfbsde::unknown_variable_error);
}

namespace {

// Random grammar strings for the round-trip property.
struct expr_gen {
  std::mt19937_64 rng;
  bool terminal;
  int n_states;

  double number() {
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    return u(rng);
  }

  std::string leaf() {
    if (rng() % 3 == 0) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", std::abs(number()));
      return buf;
    }
    if (terminal) {
      return rng() % 2 == 0 ? "i" : "n";
    }
    switch (rng() % 8) {
      case 0: return "t";
      case 1: return "y";
      case 2: return "yp";
      case 3: return "i";
      case 4: return "ip";
      case 5: return "z" + std::to_string(1 + rng() % n_states);
      case 6: return "zp" + std::to_string(1 + rng() % n_states);
      default: return rng() % 2 == 0 ? "snorm(z)" : "snorm_p(zp)";
    }
  }

  std::string gen(int depth) {
    if (depth <= 0) return leaf();
    switch (rng() % 8) {
      case 0: return gen(depth - 1) + " + " + gen(depth - 1);
      case 1: return gen(depth - 1) + " - " + gen(depth - 1);
      case 2: return gen(depth - 1) + "*" + gen(depth - 1);
      case 3: return "(" + gen(depth - 1) + ")/(" + "1 + abs(" + gen(depth - 1) + "))";
      case 4: return "-" + std::string("(") + gen(depth - 1) + ")";
      case 5: {
        const char* fns[] = {"abs", "sin", "cos", "tanh"};
        const char* tfns[] = {"abs", "sin", "cos", "tanh", "exp", "sqrt"};
        const char* f = terminal ? tfns[rng() % 6] : fns[rng() % 4];
        return std::string(f) + "(" + gen(depth - 1) + ")";
      }
      case 6:
        return (rng() % 2 == 0 ? std::string("min(") : std::string("max(")) +
               gen(depth - 1) + ", " + gen(depth - 1) + ")";
      default:
        if (terminal && rng() % 2 == 0) {
          return "pow(" + gen(depth - 1) + ", 2)";
        }
        return "(" + gen(depth - 1) + ")";
    }
  }
};

}  // namespace

TEST_CASE("format/reparse round-trips to the identical tree") {
  for (const bool terminal : {false, true}) {
    expr_gen g{std::mt19937_64(terminal ? 111 : 222), terminal, 3};
    const profile prof = terminal ? profile::terminal : profile::driver;
    for (int trial = 0; trial < 400; ++trial) {
      const std::string text = g.gen(1 + static_cast<int>(g.rng() % 3));
      const expression e1 = parse(text, prof, 3);
      const std::string printed = e1.format();
      INFO(text);
      INFO(printed);
      const expression e2 = parse(printed, prof, 3);
      CHECK(e1 == e2);
      CHECK(e2.format() == printed);
    }
  }
}

TEST_CASE("parsed drivers match hand-coded evaluations") {
  struct catalog_entry {
    std::string text;
    double (*direct)(const eval_values&);
  };
  const std::vector<catalog_entry> catalog = {
      {"0.5*tanh(yp) + 0.3*sin(y)",
       [](const eval_values& v) { return 0.5 * std::tanh(v.yp) + 0.3 * std::sin(v.y); }},
      {"0.4*tanh(snorm(z)) - 0.2*y + 0.1*cos(t)*yp",
       [](const eval_values& v) {
         return 0.4 * std::tanh(v.snorm_z) - 0.2 * v.y + 0.1 * std::cos(v.t) * v.yp;
       }},
      {"0.3*tanh(snorm_p(zp)) + 0.3*tanh(yp)",
       [](const eval_values& v) {
         return 0.3 * std::tanh(v.snorm_zp) + 0.3 * std::tanh(v.yp);
       }},
      {"-0.5*y", [](const eval_values& v) { return -0.5 * v.y; }},
      {"0.5*max(y, 0)",
       [](const eval_values& v) { return 0.5 * std::max(v.y, 0.0); }},
      {"min(y, yp) + abs(z1 - zp2)/(2 + cos(i))",
       [](const eval_values& v) {
         return std::min(v.y, v.yp) +
                std::abs(v.z[0] - v.zp[1]) / (2.0 + std::cos(v.i));
       }},
  };

  std::mt19937_64 rng(314159);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (const auto& entry : catalog) {
    const expression e = parse(entry.text, profile::driver, 2);
    for (int k = 0; k < 1000; ++k) {
      double z[2] = {u(rng), u(rng)};
      double zp[2] = {u(rng), u(rng)};
      eval_values v;
      v.t = std::abs(u(rng)) / 3.0;
      v.y = u(rng);
      v.yp = u(rng);
      v.i = 1.0 + static_cast<double>(rng() % 2);
      v.ip = 1.0 + static_cast<double>(rng() % 2);
      v.z = z;
      v.zp = zp;
      v.snorm_z = std::abs(u(rng));
      v.snorm_zp = std::abs(u(rng));
      const double got = e.evaluate(v);
      const double want = entry.direct(v);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("number formatting survives the round trip exactly") {
  for (const double x : {0.1, 1.0 / 3.0, 2.718281828459045, 1e-17, 123456.789}) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    const expression e = parse(buf, profile::driver, 0);
    eval_values v;
    CHECK(e.evaluate(v) == x);
  }
}
