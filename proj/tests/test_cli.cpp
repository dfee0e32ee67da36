#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

using nlohmann::json;
using geomflow::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) v.push_back(l);
  return v;
}

std::vector<double> fields(const std::string& line) {
  std::vector<double> v;
  std::istringstream is(line);
  for (std::string f; std::getline(is, f, ',');) v.push_back(std::stod(f));
  return v;
}

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("curvature") {
  auto r = call({"curvature", "--metric", "1,1,1"});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["k1"] == -7.0);
  CHECK(j["k2"] == 1.0);
  CHECK(j["k3"] == 1.0);
  for (const char* key : {"F1", "F2", "F3", "ric1", "ric2", "ric3", "h1", "h2", "h3", "scalar"}) CHECK(j.contains(key));

  r = call({"curvature", "--metric", "1,2,1"});
  j = json::parse(r.out);
  CHECK(j["F1"] == -8.0);
  CHECK(j["F3"] == 8.0);
  CHECK(j["k3"] == 4.0);

  r = call({"curvature", "--metric", "1,2,1", "--format", "csv"});
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] == "k1,k2,k3,F1,F2,F3,ric1,ric2,ric3,h1,h2,h3,scalar");
  CHECK(fields(ls[1])[3] == -8.0);

  CHECK(call({"curvature", "--metric", "1,0,1"}).code == 2);
  CHECK(call({"curvature", "--metric", "1,2"}).code == 2);
  CHECK(call({"curvature", "--metric", "one,2,1"}).code == 2);
  CHECK(call({"curvature"}).code == 2);
  CHECK(call({"no-such-command"}).code == 2);
}

TEST_CASE("integrate") {
  auto r = call({"integrate", "--flow", "ricci", "--direction", "backward", "--metric", "1,2,1"});
  REQUIRE(r.code == 0);
  auto ls = lines(r.out);
  REQUIRE(ls.size() > 3);
  CHECK(ls.front() == "t,A,B,C");
  CHECK(ls.back().rfind("# termination=", 0) == 0);
  const std::string why = ls.back().substr(14);
  CHECK((why == "ComponentCeiling" || why == "ComponentFloor" || why == "StepUnderflow"));
  // Rows are one per accepted step and round-trip exactly.
  const auto row = fields(ls[1]);
  CHECK(row == std::vector<double>{0.0, 1.0, 2.0, 1.0});

  // With ABC = 1 the forward Ricci flow has B ~ (2/3) t.
  r = call({"integrate", "--direction", "forward", "--metric", "0.5,2,1", "--t-end", "1000"});
  REQUIRE(r.code == 0);
  ls = lines(r.out);
  CHECK(ls.back() == "# termination=TimeReached");
  const auto last = fields(ls[ls.size() - 2]);
  CHECK(last[0] == 1000.0);
  CHECK(last[2] / last[0] == doctest::Approx(2.0 / 3.0).epsilon(0.01));

  CHECK(call({"integrate", "--metric", "1,2,1", "--t-end", "0"}).code == 2);
  CHECK(call({"integrate", "--metric", "1,2,1", "--rtol", "-1"}).code == 2);
  CHECK(call({"integrate", "--metric", "1,2,1", "--flow", "heat"}).code == 2);
  CHECK(call({"integrate", "--metric", "1,2,1", "--direction", "sideways"}).code == 2);

  const auto path = temp_file("geomflow_cli_integrate.csv");
  r = call({"integrate", "--metric", "1,2,1", "--out", path.string(), "--stride", "10"});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str().rfind("t,A,B,C\n", 0) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("classify") {
  auto label = [](std::vector<std::string> args) {
    args.insert(args.begin(), "classify");
    args.push_back("--no-fit");
    args.push_back("--format");
    args.push_back("json");
    const auto r = call(args);
    REQUIRE(r.code == 0);
    return json::parse(r.out)["case"].get<std::string>();
  };
  CHECK(label({"--flow", "ricci", "--metric", "3,2,1"}) == "Q1");
  CHECK(label({"--flow", "ricci", "--metric", "1,3,1"}) == "Q2");
  CHECK(label({"--flow", "xcf", "--metric", "0.01,2,1"}) == "Q2");

  // With the fit the exponents come along.
  const auto r = call({"classify", "--flow", "ricci", "--metric", "3,2,1", "--format", "json"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  REQUIRE(j["fit"].is_object());
  CHECK(j["fit"]["exponents"][0].get<double>() == doctest::Approx(-0.5).epsilon(0.02));
  CHECK(j["fit"]["half_widths"].size() == 3);
  CHECK(j["fit"]["etas"].size() == 3);
}

TEST_CASE("exponents") {
  const auto r = call({"exponents", "--flow", "xcf", "--metric", "5,2,1", "--format", "csv"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 5);
  CHECK(ls[0] == "component,exponent,half_width,eta");
  CHECK(ls[1].rfind("A,", 0) == 0);
  CHECK(ls[4].rfind("# Tb=", 0) == 0);
  // No blow-up before the horizon is a numerical failure, not a usage error.
  CHECK(call({"exponents", "--metric", "1,2,1", "--t-end", "1e-6"}).code == 3);

  // This run blows up at T_b ~ 2e-6; the default h_min ends it before the power laws settle.
  const auto s = call({"exponents", "--flow", "xcf", "--metric", "0.01,2,1", "--h-min", "1e-300"});
  REQUIRE(s.code == 0);
  const auto e = json::parse(s.out)["exponents"];
  CHECK(e[0].get<double>() == doctest::Approx(3.0 / 14.0).epsilon(0.05));
  CHECK(e[1].get<double>() == doctest::Approx(-1.0 / 14.0).epsilon(0.05));
  CHECK(call({"exponents", "--metric", "1,2,1", "--h-min", "0"}).code == 2);
}

TEST_CASE("separatrix") {
  auto r = call({"separatrix", "--flow", "ricci", "--b-max", "10"});
  REQUIRE(r.code == 0);
  auto ls = lines(r.out);
  CHECK(ls[0] == "b,c");
  CHECK(ls.size() > 10);
  const auto last = fields(ls.back());
  CHECK(last[0] == doctest::Approx(10.0).epsilon(1e-6));

  r = call({"separatrix", "--flow", "xcf"});
  REQUIRE(r.code == 0);
  ls = lines(r.out);
  CHECK(ls[0] == "a,c");
  for (std::size_t i = 1; i < ls.size(); ++i) CHECK(fields(ls[i])[1] <= 1.0);
}

TEST_CASE("portrait") {
  SUBCASE("empty grid gives the header only") {
    const auto r = call({"portrait", "--grid", "1:2:0,1:2:0"});
    CHECK(r.code == 0);
    CHECK(r.out == "line_id,x,y\n");
  }
  SUBCASE("separatrix is line 0 and ids ascend") {
    const auto r = call({"portrait", "--flow", "ricci", "--grid", "0.5:5:4,0.25:4.75:4"});
    REQUIRE(r.code == 0);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() > 2);
    CHECK(fields(ls[1])[0] == 0.0);
    double prev = 0.0;
    for (std::size_t i = 1; i < ls.size(); ++i) {
      const double id = fields(ls[i])[0];
      CHECK(id >= prev);
      prev = id;
    }
  }
  SUBCASE("output is byte-stable across runs and thread counts") {
    const auto a = call({"portrait", "--flow", "xcf", "--threads", "1"});
    const auto b = call({"portrait", "--flow", "xcf", "--threads", "4"});
    const auto c = call({"portrait", "--flow", "xcf", "--threads", "4"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(b.out == c.out);
  }
  CHECK(call({"portrait", "--grid", "1:2"}).code == 2);
  CHECK(call({"portrait", "--grid", "2:1:3,1:2:3"}).code == 2);
}

TEST_CASE("blowup-report") {
  auto r = call({"blowup-report", "--format", "json"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  REQUIRE(j["equilibria"].size() == 8);
  int families[3] = {0, 0, 0};
  for (const auto& e : j["equilibria"]) {
    const double c2 = e["cos2"].get<double>();
    const double rr = e["radial_rate"].get<double>(), ar = e["angular_rate"].get<double>();
    if (c2 == 0.0) {
      ++families[0];
      CHECK(rr == doctest::Approx(2.0));
      CHECK(ar == doctest::Approx(-4.0));
    } else if (c2 == 1.0) {
      ++families[2];
      CHECK(rr == doctest::Approx(0.0));
      CHECK(ar == doctest::Approx(-8.0));
    } else {
      ++families[1];
      CHECK(rr == doctest::Approx(-4.0 / 3.0));
      CHECK(ar == doctest::Approx(16.0 / 3.0));
    }
  }
  CHECK(families[0] == 2);
  CHECK(families[1] == 4);
  CHECK(families[2] == 2);
  bool found = false;
  for (const auto& a : j["axis_checks"]) {
    if (a["theta0"] == 0.5 && a["r0"] == 0.1) {
      found = true;
      CHECK(a["summary"] == "non-approach confirmed");
    }
  }
  CHECK(found);

  r = call({"blowup-report", "--format", "csv"});
  REQUIRE(r.code == 0);
  CHECK(lines(r.out)[0] == "theta,cos2,radial_rate,angular_rate,kind,physical");
}

TEST_CASE("config file and flag precedence") {
  const auto path = temp_file("geomflow_cli_config.json");
  {
    std::ofstream f(path);
    f << R"({"metric": "1,3,1", "flow": "ricci", "format": "json"})";
  }
  auto r = call({"classify", "--config", path.string(), "--no-fit"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["case"] == "Q2");
  r = call({"classify", "--config", path.string(), "--no-fit", "--metric", "3,2,1"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["case"] == "Q1");
  {
    std::ofstream f(path);
    f << R"({"metric": "1,3,1", "colour": "blue"})";
  }
  CHECK(call({"classify", "--config", path.string()}).code == 2);
  {
    std::ofstream f(path);
    f << "{not json";
  }
  CHECK(call({"classify", "--config", path.string()}).code == 2);
  std::filesystem::remove(path);
  CHECK(call({"classify", "--config", path.string()}).code == 2);
}
