#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "daekron/benchmarks.hpp"
#include "daekron/energy_coeffs.hpp"
#include "daekron/io.hpp"

using namespace daekron;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

json valid_system_json() {
  SystemDocument doc;
  doc.system = build_scalar_example();
  doc.name = "scalar";
  doc.eta = 10.0;
  return system_to_json(doc);
}

void check_bit_equal(const Mat& a, const Mat& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  if (a.size() > 0) CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

}  // namespace

TEST_CASE("system documents round-trip bit exactly in memory") {
  for (SystemDocument doc :
       {SystemDocument{build_scalar_example(), "scalar", 10.0, 1},
        SystemDocument{build_fisher(fisher_case1_config()), "fisher", 30.0, 1}}) {
    SystemDocument back = system_from_json(system_to_json(doc));
    CHECK(back.name == doc.name);
    CHECK(back.eta == doc.eta);
    check_bit_equal(back.system.E11, doc.system.E11);
    check_bit_equal(back.system.A11, doc.system.A11);
    check_bit_equal(back.system.A12, doc.system.A12);
    check_bit_equal(back.system.B1, doc.system.B1);
    check_bit_equal(back.system.B2, doc.system.B2);
    check_bit_equal(back.system.C1, doc.system.C1);
    if (doc.system.N.size() == 0)
      CHECK(back.system.N.size() == 0);
    else
      check_bit_equal(back.system.N, doc.system.N);
  }
}

TEST_CASE("write-read-write produces byte-identical system files") {
  SystemDocument doc{build_fisher(fisher_case1_config()), "fisher", 30.0, 1};
  const std::string p1 = temp_path("daekron_sys_a.json");
  const std::string p2 = temp_path("daekron_sys_b.json");
  write_system(p1, doc);
  write_system(p2, read_system(p1));
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("energy documents round-trip bit exactly") {
  EnergyPolynomial poly =
      compute_future_energy(reduce_system(build_scalar_example()), 10.0, 5);
  EnergyPolynomial back = energy_from_json(energy_to_json(poly));
  CHECK(back.kind == poly.kind);
  CHECK(back.eta == poly.eta);
  CHECK(back.degree == poly.degree);
  CHECK(back.n == poly.n);
  REQUIRE(back.coeffs.size() == poly.coeffs.size());
  for (const auto& [k, w] : poly.coeffs)
    CHECK((back.coeffs.at(k) - w).cwiseAbs().maxCoeff() == 0.0);

  const std::string p1 = temp_path("daekron_energy_a.json");
  const std::string p2 = temp_path("daekron_energy_b.json");
  write_energy(p1, poly);
  write_energy(p2, read_energy(p1));
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("matrices may be given in triplet form") {
  json j = valid_system_json();
  j["E11"] = {{"triplets", json::array({json::array({0, 0, 1.0}), json::array({1, 1, 2.0})})}};
  SystemDocument doc = system_from_json(j);
  CHECK(doc.system.E11(0, 0) == 1.0);
  CHECK(doc.system.E11(1, 1) == 2.0);
  CHECK(doc.system.E11(0, 1) == 0.0);
}

TEST_CASE("quadratic entries are accumulated and pair-symmetrized on load") {
  json j = valid_system_json();
  j["N"] = json::array({json::array({0, 0, 1, 2.0})});
  SystemDocument doc = system_from_json(j);
  const Mat& N = doc.system.N;
  REQUIRE(N.rows() == 2);
  // slot pair (0,1) and its mirror (1,0) each receive half the weight
  CHECK(N(0, 1) == 1.0);
  CHECK(N(0, 2) == 1.0);
  CHECK(N(0, 0) == 0.0);
  CHECK(N(0, 3) == 0.0);

  // an already-symmetric pair survives unchanged
  json j2 = valid_system_json();
  j2["N"] = json::array({json::array({1, 0, 1, 3.0}), json::array({1, 1, 0, 3.0})});
  CHECK(system_from_json(j2).system.N(1, 1) == 3.0);

  // the empty list is the zero quadratic term
  json j3 = valid_system_json();
  j3["N"] = json::array();
  CHECK(system_from_json(j3).system.N.size() == 0);
}

TEST_CASE("malformed system documents are rejected with validation errors") {
  auto expect_reject = [](json j) { CHECK_THROWS_AS(system_from_json(j), ValidationError); };
  {
    json j = valid_system_json();
    j.erase("dims");
    expect_reject(j);
  }
  {
    json j = valid_system_json();
    j["dims"].erase("n1");
    expect_reject(j);
  }
  {
    json j = valid_system_json();
    j["dims"]["n1"] = 0;
    expect_reject(j);
  }
  {
    json j = valid_system_json();
    j.erase("E11");
    expect_reject(j);
  }
  {
    json j = valid_system_json();
    j["A11"] = json::array({json::array({1.0, 0.0})});  // one row instead of two
    expect_reject(j);
  }
  {
    json j = valid_system_json();
    j["A11"] = json::array({json::array({1.0}), json::array({0.0})});  // short rows
    expect_reject(j);
  }
  {
    json j = valid_system_json();
    j["N"] = json::array({json::array({0, 0, 1})});  // not a quadruple
    expect_reject(j);
  }
  {
    json j = valid_system_json();
    j["N"] = json::array({json::array({0, 0, 5, 1.0})});  // slot out of range
    expect_reject(j);
  }
  {
    json j = valid_system_json();
    j["schema"] = 2;
    expect_reject(j);
  }
}

TEST_CASE("malformed energy documents are rejected with validation errors") {
  EnergyPolynomial poly =
      compute_future_energy(reduce_system(build_scalar_example()), 10.0, 3);
  auto expect_reject = [](json j) { CHECK_THROWS_AS(energy_from_json(j), ValidationError); };
  {
    json j = energy_to_json(poly);
    j["kind"] = "sideways";
    expect_reject(j);
  }
  {
    json j = energy_to_json(poly);
    j["coeffs"].erase("3");
    expect_reject(j);
  }
  {
    json j = energy_to_json(poly);
    j["coeffs"]["2"] = json::array({1.0, 2.0});  // wrong length for n = 1
    expect_reject(j);
  }
  {
    json j = energy_to_json(poly);
    j["coeffs"]["abc"] = json::array({1.0});
    expect_reject(j);
  }
  {
    json j = energy_to_json(poly);
    j["coeffs"]["5"] = json::array({1.0});  // beyond the declared degree
    expect_reject(j);
  }
  {
    json j = energy_to_json(poly);
    j.erase("degree");
    expect_reject(j);
  }
}

TEST_CASE("file-level errors surface as validation errors") {
  CHECK_THROWS_AS(read_json_file(temp_path("daekron_missing_file.json")), ValidationError);
  const std::string p = temp_path("daekron_not_json.json");
  {
    std::ofstream out(p);
    out << "this is not json\n";
  }
  CHECK_THROWS_AS(read_json_file(p), ValidationError);
  std::remove(p.c_str());
}

TEST_CASE("comparison tables render fixed CSV rows") {
  ComparisonRow ok;
  ok.degree = 1;
  ok.value = 0.25;
  ok.integral = 0.5;
  ok.abs_err = 0.25;
  ok.rel_err_pct = 50.0;
  ComparisonRow bad;
  bad.degree = 2;
  bad.value = 1.5;
  bad.diverged = true;
  CHECK(comparison_csv({ok, bad}) ==
        "degree,value,integral,abs_err,rel_err_pct\n"
        "1,0.25,0.5,0.25,50\n"
        "2,1.5,divergence,,\n");

  ComparisonRow third;
  third.degree = 3;
  third.value = 1.0 / 3.0;
  third.integral = 2.0 / 3.0;
  third.abs_err = 1.0 / 3.0;
  third.rel_err_pct = 50.0;
  CHECK(comparison_csv({third}, 3) ==
        "degree,value,integral,abs_err,rel_err_pct\n"
        "3,0.333,0.667,0.333,50\n");
}

TEST_CASE("sweep summaries render fixed CSV rows") {
  SweepSummary s;
  s.seed = 42;
  s.count = 10;
  s.per_degree = {{1, 2, 8, 12.5}, {3, 0, 10, 1.25}};
  CHECK(sweep_csv(s) ==
        "degree,runs,unstable,stable,mean_rel_err_pct\n"
        "1,10,2,8,12.5\n"
        "3,10,0,10,1.25\n");
}
