#pragma once

// File formats: JSON documents for systems, reduced systems and energy
// polynomials (bit-exact round trips via shortest-round-trip doubles), plus
// fixed-format CSV emission for comparison tables and sweep summaries.

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "daekron/dae_reduction.hpp"
#include "daekron/energy_coeffs.hpp"
#include "daekron/feedback_sim.hpp"
#include "daekron/types.hpp"

namespace daekron {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Matrix encoding: dense row-major nested arrays, or {"triplets": [[i,j,v]]}
// ---------------------------------------------------------------------------

namespace detail {

inline json mat_to_json(const Mat& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const json& j, Index rows, Index cols, const std::string& name) {
  Mat M = Mat::Zero(rows, cols);
  if (j.is_object()) {
    if (!j.contains("triplets") || !j["triplets"].is_array())
      throw ValidationError("system file: " + name + " object form needs a 'triplets' array");
    for (const auto& t : j["triplets"]) {
      if (!t.is_array() || t.size() != 3)
        throw ValidationError("system file: " + name + " triplet must be [row, col, value]");
      const Index r = t[0].get<Index>(), c = t[1].get<Index>();
      if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw ValidationError("system file: " + name + " triplet index out of range");
      M(r, c) = t[2].get<double>();
    }
    return M;
  }
  if (!j.is_array() || static_cast<Index>(j.size()) != rows)
    throw ValidationError("system file: " + name + " must have " + std::to_string(rows) + " rows");
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ValidationError("system file: " + name + " row " + std::to_string(i) +
                            " must have " + std::to_string(cols) + " entries");
    for (Index c = 0; c < cols; ++c) M(i, c) = row[static_cast<size_t>(c)].get<double>();
  }
  return M;
}

// Quadratic tensor as (row, slot j, slot k, value) quadruples with the column
// index j*n1 + k; the two slots are symmetrized on load.
inline json quad_to_json(const Mat& N, Index n1) {
  json out = json::array();
  if (N.size() == 0) return out;
  for (Index i = 0; i < N.rows(); ++i)
    for (Index c = 0; c < N.cols(); ++c)
      if (N(i, c) != 0.0) out.push_back(json::array({i, c / n1, c % n1, N(i, c)}));
  return out;
}

inline Mat quad_from_json(const json& j, Index n1) {
  if (!j.is_array()) throw ValidationError("system file: N must be a list of quadruples");
  if (j.empty()) return Mat();
  Mat N = Mat::Zero(n1, n1 * n1);
  for (const auto& q : j) {
    if (!q.is_array() || q.size() != 4)
      throw ValidationError("system file: N entry must be [row, slot1, slot2, value]");
    const Index i = q[0].get<Index>(), a = q[1].get<Index>(), b = q[2].get<Index>();
    if (i < 0 || i >= n1 || a < 0 || a >= n1 || b < 0 || b >= n1)
      throw ValidationError("system file: N entry index out of range");
    N(i, a * n1 + b) += q[3].get<double>();
  }
  Mat S(n1, n1 * n1);
  for (Index a = 0; a < n1; ++a)
    for (Index b = 0; b < n1; ++b)
      S.col(a * n1 + b) = 0.5 * (N.col(a * n1 + b) + N.col(b * n1 + a));
  return S;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// System documents
// ---------------------------------------------------------------------------

struct SystemDocument {
  StokesDaeSystem system;
  std::string name = "system";
  double eta = 10.0;  // default cost weight carried with the model
  int schema = 1;
};

inline json system_to_json(const SystemDocument& doc) {
  const StokesDaeSystem& s = doc.system;
  json j;
  j["schema"] = doc.schema;
  j["name"] = doc.name;
  j["eta"] = doc.eta;
  j["dims"] = {{"n1", s.n1()}, {"n2", s.n2()}, {"m", s.m()}, {"p", s.p()}};
  j["E11"] = detail::mat_to_json(s.E11);
  j["A11"] = detail::mat_to_json(s.A11);
  j["A12"] = detail::mat_to_json(s.A12);
  j["N"] = detail::quad_to_json(s.N, s.n1());
  j["B1"] = detail::mat_to_json(s.B1);
  j["B2"] = detail::mat_to_json(s.B2);
  j["C1"] = detail::mat_to_json(s.C1);
  return j;
}

inline SystemDocument system_from_json(const json& j) {
  SystemDocument doc;
  if (!j.is_object()) throw ValidationError("system file: top level must be an object");
  if (j.contains("schema") && j["schema"].get<int>() != 1)
    throw ValidationError("system file: unsupported schema version");
  if (j.contains("name")) doc.name = j["name"].get<std::string>();
  if (j.contains("eta")) doc.eta = j["eta"].get<double>();
  if (!j.contains("dims")) throw ValidationError("system file: missing 'dims'");
  const auto& d = j["dims"];
  for (const char* key : {"n1", "n2", "m", "p"})
    if (!d.contains(key)) throw ValidationError(std::string("system file: dims missing ") + key);
  const Index n1 = d["n1"].get<Index>(), n2 = d["n2"].get<Index>();
  const Index m = d["m"].get<Index>(), p = d["p"].get<Index>();
  if (n1 < 1 || n2 < 0 || m < 1 || p < 1)
    throw ValidationError("system file: dimensions out of range");
  for (const char* key : {"E11", "A11", "A12", "B1", "B2", "C1"})
    if (!j.contains(key)) throw ValidationError(std::string("system file: missing ") + key);
  StokesDaeSystem& s = doc.system;
  s.E11 = detail::mat_from_json(j["E11"], n1, n1, "E11");
  s.A11 = detail::mat_from_json(j["A11"], n1, n1, "A11");
  s.A12 = detail::mat_from_json(j["A12"], n1, n2, "A12");
  s.N = j.contains("N") ? detail::quad_from_json(j["N"], n1) : Mat();
  s.B1 = detail::mat_from_json(j["B1"], n1, m, "B1");
  s.B2 = detail::mat_from_json(j["B2"], n2, m, "B2");
  s.C1 = detail::mat_from_json(j["C1"], p, n1, "C1");
  return doc;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw ValidationError("write failed: " + path);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("parse error in " + path + ": " + e.what());
  }
  return j;
}

inline void write_system(const std::string& path, const SystemDocument& doc) {
  write_json_file(path, system_to_json(doc));
}

inline SystemDocument read_system(const std::string& path) {
  return system_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Reduced-system documents (diagnostic artifact of the reduce command)
// ---------------------------------------------------------------------------

inline json reduced_to_json(const ReducedOdeSystem& red) {
  json j;
  j["schema"] = 1;
  j["r"] = red.r();
  j["m"] = red.m();
  j["E_d"] = detail::mat_to_json(red.E_d);
  j["A_d"] = detail::mat_to_json(red.A_d);
  j["N_d"] = detail::mat_to_json(red.N_d);
  j["B_const"] = detail::mat_to_json(red.B_const);
  j["G_lin"] = detail::mat_to_json(red.G_lin);
  j["s_d"] = detail::mat_to_json(red.s_d);
  j["s"] = detail::mat_to_json(red.s);
  j["C_d"] = detail::mat_to_json(red.C_d);
  j["D_d"] = detail::mat_to_json(red.D_d);
  j["Pi"] = detail::mat_to_json(red.projectors.Pi);
  j["Theta_l"] = detail::mat_to_json(red.projectors.Theta_l);
  j["Theta_r"] = detail::mat_to_json(red.projectors.Theta_r);
  return j;
}

// ---------------------------------------------------------------------------
// Energy-polynomial documents
// ---------------------------------------------------------------------------

inline json energy_to_json(const EnergyPolynomial& poly) {
  json j;
  j["schema"] = 1;
  j["kind"] = poly.kind == EnergyKind::future ? "future" : "past";
  j["eta"] = poly.eta;
  j["degree"] = poly.degree;
  j["n"] = poly.n;
  json c = json::object();
  for (const auto& [k, w] : poly.coeffs) {
    json arr = json::array();
    for (Index i = 0; i < w.size(); ++i) arr.push_back(w(i));
    c[std::to_string(k)] = std::move(arr);
  }
  j["coeffs"] = std::move(c);
  return j;
}

inline EnergyPolynomial energy_from_json(const json& j) {
  EnergyPolynomial poly;
  if (!j.is_object()) throw ValidationError("energy file: top level must be an object");
  if (j.contains("schema") && j["schema"].get<int>() != 1)
    throw ValidationError("energy file: unsupported schema version");
  for (const char* key : {"kind", "eta", "degree", "n", "coeffs"})
    if (!j.contains(key)) throw ValidationError(std::string("energy file: missing ") + key);
  const std::string kind = j["kind"].get<std::string>();
  if (kind != "future" && kind != "past")
    throw ValidationError("energy file: kind must be 'future' or 'past'");
  poly.kind = kind == "future" ? EnergyKind::future : EnergyKind::past;
  poly.eta = j["eta"].get<double>();
  poly.degree = j["degree"].get<int>();
  poly.n = j["n"].get<Index>();
  if (poly.n < 1 || poly.degree < 2) throw ValidationError("energy file: bad dimensions");
  for (const auto& [key, arr] : j["coeffs"].items()) {
    int k = 0;
    try {
      k = std::stoi(key);
    } catch (const std::exception&) {
      throw ValidationError("energy file: non-numeric coefficient key '" + key + "'");
    }
    if (k < 2 || k > poly.degree) throw ValidationError("energy file: coefficient order out of range");
    if (!arr.is_array() || static_cast<Index>(arr.size()) != ipow(poly.n, k))
      throw ValidationError("energy file: coefficient " + key + " has wrong length");
    Vec w(static_cast<Index>(arr.size()));
    for (Index i = 0; i < w.size(); ++i) w(i) = arr[static_cast<size_t>(i)].get<double>();
    poly.coeffs.emplace(k, std::move(w));
  }
  for (int k = 2; k <= poly.degree; ++k)
    if (!poly.coeffs.count(k))
      throw ValidationError("energy file: missing coefficient of order " + std::to_string(k));
  return poly;
}

inline void write_energy(const std::string& path, const EnergyPolynomial& poly) {
  write_json_file(path, energy_to_json(poly));
}

inline EnergyPolynomial read_energy(const std::string& path) {
  return energy_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows, int digits = 6) {
  std::string out = "degree,value,integral,abs_err,rel_err_pct\n";
  for (const auto& r : rows) {
    out += std::to_string(r.degree);
    out += ',';
    out += format_double(r.value, digits);
    out += ',';
    if (r.diverged) {
      out += "divergence,,";
    } else {
      out += format_double(r.integral, digits);
      out += ',';
      out += format_double(r.abs_err, digits);
      out += ',';
      out += format_double(r.rel_err_pct, digits);
    }
    out += '\n';
  }
  return out;
}

inline std::string sweep_csv(const SweepSummary& s, int digits = 6) {
  std::string out = "degree,runs,unstable,stable,mean_rel_err_pct\n";
  for (const auto& d : s.per_degree) {
    out += std::to_string(d.degree);
    out += ',';
    out += std::to_string(s.count);
    out += ',';
    out += std::to_string(d.unstable);
    out += ',';
    out += std::to_string(d.stable);
    out += ',';
    out += format_double(d.mean_rel_err_pct, digits);
    out += '\n';
  }
  return out;
}

}  // namespace daekron
