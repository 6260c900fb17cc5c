#pragma once

// Kronecker-product primitives: powers, multilinear (mode-product)
// applications, the generalized k-way Lyapunov matrix
//
//   L_k^E(M) = sum_{i=1..k} E^{(x)(i-1)} (x) M (x) E^{(x)(k-i)},
//
// the block matrix M_k^B(A) whose i-th block is B^{(x)(i-1)} (x) A (x)
// I^{(x)(k-i)}, and coefficient symmetrization.  Everything here is pure and
// deterministic: summation orders are fixed.

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "types.hpp"

namespace daekron {

// Maximum entry count for which assembled (dense) forms are permitted; larger
// operators exist only in factor form.
inline constexpr std::int64_t kAssembleEntryLimit = 20'000'000;

// ---------------------------------------------------------------------------
// Dense Kronecker helpers
// ---------------------------------------------------------------------------

inline Mat kron_dense(const Mat& A, const Mat& B) {
  Mat out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

inline Vec kron_vec(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// ---------------------------------------------------------------------------
// kron_power
// ---------------------------------------------------------------------------

struct KroneckerPower {
  Index base_dim = 0;
  int order = 0;
  Vec data;  // length base_dim^order
};

inline KroneckerPower kron_power(const Vec& x, int k) {
  if (k < 1) throw ValidationError("kron_power: order k must be >= 1");
  if (x.size() < 1) throw ValidationError("kron_power: empty base vector");
  Vec acc = x;
  for (int i = 1; i < k; ++i) acc = kron_vec(acc, x);
  return KroneckerPower{x.size(), k, std::move(acc)};
}

// ---------------------------------------------------------------------------
// kron_apply: (A_1 (x) ... (x) A_k) v by successive mode products, never
// assembling the product matrix.  Rectangular factors are allowed; the factor
// column counts must multiply to length(v).
// ---------------------------------------------------------------------------

namespace detail {
// One mode-product cycle: contracts the fastest index with A and rotates it
// to the slowest position.  After applying all k factors in reverse order the
// original index order is restored.
inline Vec mode_apply_cycle(const Mat& A, const Vec& v) {
  const Index c = A.cols();
  const Index rest = v.size() / c;
  Eigen::Map<const Mat> M(v.data(), c, rest);
  Mat AM = A * M;  // (rows x rest)
  Vec out(AM.size());
  Eigen::Map<Mat>(out.data(), rest, A.rows()) = AM.transpose();
  return out;
}
}  // namespace detail

inline Vec kron_apply(const std::vector<Mat>& factors, Vec v) {
  std::int64_t need = 1;
  for (const Mat& A : factors) need *= A.cols();
  if (need != v.size())
    throw ValidationError("kron_apply: factor column counts do not match vector length");
  for (auto it = factors.rbegin(); it != factors.rend(); ++it)
    v = detail::mode_apply_cycle(*it, v);
  return v;
}

inline Vec kron_pow_apply(const Mat& A, int k, Vec v) {
  if (static_cast<std::int64_t>(v.size()) != ipow(A.cols(), k))
    throw ValidationError("kron_pow_apply: vector length mismatch");
  for (int i = 0; i < k; ++i) v = detail::mode_apply_cycle(A, v);
  return v;
}

// ---------------------------------------------------------------------------
// Generalized k-way Lyapunov matrix L_k^E(M)
// ---------------------------------------------------------------------------

struct KWayLyapunovOperator {
  Mat M;  // q x n
  Mat E;  // n x n
  int k = 1;

  Index rows() const { return ipow(E.rows(), k - 1) * M.rows(); }
  Index cols() const { return ipow(E.cols(), k); }

  // Matrix-free application (sum of k mode-product chains, fixed order).
  Vec apply(const Vec& v) const {
    if (v.size() != cols()) throw ValidationError("KWayLyapunovOperator: size mismatch");
    Vec out = Vec::Zero(rows());
    for (int i = 1; i <= k; ++i) {
      std::vector<Mat> facs;
      facs.reserve(k);
      for (int j = 0; j < i - 1; ++j) facs.push_back(E);
      facs.push_back(M);
      for (int j = i; j < k; ++j) facs.push_back(E);
      out += kron_apply(facs, v);
    }
    return out;
  }

  bool assembly_allowed() const { return rows() * cols() <= kAssembleEntryLimit; }

  Mat assembled() const {
    if (!assembly_allowed())
      throw ValidationError("KWayLyapunovOperator: assembled form exceeds the entry limit");
    Mat out = Mat::Zero(rows(), cols());
    for (int i = 1; i <= k; ++i) {
      Mat acc = Mat::Ones(1, 1);
      for (int j = 1; j <= k; ++j) acc = kron_dense(acc, j == i ? M : E);
      out += acc;
    }
    return out;
  }
};

inline KWayLyapunovOperator build_Lk(const Mat& M, const Mat& E, int k) {
  if (k < 1) throw ValidationError("build_Lk: order k must be >= 1");
  if (E.rows() != E.cols()) throw ValidationError("build_Lk: E must be square");
  if (M.cols() != E.cols()) throw ValidationError("build_Lk: M and E column mismatch");
  return KWayLyapunovOperator{M, E, k};
}

inline Vec apply_Lk(const Mat& M, const Mat& E, int k, const Vec& v) {
  return build_Lk(M, E, k).apply(v);
}

// ---------------------------------------------------------------------------
// Block Kronecker matrix M_k^B(A)
// ---------------------------------------------------------------------------

struct BlockKroneckerMatrix {
  Mat A;  // n1 x n2
  Mat B;  // n1 x r
  int k = 1;

  Index n1() const { return A.rows(); }
  Index rows() const { return ipow(n1(), k); }

  Index block_cols(int i) const {  // i in [1, k]
    return ipow(B.cols(), i - 1) * A.cols() * ipow(n1(), k - i);
  }

  Index cols() const {
    Index c = 0;
    for (int i = 1; i <= k; ++i) c += block_cols(i);
    return c;
  }

  // Assembled i-th block B^{(x)(i-1)} (x) A (x) I^{(x)(k-i)}.
  Mat block(int i) const {
    Mat acc = Mat::Ones(1, 1);
    const Mat I = Mat::Identity(n1(), n1());
    for (int j = 1; j <= k; ++j) acc = kron_dense(acc, j < i ? B : (j == i ? A : I));
    return acc;
  }

  Mat assembled() const {
    if (rows() * cols() > kAssembleEntryLimit)
      throw ValidationError("BlockKroneckerMatrix: assembled form exceeds the entry limit");
    Mat out(rows(), cols());
    Index c0 = 0;
    for (int i = 1; i <= k; ++i) {
      out.middleCols(c0, block_cols(i)) = block(i);
      c0 += block_cols(i);
    }
    return out;
  }

  // y^T -> (M_k)^T y applied block-wise without assembling.
  Vec applyT(const Vec& y) const {
    Vec out(cols());
    Index c0 = 0;
    const Mat I = Mat::Identity(n1(), n1());
    for (int i = 1; i <= k; ++i) {
      std::vector<Mat> facs;
      for (int j = 1; j <= k; ++j) facs.push_back(j < i ? Mat(B.transpose())
                                                        : (j == i ? Mat(A.transpose()) : I));
      out.segment(c0, block_cols(i)) = kron_apply(facs, y);
      c0 += block_cols(i);
    }
    return out;
  }
};

inline BlockKroneckerMatrix build_Mk(const Mat& A, const Mat& B, int k) {
  if (k < 1) throw ValidationError("build_Mk: order k must be >= 1");
  if (B.rows() != A.rows()) throw ValidationError("build_Mk: A and B row mismatch");
  return BlockKroneckerMatrix{A, B, k};
}

inline BlockKroneckerMatrix build_Mk(const Mat& A, int k) {
  return build_Mk(A, Mat::Identity(A.rows(), A.rows()), k);
}

// ---------------------------------------------------------------------------
// Symmetrization: average over all slot permutations, computed by counting
// over sorted multi-indices (k! never enumerated).
// ---------------------------------------------------------------------------

struct SymmetricCoefficient {
  Index n = 0;
  int k = 0;
  Vec data;
};

inline Vec symmetrize_vec(const Vec& v, Index n, int k) {
  if (static_cast<std::int64_t>(v.size()) != ipow(n, k))
    throw ValidationError("symmetrize: length is not n^k");
  const Index total = v.size();
  std::unordered_map<std::int64_t, std::pair<double, std::int64_t>> classes;
  classes.reserve(static_cast<size_t>(total));
  std::vector<Index> idx(k, 0), sorted(k);

  auto canonical_key = [&]() {
    sorted.assign(idx.begin(), idx.end());
    std::sort(sorted.begin(), sorted.end());
    std::int64_t key = 0;
    for (int t = k - 1; t >= 0; --t) key = key * n + sorted[t];
    return key;
  };
  auto advance = [&]() {
    for (int t = 0; t < k; ++t) {
      if (++idx[t] < n) break;
      idx[t] = 0;
    }
  };

  for (Index p = 0; p < total; ++p, advance()) {
    auto& slot = classes[canonical_key()];
    slot.first += v(p);
    slot.second += 1;
  }
  Vec out(total);
  std::fill(idx.begin(), idx.end(), 0);
  for (Index p = 0; p < total; ++p, advance()) {
    const auto& slot = classes[canonical_key()];
    out(p) = slot.first / static_cast<double>(slot.second);
  }
  return out;
}

inline SymmetricCoefficient symmetrize_coeff(const Vec& v, Index n, int k) {
  return SymmetricCoefficient{n, k, symmetrize_vec(v, n, k)};
}

}  // namespace daekron
