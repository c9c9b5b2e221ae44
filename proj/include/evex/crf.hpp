#pragma once
// Linear-chain CRF over emission scores P (n x |L|) and transitions A
// (|L| x |L|). A path y scores sum_i P[i][y_i] + sum_{i<n-1} A[y_i][y_{i+1}];
// there are no start/stop transitions.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evex/core.hpp"

namespace evex {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <class It>
double log_sum_exp(It first, It last) {
  double m = kNegInf;
  for (It it = first; it != last; ++it) m = std::max(m, *it);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (It it = first; it != last; ++it) s += std::exp(*it - m);
  return m + std::log(s);
}

/// Which label transitions a decoder may use.
struct Lattice {
  int labels = 0;
  std::vector<char> start;  // start[l]
  std::vector<char> step;   // step[prev * labels + next]

  static Lattice full(int L) { return {L, std::vector<char>(L, 1), std::vector<char>(L * L, 1)}; }
  static Lattice bio(int L) {
    Lattice lat{L, std::vector<char>(L), std::vector<char>(L * L)};
    for (int b = 0; b < L; ++b) {
      lat.start[b] = LabelSet::allowed_start(b);
      for (int a = 0; a < L; ++a) lat.step[a * L + b] = LabelSet::allowed(a, b);
    }
    return lat;
  }
  bool can_start(int l) const { return start[l] != 0; }
  bool can_step(int a, int b) const { return step[a * labels + b] != 0; }
};

namespace crf_detail {

inline void check_shapes(const Matrix& P, const Matrix& A) {
  if (P.rows() < 1) throw Error("shape", "emission matrix has no rows");
  if (A.rows() != A.cols() || A.rows() != P.cols())
    throw Error("shape", "transition matrix is " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                             " for " + std::to_string(P.cols()) + " labels");
}

inline void check_path(const Matrix& P, const std::vector<int>& y) {
  if (static_cast<Eigen::Index>(y.size()) != P.rows())
    throw Error("bad_sequence", "sequence length " + std::to_string(y.size()) + " != " + std::to_string(P.rows()));
  for (int l : y)
    if (l < 0 || l >= P.cols()) throw Error("bad_sequence", "label " + std::to_string(l) + " out of range");
}

}  // namespace crf_detail

inline double seq_score(const Matrix& P, const Matrix& A, const std::vector<int>& y) {
  crf_detail::check_shapes(P, A);
  crf_detail::check_path(P, y);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += P(i, y[i]);
  for (std::size_t i = 0; i + 1 < y.size(); ++i) s += A(y[i], y[i + 1]);
  return s;
}

/// Log-space forward scores alpha[i][l]: log-sum over prefixes ending in l.
inline Matrix forward_scores(const Matrix& P, const Matrix& A) {
  const Eigen::Index n = P.rows(), L = P.cols();
  Matrix alpha(n, L);
  alpha.row(0) = P.row(0);
  std::vector<double> terms(L);
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index b = 0; b < L; ++b) {
      for (Eigen::Index a = 0; a < L; ++a) terms[a] = alpha(i - 1, a) + A(a, b);
      alpha(i, b) = P(i, b) + log_sum_exp(terms.begin(), terms.end());
    }
  return alpha;
}

/// Log-space backward scores beta[i][l]: log-sum over suffixes after l at i.
inline Matrix backward_scores(const Matrix& P, const Matrix& A) {
  const Eigen::Index n = P.rows(), L = P.cols();
  Matrix beta(n, L);
  beta.row(n - 1).setZero();
  std::vector<double> terms(L);
  for (Eigen::Index i = n - 2; i >= 0; --i)
    for (Eigen::Index a = 0; a < L; ++a) {
      for (Eigen::Index b = 0; b < L; ++b) terms[b] = A(a, b) + P(i + 1, b) + beta(i + 1, b);
      beta(i, a) = log_sum_exp(terms.begin(), terms.end());
    }
  return beta;
}

inline double log_partition(const Matrix& P, const Matrix& A) {
  crf_detail::check_shapes(P, A);
  Matrix alpha = forward_scores(P, A);
  Vector last = alpha.row(alpha.rows() - 1).transpose();
  return log_sum_exp(last.data(), last.data() + last.size());
}

/// Same quantity via the right-to-left recursion.
inline double log_partition_reverse(const Matrix& P, const Matrix& A) {
  crf_detail::check_shapes(P, A);
  Matrix beta = backward_scores(P, A);
  std::vector<double> terms(P.cols());
  for (Eigen::Index l = 0; l < P.cols(); ++l) terms[l] = P(0, l) + beta(0, l);
  return log_sum_exp(terms.begin(), terms.end());
}

struct CrfLoss {
  double loss = 0.0;
  Matrix dP;
  Matrix dA;
};

/// Negative log-likelihood of `gold` and its gradients (marginals minus
/// indicators).
inline CrfLoss nll_loss_and_grads(const Matrix& P, const Matrix& A, const std::vector<int>& gold) {
  crf_detail::check_shapes(P, A);
  crf_detail::check_path(P, gold);
  const Eigen::Index n = P.rows(), L = P.cols();
  const Matrix alpha = forward_scores(P, A);
  const Matrix beta = backward_scores(P, A);
  Vector last = alpha.row(n - 1).transpose();
  const double log_z = log_sum_exp(last.data(), last.data() + last.size());

  CrfLoss out;
  out.loss = log_z - seq_score(P, A, gold);
  out.dP = (alpha + beta).array() - log_z;
  out.dP = out.dP.array().exp();
  out.dA = Matrix::Zero(L, L);
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    for (Eigen::Index a = 0; a < L; ++a)
      for (Eigen::Index b = 0; b < L; ++b)
        out.dA(a, b) += std::exp(alpha(i, a) + A(a, b) + P(i + 1, b) + beta(i + 1, b) - log_z);
  for (Eigen::Index i = 0; i < n; ++i) out.dP(i, gold[i]) -= 1.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) out.dA(gold[i], gold[i + 1]) -= 1.0;
  return out;
}

struct Decoded {
  std::vector<int> labels;
  double score = kNegInf;
  friend bool operator==(const Decoded&, const Decoded&) = default;
};

/// Max-scoring path restricted to `lattice`. Among equal scores the path with
/// the smallest label at the latest differing position wins.
inline Decoded viterbi(const Matrix& P, const Matrix& A, const Lattice& lattice) {
  crf_detail::check_shapes(P, A);
  const Eigen::Index n = P.rows(), L = P.cols();
  Matrix delta = Matrix::Constant(n, L, kNegInf);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> back(n, L);
  back.setConstant(-1);
  for (Eigen::Index l = 0; l < L; ++l)
    if (lattice.can_start(static_cast<int>(l))) delta(0, l) = P(0, l);
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index b = 0; b < L; ++b) {
      double best = kNegInf;
      int arg = -1;
      for (Eigen::Index a = 0; a < L; ++a) {
        if (!lattice.can_step(static_cast<int>(a), static_cast<int>(b)) || delta(i - 1, a) == kNegInf) continue;
        const double v = delta(i - 1, a) + A(a, b);
        if (arg < 0 || v > best) {
          best = v;
          arg = static_cast<int>(a);
        }
      }
      if (arg >= 0) {
        delta(i, b) = best + P(i, b);
        back(i, b) = arg;
      }
    }
  int end = -1;
  for (Eigen::Index l = 0; l < L; ++l)
    if (delta(n - 1, l) != kNegInf && (end < 0 || delta(n - 1, l) > delta(n - 1, end))) end = static_cast<int>(l);
  if (end < 0) end = 0;  // every path scores -inf
  Decoded out;
  out.labels.assign(n, 0);
  out.labels[n - 1] = end;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const int prev = back(i, out.labels[i]);
    out.labels[i - 1] = prev >= 0 ? prev : 0;
  }
  out.score = seq_score(P, A, out.labels);
  return out;
}

inline Decoded viterbi(const Matrix& P, const Matrix& A) {
  return viterbi(P, A, Lattice::full(static_cast<int>(P.cols())));
}

/// best_suffix(i, l): best score of positions i+1..n-1 (emissions and
/// transitions, including the one leaving position i) given y_i = l, within
/// the lattice. -inf when no continuation exists.
inline Matrix best_suffix(const Matrix& P, const Matrix& A, const Lattice& lattice) {
  const Eigen::Index n = P.rows(), L = P.cols();
  Matrix h = Matrix::Constant(n, L, kNegInf);
  h.row(n - 1).setZero();
  for (Eigen::Index i = n - 2; i >= 0; --i)
    for (Eigen::Index a = 0; a < L; ++a)
      for (Eigen::Index b = 0; b < L; ++b) {
        if (!lattice.can_step(static_cast<int>(a), static_cast<int>(b)) || h(i + 1, b) == kNegInf) continue;
        h(i, a) = std::max(h(i, a), A(a, b) + P(i + 1, b) + h(i + 1, b));
      }
  return h;
}

}  // namespace evex
