#pragma once
// Seeded random decode problems and brute-force agreement suites.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evex/crf.hpp"
#include "evex/ilp.hpp"
#include "evex/neural.hpp"

namespace evex {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// Roles r0..r{k-1} with 1-2 key-role groups; |L| = 2k+1 <= max_labels.
inline LabelSet random_label_set(std::mt19937_64& rng, int max_labels = 5) {
  const int max_roles = std::max(1, (max_labels - 1) / 2);
  const int k = 1 + static_cast<int>(rng() % max_roles);
  std::vector<std::string> roles;
  for (int i = 0; i < k; ++i) roles.push_back("r" + std::to_string(i));
  std::map<std::string, std::vector<std::string>> groups;
  const int n_groups = k >= 2 ? 1 + static_cast<int>(rng() % 2) : 1;
  if (n_groups == 1) {
    std::vector<std::string> g;
    for (const auto& r : roles)
      if (g.empty() || rng() % 2) g.push_back(r);
    groups["ev0"] = g;
  } else {
    groups["ev0"] = {roles[0]};
    groups["ev1"] = {roles[1]};
  }
  return LabelSet(roles, groups);
}

inline DecodeProblem random_problem(std::mt19937_64& rng, int max_len = 6, int max_labels = 5) {
  LabelSet ls = random_label_set(rng, max_labels);
  const int n = 1 + static_cast<int>(rng() % max_len);
  DecodeProblem p;
  p.P = random_matrix(rng, n, ls.size());
  p.A = random_matrix(rng, ls.size(), ls.size());
  p.labels = ls;
  return p;
}

struct OracleReport {
  explicit OracleReport(std::string name) : check(std::move(name)) {}

  std::string check;
  int cases = 0;
  int failures = 0;
  double max_error = 0.0;
  double seconds = 0.0;
  std::string first_failure;

  bool ok() const { return cases > 0 && failures == 0; }
  void fail(const std::string& what) {
    if (failures++ == 0) first_failure = what;
  }
  nlohmann::json to_json() const {
    return {{"check", check}, {"cases", cases},     {"failures", failures},          {"max_error", max_error},
            {"ok", ok()},     {"seconds", seconds}, {"first_failure", first_failure}};
  }
};

namespace oracle_detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline double brute_log_partition(const Matrix& P, const Matrix& A) {
  std::vector<double> scores;
  ilp_detail::enumerate_sequences(static_cast<int>(P.rows()), static_cast<int>(P.cols()),
                                  [&](const std::vector<int>& y) { scores.push_back(seq_score(P, A, y)); });
  return log_sum_exp(scores.begin(), scores.end());
}

}  // namespace oracle_detail

/// ilp_decode against exhaustive constrained search; every output must also
/// pass the constraint checker. Scores are compared exactly.
inline OracleReport check_ilp(std::uint64_t seed, int cases = 500) {
  OracleReport r("ilp");
  oracle_detail::Stopwatch clock;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < cases; ++t, ++r.cases) {
    const DecodeProblem p = random_problem(rng);
    const Decoded got = ilp_decode(p), want = brute_force_decode(p);
    r.max_error = std::max(r.max_error, std::abs(got.score - want.score));
    if (got.score != want.score) r.fail("case " + std::to_string(t) + ": score differs from exhaustive search");
    if (!check_ilp_constraints(got.labels, p.labels).ok())
      r.fail("case " + std::to_string(t) + ": output violates C1-C4");
  }
  r.seconds = clock.seconds();
  return r;
}

/// ilp_decode_multi against the exhaustive feasible ranking cut at lambda.
inline OracleReport check_ilp_multi(std::uint64_t seed, int cases = 200) {
  OracleReport r("ilp-multi");
  oracle_detail::Stopwatch clock;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < cases; ++t, ++r.cases) {
    DecodeProblem p = random_problem(rng);
    p.max_solutions = 63;
    const auto got = ilp_decode_multi(p);
    const auto rank = brute_force_rank(p);
    std::size_t expect = 0;
    while (expect < rank.size() && rank.front().score - rank[expect].score <= p.lambda()) ++expect;
    const std::string id = "case " + std::to_string(t) + ": ";
    for (const auto& s : got.solutions)
      if (!check_ilp_constraints(s.labels, p.labels).ok()) r.fail(id + "solution violates C1-C4");
    if (got.truncated) {
      if (expect <= got.solutions.size()) r.fail(id + "truncated without reason");
      continue;
    }
    if (got.solutions.size() != expect) {
      r.fail(id + "solution count differs from exhaustive ranking");
      continue;
    }
    for (std::size_t k = 0; k < expect; ++k) {
      r.max_error = std::max(r.max_error, std::abs(got.solutions[k].score - rank[k].score));
      if (got.solutions[k].score != rank[k].score) r.fail(id + "rank " + std::to_string(k) + " score differs");
    }
  }
  r.seconds = clock.seconds();
  return r;
}

inline OracleReport check_viterbi(std::uint64_t seed, int cases = 500) {
  OracleReport r("viterbi");
  oracle_detail::Stopwatch clock;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < cases; ++t, ++r.cases) {
    const int n = 1 + static_cast<int>(rng() % 6), L = 1 + static_cast<int>(rng() % 5);
    const Matrix P = random_matrix(rng, n, L), A = random_matrix(rng, L, L);
    const Decoded got = viterbi(P, A), want = brute_force_viterbi(P, A);
    r.max_error = std::max(r.max_error, std::abs(got.score - want.score));
    if (got.score != want.score || got.labels != want.labels)
      r.fail("case " + std::to_string(t) + ": differs from exhaustive argmax");
  }
  r.seconds = clock.seconds();
  return r;
}

/// Forward and backward recursions against the log-sum over all paths,
/// relative tolerance 1e-9.
inline OracleReport check_partition(std::uint64_t seed, int cases = 200) {
  OracleReport r("partition");
  oracle_detail::Stopwatch clock;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < cases; ++t, ++r.cases) {
    const int n = 1 + static_cast<int>(rng() % 6), L = 1 + static_cast<int>(rng() % 4);
    const Matrix P = random_matrix(rng, n, L, 3.0), A = random_matrix(rng, L, L, 3.0);
    const double want = oracle_detail::brute_log_partition(P, A);
    for (double got : {log_partition(P, A), log_partition_reverse(P, A)}) {
      const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-300);
      r.max_error = std::max(r.max_error, rel);
      if (std::abs(got - want) > 1e-9 * std::abs(want) + 1e-12)
        r.fail("case " + std::to_string(t) + ": log partition off by " + std::to_string(rel));
    }
  }
  r.seconds = clock.seconds();
  return r;
}

/// CRF NLL gradients for P and A against central differences, absolute 1e-5.
inline OracleReport check_crf_gradients(std::uint64_t first_seed, int seeds = 10) {
  OracleReport r("crf-grad");
  oracle_detail::Stopwatch clock;
  const double eps = 1e-5;
  for (std::uint64_t seed = first_seed; seed < first_seed + static_cast<std::uint64_t>(seeds); ++seed, ++r.cases) {
    std::mt19937_64 rng(seed);
    const int n = 1 + static_cast<int>(rng() % 6), L = 2 + static_cast<int>(rng() % 4);
    const Matrix P = random_matrix(rng, n, L), A = random_matrix(rng, L, L);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng() % L);
    const CrfLoss g = nll_loss_and_grads(P, A, y);
    auto probe = [&](const Matrix& analytic, bool emissions) {
      for (Eigen::Index k = 0; k < analytic.size(); ++k) {
        Matrix hi = emissions ? P : A, lo = hi;
        hi.data()[k] += eps;
        lo.data()[k] -= eps;
        const double fd = emissions
                              ? (nll_loss_and_grads(hi, A, y).loss - nll_loss_and_grads(lo, A, y).loss) / (2 * eps)
                              : (nll_loss_and_grads(P, hi, y).loss - nll_loss_and_grads(P, lo, y).loss) / (2 * eps);
        const double err = std::abs(fd - analytic.data()[k]);
        r.max_error = std::max(r.max_error, err);
        if (err > 1e-5) r.fail("seed " + std::to_string(seed) + (emissions ? ": dP[" : ": dA[") + std::to_string(k) + "]");
      }
    };
    probe(g.dP, true);
    probe(g.dA, false);
  }
  r.seconds = clock.seconds();
  return r;
}

/// BLSTM parameter gradients of the CRF NLL against central differences,
/// relative 1e-3. Alternates stage-1 and stage-2 shapes; odd seeds also draw
/// dropout masks (replayed identically for every probe).
inline OracleReport check_blstm_gradients(std::uint64_t first_seed, int seeds = 10) {
  OracleReport r("blstm-grad");
  oracle_detail::Stopwatch clock;
  const double eps = 1e-4;
  for (std::uint64_t seed = first_seed; seed < first_seed + static_cast<std::uint64_t>(seeds); ++seed, ++r.cases) {
    std::mt19937_64 rng(seed);
    const bool keyargs = seed % 2 == 0, train = seed % 2 == 1;
    ModelConfig cfg;
    cfg.embed_dim = 4;
    cfg.lstm_hidden = 3;
    cfg.keyarg_embed_dim = 2;
    cfg.dropout_rate = train ? 0.3 : 0.0;
    cfg.num_labels = 5;
    cfg.num_keyarg_labels = keyargs ? 3 : 0;
    for (const char* w : {"acme", "bought", "zeta", "in", "2004"}) cfg.vocab.add(w);
    BlstmParams base = BlstmParams::initialize(cfg, rng);
    base.visit([&](const char*, Matrix& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (unit_uniform(rng) * 2.0 - 1.0) * 0.7;
    });
    const int n = 2 + static_cast<int>(rng() % 4);
    std::vector<int> words(n), ka, gold(n);
    for (auto& w : words) w = static_cast<int>(rng() % cfg.vocab.size());
    if (keyargs) {
      ka.resize(n);
      for (auto& k : ka) k = static_cast<int>(rng() % cfg.num_keyarg_labels);
    }
    for (auto& g : gold) g = static_cast<int>(rng() % cfg.num_labels);
    const Matrix A = random_matrix(rng, cfg.num_labels, cfg.num_labels, 1.0);
    const std::uint64_t mask_seed = rng();
    auto loss = [&](const BlstmParams& p, ForwardCache* cache, Matrix* dP) {
      std::mt19937_64 masks(mask_seed);
      const Matrix P = Blstm(cfg, p).forward(words, ka, cache, train ? &masks : nullptr);
      CrfLoss l = nll_loss_and_grads(P, A, gold);
      if (dP) *dP = l.dP;
      return l.loss;
    };

    Blstm net(cfg, base);
    ForwardCache cache;
    std::mt19937_64 masks(mask_seed);
    const Matrix P = net.forward(words, ka, &cache, train ? &masks : nullptr);
    const CrfLoss l = nll_loss_and_grads(P, A, gold);
    BlstmParams grads = BlstmParams::zeros(cfg);
    net.backward(cache, l.dP, grads);
    std::map<std::string, const Matrix*> analytic;
    grads.visit([&](const char* name, Matrix& m) { analytic[name] = &m; });

    base.visit([&](const char* name, Matrix& m) {
      for (Eigen::Index k = 0; k < m.size(); ++k) {
        const double orig = m.data()[k];
        m.data()[k] = orig + eps;
        const double up = loss(base, nullptr, nullptr);
        m.data()[k] = orig - eps;
        const double down = loss(base, nullptr, nullptr);
        m.data()[k] = orig;
        const double fd = (up - down) / (2 * eps), an = analytic.at(name)->data()[k];
        const double err = std::abs(fd - an), scale = std::max(std::abs(fd), std::abs(an));
        if (scale > 1e-8) r.max_error = std::max(r.max_error, err / scale);
        if (err > 1e-3 * scale + 1e-8)
          r.fail("seed " + std::to_string(seed) + ": " + name + "[" + std::to_string(k) + "]");
      }
    });
  }
  r.seconds = clock.seconds();
  return r;
}

}  // namespace evex
