#pragma once
// Exact constrained decoding over label-pair variables v[i][l][l'].
//
// Feasible assignments satisfy
//   C1  one label per token,
//   C2  consecutive pair variables chain,
//   C3  I-r only after B-r or I-r,
//   C4  for every event type, either all of its key roles occur as a B- tag
//       or none does (the pairwise count inequality in both directions).
// C1-C3 are built into the search lattice; C4 and no-good cuts are handled by
// branching. The search is best-first over token positions with the exact
// unconstrained suffix score as the bound, so the first complete feasible node
// taken from the queue is optimal.

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "evex/core.hpp"
#include "evex/crf.hpp"

namespace evex {

struct DecodeProblem {
  Matrix P;
  Matrix A;
  LabelSet labels;
  double lambda_factor = 0.5;
  int max_solutions = 10;

  int length() const { return static_cast<int>(P.rows()); }
  double lambda() const { return lambda_factor * static_cast<double>(P.rows()); }

  void validate() const {
    if (P.rows() < 1) throw Error("shape", "decode problem has no tokens");
    if (P.cols() != labels.size() || A.rows() != labels.size() || A.cols() != labels.size())
      throw Error("shape", "emission/transition dimensions do not match the label set");
    if (!(lambda_factor >= 0.0) || !std::isfinite(lambda_factor))
      throw Error("bad_config", "lambda_factor must be finite and >= 0");
    if (max_solutions < 1 || max_solutions > 63) throw Error("bad_config", "max_solutions must be in [1, 63]");
  }
};

// ---------------------------------------------------------------------------
// Constraint checker on the explicit variable grid. Row n-1 pairs the last
// label with a virtual END column so its emission is still counted.

struct ConstraintReport {
  bool c1 = true, c2 = true, c3 = true, c4 = true;
  std::vector<std::string> messages;
  bool ok() const { return c1 && c2 && c3 && c4; }
};

class VariableGrid {
 public:
  VariableGrid(int n, int labels) : n_(n), L_(labels), v_(static_cast<std::size_t>(n) * labels * (labels + 1), 0) {}

  static VariableGrid from_sequence(const std::vector<int>& y, int labels) {
    VariableGrid g(static_cast<int>(y.size()), labels);
    for (int i = 0; i + 1 < g.n_; ++i) g.at(i, y[i], y[i + 1]) = 1;
    if (g.n_ > 0) g.at(g.n_ - 1, y[g.n_ - 1], labels) = 1;
    return g;
  }

  int& at(int i, int l, int next) { return v_[(static_cast<std::size_t>(i) * L_ + l) * (L_ + 1) + next]; }
  int at(int i, int l, int next) const { return v_[(static_cast<std::size_t>(i) * L_ + l) * (L_ + 1) + next]; }
  int n() const { return n_; }
  int labels() const { return L_; }
  int end_column() const { return L_; }

  /// sum over l' of v[i][l][l']
  int outgoing(int i, int l) const {
    int s = 0;
    for (int k = 0; k <= L_; ++k) s += at(i, l, k);
    return s;
  }
  /// sum over l of v[i][l][next]
  int incoming(int i, int next) const {
    int s = 0;
    for (int l = 0; l < L_; ++l) s += at(i, l, next);
    return s;
  }

 private:
  int n_, L_;
  std::vector<int> v_;
};

inline ConstraintReport check_ilp_constraints(const VariableGrid& v, const LabelSet& ls) {
  ConstraintReport rep;
  const int n = v.n(), L = v.labels();
  for (int i = 0; i < n; ++i) {
    int total = 0;
    for (int l = 0; l < L; ++l) total += v.outgoing(i, l);
    if (total != 1) {
      rep.c1 = false;
      rep.messages.push_back("C1: token " + std::to_string(i) + " carries " + std::to_string(total) + " labels");
    }
  }
  for (int i = 0; i + 1 < n; ++i)
    for (int mid = 0; mid < L; ++mid)
      if (v.incoming(i, mid) != v.outgoing(i + 1, mid)) {
        rep.c2 = false;
        rep.messages.push_back("C2: pair chain broken between tokens " + std::to_string(i) + " and " +
                               std::to_string(i + 1));
      }
  for (int i = 0; i < n; ++i) {
    // Only the last row may point at END, and it may point nowhere else.
    const bool last = i + 1 == n;
    int misplaced = last ? 0 : v.incoming(i, v.end_column());
    for (int mid = 0; last && mid < L; ++mid) misplaced += v.incoming(i, mid);
    if (misplaced != 0) {
      rep.c2 = false;
      rep.messages.push_back("C2: token " + std::to_string(i) + " has a dangling pair variable");
    }
  }
  for (int r = 0; r < static_cast<int>(ls.roles().size()); ++r) {
    const int b = ls.begin_tag(r), in = ls.inside_tag(r);
    for (int i = 0; i < n; ++i) {
      const int lhs = v.outgoing(i, in);
      const int rhs = i == 0 ? 0 : v.at(i - 1, b, in) + v.at(i - 1, in, in);
      if (lhs != rhs) {
        rep.c3 = false;
        rep.messages.push_back("C3: " + ls.name(in) + " at token " + std::to_string(i) + " not preceded by " +
                               ls.name(b) + " or " + ls.name(in));
      }
    }
  }
  auto begin_count = [&](const std::string& role) {
    const int b = ls.begin_tag(role);
    int s = 0;
    for (int i = 0; i < n; ++i) s += v.outgoing(i, b);
    return s;
  };
  for (const auto& [type, group] : ls.groups())
    for (const auto& r1 : group)
      for (const auto& r2 : group) {
        if (r1 == r2) continue;
        if (begin_count(r1) > n * begin_count(r2)) {
          rep.c4 = false;
          rep.messages.push_back("C4: " + type + " has B-" + r1 + " without B-" + r2);
        }
      }
  return rep;
}

inline ConstraintReport check_ilp_constraints(const std::vector<int>& y, const LabelSet& ls) {
  return check_ilp_constraints(VariableGrid::from_sequence(y, ls.size()), ls);
}

// ---------------------------------------------------------------------------

namespace ilp_detail {

struct KeyRoles {
  std::vector<int> bit_of_role;        // role index -> bit, -1 if in no group
  std::vector<std::uint64_t> groups;   // bitmask per event type

  explicit KeyRoles(const LabelSet& ls) : bit_of_role(ls.roles().size(), -1) {
    int next = 0;
    for (const auto& [type, roles] : ls.groups()) {
      std::uint64_t mask = 0;
      for (const auto& r : roles) {
        int& bit = bit_of_role[ls.role_index(r)];
        if (bit < 0) {
          if (next >= 64) throw Error("too_large", "more than 64 key roles across event types");
          bit = next++;
        }
        mask |= std::uint64_t{1} << bit;
      }
      groups.push_back(mask);
    }
  }

  std::uint64_t add(std::uint64_t mask, int label) const {
    if (!LabelSet::is_begin(label)) return mask;
    const int bit = bit_of_role[LabelSet::role_of(label)];
    return bit < 0 ? mask : mask | (std::uint64_t{1} << bit);
  }
  bool satisfied(std::uint64_t mask) const {
    for (auto g : groups)
      if ((mask & g) != 0 && (mask & g) != g) return false;
    return true;
  }
  /// Can the remaining `free_tokens` positions still complete every group?
  bool completable(std::uint64_t mask, int free_tokens) const {
    for (auto g : groups) {
      const std::uint64_t have = mask & g;
      if (have != 0 && have != g && std::popcount(g & ~have) > free_tokens) return false;
    }
    return true;
  }
};

struct Node {
  double f;
  double g;
  int pos;
  int label;
  std::uint64_t mask;
  std::uint64_t alive;
  int parent;
};

struct StateKey {
  int pos;
  int label;
  std::uint64_t mask;
  std::uint64_t alive;
  friend bool operator==(const StateKey&, const StateKey&) = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const {
    std::size_t h = std::hash<std::uint64_t>{}(k.mask * 0x9E3779B97F4A7C15ull ^ k.alive);
    return h ^ (static_cast<std::size_t>(k.pos) * 1315423911u) ^ (static_cast<std::size_t>(k.label) << 20);
  }
};

}  // namespace ilp_detail

struct SearchLimits {
  std::size_t max_nodes = 20'000'000;
};

/// Best feasible sequence that differs from every sequence in `excluded`;
/// nothing when the feasible set is exhausted.
inline std::optional<Decoded> ilp_solve(const DecodeProblem& prob, const std::vector<std::vector<int>>& excluded,
                                        SearchLimits limits = {}) {
  using namespace ilp_detail;
  prob.validate();
  if (excluded.size() > 64) throw Error("too_large", "at most 64 no-good cuts are supported");
  const int n = prob.length(), L = prob.labels.size();
  const Lattice lattice = Lattice::bio(L);
  const Matrix h = best_suffix(prob.P, prob.A, lattice);
  const KeyRoles keys(prob.labels);

  std::vector<Node> arena;
  auto worse = [&](int a, int b) {
    const Node &x = arena[a], &y = arena[b];
    if (x.f != y.f) return x.f < y.f;
    if (x.pos != y.pos) return x.pos < y.pos;
    return a > b;
  };
  std::priority_queue<int, std::vector<int>, decltype(worse)> open(worse);
  std::unordered_map<StateKey, double, StateKeyHash> best_g;
  std::unordered_map<StateKey, char, StateKeyHash> closed;

  auto push = [&](Node node) {
    if (node.f == kNegInf) return;
    if (!keys.completable(node.mask, n - 1 - node.pos)) return;
    if (node.pos == n - 1 && (node.alive != 0 || !keys.satisfied(node.mask))) return;
    StateKey key{node.pos, node.label, node.mask, node.alive};
    auto it = best_g.find(key);
    if (it != best_g.end() && it->second >= node.g) return;
    best_g[key] = node.g;
    arena.push_back(node);
    open.push(static_cast<int>(arena.size()) - 1);
  };

  std::uint64_t all_alive = excluded.empty() ? 0 : (excluded.size() == 64 ? ~0ull : (1ull << excluded.size()) - 1);
  for (const auto& e : excluded)
    if (static_cast<int>(e.size()) != n) throw Error("bad_sequence", "excluded sequence has wrong length");

  for (int l = 0; l < L; ++l) {
    if (!lattice.can_start(l)) continue;
    std::uint64_t alive = 0;
    for (std::size_t k = 0; k < excluded.size(); ++k)
      if ((all_alive >> k & 1) && excluded[k][0] == l) alive |= 1ull << k;
    const double g = prob.P(0, l);
    push({g + h(0, l), g, 0, l, keys.add(0, l), alive, -1});
  }

  while (!open.empty()) {
    const int id = open.top();
    open.pop();
    const Node cur = arena[id];
    StateKey key{cur.pos, cur.label, cur.mask, cur.alive};
    if (closed.count(key)) continue;
    closed[key] = 1;
    if (closed.size() > limits.max_nodes) throw Error("search_limit", "branch-and-bound node limit exceeded");

    if (cur.pos == n - 1) {
      Decoded out;
      out.labels.assign(n, 0);
      for (int k = id; k >= 0; k = arena[k].parent) out.labels[arena[k].pos] = arena[k].label;
      out.score = seq_score(prob.P, prob.A, out.labels);
      return out;
    }
    const int next = cur.pos + 1;
    for (int l = 0; l < L; ++l) {
      if (!lattice.can_step(cur.label, l)) continue;
      std::uint64_t alive = 0;
      for (std::size_t k = 0; k < excluded.size(); ++k)
        if ((cur.alive >> k & 1) && excluded[k][next] == l) alive |= 1ull << k;
      const double g = cur.g + prob.A(cur.label, l) + prob.P(next, l);
      push({g + h(next, l), g, next, l, keys.add(cur.mask, l), alive, id});
    }
  }
  return std::nullopt;
}

inline Decoded ilp_decode(const DecodeProblem& prob) {
  auto best = ilp_solve(prob, {});
  if (!best) throw Error("infeasible", "no feasible labelling (the all-O sequence should always be feasible)");
  return *best;
}

struct MultiDecodeResult {
  std::vector<Decoded> solutions;
  bool truncated = false;
};

/// Successive optima under no-good cuts, kept while the gap to the first
/// solution stays within lambda = lambda_factor * n.
inline MultiDecodeResult ilp_decode_multi(const DecodeProblem& prob) {
  MultiDecodeResult res;
  res.solutions.push_back(ilp_decode(prob));
  std::vector<std::vector<int>> cuts{res.solutions.front().labels};
  const double first = res.solutions.front().score;
  while (true) {
    auto next = ilp_solve(prob, cuts);
    if (!next || first - next->score > prob.lambda()) break;
    if (static_cast<int>(res.solutions.size()) == prob.max_solutions) {
      res.truncated = true;
      break;
    }
    cuts.push_back(next->labels);
    res.solutions.push_back(std::move(*next));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle.

inline constexpr double kBruteForceLimit = 1e7;

namespace ilp_detail {

/// Reversed-lexicographic order: compare from the last position backwards.
inline bool later_smaller(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t i = a.size(); i-- > 0;)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

template <class Fn>
void enumerate_sequences(int n, int L, Fn&& fn) {
  std::vector<int> y(n, 0);
  while (true) {
    fn(y);
    int i = n - 1;
    while (i >= 0 && ++y[i] == L) y[i--] = 0;
    if (i < 0) break;
  }
}

inline void check_size(const DecodeProblem& prob) {
  prob.validate();
  if (std::pow(static_cast<double>(prob.labels.size()), prob.length()) > kBruteForceLimit)
    throw Error("too_large", "brute force needs |L|^n <= 1e7");
}

}  // namespace ilp_detail

/// Every feasible sequence, best first (ties: smaller label at the latest
/// differing position first).
inline std::vector<Decoded> brute_force_rank(const DecodeProblem& prob) {
  ilp_detail::check_size(prob);
  std::vector<Decoded> all;
  ilp_detail::enumerate_sequences(prob.length(), prob.labels.size(), [&](const std::vector<int>& y) {
    if (check_ilp_constraints(y, prob.labels).ok()) all.push_back({y, seq_score(prob.P, prob.A, y)});
  });
  std::sort(all.begin(), all.end(), [](const Decoded& a, const Decoded& b) {
    if (a.score != b.score) return a.score > b.score;
    return ilp_detail::later_smaller(a.labels, b.labels);
  });
  return all;
}

inline Decoded brute_force_decode(const DecodeProblem& prob) {
  ilp_detail::check_size(prob);
  std::optional<Decoded> best;
  ilp_detail::enumerate_sequences(prob.length(), prob.labels.size(), [&](const std::vector<int>& y) {
    if (!check_ilp_constraints(y, prob.labels).ok()) return;
    const double s = seq_score(prob.P, prob.A, y);
    if (!best || s > best->score || (s == best->score && ilp_detail::later_smaller(y, best->labels)))
      best = Decoded{y, s};
  });
  if (!best) throw Error("infeasible", "no feasible sequence");
  return *best;
}

/// Unconstrained exhaustive argmax, the oracle for plain Viterbi.
inline Decoded brute_force_viterbi(const Matrix& P, const Matrix& A) {
  if (std::pow(static_cast<double>(P.cols()), static_cast<double>(P.rows())) > kBruteForceLimit)
    throw Error("too_large", "brute force needs |L|^n <= 1e7");
  std::optional<Decoded> best;
  ilp_detail::enumerate_sequences(static_cast<int>(P.rows()), static_cast<int>(P.cols()),
                                  [&](const std::vector<int>& y) {
                                    const double s = seq_score(P, A, y);
                                    if (!best || s > best->score ||
                                        (s == best->score && ilp_detail::later_smaller(y, best->labels)))
                                      best = Decoded{y, s};
                                  });
  return *best;
}

}  // namespace evex
