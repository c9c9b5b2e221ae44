#pragma once
// Domain types shared by data generation, learning, decoding and scoring.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evex {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Case-fold and collapse runs of whitespace to one space; leading and
/// trailing whitespace is dropped.
inline std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

struct Token {
  int index = 0;
  std::string surface;
  std::string normalized;

  Token() = default;
  Token(int i, std::string s) : index(i), surface(std::move(s)), normalized(normalize(surface)) {}
  friend bool operator==(const Token&, const Token&) = default;
};

/// Half-open token range [begin, end).
struct Span {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool overlaps(const Span& o) const { return begin < o.end && o.begin < end; }
  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

inline constexpr int kRootHead = -1;

struct ParsedSentence {
  std::string id;
  std::vector<Token> tokens;
  std::vector<int> dep_head;
  std::vector<std::string> dep_label;  // empty when the corpus has no labels

  ParsedSentence() = default;
  ParsedSentence(std::string sid, const std::vector<std::string>& words, std::vector<int> heads,
                 std::vector<std::string> labels = {})
      : id(std::move(sid)), dep_head(std::move(heads)), dep_label(std::move(labels)) {
    tokens.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) tokens.emplace_back(static_cast<int>(i), words[i]);
  }

  int size() const { return static_cast<int>(tokens.size()); }
  std::vector<std::string> words() const {
    std::vector<std::string> w;
    w.reserve(tokens.size());
    for (const auto& t : tokens) w.push_back(t.surface);
    return w;
  }
  std::string text(const Span& s) const {
    std::string out;
    for (int i = s.begin; i < s.end; ++i) {
      if (i > s.begin) out.push_back(' ');
      out += tokens[i].surface;
    }
    return out;
  }
  friend bool operator==(const ParsedSentence&, const ParsedSentence&) = default;
};

enum class ViolationKind { length_mismatch, token_index, no_root, multiple_roots, head_out_of_range, cycle };

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::length_mismatch: return "length_mismatch";
    case ViolationKind::token_index: return "token_index";
    case ViolationKind::no_root: return "no_root";
    case ViolationKind::multiple_roots: return "multiple_roots";
    case ViolationKind::head_out_of_range: return "head_out_of_range";
    case ViolationKind::cycle: return "cycle";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  int token = -1;
  std::string message;
};

/// Structural diagnostics for a sentence; empty iff it is a well-formed tree.
inline std::vector<Violation> validate_sentence(const ParsedSentence& s) {
  std::vector<Violation> out;
  const int n = s.size();
  if (static_cast<int>(s.dep_head.size()) != n) {
    out.push_back({ViolationKind::length_mismatch, -1,
                   "dep_head has " + std::to_string(s.dep_head.size()) + " entries for " +
                       std::to_string(n) + " tokens"});
    return out;
  }
  if (!s.dep_label.empty() && static_cast<int>(s.dep_label.size()) != n)
    out.push_back({ViolationKind::length_mismatch, -1, "dep_label length differs from token count"});
  for (int i = 0; i < n; ++i)
    if (s.tokens[i].index != i)
      out.push_back({ViolationKind::token_index, i, "token index " + std::to_string(s.tokens[i].index) +
                                                        " at position " + std::to_string(i)});

  std::vector<int> roots;
  bool heads_ok = true;
  for (int i = 0; i < n; ++i) {
    const int h = s.dep_head[i];
    if (h == kRootHead) {
      roots.push_back(i);
    } else if (h < 0 || h >= n) {
      heads_ok = false;
      out.push_back({ViolationKind::head_out_of_range, i, "head " + std::to_string(h) + " out of range"});
    }
  }
  if (n > 0 && roots.empty()) out.push_back({ViolationKind::no_root, -1, "no token has head -1"});
  if (roots.size() > 1)
    out.push_back({ViolationKind::multiple_roots, roots[1],
                   std::to_string(roots.size()) + " tokens have head -1"});
  if (!heads_ok) return out;

  // 0 = unvisited, 1 = on current walk, 2 = reaches a root
  std::vector<int> state(n, 0);
  for (int start = 0; start < n; ++start) {
    std::vector<int> walk;
    int cur = start;
    while (cur != kRootHead && state[cur] == 0) {
      state[cur] = 1;
      walk.push_back(cur);
      cur = s.dep_head[cur];
    }
    if (cur != kRootHead && state[cur] == 1) {
      auto pos = std::find(walk.begin(), walk.end(), cur);
      int smallest = *std::min_element(pos, walk.end());
      out.push_back({ViolationKind::cycle, smallest,
                     "cycle through token " + std::to_string(smallest) + " of length " +
                         std::to_string(std::distance(pos, walk.end()))});
    }
    for (int w : walk) state[w] = 2;
  }
  return out;
}

inline void require_valid(const ParsedSentence& s) {
  auto v = validate_sentence(s);
  if (!v.empty())
    throw Error("invalid_tree", "sentence '" + s.id + "': " + to_string(v.front().kind) + ": " + v.front().message);
}

struct TableEntry {
  std::string id;
  std::map<std::string, std::vector<std::string>> values;

  bool has(const std::string& property) const {
    auto it = values.find(property);
    return it != values.end() && !it->second.empty();
  }
  friend bool operator==(const TableEntry&, const TableEntry&) = default;
};

struct EventTable {
  std::string event_type;
  std::vector<std::string> properties;
  std::vector<std::string> time_properties;
  std::vector<TableEntry> entries;

  friend bool operator==(const EventTable&, const EventTable&) = default;
};

inline void validate_table(const EventTable& t) {
  std::set<std::string> props;
  for (const auto& p : t.properties)
    if (!props.insert(p).second) throw Error("invalid_table", t.event_type + ": duplicate property '" + p + "'");
  for (const auto& p : t.time_properties)
    if (!props.count(p)) throw Error("invalid_table", t.event_type + ": time property '" + p + "' not declared");
  for (const auto& e : t.entries)
    for (const auto& [k, v] : e.values) {
      if (!props.count(k))
        throw Error("invalid_table", t.event_type + "/" + e.id + ": unknown property '" + k + "'");
      if (v.empty()) throw Error("invalid_table", t.event_type + "/" + e.id + ": empty value list for '" + k + "'");
    }
}

/// Key/non-key partition of one event type plus the tag role used for each
/// property.
struct EventSchema {
  std::string event_type;
  std::vector<std::string> key_args;     // ordered by descending importance
  std::vector<std::string> nonkey_args;  // ordered by descending importance
  std::map<std::string, double> importance;
  std::map<std::string, std::string> role_of;  // property -> role name used in tags

  std::string role(const std::string& property) const {
    auto it = role_of.find(property);
    return it == role_of.end() ? property : it->second;
  }
  bool is_key(const std::string& property) const {
    return std::find(key_args.begin(), key_args.end(), property) != key_args.end();
  }
  std::vector<std::string> key_roles() const {
    std::vector<std::string> r;
    for (const auto& p : key_args) r.push_back(role(p));
    return r;
  }
  std::vector<std::string> nonkey_roles() const {
    std::vector<std::string> r;
    for (const auto& p : nonkey_args) r.push_back(role(p));
    return r;
  }
  std::vector<std::string> all_roles() const {
    auto r = key_roles();
    auto nk = nonkey_roles();
    r.insert(r.end(), nk.begin(), nk.end());
    return r;
  }
};

/// BIO tag inventory: O, then B-r / I-r for each role in order. Also carries
/// the key-role groups (one per event type) used for co-occurrence checks.
class LabelSet {
 public:
  static constexpr int kOutside = 0;

  LabelSet() : LabelSet(std::vector<std::string>{}) {}
  explicit LabelSet(std::vector<std::string> roles,
                    std::map<std::string, std::vector<std::string>> groups = {})
      : roles_(std::move(roles)), groups_(std::move(groups)) {
    labels_.push_back("O");
    for (const auto& r : roles_) {
      if (role_index_.count(r)) throw Error("invalid_labels", "duplicate role '" + r + "'");
      role_index_[r] = static_cast<int>(role_index_.size());
      labels_.push_back("B-" + r);
      labels_.push_back("I-" + r);
    }
    for (int i = 0; i < size(); ++i) index_[labels_[i]] = i;
    for (const auto& [type, group] : groups_)
      for (const auto& r : group)
        if (!role_index_.count(r))
          throw Error("invalid_labels", "group '" + type + "' names unknown role '" + r + "'");
  }

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& roles() const { return roles_; }
  const std::map<std::string, std::vector<std::string>>& groups() const { return groups_; }
  const std::string& name(int id) const { return labels_.at(id); }

  std::optional<int> find(const std::string& tag) const {
    auto it = index_.find(tag);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  int id(const std::string& tag) const {
    auto f = find(tag);
    if (!f) throw Error("unknown_tag", "unknown tag '" + tag + "'");
    return *f;
  }
  bool has_role(const std::string& r) const { return role_index_.count(r) > 0; }
  int role_index(const std::string& r) const {
    auto it = role_index_.find(r);
    if (it == role_index_.end()) throw Error("unknown_role", "unknown role '" + r + "'");
    return it->second;
  }
  int begin_tag(int role) const { return 1 + 2 * role; }
  int inside_tag(int role) const { return 2 + 2 * role; }
  int begin_tag(const std::string& r) const { return begin_tag(role_index(r)); }
  int inside_tag(const std::string& r) const { return inside_tag(role_index(r)); }

  static bool is_outside(int id) { return id == kOutside; }
  static bool is_begin(int id) { return id > 0 && id % 2 == 1; }
  static bool is_inside(int id) { return id > 0 && id % 2 == 0; }
  static int role_of(int id) { return (id - 1) / 2; }
  const std::string& role_name(int id) const { return roles_.at(role_of(id)); }

  /// BIO transition legality: I-r may only follow B-r or I-r.
  static bool allowed(int prev, int next) {
    if (!is_inside(next)) return true;
    return prev != kOutside && role_of(prev) == role_of(next);
  }
  static bool allowed_start(int first) { return !is_inside(first); }

  friend bool operator==(const LabelSet& a, const LabelSet& b) {
    return a.roles_ == b.roles_ && a.groups_ == b.groups_;
  }

 private:
  std::vector<std::string> roles_;
  std::map<std::string, std::vector<std::string>> groups_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, int> role_index_;
};

struct LabelSequence {
  std::vector<std::string> tags;
  std::optional<double> score;

  friend bool operator==(const LabelSequence&, const LabelSequence&) = default;
};

inline LabelSequence to_sequence(const std::vector<int>& ids, const LabelSet& ls,
                                 std::optional<double> score = std::nullopt) {
  LabelSequence seq;
  seq.tags.reserve(ids.size());
  for (int id : ids) seq.tags.push_back(ls.name(id));
  seq.score = score;
  return seq;
}

inline std::vector<int> to_ids(const LabelSequence& seq, const LabelSet& ls) {
  std::vector<int> ids;
  ids.reserve(seq.tags.size());
  for (const auto& t : seq.tags) ids.push_back(ls.id(t));
  return ids;
}

inline bool bio_wellformed(const std::vector<int>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i == 0 ? !LabelSet::allowed_start(ids[0]) : !LabelSet::allowed(ids[i - 1], ids[i])) return false;
  }
  return true;
}

/// Throws on an unknown tag or an empty sequence.
inline bool bio_wellformed(const LabelSequence& seq, const LabelSet& ls) {
  if (seq.tags.empty()) throw Error("empty_sequence", "label sequence is empty");
  return bio_wellformed(to_ids(seq, ls));
}

struct RoleSpan {
  std::string role;
  Span span;
  friend bool operator==(const RoleSpan&, const RoleSpan&) = default;
  friend auto operator<=>(const RoleSpan&, const RoleSpan&) = default;
};

/// Maximal B-/I- runs of a well-formed (or near well-formed) tag sequence.
/// A stray I-r not continuing a run opens a new span.
inline std::vector<RoleSpan> extract_spans(const std::vector<int>& ids, const LabelSet& ls) {
  std::vector<RoleSpan> out;
  const int n = static_cast<int>(ids.size());
  for (int i = 0; i < n;) {
    if (LabelSet::is_outside(ids[i])) {
      ++i;
      continue;
    }
    const int role = LabelSet::role_of(ids[i]);
    int j = i + 1;
    while (j < n && LabelSet::is_inside(ids[j]) && LabelSet::role_of(ids[j]) == role) ++j;
    out.push_back({ls.roles()[role], {i, j}});
    i = j;
  }
  return out;
}

enum class Polarity { positive, negative };

struct Argument {
  std::string role;
  Span span;
  bool key = false;
  friend bool operator==(const Argument&, const Argument&) = default;
};

struct EventMention {
  std::string event_type;
  std::vector<Argument> arguments;
  Polarity polarity = Polarity::positive;
  friend bool operator==(const EventMention&, const EventMention&) = default;
};

}  // namespace evex
