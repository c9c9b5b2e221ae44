#pragma once
// Distant supervision: turns event tables plus a dependency-parsed corpus into
// BIO-labelled training sentences.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "evex/core.hpp"
#include "evex/io.hpp"
#include "evex/parallel.hpp"

namespace evex {

struct ImportanceStats {
  std::map<std::string, long> count_cvt;
  std::map<std::string, long> count_arg;
  std::map<std::pair<std::string, std::string>, long> count_cvt_arg;

  static ImportanceStats from_tables(const std::vector<EventTable>& tables) {
    ImportanceStats st;
    for (const auto& t : tables) st.merge(from_table(t));
    return st;
  }

  static ImportanceStats from_table(const EventTable& t) {
    ImportanceStats st;
    st.count_cvt[t.event_type] += static_cast<long>(t.entries.size());
    for (const auto& e : t.entries)
      for (const auto& p : t.properties)
        if (e.has(p)) {
          st.count_arg[p] += 1;
          st.count_cvt_arg[{t.event_type, p}] += 1;
        }
    return st;
  }

  void merge(const ImportanceStats& o) {
    for (const auto& [k, v] : o.count_cvt) count_cvt[k] += v;
    for (const auto& [k, v] : o.count_arg) count_arg[k] += v;
    for (const auto& [k, v] : o.count_cvt_arg) count_cvt_arg[k] += v;
  }

  long cvt(const std::string& t) const {
    auto it = count_cvt.find(t);
    return it == count_cvt.end() ? 0 : it->second;
  }
  long arg(const std::string& p) const {
    auto it = count_arg.find(p);
    return it == count_arg.end() ? 0 : it->second;
  }
  long cvt_arg(const std::string& t, const std::string& p) const {
    auto it = count_cvt_arg.find({t, p});
    return it == count_cvt_arg.end() ? 0 : it->second;
  }
};

/// log( count(cvt,arg) / (count(cvt) * count(arg)) ), natural log.
inline double importance_score(const ImportanceStats& stats, const std::string& event_type,
                               const std::string& property) {
  const long c_type = stats.cvt(event_type);
  if (c_type <= 0) throw Error("zero_count", "count_cvt(" + event_type + ") is zero");
  const long c_arg = stats.arg(property);
  if (c_arg <= 0) throw Error("zero_count", "count_arg(" + property + ") is zero");
  const long c_both = stats.cvt_arg(event_type, property);
  if (c_both == 0) return -std::numeric_limits<double>::infinity();
  return std::log(static_cast<double>(c_both) / (static_cast<double>(c_type) * static_cast<double>(c_arg)));
}

enum class KeyArgStrategy { all, imp, imp_time };

inline const char* to_string(KeyArgStrategy s) {
  switch (s) {
    case KeyArgStrategy::all: return "all";
    case KeyArgStrategy::imp: return "imp";
    case KeyArgStrategy::imp_time: return "imp_time";
  }
  return "?";
}

inline KeyArgStrategy parse_strategy(const std::string& s) {
  if (s == "all") return KeyArgStrategy::all;
  if (s == "imp") return KeyArgStrategy::imp;
  if (s == "imp_time" || s == "imp&time") return KeyArgStrategy::imp_time;
  throw Error("bad_value", "unknown key-argument strategy '" + s + "'");
}

// Negative pool sizes relative to positives, taken from the FBWiki build
// (34,837 partial / 21,866 distance / 22,833 trivial per 46,735 positives).
inline constexpr double kDefaultPartialRatio = 34837.0 / 46735.0;
inline constexpr double kDefaultViolationRatio = 21866.0 / 46735.0;
inline constexpr double kDefaultTrivialRatio = (79536.0 - 34837.0 - 21866.0) / 46735.0;

struct GenerationConfig {
  int max_dep_distance = 2;
  bool distance_filter = true;
  KeyArgStrategy strategy = KeyArgStrategy::imp_time;
  double partial_negative_ratio = kDefaultPartialRatio;
  double violation_negative_ratio = kDefaultViolationRatio;
  double trivial_negative_ratio = kDefaultTrivialRatio;
  std::map<std::string, std::string> alias_map;  // surface -> canonical
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const {
    if (max_dep_distance < 1) throw Error("bad_config", "max_dep_distance must be >= 1");
    for (double r : {partial_negative_ratio, violation_negative_ratio, trivial_negative_ratio})
      if (!std::isfinite(r) || r < 0) throw Error("bad_config", "negative-sampling ratios must be finite and >= 0");
  }
};

inline bool is_time_property(const EventTable& table, const std::string& property) {
  if (!table.time_properties.empty())
    return std::find(table.time_properties.begin(), table.time_properties.end(), property) !=
           table.time_properties.end();
  static const std::set<std::string> kKeywords = {"date", "time", "year", "from", "to", "start", "end"};
  std::string part;
  for (char c : property + "_") {
    if (c == '_' || c == '.' || c == ' ' || c == '/') {
      if (kKeywords.count(normalize(part))) return true;
      part.clear();
    } else {
      part.push_back(c);
    }
  }
  return false;
}

/// Key arguments: the ceil(n/2) top-scoring properties plus the best time
/// property (imp_time), only the top half (imp), or everything (all).
/// Ties are broken by ascending property name.
inline EventSchema select_key_args(const EventTable& table, const ImportanceStats& stats,
                                   KeyArgStrategy strategy = KeyArgStrategy::imp_time) {
  if (table.properties.empty()) throw Error("empty_table", table.event_type + ": table has no properties");
  EventSchema schema;
  schema.event_type = table.event_type;
  std::vector<std::string> ranked = table.properties;
  for (const auto& p : ranked) schema.importance[p] = importance_score(stats, table.event_type, p);
  std::sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
    const double sa = schema.importance[a], sb = schema.importance[b];
    if (sa != sb) return sa > sb;
    return a < b;
  });

  const std::size_t n = ranked.size();
  std::set<std::string> keys;
  if (strategy == KeyArgStrategy::all) {
    keys.insert(ranked.begin(), ranked.end());
  } else {
    const std::size_t half = (n + 1) / 2;
    keys.insert(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(half));
    if (strategy == KeyArgStrategy::imp_time) {
      for (const auto& p : ranked)
        if (is_time_property(table, p)) {
          keys.insert(p);
          break;
        }
    }
  }
  for (const auto& p : ranked) {
    schema.role_of[p] = p;
    (keys.count(p) ? schema.key_args : schema.nonkey_args).push_back(p);
  }
  return schema;
}

/// Schemas for a table set. Property names shared by several event types are
/// qualified as `event_type.property` in tag roles so that each event type
/// owns a disjoint role inventory.
inline std::vector<EventSchema> build_schemas(const std::vector<EventTable>& tables, const ImportanceStats& stats,
                                              KeyArgStrategy strategy) {
  std::map<std::string, std::set<std::string>> owners;
  for (const auto& t : tables)
    for (const auto& p : t.properties) owners[p].insert(t.event_type);
  std::vector<EventSchema> out;
  for (const auto& t : tables) {
    auto schema = select_key_args(t, stats, strategy);
    for (auto& [prop, role] : schema.role_of)
      if (owners[prop].size() > 1) role = t.event_type + "." + prop;
    out.push_back(std::move(schema));
  }
  return out;
}

inline LabelSet label_set_for(const std::vector<EventSchema>& schemas, bool key_only) {
  std::vector<std::string> roles;
  std::set<std::string> seen;
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& s : schemas) {
    for (const auto& r : key_only ? s.key_roles() : s.all_roles())
      if (seen.insert(r).second) roles.push_back(r);
    groups[s.event_type] = s.key_roles();
  }
  return LabelSet(std::move(roles), std::move(groups));
}

struct ArgumentMatch {
  std::string property;
  Span span;
  int occurrences = 1;  // how often a surface form of the value occurs
  friend bool operator==(const ArgumentMatch&, const ArgumentMatch&) = default;
};

namespace supervision_detail {

inline std::vector<std::string> split_words(const std::string& normalized) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : normalized) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// All normalized surface forms of a value: itself, its canonical form, and
/// every alias sharing that canonical form.
inline std::set<std::string> surface_forms(const std::vector<std::string>& values,
                                           const std::map<std::string, std::string>& aliases) {
  std::set<std::string> canon;
  for (const auto& v : values) {
    canon.insert(normalize(v));
    for (const auto& [surface, c] : aliases)
      if (normalize(surface) == normalize(v)) canon.insert(normalize(c));
  }
  std::set<std::string> forms = canon;
  for (const auto& [surface, c] : aliases)
    if (canon.count(normalize(c))) forms.insert(normalize(surface));
  forms.erase("");
  return forms;
}

inline bool matches_at(const ParsedSentence& s, int start, const std::vector<std::string>& words) {
  if (start + static_cast<int>(words.size()) > s.size()) return false;
  for (std::size_t k = 0; k < words.size(); ++k)
    if (s.tokens[start + k].normalized != words[k]) return false;
  return true;
}

}  // namespace supervision_detail

/// Leftmost, then longest, occurrence of any surface form of `values`.
inline std::optional<ArgumentMatch> find_value(const ParsedSentence& s, const std::vector<std::string>& values,
                                               const std::map<std::string, std::string>& aliases) {
  using namespace supervision_detail;
  std::vector<std::vector<std::string>> forms;
  for (const auto& f : surface_forms(values, aliases)) forms.push_back(split_words(f));
  std::sort(forms.begin(), forms.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });

  std::optional<ArgumentMatch> best;
  int occurrences = 0;
  for (int i = 0; i < s.size(); ++i) {
    for (const auto& w : forms) {
      if (w.empty() || !matches_at(s, i, w)) continue;
      ++occurrences;
      if (!best) best = ArgumentMatch{"", {i, i + static_cast<int>(w.size())}, 0};
      break;
    }
  }
  if (best) best->occurrences = occurrences;
  return best;
}

/// Every schema property of `entry` whose value occurs in the sentence.
inline std::vector<ArgumentMatch> find_arguments(const ParsedSentence& s, const TableEntry& entry,
                                                 const EventSchema& schema, const GenerationConfig& cfg) {
  std::vector<ArgumentMatch> out;
  auto scan = [&](const std::vector<std::string>& props) {
    for (const auto& p : props) {
      if (!entry.has(p)) continue;
      if (auto m = find_value(s, entry.values.at(p), cfg.alias_map)) {
        m->property = p;
        out.push_back(*m);
      }
    }
  };
  scan(schema.key_args);
  scan(schema.nonkey_args);
  return out;
}

/// Role spans when every key argument occurs in the sentence, else nothing.
inline std::optional<std::vector<ArgumentMatch>> match_entry(const ParsedSentence& s, const TableEntry& entry,
                                                             const EventSchema& schema,
                                                             const GenerationConfig& cfg) {
  auto found = find_arguments(s, entry, schema, cfg);
  for (const auto& k : schema.key_args) {
    bool hit = std::any_of(found.begin(), found.end(), [&](const ArgumentMatch& m) { return m.property == k; });
    if (!hit) return std::nullopt;
  }
  return found;
}

/// Representative token of a span: the unique token whose head lies outside
/// it, else the leftmost token.
inline int span_head(const ParsedSentence& s, const Span& span) {
  int head = -1, count = 0;
  for (int i = span.begin; i < span.end; ++i) {
    const int h = s.dep_head[i];
    if (h < span.begin || h >= span.end) {
      head = i;
      ++count;
    }
  }
  return count == 1 ? head : span.begin;
}

namespace supervision_detail {

inline std::vector<int> path_to_root(const ParsedSentence& s, int token) {
  std::vector<int> path;
  for (int cur = token; cur != kRootHead; cur = s.dep_head[cur]) path.push_back(cur);
  return path;
}

inline void check_span(const ParsedSentence& s, const Span& span) {
  if (span.begin < 0 || span.end > s.size() || span.begin >= span.end)
    throw Error("bad_span", "span [" + std::to_string(span.begin) + "," + std::to_string(span.end) +
                                ") outside sentence '" + s.id + "'");
}

}  // namespace supervision_detail

inline int token_distance(const ParsedSentence& s, int a, int b) {
  auto pa = supervision_detail::path_to_root(s, a);
  auto pb = supervision_detail::path_to_root(s, b);
  // Strip the shared suffix (common ancestors) to find the meeting point.
  int ia = static_cast<int>(pa.size()) - 1, ib = static_cast<int>(pb.size()) - 1;
  if (pa[ia] != pb[ib]) throw Error("invalid_tree", "tokens in different trees of '" + s.id + "'");
  while (ia > 0 && ib > 0 && pa[ia - 1] == pb[ib - 1]) {
    --ia;
    --ib;
  }
  return ia + ib;
}

/// Minimal number of dependency hops between the head tokens of two spans.
inline int dep_distance(const ParsedSentence& s, const Span& a, const Span& b) {
  require_valid(s);
  supervision_detail::check_span(s, a);
  supervision_detail::check_span(s, b);
  return token_distance(s, span_head(s, a), span_head(s, b));
}

/// Least common ancestor of the head tokens of all key spans.
inline int trigger_candidate(const ParsedSentence& s, const std::vector<Span>& key_spans) {
  if (key_spans.empty()) throw Error("bad_argument", "trigger_candidate needs at least one span");
  require_valid(s);
  for (const auto& sp : key_spans) supervision_detail::check_span(s, sp);
  auto common = supervision_detail::path_to_root(s, span_head(s, key_spans.front()));
  std::reverse(common.begin(), common.end());  // root first
  for (std::size_t k = 1; k < key_spans.size(); ++k) {
    auto p = supervision_detail::path_to_root(s, span_head(s, key_spans[k]));
    std::reverse(p.begin(), p.end());
    std::size_t len = 0;
    while (len < common.size() && len < p.size() && common[len] == p[len]) ++len;
    common.resize(len);
  }
  return common.back();
}

enum class NegativeReason { none, trivial, partial, distance };

inline const char* to_string(NegativeReason r) {
  switch (r) {
    case NegativeReason::none: return "none";
    case NegativeReason::trivial: return "trivial";
    case NegativeReason::partial: return "partial";
    case NegativeReason::distance: return "distance";
  }
  return "?";
}

struct LabelResult {
  LabelSequence labels;
  Polarity polarity = Polarity::negative;
  NegativeReason reason = NegativeReason::trivial;
  std::vector<Argument> arguments;  // resolved spans, in tag roles
  int max_key_distance = 0;
  std::vector<std::string> diagnostics;
};

/// Labels one sentence against the matches of one entry.
inline LabelResult label_sentence(const ParsedSentence& s, const std::vector<ArgumentMatch>& matches,
                                  const EventSchema& schema, const GenerationConfig& cfg) {
  LabelResult res;
  res.labels.tags.assign(s.size(), "O");

  // Overlapping spans: the more important property keeps its span.
  std::vector<ArgumentMatch> order = matches;
  auto importance = [&](const std::string& p) {
    auto it = schema.importance.find(p);
    return it == schema.importance.end() ? -std::numeric_limits<double>::infinity() : it->second;
  };
  std::stable_sort(order.begin(), order.end(), [&](const ArgumentMatch& a, const ArgumentMatch& b) {
    if (importance(a.property) != importance(b.property)) return importance(a.property) > importance(b.property);
    return a.property < b.property;
  });
  std::vector<ArgumentMatch> kept;
  for (const auto& m : order) {
    auto clash = std::find_if(kept.begin(), kept.end(), [&](const ArgumentMatch& k) { return k.span.overlaps(m.span); });
    if (clash != kept.end()) {
      res.diagnostics.push_back("overlap: '" + m.property + "' dropped in favour of '" + clash->property + "'");
      continue;
    }
    kept.push_back(m);
  }

  std::vector<Span> key_spans;
  for (const auto& k : schema.key_args)
    for (const auto& m : kept)
      if (m.property == k) key_spans.push_back(m.span);

  if (key_spans.size() < schema.key_args.size()) {
    res.reason = key_spans.empty() ? NegativeReason::trivial : NegativeReason::partial;
    return res;
  }

  for (std::size_t a = 0; a < key_spans.size(); ++a)
    for (std::size_t b = a + 1; b < key_spans.size(); ++b)
      res.max_key_distance = std::max(res.max_key_distance, dep_distance(s, key_spans[a], key_spans[b]));
  if (cfg.distance_filter && res.max_key_distance > cfg.max_dep_distance) {
    res.reason = NegativeReason::distance;
    return res;
  }

  res.polarity = Polarity::positive;
  res.reason = NegativeReason::none;
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.span < b.span; });
  for (const auto& m : kept) {
    const std::string role = schema.role(m.property);
    res.arguments.push_back({role, m.span, schema.is_key(m.property)});
    res.labels.tags[m.span.begin] = "B-" + role;
    for (int i = m.span.begin + 1; i < m.span.end; ++i) res.labels.tags[i] = "I-" + role;
  }
  return res;
}

struct DatasetRecord {
  std::string sentence_id;
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
  std::vector<std::string> event_types;
  Polarity polarity = Polarity::negative;
  NegativeReason reason = NegativeReason::trivial;
  int key_distance = 0;  // only meaningful for distance negatives
  std::vector<EventMention> events;
};

inline json mention_to_json(const EventMention& m, const std::vector<std::string>& tokens) {
  json args = json::array();
  for (const auto& a : m.arguments) {
    std::string text;
    for (int i = a.span.begin; i < a.span.end; ++i) text += (i > a.span.begin ? " " : "") + tokens[i];
    args.push_back({{"role", a.role}, {"span", {a.span.begin, a.span.end}}, {"text", text}, {"key", a.key}});
  }
  return {{"event_type", m.event_type}, {"arguments", args}};
}

inline EventMention mention_from_json(const json& j) {
  EventMention m;
  m.event_type = j.at("event_type").get<std::string>();
  for (const auto& a : j.at("arguments")) {
    auto span = a.at("span").get<std::vector<int>>();
    if (span.size() != 2 || span[0] >= span[1]) throw Error("parse", "argument span must be [start, end)");
    m.arguments.push_back({a.at("role").get<std::string>(), {span[0], span[1]}, a.value("key", false)});
  }
  return m;
}

inline json record_to_json(const DatasetRecord& r) {
  json j;
  j["sentence_id"] = r.sentence_id;
  j["tokens"] = r.tokens;
  j["labels"] = r.labels;
  j["event_types"] = r.event_types;
  j["polarity"] = r.polarity == Polarity::positive ? "positive" : "negative";
  if (r.polarity == Polarity::negative) j["reason"] = to_string(r.reason);
  if (r.reason == NegativeReason::distance) j["key_distance"] = r.key_distance;
  j["events"] = json::array();
  for (const auto& e : r.events) j["events"].push_back(mention_to_json(e, r.tokens));
  return j;
}

inline DatasetRecord record_from_json(const json& j) {
  DatasetRecord r;
  r.sentence_id = j.at("sentence_id").get<std::string>();
  r.tokens = j.at("tokens").get<std::vector<std::string>>();
  r.labels = j.at("labels").get<std::vector<std::string>>();
  r.event_types = j.value("event_types", std::vector<std::string>{});
  r.polarity = j.at("polarity").get<std::string>() == "positive" ? Polarity::positive : Polarity::negative;
  const std::string reason = j.value("reason", std::string("none"));
  r.reason = reason == "trivial"    ? NegativeReason::trivial
             : reason == "partial"  ? NegativeReason::partial
             : reason == "distance" ? NegativeReason::distance
                                    : NegativeReason::none;
  r.key_distance = j.value("key_distance", 0);
  if (j.contains("events"))
    for (const auto& e : j.at("events")) r.events.push_back(mention_from_json(e));
  if (r.labels.size() != r.tokens.size())
    throw Error("parse", "record '" + r.sentence_id + "': labels and tokens differ in length");
  return r;
}

inline std::vector<DatasetRecord> read_dataset(const std::string& path) {
  std::vector<DatasetRecord> out;
  for_each_jsonl(path, [&](int, const json& j) { out.push_back(record_from_json(j)); });
  return out;
}

struct GenerationStats {
  std::size_t sentences = 0;  // corpus size
  std::size_t positive_sentences = 0;
  std::size_t events = 0;
  std::map<std::string, std::size_t> events_per_type;
  std::size_t multi_type_sentences = 0;
  std::map<std::string, std::size_t> negative_pool;     // reason -> candidates
  std::map<std::string, std::size_t> negative_emitted;  // reason -> sampled
  std::size_t arguments = 0;
  std::size_t duplicate_occurrences = 0;
  std::size_t label_conflicts = 0;

  double multi_type_fraction() const {
    return positive_sentences ? static_cast<double>(multi_type_sentences) / static_cast<double>(positive_sentences)
                              : 0.0;
  }
  double arguments_per_event() const {
    return events ? static_cast<double>(arguments) / static_cast<double>(events) : 0.0;
  }

  json to_json() const {
    return {{"sentences", sentences},
            {"positive_sentences", positive_sentences},
            {"events", events},
            {"events_per_type", events_per_type},
            {"multi_type_fraction", multi_type_fraction()},
            {"arguments_per_event", arguments_per_event()},
            {"negative_pool", negative_pool},
            {"negative_emitted", negative_emitted},
            {"duplicate_occurrences", duplicate_occurrences},
            {"label_conflicts", label_conflicts}};
  }
};

inline json schema_to_json(const EventSchema& s) {
  json imp = json::object();
  for (const auto& [p, v] : s.importance) imp[p] = std::isfinite(v) ? json(v) : json(nullptr);
  return {{"event_type", s.event_type},
          {"key_args", s.key_args},
          {"nonkey_args", s.nonkey_args},
          {"importance", imp},
          {"roles", s.role_of}};
}

inline EventSchema schema_from_json(const json& j) {
  EventSchema s;
  s.event_type = j.at("event_type").get<std::string>();
  s.key_args = j.at("key_args").get<std::vector<std::string>>();
  s.nonkey_args = j.at("nonkey_args").get<std::vector<std::string>>();
  for (const auto& [p, v] : j.at("importance").items())
    s.importance[p] = v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>();
  s.role_of = j.at("roles").get<std::map<std::string, std::string>>();
  return s;
}

struct GeneratedDataset {
  std::vector<EventSchema> schemas;
  std::vector<DatasetRecord> records;
  GenerationStats stats;
};

namespace supervision_detail {

struct SentenceOutcome {
  std::vector<EventMention> positives;
  std::vector<std::string> labels;
  NegativeReason reason = NegativeReason::trivial;
  int key_distance = 0;
  std::size_t duplicates = 0;
  std::size_t conflicts = 0;
};

inline SentenceOutcome label_against_tables(const ParsedSentence& s, const std::vector<EventTable>& tables,
                                            const std::vector<EventSchema>& schemas, const GenerationConfig& cfg) {
  SentenceOutcome out;
  out.labels.assign(s.size(), "O");
  for (std::size_t t = 0; t < tables.size(); ++t) {
    for (const auto& entry : tables[t].entries) {
      auto found = find_arguments(s, entry, schemas[t], cfg);
      auto res = label_sentence(s, found, schemas[t], cfg);
      if (res.polarity == Polarity::negative) {
        if (static_cast<int>(res.reason) > static_cast<int>(out.reason)) {
          out.reason = res.reason;
          out.key_distance = res.max_key_distance;
        } else if (res.reason == NegativeReason::distance && out.reason == NegativeReason::distance) {
          out.key_distance = std::min(out.key_distance, res.max_key_distance);
        }
        continue;
      }
      for (const auto& m : found) out.duplicates += m.occurrences > 1 ? 1 : 0;
      EventMention mention{tables[t].event_type, res.arguments, Polarity::positive};
      if (std::find(out.positives.begin(), out.positives.end(), mention) != out.positives.end()) continue;
      for (const auto& a : mention.arguments) {
        bool free = true;
        for (int i = a.span.begin; i < a.span.end; ++i) free = free && out.labels[i] == "O";
        if (!free) {
          const bool same = out.labels[a.span.begin] == "B-" + a.role;
          if (!same) ++out.conflicts;
          continue;
        }
        out.labels[a.span.begin] = "B-" + a.role;
        for (int i = a.span.begin + 1; i < a.span.end; ++i) out.labels[i] = "I-" + a.role;
      }
      out.positives.push_back(std::move(mention));
    }
  }
  return out;
}

inline std::vector<std::size_t> sample(std::vector<std::size_t> pool, std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace supervision_detail

/// Labels every sentence against every table entry; keeps all positives and a
/// seeded sample of each negative pool.
inline GeneratedDataset generate_dataset(const std::vector<EventTable>& tables,
                                         const std::vector<ParsedSentence>& corpus, const GenerationConfig& cfg) {
  using namespace supervision_detail;
  cfg.validate();
  for (const auto& t : tables) validate_table(t);
  for (const auto& s : corpus) require_valid(s);

  GeneratedDataset ds;
  const auto stats = ImportanceStats::from_tables(tables);
  ds.schemas = build_schemas(tables, stats, cfg.strategy);

  std::vector<SentenceOutcome> outcomes(corpus.size());
  parallel_for(corpus.size(), cfg.workers,
               [&](std::size_t i) { outcomes[i] = label_against_tables(corpus[i], tables, ds.schemas, cfg); });

  auto& st = ds.stats;
  st.sentences = corpus.size();
  std::map<NegativeReason, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& o = outcomes[i];
    st.duplicate_occurrences += o.duplicates;
    st.label_conflicts += o.conflicts;
    if (o.positives.empty()) {
      pools[o.reason].push_back(i);
      continue;
    }
    ++st.positive_sentences;
    std::set<std::string> types;
    for (const auto& e : o.positives) {
      types.insert(e.event_type);
      ++st.events;
      ++st.events_per_type[e.event_type];
      st.arguments += e.arguments.size();
    }
    if (types.size() > 1) ++st.multi_type_sentences;
  }

  std::mt19937_64 rng(cfg.seed);
  std::set<std::size_t> keep_negative;
  const double pos = static_cast<double>(st.positive_sentences);
  const std::pair<NegativeReason, double> plan[] = {{NegativeReason::partial, cfg.partial_negative_ratio},
                                                    {NegativeReason::distance, cfg.violation_negative_ratio},
                                                    {NegativeReason::trivial, cfg.trivial_negative_ratio}};
  for (const auto& [reason, ratio] : plan) {
    const auto& pool = pools[reason];
    st.negative_pool[to_string(reason)] = pool.size();
    const double want = std::round(ratio * pos);
    const std::size_t k = want >= static_cast<double>(pool.size()) ? pool.size() : static_cast<std::size_t>(want);
    auto chosen = sample(pool, k, rng);
    st.negative_emitted[to_string(reason)] = chosen.size();
    keep_negative.insert(chosen.begin(), chosen.end());
  }

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& o = outcomes[i];
    if (o.positives.empty() && !keep_negative.count(i)) continue;
    DatasetRecord r;
    r.sentence_id = corpus[i].id;
    r.tokens = corpus[i].words();
    if (!o.positives.empty()) {
      r.polarity = Polarity::positive;
      r.reason = NegativeReason::none;
      r.labels = std::move(o.labels);
      for (const auto& e : o.positives)
        if (std::find(r.event_types.begin(), r.event_types.end(), e.event_type) == r.event_types.end())
          r.event_types.push_back(e.event_type);
      r.events = std::move(o.positives);
    } else {
      r.polarity = Polarity::negative;
      r.reason = o.reason;
      r.key_distance = o.key_distance;
      r.labels.assign(corpus[i].size(), "O");
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace evex
