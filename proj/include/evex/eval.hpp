#pragma once
// Scoring of predicted event mentions against gold ones at three levels:
// event classification, key-argument detection and all-argument detection.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evex/core.hpp"
#include "evex/io.hpp"
#include "evex/pipeline.hpp"
#include "evex/supervision.hpp"

namespace evex {

struct SentenceEvents {
  std::string sentence_id;
  std::vector<EventMention> events;
};

struct Prf {
  long tp = 0;
  long predicted = 0;
  long gold = 0;

  double precision() const { return predicted == 0 ? 0.0 : static_cast<double>(tp) / predicted; }
  double recall() const { return gold == 0 ? 0.0 : static_cast<double>(tp) / gold; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  Prf& operator+=(const Prf& o) {
    tp += o.tp;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  json to_json() const {
    return {{"tp", tp}, {"predicted", predicted}, {"gold", gold},
            {"precision", precision()}, {"recall", recall()}, {"f1", f1()}};
  }
};

struct EvalResult {
  Prf classification;
  Prf key_arguments;
  Prf all_arguments;
  std::map<std::string, Prf> per_type;  // classification, by event type

  json to_json() const {
    json types = json::object();
    for (const auto& [t, p] : per_type) types[t] = p.to_json();
    return {{"event_classification", classification.to_json()},
            {"key_argument_detection", key_arguments.to_json()},
            {"all_argument_detection", all_arguments.to_json()},
            {"per_type", types}};
  }
};

namespace eval_detail {

using ArgSet = std::set<std::pair<std::string, Span>>;

inline ArgSet args_of(const EventMention& m, bool key_only) {
  ArgSet out;
  for (const auto& a : m.arguments)
    if (!key_only || a.key) out.insert({a.role, a.span});
  return out;
}

inline int overlap(const EventMention& a, const EventMention& b) {
  const auto x = args_of(a, false), y = args_of(b, false);
  int n = 0;
  for (const auto& v : x) n += static_cast<int>(y.count(v));
  return n;
}

}  // namespace eval_detail

/// Pairs predicted and gold events of the same type within one sentence,
/// greedily by shared arguments (ties: earlier gold, then earlier prediction).
/// Returns pred index -> gold index, -1 when unmatched.
inline std::vector<int> align_events(const std::vector<EventMention>& pred, const std::vector<EventMention>& gold) {
  struct Cand {
    int shared, g, p;
  };
  std::vector<Cand> cands;
  for (int p = 0; p < static_cast<int>(pred.size()); ++p)
    for (int g = 0; g < static_cast<int>(gold.size()); ++g)
      if (pred[p].event_type == gold[g].event_type) cands.push_back({eval_detail::overlap(pred[p], gold[g]), g, p});
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.shared != b.shared) return a.shared > b.shared;
    if (a.g != b.g) return a.g < b.g;
    return a.p < b.p;
  });
  std::vector<int> match(pred.size(), -1);
  std::vector<char> used(gold.size(), 0);
  for (const auto& c : cands)
    if (match[c.p] < 0 && !used[c.g]) {
      match[c.p] = c.g;
      used[c.g] = 1;
    }
  return match;
}

inline void score_sentence(const std::vector<EventMention>& pred, const std::vector<EventMention>& gold,
                           EvalResult& r) {
  const auto match = align_events(pred, gold);
  for (const auto& g : gold) ++r.per_type[g.event_type].gold;
  for (const auto& p : pred) ++r.per_type[p.event_type].predicted;
  r.classification.gold += static_cast<long>(gold.size());
  r.key_arguments.gold += static_cast<long>(gold.size());
  r.all_arguments.gold += static_cast<long>(gold.size());
  r.classification.predicted += static_cast<long>(pred.size());
  r.key_arguments.predicted += static_cast<long>(pred.size());
  r.all_arguments.predicted += static_cast<long>(pred.size());
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (match[p] < 0) continue;
    const EventMention& g = gold[match[p]];
    ++r.classification.tp;
    ++r.per_type[g.event_type].tp;
    if (eval_detail::args_of(pred[p], true) == eval_detail::args_of(g, true)) ++r.key_arguments.tp;
    if (eval_detail::args_of(pred[p], false) == eval_detail::args_of(g, false)) ++r.all_arguments.tp;
  }
}

/// Both sides must cover the same sentence ids.
inline EvalResult evaluate(const std::vector<SentenceEvents>& pred, const std::vector<SentenceEvents>& gold) {
  std::map<std::string, const SentenceEvents*> by_id;
  for (const auto& g : gold)
    if (!by_id.emplace(g.sentence_id, &g).second)
      throw Error("alignment", "duplicate gold sentence id '" + g.sentence_id + "'");
  std::set<std::string> seen;
  EvalResult r;
  for (const auto& p : pred) {
    auto it = by_id.find(p.sentence_id);
    if (it == by_id.end()) throw Error("alignment", "predicted sentence '" + p.sentence_id + "' has no gold record");
    if (!seen.insert(p.sentence_id).second)
      throw Error("alignment", "duplicate predicted sentence id '" + p.sentence_id + "'");
    score_sentence(p.events, it->second->events, r);
  }
  for (const auto& g : gold)
    if (!seen.count(g.sentence_id)) throw Error("alignment", "gold sentence '" + g.sentence_id + "' was not predicted");
  return r;
}

/// Event classification only: sentence-level type sets against a reference.
inline Prf score_event_classification(const std::vector<SentenceEvents>& pred, const std::vector<SentenceEvents>& gold) {
  return evaluate(pred, gold).classification;
}

inline Prf score_key_args(const std::vector<SentenceEvents>& pred, const std::vector<SentenceEvents>& gold) {
  return evaluate(pred, gold).key_arguments;
}

inline Prf score_all_args(const std::vector<SentenceEvents>& pred, const std::vector<SentenceEvents>& gold) {
  return evaluate(pred, gold).all_arguments;
}

inline std::vector<SentenceEvents> gold_from_dataset(const std::vector<DatasetRecord>& records) {
  std::vector<SentenceEvents> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.sentence_id, r.events});
  return out;
}

inline std::vector<SentenceEvents> from_extractions(const std::vector<ExtractionRecord>& recs) {
  std::vector<SentenceEvents> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back({r.sentence_id, r.events});
  return out;
}

/// Reads `{sentence_id, events:[...]}` lines; dataset records also qualify.
inline std::vector<SentenceEvents> read_sentence_events(const std::string& path) {
  std::vector<SentenceEvents> out;
  for_each_jsonl(path, [&](int, const json& j) {
    SentenceEvents s;
    s.sentence_id = j.at("sentence_id").get<std::string>();
    if (j.contains("events"))
      for (const auto& e : j.at("events")) s.events.push_back(mention_from_json(e));
    out.push_back(std::move(s));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dataset statistics.

struct DatasetSummary {
  std::string strategy;
  long sentences = 0;
  long positives = 0;
  long events = 0;
  long arguments = 0;
  long multi_type = 0;
  std::set<std::string> types;

  double positive_fraction() const { return sentences == 0 ? 0.0 : static_cast<double>(positives) / sentences; }
  double args_per_event() const { return events == 0 ? 0.0 : static_cast<double>(arguments) / events; }
  double multi_type_fraction() const { return positives == 0 ? 0.0 : static_cast<double>(multi_type) / positives; }

  json to_json() const {
    return {{"strategy", strategy},
            {"sentences", sentences},
            {"types", types.size()},
            {"events", events},
            {"positive_fraction", positive_fraction()},
            {"args_per_event", args_per_event()},
            {"multi_type_fraction", multi_type_fraction()}};
  }
};

inline DatasetSummary summarize_dataset(const std::vector<DatasetRecord>& records, std::string strategy = "") {
  DatasetSummary s;
  s.strategy = std::move(strategy);
  for (const auto& r : records) {
    ++s.sentences;
    if (r.polarity != Polarity::positive) continue;
    ++s.positives;
    std::set<std::string> types;
    for (const auto& e : r.events) {
      ++s.events;
      s.arguments += static_cast<long>(e.arguments.size());
      types.insert(e.event_type);
      s.types.insert(e.event_type);
    }
    if (types.size() > 1) ++s.multi_type;
  }
  return s;
}

}  // namespace evex
