#pragma once
// Shared test data: the bundled fixture files, synthetic corpora built from
// dependency-tree templates, and random decoding problems.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "evex/evex.hpp"

namespace evex::testing {

inline std::string fixture(const std::string& name) { return std::string(EVEX_FIXTURES) + "/" + name; }

inline std::vector<EventTable> fixture_tables() { return read_tables(fixture("tables.json")); }
inline std::vector<ParsedSentence> fixture_corpus() { return read_corpus(fixture("corpus.jsonl")); }

// ---------------------------------------------------------------------------
// Sentence assembly from phrases. Each phrase has one head word; the other
// words of the phrase attach to it, and the head attaches to the head of its
// parent phrase (or is the root).

struct Phrase {
  std::vector<std::string> words;
  int head = -1;    // index into words; -1 = last word
  int parent = -1;  // index of the parent phrase; -1 = root
  std::string label = "dep";
};

inline std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text + " ") {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

inline Phrase ph(const std::string& text, int parent, std::string label = "dep", int head = -1) {
  return {split(text), head, parent, std::move(label)};
}

inline ParsedSentence assemble(const std::string& id, const std::vector<Phrase>& phrases) {
  std::vector<int> offset, head_tok;
  int n = 0;
  for (const auto& p : phrases) {
    offset.push_back(n);
    head_tok.push_back(n + (p.head < 0 ? static_cast<int>(p.words.size()) - 1 : p.head));
    n += static_cast<int>(p.words.size());
  }
  std::vector<std::string> words;
  std::vector<int> heads;
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < phrases.size(); ++k) {
    const auto& p = phrases[k];
    for (int i = 0; i < static_cast<int>(p.words.size()); ++i) {
      const int tok = offset[k] + i;
      words.push_back(p.words[i]);
      if (tok == head_tok[k]) {
        heads.push_back(p.parent < 0 ? kRootHead : head_tok[p.parent]);
        labels.push_back(p.parent < 0 ? "root" : p.label);
      } else {
        heads.push_back(head_tok[k]);
        labels.push_back("compound");
      }
    }
  }
  ParsedSentence s(id, words, heads, labels);
  require_valid(s);
  return s;
}

// ---------------------------------------------------------------------------
// Name generation. Every generated name is unique within one Namer.

class Namer {
 public:
  explicit Namer(std::uint64_t seed) : rng_(seed) {}

  std::string company() { return unique([&] { return word() + " " + pick({"Labs", "Systems", "Group", "Holdings"}); }); }
  std::string person() { return unique([&] { return pick(kGiven) + " " + word(); }); }
  std::string venue() { return unique([&] { return word() + " " + pick({"Hall", "Chapel", "Abbey", "Gardens"}); }); }
  std::string amount() {
    return unique([&] { return std::to_string(10 + rng_() % 990) + " " + pick({"million", "billion"}); });
  }
  std::string year() { return std::to_string(1960 + rng_() % 60); }

  std::mt19937_64& rng() { return rng_; }

 private:
  inline static const std::vector<std::string> kGiven = {"Alice", "Bruno", "Chen",  "Dara",  "Elena", "Farid",
                                                         "Greta", "Hugo",  "Irina", "Jonas", "Kiran", "Lena"};

  std::string pick(const std::vector<std::string>& v) { return v[rng_() % v.size()]; }
  std::string word() {
    static const std::vector<std::string> on = {"B", "D", "K", "M", "N", "T", "V", "Z", "R", "L"};
    static const std::vector<std::string> nuc = {"a", "e", "i", "o", "u"};
    static const std::vector<std::string> coda = {"rn", "x", "l", "nd", "sk", "r", "m"};
    std::string w = pick(on) + pick(nuc);
    std::string tail = pick(on);
    tail[0] = static_cast<char>(tail[0] - 'A' + 'a');
    return w + tail + pick(nuc) + pick(coda);
  }
  template <class Fn>
  std::string unique(Fn fn) {
    for (;;) {
      std::string s = fn();
      if (used_.insert(s).second) return s;
    }
  }

  std::mt19937_64 rng_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Event types used by the synthetic corpora. Properties shared with the
// auxiliary table score lower than the exclusive ones, so key selection
// yields {acquired, acquirer} + date and {person, spouse} + from.

inline const std::string kAcq = "business.acquisition";
inline const std::string kMar = "people.marriage";

struct AcqEntry {
  std::string acquirer, acquired, date, price;
};
struct MarEntry {
  std::string person, spouse, from, venue;
};

inline EventTable acquisition_table(const std::vector<AcqEntry>& es) {
  EventTable t{kAcq, {"acquired", "acquirer", "date", "price"}, {"date"}, {}};
  for (std::size_t i = 0; i < es.size(); ++i)
    t.entries.push_back({"acq" + std::to_string(i),
                         {{"acquirer", {es[i].acquirer}},
                          {"acquired", {es[i].acquired}},
                          {"date", {es[i].date}},
                          {"price", {es[i].price}}}});
  return t;
}

inline EventTable marriage_table(const std::vector<MarEntry>& es) {
  EventTable t{kMar, {"from", "person", "spouse", "venue"}, {"from"}, {}};
  for (std::size_t i = 0; i < es.size(); ++i)
    t.entries.push_back({"mar" + std::to_string(i),
                         {{"person", {es[i].person}},
                          {"spouse", {es[i].spouse}},
                          {"from", {es[i].from}},
                          {"venue", {es[i].venue}}}});
  return t;
}

/// Never matched in text; only lowers the importance of shared properties.
inline EventTable auxiliary_table() {
  return {"misc.listing",
          {"price", "venue", "date", "from"},
          {"date", "from"},
          {{"aux0", {{"price", {"0 zorkmids"}}, {"venue", {"Nowhere Hall"}}, {"date", {"0001"}}, {"from", {"0001"}}}}}};
}

// Sentence templates. `kind` names the planted situation.
enum class Plant {
  full,          // true event, all arguments, close
  keys_only,     // true event, key arguments only, close
  no_time,       // not an event: the two companies are close but undated
  far,           // not an event: the two companies are far apart
  far_dated,     // not an event: far apart, date present
  dated_cooccur, // not an event: keys and date close, no price
  trivial        // no table values at all
};

inline ParsedSentence acquisition_sentence(const std::string& id, Plant kind, const AcqEntry& e, int variant) {
  const std::string& A = e.acquirer;
  const std::string& B = e.acquired;
  switch (kind) {
    case Plant::full:
      if (variant % 3 == 0)
        return assemble(id, {ph("In " + e.date, 2, "obl"), ph(A, 2, "nsubj"), ph("acquired", -1), ph(B, 2, "obj"),
                             ph("for " + e.price, 2, "obl"), ph(".", 2, "punct")});
      if (variant % 3 == 1)
        return assemble(id, {ph(A, 1, "nsubj"), ph("bought", -1), ph(B, 1, "obj"), ph("for " + e.price, 1, "obl"),
                             ph("in " + e.date, 1, "obl"), ph(".", 1, "punct")});
      return assemble(id, {ph("In " + e.date, 3, "obl"), ph(",", 3, "punct"), ph(B, 3, "nsubj:pass"),
                           ph("was purchased", -1, "root", 1), ph("by " + A, 3, "obl"),
                           ph("for " + e.price, 3, "obl"), ph(".", 3, "punct")});
    case Plant::keys_only:
      if (variant % 2 == 0)
        return assemble(id, {ph(A, 1, "nsubj"), ph("acquired", -1), ph(B, 1, "obj"), ph("in " + e.date, 1, "obl"),
                             ph(".", 1, "punct")});
      return assemble(id, {ph("In " + e.date, 2, "obl"), ph(A, 2, "nsubj"), ph("took over", -1, "root", 0),
                           ph(B, 2, "obj"), ph(".", 2, "punct")});
    case Plant::no_time:
      return assemble(id, {ph(A, 1, "nsubj"), ph("praised", -1), ph(B, 1, "obj"), ph("for its products", 1, "obl", 2),
                           ph(".", 1, "punct")});
    case Plant::far:
      // A -> said <- expect <- analysts <- follow <- B
      return assemble(id, {ph(A, 1, "nsubj"), ph("said", -1), ph("that", 4, "mark"), ph("analysts", 4, "nsubj"),
                           ph("expect", 1, "ccomp"), ph("who", 6, "nsubj"), ph("follow", 3, "acl:relcl"),
                           ph(B, 6, "obj"), ph("growth", 4, "obj"), ph(".", 1, "punct")});
    case Plant::far_dated:
      return assemble(id, {ph(A, 1, "nsubj"), ph("said", -1), ph("in " + e.date, 1, "obl"), ph("that", 5, "mark"),
                           ph("analysts", 5, "nsubj"), ph("expect", 1, "ccomp"), ph("who", 7, "nsubj"),
                           ph("follow", 4, "acl:relcl"), ph(B, 7, "obj"), ph("growth", 5, "obj"),
                           ph(".", 1, "punct")});
    case Plant::dated_cooccur:
      return assemble(id, {ph(A, 3, "nsubj"), ph("and", 2, "cc"), ph(B, 3, "nsubj"), ph("signed", -1),
                           ph("a partnership", 3, "obj"), ph("in " + e.date, 3, "obl"), ph(".", 3, "punct")});
    case Plant::trivial:
      break;
  }
  static const std::vector<std::string> subj = {"The weather", "Local traffic", "The museum", "The river"};
  static const std::vector<std::string> pred = {"improved", "slowed", "reopened", "flooded"};
  return assemble(id, {ph(subj[variant % 4], 1, "nsubj"), ph(pred[(variant / 4) % 4], -1),
                       ph("last week", 1, "obl"), ph(".", 1, "punct")});
}

inline ParsedSentence marriage_sentence(const std::string& id, Plant kind, const MarEntry& e, int variant) {
  const std::string& P = e.person;
  const std::string& S = e.spouse;
  switch (kind) {
    case Plant::full:
      if (variant % 2 == 0)
        return assemble(id, {ph(P, 1, "nsubj"), ph("married", -1), ph(S, 1, "obj"), ph("at " + e.venue, 1, "obl"),
                             ph("in " + e.from, 1, "obl"), ph(".", 1, "punct")});
      return assemble(id, {ph("In " + e.from, 2, "obl"), ph(P, 2, "nsubj"), ph("wed", -1), ph(S, 2, "obj"),
                           ph("at " + e.venue, 2, "obl"), ph(".", 2, "punct")});
    case Plant::keys_only:
      return assemble(id, {ph(P, 1, "nsubj"), ph("married", -1), ph(S, 1, "obj"), ph("in " + e.from, 1, "obl"),
                           ph(".", 1, "punct")});
    default:
      return assemble(id, {ph(P, 1, "nsubj"), ph("met", -1), ph(S, 1, "obj"), ph("at " + e.venue, 1, "obl"),
                           ph(".", 1, "punct")});
  }
}

// ---------------------------------------------------------------------------
// Planted corpus for comparing key-argument strategies.

struct PlantedCorpus {
  std::vector<EventTable> tables;
  std::vector<ParsedSentence> corpus;
  std::vector<SentenceEvents> truth;  // planted events, one record per sentence
};

struct PlantMix {
  int full = 400, keys_only = 200, no_time = 300, far = 300, far_dated = 200, dated_cooccur = 100, trivial = 500;
};

inline PlantedCorpus planted_corpus(std::uint64_t seed, const PlantMix& mix = {}, int entries = 300) {
  Namer names(seed);
  std::vector<AcqEntry> es;
  for (int i = 0; i < entries; ++i) es.push_back({names.company(), names.company(), names.year(), names.amount()});
  PlantedCorpus pc;
  pc.tables = {acquisition_table(es), auxiliary_table()};

  std::vector<Plant> plan;
  auto add = [&](Plant p, int k) { plan.insert(plan.end(), k, p); };
  add(Plant::full, mix.full);
  add(Plant::keys_only, mix.keys_only);
  add(Plant::no_time, mix.no_time);
  add(Plant::far, mix.far);
  add(Plant::far_dated, mix.far_dated);
  add(Plant::dated_cooccur, mix.dated_cooccur);
  add(Plant::trivial, mix.trivial);
  auto& rng = names.rng();
  for (std::size_t i = plan.size(); i > 1; --i) std::swap(plan[i - 1], plan[rng() % i]);

  for (std::size_t i = 0; i < plan.size(); ++i) {
    const std::string id = "p" + std::to_string(i);
    const AcqEntry& e = es[rng() % es.size()];
    pc.corpus.push_back(acquisition_sentence(id, plan[i], e, static_cast<int>(rng() % 6)));
    SentenceEvents truth{id, {}};
    if (plan[i] == Plant::full || plan[i] == Plant::keys_only) truth.events.push_back({kAcq, {}, Polarity::positive});
    pc.truth.push_back(std::move(truth));
  }
  return pc;
}

/// Generated positives as predictions over every corpus sentence.
inline std::vector<SentenceEvents> generated_predictions(const GeneratedDataset& ds,
                                                         const std::vector<ParsedSentence>& corpus) {
  std::map<std::string, std::vector<EventMention>> found;
  for (const auto& r : ds.records)
    if (r.polarity == Polarity::positive) found[r.sentence_id] = r.events;
  std::vector<SentenceEvents> out;
  for (const auto& s : corpus) out.push_back({s.id, found[s.id]});
  return out;
}

// ---------------------------------------------------------------------------
// Templated two-type dataset for training.

struct TemplatedData {
  std::vector<EventSchema> schemas;
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> heldout;
};

inline TemplatedData templated_dataset(std::uint64_t seed, int n_train = 200, int n_heldout = 60) {
  Namer names(seed);
  std::vector<AcqEntry> acq;
  std::vector<MarEntry> mar;
  for (int i = 0; i < 60; ++i) acq.push_back({names.company(), names.company(), names.year(), names.amount()});
  for (int i = 0; i < 60; ++i) mar.push_back({names.person(), names.person(), names.year(), names.venue()});
  const std::vector<EventTable> tables = {acquisition_table(acq), marriage_table(mar), auxiliary_table()};

  auto& rng = names.rng();
  std::vector<ParsedSentence> corpus;
  const int total = n_train + n_heldout;
  for (int i = 0; i < total; ++i) {
    const std::string id = "t" + std::to_string(i);
    const int r = static_cast<int>(rng() % 20);
    const int variant = static_cast<int>(rng() % 6);
    if (r < 7)
      corpus.push_back(acquisition_sentence(id, r < 5 ? Plant::full : Plant::keys_only, acq[rng() % acq.size()], variant));
    else if (r < 13)
      corpus.push_back(marriage_sentence(id, r < 11 ? Plant::full : Plant::keys_only, mar[rng() % mar.size()], variant));
    else if (r < 15)
      corpus.push_back(acquisition_sentence(id, Plant::no_time, acq[rng() % acq.size()], variant));
    else if (r < 17)
      corpus.push_back(marriage_sentence(id, Plant::no_time, mar[rng() % mar.size()], variant));
    else
      corpus.push_back(acquisition_sentence(id, Plant::trivial, acq[0], variant));
  }

  GenerationConfig cfg;
  cfg.seed = seed;
  cfg.partial_negative_ratio = cfg.violation_negative_ratio = cfg.trivial_negative_ratio = 1e6;
  GeneratedDataset ds = generate_dataset(tables, corpus, cfg);
  TemplatedData out;
  out.schemas = ds.schemas;
  // Drop the auxiliary type: it never labels anything.
  out.schemas.erase(std::remove_if(out.schemas.begin(), out.schemas.end(),
                                   [](const EventSchema& s) { return s.event_type == "misc.listing"; }),
                    out.schemas.end());
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    (static_cast<int>(i) < n_train ? out.train : out.heldout).push_back(ds.records[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Random decoding problems.

using evex::random_label_set;
using evex::random_matrix;
using evex::random_problem;

/// Two event types sharing the actor token, in the style of
/// "Kevin Spacey starred as Frank Underwood in House of Cards , and later as
/// Tom Brand in Nine Lives": one actor span can carry only one type's role, so
/// the best two sequences each complete a different type.
inline DecodeProblem two_type_problem() {
  const std::vector<std::string> words = {"Kevin", "Spacey", "starred", "in", "House", "of", "Cards",
                                          "and",   "in",     "Nine",    "Lives"};
  LabelSet ls({"film_performance.actor", "film_performance.film", "tv_appearance.actor", "tv_appearance.series"},
              {{"film_performance", {"film_performance.actor", "film_performance.film"}},
               {"tv_appearance", {"tv_appearance.actor", "tv_appearance.series"}}});
  const int n = static_cast<int>(words.size());
  DecodeProblem p;
  p.labels = ls;
  p.A = Matrix::Zero(ls.size(), ls.size());
  // Span tags score per token; anything off-span scores -100 and O scores 0,
  // so every alteration of a solution costs more than lambda.
  p.P = Matrix::Constant(n, ls.size(), -100.0);
  p.P.col(LabelSet::kOutside).setZero();
  auto span = [&](int b, int e, const std::string& role, double s) {
    p.P(b, ls.begin_tag(role)) = s;
    for (int i = b + 1; i < e; ++i) p.P(i, ls.inside_tag(role)) = s;
  };
  span(0, 2, "film_performance.actor", 20.0);
  span(0, 2, "tv_appearance.actor", 20.0);
  span(4, 7, "tv_appearance.series", 20.0);
  span(9, 11, "film_performance.film", 29.0);
  return p;
}

}  // namespace evex::testing
