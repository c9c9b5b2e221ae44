#include <gtest/gtest.h>

#include "support/synthetic.hpp"

using namespace evex;
namespace et = evex::testing;

namespace {

Argument key(const std::string& role, int b, int e) { return {role, {b, e}, true}; }
Argument arg(const std::string& role, int b, int e) { return {role, {b, e}, false}; }

EventMention acq(std::vector<Argument> args) { return {"acq", std::move(args), Polarity::positive}; }

const EventMention kGoldA = acq({key("buyer", 0, 2), key("target", 3, 4), arg("price", 5, 7)});
const EventMention kGoldB = acq({key("buyer", 8, 9), key("target", 10, 12)});

}  // namespace

TEST(Metrics, ExactMatchIsPerfect) {
  const std::vector<SentenceEvents> g = {{"s1", {kGoldA}}, {"s2", {kGoldB}}, {"s3", {}}};
  const EvalResult r = evaluate(g, g);
  for (const Prf* p : {&r.classification, &r.key_arguments, &r.all_arguments}) {
    EXPECT_EQ(p->precision(), 1.0);
    EXPECT_EQ(p->recall(), 1.0);
    EXPECT_EQ(p->f1(), 1.0);
  }
}

TEST(Metrics, HalfRightIsOneHalf) {
  // Two predictions, one of them correct, against two gold events.
  const std::vector<SentenceEvents> gold = {{"s1", {kGoldA}}, {"s2", {kGoldB}}};
  const std::vector<SentenceEvents> pred = {{"s1", {kGoldA}}, {"s2", {{"merger", kGoldB.arguments}}}};
  const EvalResult r = evaluate(pred, gold);
  EXPECT_EQ(r.classification.precision(), 0.5);
  EXPECT_EQ(r.classification.recall(), 0.5);
  EXPECT_EQ(r.classification.f1(), 0.5);
}

TEST(Metrics, EmptyPredictionsScoreZero) {
  const std::vector<SentenceEvents> gold = {{"s1", {kGoldA}}};
  const EvalResult r = evaluate({{"s1", {}}}, gold);
  EXPECT_EQ(r.classification.precision(), 0.0);
  EXPECT_EQ(r.classification.recall(), 0.0);
  EXPECT_EQ(r.classification.f1(), 0.0);
  const EvalResult none = evaluate({}, {});
  EXPECT_EQ(none.all_arguments.f1(), 0.0);
}

TEST(Metrics, OffByOneSpanFailsArgumentsOnly) {
  const std::vector<SentenceEvents> gold = {{"s1", {kGoldA}}};
  const std::vector<SentenceEvents> key_off = {
      {"s1", {acq({key("buyer", 0, 1), key("target", 3, 4), arg("price", 5, 7)})}}};
  EvalResult r = evaluate(key_off, gold);
  EXPECT_EQ(r.classification.tp, 1);
  EXPECT_EQ(r.key_arguments.tp, 0);
  EXPECT_EQ(r.all_arguments.tp, 0);

  const std::vector<SentenceEvents> nonkey_off = {
      {"s1", {acq({key("buyer", 0, 2), key("target", 3, 4), arg("price", 5, 8)})}}};
  r = evaluate(nonkey_off, gold);
  EXPECT_EQ(r.classification.tp, 1);
  EXPECT_EQ(r.key_arguments.tp, 1);
  EXPECT_EQ(r.all_arguments.tp, 0);
}

TEST(Metrics, MixedHandCount) {
  // gold: A in s1, B and a marriage in s2. pred: A without price, B exact,
  // a spurious acquisition in s2, and nothing for the marriage.
  const EventMention mar{"marriage", {key("spouse", 0, 1)}, Polarity::positive};
  const std::vector<SentenceEvents> gold = {{"s1", {kGoldA}}, {"s2", {kGoldB, mar}}};
  const std::vector<SentenceEvents> pred = {
      {"s1", {acq({key("buyer", 0, 2), key("target", 3, 4)})}},
      {"s2", {kGoldB, acq({key("buyer", 0, 1), key("target", 2, 3)})}}};
  const EvalResult r = evaluate(pred, gold);
  EXPECT_EQ(r.classification.tp, 2);
  EXPECT_EQ(r.classification.predicted, 3);
  EXPECT_EQ(r.classification.gold, 3);
  EXPECT_EQ(r.key_arguments.tp, 2);
  EXPECT_EQ(r.all_arguments.tp, 1);
  EXPECT_NEAR(r.all_arguments.f1(), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(r.per_type.at("marriage").gold, 1);
  EXPECT_EQ(r.per_type.at("marriage").tp, 0);
}

TEST(Alignment, MatchesByOverlapOneToOne) {
  const std::vector<EventMention> gold = {kGoldA, kGoldB};
  EXPECT_EQ(align_events({kGoldB, kGoldA}, gold), (std::vector<int>{1, 0}));
  EXPECT_EQ(align_events({kGoldB, kGoldB}, gold), (std::vector<int>{1, 0}));
  EXPECT_EQ(align_events({kGoldA, kGoldA, kGoldA}, gold), (std::vector<int>{0, 1, -1}));
}

TEST(Alignment, MismatchedIdsAreErrors) {
  const std::vector<SentenceEvents> gold = {{"s1", {}}, {"s2", {}}};
  EXPECT_THROW(evaluate({{"s1", {}}}, gold), Error);
  EXPECT_THROW(evaluate({{"s1", {}}, {"s2", {}}, {"s3", {}}}, gold), Error);
  EXPECT_THROW(evaluate({{"s1", {}}, {"s1", {}}}, gold), Error);
  EXPECT_THROW(evaluate(gold, {{"s1", {}}, {"s1", {}}}), Error);
}

TEST(Metrics, ChainHoldsOnRandomPredictions) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<SentenceEvents> gold, pred;
    for (int s = 0; s < 4; ++s) {
      SentenceEvents g{"s" + std::to_string(s), {}}, p{g.sentence_id, {}};
      auto random_event = [&] {
        EventMention m{rng() % 2 ? "acq" : "mar", {}, Polarity::positive};
        const int k = 1 + static_cast<int>(rng() % 3);
        for (int a = 0; a < k; ++a) {
          const int b = static_cast<int>(rng() % 4);
          m.arguments.push_back({"r" + std::to_string(a), {b, b + 1 + static_cast<int>(rng() % 2)}, a < 2});
        }
        return m;
      };
      for (int e = static_cast<int>(rng() % 3); e > 0; --e) g.events.push_back(random_event());
      for (int e = static_cast<int>(rng() % 3); e > 0; --e) p.events.push_back(random_event());
      if (!g.events.empty() && rng() % 2) p.events.push_back(g.events[0]);
      gold.push_back(g);
      pred.push_back(p);
    }
    const EvalResult r = evaluate(pred, gold);
    EXPECT_LE(r.all_arguments.tp, r.key_arguments.tp);
    EXPECT_LE(r.key_arguments.tp, r.classification.tp);
    EXPECT_LE(r.all_arguments.f1(), r.key_arguments.f1() + 1e-12);
    EXPECT_LE(r.key_arguments.f1(), r.classification.f1() + 1e-12);
  }
}

TEST(Summary, EmptyAndFixtureDataset) {
  const DatasetSummary empty = summarize_dataset({});
  EXPECT_EQ(empty.positive_fraction(), 0.0);
  EXPECT_EQ(empty.args_per_event(), 0.0);
  EXPECT_EQ(empty.multi_type_fraction(), 0.0);

  GenerationConfig cfg;
  cfg.partial_negative_ratio = cfg.violation_negative_ratio = cfg.trivial_negative_ratio = 100.0;
  const auto records = generate_dataset(et::fixture_tables(), et::fixture_corpus(), cfg).records;
  const DatasetSummary s = summarize_dataset(records, "imp_time");
  EXPECT_EQ(s.sentences, 6);
  EXPECT_EQ(s.positives, 2);
  EXPECT_EQ(s.events, 2);
  EXPECT_EQ(s.types, (std::set<std::string>{"business.acquisition"}));
  // s1 has four arguments, s2 three
  EXPECT_DOUBLE_EQ(s.args_per_event(), 3.5);
  EXPECT_EQ(s.to_json().at("strategy"), "imp_time");
}

TEST(Summary, StricterStrategyNeverAddsPositives) {
  const auto pc = et::planted_corpus(3, {}, 120);
  auto run = [&](KeyArgStrategy st) {
    GenerationConfig cfg;
    cfg.strategy = st;
    std::set<std::string> pos;
    for (const auto& r : generate_dataset(pc.tables, pc.corpus, cfg).records)
      if (r.polarity == Polarity::positive) pos.insert(r.sentence_id);
    return pos;
  };
  const auto all = run(KeyArgStrategy::all), imp = run(KeyArgStrategy::imp);
  EXPECT_FALSE(all.empty());
  for (const auto& id : all) EXPECT_TRUE(imp.count(id)) << id;
}
