#pragma once
// Two-stage trigger-free extraction:
//   stage 1  BLSTM-CRF over key-argument tags, post-processed by constrained
//            decoding; an event type is detected iff all of its key roles
//            carry a B- tag;
//   stage 2  a second BLSTM-CRF, fed the stage-1 key-argument tags of one
//            detected event, tags the remaining (non-key) arguments.

#include <chrono>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "evex/core.hpp"
#include "evex/crf.hpp"
#include "evex/ilp.hpp"
#include "evex/io.hpp"
#include "evex/neural.hpp"
#include "evex/parallel.hpp"
#include "evex/supervision.hpp"

namespace evex {

/// BLSTM emissions plus CRF transitions over one label inventory.
struct Tagger {
  Blstm net;
  Matrix transitions;
  LabelSet labels;
  std::optional<LabelSet> keyarg_labels;  // stage-2 input inventory

  Matrix emissions(const std::vector<std::string>& tokens, const std::vector<int>& keyargs = {}) const {
    return net.forward(net.word_ids(tokens), keyargs);
  }
};

enum class DecodeMode { viterbi, ilp, ilp_multi };

inline DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "viterbi") return DecodeMode::viterbi;
  if (s == "ilp") return DecodeMode::ilp;
  if (s == "ilp_multi" || s == "multi") return DecodeMode::ilp_multi;
  throw Error("bad_value", "unknown decode mode '" + s + "'");
}

struct DecodeOptions {
  DecodeMode mode = DecodeMode::ilp_multi;
  double lambda_factor = 0.5;
  int max_solutions = 10;
};

struct Detection {
  std::string event_type;
  LabelSequence sequence;
  std::vector<int> labels;
};

/// Event types whose key roles all occur as B- tags, in group order.
inline std::vector<std::string> detect_event_types(const std::vector<int>& ids, const LabelSet& ls) {
  std::set<int> begun;
  for (int id : ids)
    if (LabelSet::is_begin(id)) begun.insert(LabelSet::role_of(id));
  std::vector<std::string> out;
  for (const auto& [type, roles] : ls.groups()) {
    if (roles.empty()) continue;
    bool all = std::all_of(roles.begin(), roles.end(), [&](const std::string& r) { return begun.count(ls.role_index(r)); });
    if (all) out.push_back(type);
  }
  return out;
}

inline std::vector<Decoded> decode_sequences(const Matrix& P, const Matrix& A, const LabelSet& ls,
                                             const DecodeOptions& opt) {
  if (opt.mode == DecodeMode::viterbi) return {viterbi(P, A)};
  DecodeProblem prob{P, A, ls, opt.lambda_factor, opt.max_solutions};
  if (opt.mode == DecodeMode::ilp) return {ilp_decode(prob)};
  return ilp_decode_multi(prob).solutions;
}

/// Key-argument tagging and event detection; one entry per detected type.
inline std::vector<Detection> stage1(const std::vector<std::string>& tokens, const Tagger& model1,
                                     const DecodeOptions& opt = {}) {
  const Matrix P = model1.emissions(tokens);
  std::vector<Detection> out;
  std::set<std::string> seen;
  for (const auto& d : decode_sequences(P, model1.transitions, model1.labels, opt))
    for (const auto& type : detect_event_types(d.labels, model1.labels))
      if (seen.insert(type).second) out.push_back({type, to_sequence(d.labels, model1.labels, d.score), d.labels});
  return out;
}

inline std::vector<Detection> stage1(const ParsedSentence& s, const Tagger& model1, const DecodeOptions& opt = {}) {
  return stage1(s.words(), model1, opt);
}

inline const EventSchema& schema_for(const std::vector<EventSchema>& schemas, const std::string& type) {
  for (const auto& s : schemas)
    if (s.event_type == type) return s;
  throw Error("unknown_type", "no schema for event type '" + type + "'");
}

/// Stage-1 tags of one event's key roles, everything else O.
inline std::vector<int> keyarg_features(const std::vector<int>& stage1_ids, const LabelSet& stage1_labels,
                                        const EventSchema& schema) {
  const auto roles = schema.key_roles();
  std::set<std::string> mine(roles.begin(), roles.end());
  std::vector<int> out(stage1_ids.size(), LabelSet::kOutside);
  for (std::size_t i = 0; i < stage1_ids.size(); ++i)
    if (!LabelSet::is_outside(stage1_ids[i]) && mine.count(stage1_labels.role_name(stage1_ids[i])))
      out[i] = stage1_ids[i];
  return out;
}

/// Non-key argument tagging for each detection; key spans come from stage 1
/// unchanged and non-key spans overlapping them are dropped.
inline std::vector<EventMention> stage2(const std::vector<std::string>& tokens, const Tagger& model1,
                                        const Tagger* model2, const std::vector<Detection>& detections,
                                        const std::vector<EventSchema>& schemas) {
  if (model2 && (!model2->keyarg_labels || !(*model2->keyarg_labels == model1.labels)))
    throw Error("label_mismatch", "stage-2 model was not trained on this stage-1 label set");
  std::vector<EventMention> out;
  for (const auto& det : detections) {
    const EventSchema& schema = schema_for(schemas, det.event_type);
    EventMention m{det.event_type, {}, Polarity::positive};
    const auto key_roles = schema.key_roles();
    std::set<std::string> done;
    for (const auto& rs : extract_spans(det.labels, model1.labels))
      if (std::find(key_roles.begin(), key_roles.end(), rs.role) != key_roles.end() && done.insert(rs.role).second)
        m.arguments.push_back({rs.role, rs.span, true});

    const auto nonkey = schema.nonkey_roles();
    if (model2 && !nonkey.empty()) {
      const auto feats = keyarg_features(det.labels, model1.labels, schema);
      const Matrix P = model2->emissions(tokens, feats);
      const Decoded d = viterbi(P, model2->transitions);
      for (const auto& rs : extract_spans(d.labels, model2->labels)) {
        if (std::find(nonkey.begin(), nonkey.end(), rs.role) == nonkey.end()) continue;
        if (!done.insert(rs.role).second) continue;
        bool clash = std::any_of(m.arguments.begin(), m.arguments.end(),
                                 [&](const Argument& a) { return a.key && a.span.overlaps(rs.span); });
        if (clash) {
          done.erase(rs.role);
          continue;
        }
        m.arguments.push_back({rs.role, rs.span, false});
      }
    }
    std::sort(m.arguments.begin(), m.arguments.end(),
              [](const Argument& a, const Argument& b) { return a.span < b.span; });
    out.push_back(std::move(m));
  }
  return out;
}

struct PipelineModel {
  std::vector<EventSchema> schemas;
  Tagger stage1;
  std::optional<Tagger> stage2;
  std::uint64_t seed = 0;

  std::vector<EventMention> extract(const std::vector<std::string>& tokens, const DecodeOptions& opt) const {
    auto dets = evex::stage1(tokens, stage1, opt);
    return evex::stage2(tokens, stage1, stage2 ? &*stage2 : nullptr, dets, schemas);
  }
};

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
  ModelConfig stage1 = sized(100);
  ModelConfig stage2 = sized(150);
  int max_epochs = 50;
  int patience = 5;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double dev_fraction = 0.1;
  double unk_replace = 0.5;  // chance to feed a training singleton as <unk>
  bool train_stage2 = true;
  std::string embeddings;  // optional text vector file
  std::uint64_t seed = 0;

  static ModelConfig sized(int hidden) {
    ModelConfig c;
    c.lstm_hidden = hidden;
    return c;
  }
};

struct TrainExample {
  std::vector<std::string> tokens;
  std::vector<int> keyargs;
  std::vector<int> gold;
};

struct EpochStats {
  int epoch = 0;
  double train_nll = 0.0;  // dropout-free mean NLL over the training split
  double dev_nll = 0.0;    // same over the dev split (train NLL if no dev split)
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
};

namespace pipeline_detail {

inline std::vector<std::string> project_labels(const std::vector<std::string>& labels, const LabelSet& target) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (const auto& t : labels) out.push_back(target.find(t) ? t : "O");
  // Projection can orphan an I- tag only if its B- was dropped; clear such runs.
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i].rfind("I-", 0) == 0) {
      const std::string role = out[i].substr(2);
      if (i == 0 || (out[i - 1] != "B-" + role && out[i - 1] != "I-" + role)) out[i] = "O";
    }
  return out;
}

inline double mean_nll(const Tagger& t, const std::vector<TrainExample>& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : data) {
    const Matrix P = t.emissions(ex.tokens, ex.keyargs);
    total += log_partition(P, t.transitions) - seq_score(P, t.transitions, ex.gold);
  }
  return total / static_cast<double>(data.size());
}

}  // namespace pipeline_detail

/// Trains one tagger with Adam and dev-NLL early stopping; the returned model
/// holds the parameters of the best dev epoch.
inline Tagger train_tagger(ModelConfig cfg, LabelSet labels, std::optional<LabelSet> keyarg_labels,
                           const std::vector<TrainExample>& examples, const TrainConfig& tc, std::uint64_t seed,
                           TrainReport* report = nullptr) {
  using namespace pipeline_detail;
  if (examples.empty()) throw Error("empty_dataset", "no training examples");
  std::mt19937_64 rng(seed);

  std::map<std::string, int> freq;
  for (const auto& ex : examples)
    for (const auto& w : ex.tokens) ++freq[normalize(w)];
  cfg.vocab = Vocab();
  for (const auto& ex : examples)
    for (const auto& w : ex.tokens) cfg.vocab.add(w);
  cfg.num_labels = labels.size();
  cfg.num_keyarg_labels = keyarg_labels ? keyarg_labels->size() : 0;
  cfg.validate();

  BlstmParams params = BlstmParams::initialize(cfg, rng);
  if (!tc.embeddings.empty()) load_embeddings(tc.embeddings, cfg.vocab, params.embed);
  Tagger tagger{Blstm(cfg, std::move(params)), Matrix::Zero(labels.size(), labels.size()), labels, keyarg_labels};

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::size_t n_dev = examples.size() >= 10 ? static_cast<std::size_t>(std::round(tc.dev_fraction * examples.size())) : 0;
  std::vector<TrainExample> train, dev;
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_dev ? dev : train).push_back(examples[order[k]]);
  if (train.empty()) std::swap(train, dev);

  Adam adam(tc.learning_rate);
  Tagger best = tagger;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  TrainReport rep;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::vector<std::size_t> perm(train.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);

    for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t stop = std::min(perm.size(), start + static_cast<std::size_t>(tc.batch_size));
      BlstmParams grads = BlstmParams::zeros(tagger.net.config());
      Matrix dA = Matrix::Zero(labels.size(), labels.size());
      for (std::size_t k = start; k < stop; ++k) {
        const TrainExample& ex = train[perm[k]];
        std::vector<int> ids = tagger.net.word_ids(ex.tokens);
        for (std::size_t t = 0; t < ids.size(); ++t)
          if (freq[normalize(ex.tokens[t])] == 1 && unit_uniform(rng) < tc.unk_replace) ids[t] = Vocab::kUnk;
        ForwardCache cache;
        const Matrix P = tagger.net.forward(ids, ex.keyargs, &cache, &rng);
        const CrfLoss l = nll_loss_and_grads(P, tagger.transitions, ex.gold);
        tagger.net.backward(cache, l.dP, grads);
        dA += l.dA;
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::vector<std::pair<std::string, Matrix*>> ps;
      std::vector<std::pair<std::string, const Matrix*>> gs;
      BlstmParams& p = tagger.net.mutable_params();
      p.visit([&](const char* name, Matrix& m) { ps.emplace_back(name, &m); });
      grads.visit([&](const char* name, Matrix& m) {
        m *= scale;
        gs.emplace_back(name, &m);
      });
      dA *= scale;
      ps.emplace_back("transitions", &tagger.transitions);
      gs.emplace_back("transitions", &dA);
      adam.step(ps, gs);
    }

    EpochStats es{epoch, mean_nll(tagger, train), 0.0};
    es.dev_nll = dev.empty() ? es.train_nll : mean_nll(tagger, dev);
    rep.epochs.push_back(es);
    if (es.dev_nll < best_loss) {
      best_loss = es.dev_nll;
      best = tagger;
      rep.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  if (report) *report = rep;
  return best;
}

struct PipelineReport {
  TrainReport stage1;
  TrainReport stage2;
};

/// Stage 1 learns key-argument-only projections of the gold tags; stage 2
/// learns full tags of each positive event with that event's gold key tags as
/// input features.
inline PipelineModel train_pipeline(const std::vector<DatasetRecord>& dataset, const std::vector<EventSchema>& schemas,
                                    const TrainConfig& tc, PipelineReport* report = nullptr) {
  using namespace pipeline_detail;
  if (dataset.empty()) throw Error("empty_dataset", "training dataset is empty");
  PipelineModel model;
  model.schemas = schemas;
  model.seed = tc.seed;
  const LabelSet key_labels = label_set_for(schemas, true);
  const LabelSet full_labels = label_set_for(schemas, false);

  std::vector<TrainExample> ex1;
  for (const auto& r : dataset) {
    TrainExample ex;
    ex.tokens = r.tokens;
    for (const auto& t : project_labels(r.labels, key_labels)) ex.gold.push_back(key_labels.id(t));
    ex1.push_back(std::move(ex));
  }
  PipelineReport rep;
  model.stage1 = train_tagger(tc.stage1, key_labels, std::nullopt, ex1, tc, tc.seed, &rep.stage1);

  if (tc.train_stage2) {
    std::vector<TrainExample> ex2;
    for (const auto& r : dataset) {
      if (r.polarity != Polarity::positive) continue;
      for (const auto& ev : r.events) {
        TrainExample ex;
        ex.tokens = r.tokens;
        ex.keyargs.assign(r.tokens.size(), LabelSet::kOutside);
        ex.gold.assign(r.tokens.size(), LabelSet::kOutside);
        for (const auto& a : ev.arguments) {
          if (!full_labels.has_role(a.role)) continue;
          ex.gold[a.span.begin] = full_labels.begin_tag(a.role);
          for (int i = a.span.begin + 1; i < a.span.end; ++i) ex.gold[i] = full_labels.inside_tag(a.role);
          if (a.key) {
            ex.keyargs[a.span.begin] = key_labels.begin_tag(a.role);
            for (int i = a.span.begin + 1; i < a.span.end; ++i) ex.keyargs[i] = key_labels.inside_tag(a.role);
          }
        }
        ex2.push_back(std::move(ex));
      }
    }
    if (!ex2.empty())
      model.stage2 = train_tagger(tc.stage2, full_labels, key_labels, ex2, tc, tc.seed + 1, &rep.stage2);
  }
  if (report) *report = rep;
  return model;
}

// ---------------------------------------------------------------------------
// Model files.

inline constexpr int kModelFormatVersion = 1;

inline json labels_to_json(const LabelSet& ls) { return {{"roles", ls.roles()}, {"groups", ls.groups()}}; }

inline LabelSet labels_from_json(const json& j) {
  return LabelSet(j.at("roles").get<std::vector<std::string>>(),
                  j.at("groups").get<std::map<std::string, std::vector<std::string>>>());
}

inline json tagger_to_json(const Tagger& t) {
  const ModelConfig& c = t.net.config();
  json tensors = json::object();
  t.net.params().visit([&](const char* name, const Matrix& m) { tensors[name] = tensor_to_json(m); });
  tensors["transitions"] = tensor_to_json(t.transitions);
  return {{"config",
           {{"embed_dim", c.embed_dim},
            {"lstm_hidden", c.lstm_hidden},
            {"keyarg_embed_dim", c.keyarg_embed_dim},
            {"dropout_rate", c.dropout_rate},
            {"num_labels", c.num_labels},
            {"num_keyarg_labels", c.num_keyarg_labels}}},
          {"vocab", c.vocab.words()},
          {"labels", labels_to_json(t.labels)},
          {"keyarg_labels", t.keyarg_labels ? labels_to_json(*t.keyarg_labels) : json(nullptr)},
          {"tensors", tensors}};
}

inline Tagger tagger_from_json(const json& j) {
  const json& c = j.at("config");
  ModelConfig cfg;
  cfg.embed_dim = c.at("embed_dim").get<int>();
  cfg.lstm_hidden = c.at("lstm_hidden").get<int>();
  cfg.keyarg_embed_dim = c.at("keyarg_embed_dim").get<int>();
  cfg.dropout_rate = c.at("dropout_rate").get<double>();
  cfg.num_labels = c.at("num_labels").get<int>();
  cfg.num_keyarg_labels = c.at("num_keyarg_labels").get<int>();
  cfg.vocab = Vocab::from_words(j.at("vocab").get<std::vector<std::string>>());
  BlstmParams p;
  const json& ts = j.at("tensors");
  p.visit([&](const char* name, Matrix& m) { m = tensor_from_json(ts.at(name), name); });
  Tagger t;
  t.net = Blstm(cfg, std::move(p));
  t.transitions = tensor_from_json(ts.at("transitions"), "transitions");
  t.labels = labels_from_json(j.at("labels"));
  if (!j.at("keyarg_labels").is_null()) t.keyarg_labels = labels_from_json(j.at("keyarg_labels"));
  if (t.transitions.rows() != t.labels.size() || t.transitions.cols() != t.labels.size() ||
      cfg.num_labels != t.labels.size())
    throw Error("shape", "transition matrix does not match the label set");
  return t;
}

inline json pipeline_to_json(const PipelineModel& m) {
  json schemas = json::array();
  for (const auto& s : m.schemas) schemas.push_back(schema_to_json(s));
  return {{"format", "evex-pipeline"},
          {"version", kModelFormatVersion},
          {"tool_version", kVersion},
          {"seed", m.seed},
          {"schemas", schemas},
          {"stage1", tagger_to_json(m.stage1)},
          {"stage2", m.stage2 ? tagger_to_json(*m.stage2) : json(nullptr)}};
}

inline PipelineModel pipeline_from_json(const json& j) {
  if (j.value("format", "") != "evex-pipeline") throw Error("parse", "not an evex pipeline model");
  if (j.at("version").get<int>() != kModelFormatVersion)
    throw Error("parse", "unsupported model version " + j.at("version").dump());
  PipelineModel m;
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& s : j.at("schemas")) m.schemas.push_back(schema_from_json(s));
  m.stage1 = tagger_from_json(j.at("stage1"));
  if (!j.at("stage2").is_null()) m.stage2 = tagger_from_json(j.at("stage2"));
  return m;
}

inline void save_pipeline(const std::string& path, const PipelineModel& m) {
  auto out = io_detail::open_out(path);
  out << pipeline_to_json(m).dump() << '\n';
}

inline PipelineModel load_pipeline(const std::string& path) {
  try {
    return pipeline_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw Error("parse", path + ":0: " + e.what());
  }
}

struct ExtractionRecord {
  std::string sentence_id;
  std::vector<std::string> tokens;
  std::vector<EventMention> events;
};

inline json extraction_to_json(const ExtractionRecord& r) {
  json events = json::array();
  for (const auto& e : r.events) events.push_back(mention_to_json(e, r.tokens));
  return {{"sentence_id", r.sentence_id}, {"events", events}};
}

/// Parallel over sentences; output order follows the input.
inline std::vector<ExtractionRecord> extract_corpus(const PipelineModel& model,
                                                    const std::vector<ParsedSentence>& corpus,
                                                    const DecodeOptions& opt, int workers = 1) {
  std::vector<ExtractionRecord> out(corpus.size());
  parallel_for(corpus.size(), workers, [&](std::size_t i) {
    out[i].sentence_id = corpus[i].id;
    out[i].tokens = corpus[i].words();
    out[i].events = model.extract(out[i].tokens, opt);
  });
  return out;
}

}  // namespace evex
