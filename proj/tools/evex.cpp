// evex: batch entry points for dataset generation, training, extraction,
// scoring, brute-force oracle checks and dataset reports.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evex/evex.hpp"

namespace {

using evex::json;

struct Run {
  std::string command;
  std::string out;
  std::string manifest;
  std::uint64_t seed = 0;
  int workers = evex::default_workers();
  json inputs = json::object();
  json outputs = json::array();
  json settings = json::object();
};

json first_header(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("header")) return j.at("header");
    break;
  }
  return nullptr;
}

std::vector<evex::EventSchema> schemas_from_header(const std::string& path) {
  const json h = first_header(path);
  if (h.is_null() || !h.contains("schemas"))
    throw evex::Error("parse", path + ": dataset has no schema header (write it with `evex gen`)");
  std::vector<evex::EventSchema> out;
  for (const auto& s : h.at("schemas")) out.push_back(evex::schema_from_json(s));
  return out;
}

json with_header(const std::string& kind, std::uint64_t seed, json body) {
  json out = evex::artifact_header(kind, seed);
  for (auto& [k, v] : body.items()) out[k] = std::move(v);
  return out;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string tables, corpus, aliases, out, stats, strategy = "imp_time";
  int max_dist = 2;
  bool no_distance_filter = false;
  double partial = evex::kDefaultPartialRatio;
  double violation = evex::kDefaultViolationRatio;
  double trivial = evex::kDefaultTrivialRatio;
};

void run_gen(const GenArgs& a, Run& run) {
  evex::GenerationConfig cfg;
  cfg.max_dep_distance = a.max_dist;
  cfg.distance_filter = !a.no_distance_filter;
  cfg.strategy = evex::parse_strategy(a.strategy);
  cfg.partial_negative_ratio = a.partial;
  cfg.violation_negative_ratio = a.violation;
  cfg.trivial_negative_ratio = a.trivial;
  cfg.seed = run.seed;
  cfg.workers = run.workers;
  if (!a.aliases.empty()) cfg.alias_map = evex::read_aliases(a.aliases);

  const auto ds = evex::generate_dataset(evex::read_tables(a.tables), evex::read_corpus(a.corpus), cfg);
  json header = evex::artifact_header("dataset", run.seed);
  json schemas = json::array();
  for (const auto& s : ds.schemas) schemas.push_back(evex::schema_to_json(s));
  header["header"]["strategy"] = evex::to_string(cfg.strategy);
  header["header"]["schemas"] = schemas;
  std::vector<json> records;
  records.reserve(ds.records.size());
  for (const auto& r : ds.records) records.push_back(evex::record_to_json(r));
  evex::write_jsonl(a.out, header, records);
  run.outputs.push_back(a.out);
  if (!a.stats.empty()) {
    json stats = ds.stats.to_json();
    stats["strategy"] = evex::to_string(cfg.strategy);
    stats["schemas"] = schemas;
    evex::write_json(a.stats, with_header("generation_stats", run.seed, stats));
    run.outputs.push_back(a.stats);
  }
  run.settings = {{"strategy", a.strategy},
                  {"max_dist", a.max_dist},
                  {"distance_filter", cfg.distance_filter},
                  {"partial_ratio", a.partial},
                  {"violation_ratio", a.violation},
                  {"trivial_ratio", a.trivial}};
  std::cout << "gen: " << ds.records.size() << " records (" << ds.stats.positive_sentences << " positive) -> " << a.out
            << '\n';
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out, embeddings, report;
  int epochs = 50, patience = 5, batch = 8, hidden1 = 100, hidden2 = 150, embed_dim = 200, keyarg_dim = 50;
  double lr = 1e-3, dropout = 0.5, dev_fraction = 0.1, unk = 0.5;
  bool no_stage2 = false;
};

void run_train(const TrainArgs& a, Run& run) {
  const auto schemas = schemas_from_header(a.data);
  const auto data = evex::read_dataset(a.data);
  evex::TrainConfig tc;
  for (auto* m : {&tc.stage1, &tc.stage2}) {
    m->embed_dim = a.embed_dim;
    m->keyarg_embed_dim = a.keyarg_dim;
    m->dropout_rate = a.dropout;
  }
  tc.stage1.lstm_hidden = a.hidden1;
  tc.stage2.lstm_hidden = a.hidden2;
  tc.max_epochs = a.epochs;
  tc.patience = a.patience;
  tc.batch_size = a.batch;
  tc.learning_rate = a.lr;
  tc.dev_fraction = a.dev_fraction;
  tc.unk_replace = a.unk;
  tc.train_stage2 = !a.no_stage2;
  tc.embeddings = a.embeddings;
  tc.seed = run.seed;

  evex::PipelineReport rep;
  const auto model = evex::train_pipeline(data, schemas, tc, &rep);
  evex::save_pipeline(a.out, model);
  run.outputs.push_back(a.out);
  auto epochs = [](const evex::TrainReport& r) {
    json e = json::array();
    for (const auto& s : r.epochs) e.push_back({{"epoch", s.epoch}, {"train_nll", s.train_nll}, {"dev_nll", s.dev_nll}});
    return json{{"best_epoch", r.best_epoch}, {"epochs", e}};
  };
  if (!a.report.empty()) {
    evex::write_json(a.report, with_header("training_report", run.seed,
                                           {{"stage1", epochs(rep.stage1)}, {"stage2", epochs(rep.stage2)}}));
    run.outputs.push_back(a.report);
  }
  run.settings = {{"epochs", a.epochs},   {"patience", a.patience}, {"batch_size", a.batch},
                  {"learning_rate", a.lr}, {"hidden1", a.hidden1},   {"hidden2", a.hidden2},
                  {"embed_dim", a.embed_dim}, {"keyarg_dim", a.keyarg_dim}, {"dropout", a.dropout},
                  {"dev_fraction", a.dev_fraction}, {"unk_replace", a.unk}, {"stage2", tc.train_stage2}};
  std::cout << "train: " << data.size() << " records, stage 1 best epoch " << rep.stage1.best_epoch << " -> " << a.out
            << '\n';
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string model, corpus, out, mode = "ilp_multi";
  bool multi = false;
  double lambda_factor = 0.5;
  int max_solutions = 10;
};

void run_extract(const ExtractArgs& a, Run& run) {
  const auto model = evex::load_pipeline(a.model);
  evex::DecodeOptions opt;
  opt.mode = a.multi ? evex::DecodeMode::ilp_multi : evex::parse_decode_mode(a.mode);
  opt.lambda_factor = a.lambda_factor;
  opt.max_solutions = a.max_solutions;
  run.seed = model.seed;
  const auto recs = evex::extract_corpus(model, evex::read_corpus(a.corpus), opt, run.workers);
  std::vector<json> lines;
  lines.reserve(recs.size());
  std::size_t events = 0;
  for (const auto& r : recs) {
    lines.push_back(evex::extraction_to_json(r));
    events += r.events.size();
  }
  json header = evex::artifact_header("extractions", model.seed);
  header["header"]["mode"] = a.multi ? "ilp_multi" : a.mode;
  header["header"]["lambda_factor"] = a.lambda_factor;
  evex::write_jsonl(a.out, header, lines);
  run.outputs.push_back(a.out);
  run.settings = {{"mode", header["header"]["mode"]}, {"lambda_factor", a.lambda_factor}, {"max_solutions", a.max_solutions}};
  std::cout << "extract: " << recs.size() << " sentences, " << events << " events -> " << a.out << '\n';
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gold, out;
};

void run_eval(const EvalArgs& a, Run& run) {
  const auto r = evex::evaluate(evex::read_sentence_events(a.pred), evex::read_sentence_events(a.gold));
  evex::write_json(a.out, with_header("metrics", run.seed, r.to_json()));
  run.outputs.push_back(a.out);
  std::cout << "eval: event F1 " << r.classification.f1() << ", key-argument F1 " << r.key_arguments.f1()
            << ", all-argument F1 " << r.all_arguments.f1() << '\n';
}

// ---------------------------------------------------------------------------

struct OracleArgs {
  std::string check = "all", out;
  int cases = 0;
};

void run_oracle(const OracleArgs& a, Run& run) {
  const std::uint64_t s = run.seed;
  auto n = [&](int dflt) { return a.cases > 0 ? a.cases : dflt; };
  const std::vector<std::pair<std::string, std::function<evex::OracleReport()>>> all = {
      {"ilp", [&] { return evex::check_ilp(s, n(500)); }},
      {"ilp-multi", [&] { return evex::check_ilp_multi(s, n(200)); }},
      {"viterbi", [&] { return evex::check_viterbi(s, n(500)); }},
      {"partition", [&] { return evex::check_partition(s, n(200)); }},
      {"crf-grad", [&] { return evex::check_crf_gradients(s, n(10)); }},
      {"blstm-grad", [&] { return evex::check_blstm_gradients(s, n(10)); }},
  };
  json reports = json::array();
  std::string failed;
  bool any = false;
  for (const auto& [name, fn] : all) {
    if (a.check != "all" && a.check != name) continue;
    any = true;
    const auto r = fn();
    reports.push_back(r.to_json());
    std::cout << (r.ok() ? "PASS " : "FAIL ") << name << ": " << r.cases << " cases, " << r.failures
              << " failures, max error " << r.max_error << '\n';
    if (!r.ok() && failed.empty()) failed = name + ": " + r.first_failure;
  }
  if (!any) throw evex::Error("bad_config", "unknown oracle check '" + a.check + "'");
  if (!a.out.empty()) {
    evex::write_json(a.out, with_header("oracle", run.seed, {{"checks", reports}}));
    run.outputs.push_back(a.out);
  }
  run.settings = {{"check", a.check}, {"cases", a.cases}};
  if (!failed.empty()) throw evex::Error("oracle_mismatch", failed);
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> data;
  std::string out;
};

void run_report(const ReportArgs& a, Run& run) {
  json rows = json::array();
  for (const auto& path : a.data) {
    const json h = first_header(path);
    const std::string strategy = h.is_object() ? h.value("strategy", "") : "";
    const auto s = evex::summarize_dataset(evex::read_dataset(path), strategy);
    json row = s.to_json();
    row["dataset"] = path;
    rows.push_back(row);
    std::cout << path << ": " << s.sentences << " sentences, " << s.types.size() << " types, positive fraction "
              << s.positive_fraction() << ", arguments per event " << s.args_per_event() << '\n';
  }
  evex::write_json(a.out, with_header("dataset_report", run.seed, {{"rows", rows}}));
  run.outputs.push_back(a.out);
}

// ---------------------------------------------------------------------------

void write_manifest(const Run& run, double seconds, const std::string& status) {
  std::string path = run.manifest;
  if (path.empty()) path = run.out.empty() ? "evex-" + run.command + ".manifest.json" : run.out + ".manifest.json";
  json m = {{"tool", "evex"},
            {"version", evex::kVersion},
            {"command", run.command},
            {"seed", run.seed},
            {"workers", run.workers},
            {"inputs", run.inputs},
            {"outputs", run.outputs},
            {"settings", run.settings},
            {"status", status},
            {"wall_time_s", seconds}};
  std::ofstream out(path);
  if (out) out << m.dump(2) << '\n';
}

void print_error(const std::string& kind, const std::string& msg) {
  std::cerr << "error: kind=" << kind << " msg=" << json(msg).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evex: event tables to training data, and a two-stage event extractor"};
  app.set_config("--config", "", "INI file; [section] names a subcommand, flags on the command line win");
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Run run;
  app.add_option("--workers", run.workers, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--manifest", run.manifest, "Manifest path (default <out>.manifest.json)");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Label a parsed corpus against event tables");
  g->add_option("--tables", gen.tables, "Event tables (JSON array)")->required()->check(CLI::ExistingFile);
  g->add_option("--corpus", gen.corpus, "Parsed sentences (JSONL)")->required()->check(CLI::ExistingFile);
  g->add_option("--aliases", gen.aliases, "surface<TAB>canonical lines")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Dataset output (JSONL)")->required();
  g->add_option("--stats", gen.stats, "Generation statistics (JSON)");
  g->add_option("--seed", run.seed, "Negative-sampling seed")->capture_default_str();
  g->add_option("--max-dist", gen.max_dist, "Largest dependency distance between key arguments")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  g->add_option("--strategy", gen.strategy, "Key-argument strategy")
      ->check(CLI::IsMember({"all", "imp", "imp_time"}))
      ->capture_default_str();
  g->add_flag("--no-distance-filter", gen.no_distance_filter, "Accept key arguments at any distance");
  g->add_option("--partial-ratio", gen.partial, "Partial-match negatives per positive")->capture_default_str();
  g->add_option("--violation-ratio", gen.violation, "Distance-violation negatives per positive")->capture_default_str();
  g->add_option("--trivial-ratio", gen.trivial, "Trivial negatives per positive")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train both stages on a generated dataset");
  t->add_option("--data", tr.data, "Dataset from `gen`")->required()->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Model output (JSON)")->required();
  t->add_option("--seed", run.seed, "Initialization and shuffling seed")->capture_default_str();
  t->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--patience", tr.patience, "Epochs without dev improvement before stopping")->capture_default_str();
  t->add_option("--batch-size", tr.batch)->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--learning-rate", tr.lr)->capture_default_str();
  t->add_option("--hidden1", tr.hidden1, "Stage-1 LSTM width per direction")->capture_default_str();
  t->add_option("--hidden2", tr.hidden2, "Stage-2 LSTM width per direction")->capture_default_str();
  t->add_option("--embed-dim", tr.embed_dim)->capture_default_str();
  t->add_option("--keyarg-dim", tr.keyarg_dim)->capture_default_str();
  t->add_option("--dropout", tr.dropout)->capture_default_str();
  t->add_option("--dev-fraction", tr.dev_fraction)->capture_default_str();
  t->add_option("--unk-replace", tr.unk, "Chance of feeding a training singleton as <unk>")->capture_default_str();
  t->add_option("--embeddings", tr.embeddings, "Pretrained word vectors (text format)")->check(CLI::ExistingFile);
  t->add_option("--report", tr.report, "Per-epoch losses (JSON)");
  t->add_flag("--no-stage2", tr.no_stage2, "Train the key-argument stage only");

  ExtractArgs ex;
  auto* e = app.add_subcommand("extract", "Extract events from a parsed corpus");
  e->alias("decode");
  e->add_option("--model", ex.model)->required()->check(CLI::ExistingFile);
  e->add_option("--corpus", ex.corpus)->required()->check(CLI::ExistingFile);
  e->add_option("--out", ex.out, "Extractions (JSONL)")->required();
  e->add_option("--mode", ex.mode, "Stage-1 decoder")
      ->check(CLI::IsMember({"viterbi", "ilp", "ilp_multi", "multi"}))
      ->capture_default_str();
  e->add_flag("--multi", ex.multi, "Same as --mode ilp_multi");
  e->add_option("--lambda-factor", ex.lambda_factor, "Multi-solution gap per token")->capture_default_str();
  e->add_option("--max-solutions", ex.max_solutions)->check(CLI::Range(1, 64))->capture_default_str();

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Score extractions against gold events");
  v->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  v->add_option("--gold", ev.gold, "Gold events or a generated dataset")->required()->check(CLI::ExistingFile);
  v->add_option("--out", ev.out, "Metrics (JSON)")->required();

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle", "Check the decoders and gradients against brute force");
  o->add_option("--check", orc.check)
      ->check(CLI::IsMember({"ilp", "ilp-multi", "viterbi", "partition", "crf-grad", "blstm-grad", "all"}))
      ->capture_default_str();
  o->add_option("--cases", orc.cases, "Override the number of cases (or seeds) per check");
  o->add_option("--seed", run.seed)->capture_default_str();
  o->add_option("--out", orc.out, "Report (JSON)");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Summarize generated datasets, one row each");
  r->add_option("--data", rp.data)->required()->check(CLI::ExistingFile);
  r->add_option("--out", rp.out, "Report (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& err) {
    print_error("usage", err.what());
    std::cerr << app.help();
    return 2;
  }

  const auto start = std::chrono::steady_clock::now();
  std::function<void()> action;
  if (g->parsed()) {
    run.command = "gen";
    run.out = gen.out;
    run.inputs = {{"tables", gen.tables}, {"corpus", gen.corpus}, {"aliases", gen.aliases}};
    action = [&] { run_gen(gen, run); };
  } else if (t->parsed()) {
    run.command = "train";
    run.out = tr.out;
    run.inputs = {{"data", tr.data}, {"embeddings", tr.embeddings}};
    action = [&] { run_train(tr, run); };
  } else if (e->parsed()) {
    run.command = "extract";
    run.out = ex.out;
    run.inputs = {{"model", ex.model}, {"corpus", ex.corpus}};
    action = [&] { run_extract(ex, run); };
  } else if (v->parsed()) {
    run.command = "eval";
    run.out = ev.out;
    run.inputs = {{"pred", ev.pred}, {"gold", ev.gold}};
    action = [&] { run_eval(ev, run); };
  } else if (o->parsed()) {
    run.command = "oracle";
    run.out = orc.out;
    action = [&] { run_oracle(orc, run); };
  } else {
    run.command = "report";
    run.out = rp.out;
    run.inputs = {{"data", rp.data}};
    action = [&] { run_report(rp, run); };
  }
  if (const CLI::Option* cfg = app.get_config_ptr(); cfg && cfg->count() > 0)
    run.inputs["config"] = cfg->as<std::string>();

  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  try {
    action();
  } catch (const evex::Error& err) {
    write_manifest(run, elapsed(), "error");
    print_error(err.kind(), err.what());
    return 1;
  } catch (const std::exception& err) {
    write_manifest(run, elapsed(), "error");
    print_error("internal", err.what());
    return 1;
  }
  write_manifest(run, elapsed(), "ok");
  return 0;
}
