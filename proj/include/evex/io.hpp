#pragma once
// Corpus, table, alias and JSONL readers/writers.

#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evex/core.hpp"

namespace evex {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

namespace io_detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", path + ":0: cannot open for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", path + ":0: cannot open for writing");
  return out;
}

}  // namespace io_detail

inline json sentence_to_json(const ParsedSentence& s) {
  json j;
  j["id"] = s.id;
  j["tokens"] = s.words();
  j["dep_head"] = s.dep_head;
  if (!s.dep_label.empty()) j["dep_label"] = s.dep_label;
  return j;
}

inline ParsedSentence sentence_from_json(const json& j) {
  std::vector<std::string> labels;
  if (j.contains("dep_label") && !j.at("dep_label").is_null()) labels = j.at("dep_label").get<std::vector<std::string>>();
  return ParsedSentence(j.at("id").get<std::string>(), j.at("tokens").get<std::vector<std::string>>(),
                        j.at("dep_head").get<std::vector<int>>(), std::move(labels));
}

inline json table_to_json(const EventTable& t) {
  json j;
  j["event_type"] = t.event_type;
  j["properties"] = t.properties;
  j["time_properties"] = t.time_properties;
  j["entries"] = json::array();
  for (const auto& e : t.entries) j["entries"].push_back({{"id", e.id}, {"values", e.values}});
  return j;
}

inline EventTable table_from_json(const json& j) {
  EventTable t;
  t.event_type = j.at("event_type").get<std::string>();
  t.properties = j.at("properties").get<std::vector<std::string>>();
  if (j.contains("time_properties")) t.time_properties = j.at("time_properties").get<std::vector<std::string>>();
  for (const auto& je : j.at("entries")) {
    TableEntry e;
    e.id = je.at("id").get<std::string>();
    for (const auto& [k, v] : je.at("values").items()) {
      if (v.is_null()) continue;
      if (v.is_string())
        e.values[k] = {v.get<std::string>()};
      else
        e.values[k] = v.get<std::vector<std::string>>();
    }
    t.entries.push_back(std::move(e));
  }
  validate_table(t);
  return t;
}

/// Calls `fn(line_number, record)` for each JSON object line. Blank lines and
/// artifact header lines are skipped.
inline void for_each_jsonl(const std::string& path, const std::function<void(int, const json&)>& fn) {
  auto in = io_detail::open_in(path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("parse", path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("header")) continue;
    try {
      fn(lineno, j);
    } catch (const json::exception& e) {
      throw Error("parse", path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline std::vector<ParsedSentence> read_corpus(const std::string& path) {
  std::vector<ParsedSentence> out;
  for_each_jsonl(path, [&](int, const json& j) {
    auto s = sentence_from_json(j);
    require_valid(s);
    out.push_back(std::move(s));
  });
  return out;
}

inline json read_json(const std::string& path) {
  auto in = io_detail::open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("parse", path + ":0: " + e.what());
  }
}

/// A table file holds either one table object or an array of them.
inline std::vector<EventTable> read_tables(const std::string& path) {
  json j = read_json(path);
  std::vector<EventTable> out;
  try {
    if (j.is_array())
      for (const auto& t : j) out.push_back(table_from_json(t));
    else
      out.push_back(table_from_json(j));
  } catch (const json::exception& e) {
    throw Error("parse", path + ":0: " + e.what());
  }
  return out;
}

/// Tab-separated `surface<TAB>canonical` lines.
inline std::map<std::string, std::string> read_aliases(const std::string& path) {
  auto in = io_detail::open_in(path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error("parse", path + ":" + std::to_string(lineno) + ": expected surface<TAB>canonical");
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

inline json artifact_header(const std::string& kind, std::uint64_t seed) {
  return {{"header", {{"tool", "evex"}, {"version", kVersion}, {"kind", kind}, {"seed", seed}}}};
}

inline void write_jsonl(const std::string& path, const json& header, const std::vector<json>& records) {
  auto out = io_detail::open_out(path);
  if (!header.is_null()) out << header.dump() << '\n';
  for (const auto& r : records) out << r.dump() << '\n';
}

inline void write_json(const std::string& path, const json& j) {
  auto out = io_detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> out;
  for_each_jsonl(path, [&](int, const json& j) { out.push_back(j); });
  return out;
}

}  // namespace evex
