#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "mmii/error.hpp"
#include "mmii/trial_log.hpp"

namespace mmii::trial {
namespace {

using nlohmann::json;

std::string hex(const osc::Blob& b) {
  static const char* d = "0123456789abcdef";
  std::string s;
  for (auto x : b) {
    s += d[x >> 4];
    s += d[x & 15];
  }
  return s;
}

osc::Blob unhex(const std::string& s) {
  if (s.size() % 2) throw Error(Errc::bad_format, "odd-length hex blob");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(Errc::bad_format, "bad hex digit in blob");
  };
  osc::Blob b(s.size() / 2);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>(nib(s[2 * i]) * 16 + nib(s[2 * i + 1]));
  return b;
}

osc::Arg arg_from(const json& v, char tag) {
  switch (tag) {
    case 'i':
      if (!v.is_number_integer()) break;
      return static_cast<std::int32_t>(v.get<std::int64_t>());
    case 'f':
      if (!v.is_number()) break;
      return static_cast<float>(v.get<double>());
    case 's':
      if (!v.is_string()) break;
      return v.get<std::string>();
    case 'b':
      if (!v.is_string()) break;
      return unhex(v.get<std::string>());
    default:
      throw Error(Errc::unknown_type_tag, std::string("unknown tag '") + tag + "' in log");
  }
  throw Error(Errc::bad_format, std::string("log argument does not match tag '") + tag + "'");
}

}  // namespace

std::string header_line(const LogHeader& h) {
  json j = {{"schema", kLogSchema}, {"type", "header"}, {"scene", h.scene},
            {"sample_rate", h.sample_rate}, {"block", h.block}, {"seed", h.seed}};
  if (!h.ground_truth.empty()) j["ground_truth"] = h.ground_truth;
  return j.dump();
}

std::string entry_line(const LogEntry& e) {
  json args = json::array();
  for (const auto& a : e.msg.args) {
    if (const auto* i = std::get_if<std::int32_t>(&a)) {
      args.push_back(*i);
    } else if (const auto* f = std::get_if<float>(&a)) {
      // float -> double is exact and the JSON writer round-trips doubles.
      args.push_back(static_cast<double>(*f));
    } else if (const auto* s = std::get_if<std::string>(&a)) {
      args.push_back(*s);
    } else if (const auto* b = std::get_if<osc::Blob>(&a)) {
      args.push_back(hex(*b));
    }
  }
  json j = {{"t", e.t}};
  if (e.block) j["block"] = *e.block;
  j["address"] = e.msg.address;
  j["tags"] = e.msg.type_tags();
  j["args"] = std::move(args);
  return j.dump();
}

LogFile parse_log(std::istream& in) {
  LogFile f;
  std::string line;
  std::size_t lineno = 0;
  double last_t = -INFINITY;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "log line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::bad_format, where + ": " + e.what());
    }
    if (!j.is_object()) throw Error(Errc::bad_format, where + ": not an object");
    try {
      if (j.value("type", "") == "header") {
        if (j.value("schema", "") != kLogSchema) throw Error(Errc::bad_format, where + ": unsupported schema");
        if (f.header || !f.entries.empty()) throw Error(Errc::bad_format, where + ": header must come first");
        LogHeader h;
        h.scene = j.value("scene", "");
        h.ground_truth = j.value("ground_truth", "");
        h.sample_rate = j.value("sample_rate", 0.0);
        h.block = j.value("block", 0u);
        h.seed = j.value("seed", std::uint64_t{0});
        f.header = h;
        continue;
      }
      LogEntry e;
      e.t = j.at("t").get<double>();
      if (!std::isfinite(e.t) || e.t < last_t) throw Error(Errc::bad_format, where + ": timestamps must be monotone");
      last_t = e.t;
      if (j.contains("block")) e.block = j.at("block").get<std::uint64_t>();
      e.msg.address = j.at("address").get<std::string>();
      const json& args = j.contains("args") ? j.at("args") : json::array();
      if (!args.is_array()) throw Error(Errc::bad_format, where + ": args must be an array");
      std::string tags;
      if (j.contains("tags")) {
        tags = j.at("tags").get<std::string>();
        if (tags.empty() || tags[0] != ',' || tags.size() != args.size() + 1) {
          throw Error(Errc::bad_format, where + ": tags do not match args");
        }
      } else if (const auto* schema = osc::find_schema(e.msg.address)) {
        // Untyped script line: take the registry's tags of matching arity.
        std::string_view alts = schema->tags;
        while (tags.empty()) {
          const auto bar = alts.find('|');
          const auto alt = alts.substr(0, bar);
          if (alt.size() == args.size() + 1) tags = alt;
          if (bar == std::string_view::npos) break;
          alts.remove_prefix(bar + 1);
        }
        if (tags.empty()) throw Error(Errc::schema_mismatch, where + ": wrong argument count for " + e.msg.address);
      } else {
        tags = ",";
        for (const auto& v : args) tags += v.is_number_integer() ? 'i' : v.is_number() ? 'f' : 's';
      }
      for (std::size_t i = 0; i < args.size(); ++i) e.msg.args.push_back(arg_from(args[i], tags[i + 1]));
      f.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(Errc::bad_format, where + ": " + ex.what());
    }
  }
  return f;
}

LogFile read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open " + path.string());
  try {
    return parse_log(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

LogWriter::LogWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::app) {
  if (!out_) throw Error(Errc::io_error, "cannot open log " + path.string());
}

void LogWriter::write_header(const LogHeader& h) {
  out_ << header_line(h) << '\n';
  out_.flush();
}

void LogWriter::append(const LogEntry& e) {
  out_ << entry_line(e) << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::io_error, "log write failed: " + path_.string());
}

void LogWriter::close() {
  if (out_.is_open()) out_.close();
}

std::vector<geom::Vec3> Trial::marker_points() const {
  std::vector<geom::Vec3> p;
  p.reserve(markers.size());
  for (const auto& m : markers) p.push_back(m.position);
  return p;
}

std::vector<Trial> extract_trials(const std::vector<LogEntry>& entries) {
  std::vector<Trial> out;
  std::optional<Trial> cur;
  auto f = [](const osc::Message& m, std::size_t i) { return static_cast<double>(std::get<float>(m.args[i])); };
  auto finish = [&](double t, bool ended) {
    cur->end = t;
    cur->ended = ended;
    out.push_back(std::move(*cur));
    cur.reset();
  };
  for (const auto& e : entries) {
    const auto& m = e.msg;
    const auto tags = m.type_tags();
    if (m.address == osc::addr::trial && tags == ",ss") {
      if (cur) finish(e.t, false);
      cur = Trial{};
      cur->id = std::get<std::string>(m.args[0]);
      cur->condition = std::get<std::string>(m.args[1]);
      cur->start = e.t;
    } else if (!cur) {
      continue;
    } else if (m.address == osc::addr::trial_end) {
      finish(e.t, true);
    } else if (m.address == osc::addr::probe && tags == ",ffff") {
      cur->probe.push_back({e.t, geom::Vec3(f(m, 0), f(m, 1), f(m, 2)), f(m, 3)});
    } else if (m.address == osc::addr::marker && tags == ",fff") {
      cur->markers.push_back({e.t, geom::Vec3(f(m, 0), f(m, 1), f(m, 2))});
    } else if (m.address == osc::addr::unmark && !cur->markers.empty()) {
      cur->markers.pop_back();
    }
  }
  if (cur) finish(entries.empty() ? cur->start : entries.back().t, false);
  return out;
}

}  // namespace mmii::trial
