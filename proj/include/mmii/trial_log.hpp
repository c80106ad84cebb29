#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mmii/mesh.hpp"
#include "mmii/osc.hpp"

namespace mmii::trial {

inline constexpr const char* kLogSchema = "mmii.trial.v1";

// JSON-lines. An optional first line is a header
//   {"schema":"mmii.trial.v1","type":"header","scene":...,"ground_truth":...,
//    "sample_rate":...,"block":...,"seed":...}
// and every other line is one timestamped protocol message
//   {"t":0.25,"block":94,"address":"/mmii/probe","tags":",ffff","args":[0,0,0.4,0.03]}
// "block" is optional (derived from t when absent). "tags" is optional: a
// registered address takes the schema's tags of matching arity, anything else
// infers them (integers i, other numbers f, strings s). Blobs are hex strings.
struct LogHeader {
  std::string scene;         // scene config path, relative to the log file
  std::string ground_truth;  // optional mesh path overriding the scene's ground truth
  double sample_rate = 0.0;
  std::uint32_t block = 0;
  std::uint64_t seed = 0;
};

struct LogEntry {
  double t = 0.0;                     // seconds of session audio time
  std::optional<std::uint64_t> block;
  osc::Message msg;
};

struct LogFile {
  std::optional<LogHeader> header;
  std::vector<LogEntry> entries;
};

std::string header_line(const LogHeader& h);
std::string entry_line(const LogEntry& e);

// Throws Errc::bad_format on malformed JSON, a wrong schema or timestamps
// that go backwards.
LogFile parse_log(std::istream& in);
LogFile read_log(const std::filesystem::path& path);

// Append-only writer, flushed after every line.
class LogWriter {
 public:
  LogWriter() = default;
  explicit LogWriter(const std::filesystem::path& path);
  bool is_open() const { return out_.is_open(); }
  const std::filesystem::path& path() const { return path_; }
  void write_header(const LogHeader& h);
  void append(const LogEntry& e);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct ProbeSample {
  double t = 0.0;
  geom::Vec3 position = geom::Vec3::Zero();
  double radius = 0.0;
};

struct MarkerSample {
  double t = 0.0;
  geom::Vec3 position = geom::Vec3::Zero();
};

// One localization attempt, bracketed by /mmii/trial and /mmii/trial_end.
struct Trial {
  std::string id;
  std::string condition;  // visual | audiovisual
  double start = 0.0;
  double end = 0.0;
  bool ended = false;     // false when the log stops before /mmii/trial_end
  std::vector<ProbeSample> probe;
  std::vector<MarkerSample> markers;  // after /mmii/unmark retractions

  double task_time() const { return end - start; }
  std::vector<geom::Vec3> marker_points() const;
};

// Messages outside any trial are ignored. An unterminated trial ends at the
// last timestamp in the log.
std::vector<Trial> extract_trials(const std::vector<LogEntry>& entries);

}  // namespace mmii::trial
