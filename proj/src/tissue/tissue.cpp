#include "mmii/tissue.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "builtin_tissues.hpp"
#include "mmii/error.hpp"

namespace mmii::tissue {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& s, const std::string& field, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::bad_format, "tissue table line " + std::to_string(line_no) +
                                      ": bad " + field + " '" + s + "'");
  }
}

}  // namespace

Rigidity parse_rigidity(const std::string& s) {
  const std::string n = normalize_name(s);
  if (n == "rigid") return Rigidity::rigid;
  if (n == "semi_rigid") return Rigidity::semi_rigid;
  if (n == "soft") return Rigidity::soft;
  throw Error(Errc::bad_format, "unknown rigidity class '" + s + "'");
}

const char* to_string(Rigidity r) {
  switch (r) {
    case Rigidity::rigid: return "rigid";
    case Rigidity::semi_rigid: return "semi-rigid";
    case Rigidity::soft: return "soft";
  }
  return "soft";
}

std::string normalize_name(const std::string& name) {
  std::string out;
  out.reserve(name.size());
  for (unsigned char c : name) {
    if (c == ' ' || c == '-') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  return out;
}

void validate(const TissueProperties& t) {
  auto fail = [&](const std::string& why) {
    throw Error(Errc::invalid_argument, "tissue '" + t.name + "': " + why);
  };
  if (t.name.empty()) fail("empty name");
  if (!(t.young_modulus_kpa.min > 0.0) || !(t.young_modulus_kpa.min <= t.young_modulus_kpa.max)) {
    fail("Young's modulus range must satisfy 0 < min <= max");
  }
  if (t.density_mean && !(*t.density_mean > 0.0)) fail("density must be positive");
  if (t.density_sd && !(*t.density_sd >= 0.0)) fail("density sd must be non-negative");
  // The published ranges reach 0.5 for brain tissue; the cap is applied when
  // mapping to model parameters.
  if (!(t.poisson.min >= 0.0) || !(t.poisson.min <= t.poisson.max) || !(t.poisson.max <= 0.5)) {
    fail("Poisson range must satisfy 0 <= min <= max <= 0.5");
  }
}

ModelParams to_model_params(const TissueProperties& t, const MappingOptions& opts) {
  ModelParams p;
  p.young_modulus = std::sqrt(t.young_modulus_kpa.min * t.young_modulus_kpa.max) * 1e3;
  p.density = t.density_mean.value_or(opts.fallback_density);
  p.poisson = std::min(0.5 * (t.poisson.min + t.poisson.max), opts.poisson_cap);
  switch (t.rigidity) {
    case Rigidity::rigid: p.loss_factor = opts.loss_rigid; break;
    case Rigidity::semi_rigid: p.loss_factor = opts.loss_semi_rigid; break;
    case Rigidity::soft: p.loss_factor = opts.loss_soft; break;
  }
  return p;
}

TissueRegistry TissueRegistry::builtin() {
  std::istringstream in(detail::kBuiltinTissueCsv);
  return from_csv(in);
}

TissueRegistry TissueRegistry::from_csv(std::istream& in) {
  TissueRegistry reg;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("name,", 0) == 0) continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 9) {
      throw Error(Errc::bad_format, "tissue table line " + std::to_string(line_no) +
                                        ": expected 9 fields, got " +
                                        std::to_string(cells.size()));
    }
    TissueProperties t;
    t.name = normalize_name(cells[0]);
    t.young_modulus_kpa = {parse_number(cells[1], "young_min_kpa", line_no),
                           parse_number(cells[2], "young_max_kpa", line_no)};
    if (!cells[3].empty()) t.density_mean = parse_number(cells[3], "density_mean", line_no);
    if (!cells[4].empty()) t.density_sd = parse_number(cells[4], "density_sd", line_no);
    t.poisson = {parse_number(cells[5], "poisson_min", line_no),
                 parse_number(cells[6], "poisson_max", line_no)};
    t.rigidity = parse_rigidity(cells[7]);
    t.dynamic = cells[8] == "1" || normalize_name(cells[8]) == "true";
    reg.add(std::move(t));
  }
  return reg;
}

TissueRegistry TissueRegistry::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "tissue table not found: " + path.string());
  return from_csv(in);
}

const TissueProperties& TissueRegistry::get(const std::string& name) const {
  const auto it = records_.find(normalize_name(name));
  if (it == records_.end()) throw Error(Errc::unknown_tissue, "unknown tissue '" + name + "'");
  return it->second;
}

bool TissueRegistry::contains(const std::string& name) const {
  return records_.count(normalize_name(name)) > 0;
}

void TissueRegistry::add(TissueProperties t) {
  t.name = normalize_name(t.name);
  validate(t);
  records_[t.name] = std::move(t);
}

std::vector<std::string> TissueRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, rec] : records_) out.push_back(name);
  return out;
}

}  // namespace mmii::tissue
