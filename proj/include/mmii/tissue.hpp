#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmii::tissue {

enum class Rigidity { rigid, semi_rigid, soft };

Rigidity parse_rigidity(const std::string& s);
const char* to_string(Rigidity r);

struct Range {
  double min = 0.0;
  double max = 0.0;
};

// One tissue record as published: ranges in the units of the source table.
struct TissueProperties {
  std::string name;
  Range young_modulus_kpa;
  std::optional<double> density_mean;  // kg/m^3; absent when unspecified
  std::optional<double> density_sd;
  Range poisson;
  Rigidity rigidity = Rigidity::soft;
  bool dynamic = false;
};

// Throws Errc::invalid_argument describing the first violated invariant.
void validate(const TissueProperties& t);

// Concrete model parameters in SI units.
struct ModelParams {
  double young_modulus = 0.0;  // Pa
  double density = 0.0;        // kg/m^3
  double poisson = 0.0;
  double loss_factor = 0.0;
};

struct MappingOptions {
  double fallback_density = 1050.0;  // used when a record has no density
  double poisson_cap = 0.49;
  double loss_rigid = 0.002;
  double loss_semi_rigid = 0.01;
  double loss_soft = 0.05;
};

// E: geometric mean of the range (kPa -> Pa); nu: midpoint capped below the
// incompressible limit; rho: mean or fallback; loss factor by rigidity class.
ModelParams to_model_params(const TissueProperties& t, const MappingOptions& opts = {});

// Lowercase, spaces and hyphens folded to underscores.
std::string normalize_name(const std::string& name);

class TissueRegistry {
 public:
  // The seven built-in tissue records.
  static TissueRegistry builtin();
  static TissueRegistry from_csv(std::istream& in);
  static TissueRegistry from_file(const std::filesystem::path& path);

  const TissueProperties& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  void add(TissueProperties t);  // replaces any record with the same name
  std::vector<std::string> names() const;

 private:
  std::map<std::string, TissueProperties> records_;
};

}  // namespace mmii::tissue
