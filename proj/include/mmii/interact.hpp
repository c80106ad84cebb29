#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmii/surface_query.hpp"
#include "mmii/synth.hpp"

namespace mmii::interact {

using geom::Vec3;

inline constexpr double kDefaultRadius = 0.030;  // m, head-scale scenes

struct Probe {
  Vec3 position = Vec3::Zero();
  double radius = kDefaultRadius;  // sound-sphere radius R
};

struct ProximityEvent {
  std::string structure_id;
  std::size_t structure = 0;  // index in the scene
  double distance = 0.0;      // to the nearest surface point, m
  bool inside = false;
  double gain = 0.0;
};

// (1 - d/R)^exponent clamped to [0, 1]; 1 when inside.
double proximity_gain(double distance, double radius, bool inside, double exponent = 1.0);

struct ClickResult {
  std::size_t structure = 0;
  synth::ExcitationEvent event;  // impulse at the structure's nearest vertex
};

// Spatial index over every structure of a scene. Immutable once built.
class ProximityIndex {
 public:
  void add(std::string id, std::shared_ptr<const geom::TriMesh> mesh);

  std::size_t size() const { return entries_.size(); }
  const std::string& id(std::size_t i) const { return entries_[i].id; }
  const geom::SurfaceQuery& query(std::size_t i) const { return *entries_[i].query; }

  // One event per structure within R (or containing the probe), in scene order.
  std::vector<ProximityEvent> update_probe(const Probe& probe, double exponent = 1.0) const;

  // Nearest structure within R gets an impulse at its nearest vertex; empty
  // when nothing is in range. Containment counts as distance 0.
  std::optional<ClickResult> click(const Probe& probe, double force = 1.0) const;

 private:
  struct Entry {
    std::string id;
    std::shared_ptr<const geom::SurfaceQuery> query;
  };
  std::vector<Entry> entries_;
};

inline constexpr double kClickScale = 1.1;
inline constexpr double kDefaultTauMs = 150.0;

// Per-structure click feedback: size multiplier and albedo blend, both
// relaxing exponentially to rest (1, 0).
class VisualState {
 public:
  explicit VisualState(std::size_t structures = 0, double tau_ms = kDefaultTauMs);

  std::size_t size() const { return scale_.size(); }
  double tau_ms() const { return tau_ms_; }
  double scale(std::size_t i) const { return scale_[i]; }
  double albedo(std::size_t i) const { return albedo_[i]; }

  void pulse(std::size_t i);
  void step(double dt_ms);

 private:
  std::vector<double> scale_;
  std::vector<double> albedo_;
  double tau_ms_;
};

}  // namespace mmii::interact
