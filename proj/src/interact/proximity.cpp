#include <algorithm>
#include <cmath>
#include <limits>

#include "mmii/error.hpp"
#include "mmii/interact.hpp"

namespace mmii::interact {

double proximity_gain(double distance, double radius, bool inside, double exponent) {
  if (inside) return 1.0;
  const double g = std::clamp(1.0 - distance / radius, 0.0, 1.0);
  return exponent == 1.0 ? g : std::pow(g, exponent);
}

void ProximityIndex::add(std::string id, std::shared_ptr<const geom::TriMesh> mesh) {
  for (const auto& e : entries_) {
    if (e.id == id) throw Error(Errc::invalid_argument, "duplicate structure id '" + id + "'");
  }
  entries_.push_back({std::move(id), std::make_shared<const geom::SurfaceQuery>(std::move(mesh))});
}

std::vector<ProximityEvent> ProximityIndex::update_probe(const Probe& probe,
                                                         double exponent) const {
  if (!(probe.radius > 0.0)) throw Error(Errc::invalid_argument, "probe radius must be positive");
  std::vector<ProximityEvent> events;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const geom::SurfaceHit hit = entries_[i].query->closest_point(probe.position);
    if (hit.distance >= probe.radius && !hit.inside) continue;
    events.push_back({entries_[i].id, i, hit.distance, hit.inside,
                      proximity_gain(hit.distance, probe.radius, hit.inside, exponent)});
  }
  return events;
}

std::optional<ClickResult> ProximityIndex::click(const Probe& probe, double force) const {
  if (!(probe.radius > 0.0)) throw Error(Errc::invalid_argument, "probe radius must be positive");
  std::optional<ClickResult> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const geom::SurfaceHit hit = entries_[i].query->closest_point(probe.position);
    const double d = hit.inside ? 0.0 : hit.distance;
    if (d >= probe.radius || d >= best_d) continue;
    best_d = d;
    ClickResult r;
    r.structure = i;
    r.event.structure_id = entries_[i].id;
    r.event.vertex = entries_[i].query->nearest_vertex(probe.position);
    r.event.kind = synth::EventKind::impulse;
    r.event.force = force;
    best = r;
  }
  return best;
}

VisualState::VisualState(std::size_t structures, double tau_ms)
    : scale_(structures, 1.0), albedo_(structures, 0.0), tau_ms_(tau_ms) {
  if (!(tau_ms > 0.0)) throw Error(Errc::invalid_argument, "visual time constant must be positive");
}

void VisualState::pulse(std::size_t i) {
  scale_.at(i) = kClickScale;
  albedo_.at(i) = 1.0;
}

void VisualState::step(double dt_ms) {
  if (!(dt_ms >= 0.0)) throw Error(Errc::invalid_argument, "dt must be non-negative");
  const double k = std::exp(-dt_ms / tau_ms_);
  for (auto& s : scale_) s = 1.0 + (s - 1.0) * k;
  for (auto& a : albedo_) a *= k;
}

}  // namespace mmii::interact
