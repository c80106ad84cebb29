#pragma once

#include <algorithm>
#include <numbers>
#include <string>
#include <vector>

#include "mmii/analysis.hpp"
#include "mmii/modal.hpp"
#include "mmii/engine.hpp"
#include "mmii/primitives.hpp"
#include "mmii/tissue.hpp"

namespace mmii::testing {

struct TissueCentroid {
  std::string tissue;
  double centroid_hz = 0.0;
  double top_mode_hz = 0.0;
  std::size_t dropped = 0;  // modes the bank left out above 0.45 fs
};

struct CentroidSetup {
  double radius = 0.0;  // shell radius actually used, m
  std::vector<TissueCentroid> tissues;
};

// Same icosphere shell, raw (unmapped) modes per tissue, identical impulse at
// vertex 0. Radius and thickness are scaled together so the stiffest tissue's
// top retained mode lands at 0.4 fs; every frequency scales as 1 / size.
inline CentroidSetup tissue_centroids(const std::vector<std::string>& names, double sample_rate = 48000.0,
                                      double seconds = 2.0) {
  const auto reg = tissue::TissueRegistry::builtin();
  const double r0 = 0.05, t0 = 0.002;
  auto raw = [&](const tissue::ModelParams& p, double s) {
    const auto mesh = geom::make_icosphere(r0 * s, 2);
    return std::pair(mesh, modal::compute_modes(modal::assemble_shell(mesh, p, t0 * s), 64, p.loss_factor));
  };
  double top = 0.0;
  for (const auto& n : names) {
    const auto m = raw(tissue::to_model_params(reg.get(n)), 1.0).second;
    top = std::max(top, m.frequencies.maxCoeff() / (2 * std::numbers::pi));
  }
  const double s = top / (0.4 * sample_rate);

  CentroidSetup out;
  out.radius = r0 * s;
  for (const auto& n : names) {
    const auto p = tissue::to_model_params(reg.get(n));
    const auto [mesh, model] = raw(p, s);
    synth::BankOptions opts;
    opts.sample_rate = sample_rate;
    const synth::ResonatorBank bank(model, synth::vertex_gains(model, geom::vertex_normals(mesh)), opts);
    const auto h = synth::impulse_response(bank, 0, 1.0, static_cast<std::size_t>(seconds * sample_rate));
    out.tissues.push_back({n, analysis::spectral_centroid(h, sample_rate),
                           model.frequencies.maxCoeff() / (2 * std::numbers::pi), bank.dropped_modes()});
  }
  return out;
}

}  // namespace mmii::testing
