#include <cmath>
#include <random>

#include "doctest.h"
#include "mmii/error.hpp"
#include "mmii/interact.hpp"
#include "mmii/primitives.hpp"
#include "support/five_structures.hpp"
#include "support/geometry_oracle.hpp"

using namespace mmii;
using namespace mmii::interact;
using mmii::testing::brute_distance;
using mmii::testing::five_structures;
using mmii::testing::brute_inside;


TEST_CASE("gain law") {
  CHECK(proximity_gain(0.2, 0.5, false) == doctest::Approx(0.6));
  CHECK(proximity_gain(0.0, 0.5, false) == 1.0);
  CHECK(proximity_gain(0.5, 0.5, false) == 0.0);
  CHECK(proximity_gain(0.7, 0.5, false) == 0.0);
  CHECK(proximity_gain(0.3, 0.5, true) == 1.0);
  CHECK(proximity_gain(0.25, 0.5, false, 2.0) == doctest::Approx(0.25));
  double prev = 1.0;
  for (double d = 0.0; d < 0.6; d += 0.001) {
    const double g = proximity_gain(d, 0.5, false);
    CHECK(g <= prev);
    prev = g;
  }
}

TEST_CASE("update_probe examples") {
  ProximityIndex idx;
  idx.add("box", std::make_shared<const geom::TriMesh>(geom::make_box(Vec3::Zero(), Vec3::Ones())));
  auto ev = idx.update_probe({Vec3(1.2, 0.5, 0.5), 0.5});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].distance == doctest::Approx(0.2));
  CHECK(ev[0].gain == doctest::Approx(0.6));
  CHECK_FALSE(ev[0].inside);

  CHECK(idx.update_probe({Vec3(1.7, 0.5, 0.5), 0.5}).empty());

  ev = idx.update_probe({Vec3(0.5, 0.5, 0.5), 0.1});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].inside);
  CHECK(ev[0].gain == 1.0);

  // Endpoint: probe exactly R from the surface is outside the sphere.
  CHECK(idx.update_probe({Vec3(1.5, 0.5, 0.5), 0.5}).empty());
  ev = idx.update_probe({Vec3(1.0, 0.5, 0.5), 0.5});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].gain == 1.0);
  CHECK(ev[0].distance == 0.0);
}

TEST_CASE("event set equals the brute-force filter on five structures") {
  const auto idx = five_structures();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.07, 0.07);
  std::uniform_real_distribution<double> r(0.002, 0.04);
  int nonempty = 0, multi = 0, inside = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const Probe p{Vec3(u(rng), u(rng), u(rng)), r(rng)};
    const auto events = idx.update_probe(p);
    std::vector<std::size_t> expected;
    for (std::size_t s = 0; s < idx.size(); ++s) {
      const auto& m = idx.query(s).mesh();
      const bool in = brute_inside(m, p.position);
      if (brute_distance(m, p.position) < p.radius || in) expected.push_back(s);
    }
    std::vector<std::size_t> got;
    for (const auto& e : events) {
      got.push_back(e.structure);
      CHECK(e.distance == doctest::Approx(brute_distance(idx.query(e.structure).mesh(), p.position)).epsilon(1e-12));
      if (e.inside) ++inside;
    }
    CHECK(got == expected);
    nonempty += !events.empty();
    multi += events.size() > 1;
  }
  CHECK(nonempty > 300);
  CHECK(multi > 20);
  CHECK(inside > 10);
}

TEST_CASE("gains are invariant under uniform rescaling") {
  const auto idx = five_structures();
  ProximityIndex big;
  for (std::size_t s = 0; s < idx.size(); ++s) {
    geom::TriMesh m = idx.query(s).mesh();
    geom::scale_in_place(m, 7.5);
    big.add(idx.id(s), std::make_shared<const geom::TriMesh>(std::move(m)));
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.06, 0.06);
  for (int trial = 0; trial < 500; ++trial) {
    const Probe p{Vec3(u(rng), u(rng), u(rng)), 0.03};
    const auto a = idx.update_probe(p);
    const auto b = big.update_probe({p.position * 7.5, p.radius * 7.5});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].gain == doctest::Approx(b[i].gain).epsilon(1e-9));
  }
}

TEST_CASE("click picks the nearest structure and vertex") {
  const auto idx = five_structures();
  const Probe p{Vec3(0.0, 0.0, 0.0125), 0.03};
  const auto c = idx.click(p);
  REQUIRE(c.has_value());
  CHECK(c->event.structure_id == "tumor");
  CHECK(c->event.kind == synth::EventKind::impulse);
  const auto& m = idx.query(c->structure).mesh();
  double best = 1e9;
  for (const auto& v : m.vertices) best = std::min(best, (v - p.position).norm());
  CHECK((m.vertices[c->event.vertex] - p.position).norm() == best);

  CHECK_FALSE(idx.click({Vec3(0.5, 0.5, 0.5), 0.03}).has_value());
}

TEST_CASE("visual state relaxation") {
  VisualState v(2, 150.0);
  v.pulse(1);
  CHECK(v.scale(1) == 1.1);
  CHECK(v.albedo(1) == 1.0);
  v.step(0.0);
  CHECK(v.scale(1) == 1.1);
  v.step(150.0);
  CHECK(v.scale(1) == doctest::Approx(1.0 + 0.1 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(v.scale(1) == doctest::Approx(1.0368).epsilon(1e-4));
  CHECK(v.scale(0) == 1.0);
  CHECK(v.albedo(0) == 0.0);

  VisualState a(1), b(1);
  a.pulse(0);
  b.pulse(0);
  a.step(37.0);
  b.step(18.5);
  b.step(18.5);
  CHECK(std::abs(a.scale(0) - b.scale(0)) <= 1e-12);
  CHECK(std::abs(a.albedo(0) - b.albedo(0)) <= 1e-12);
  a.step(1e6);
  CHECK(a.scale(0) == doctest::Approx(1.0));
  CHECK(a.albedo(0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(a.step(-1.0), Error);
}
