#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mmii/convex_hull.hpp"
#include "mmii/error.hpp"
#include "mmii/eval.hpp"
#include "mmii/scene.hpp"
#include "mmii/voxel.hpp"

namespace mmii::eval {

geom::TriMesh markers_to_volume(std::span<const geom::Vec3> markers) {
  return geom::convex_hull(markers, "marked");
}

double default_cell_size(const geom::TriMesh& gt) {
  const auto b = geom::bounds(gt);
  return (b.max - b.min).maxCoeff() / 128.0;
}

DiceResult dice_score(const geom::TriMesh& mt, const geom::TriMesh& gt, double cell_size) {
  if (!(cell_size > 0.0)) throw Error(Errc::invalid_argument, "cell size must be positive");
  if (!geom::is_watertight(mt) || !geom::is_watertight(gt)) throw Error(Errc::open_mesh, "Dice needs closed meshes");
  auto box = geom::bounds(mt);
  const auto g = geom::bounds(gt);
  box.min = box.min.cwiseMin(g.min);
  box.max = box.max.cwiseMax(g.max);
  const auto spec = geom::grid_covering(box, cell_size);
  const auto a = geom::voxelize(mt, spec);
  const auto b = geom::voxelize(gt, spec);
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < spec.cell_count(); ++i) {
    na += a.occupancy[i];
    nb += b.occupancy[i];
    both += a.occupancy[i] && b.occupancy[i];
  }
  if (na == 0 || nb == 0) throw Error(Errc::degenerate, "empty voxel occupancy; cell size too coarse");
  DiceResult r;
  r.dice = 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
  r.marked_volume = a.occupied_volume();
  r.gt_volume = b.occupied_volume();
  r.cell_size = cell_size;
  return r;
}

DiceResult score_markers(std::span<const geom::Vec3> markers, const geom::TriMesh& gt, double cell_size) {
  if (!(cell_size > 0.0)) cell_size = default_cell_size(gt);
  geom::TriMesh mt;
  try {
    mt = markers_to_volume(markers);
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate) throw;
    DiceResult r;
    r.degenerate = true;
    r.cell_size = cell_size;
    return r;
  }
  try {
    return dice_score(mt, gt, cell_size);
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate) throw;
    // Hull thinner than one cell: no marked volume at this resolution.
    DiceResult r;
    r.degenerate = true;
    r.cell_size = cell_size;
    return r;
  }
}

Stat mean_sd(std::span<const double> v) {
  Stat s;
  s.n = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

namespace {

// Linear-interpolated quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

Summary aggregate_trials(std::vector<TrialScore>& trials, const OutlierOptions& opts) {
  auto group = [&](const std::string& cond) {
    std::vector<TrialScore*> g;
    for (auto& t : trials) {
      if (t.condition == cond) g.push_back(&t);
    }
    return g;
  };
  for (const char* cond : {"visual", "audiovisual"}) {
    auto g = group(cond);
    if (opts.dice_3sd && g.size() > 1) {
      std::vector<double> v;
      for (auto* t : g) v.push_back(t->dice.dice);
      const Stat s = mean_sd(v);
      for (auto* t : g) t->dice_outlier = std::abs(t->dice.dice - s.mean) > 3.0 * s.sd;
    }
    if (opts.time_iqr && g.size() > 1) {
      std::vector<double> v;
      for (auto* t : g) v.push_back(t->task_time);
      std::sort(v.begin(), v.end());
      const double q1 = quantile(v, 0.25), q3 = quantile(v, 0.75), iqr = q3 - q1;
      for (auto* t : g) t->time_outlier = t->task_time < q1 - 1.5 * iqr || t->task_time > q3 + 1.5 * iqr;
    }
  }
  auto stat = [&](const std::string& cond, bool dice) {
    std::vector<double> v;
    for (const auto& t : trials) {
      if (t.condition != cond) continue;
      if (dice && !t.dice_outlier) v.push_back(t.dice.dice);
      if (!dice && !t.time_outlier) v.push_back(t.task_time);
    }
    if (v.empty()) throw Error(Errc::empty_group, "no " + cond + " trials to aggregate");
    return mean_sd(v);
  };
  Summary s;
  s.visual_dice = stat("visual", true);
  s.audiovisual_dice = stat("audiovisual", true);
  s.visual_time = stat("visual", false);
  s.audiovisual_time = stat("audiovisual", false);
  return s;
}

std::string summary_csv(const Summary& s) {
  std::string out = "schema,metric,visual_mean,visual_sd,audiovisual_mean,audiovisual_sd\n";
  auto row = [&](const char* metric, const Stat& v, const Stat& av) {
    out += std::string(kSummarySchema) + "," + metric + "," + fmt(v.mean) + "," + fmt(v.sd) + "," + fmt(av.mean) +
           "," + fmt(av.sd) + "\n";
  };
  row("dice", s.visual_dice, s.audiovisual_dice);
  row("task_time_s", s.visual_time, s.audiovisual_time);
  return out;
}

Summary parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "schema,metric,visual_mean,visual_sd,audiovisual_mean,audiovisual_sd") {
    throw Error(Errc::bad_format, "summary CSV header");
  }
  Summary s;
  bool dice = false, time = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (cells.size() != 6 || cells[0] != kSummarySchema) throw Error(Errc::bad_format, "summary CSV row: " + line);
    double v[4];
    for (int i = 0; i < 4; ++i) {
      char* end = nullptr;
      v[i] = std::strtod(cells[2 + i].c_str(), &end);
      if (end == cells[2 + i].c_str() || *end) throw Error(Errc::bad_format, "summary CSV number: " + cells[2 + i]);
    }
    Stat a{v[0], v[1], 0}, b{v[2], v[3], 0};
    if (cells[1] == "dice") {
      s.visual_dice = a, s.audiovisual_dice = b, dice = true;
    } else if (cells[1] == "task_time_s") {
      s.visual_time = a, s.audiovisual_time = b, time = true;
    } else {
      throw Error(Errc::bad_format, "unknown metric " + cells[1]);
    }
  }
  if (!dice || !time) throw Error(Errc::bad_format, "summary CSV missing a metric row");
  return s;
}

void write_summary_csv(const Summary& s, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::io_error, "cannot write " + path.string());
  f << summary_csv(s);
}

std::string trials_json(const std::vector<TrialScore>& trials) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trials) {
    arr.push_back({{"trial", t.trial_id},
                   {"condition", t.condition},
                   {"source", t.source},
                   {"dice", t.dice.dice},
                   {"marked_volume_m3", t.dice.marked_volume},
                   {"gt_volume_m3", t.dice.gt_volume},
                   {"cell_size_m", t.dice.cell_size},
                   {"degenerate", t.dice.degenerate},
                   {"markers", t.markers},
                   {"task_time_s", t.task_time},
                   {"ended", t.ended},
                   {"dice_outlier", t.dice_outlier},
                   {"time_outlier", t.time_outlier}});
  }
  return nlohmann::json{{"schema", kTrialSchema}, {"trials", arr}}.dump(2);
}

std::vector<TrialScore> score_log(const std::filesystem::path& log_path, double cell_size) {
  const auto log = trial::read_log(log_path);
  if (!log.header) throw Error(Errc::config_error, log_path.string() + ": log has no header naming the ground truth");
  const auto dir = log_path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : dir / q;
  };
  geom::TriMesh gt;
  if (!log.header->ground_truth.empty()) {
    gt = geom::load_mesh(resolve(log.header->ground_truth), "ground_truth").mesh;
  } else if (!log.header->scene.empty()) {
    const auto cfg = scene::load_config(resolve(log.header->scene));
    gt = scene::ground_truth_mesh(cfg);
  } else {
    throw Error(Errc::config_error, log_path.string() + ": header has neither ground_truth nor scene");
  }
  std::vector<TrialScore> out;
  for (const auto& t : trial::extract_trials(log.entries)) {
    TrialScore s;
    s.trial_id = t.id;
    s.condition = t.condition;
    s.source = log_path.string();
    const auto pts = t.marker_points();
    s.dice = score_markers(pts, gt, cell_size);
    s.markers = pts.size();
    s.task_time = t.task_time();
    s.ended = t.ended;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mmii::eval
