#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmii/mesh.hpp"
#include "mmii/trial_log.hpp"

namespace mmii::eval {

inline constexpr const char* kSummarySchema = "mmii.eval.v1";
inline constexpr const char* kTrialSchema = "mmii.eval.trial.v1";

struct DiceResult {
  double dice = 0.0;
  double marked_volume = 0.0;  // voxel volume, m^3
  double gt_volume = 0.0;
  double cell_size = 0.0;
  bool degenerate = false;     // marker set had no volume; dice forced to 0
};

// Convex hull of the markers. Throws Errc::degenerate for fewer than 4 or
// coplanar markers.
geom::TriMesh markers_to_volume(std::span<const geom::Vec3> markers);

// Default cell: max extent of the ground-truth bounding box / 128.
double default_cell_size(const geom::TriMesh& gt);

// Both meshes voxelized on one grid covering the union of their bounds.
// Throws Errc::open_mesh, Errc::degenerate (empty occupancy).
DiceResult dice_score(const geom::TriMesh& mt, const geom::TriMesh& gt, double cell_size);

// markers_to_volume + dice_score; a degenerate marker set scores 0 with the
// flag set instead of throwing. cell_size <= 0 selects the default.
DiceResult score_markers(std::span<const geom::Vec3> markers, const geom::TriMesh& gt, double cell_size = 0.0);

struct TrialScore {
  std::string trial_id;
  std::string condition;
  std::string source;  // log file
  DiceResult dice;
  double task_time = 0.0;
  std::size_t markers = 0;
  bool ended = true;
  bool dice_outlier = false;
  bool time_outlier = false;
};

struct OutlierOptions {
  bool dice_3sd = false;  // drop dice outside mean +/- 3 sd within the condition
  bool time_iqr = false;  // drop task times outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR]
};

struct Stat {
  double mean = 0.0;
  double sd = 0.0;  // sample sd (n - 1); 0 for a single value
  std::size_t n = 0;
};

Stat mean_sd(std::span<const double> values);

struct Summary {
  Stat visual_dice, audiovisual_dice;
  Stat visual_time, audiovisual_time;
};

// Marks outliers in place when enabled, then summarises per condition.
// Throws Errc::empty_group when a condition has no (remaining) trials.
Summary aggregate_trials(std::vector<TrialScore>& trials, const OutlierOptions& opts = {});

// schema,metric,visual_mean,visual_sd,audiovisual_mean,audiovisual_sd
// with metric rows "dice" and "task_time_s".
std::string summary_csv(const Summary& s);
Summary parse_summary_csv(const std::string& text);
void write_summary_csv(const Summary& s, const std::filesystem::path& path);

std::string trials_json(const std::vector<TrialScore>& trials);

// Loads a TrialLog, resolves its ground truth (header "ground_truth" mesh, or
// the scene's ground-truth structure) and scores every trial in it.
std::vector<TrialScore> score_log(const std::filesystem::path& log_path, double cell_size = 0.0);

}  // namespace mmii::eval
