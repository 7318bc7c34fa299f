#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vcreg/phantom.hpp"

// Landmark-based evaluation of a registration run: per-bifurcation frame and
// angle mismatches, rotational gating, matched-fraction curves, and summary
// statistics, plus the CSV renderings the command line tool emits.

namespace vcreg {

struct MismatchRow {
  int id = 0;
  double frame_mismatch = 0.0;  // frames, >= 0
  double angle_mismatch = 0.0;  // degrees in [0, 180]
  bool gated = false;
};

// Pairs landmarks by id (output follows gt order) and computes absolute frame
// distance and wrapped angular distance. Throws DataError when the id sets
// differ or contain duplicates.
std::vector<MismatchRow> landmark_mismatch(const LandmarkSet& pred, const LandmarkSet& gt);

// Marks gated = (frame_mismatch <= threshold_frames); the threshold is
// inclusive. Angle statistics downstream consider gated rows only.
std::vector<MismatchRow> gate_rotational(std::vector<MismatchRow> rows,
                                         double threshold_frames = 6.0);

// Percentage (0..100) of values <= t for each threshold; thresholds must be
// strictly increasing and values non-empty.
std::vector<double> mismatch_curve(const std::vector<double>& values,
                                   const std::vector<double>& thresholds);

std::vector<double> frame_values(const std::vector<MismatchRow>& rows);
std::vector<double> gated_angle_values(const std::vector<MismatchRow>& rows);

// Population statistics; count == 0 means "empty", and renderers must leave
// the cells blank rather than print zeros.
struct SummaryStats {
  int count = 0;
  double mean = 0.0, stddev = 0.0, median = 0.0;
};
SummaryStats summarize(const std::vector<double>& values);

struct MismatchReport {
  std::vector<MismatchRow> rows;
  SummaryStats frame_stats;  // over all rows
  SummaryStats angle_stats;  // over gated rows only
  double mm_per_frame = 0.2;
};

// Gate + summarize in one step. mm_per_frame only scales reporting.
MismatchReport evaluate_landmarks(const LandmarkSet& pred, const LandmarkSet& gt,
                                  double threshold_frames = 6.0, double mm_per_frame = 0.2);

// CSV renderings. Streams are used so callers can target files or buffers.
void write_rows_csv(std::ostream& os, const std::vector<MismatchRow>& rows);

// One column of percentages per named series, all over the same thresholds.
struct CurveSeries {
  std::string name;
  std::vector<double> pct;
};
void write_curves_csv(std::ostream& os, const std::vector<double>& thresholds,
                      const std::vector<CurveSeries>& series);

// One row per named report, frame stats in frames and mm, angle stats over
// gated rows (blank when nothing is gated).
void write_summary_csv(std::ostream& os,
                       const std::vector<std::pair<std::string, MismatchReport>>& reports);

}  // namespace vcreg
