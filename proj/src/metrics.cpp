#include "vcreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_map>

#include "vcreg/errors.hpp"

namespace vcreg {

namespace {

double wrap_angle_deg(double delta) {
  double d = std::fmod(std::abs(delta), 360.0);
  return std::min(d, 360.0 - d);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

}  // namespace

std::vector<MismatchRow> landmark_mismatch(const LandmarkSet& pred, const LandmarkSet& gt) {
  if (pred.size() != gt.size())
    throw DataError("landmark sets differ in size: " + std::to_string(pred.size()) + " vs " +
                    std::to_string(gt.size()));
  std::unordered_map<int, const LandmarkObs*> by_id;
  for (const LandmarkObs& p : pred) {
    if (!by_id.emplace(p.id, &p).second)
      throw DataError("duplicate landmark id " + std::to_string(p.id));
  }
  std::vector<MismatchRow> rows;
  rows.reserve(gt.size());
  std::unordered_map<int, int> seen;
  for (const LandmarkObs& g : gt) {
    if (++seen[g.id] > 1) throw DataError("duplicate landmark id " + std::to_string(g.id));
    auto it = by_id.find(g.id);
    if (it == by_id.end())
      throw DataError("landmark id " + std::to_string(g.id) + " missing from predictions");
    MismatchRow row;
    row.id = g.id;
    row.frame_mismatch = std::abs(double(it->second->frame) - double(g.frame));
    row.angle_mismatch = wrap_angle_deg(it->second->azimuth_deg - g.azimuth_deg);
    rows.push_back(row);
  }
  return rows;
}

std::vector<MismatchRow> gate_rotational(std::vector<MismatchRow> rows, double threshold_frames) {
  if (threshold_frames < 0.0) throw ConfigError("gating threshold must be non-negative");
  for (MismatchRow& r : rows) r.gated = r.frame_mismatch <= threshold_frames;
  return rows;
}

std::vector<double> mismatch_curve(const std::vector<double>& values,
                                   const std::vector<double>& thresholds) {
  if (values.empty()) throw DataError("mismatch curve needs at least one value");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw ConfigError("curve thresholds must be strictly increasing");
  std::vector<double> pct;
  pct.reserve(thresholds.size());
  for (double t : thresholds) {
    std::size_t hit = 0;
    for (double v : values)
      if (v <= t) ++hit;
    pct.push_back(100.0 * double(hit) / double(values.size()));
  }
  return pct;
}

std::vector<double> frame_values(const std::vector<MismatchRow>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const MismatchRow& r : rows) out.push_back(r.frame_mismatch);
  return out;
}

std::vector<double> gated_angle_values(const std::vector<MismatchRow>& rows) {
  std::vector<double> out;
  for (const MismatchRow& r : rows)
    if (r.gated) out.push_back(r.angle_mismatch);
  return out;
}

SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  s.count = int(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / double(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / double(values.size()));
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.median = (n % 2) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return s;
}

MismatchReport evaluate_landmarks(const LandmarkSet& pred, const LandmarkSet& gt,
                                  double threshold_frames, double mm_per_frame) {
  if (mm_per_frame <= 0.0) throw ConfigError("mm_per_frame must be positive");
  MismatchReport rep;
  rep.rows = gate_rotational(landmark_mismatch(pred, gt), threshold_frames);
  rep.frame_stats = summarize(frame_values(rep.rows));
  rep.angle_stats = summarize(gated_angle_values(rep.rows));
  rep.mm_per_frame = mm_per_frame;
  return rep;
}

void write_rows_csv(std::ostream& os, const std::vector<MismatchRow>& rows) {
  os << "id,frame_mismatch,angle_mismatch_deg,gated\n";
  for (const MismatchRow& r : rows)
    os << r.id << ',' << fmt(r.frame_mismatch) << ',' << fmt(r.angle_mismatch) << ','
       << (r.gated ? 1 : 0) << '\n';
}

void write_curves_csv(std::ostream& os, const std::vector<double>& thresholds,
                      const std::vector<CurveSeries>& series) {
  for (const CurveSeries& s : series)
    if (s.pct.size() != thresholds.size())
      throw ConfigError("curve series '" + s.name + "' does not match the threshold count");
  os << "threshold";
  for (const CurveSeries& s : series) os << ',' << s.name;
  os << '\n';
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    os << fmt(thresholds[i]);
    for (const CurveSeries& s : series) os << ',' << fmt(s.pct[i]);
    os << '\n';
  }
}

void write_summary_csv(std::ostream& os,
                       const std::vector<std::pair<std::string, MismatchReport>>& reports) {
  os << "method,landmarks,frame_mean,frame_std,frame_median,frame_mean_mm,frame_std_mm,"
        "gated,angle_mean_deg,angle_std_deg,angle_median_deg\n";
  for (const auto& [name, rep] : reports) {
    os << name << ',' << rep.frame_stats.count;
    if (rep.frame_stats.count > 0) {
      const SummaryStats& f = rep.frame_stats;
      os << ',' << fmt(f.mean) << ',' << fmt(f.stddev) << ',' << fmt(f.median) << ','
         << fmt(f.mean * rep.mm_per_frame) << ',' << fmt(f.stddev * rep.mm_per_frame);
    } else {
      os << ",,,,,";
    }
    os << ',' << rep.angle_stats.count;
    if (rep.angle_stats.count > 0) {
      const SummaryStats& a = rep.angle_stats;
      os << ',' << fmt(a.mean) << ',' << fmt(a.stddev) << ',' << fmt(a.median);
    } else {
      os << ",,,";
    }
    os << '\n';
  }
}

}  // namespace vcreg
