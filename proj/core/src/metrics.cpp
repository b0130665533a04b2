#include "voxtrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "voxtrack/errors.hpp"

namespace voxtrack {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, int line) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw Error(ErrorCode::Format, "line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

int to_int(const std::string& s, int line) {
  const double v = to_double(s, line);
  if (v != std::floor(v)) throw Error(ErrorCode::Format, "line " + std::to_string(line) + ": expected an integer");
  return int(v);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (const TrajectoryRow& r : rows) {
    out += std::to_string(r.frame) + "," + (r.warm ? "warm" : "cold") + ",";
    out += r.pose ? pose_to_csv(*r.pose) : std::string(",,,,,,");
    out += "," + std::to_string(r.iters) + "," + std::to_string(r.visible) + "," + fmt(r.residual) + "," + fmt(r.ms) + "\n";
  }
  return out;
}

std::vector<TrajectoryRow> parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split(line).size() != 13 || line.rfind("frame,state", 0) != 0)
    throw Error(ErrorCode::Format, "missing trajectory header");
  std::vector<TrajectoryRow> rows;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 13) throw Error(ErrorCode::Format, "line " + std::to_string(n) + ": expected 13 fields");
    TrajectoryRow r;
    r.frame = to_int(f[0], n);
    if (f[1] == "warm") r.warm = true;
    else if (f[1] != "cold") throw Error(ErrorCode::Format, "line " + std::to_string(n) + ": bad state");
    if (r.warm) {
      std::array<double, 7> v;
      for (int i = 0; i < 7; ++i) v[size_t(i)] = to_double(f[size_t(2 + i)], n);
      r.pose = pose_from_fields(v);
    }
    r.iters = to_int(f[9], n);
    r.visible = to_int(f[10], n);
    r.residual = to_double(f[11], n);
    r.ms = to_double(f[12], n);
    rows.push_back(r);
  }
  return rows;
}

std::string gt_csv(const std::vector<Pose>& poses) {
  std::string out = "frame,qw,qx,qy,qz,tx,ty,tz\n";
  for (size_t i = 0; i < poses.size(); ++i) out += std::to_string(i) + "," + pose_to_csv(poses[i]) + "\n";
  return out;
}

std::vector<Pose> parse_gt_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame,qw", 0) != 0) throw Error(ErrorCode::Format, "missing ground-truth header");
  std::vector<Pose> poses;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 8) throw Error(ErrorCode::Format, "line " + std::to_string(n) + ": expected 8 fields");
    std::array<double, 7> v;
    for (int i = 0; i < 7; ++i) v[size_t(i)] = to_double(f[size_t(1 + i)], n);
    poses.push_back(pose_from_fields(v));
  }
  return poses;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const size_t lo = size_t(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

Metrics evaluate(const std::vector<TrajectoryRow>& est, const std::vector<Pose>& gt, const ObjectMap& map,
                 double max_rotation_deg, double max_translation) {
  if (est.size() != gt.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(est.size()) + " estimates vs " + std::to_string(gt.size()) +
                                               " ground-truth poses");
  const double diameter = map.diameter();
  if (!(diameter > 0.0)) throw Error(ErrorCode::InvalidConfig, "map has no extent");
  Metrics m;
  m.frame_count = int(est.size());
  std::vector<double> rot, trans, add;
  int successes = 0;
  for (size_t k = 0; k < est.size(); ++k) {
    FrameError e;
    if (est[k].warm && est[k].pose) {
      const Pose& p = *est[k].pose;
      e.has_pose = true;
      e.rotation_deg = rotation_distance_deg(p, gt[k]);
      e.translation = translation_distance(p, gt[k]) / diameter;
      double s = 0.0;
      for (const Vec3& x : map.points) s += ((p * x) - (gt[k] * x)).norm();
      e.add = map.points.empty() ? 0.0 : s / double(map.points.size());
      rot.push_back(e.rotation_deg);
      trans.push_back(e.translation);
      add.push_back(e.add);
      ++m.warm_frames;
      if (e.rotation_deg < max_rotation_deg && e.translation < max_translation) ++successes;
    }
    if (k == 0 || !est[k - 1].warm) ++m.cold_starts;
    m.frames.push_back(e);
  }
  m.rotation_median_deg = percentile(rot, 0.5);
  m.rotation_p90_deg = percentile(rot, 0.9);
  m.translation_median = percentile(trans, 0.5);
  m.translation_p90 = percentile(trans, 0.9);
  m.add_median = percentile(add, 0.5);
  m.add_p90 = percentile(add, 0.9);
  m.success_rate = est.empty() ? 0.0 : double(successes) / double(est.size());

  double jr = 0.0, jt = 0.0;
  int pairs = 0;
  for (size_t k = 1; k < est.size(); ++k) {
    if (!est[k].pose || !est[k - 1].pose) continue;
    const Pose de = *est[k].pose * est[k - 1].pose->inverse();
    const Pose dg = gt[k] * gt[k - 1].inverse();
    const double r = rotation_distance_deg(de, dg);
    const double t = translation_distance(de, dg) / diameter;
    jr += r * r;
    jt += t * t;
    ++pairs;
  }
  if (pairs) {
    m.jitter_rotation_deg = std::sqrt(jr / pairs);
    m.jitter_translation = std::sqrt(jt / pairs);
  }
  return m;
}

}  // namespace voxtrack
