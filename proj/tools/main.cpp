#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "voxtrack/errors.hpp"
#include "voxtrack/io.hpp"
#include "voxtrack/metrics.hpp"
#include "voxtrack/random.hpp"
#include "voxtrack/scene.hpp"
#include "voxtrack/tracker.hpp"
#include "voxtrack/trajectory.hpp"

namespace fs = std::filesystem;
using namespace voxtrack;

namespace {

struct SceneArgs {
  std::string scene;
  bool fidelity = false;
};

struct SeqArgs {
  std::optional<std::uint64_t> seed;
  int frames = 0;  // 0 keeps the trajectory's own count
};

void add_scene_opts(CLI::App* cmd, SceneArgs& a) {
  cmd->add_option("--scene", a.scene, "scene spec file")->required()->check(CLI::ExistingFile);
  cmd->add_flag("--fidelity", a.fidelity, "fit the object field from renders instead of rasterizing it");
}

void add_seq_opts(CLI::App* cmd, SeqArgs& a) {
  cmd->add_option("--seed", a.seed, "mixed into the trajectory noise and RANSAC seeds");
  cmd->add_option("--frames", a.frames, "truncate the trajectory to this many frames")->check(CLI::PositiveNumber);
}

Scene load_scene(const SceneArgs& a) {
  BuildOptions opt;
  opt.fidelity = a.fidelity;
  return build_scene(load_scene_spec(a.scene), opt);
}

TrajectorySpec load_traj(const std::string& path, const SeqArgs& a) {
  TrajectorySpec t = load_trajectory_spec(path);
  if (a.seed) t.seed = mix_seed(t.seed, *a.seed);
  if (a.frames > 0 && a.frames < t.frames) t.frames = a.frames;
  return t;
}

TrackerConfig tracker_config(const Scene& scene, const SeqArgs& a, bool fixed_reference) {
  TrackerConfig cfg;
  cfg.object = scene.object;
  cfg.background = scene.background;
  cfg.map = std::make_shared<const ObjectMap>(scene.map);
  cfg.bundle = std::make_shared<const ReferenceBundle>(scene.bundle);
  if (a.seed) cfg.cold.pnp.seed = mix_seed(cfg.cold.pnp.seed, *a.seed);
  if (fixed_reference) cfg.reference = ReferenceMode::FixedCanonical;
  return cfg;
}

std::vector<TrajectoryRow> to_rows(const std::vector<FrameReport>& reports, bool timing) {
  std::vector<TrajectoryRow> rows;
  rows.reserve(reports.size());
  for (const FrameReport& r : reports) rows.push_back(to_row(r, timing));
  return rows;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["frames"] = m.frame_count;
  j["warm_frames"] = m.warm_frames;
  j["rotation_median_deg"] = m.rotation_median_deg;
  j["rotation_p90_deg"] = m.rotation_p90_deg;
  j["translation_median"] = m.translation_median;
  j["translation_p90"] = m.translation_p90;
  j["add_median"] = m.add_median;
  j["add_p90"] = m.add_p90;
  j["success_rate"] = m.success_rate;
  j["jitter_rotation_deg"] = m.jitter_rotation_deg;
  j["jitter_translation"] = m.jitter_translation;
  j["cold_starts"] = m.cold_starts;
  return j;
}

void print_metrics(const Metrics& m) {
  std::printf("frames %d  warm %d  success %.3f  cold starts %d\n", m.frame_count, m.warm_frames, m.success_rate,
              m.cold_starts);
  std::printf("rotation median %.3f deg  p90 %.3f deg\n", m.rotation_median_deg, m.rotation_p90_deg);
  std::printf("translation median %.4f  p90 %.4f (diameters)\n", m.translation_median, m.translation_p90);
  std::printf("ADD median %.4f  p90 %.4f\n", m.add_median, m.add_p90);
  std::printf("jitter %.4f deg  %.5f\n", m.jitter_rotation_deg, m.jitter_translation);
}

std::string frame_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.ppm", k);
  return buf;
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir + ": " + ec.message());
}

void write_scene(const Scene& scene, const std::string& dir) {
  make_dir(dir);
  save_field(join(dir, "object.vxf"), *scene.object);
  save_field(join(dir, "background.vxf"), *scene.background);
  save_map(join(dir, "map.vxm"), scene.map);
}

// ---- subcommands

struct BuildArgs {
  SceneArgs scene;
  std::string out;
};

int cmd_build(const BuildArgs& a) {
  const Scene scene = load_scene(a.scene);
  write_scene(scene, a.out);
  std::printf("object %d^3, %zu map points, diameter %.4f, %zu canonical views\n", scene.object->resolution().nx,
              scene.map.size(), scene.diameter, scene.bundle.views.size());
  return 0;
}

struct SynthArgs {
  SceneArgs scene;
  SeqArgs seq;
  std::string traj;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  const Scene scene = load_scene(a.scene);
  const Sequence seq = synth_sequence(scene, load_traj(a.traj, a.seq));
  make_dir(a.out);
  for (int k = 0; k < seq.size(); ++k) save_ppm(join(a.out, frame_name(k)), seq.frame(k));
  write_file_atomic(join(a.out, "gt.csv"), gt_csv(seq.gt()));
  std::printf("%d frames written to %s\n", seq.size(), a.out.c_str());
  return 0;
}

struct TrackArgs {
  SceneArgs scene;
  SeqArgs seq;
  std::vector<std::string> traj;
  std::vector<std::string> out;
  std::vector<std::string> gt;
  bool timing = false;
  bool fixed_reference = false;
  bool serial = false;
};

int cmd_track(const TrackArgs& a) {
  if (a.traj.size() != a.out.size()) throw CLI::ValidationError("--out must be given once per --traj");
  if (!a.gt.empty() && a.gt.size() != a.traj.size()) throw CLI::ValidationError("--gt must be given once per --traj");
  const Scene scene = load_scene(a.scene);
  std::vector<Sequence> seqs;
  std::vector<FrameStream> streams;
  std::vector<Tracker> trackers;
  for (const std::string& path : a.traj) {
    seqs.push_back(synth_sequence(scene, load_traj(path, a.seq)));
    const Sequence& s = seqs.back();
    streams.push_back(FrameStream{s.camera(), s.size(), [s](int k) { return s.frame(k); }});
    trackers.emplace_back(tracker_config(scene, a.seq, a.fixed_reference));
  }
  const auto reports = run_multi(trackers, streams, !a.serial);
  for (size_t i = 0; i < seqs.size(); ++i) {
    write_file_atomic(a.out[i], trajectory_csv(to_rows(reports[i], a.timing)));
    if (!a.gt.empty()) write_file_atomic(a.gt[i], gt_csv(seqs[i].gt()));
    int warm = 0;
    for (const FrameReport& r : reports[i]) warm += r.state_after == TrackState::Warm;
    std::printf("%s: %d/%d frames warm -> %s\n", a.traj[i].c_str(), warm, seqs[i].size(), a.out[i].c_str());
  }
  return 0;
}

struct EvalArgs {
  std::string est;
  std::string gt;
  std::string map;
  std::string json;
  double max_rotation = 5.0;
  double max_translation = 0.05;
};

int cmd_eval(const EvalArgs& a) {
  const Metrics m = evaluate(parse_trajectory_csv(read_file(a.est)), parse_gt_csv(read_file(a.gt)), load_map(a.map),
                             a.max_rotation, a.max_translation);
  if (!a.json.empty()) write_file_atomic(a.json, metrics_json(m).dump(2) + "\n");
  print_metrics(m);
  return 0;
}

struct DemoArgs {
  std::string data = VOXTRACK_DATA_DIR;
  std::string traj = "orbit.trj";
  std::string out = "demo_out";
  SeqArgs seq;
  bool timing = false;
};

int cmd_demo(const DemoArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scene scene = load_scene(SceneArgs{join(a.data, "standard.scn"), false});
  write_scene(scene, a.out);
  const Sequence seq = synth_sequence(scene, load_traj(join(a.data, a.traj), a.seq));
  save_ppm(join(a.out, "frame_0000.ppm"), seq.frame(0));
  write_file_atomic(join(a.out, "gt.csv"), gt_csv(seq.gt()));

  Tracker tracker(tracker_config(scene, a.seq, false));
  std::vector<FrameReport> reports;
  for (int k = 0; k < seq.size(); ++k) reports.push_back(tracker.process_frame(seq.frame(k), seq.camera()));
  const std::vector<TrajectoryRow> rows = to_rows(reports, a.timing);
  write_file_atomic(join(a.out, "run.csv"), trajectory_csv(rows));

  const Metrics m = evaluate(rows, seq.gt(), scene.map);
  write_file_atomic(join(a.out, "metrics.json"), metrics_json(m).dump(2) + "\n");
  print_metrics(m);
  if (a.timing) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("total %.1f s\n", s);
  }
  std::printf("outputs in %s\n", a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel-field object pose tracking on synthetic scenes"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);

  BuildArgs build;
  auto* c_build = app.add_subcommand("build-scene", "build fields and the object map from a scene spec");
  add_scene_opts(c_build, build.scene);
  c_build->add_option("--out-dir", build.out, "directory for object.vxf, background.vxf, map.vxm")->required();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "render a query sequence with ground truth");
  add_scene_opts(c_synth, synth.scene);
  add_seq_opts(c_synth, synth.seq);
  c_synth->add_option("--traj", synth.traj, "trajectory spec file")->required()->check(CLI::ExistingFile);
  c_synth->add_option("--out-dir", synth.out, "directory for frames and gt.csv")->required();

  TrackArgs track;
  auto* c_track = app.add_subcommand("track", "track synthesized sequences, one tracker per trajectory");
  add_scene_opts(c_track, track.scene);
  add_seq_opts(c_track, track.seq);
  c_track->add_option("--traj", track.traj, "trajectory spec file (repeatable)")->required()->check(CLI::ExistingFile);
  c_track->add_option("--out", track.out, "trajectory CSV per --traj")->required();
  c_track->add_option("--gt", track.gt, "ground-truth CSV per --traj");
  c_track->add_flag("--timing", track.timing, "record wall time per frame (otherwise 0)");
  c_track->add_flag("--fixed-reference", track.fixed_reference, "reuse the nearest canonical view as reference");
  c_track->add_flag("--serial", track.serial, "run trackers one after another");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "score a trajectory against ground truth");
  c_eval->add_option("--est", eval.est, "trajectory CSV")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--gt", eval.gt, "ground-truth CSV")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--map", eval.map, "object map (VXM1)")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--json", eval.json, "metrics output");
  c_eval->add_option("--max-rotation", eval.max_rotation, "success threshold, degrees")->check(CLI::PositiveNumber);
  c_eval->add_option("--max-translation", eval.max_translation, "success threshold, diameters")
      ->check(CLI::PositiveNumber);

  DemoArgs demo;
  auto* c_demo = app.add_subcommand("demo", "end-to-end run on the standard scene");
  add_seq_opts(c_demo, demo.seq);
  c_demo->add_option("--data-dir", demo.data, "directory holding standard.scn and trajectories")
      ->check(CLI::ExistingDirectory);
  c_demo->add_option("--traj", demo.traj, "trajectory file name inside the data directory");
  c_demo->add_option("--out-dir", demo.out, "output directory");
  c_demo->add_flag("--timing", demo.timing, "record wall time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c_build) return cmd_build(build);
    if (*c_synth) return cmd_synth(synth);
    if (*c_track) return cmd_track(track);
    if (*c_eval) return cmd_eval(eval);
    if (*c_demo) return cmd_demo(demo);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
