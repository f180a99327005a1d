// svcalib command line: calibrate, evaluate, render-bev, synth,
// simulate-roughness, serve.
//
// Exit codes: 0 success, 1 solver or metric failure, 2 usage or I/O error.
// Logs go to stderr; SPDLOG_LEVEL sets verbosity (e.g. SPDLOG_LEVEL=debug).

// svcalib headers first: httplib (via the service) drags in <resolv.h>.
#include "svcalib/annotation_service.hpp"
#include "svcalib/bev_renderer.hpp"
#include "svcalib/calibration.hpp"
#include "svcalib/error.hpp"
#include "svcalib/io_config.hpp"
#include "svcalib/metrics.hpp"
#include "svcalib/roughness_experiment.hpp"
#include "svcalib/synthetic.hpp"
#include "synth_spec.hpp"

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svcalib;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kParse:
    case ErrorCode::kVersion:
    case ErrorCode::kInput:
    case ErrorCode::kInvalidArgument:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

json rig_json(const CameraRig& rig) { return json::parse(io::serialize_rig({rig, heights_of(rig)})); }

json point_json(const Eigen::Vector3d& p) { return json::array({p.x(), p.y(), p.z()}); }

io::KeypointFile keypoint_file(const std::vector<KeypointPair>& pairs, std::vector<io::FrameEntry> frames = {}) {
  io::KeypointFile f;
  f.frames = std::move(frames);
  std::int64_t id = 1;
  for (const KeypointPair& k : pairs) f.keypoints.push_back({id++, k, ""});
  return f;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--range", "expected MIN:MAX, e.g. 2:15");
  try {
    const double a = std::stod(text.substr(0, colon));
    const double b = std::stod(text.substr(colon + 1));
    if (!(a >= 0.0 && b > a)) throw CLI::ValidationError("--range", "need 0 <= MIN < MAX");
    return {a, b};
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--range", "expected MIN:MAX, e.g. 2:15");
  }
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string rig;
  std::string keypoints;
  std::string out;
  int max_iter = SolverConfig{}.max_iterations;
  double gradient_tolerance = SolverConfig{}.gradient_tolerance;
  double finite_diff_step = SolverConfig{}.finite_diff_step;
  bool report = false;
  bool json_out = false;
};

int run_calibrate(const CalibrateArgs& a) {
  const io::RigFile rig = io::load_rig(a.rig);
  const io::KeypointFile kp = io::load_keypoints(a.keypoints);
  io::validate_keypoints(kp, rig.rig);
  CalibrationProblem problem{rig.rig, kp.pairs(), rig.fixed_heights, {}};
  problem.solver.max_iterations = a.max_iter;
  problem.solver.gradient_tolerance = a.gradient_tolerance;
  problem.solver.finite_diff_step = a.finite_diff_step;
  const CalibrationResult r = calibrate(problem);
  if (!a.out.empty()) io::save_rig({r.rig_optimized, rig.fixed_heights}, a.out);

  if (a.json_out) {
    json j = {{"objective_initial", r.objective_initial},
              {"objective_final", r.objective_final},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"termination", std::string(optim::to_string(r.termination))},
              {"n_keypoints", problem.keypoints.size()},
              {"rig", rig_json(r.rig_optimized)}};
    if (a.report) j["per_keypoint_errors"] = r.per_keypoint_errors;
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("keypoints:    %zu\n", problem.keypoints.size());
    std::printf("J initial:    %.9g m\n", r.objective_initial);
    std::printf("J final:      %.9g m\n", r.objective_final);
    std::printf("iterations:   %d (%s)\n", r.iterations, std::string(optim::to_string(r.termination)).c_str());
    if (!a.out.empty()) std::printf("optimized rig written to %s\n", a.out.c_str());
    if (a.report) {
      std::printf("\n%-6s %-6s %-7s %-7s %12s\n", "index", "frame", "cam_i", "cam_j", "error [m]");
      for (std::size_t k = 0; k < problem.keypoints.size(); ++k) {
        const KeypointPair& p = problem.keypoints[k];
        std::printf("%-6zu %-6s %-7s %-7s %12.6f\n", k, p.frame_id.c_str(), std::string(to_string(p.cam_i)).c_str(),
                    std::string(to_string(p.cam_j)).c_str(), r.per_keypoint_errors[k]);
      }
    }
  }
  if (!r.converged) {
    spdlog::error("solver stopped after {} iterations without converging", r.iterations);
    return kExitFailure;
  }
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string rig;
  std::string keypoints;
  std::string label = "rig";
  std::string json_path;
  bool json_out = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const io::RigFile rig = io::load_rig(a.rig);
  const io::KeypointFile kp = io::load_keypoints(a.keypoints);
  io::validate_keypoints(kp, rig.rig);
  const MdeReport report = mde(kp.pairs(), rig.rig);
  const std::string j = io::serialize_mde(report);
  if (!a.json_path.empty()) io::write_file_atomic(a.json_path, j + "\n");
  if (a.json_out) {
    std::cout << j << "\n";
  } else {
    std::cout << format_mde_table(report, a.label);
  }
  return 0;
}

// ---- render-bev ----

struct RenderArgs {
  std::string rig;
  std::string images;
  std::string keypoints;
  std::string frame;
  double extent = BevConfig{}.extent;
  double ppm = BevConfig{}.resolution;
  std::string out;
  bool layers = false;
};

void write_raster(const Image& img, const Mask& mask, const fs::path& path) {
  if (path.extension() == ".npy") {
    io::save_npy(img, path);
  } else {
    io::save_png(img, path, &mask);
  }
}

int run_render(const RenderArgs& a) {
  const io::RigFile rig = io::load_rig(a.rig);
  std::map<CameraId, Image> images;
  if (!a.images.empty()) {
    images = io::load_image_directory(a.images);
  } else {
    const io::KeypointFile kp = io::load_keypoints(a.keypoints);
    if (kp.frames.empty()) throw Error(ErrorCode::kInput, a.keypoints + " lists no frames");
    const std::string id = a.frame.empty() ? kp.frames.front().frame_id : a.frame;
    const io::FrameEntry* frame = kp.frame(id);
    if (!frame) throw Error(ErrorCode::kInput, "no frame '" + id + "' in " + a.keypoints);
    images = io::load_frame_images(*frame, fs::path(a.keypoints).parent_path());
  }
  BevConfig cfg;
  cfg.extent = a.extent;
  cfg.resolution = a.ppm;
  const BevImage bev = render_bev(images, rig.rig, cfg);
  const fs::path out(a.out);
  write_raster(bev.composite, bev.composite_mask, out);
  std::printf("%s: %dx%d, %.4f m/px\n", a.out.c_str(), bev.composite.width, bev.composite.height,
              bev.meters_per_pixel);
  if (a.layers) {
    for (const BevLayer& layer : bev.layers) {
      const fs::path p =
          out.parent_path() / (out.stem().string() + "_" + std::string(to_string(layer.camera)) + out.extension().string());
      write_raster(layer.raster, layer.mask, p);
      std::printf("%s\n", p.c_str());
    }
  }
  return 0;
}

// ---- synth ----

struct SynthArgs {
  std::string spec;
  std::size_t n_per_zone = 12;
  std::size_t n_eval_per_zone = 5;
  std::string range = "2:15";
  std::uint64_t seed = 0;
  int frames = 1;
  double noise_px = 0.0;
  double init_translation = 0.10;
  double init_rotation = 2.0;
  std::string out_dir;
  bool images = false;
  bool session = false;
  int supersample = 1;
};

int run_synth(const SynthArgs& a) {
  const auto [min_range, max_range] = parse_range(a.range);
  const synthetic::SyntheticRigSpec spec =
      a.spec.empty() ? synthetic::SyntheticRigSpec{} : cli::parse_synth_spec(io::read_file(a.spec));
  const CameraRig gt = synthetic::make_rig(spec);
  // Streams: 100*seed + f for frame f keypoints, +50 eval, +60+f noise, +99 init.
  const std::uint64_t base = 100 * a.seed;
  const CameraRig init = synthetic::perturb_rig(gt, a.init_translation, a.init_rotation, base + 99);

  std::vector<KeypointPair> clicks;
  json points = json::array();
  for (int f = 0; f < a.frames; ++f) {
    const synthetic::SyntheticKeypoints kp =
        synthetic::generate_keypoints(gt, a.n_per_zone, min_range, max_range, base + f, std::to_string(f));
    std::vector<KeypointPair> pairs = kp.keypoints;
    if (a.noise_px > 0.0) pairs = synthetic::add_pixel_noise(gt, std::move(pairs), a.noise_px, base + 60 + f);
    clicks.insert(clicks.end(), pairs.begin(), pairs.end());
    for (const Eigen::Vector3d& p : kp.points) points.push_back(point_json(p));
  }
  const synthetic::SyntheticKeypoints eval =
      synthetic::generate_keypoints(gt, a.n_eval_per_zone, min_range, max_range, base + 50, "0");

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::vector<io::FrameEntry> frames;
  if (a.images || a.session) {
    // Checkerboard ground with one box standing on it: the box shows how
    // off-ground structure ghosts in the BEV even under a perfect rig.
    const synthetic::Scene scene{synthetic::checkerboard(1.0), {{{6.0, 3.0, 0.0}, {7.0, 4.0, 1.5}, 0.5f}}, 0.0f};
    std::map<CameraId, std::string> files;
    for (const Camera& cam : gt.cameras()) {
      const std::string rel = "frames/0/" + std::string(to_string(cam.id)) + ".png";
      fs::create_directories((dir / rel).parent_path());
      io::save_png(synthetic::render_camera_image(cam, scene, a.supersample), dir / rel);
      files[cam.id] = rel;
    }
    // The scene is static, so every frame shows the same images.
    for (int f = 0; f < a.frames; ++f) frames.push_back({std::to_string(f), files});
  }

  io::save_rig({gt, heights_of(gt)}, dir / "rig_gt.json");
  io::save_rig({init, heights_of(init)}, dir / "rig.json");
  if (a.session) {
    io::save_keypoints(keypoint_file({}, frames), dir / "keypoints.json");
    io::save_keypoints(keypoint_file(clicks, frames), dir / "clicks.json");
  } else {
    io::save_keypoints(keypoint_file(clicks, frames), dir / "keypoints.json");
  }
  io::save_keypoints(keypoint_file(eval.keypoints), dir / "eval_keypoints.json");

  json eval_points = json::array();
  for (const Eigen::Vector3d& p : eval.points) eval_points.push_back(point_json(p));
  const json sidecar = {{"version", 1},
                        {"rig", rig_json(gt)},
                        {"points", points},
                        {"eval_points", eval_points},
                        {"seed", a.seed},
                        {"noise_px", a.noise_px},
                        {"init_perturbation", {{"translation_m", a.init_translation}, {"rotation_deg", a.init_rotation}}}};
  io::write_file_atomic(dir / "gt.json", sidecar.dump(2) + "\n");

  std::printf("wrote %s: rig_gt.json, rig.json (perturbed), %s (%zu pairs), eval_keypoints.json (%zu pairs), gt.json%s\n",
              dir.c_str(), a.session ? "clicks.json" : "keypoints.json", clicks.size(), eval.keypoints.size(),
              frames.empty() ? "" : ", frames/");
  return 0;
}

// ---- simulate-roughness ----

struct RoughnessArgs {
  std::string mode = "both";
  double delta_z = -1.0;
  double iri = 6.0;
  double range = 20.0;
  std::uint64_t seed = 0;
  int seeds = 1;
  std::size_t n_per_zone = 10;
  int max_iter = 2000;
  bool json_out = false;
};

json pose_json(const synthetic::PoseErrorSummary& s) {
  const auto stat = [](const synthetic::PoseErrorStat& st) { return json{{"max", st.max}, {"mean", st.mean}}; };
  return {{"dtx", stat(s.tx)}, {"dty", stat(s.ty)}, {"droll", stat(s.roll)}, {"dpitch", stat(s.pitch)},
          {"dyaw", stat(s.yaw)}};
}

int run_roughness(const RoughnessArgs& a) {
  const double dz = a.delta_z >= 0.0 ? a.delta_z : synthetic::iri_height_bound(a.range, a.iri);
  std::vector<std::string> keep = {"No noise"};
  if (a.mode == "slope" || a.mode == "both") keep.push_back("Slope noise");
  if (a.mode == "random" || a.mode == "both") keep.push_back("Random noise");

  bool all_converged = true;
  double worst_t = 0.0;
  double worst_angle = 0.0;
  json runs = json::array();
  for (int s = 0; s < a.seeds; ++s) {
    synthetic::RoughnessExperiment exp;
    exp.seed = a.seed + static_cast<std::uint64_t>(s);
    exp.max_range = a.range;
    exp.n_per_zone = a.n_per_zone;
    exp.solver.max_iterations = a.max_iter;
    std::vector<synthetic::RoughnessRow> rows;
    for (synthetic::RoughnessRow& row : synthetic::run_roughness_trial(exp, dz)) {
      if (std::find(keep.begin(), keep.end(), row.label) != keep.end()) rows.push_back(std::move(row));
    }
    json jrows = json::array();
    for (const synthetic::RoughnessRow& row : rows) {
      all_converged = all_converged && row.converged;
      json jr = {{"label", row.label}, {"converged", row.converged}, {"mde", json::parse(io::serialize_mde(row.mde))}};
      if (row.pose_delta) {
        const synthetic::PoseErrorSummary& d = *row.pose_delta;
        worst_t = std::max({worst_t, d.tx.max, d.ty.max});
        worst_angle = std::max({worst_angle, d.roll.max, d.pitch.max, d.yaw.max});
        jr["pose_delta"] = pose_json(d);
      }
      jrows.push_back(jr);
    }
    runs.push_back({{"seed", exp.seed}, {"rows", jrows}});
    if (!a.json_out) {
      std::printf("seed %llu, delta_z = %.4f m, keypoints %.0f-%.0f m\n", static_cast<unsigned long long>(exp.seed), dz,
                  exp.min_range, exp.max_range);
      std::cout << synthetic::format_roughness_table(rows) << "\n";
    }
  }
  if (a.json_out) {
    std::cout << json{{"delta_z", dz}, {"runs", runs}, {"all_converged", all_converged},
                      {"max_translation_delta", worst_t}, {"max_angle_delta", worst_angle}}
                     .dump(2)
              << "\n";
  } else {
    std::printf("max over runs: dt %.4f m, dangle %.4f deg, all converged: %s\n", worst_t, worst_angle,
                all_converged ? "yes" : "no");
  }
  return all_converged ? 0 : kExitFailure;
}

// ---- serve ----

struct ServeArgs {
  std::string session;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

service::AnnotationService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int run_serve(const ServeArgs& a) {
  service::AnnotationService svc(a.session);
  if (!a.static_dir.empty()) svc.set_static_dir(a.static_dir);
  g_service = &svc;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("serving {} on http://{}:{}", a.session, a.host, a.port);
  const bool ok = svc.listen(a.host, a.port);
  g_service = nullptr;
  if (!ok) {
    spdlog::error("could not listen on {}:{}", a.host, a.port);
    return kExitUsage;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("svcalib"));
  spdlog::cfg::load_env_levels();

  CLI::App app{"Surround-view rig extrinsic calibration from ground keypoints"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Optimize rig extrinsics from keypoint pairs");
  c->add_option("--rig", cal.rig, "Initial rig JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--keypoints", cal.keypoints, "Keypoint JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--out", cal.out, "Write the optimized rig here");
  c->add_option("--max-iter", cal.max_iter, "BFGS iteration limit")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--gradient-tolerance", cal.gradient_tolerance, "Stop when |grad|_inf falls below this")
      ->capture_default_str();
  c->add_option("--finite-diff-step", cal.finite_diff_step, "Relative finite-difference step")->capture_default_str();
  c->add_flag("--report", cal.report, "Print per-keypoint errors");
  c->add_flag("--json", cal.json_out, "Machine-readable output");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Mean distance error by distance bin");
  e->add_option("--rig", ev.rig, "Rig JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--keypoints", ev.keypoints, "Evaluation keypoint JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--label", ev.label, "Row label in the table")->capture_default_str();
  e->add_option("--json-out", ev.json_path, "Also write the JSON report here");
  e->add_flag("--json", ev.json_out, "Print JSON instead of the table");

  RenderArgs rb;
  auto* r = app.add_subcommand("render-bev", "Bird's-eye view by inverse perspective mapping");
  r->add_option("--rig", rb.rig, "Rig JSON")->required()->check(CLI::ExistingFile);
  auto* img_opt = r->add_option("--images", rb.images, "Directory with front/left/rear/right images")
                      ->check(CLI::ExistingDirectory);
  auto* kp_opt = r->add_option("--keypoints", rb.keypoints, "Take images from this keypoint file's frame list")
                     ->check(CLI::ExistingFile);
  img_opt->excludes(kp_opt);
  r->add_option("--frame", rb.frame, "Frame id with --keypoints (default: first)")->needs(kp_opt);
  r->add_option("--extent", rb.extent, "Meters per side")->capture_default_str()->check(CLI::PositiveNumber);
  r->add_option("--ppm", rb.ppm, "Pixels per meter")->capture_default_str()->check(CLI::PositiveNumber);
  r->add_option("--out", rb.out, "Output .png or .npy")->required();
  r->add_flag("--layers", rb.layers, "Also write one raster per camera (<out>_<camera>.<ext>)");

  SynthArgs sy;
  auto* s = app.add_subcommand("synth", "Generate a synthetic rig, keypoints and ground-truth sidecar");
  s->add_option("--spec", sy.spec, "Rig spec JSON (default: built-in car)")->check(CLI::ExistingFile);
  s->add_option("--n-per-zone", sy.n_per_zone, "Calibration keypoints per overlap zone and frame")
      ->capture_default_str();
  s->add_option("--n-eval-per-zone", sy.n_eval_per_zone, "Held-out keypoints per zone")->capture_default_str();
  s->add_option("--range", sy.range, "Keypoint distance range MIN:MAX in meters")->capture_default_str();
  s->add_option("--seed", sy.seed, "Random seed")->capture_default_str();
  s->add_option("--frames", sy.frames, "Number of frames")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--noise-px", sy.noise_px, "Gaussian pixel noise sigma")->capture_default_str();
  s->add_option("--init-translation", sy.init_translation, "Initial-rig XY offset bound, meters")
      ->capture_default_str();
  s->add_option("--init-rotation", sy.init_rotation, "Initial-rig rotation bound, degrees")->capture_default_str();
  s->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  s->add_flag("--images", sy.images, "Render camera images of a checkerboard scene");
  s->add_flag("--session", sy.session,
              "Write an annotation session: images, empty keypoints.json, true clicks in clicks.json");
  s->add_option("--supersample", sy.supersample, "Rays per pixel side when rendering")->capture_default_str();

  RoughnessArgs ro;
  auto* rr = app.add_subcommand("simulate-roughness", "Calibrate on rough ground and report pose drift");
  rr->add_option("--mode", ro.mode, "slope, random or both")
      ->capture_default_str()
      ->check(CLI::IsMember({"slope", "random", "both"}));
  rr->add_option("--delta-z", ro.delta_z, "Maximum height deviation, meters (default: range/1000*iri)");
  rr->add_option("--iri", ro.iri, "Road roughness, m/km")->capture_default_str();
  rr->add_option("--range", ro.range, "Keypoint range and slope length, meters")->capture_default_str();
  rr->add_option("--seed", ro.seed, "First seed")->capture_default_str();
  rr->add_option("--seeds", ro.seeds, "Number of consecutive seeds")->capture_default_str()->check(CLI::PositiveNumber);
  rr->add_option("--n-per-zone", ro.n_per_zone, "Calibration keypoints per zone")->capture_default_str();
  rr->add_option("--max-iter", ro.max_iter, "BFGS iteration limit")->capture_default_str();
  rr->add_flag("--json", ro.json_out, "Machine-readable output");

  ServeArgs sv;
  auto* se = app.add_subcommand("serve", "Run the annotation HTTP service");
  se->add_option("--session", sv.session, "Session directory (rig.json, frames/, keypoints.json)")
      ->required()
      ->check(CLI::ExistingDirectory);
  se->add_option("--port", sv.port, "TCP port")->capture_default_str();
  se->add_option("--host", sv.host, "Bind address")->capture_default_str();
  se->add_option("--static", sv.static_dir, "Serve a web UI build from this directory")->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c) return run_calibrate(cal);
    if (*e) return run_evaluate(ev);
    if (*r) {
      if (rb.images.empty() && rb.keypoints.empty()) {
        std::cerr << "render-bev needs --images or --keypoints\n";
        return kExitUsage;
      }
      return run_render(rb);
    }
    if (*s) return run_synth(sy);
    if (*rr) return run_roughness(ro);
    if (*se) return run_serve(sv);
  } catch (const CLI::ValidationError& err) {
    std::cerr << err.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& err) {
    spdlog::error("{}", err.what());
    return kExitUsage;
  } catch (const Error& err) {
    spdlog::error("{} ({})", err.what(), to_string(err.code()));
    return exit_code_for(err.code());
  } catch (const fs::filesystem_error& err) {
    spdlog::error("{}", err.what());
    return kExitUsage;
  }
  return kExitUsage;
}
