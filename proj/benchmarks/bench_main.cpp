#include <map>

#include <Eigen/Dense>
#include <benchmark/benchmark.h>
#include <spdlog/spdlog.h>

#include "svcalib/bev_renderer.hpp"
#include "svcalib/calibration.hpp"
#include "svcalib/camera_model.hpp"
#include "svcalib/metrics.hpp"
#include "svcalib/rig_geometry.hpp"
#include "svcalib/synthetic.hpp"

using namespace svcalib;

namespace {

struct Problem {
  CameraRig gt = synthetic::make_rig({});
  std::vector<KeypointPair> keypoints;
  Eigen::VectorXd x;

  explicit Problem(int per_zone) {
    keypoints = synthetic::generate_keypoints(gt, per_zone, 2.0, 15.0, 1).keypoints;
    x = encode_params(synthetic::perturb_rig(gt, 0.1, 2.0, 2));
  }
};

void BM_PixelToGround(benchmark::State& state) {
  const CameraRig rig = synthetic::make_rig({});
  const Camera& cam = rig.camera(CameraId::kFront);
  const PixelPoint p{cam.intrinsics.u0() + 120.0, cam.intrinsics.v0() + 260.0};
  for (auto _ : state) benchmark::DoNotOptimize(pixel_to_ground(p, cam));
}
BENCHMARK(BM_PixelToGround);

void BM_GroundToPixel(benchmark::State& state) {
  const CameraRig rig = synthetic::make_rig({});
  const Camera& cam = rig.camera(CameraId::kFront);
  for (auto _ : state) benchmark::DoNotOptimize(ground_to_pixel({6.0, 1.0}, cam));
}
BENCHMARK(BM_GroundToPixel);

void BM_Objective(benchmark::State& state) {
  const Problem p(static_cast<int>(state.range(0)));
  const ReprojectionObjective j(p.gt, p.keypoints, heights_of(p.gt));
  for (auto _ : state) benchmark::DoNotOptimize(j(p.x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.keypoints.size()));
}
BENCHMARK(BM_Objective)->Arg(10)->Arg(100);

void BM_Gradient(benchmark::State& state) {
  const Problem p(static_cast<int>(state.range(0)));
  const ReprojectionObjective j(p.gt, p.keypoints, heights_of(p.gt));
  for (auto _ : state) benchmark::DoNotOptimize(j.gradient(p.x, 1e-6));
}
BENCHMARK(BM_Gradient)->Arg(10)->Arg(100);

void BM_Calibrate(benchmark::State& state) {
  const Problem p(10);
  const CameraRig init = synthetic::perturb_rig(p.gt, 0.1, 2.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(calibrate({init, p.keypoints, heights_of(p.gt), {}}));
}
BENCHMARK(BM_Calibrate)->Unit(benchmark::kMillisecond);

void BM_RenderBev(benchmark::State& state) {
  synthetic::SyntheticRigSpec spec;
  spec.intrinsics = synthetic::scaled_intrinsics(synthetic::default_intrinsics(), 0.5);
  const CameraRig rig = synthetic::make_rig(spec);
  const synthetic::Scene scene{synthetic::checkerboard(1.0, 0.1f, 0.9f), {}, 0.0f};
  std::map<CameraId, Image> images;
  for (const Camera& cam : rig.cameras()) images[cam.id] = synthetic::render_camera_image(cam, scene);
  const BevConfig cfg{25.0, static_cast<double>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(render_bev(images, rig, cfg));
}
BENCHMARK(BM_RenderBev)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

// Own main: libbenchmark_main.a ships with mismatched LTO bytecode on some
// distros, and calibrate() logs at info level on every run.
int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
