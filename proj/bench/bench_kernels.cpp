// Serial reference vs OpenMP kernels on the 52k-face synthetic body:
// closest-point batches, deformation-graph warps and hybrid skinning.
#include "vva/deformation_graph.hpp"
#include "vva/kernels.hpp"
#include "vva/synthetic.hpp"

#include <benchmark/benchmark.h>

using namespace vva;

namespace {

struct Fixture {
    SkinnedModel model = make_human_model(4);
    TriMesh posed = skin(model, articulated_pose(model.skeleton, 10.0));
    SpatialIndex index{posed};
    DeformationGraph graph;

    Fixture() {
        graph = build_graph(model.mesh, 0.025 * bounding_box(model.mesh).diagonal());
        for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
            graph.nodes[i].rotation = quat_exp(Vec3(0.01 * std::sin(i), 0.02, 0.01 * std::cos(i)));
            graph.nodes[i].translation = Vec3(0.001 * i, 0.0, 0.0) / static_cast<double>(graph.nodes.size());
        }
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_ClosestPointsSerial(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(closest_points_serial(f.index, f.model.mesh.vertices));
    state.SetItemsProcessed(state.iterations() * f.model.mesh.vertices.size());
}

void BM_ClosestPointsParallel(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(closest_points(f.index, f.model.mesh.vertices));
    state.SetItemsProcessed(state.iterations() * f.model.mesh.vertices.size());
}

void BM_WarpSerial(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(warp_points_serial(f.graph, f.model.mesh.vertices));
    state.SetItemsProcessed(state.iterations() * f.model.mesh.vertices.size());
}

void BM_WarpParallel(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(warp_points(f.graph, f.model.mesh.vertices));
    state.SetItemsProcessed(state.iterations() * f.model.mesh.vertices.size());
}

void BM_SkinSerial(benchmark::State& state) {
    const Fixture& f = fixture();
    const SwingTwistPose pose = articulated_pose(f.model.skeleton, 10.0);
    for (auto _ : state) benchmark::DoNotOptimize(skin_serial(f.model, pose));
    state.SetItemsProcessed(state.iterations() * f.model.mesh.vertices.size());
}

void BM_SkinParallel(benchmark::State& state) {
    const Fixture& f = fixture();
    const SwingTwistPose pose = articulated_pose(f.model.skeleton, 10.0);
    for (auto _ : state) benchmark::DoNotOptimize(skin(f.model, pose));
    state.SetItemsProcessed(state.iterations() * f.model.mesh.vertices.size());
}

}  // namespace

BENCHMARK(BM_ClosestPointsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClosestPointsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WarpSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WarpParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SkinSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SkinParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
