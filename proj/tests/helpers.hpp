#pragma once

// Shared fixtures and generators for the test binaries.

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "posetrack/graph.hpp"
#include "posetrack/ilp.hpp"
#include "posetrack/model.hpp"
#include "posetrack/potentials.hpp"

namespace testutil {

using namespace posetrack;

inline Detection det(int id, int frame, int joint, double x, double y, double score = 0.8,
                     double scale = 1.0) {
    Detection d;
    d.id = id;
    d.frame = frame;
    d.joint = JointType{joint};
    d.pos = Vec2{x, y};
    d.score = score;
    d.scale = scale;
    return d;
}

// Deterministic generator for property-style tests.
class TestRng {
public:
    explicit TestRng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int n) {  // {0, ..., n-1}
        const int v = static_cast<int>(uniform() * static_cast<double>(n));
        return v >= n ? n - 1 : v;
    }

private:
    std::mt19937_64 gen_;
};

// Random scene over `frames` consecutive frames with 1..max_per_frame
// detections per frame and joint types below `joint_types`.
inline std::vector<Detection> random_scene(TestRng& rng, int frames, int max_per_frame,
                                           int joint_types) {
    std::vector<Detection> dets;
    int id = 0;
    for (int f = 0; f < frames; ++f) {
        const int n = 1 + rng.uniform_int(max_per_frame);
        for (int i = 0; i < n; ++i)
            dets.push_back(det(id++, f, rng.uniform_int(joint_types), rng.uniform(0.0, 200.0),
                               rng.uniform(0.0, 200.0), rng.uniform(0.05, 0.95)));
    }
    return dets;
}

// Random instance with at most `max_vars` variables: random small graph over
// 2..4 frames, costs uniform in [-3, 3]. Retries shapes until small enough.
inline IlpInstance random_small_instance(TestRng& rng, int max_vars = 22) {
    for (;;) {
        const int frames = 2 + rng.uniform_int(3);
        const std::vector<Detection> dets = random_scene(rng, frames, 3, 2);
        const int tau = 1 + rng.uniform_int(3);
        SpatioTemporalGraph g = build_graph(dets, tau);
        const VarIndex index(g);
        if (index.total() > max_vars || index.total() == 0) continue;
        PotentialTable pot;
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
            pot.node_cost.push_back(rng.uniform(-3.0, 3.0));
        for (std::size_t i = 0; i < g.spatial_edges.size(); ++i)
            pot.spatial_cost.push_back(rng.uniform(-3.0, 3.0));
        for (std::size_t i = 0; i < g.temporal_edges.size(); ++i)
            pot.temporal_cost.push_back(rng.uniform(-3.0, 3.0));
        return build_instance(g, pot);
    }
}

// Unique writable directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("posetrack_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

#ifdef POSETRACK_CLI
// Runs the command-line binary with `args`, capturing both streams.
inline CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::filesystem::path base =
        std::filesystem::temp_directory_path() /
        ("posetrack_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    const std::filesystem::path out_path = base.string() + ".out";
    const std::filesystem::path err_path = base.string() + ".err";
    const std::string cmd = std::string(POSETRACK_CLI) + " " + args + " >" + out_path.string() +
                            " 2>" + err_path.string();
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = (raw == -1) ? -1 : WEXITSTATUS(raw);
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    std::error_code ec;
    std::filesystem::remove(out_path, ec);
    std::filesystem::remove(err_path, ec);
    return r;
}
#endif

}  // namespace testutil
