#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "posetrack/graph.hpp"
#include "posetrack/model.hpp"

namespace posetrack {

struct SynthConfig {
    std::uint64_t seed = 1;
    int persons = 2;
    int frames = 41;
    int joint_count = kDefaultJointCount;
    double width = 3000.0;
    double height = 3000.0;
    double speed = 2.0;         // root velocity magnitude, px/frame
    double motion_noise = 0.0;  // per-frame root jitter sigma
    double noise = 0.0;         // detection position noise sigma; also correspondence jitter
    double miss_rate = 0.0;     // probability a true joint detection is dropped
    double fp_rate = 0.0;       // expected false positives per frame
    int occlusions = 0;         // occlusion episode count
    int occlusion_min = 3;      // episode length range, frames
    int occlusion_max = 8;
    bool detect_occluded = false;  // emit detections for occluded joints
    double scale_min = 1.0;
    double scale_max = 1.0;
    int corr_gap = kDefaultTau;  // correspondence records for frame gaps 1..corr_gap
};

struct SynthOutput {
    std::vector<GroundTruthPose> gt;
    std::vector<Detection> detections;
    CorrespondenceSet correspondences;
};

namespace synth_constants {
inline constexpr double kSkeletonRadius = 28.0;  // rigid ring of joints around the root
inline constexpr double kHeadBoxSide = 36.0;     // centered on joint 0
inline constexpr double kGridSpacing = 500.0;    // initial person placement
inline constexpr double kGridMargin = 200.0;
inline constexpr double kPlacementJitter = 50.0;  // uniform in +-this, per axis
inline constexpr double kBounceInset = 100.0;     // roots reflect off this inner border
inline constexpr int kCorrGridSide = 5;           // points per axis, per person
inline constexpr double kCorrGridSpacing = 15.0;
inline constexpr double kFpScoreLo = 0.5;  // above the cost sign flip at 0.5 on purpose:
inline constexpr double kFpScoreHi = 0.7;  // partition filtering must remove these
inline constexpr double kScoreLo = 0.75;   // true detection scores
inline constexpr double kScoreHi = 0.95;
}  // namespace synth_constants

// Deterministic generator: a 64-bit Mersenne Twister with uniforms taken as
// (next() >> 11) * 2^-53 and normals from the Box-Muller transform. gauss2
// consumes exactly two uniforms and gauss discards the second output, so the
// draw count per event is fixed and documented.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int n) {  // {0, ..., n-1}, n >= 1
        const int v = static_cast<int>(uniform() * static_cast<double>(n));
        return v >= n ? n - 1 : v;
    }
    bool bernoulli(double p) { return uniform() < p; }

    std::pair<double, double> gauss2() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }
    double gauss() { return gauss2().first; }

private:
    std::mt19937_64 gen_;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream per generation stage, so changing one rate (e.g. the miss
// rate) never perturbs the draws of the other stages.
inline Rng stage_rng(std::uint64_t seed, std::uint64_t stage) {
    return Rng(splitmix64(seed ^ (stage * 0x9e3779b97f4a7c15ULL + stage)));
}

}  // namespace detail

inline void validate(const SynthConfig& cfg) {
    if (cfg.persons < 1) throw std::invalid_argument("persons must be >= 1");
    if (cfg.frames < 1) throw std::invalid_argument("frames must be >= 1");
    if (cfg.joint_count < 1) throw std::invalid_argument("joint_count must be >= 1");
    if (!(cfg.width > 0.0) || !(cfg.height > 0.0))
        throw std::invalid_argument("image size must be positive");
    if (!(cfg.speed >= 0.0)) throw std::invalid_argument("speed must be >= 0");
    if (!(cfg.motion_noise >= 0.0) || !(cfg.noise >= 0.0))
        throw std::invalid_argument("noise sigmas must be >= 0");
    if (!(cfg.miss_rate >= 0.0 && cfg.miss_rate <= 1.0))
        throw std::invalid_argument("miss_rate must be in [0, 1]");
    if (!(cfg.fp_rate >= 0.0)) throw std::invalid_argument("fp_rate must be >= 0");
    if (cfg.occlusions < 0) throw std::invalid_argument("occlusions must be >= 0");
    if (cfg.occlusion_min < 1 || cfg.occlusion_max < cfg.occlusion_min)
        throw std::invalid_argument("occlusion length range must satisfy 1 <= min <= max");
    if (!(cfg.scale_min > 0.0) || !(cfg.scale_max >= cfg.scale_min))
        throw std::invalid_argument("scale range must satisfy 0 < min <= max");
    if (cfg.corr_gap < 1) throw std::invalid_argument("corr_gap must be >= 1");
}

// Builds ground truth, detections, and correspondences for a scene of rigid
// ring skeletons moving at constant velocity with wall bounces. Stages draw
// from independent generator streams in a fixed order: person setup, root
// motion, occlusions, detections, false positives, correspondences.
inline SynthOutput generate(const SynthConfig& cfg) {
    validate(cfg);
    namespace sc = synth_constants;
    SynthOutput out;

    const int P = cfg.persons;
    const int J = cfg.joint_count;
    const int F = cfg.frames;

    // stage 1: person setup (placement, velocity direction, scale)
    Rng setup = detail::stage_rng(cfg.seed, 1);
    std::vector<Vec2> root0(static_cast<std::size_t>(P));
    std::vector<Vec2> velocity(static_cast<std::size_t>(P));
    std::vector<double> scale(static_cast<std::size_t>(P));
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(P))));
    for (int p = 0; p < P; ++p) {
        const double jx = setup.uniform(-sc::kPlacementJitter, sc::kPlacementJitter);
        const double jy = setup.uniform(-sc::kPlacementJitter, sc::kPlacementJitter);
        root0[static_cast<std::size_t>(p)] =
            Vec2{sc::kGridMargin + static_cast<double>(p % cols) * sc::kGridSpacing + jx,
                 sc::kGridMargin + static_cast<double>(p / cols) * sc::kGridSpacing + jy};
        const double theta = setup.uniform(0.0, 2.0 * std::numbers::pi);
        velocity[static_cast<std::size_t>(p)] = Vec2{cfg.speed * std::cos(theta),
                                                     cfg.speed * std::sin(theta)};
        scale[static_cast<std::size_t>(p)] = setup.uniform(cfg.scale_min, cfg.scale_max);
    }

    // stage 2: root trajectories (constant velocity + noise, reflecting walls)
    Rng motion = detail::stage_rng(cfg.seed, 2);
    std::vector<std::vector<Vec2>> root(static_cast<std::size_t>(P),
                                        std::vector<Vec2>(static_cast<std::size_t>(F)));
    for (int p = 0; p < P; ++p) {
        Vec2 pos = root0[static_cast<std::size_t>(p)];
        Vec2 vel = velocity[static_cast<std::size_t>(p)];
        root[static_cast<std::size_t>(p)][0] = pos;
        for (int f = 1; f < F; ++f) {
            const auto [nx, ny] = motion.gauss2();
            pos = pos + vel + Vec2{cfg.motion_noise * nx, cfg.motion_noise * ny};
            const auto reflect = [](double v, double lo, double hi, double& vel_axis) {
                if (v < lo) {
                    vel_axis = -vel_axis;
                    return lo + (lo - v);
                }
                if (v > hi) {
                    vel_axis = -vel_axis;
                    return hi - (v - hi);
                }
                return v;
            };
            pos.x = reflect(pos.x, sc::kBounceInset, cfg.width - sc::kBounceInset, vel.x);
            pos.y = reflect(pos.y, sc::kBounceInset, cfg.height - sc::kBounceInset, vel.y);
            root[static_cast<std::size_t>(p)][static_cast<std::size_t>(f)] = pos;
        }
    }

    const auto joint_pos = [&](int p, int f, int j) {
        const double angle =
            2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(J);
        return root[static_cast<std::size_t>(p)][static_cast<std::size_t>(f)] +
               Vec2{sc::kSkeletonRadius * std::cos(angle), sc::kSkeletonRadius * std::sin(angle)};
    };

    // stage 3: occlusion episodes
    Rng occ = detail::stage_rng(cfg.seed, 3);
    std::vector<std::vector<std::vector<bool>>> occluded(
        static_cast<std::size_t>(P),
        std::vector<std::vector<bool>>(static_cast<std::size_t>(F),
                                       std::vector<bool>(static_cast<std::size_t>(J), false)));
    for (int e = 0; e < cfg.occlusions; ++e) {
        const int p = occ.uniform_int(P);
        const int j = occ.uniform_int(J);
        const int start = occ.uniform_int(F);
        const int len = cfg.occlusion_min + occ.uniform_int(cfg.occlusion_max - cfg.occlusion_min + 1);
        for (int f = start; f < std::min(start + len, F); ++f)
            occluded[static_cast<std::size_t>(p)][static_cast<std::size_t>(f)]
                    [static_cast<std::size_t>(j)] = true;
    }

    // ground truth
    for (int f = 0; f < F; ++f) {
        for (int p = 0; p < P; ++p) {
            GroundTruthPose pose;
            pose.frame = f;
            pose.person_id = p;
            const Vec2 head = joint_pos(p, f, 0);
            const double h = sc::kHeadBoxSide / 2.0;
            pose.head_box = Rect{head.x - h, head.y - h, head.x + h, head.y + h};
            for (int j = 0; j < J; ++j)
                pose.joints.push_back(GtJoint{
                    JointType{j}, joint_pos(p, f, j),
                    occluded[static_cast<std::size_t>(p)][static_cast<std::size_t>(f)]
                            [static_cast<std::size_t>(j)]});
            out.gt.push_back(std::move(pose));
        }
    }

    // stage 4: true detections. Every joint consumes the same draws (noise
    // pair, miss, score) whether or not it is emitted, so changing the miss
    // rate or occlusions never moves any other detection.
    Rng det = detail::stage_rng(cfg.seed, 4);
    struct PendingDetection {
        int frame;
        int order;  // false positives sort after true detections within a frame
        Detection d;
    };
    std::vector<PendingDetection> pending;
    for (int f = 0; f < F; ++f) {
        for (int p = 0; p < P; ++p) {
            for (int j = 0; j < J; ++j) {
                const auto [nx, ny] = det.gauss2();
                const bool missed = det.bernoulli(cfg.miss_rate);
                const double score = det.uniform(sc::kScoreLo, sc::kScoreHi);
                const bool is_occluded = occluded[static_cast<std::size_t>(p)]
                                                 [static_cast<std::size_t>(f)]
                                                 [static_cast<std::size_t>(j)];
                if (missed || (is_occluded && !cfg.detect_occluded)) continue;
                Detection d;
                d.frame = f;
                d.joint = JointType{j};
                d.pos = joint_pos(p, f, j) + Vec2{cfg.noise * nx, cfg.noise * ny};
                d.score = score;
                d.scale = scale[static_cast<std::size_t>(p)];
                pending.push_back(PendingDetection{f, 0, std::move(d)});
            }
        }
    }

    // stage 5: false positives, count = floor(rate) + Bernoulli(fraction)
    Rng fp = detail::stage_rng(cfg.seed, 5);
    for (int f = 0; f < F; ++f) {
        const double whole = std::floor(cfg.fp_rate);
        int count = static_cast<int>(whole) + (fp.bernoulli(cfg.fp_rate - whole) ? 1 : 0);
        for (int i = 0; i < count; ++i) {
            Detection d;
            d.frame = f;
            d.joint = JointType{fp.uniform_int(J)};
            d.pos = Vec2{fp.uniform(0.0, cfg.width), fp.uniform(0.0, cfg.height)};
            d.score = fp.uniform(sc::kFpScoreLo, sc::kFpScoreHi);
            d.scale = fp.uniform(cfg.scale_min, cfg.scale_max);
            pending.push_back(PendingDetection{f, 1, std::move(d)});
        }
    }

    std::stable_sort(pending.begin(), pending.end(),
                     [](const PendingDetection& a, const PendingDetection& b) {
                         if (a.frame != b.frame) return a.frame < b.frame;
                         return a.order < b.order;
                     });
    int next_id = 0;
    for (PendingDetection& pd : pending) {
        pd.d.id = next_id++;
        out.detections.push_back(std::move(pd.d));
    }

    // stage 6: correspondences, one record per frame pair (gap 1..corr_gap);
    // a square grid of points around each person's root, carried by the exact
    // root motion plus jitter.
    Rng corr = detail::stage_rng(cfg.seed, 6);
    const int half = sc::kCorrGridSide / 2;
    for (int gap = 1; gap <= cfg.corr_gap; ++gap) {
        for (int fa = 0; fa + gap < F; ++fa) {
            const int fb = fa + gap;
            std::vector<Vec2> pts_a;
            std::vector<Vec2> pts_b;
            for (int p = 0; p < P; ++p) {
                const Vec2 ra = root[static_cast<std::size_t>(p)][static_cast<std::size_t>(fa)];
                const Vec2 rb = root[static_cast<std::size_t>(p)][static_cast<std::size_t>(fb)];
                for (int gy = -half; gy <= half; ++gy) {
                    for (int gx = -half; gx <= half; ++gx) {
                        const Vec2 offset{sc::kCorrGridSpacing * static_cast<double>(gx),
                                          sc::kCorrGridSpacing * static_cast<double>(gy)};
                        const auto [jx, jy] = corr.gauss2();
                        pts_a.push_back(ra + offset);
                        pts_b.push_back(rb + offset + Vec2{cfg.noise * jx, cfg.noise * jy});
                    }
                }
            }
            out.correspondences.add(Correspondence{fa, fb, std::move(pts_a), std::move(pts_b)});
        }
    }

    return out;
}

}  // namespace posetrack
