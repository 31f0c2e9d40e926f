// Command-line front end: synthetic scenes, model training, tracking,
// single-instance solves, and evaluation. Every subcommand is deterministic;
// wall-clock timing goes to the error stream only.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "posetrack/graph.hpp"
#include "posetrack/ilp.hpp"
#include "posetrack/io.hpp"
#include "posetrack/logistic.hpp"
#include "posetrack/metrics.hpp"
#include "posetrack/model.hpp"
#include "posetrack/potentials.hpp"
#include "posetrack/solver.hpp"
#include "posetrack/synth.hpp"
#include "posetrack/tracker.hpp"
#include "posetrack/training.hpp"
#include "posetrack/version.hpp"

namespace {

using namespace posetrack;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Stopwatch {
public:
    explicit Stopwatch(std::string label) : label_(std::move(label)), start_(clock::now()) {}
    ~Stopwatch() {
        const double s = std::chrono::duration<double>(clock::now() - start_).count();
        std::cerr << label_ << " took " << s << " s\n";
    }

private:
    using clock = std::chrono::steady_clock;
    std::string label_;
    clock::time_point start_;
};

// ---- flat TOML subset for tracker configs --------------------------------------
// `key = value` per line, `#` comments, blank lines. Recognized keys:
// batch_size, tau, min_frames, min_avg_nodes, nms_iou.

double parse_config_number(const std::string& text, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::runtime_error(where + ": not a number: '" + text + "'");
    }
    if (used != text.size()) throw std::runtime_error(where + ": trailing junk in '" + text + "'");
    return v;
}

int parse_config_int(const std::string& text, const std::string& where) {
    const double v = parse_config_number(text, where);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw std::runtime_error(where + ": expected an integer, got '" + text + "'");
    return i;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void apply_config_file(const std::string& path, TrackerConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = path + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw std::runtime_error(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "batch_size")
            cfg.batch_size = parse_config_int(value, where);
        else if (key == "tau")
            cfg.tau = parse_config_int(value, where);
        else if (key == "min_frames")
            cfg.min_frames = parse_config_int(value, where);
        else if (key == "min_avg_nodes")
            cfg.min_avg_nodes = parse_config_number(value, where);
        else if (key == "nms_iou")
            cfg.nms_iou = parse_config_number(value, where);
        else
            throw std::runtime_error(where + ": unknown key '" + key + "'");
    }
}

// ---- synth ----------------------------------------------------------------------

void register_synth(CLI::App& app) {
    struct Opts {
        SynthConfig cfg;
        std::string out_dir;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* s = app.add_subcommand("synth", "Generate a synthetic scene: ground truth poses, "
                                              "detections, and point correspondences");
    s->add_option("--seed", o->cfg.seed, "Generator seed");
    s->add_option("--persons", o->cfg.persons, "Number of persons");
    s->add_option("--frames", o->cfg.frames, "Number of frames");
    s->add_option("--joints", o->cfg.joint_count, "Joint types per person");
    s->add_option("--width", o->cfg.width, "Scene width, px");
    s->add_option("--height", o->cfg.height, "Scene height, px");
    s->add_option("--speed", o->cfg.speed, "Root speed, px/frame");
    s->add_option("--motion-noise", o->cfg.motion_noise, "Per-frame root jitter sigma, px");
    s->add_option("--noise", o->cfg.noise, "Detection position noise sigma, px");
    s->add_option("--miss", o->cfg.miss_rate, "Probability a true detection is dropped");
    s->add_option("--fp", o->cfg.fp_rate, "Expected false positives per frame");
    s->add_option("--occlusions", o->cfg.occlusions, "Occlusion episode count");
    s->add_option("--occlusion-min", o->cfg.occlusion_min, "Shortest episode, frames");
    s->add_option("--occlusion-max", o->cfg.occlusion_max, "Longest episode, frames");
    s->add_flag("--detect-occluded", o->cfg.detect_occluded, "Emit detections for occluded joints");
    s->add_option("--scale-min", o->cfg.scale_min, "Smallest person scale");
    s->add_option("--scale-max", o->cfg.scale_max, "Largest person scale");
    s->add_option("--corr-gap", o->cfg.corr_gap, "Largest frame gap with correspondences");
    s->add_option("--out-dir", o->out_dir, "Output directory")->required();
    s->callback([o] {
        const SynthOutput out = generate(o->cfg);
        const std::filesystem::path dir(o->out_dir);
        std::filesystem::create_directories(dir);
        write_annotations(dir / "annotations.jsonl", out.gt);
        write_detections(dir / "detections.jsonl", out.detections);
        write_correspondences(dir / "correspondences.jsonl", out.correspondences.records());
        std::cerr << "wrote " << out.gt.size() << " poses, " << out.detections.size()
                  << " detections, " << out.correspondences.records().size()
                  << " correspondence records to " << dir.string() << "\n";
    });
}

// ---- training -------------------------------------------------------------------

struct TrainOpts {
    std::string detections;
    std::string gt;
    std::string correspondences;  // temporal only
    std::string out;
    int tau = kDefaultTau;
    int joints = kDefaultJointCount;  // spatial only
    double pckh_ratio = 0.2;
    TrainConfig train;
    std::uint64_t seed = 0;  // reserved; training is deterministic
};

void add_common_train_options(CLI::App* s, const std::shared_ptr<TrainOpts>& o) {
    s->add_option("--detections", o->detections, "Detections file")->required();
    s->add_option("--gt", o->gt, "Ground-truth annotations file")->required();
    s->add_option("--tau", o->tau, "Temporal edge reach used to build the graph");
    s->add_option("--pckh-ratio", o->pckh_ratio, "Head-box diagonal ratio for the match threshold");
    s->add_option("--l2", o->train.l2, "L2 penalty on the weights");
    s->add_option("--lr", o->train.learning_rate, "Gradient-descent step size");
    s->add_option("--epochs", o->train.epochs, "Full-batch epochs");
    s->add_option("--seed", o->seed, "Reserved; training is deterministic");
    s->add_option("--out", o->out, "Output model file")->required();
}

void register_train_temporal(CLI::App& app) {
    auto o = std::make_shared<TrainOpts>();
    CLI::App* s = app.add_subcommand("train-temporal",
                                     "Fit the temporal edge probability model from ground truth");
    add_common_train_options(s, o);
    s->add_option("--correspondences", o->correspondences, "Point correspondences file")->required();
    s->callback([o] {
        const std::vector<Detection> dets = read_detections(o->detections);
        const std::vector<GroundTruthPose> gt = read_annotations(o->gt);
        const CorrespondenceSet corr(read_correspondences(o->correspondences));
        const SpatioTemporalGraph g = build_graph(dets, o->tau);
        const std::vector<TrainSample> samples =
            make_temporal_samples(g, corr, gt, o->pckh_ratio);
        const LogisticModel model = train_logistic(samples, o->train);
        write_logistic_model(o->out, model);
        std::cerr << "trained on " << samples.size() << " temporal edge samples, final loss "
                  << logistic_loss(model, samples, o->train.l2) << "\n";
    });
}

void register_train_spatial(CLI::App& app) {
    auto o = std::make_shared<TrainOpts>();
    CLI::App* s = app.add_subcommand(
        "train-spatial", "Fit the cross-type spatial edge probability model from ground truth");
    add_common_train_options(s, o);
    s->add_option("--joints", o->joints, "Joint types (sets the pair one-hot width)");
    s->callback([o] {
        const std::vector<Detection> dets = read_detections(o->detections);
        const std::vector<GroundTruthPose> gt = read_annotations(o->gt);
        const SpatioTemporalGraph g = build_graph(dets, o->tau);
        const std::vector<TrainSample> samples =
            make_spatial_samples(g, gt, o->pckh_ratio, o->joints);
        const LogisticModel model = train_logistic(samples, o->train);
        write_logistic_model(o->out, model);
        std::cerr << "trained on " << samples.size() << " spatial edge samples, final loss "
                  << logistic_loss(model, samples, o->train.l2) << "\n";
    });
}

// ---- track ----------------------------------------------------------------------

json window_stats_json(const TrackReport& report, const PoseTracks& tracks) {
    json doc;
    doc["windows"] = json::array();
    for (const WindowReport& w : report.windows) {
        json jw;
        jw["first_frame"] = w.first_frame;
        jw["last_frame"] = w.last_frame;
        jw["num_vars"] = w.num_vars;
        jw["num_fixed"] = w.num_fixed;
        jw["nodes_explored"] = w.solve.nodes_explored;
        jw["constraints_added"] = w.solve.constraints_added;
        jw["proven_optimal"] = w.solve.proven_optimal;
        doc["windows"].push_back(std::move(jw));
    }
    doc["non_optimal_windows"] = report.non_optimal_windows;
    doc["selected_nodes"] = report.selected_nodes;
    doc["partitions_before_filter"] = report.partitions_before_filter;
    doc["partitions_after_filter"] = report.partitions_after_filter;
    doc["tracks"] = tracks.tracks.size();
    return doc;
}

void register_track(CLI::App& app) {
    struct Opts {
        std::string detections;
        std::string correspondences;
        std::string temporal_model;
        std::string spatial_model;
        std::string spatial_edges;
        std::string config;
        std::string out;
        std::string stats;
        TrackerConfig cfg;
        int joints = kDefaultJointCount;
        bool no_spatial_transitivity = false;
        bool no_temporal_transitivity = false;
        bool no_st_transitivity = false;
        bool no_st_consistency = false;
        CLI::App* cmd = nullptr;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* s = app.add_subcommand("track", "Group detections into pose tracks");
    o->cmd = s;
    s->add_option("--detections", o->detections, "Detections file")->required();
    s->add_option("--correspondences", o->correspondences, "Point correspondences file")->required();
    s->add_option("--temporal-model", o->temporal_model, "Temporal edge model file")->required();
    s->add_option("--spatial-model", o->spatial_model, "Cross-type spatial edge model file");
    s->add_option("--spatial-edges", o->spatial_edges, "Cross-type edge probability file");
    s->add_option("--config", o->config, "Config file (key = value lines)");
    s->add_option("--out", o->out, "Output tracks file")->required();
    s->add_option("--stats", o->stats, "Optional run statistics JSON file");
    s->add_option("--joints", o->joints, "Joint types (sets the spatial model feature width)");
    s->add_option("--batch-size", o->cfg.batch_size, "Frames per window");
    s->add_option("--tau", o->cfg.tau, "Temporal edge reach, frames");
    s->add_option("--min-frames", o->cfg.min_frames, "Minimum track frame span");
    s->add_option("--min-avg-nodes", o->cfg.min_avg_nodes, "Minimum members per occupied frame");
    s->add_option("--nms-iou", o->cfg.nms_iou, "Suppression overlap threshold");
    s->add_option("--time-limit", o->cfg.solver.time_limit_seconds, "Per-window solve seconds, 0 = off");
    s->add_option("--node-limit", o->cfg.solver.node_limit, "Per-window search node cap, 0 = off");
    s->add_flag("--no-spatial-transitivity", o->no_spatial_transitivity,
                "Drop within-frame transitivity rows");
    s->add_flag("--no-temporal-transitivity", o->no_temporal_transitivity,
                "Drop same-type temporal transitivity rows");
    s->add_flag("--no-st-transitivity", o->no_st_transitivity,
                "Drop mixed spatio-temporal transitivity rows");
    s->add_flag("--no-st-consistency", o->no_st_consistency,
                "Drop spatio-temporal consistency rows");
    s->callback([o] {
        // Defaults, then the config file, then explicit flags.
        TrackerConfig file_cfg;
        if (!o->config.empty()) apply_config_file(o->config, file_cfg);
        TrackerConfig cfg = file_cfg;
        if (o->cmd->count("--batch-size")) cfg.batch_size = o->cfg.batch_size;
        if (o->cmd->count("--tau")) cfg.tau = o->cfg.tau;
        if (o->cmd->count("--min-frames")) cfg.min_frames = o->cfg.min_frames;
        if (o->cmd->count("--min-avg-nodes")) cfg.min_avg_nodes = o->cfg.min_avg_nodes;
        if (o->cmd->count("--nms-iou")) cfg.nms_iou = o->cfg.nms_iou;
        cfg.solver = o->cfg.solver;
        cfg.families.transitivity_spatial = !o->no_spatial_transitivity;
        cfg.families.transitivity_temporal = !o->no_temporal_transitivity;
        cfg.families.transitivity_spatio_temporal = !o->no_st_transitivity;
        cfg.families.consistency_spatio_temporal = !o->no_st_consistency;

        const std::vector<Detection> dets = read_detections(o->detections);
        const CorrespondenceSet corr(read_correspondences(o->correspondences));
        const LogisticModel temporal_model = read_logistic_model(o->temporal_model);
        SpatialParams spatial;
        spatial.joint_count = o->joints;
        if (!o->spatial_edges.empty()) spatial.table = read_edge_probs(o->spatial_edges);
        if (!o->spatial_model.empty()) spatial.model = read_logistic_model(o->spatial_model);

        TrackReport report;
        PoseTracks tracks;
        {
            Stopwatch timer("track");
            tracks = track(dets, corr, temporal_model, spatial, cfg, &report);
        }
        for (const WindowReport& w : report.windows)
            if (!w.solve.proven_optimal)
                std::cerr << "warning: window " << w.first_frame << ".." << w.last_frame
                          << " hit a solve limit; using its best assignment\n";
        write_tracks(o->out, tracks);
        if (!o->stats.empty())
            atomic_write(o->stats, window_stats_json(report, tracks).dump(2) + "\n");
    });
}

// ---- solve / oracle -------------------------------------------------------------

void register_solve(CLI::App& app) {
    struct Opts {
        std::string graph;
        std::string potentials;
        std::string dump_lp;
        SolverConfig cfg;
        bool oracle = false;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* s = app.add_subcommand("solve", "Solve one instance and print its objective");
    s->add_option("--graph", o->graph, "Graph file")->required();
    s->add_option("--potentials", o->potentials, "Potentials file")->required();
    s->add_option("--time-limit", o->cfg.time_limit_seconds, "Solve seconds, 0 = off");
    s->add_option("--node-limit", o->cfg.node_limit, "Search node cap, 0 = off");
    s->add_option("--dump-lp", o->dump_lp, "Write the instance in LP text form to this file");
    s->add_flag("--oracle", o->oracle, "Also solve by exhaustive enumeration and compare");
    s->callback([o] {
        const SpatioTemporalGraph g = read_graph(o->graph);
        const PotentialTable pot = read_potentials(o->potentials, g);
        const IlpInstance inst = build_instance(g, pot);
        if (!o->dump_lp.empty()) {
            std::ostringstream lp;
            write_lp(inst, lp);
            atomic_write(o->dump_lp, lp.str());
        }
        SolveStats stats;
        Assignment best;
        {
            Stopwatch timer("solve");
            best = solve(inst, o->cfg, &stats);
        }
        std::cerr << "nodes_explored " << stats.nodes_explored << ", constraints_added "
                  << stats.constraints_added << ", proven_optimal "
                  << (stats.proven_optimal ? "true" : "false") << "\n";
        std::cout << "objective " << fmt_double(best.objective) << "\n";
        if (o->oracle) {
            const BruteForceResult bf = brute_force(inst);
            std::cout << "oracle_objective " << fmt_double(bf.best.objective) << "\n";
            if (bf.best.objective != best.objective)
                throw std::runtime_error("solver and enumeration objectives differ: " +
                                         fmt_double(best.objective) + " vs " +
                                         fmt_double(bf.best.objective));
        }
    });
}

void register_oracle(CLI::App& app) {
    struct Opts {
        std::string graph;
        std::string potentials;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* s = app.add_subcommand(
        "oracle", "Solve one small instance by exhaustive enumeration (at most 24 variables)");
    s->add_option("--graph", o->graph, "Graph file")->required();
    s->add_option("--potentials", o->potentials, "Potentials file")->required();
    s->callback([o] {
        const SpatioTemporalGraph g = read_graph(o->graph);
        const PotentialTable pot = read_potentials(o->potentials, g);
        const BruteForceResult bf = brute_force(build_instance(g, pot));
        std::cout << "objective " << fmt_double(bf.best.objective) << "\n";
        std::cout << "feasible_count " << bf.feasible_count << "\n";
    });
}

// ---- eval -----------------------------------------------------------------------

void register_eval(CLI::App& app) {
    struct Opts {
        std::string gt;
        std::string pred;
        std::string out;
        double pckh_ratio = 0.2;
        bool occlusion_aware = false;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* s = app.add_subcommand("eval", "Score predicted tracks against ground truth");
    s->add_option("--gt", o->gt, "Ground-truth annotations file")->required();
    s->add_option("--pred", o->pred, "Predicted tracks file")->required();
    s->add_option("--pckh-ratio", o->pckh_ratio, "Head-box diagonal ratio for the match threshold");
    s->add_flag("--occlusion-aware", o->occlusion_aware,
                "Score occluded joints only when a prediction exists for them");
    s->add_option("--out", o->out, "Report file (default: standard output)");
    s->callback([o] {
        const std::vector<GroundTruthPose> gt = read_annotations(o->gt);
        const PoseTracks tracks = read_tracks(o->pred);
        const EvalReport r = evaluate(tracks, gt, PckhConfig{o->pckh_ratio}, o->occlusion_aware);
        if (o->out.empty())
            std::cout << report_to_string(r);
        else
            write_report(o->out, r);
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-person pose tracking toolkit"};
    app.set_version_flag("--version", std::string("posetrack ") + posetrack::kVersion +
                                          " format-r" + std::to_string(posetrack::kFormatRevision));
    app.require_subcommand(1);
    register_synth(app);
    register_train_temporal(app);
    register_train_spatial(app);
    register_track(app);
    register_solve(app);
    register_oracle(app);
    register_eval(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << app.version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
