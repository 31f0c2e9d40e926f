#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "posetrack/graph.hpp"
#include "posetrack/io.hpp"
#include "posetrack/model.hpp"
#include "posetrack/potentials.hpp"

#include "helpers.hpp"

using namespace posetrack;
using testutil::CliResult;
using testutil::det;
using testutil::read_file;
using testutil::run_cli;
using testutil::TempDir;

namespace {

std::string q(const std::filesystem::path& p) { return p.string(); }

// One scene generated and modeled once; reused by the pipeline tests below.
struct Pipeline {
    TempDir dir{"cli"};
    std::filesystem::path scene = dir / "scene";
    std::filesystem::path detections = scene / "detections.jsonl";
    std::filesystem::path annotations = scene / "annotations.jsonl";
    std::filesystem::path correspondences = scene / "correspondences.jsonl";
    std::filesystem::path temporal_model = dir / "temporal.json";
    std::filesystem::path spatial_model = dir / "spatial.json";

    Pipeline() {
        CliResult r = run_cli("synth --seed 5 --persons 2 --frames 12 --joints 2 --corr-gap 2 "
                              "--out-dir " + q(scene));
        REQUIRE(r.exit_code == 0);
        r = run_cli("train-temporal --detections " + q(detections) + " --gt " + q(annotations) +
                    " --correspondences " + q(correspondences) + " --tau 2 --out " +
                    q(temporal_model));
        REQUIRE(r.exit_code == 0);
        r = run_cli("train-spatial --detections " + q(detections) + " --gt " + q(annotations) +
                    " --tau 2 --joints 2 --out " + q(spatial_model));
        REQUIRE(r.exit_code == 0);
    }

    std::string track_args() const {
        return "track --detections " + q(detections) + " --correspondences " +
               q(correspondences) + " --temporal-model " + q(temporal_model) +
               " --spatial-model " + q(spatial_model) + " --joints 2 --tau 2";
    }
};

}  // namespace

TEST_CASE("version flag prints the tool and format revision") {
    const CliResult r = run_cli("--version");
    CHECK(r.exit_code == 0);
    CHECK(r.out == "posetrack 0.1.0 format-r1\n");
}

TEST_CASE("running without a subcommand is a usage error") {
    const CliResult r = run_cli("");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("unknown flags are usage errors with help text") {
    const CliResult r = run_cli("synth --bogus 3 --out-dir /tmp/nowhere");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);
}

TEST_CASE("help lists every subcommand") {
    const CliResult r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* name :
         {"synth", "train-temporal", "train-spatial", "track", "solve", "oracle", "eval"})
        CHECK(r.out.find(name) != std::string::npos);
}

TEST_CASE("missing input files exit with a runtime error") {
    TempDir dir("cli_missing");
    const CliResult r = run_cli("track --detections " + q(dir / "absent.jsonl") +
                                " --correspondences " + q(dir / "absent.jsonl") +
                                " --temporal-model " + q(dir / "absent.json") + " --out " +
                                q(dir / "tracks.jsonl"));
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("synth output is deterministic across runs") {
    TempDir dir("cli_synth");
    const std::string args = "synth --seed 9 --persons 2 --frames 6 --joints 3 --noise 1.0 "
                             "--miss 0.1 --fp 0.5 --corr-gap 2 --out-dir ";
    REQUIRE(run_cli(args + q(dir / "a")).exit_code == 0);
    REQUIRE(run_cli(args + q(dir / "b")).exit_code == 0);
    for (const char* name : {"annotations.jsonl", "detections.jsonl", "correspondences.jsonl"}) {
        const std::string a = read_file(dir / "a" / name);
        REQUIRE(!a.empty());
        CHECK(a == read_file(dir / "b" / name));
    }
}

TEST_CASE("pipeline: synth, train, track, eval reaches a perfect score on a clean scene") {
    Pipeline p;
    const std::filesystem::path tracks = p.dir / "tracks.jsonl";
    const std::filesystem::path stats = p.dir / "stats.json";
    CliResult r = run_cli(p.track_args() + " --batch-size 6 --min-frames 8 --min-avg-nodes 1.5" +
                          " --out " + q(tracks) + " --stats " + q(stats));
    REQUIRE(r.exit_code == 0);

    const json s = json::parse(read_file(stats));
    CHECK(s.at("windows").size() >= 2);
    CHECK(s.at("non_optimal_windows").get<int>() == 0);
    CHECK(s.at("tracks").get<int>() == 2);

    const std::filesystem::path report = p.dir / "report.json";
    r = run_cli("eval --gt " + q(p.annotations) + " --pred " + q(tracks) + " --out " + q(report));
    REQUIRE(r.exit_code == 0);
    const json rep = json::parse(read_file(report));
    CHECK(rep.at("MOTA").get<double>() == 100.0);
    CHECK(rep.at("mAP").get<double>() == 100.0);
    CHECK(rep.at("IDs").get<int>() == 0);
    CHECK(rep.at("FM").get<int>() == 0);

    SECTION("eval without --out prints the report to standard output") {
        const CliResult direct = run_cli("eval --gt " + q(p.annotations) + " --pred " + q(tracks));
        CHECK(direct.exit_code == 0);
        CHECK(direct.out == read_file(report));
    }
    SECTION("rerunning track reproduces the output byte for byte") {
        const std::filesystem::path again = p.dir / "tracks2.jsonl";
        REQUIRE(run_cli(p.track_args() + " --batch-size 6 --min-frames 8 --min-avg-nodes 1.5" +
                        " --out " + q(again))
                    .exit_code == 0);
        CHECK(read_file(again) == read_file(tracks));
    }
}

TEST_CASE("config file values apply and explicit flags override them") {
    Pipeline p;
    const std::filesystem::path cfg = p.dir / "tracker.cfg";
    {
        std::ofstream out(cfg);
        out << "# strict span filter\n";
        out << "min_frames = 99\n";
        out << "min_avg_nodes = 1.5\n";
    }
    const std::filesystem::path strict = p.dir / "strict.jsonl";
    REQUIRE(run_cli(p.track_args() + " --config " + q(cfg) + " --out " + q(strict)).exit_code == 0);
    CHECK(read_tracks(strict).tracks.empty());  // nothing spans 99 frames

    const std::filesystem::path loose = p.dir / "loose.jsonl";
    REQUIRE(run_cli(p.track_args() + " --config " + q(cfg) + " --min-frames 8 --out " + q(loose))
                .exit_code == 0);
    CHECK(read_tracks(loose).tracks.size() == 2);

    SECTION("unknown config keys are rejected") {
        const std::filesystem::path bad = p.dir / "bad.cfg";
        {
            std::ofstream out(bad);
            out << "min_frame = 9\n";
        }
        const CliResult r =
            run_cli(p.track_args() + " --config " + q(bad) + " --out " + q(p.dir / "x.jsonl"));
        CHECK(r.exit_code == 1);
        CHECK(r.err.find("unknown key") != std::string::npos);
    }
}

TEST_CASE("solve agrees with the enumeration oracle and dumps the instance") {
    TempDir dir("cli_solve");
    const std::vector<Detection> dets{det(0, 0, 0, 0.0, 0.0),   det(1, 0, 1, 0.0, 30.0),
                                      det(2, 1, 0, 2.0, 0.0),   det(3, 1, 1, 2.0, 30.0)};
    const SpatioTemporalGraph g = build_graph(dets, 1);
    PotentialTable pot;
    pot.node_cost.assign(g.nodes.size(), -1.0);
    pot.spatial_cost.assign(g.spatial_edges.size(), -0.5);
    pot.temporal_cost.assign(g.temporal_edges.size(), -0.7);
    const std::filesystem::path graph_path = dir / "graph.json";
    const std::filesystem::path pot_path = dir / "potentials.json";
    write_graph(graph_path, g);
    write_potentials(pot_path, g, pot);

    const std::filesystem::path lp = dir / "instance.lp";
    const CliResult r = run_cli("solve --graph " + q(graph_path) + " --potentials " + q(pot_path) +
                                " --oracle --dump-lp " + q(lp));
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("objective ") == 0);
    const auto newline = r.out.find('\n');
    const std::string first = r.out.substr(std::string("objective ").size(),
                                           newline - std::string("objective ").size());
    CHECK(r.out.find("oracle_objective " + first + "\n") != std::string::npos);

    const std::string lp_text = read_file(lp);
    CHECK(lp_text.rfind("Minimize", 0) == 0);
    CHECK(lp_text.find("Subject To") != std::string::npos);

    const CliResult oracle = run_cli("oracle --graph " + q(graph_path) + " --potentials " +
                                     q(pot_path));
    REQUIRE(oracle.exit_code == 0);
    CHECK(oracle.out.find("objective " + first + "\n") == 0);
    CHECK(oracle.out.find("feasible_count ") != std::string::npos);
}
