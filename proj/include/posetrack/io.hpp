#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "posetrack/model.hpp"

namespace posetrack {

using json = nlohmann::ordered_json;

// Writes content to a sibling temp file and renames it into place, so readers
// never observe a partially written file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace detail {

[[noreturn]] inline void line_error(const std::filesystem::path& path, std::size_t line,
                                    const std::string& msg) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + msg);
}

// Applies fn to each non-empty line parsed as JSON; errors carry line numbers.
inline void for_each_json_line(const std::filesystem::path& path,
                               const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            line_error(path, lineno, std::string("parse error: ") + e.what());
        }
        try {
            fn(j, lineno);
        } catch (const nlohmann::json::exception& e) {
            line_error(path, lineno, std::string("malformed record: ") + e.what());
        }
    }
}

inline double finite_number(const json& j, const char* field, const std::filesystem::path& path,
                            std::size_t line) {
    if (!j.contains(field) || !j.at(field).is_number())
        line_error(path, line, std::string("missing or non-numeric field '") + field + "'");
    const double v = j.at(field).get<double>();
    if (!std::isfinite(v)) line_error(path, line, std::string("non-finite field '") + field + "'");
    return v;
}

inline int int_field(const json& j, const char* field, const std::filesystem::path& path,
                     std::size_t line) {
    if (!j.contains(field) || !j.at(field).is_number_integer())
        line_error(path, line, std::string("missing or non-integer field '") + field + "'");
    return j.at(field).get<int>();
}

}  // namespace detail

// ---- detections: {"frame","joint","x","y","score","scale"} -----------------

// Ids are assigned sequentially in file order; scores are clamped on ingest.
inline std::vector<Detection> read_detections(const std::filesystem::path& path) {
    std::vector<Detection> out;
    detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
        Detection d;
        d.id = static_cast<int>(out.size());
        d.frame = detail::int_field(j, "frame", path, line);
        if (d.frame < 0) detail::line_error(path, line, "frame must be >= 0");
        d.joint.id = detail::int_field(j, "joint", path, line);
        if (d.joint.id < 0) detail::line_error(path, line, "joint must be >= 0");
        d.pos.x = detail::finite_number(j, "x", path, line);
        d.pos.y = detail::finite_number(j, "y", path, line);
        d.score = clamp_score(detail::finite_number(j, "score", path, line));
        d.scale = detail::finite_number(j, "scale", path, line);
        if (d.scale <= 0.0) detail::line_error(path, line, "scale must be positive");
        out.push_back(d);
    });
    return out;
}

inline std::string detections_to_string(const std::vector<Detection>& dets) {
    std::string out;
    for (const Detection& d : dets) {
        json j;
        j["frame"] = d.frame;
        j["joint"] = d.joint.id;
        j["x"] = d.pos.x;
        j["y"] = d.pos.y;
        j["score"] = d.score;
        j["scale"] = d.scale;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets) {
    atomic_write(path, detections_to_string(dets));
}

// ---- annotations: {"frame","person","head":[x0,y0,x1,y1],"joints":[...]} ---

inline std::vector<GroundTruthPose> read_annotations(const std::filesystem::path& path) {
    std::vector<GroundTruthPose> out;
    std::set<std::pair<int, int>> seen;
    detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
        GroundTruthPose p;
        p.frame = detail::int_field(j, "frame", path, line);
        p.person_id = detail::int_field(j, "person", path, line);
        if (!seen.emplace(p.frame, p.person_id).second)
            detail::line_error(path, line, "duplicate pose for (frame, person) (" +
                                               std::to_string(p.frame) + ", " +
                                               std::to_string(p.person_id) + ")");
        if (!j.contains("head") || !j.at("head").is_array() || j.at("head").size() != 4)
            detail::line_error(path, line, "field 'head' must be [x0, y0, x1, y1]");
        for (int k = 0; k < 4; ++k) {
            const auto& v = j.at("head").at(k);
            if (!v.is_number() || !std::isfinite(v.get<double>()))
                detail::line_error(path, line, "non-finite head coordinate");
        }
        p.head_box = Rect{j.at("head").at(0).get<double>(), j.at("head").at(1).get<double>(),
                          j.at("head").at(2).get<double>(), j.at("head").at(3).get<double>()};
        if (!(p.head_box.x0 < p.head_box.x1) || !(p.head_box.y0 < p.head_box.y1))
            detail::line_error(path, line, "head box must satisfy x0 < x1 and y0 < y1");
        if (!j.contains("joints") || !j.at("joints").is_array())
            detail::line_error(path, line, "missing 'joints' array");
        std::set<int> types;
        for (const auto& ij : j.at("joints")) {
            GtJoint g;
            g.type.id = detail::int_field(ij, "type", path, line);
            if (g.type.id < 0) detail::line_error(path, line, "joint type must be >= 0");
            if (!types.insert(g.type.id).second)
                detail::line_error(path, line, "duplicate joint type " + std::to_string(g.type.id) +
                                                   " within one pose");
            g.pos.x = detail::finite_number(ij, "x", path, line);
            g.pos.y = detail::finite_number(ij, "y", path, line);
            if (!ij.contains("occluded") || !ij.at("occluded").is_boolean())
                detail::line_error(path, line, "missing boolean field 'occluded'");
            g.occluded = ij.at("occluded").get<bool>();
            p.joints.push_back(g);
        }
        out.push_back(std::move(p));
    });
    return out;
}

inline std::string annotations_to_string(const std::vector<GroundTruthPose>& poses) {
    std::string out;
    for (const GroundTruthPose& p : poses) {
        json j;
        j["frame"] = p.frame;
        j["person"] = p.person_id;
        j["head"] = {p.head_box.x0, p.head_box.y0, p.head_box.x1, p.head_box.y1};
        json joints = json::array();
        for (const GtJoint& g : p.joints) {
            json ij;
            ij["type"] = g.type.id;
            ij["x"] = g.pos.x;
            ij["y"] = g.pos.y;
            ij["occluded"] = g.occluded;
            joints.push_back(std::move(ij));
        }
        j["joints"] = std::move(joints);
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline void write_annotations(const std::filesystem::path& path,
                              const std::vector<GroundTruthPose>& poses) {
    atomic_write(path, annotations_to_string(poses));
}

// ---- correspondences: {"frame_a","frame_b","points_a","points_b"} ----------

inline std::vector<Correspondence> read_correspondences(const std::filesystem::path& path) {
    std::vector<Correspondence> out;
    detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
        Correspondence c;
        c.frame_a = detail::int_field(j, "frame_a", path, line);
        c.frame_b = detail::int_field(j, "frame_b", path, line);
        if (c.frame_a == c.frame_b)
            detail::line_error(path, line, "frame_a and frame_b must differ");
        for (const char* field : {"points_a", "points_b"}) {
            if (!j.contains(field) || !j.at(field).is_array())
                detail::line_error(path, line, std::string("missing array field '") + field + "'");
            auto& dst = std::string(field) == "points_a" ? c.points_a : c.points_b;
            for (const auto& pt : j.at(field)) {
                if (!pt.is_array() || pt.size() != 2 || !pt.at(0).is_number() || !pt.at(1).is_number())
                    detail::line_error(path, line, "points must be [x, y] pairs");
                const double x = pt.at(0).get<double>();
                const double y = pt.at(1).get<double>();
                if (!std::isfinite(x) || !std::isfinite(y))
                    detail::line_error(path, line, "non-finite point coordinate");
                dst.push_back(Vec2{x, y});
            }
        }
        if (c.points_a.size() != c.points_b.size())
            detail::line_error(path, line, "points_a and points_b must have equal length");
        out.push_back(std::move(c));
    });
    return out;
}

inline std::string correspondences_to_string(const std::vector<Correspondence>& corrs) {
    std::string out;
    for (const Correspondence& c : corrs) {
        json j;
        j["frame_a"] = c.frame_a;
        j["frame_b"] = c.frame_b;
        json pa = json::array();
        for (const Vec2& p : c.points_a) pa.push_back({p.x, p.y});
        json pb = json::array();
        for (const Vec2& p : c.points_b) pb.push_back({p.x, p.y});
        j["points_a"] = std::move(pa);
        j["points_b"] = std::move(pb);
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline void write_correspondences(const std::filesystem::path& path,
                                  const std::vector<Correspondence>& corrs) {
    atomic_write(path, correspondences_to_string(corrs));
}

// ---- tracks: {"track","frame","joint","x","y","score"} ---------------------

inline PoseTracks read_tracks(const std::filesystem::path& path) {
    PoseTracks out;
    std::map<int, std::size_t> track_pos;
    std::map<int, std::set<std::pair<int, int>>> seen;
    detail::for_each_json_line(path, [&](const json& j, std::size_t line) {
        const int track_id = detail::int_field(j, "track", path, line);
        TrackEntry e;
        e.frame = detail::int_field(j, "frame", path, line);
        e.joint.id = detail::int_field(j, "joint", path, line);
        if (e.joint.id < 0) detail::line_error(path, line, "joint must be >= 0");
        e.pos.x = detail::finite_number(j, "x", path, line);
        e.pos.y = detail::finite_number(j, "y", path, line);
        e.score = detail::finite_number(j, "score", path, line);
        if (!seen[track_id].emplace(e.frame, e.joint.id).second)
            detail::line_error(path, line, "track " + std::to_string(track_id) +
                                               " has a second entry for (frame, joint) (" +
                                               std::to_string(e.frame) + ", " +
                                               std::to_string(e.joint.id) + ")");
        auto it = track_pos.find(track_id);
        if (it == track_pos.end()) {
            it = track_pos.emplace(track_id, out.tracks.size()).first;
            out.tracks.push_back(Track{track_id, {}});
        }
        out.tracks[it->second].entries.push_back(e);
    });
    return out;
}

inline std::string tracks_to_string(const PoseTracks& tracks) {
    std::string out;
    for (const Track& t : tracks.tracks) {
        for (const TrackEntry& e : t.entries) {
            json j;
            j["track"] = t.track_id;
            j["frame"] = e.frame;
            j["joint"] = e.joint.id;
            j["x"] = e.pos.x;
            j["y"] = e.pos.y;
            j["score"] = e.score;
            out += j.dump();
            out += '\n';
        }
    }
    return out;
}

inline void write_tracks(const std::filesystem::path& path, const PoseTracks& tracks) {
    atomic_write(path, tracks_to_string(tracks));
}

}  // namespace posetrack
