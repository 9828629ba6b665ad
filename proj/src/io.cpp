#include "pnpf/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "pnpf/rng.hpp"

namespace pnpf {

namespace {

using ordered_json = nlohmann::ordered_json;

// Shortest round-trip decimal form; "inf" for infinities (CSV cells only).
std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

ordered_json vec_to_json(const Vec3 &v) { return ordered_json::array({v.x(), v.y(), v.z()}); }
ordered_json vec_to_json(const Vec2 &v) { return ordered_json::array({v.x(), v.y()}); }

Vec3 vec3_from_json(const nlohmann::json &j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Vec2 vec2_from_json(const nlohmann::json &j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("expected a 2-element array");
    return Vec2(j[0].get<double>(), j[1].get<double>());
}

ordered_json pose_to_json(const RigidPose &pose) {
    const Eigen::Quaterniond q = pose.rotation.quaternion();
    ordered_json j;
    j["quaternion"] = ordered_json::array({q.w(), q.x(), q.y(), q.z()});  // wxyz
    j["translation"] = vec_to_json(pose.translation);
    return j;
}

RigidPose pose_from_json(const nlohmann::json &j) {
    const auto &q = j.at("quaternion");
    if (!q.is_array() || q.size() != 4) throw ConfigError("quaternion must be a wxyz 4-array");
    RigidPose pose;
    pose.rotation = Rotation::from_quaternion(
        Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()));
    pose.translation = vec3_from_json(j.at("translation"));
    return pose;
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("bad JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace

ordered_json scene_record_to_json(const SceneRecord &rec) {
    ordered_json j;
    j["scene_id"] = rec.scene_id;
    j["f_gt"] = rec.f_gt;
    j["f_pred"] = rec.f_pred;
    j["image_size"] = vec_to_json(rec.image_size);
    j["pose_gt"] = pose_to_json(rec.pose_gt);
    ordered_json corrs = ordered_json::array();
    for (const Correspondence &c : rec.correspondences) {
        ordered_json e;
        e["X"] = vec_to_json(c.point3);
        e["x"] = vec_to_json(c.point2);
        e["weight"] = c.weight;
        corrs.push_back(std::move(e));
    }
    j["correspondences"] = std::move(corrs);
    j["bbox_diag"] = rec.bbox_diag;
    if (!rec.model_points.empty()) {
        ordered_json pts = ordered_json::array();
        for (const Vec3 &p : rec.model_points) pts.push_back(vec_to_json(p));
        j["model_points"] = std::move(pts);
    }
    return j;
}

SceneRecord scene_record_from_json(const nlohmann::json &j) {
    try {
        SceneRecord rec;
        rec.scene_id = j.at("scene_id").get<std::string>();
        rec.f_gt = j.at("f_gt").get<double>();
        rec.f_pred = j.at("f_pred").get<double>();
        rec.image_size = vec2_from_json(j.at("image_size"));
        rec.pose_gt = pose_from_json(j.at("pose_gt"));
        for (const auto &e : j.at("correspondences")) {
            Correspondence c;
            c.point3 = vec3_from_json(e.at("X"));
            c.point2 = vec2_from_json(e.at("x"));
            c.weight = e.value("weight", 1.0);
            rec.correspondences.push_back(c);
        }
        rec.bbox_diag = j.at("bbox_diag").get<double>();
        if (j.contains("model_points"))
            for (const auto &p : j.at("model_points")) rec.model_points.push_back(vec3_from_json(p));
        return rec;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed scene record: ") + e.what());
    }
}

void write_scene_record(const std::filesystem::path &path, const SceneRecord &rec) {
    write_text(path, scene_record_to_json(rec).dump(2) + "\n");
}

SceneRecord read_scene_record(const std::filesystem::path &path) {
    return scene_record_from_json(read_json_file(path));
}

void write_solve_records(const std::filesystem::path &path, const std::vector<SolveRecord> &records) {
    ordered_json arr = ordered_json::array();
    for (const SolveRecord &r : records) {
        ordered_json j;
        j["scene_id"] = r.scene_id;
        j["failed"] = r.failed;
        if (r.failed) {
            j["failure"] = r.failure;
        } else {
            j["pose_pred"] = pose_to_json(r.pose_pred);
            j["focal_pred"] = r.focal_pred;
            j["initial_cost"] = r.initial_cost;
            j["final_cost"] = r.final_cost;
            j["iterations"] = r.iterations;
            j["converged"] = r.converged;
            j["inlier_count"] = r.inlier_count;
        }
        arr.push_back(std::move(j));
    }
    write_text(path, arr.dump(2) + "\n");
}

std::vector<SolveRecord> read_solve_records(const std::filesystem::path &path) {
    const nlohmann::json arr = read_json_file(path);
    if (!arr.is_array()) throw ConfigError("solve records file must hold an array");
    std::vector<SolveRecord> out;
    try {
        for (const auto &j : arr) {
            SolveRecord r;
            r.scene_id = j.at("scene_id").get<std::string>();
            r.failed = j.value("failed", false);
            if (r.failed) {
                r.failure = j.value("failure", std::string());
            } else {
                r.pose_pred = pose_from_json(j.at("pose_pred"));
                r.focal_pred = j.at("focal_pred").get<double>();
                r.initial_cost = j.at("initial_cost").get<double>();
                r.final_cost = j.at("final_cost").get<double>();
                r.iterations = j.at("iterations").get<int>();
                r.converged = j.at("converged").get<bool>();
                r.inlier_count = j.at("inlier_count").get<int>();
            }
            out.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed solve record: ") + e.what());
    }
    return out;
}

ordered_json metrics_report_to_json(const MetricsReport &report) {
    ordered_json j;
    j["med_err_r"] = report.med_err_r;
    j["acc_r_pi6"] = report.acc_r_pi6;
    j["med_err_t"] = report.med_err_t;
    j["med_err_rt"] = report.med_err_rt;
    j["med_err_f"] = report.med_err_f;
    j["med_err_p"] = report.med_err_p;
    j["acc_p_01"] = report.acc_p_01;
    j["sample_count"] = report.sample_count;
    return j;
}

namespace {
// JSON has no infinity literal; nlohmann emits null there, so map it back.
double json_double(const nlohmann::json &j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}
}  // namespace

MetricsReport metrics_report_from_json(const nlohmann::json &j) {
    try {
        MetricsReport r;
        r.med_err_r = json_double(j.at("med_err_r"));
        r.acc_r_pi6 = j.at("acc_r_pi6").get<double>();
        r.med_err_t = json_double(j.at("med_err_t"));
        r.med_err_rt = json_double(j.at("med_err_rt"));
        r.med_err_f = json_double(j.at("med_err_f"));
        r.med_err_p = json_double(j.at("med_err_p"));
        r.acc_p_01 = j.at("acc_p_01").get<double>();
        r.sample_count = j.at("sample_count").get<std::uint64_t>();
        return r;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed metrics report: ") + e.what());
    }
}

void write_metrics_report(const std::filesystem::path &path, const MetricsReport &report) {
    write_text(path, metrics_report_to_json(report).dump(2) + "\n");
}

MetricsReport read_metrics_report(const std::filesystem::path &path) {
    return metrics_report_from_json(read_json_file(path));
}

void write_curve_csv(const std::filesystem::path &path, const std::vector<std::pair<double, double>> &curve) {
    std::string text = "threshold,fraction\n";
    for (const auto &[thr, frac] : curve) text += format_double(thr) + "," + format_double(frac) + "\n";
    write_text(path, text);
}

void write_errors_csv(const std::filesystem::path &path,
                      const std::vector<std::pair<std::string, SampleErrors>> &rows) {
    std::string text = "scene_id,err_r,err_t,err_rt,err_f,err_p\n";
    for (const auto &[id, e] : rows) {
        text += id;
        for (double v : {e.rotation, e.translation, e.pose, e.focal, e.projection}) text += "," + format_double(v);
        text += "\n";
    }
    write_text(path, text);
}

std::string fnv1a_file_hex(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open for checksum: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a(std::string_view(buf, static_cast<size_t>(in.gcount())), h);
        if (!in) break;
    }
    char hex[17];
    for (int i = 15; i >= 0; --i) {
        hex[i] = "0123456789abcdef"[h & 0xf];
        h >>= 4;
    }
    hex[16] = '\0';
    return std::string(hex);
}

void write_manifest(const std::filesystem::path &path, const Manifest &manifest) {
    ordered_json j;
    j["command"] = manifest.command;
    j["config"] = manifest.config;
    j["seed"] = manifest.seed;
    ordered_json arts = ordered_json::array();
    for (const auto &[rel, sum] : manifest.artifacts) {
        ordered_json a;
        a["path"] = rel;
        a["fnv1a"] = sum;
        arts.push_back(std::move(a));
    }
    j["artifacts"] = std::move(arts);
    write_text(path, j.dump(2) + "\n");
}

Manifest read_manifest(const std::filesystem::path &path) {
    const nlohmann::json j = read_json_file(path);
    try {
        Manifest m;
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto &a : j.at("artifacts"))
            m.artifacts.emplace_back(a.at("path").get<std::string>(), a.at("fnv1a").get<std::string>());
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
}

std::vector<std::pair<std::string, std::string>> checksum_artifacts(const std::filesystem::path &base,
                                                                    std::vector<std::string> relative_paths) {
    std::sort(relative_paths.begin(), relative_paths.end());
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(relative_paths.size());
    for (const std::string &rel : relative_paths) out.emplace_back(rel, fnv1a_file_hex(base / rel));
    return out;
}

}  // namespace pnpf
