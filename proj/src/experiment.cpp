#include "pnpf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <thread>

#include "pnpf/epnp.hpp"
#include "pnpf/geometry.hpp"
#include "pnpf/rng.hpp"

namespace pnpf {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------- enum names

const char *to_string(CorrespondenceMode m) { return m == CorrespondenceMode::LF ? "LF" : "BB"; }
const char *to_string(PnpStrategy s) {
    switch (s) {
        case PnpStrategy::Standard: return "Standard";
        case PnpStrategy::RANSAC: return "RANSAC";
        case PnpStrategy::Cauchy: return "Cauchy";
    }
    return "Standard";
}
const char *to_string(FocalInit f) {
    switch (f) {
        case FocalInit::GroundTruth: return "GroundTruth";
        case FocalInit::Predicted: return "Predicted";
        case FocalInit::Constant: return "Constant";
    }
    return "Predicted";
}
const char *to_string(RefineMode r) {
    switch (r) {
        case RefineMode::InitialOnly: return "InitialOnly";
        case RefineMode::Joint: return "Joint";
        case RefineMode::FixedFocal: return "FixedFocal";
    }
    return "Joint";
}
const char *to_string(AblationKind k) {
    switch (k) {
        case AblationKind::PnPStrategies: return "PnPStrategies";
        case AblationKind::FocalInit: return "FocalInit";
        case AblationKind::Refinement: return "Refinement";
    }
    return "PnPStrategies";
}

template <typename Enum>
Enum enum_from_string(const std::string &name, std::initializer_list<Enum> values, const char *field) {
    for (Enum v : values)
        if (name == to_string(v)) return v;
    throw ConfigError(std::string(field) + ": unknown value '" + name + "'");
}

// ------------------------------------------------------------- config <-> json

std::pair<double, double> range_from_json(const nlohmann::json &j, const char *field) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(field) + " must be a [min, max] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

SceneSpec scene_spec_from_json(const nlohmann::json &j) {
    SceneSpec spec;
    if (j.contains("model")) {
        const auto &m = j.at("model");
        const std::string type = m.at("type").get<std::string>();
        if (type == "box") {
            BoxModel box;
            const auto &d = m.at("dims");
            if (!d.is_array() || d.size() != 3) throw ConfigError("model.dims must be a 3-array");
            box.dims = Vec3(d[0].get<double>(), d[1].get<double>(), d[2].get<double>());
            spec.model = box;
        } else if (type == "point_cloud") {
            PointCloudModel cloud;
            for (const auto &p : m.at("points")) {
                if (!p.is_array() || p.size() != 3) throw ConfigError("model.points entries must be 3-arrays");
                cloud.points.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
            }
            spec.model = cloud;
        } else {
            throw ConfigError("model.type must be 'box' or 'point_cloud'");
        }
    }
    if (j.contains("distance_range"))
        std::tie(spec.distance_min, spec.distance_max) = range_from_json(j.at("distance_range"), "distance_range");
    if (j.contains("rotation_distribution")) {
        const auto &r = j.at("rotation_distribution");
        const std::string type = r.at("type").get<std::string>();
        if (type == "uniform_so3") {
            spec.rotation.uniform_so3 = true;
        } else if (type == "az_el") {
            spec.rotation.uniform_so3 = false;
            if (r.contains("azimuth"))
                std::tie(spec.rotation.azimuth_min, spec.rotation.azimuth_max) =
                    range_from_json(r.at("azimuth"), "azimuth");
            if (r.contains("elevation"))
                std::tie(spec.rotation.elevation_min, spec.rotation.elevation_max) =
                    range_from_json(r.at("elevation"), "elevation");
            if (r.contains("roll"))
                std::tie(spec.rotation.roll_min, spec.rotation.roll_max) = range_from_json(r.at("roll"), "roll");
        } else {
            throw ConfigError("rotation_distribution.type must be 'uniform_so3' or 'az_el'");
        }
    }
    if (j.contains("focal_range_px"))
        std::tie(spec.focal_min_px, spec.focal_max_px) = range_from_json(j.at("focal_range_px"), "focal_range_px");
    if (j.contains("image_size"))
        std::tie(spec.image_width, spec.image_height) = range_from_json(j.at("image_size"), "image_size");
    return spec;
}

ordered_json scene_spec_to_json(const SceneSpec &spec) {
    ordered_json j;
    ordered_json m;
    if (const auto *box = std::get_if<BoxModel>(&spec.model)) {
        m["type"] = "box";
        m["dims"] = ordered_json::array({box->dims.x(), box->dims.y(), box->dims.z()});
    } else {
        const auto &cloud = std::get<PointCloudModel>(spec.model);
        m["type"] = "point_cloud";
        ordered_json pts = ordered_json::array();
        for (const Vec3 &p : cloud.points) pts.push_back(ordered_json::array({p.x(), p.y(), p.z()}));
        m["points"] = std::move(pts);
    }
    j["model"] = std::move(m);
    j["distance_range"] = ordered_json::array({spec.distance_min, spec.distance_max});
    ordered_json r;
    if (spec.rotation.uniform_so3) {
        r["type"] = "uniform_so3";
    } else {
        r["type"] = "az_el";
        r["azimuth"] = ordered_json::array({spec.rotation.azimuth_min, spec.rotation.azimuth_max});
        r["elevation"] = ordered_json::array({spec.rotation.elevation_min, spec.rotation.elevation_max});
        r["roll"] = ordered_json::array({spec.rotation.roll_min, spec.rotation.roll_max});
    }
    j["rotation_distribution"] = std::move(r);
    j["focal_range_px"] = ordered_json::array({spec.focal_min_px, spec.focal_max_px});
    j["image_size"] = ordered_json::array({spec.image_width, spec.image_height});
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    scene_spec.validate();
    noise_spec.validate();
    if (predictor_model.log_sigma < 0) throw ConfigError("predictor_model.log_sigma must be >= 0");
    if (n_scenes < 1) throw ConfigError("n_scenes must be >= 1");
    if (lf_grid < 4) throw ConfigError("lf_grid must be >= 4");
    if (!(cauchy_scale > 0)) throw ConfigError("cauchy_scale must be positive");
    try {
        ransac.validate();
        solver.validate();
    } catch (const InvalidOptions &e) {
        throw ConfigError(e.what());
    }
    if (pnp_strategy == PnpStrategy::RANSAC && refine == RefineMode::InitialOnly)
        throw ConfigError("RANSAC always refines its consensus set; refine = InitialOnly is not supported");
}

ExperimentConfig experiment_config_from_json(const nlohmann::json &j) {
    try {
        ExperimentConfig c;
        if (j.contains("scene_spec")) c.scene_spec = scene_spec_from_json(j.at("scene_spec"));
        if (j.contains("noise_spec")) {
            const auto &n = j.at("noise_spec");
            c.noise_spec.pixel_sigma = n.value("pixel_sigma", 0.0);
            c.noise_spec.point3_sigma = n.value("point3_sigma", 0.0);
            c.noise_spec.outlier_rate = n.value("outlier_rate", 0.0);
            c.noise_spec.dims_rel_sigma = n.value("dims_rel_sigma", 0.0);
        }
        if (j.contains("predictor_model")) {
            const auto &p = j.at("predictor_model");
            c.predictor_model.log_sigma = p.value("log_sigma", 0.24);
            c.predictor_model.bias = p.value("bias", 0.0);
        }
        if (j.contains("correspondence_mode"))
            c.correspondence_mode =
                enum_from_string(j.at("correspondence_mode").get<std::string>(),
                                 {CorrespondenceMode::LF, CorrespondenceMode::BB}, "correspondence_mode");
        if (j.contains("pnp_strategy"))
            c.pnp_strategy =
                enum_from_string(j.at("pnp_strategy").get<std::string>(),
                                 {PnpStrategy::Standard, PnpStrategy::RANSAC, PnpStrategy::Cauchy}, "pnp_strategy");
        if (j.contains("focal_init"))
            c.focal_init = enum_from_string(j.at("focal_init").get<std::string>(),
                                            {FocalInit::GroundTruth, FocalInit::Predicted, FocalInit::Constant},
                                            "focal_init");
        if (j.contains("refine"))
            c.refine = enum_from_string(j.at("refine").get<std::string>(),
                                        {RefineMode::InitialOnly, RefineMode::Joint, RefineMode::FixedFocal},
                                        "refine");
        c.n_scenes = j.value("n_scenes", 1);
        c.seed = j.value("seed", std::uint64_t(0));
        c.output_dir = j.value("output_dir", std::string());
        c.lf_grid = j.value("lf_grid", 28);
        c.cauchy_scale = j.value("cauchy_scale", 1.0);
        if (j.contains("ransac")) {
            const auto &r = j.at("ransac");
            c.ransac.sample_size = r.value("sample_size", 4);
            c.ransac.inlier_threshold_px = r.value("inlier_threshold_px", 5.0);
            c.ransac.max_iterations = r.value("max_iterations", 256);
            c.ransac.confidence = r.value("confidence", 0.99);
        }
        if (j.contains("solver")) {
            const auto &s = j.at("solver");
            c.solver.max_iterations = s.value("max_iterations", 100);
            c.solver.cost_rel_tol = s.value("cost_rel_tol", 1e-10);
            c.solver.step_tol = s.value("step_tol", 1e-12);
            c.solver.initial_damping = s.value("initial_damping", 1e-3);
            c.solver.damping_up = s.value("damping_up", 10.0);
            c.solver.damping_down = s.value("damping_down", 0.1);
            if (s.contains("focal_bounds"))
                std::tie(c.solver.focal_min, c.solver.focal_max) = range_from_json(s.at("focal_bounds"), "focal_bounds");
        }
        c.validate();
        return c;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
}

nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig &c) {
    ordered_json j;
    j["scene_spec"] = scene_spec_to_json(c.scene_spec);
    ordered_json n;
    n["pixel_sigma"] = c.noise_spec.pixel_sigma;
    n["point3_sigma"] = c.noise_spec.point3_sigma;
    n["outlier_rate"] = c.noise_spec.outlier_rate;
    n["dims_rel_sigma"] = c.noise_spec.dims_rel_sigma;
    j["noise_spec"] = std::move(n);
    ordered_json p;
    p["log_sigma"] = c.predictor_model.log_sigma;
    p["bias"] = c.predictor_model.bias;
    j["predictor_model"] = std::move(p);
    j["correspondence_mode"] = to_string(c.correspondence_mode);
    j["pnp_strategy"] = to_string(c.pnp_strategy);
    j["focal_init"] = to_string(c.focal_init);
    j["refine"] = to_string(c.refine);
    j["n_scenes"] = c.n_scenes;
    j["seed"] = c.seed;
    j["lf_grid"] = c.lf_grid;
    j["cauchy_scale"] = c.cauchy_scale;
    ordered_json r;
    r["sample_size"] = c.ransac.sample_size;
    r["inlier_threshold_px"] = c.ransac.inlier_threshold_px;
    r["max_iterations"] = c.ransac.max_iterations;
    r["confidence"] = c.ransac.confidence;
    j["ransac"] = std::move(r);
    ordered_json s;
    s["max_iterations"] = c.solver.max_iterations;
    s["cost_rel_tol"] = c.solver.cost_rel_tol;
    s["step_tol"] = c.solver.step_tol;
    s["initial_damping"] = c.solver.initial_damping;
    s["damping_up"] = c.solver.damping_up;
    s["damping_down"] = c.solver.damping_down;
    s["focal_bounds"] = ordered_json::array({c.solver.focal_min, c.solver.focal_max});
    j["solver"] = std::move(s);
    return j;
}

namespace {

// -------------------------------------------------------------- scene pipeline

std::string scene_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%05d", index);
    return buf;
}

std::uint64_t scene_hash(const GroundTruthScene &s) {
    std::vector<double> values;
    values.reserve(12 + 3 * s.model_points.size());
    values.push_back(s.camera_gt.focal_px);
    const Eigen::Quaterniond q = s.pose_gt.rotation.quaternion();
    values.insert(values.end(), {q.w(), q.x(), q.y(), q.z()});
    values.insert(values.end(),
                  {s.pose_gt.translation.x(), s.pose_gt.translation.y(), s.pose_gt.translation.z()});
    values.push_back(s.bbox_diag_px);
    values.insert(values.end(), {s.dims_gt.x(), s.dims_gt.y(), s.dims_gt.z()});
    for (const Vec3 &p : s.model_points) values.insert(values.end(), {p.x(), p.y(), p.z()});
    return fnv1a(std::string_view(reinterpret_cast<const char *>(values.data()), values.size() * sizeof(double)));
}

struct GeneratedScene {
    GroundTruthScene scene;
    SceneRecord record;
    std::uint64_t hash = 0;
};

SceneSpec effective_scene_spec(const ExperimentConfig &cfg) {
    SceneSpec spec = cfg.scene_spec;
    spec.rng_seed = cfg.seed;  // the run's master seed governs every stream
    return spec;
}

GeneratedScene generate_one(const ExperimentConfig &cfg, const SceneSpec &spec, int index) {
    GeneratedScene g;
    g.scene = sample_scene(spec, static_cast<std::uint64_t>(index));
    g.hash = scene_hash(g.scene);

    Rng noise_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index), "noise"));
    if (cfg.correspondence_mode == CorrespondenceMode::BB) {
        g.record.correspondences = generate_bb_correspondences(g.scene, cfg.noise_spec, noise_rng).first;
    } else {
        g.record.correspondences = generate_lf_correspondences(g.scene, cfg.lf_grid, cfg.noise_spec, noise_rng);
    }

    Rng pred_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index), "predictor"));
    g.record.scene_id = scene_name(index);
    g.record.f_gt = g.scene.camera_gt.focal_px;
    g.record.f_pred = simulate_focal_prediction(g.record.f_gt, cfg.predictor_model, pred_rng);
    g.record.image_size = g.scene.camera_gt.image_size;
    g.record.pose_gt = g.scene.pose_gt;
    g.record.bbox_diag = g.scene.bbox_diag_px;
    g.record.model_points = g.scene.model_points;
    return g;
}

double constant_baseline_for(const ExperimentConfig &cfg) {
    SceneSpec train = cfg.scene_spec;
    train.rng_seed = derive_seed(cfg.seed, 0, "train-split");  // disjoint from the evaluation stream
    std::vector<GroundTruthScene> scenes;
    scenes.reserve(256);
    for (int i = 0; i < 256; ++i) scenes.push_back(sample_scene(train, static_cast<std::uint64_t>(i)));
    return constant_focal_baseline(scenes);
}

double initial_focal_for(const ExperimentConfig &cfg, const SceneRecord &record, double f_constant) {
    switch (cfg.focal_init) {
        case FocalInit::GroundTruth: return record.f_gt;
        case FocalInit::Predicted: return record.f_pred;
        case FocalInit::Constant: return f_constant;
    }
    return record.f_pred;
}

/// Robust initialization for the Cauchy strategy: EPnP re-run with loss-derived
// correspondence weights so gross outliers stop steering the closed form.
// Points behind the camera under the current guess get a vanishing weight.
RigidPose irls_epnp(const CorrespondenceSet &corrs, const PinholeCamera &cam, const LossFunction &loss) {
    CorrespondenceSet weighted = corrs;
    RigidPose pose = solve_epnp(weighted, cam);
    for (int round = 0; round < 3; ++round) {
        for (Correspondence &c : weighted) {
            const Vec3 pc = pose.transform(c.point3);
            if (pc.z() > kCheiralityEps) {
                const Vec2 proj = cam.focal_px / pc.z() * pc.head<2>() + cam.principal_point;
                c.weight = loss.weight((proj - c.point2).norm());
            } else {
                c.weight = 1e-12;
            }
        }
        pose = solve_epnp(weighted, cam);
    }
    return pose;
}

// Joint solve under the Cauchy kernel. The robust objective is non-convex
// enough that the starting point decides the basin, so both the reweighted
// and the plain EPnP starts are refined and the lower-cost fit wins; a start
// that walks a point behind the camera is simply dropped. The tight kernel
// buys breakdown resistance at a ~8-10% statistical efficiency tax on the
// inliers, so once it has converged the residuals are classified against a
// MAD-derived noise scale and the inlier set is re-fit under the squared
// loss — the usual "robust kernel, then clean refit" polish.
SolveResult solve_cauchy_joint(const CorrespondenceSet &corrs, const PinholeCamera &cam, double f_init,
                               const SolverOptions &sopts) {
    bool have_best = false;
    SolveResult best;
    double best_cost = 0.0;
    std::exception_ptr first_failure;
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            const RigidPose init = attempt == 0 ? irls_epnp(corrs, cam, sopts.loss) : solve_epnp(corrs, cam);
            // A contaminated EPnP start can place points behind the camera;
            // drop those for the refinement (the kernel soaks up whatever
            // outliers remain in front) and judge candidates by the robust
            // cost re-evaluated on the full set.
            CorrespondenceSet visible;
            for (const Correspondence &c : corrs)
                if (init.transform(c.point3).z() > kCheiralityEps) visible.push_back(c);
            if (visible.size() < 8) continue;
            const SolveResult res = refine_joint(visible, init, f_init, cam, sopts);
            const double full_cost =
                residuals_and_cost(corrs, res.pose, res.focal_px, sopts.loss, cam).second;
            if (!have_best || full_cost < best_cost) {
                best = res;
                best_cost = full_cost;
                have_best = true;
            }
        } catch (const Error &) {
            if (!first_failure) first_failure = std::current_exception();
        }
    }
    if (!have_best) {
        if (first_failure) std::rethrow_exception(first_failure);
        throw NotEnoughCorrespondences("too few correspondences in front of the camera to refine");
    }

    const auto residuals = residuals_and_cost(corrs, best.pose, best.focal_px, sopts.loss, cam).first;
    std::vector<double> norms(residuals.size());
    for (std::size_t i = 0; i < residuals.size(); ++i) norms[i] = residuals[i].norm();
    std::vector<double> sorted = norms;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    // Residual norms of 2D Gaussian noise are Rayleigh; median = sigma*sqrt(2 ln 2).
    const double sigma_hat = std::max(sorted[sorted.size() / 2] / 1.17741002251547469, 1e-6);
    const double gate = 6.0 * sigma_hat;

    CorrespondenceSet kept;
    std::vector<bool> mask(corrs.size(), false);
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        if (norms[i] <= gate) {
            kept.push_back(corrs[i]);
            mask[i] = true;
        }
    }
    if (kept.size() >= 6) {
        SolverOptions clean = sopts;
        clean.loss = LossFunction::squared();
        const SolveResult polished = refine_joint(kept, best.pose, best.focal_px, cam, clean);
        best.pose = polished.pose;
        best.focal_px = polished.focal_px;
        best.final_cost = polished.final_cost;
        best.iterations += polished.iterations;
        best.converged = polished.converged;
        best.inlier_mask = mask;
    }
    return best;
}

SolveRecord solve_one(const ExperimentConfig &cfg, const SceneRecord &record, double f_constant, int index) {
    SolveRecord out;
    out.scene_id = record.scene_id;
    try {
        const double f_init = initial_focal_for(cfg, record, f_constant);
        const PinholeCamera cam = PinholeCamera::centered(f_init, record.image_size.x(), record.image_size.y());

        SolverOptions sopts = cfg.solver;
        sopts.loss = cfg.pnp_strategy == PnpStrategy::Cauchy ? LossFunction::cauchy(cfg.cauchy_scale)
                                                             : LossFunction::squared();

        SolveResult res;
        if (cfg.pnp_strategy == PnpStrategy::RANSAC) {
            RansacOptions ropts = cfg.ransac;
            ropts.rng_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index), "ransac");
            if (cfg.refine == RefineMode::FixedFocal) sopts.refine_focal = false;
            res = solve_ransac(record.correspondences, cam, ropts, sopts);
        } else {
            const RigidPose init = solve_epnp(record.correspondences, cam);
            switch (cfg.refine) {
                case RefineMode::InitialOnly: {
                    res.pose = init;
                    res.focal_px = f_init;
                    res.initial_cost =
                        residuals_and_cost(record.correspondences, init, f_init, sopts.loss, cam).second;
                    res.final_cost = res.initial_cost;
                    res.iterations = 0;
                    res.converged = true;
                    res.inlier_mask.assign(record.correspondences.size(), true);
                    break;
                }
                case RefineMode::Joint:
                    res = cfg.pnp_strategy == PnpStrategy::Cauchy
                              ? solve_cauchy_joint(record.correspondences, cam, f_init, sopts)
                              : refine_joint(record.correspondences, init, f_init, cam, sopts);
                    break;
                case RefineMode::FixedFocal:
                    res = refine_pose_fixed_focal(record.correspondences, init, f_init, cam, sopts);
                    break;
            }
        }

        out.pose_pred = res.pose;
        out.focal_pred = res.focal_px;
        out.initial_cost = res.initial_cost;
        out.final_cost = res.final_cost;
        out.iterations = res.iterations;
        out.converged = res.converged;
        out.inlier_count = static_cast<int>(std::count(res.inlier_mask.begin(), res.inlier_mask.end(), true));
    } catch (const Error &e) {
        out.failed = true;
        out.failure = e.what();
    }
    return out;
}

SampleErrors infinite_errors() { return {kInf, kInf, kInf, kInf, kInf}; }

SceneOutcome evaluate_one(const SceneRecord &record, const SolveRecord &solved) {
    SceneOutcome outcome;
    outcome.scene_id = record.scene_id;
    outcome.record = solved;
    if (solved.failed) {
        outcome.failed = true;
        outcome.failure = solved.failure;
        outcome.errors = infinite_errors();
        return outcome;
    }
    try {
        EvalSample sample;
        if (record.model_points.empty()) {
            sample.model_points.reserve(record.correspondences.size());
            for (const Correspondence &c : record.correspondences) sample.model_points.push_back(c.point3);
        } else {
            sample.model_points = record.model_points;
        }
        sample.pose_gt = record.pose_gt;
        sample.pose_pred = solved.pose_pred;
        sample.f_gt = record.f_gt;
        sample.f_pred = solved.focal_pred;
        sample.image_size = record.image_size;
        sample.principal_point = record.image_size / 2;
        sample.bbox_diag_px = record.bbox_diag;
        sample.image_diag_px = record.image_size.norm();
        outcome.errors = evaluate_sample(sample);
    } catch (const Error &e) {
        outcome.failed = true;
        outcome.failure = e.what();
        outcome.errors = infinite_errors();
    }
    return outcome;
}

template <typename Fn>
void parallel_for(int n, int jobs, Fn &&fn) {
    jobs = std::clamp(jobs, 1, n);
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i; (i = next.fetch_add(1)) < n;) fn(i);
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs - 1);
    for (int t = 0; t < jobs - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto &th : pool) th.join();
}

std::vector<double> curve_thresholds() {
    std::vector<double> t;
    t.reserve(21);
    for (int i = 0; i <= 20; ++i) t.push_back(i / 20.0);
    return t;
}

void abort_if_mostly_failed(std::size_t failed, std::size_t total, const std::vector<SceneOutcome> &outcomes) {
    if (2 * failed <= total) return;
    std::string example;
    for (const auto &o : outcomes)
        if (o.failed) {
            example = o.scene_id + ": " + o.failure;
            break;
        }
    throw ExperimentFailure("more than half of the scenes failed (" + std::to_string(failed) + "/" +
                            std::to_string(total) + "); first failure: " + example);
}

void write_run_artifacts(const std::filesystem::path &dir, const ExperimentConfig &cfg,
                         const ExperimentResult &result, const std::string &command,
                         const std::string &manifest_name) {
    std::vector<std::pair<std::string, SampleErrors>> rows;
    rows.reserve(result.scenes.size());
    for (const auto &o : result.scenes) rows.emplace_back(o.scene_id, o.errors);
    write_errors_csv(dir / "errors.csv", rows);
    write_metrics_report(dir / "report.json", result.report);
    write_curve_csv(dir / "curve.csv", result.curve);

    Manifest m;
    m.command = command;
    m.config = experiment_config_to_json(cfg);
    m.seed = cfg.seed;
    m.artifacts = checksum_artifacts(dir, {"errors.csv", "report.json", "curve.csv"});
    write_manifest(dir / manifest_name, m);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig &config, int jobs) {
    config.validate();
    const SceneSpec spec = effective_scene_spec(config);
    const double f_constant = config.focal_init == FocalInit::Constant ? constant_baseline_for(config) : 0.0;

    const int n = config.n_scenes;
    std::vector<GeneratedScene> generated(n);
    std::vector<SceneOutcome> outcomes(n);
    std::vector<std::string> generation_failures(n);

    parallel_for(n, jobs, [&](int i) {
        try {
            generated[i] = generate_one(config, spec, i);
            const SolveRecord solved = solve_one(config, generated[i].record, f_constant, i);
            outcomes[i] = evaluate_one(generated[i].record, solved);
        } catch (const Error &e) {
            generation_failures[i] = e.what();  // scene synthesis itself failed: config problem
        }
    });
    for (int i = 0; i < n; ++i)
        if (!generation_failures[i].empty())
            throw ExperimentFailure("scene generation failed at " + scene_name(i) + ": " + generation_failures[i]);

    ExperimentResult result;
    result.scenes = std::move(outcomes);

    std::uint64_t stream = 0xcbf29ce484222325ULL;
    for (const auto &g : generated) stream = splitmix64(stream ^ g.hash);
    result.scene_stream_hash = stream;

    result.failed_count = 0;
    for (const auto &o : result.scenes)
        if (o.failed) ++result.failed_count;
    abort_if_mostly_failed(result.failed_count, result.scenes.size(), result.scenes);

    std::vector<SampleErrors> errors;
    std::vector<double> pose_errors;
    errors.reserve(n);
    pose_errors.reserve(n);
    for (const auto &o : result.scenes) {
        errors.push_back(o.errors);
        pose_errors.push_back(o.errors.pose);
    }
    result.report = aggregate(errors);
    result.curve = accuracy_curve(pose_errors, curve_thresholds());

    if (!config.output_dir.empty())
        write_run_artifacts(config.output_dir, config, result, "run", "manifest_run.json");
    return result;
}

std::vector<AblationRow> run_ablation_suite(AblationKind kind, const ExperimentConfig &base, int jobs) {
    base.validate();
    std::vector<std::pair<std::string, ExperimentConfig>> cells;
    auto add_cell = [&](const std::string &label, auto mutate) {
        ExperimentConfig c = base;
        mutate(c);
        if (!base.output_dir.empty())
            c.output_dir = (std::filesystem::path(base.output_dir) / "cells" / label).string();
        cells.emplace_back(label, std::move(c));
    };
    switch (kind) {
        case AblationKind::PnPStrategies:
            for (PnpStrategy s : {PnpStrategy::Standard, PnpStrategy::RANSAC, PnpStrategy::Cauchy})
                add_cell(to_string(s), [s](ExperimentConfig &c) { c.pnp_strategy = s; });
            break;
        case AblationKind::FocalInit:
            for (FocalInit f : {FocalInit::GroundTruth, FocalInit::Predicted, FocalInit::Constant})
                add_cell(to_string(f), [f](ExperimentConfig &c) { c.focal_init = f; });
            break;
        case AblationKind::Refinement:
            for (RefineMode r : {RefineMode::InitialOnly, RefineMode::Joint})
                add_cell(to_string(r), [r](ExperimentConfig &c) { c.refine = r; });
            break;
    }

    std::vector<AblationRow> rows;
    std::vector<ExperimentResult> results;
    for (const auto &[label, cfg] : cells) {
        results.push_back(run_experiment(cfg, jobs));
        rows.push_back({label, results.back().report});
    }
    for (size_t i = 1; i < results.size(); ++i)
        if (results[i].scene_stream_hash != results[0].scene_stream_hash)
            throw ExperimentFailure("ablation cells diverged: scene streams are not paired");

    if (!base.output_dir.empty()) {
        const std::filesystem::path dir = base.output_dir;
        std::string table = "cell,med_err_r,acc_r_pi6,med_err_t,med_err_rt,med_err_f,med_err_p,acc_p_01,sample_count\n";
        for (const auto &row : rows) {
            const auto j = metrics_report_to_json(row.report);
            table += row.label;
            for (const char *key : {"med_err_r", "acc_r_pi6", "med_err_t", "med_err_rt", "med_err_f", "med_err_p",
                                    "acc_p_01", "sample_count"})
                table += "," + j.at(key).dump();
            table += "\n";
        }
        std::filesystem::create_directories(dir);
        std::ofstream out(dir / "ablation.csv", std::ios::binary);
        if (!out) throw ConfigError("cannot write ablation table");
        out << table;
        out.close();

        std::vector<std::string> artifacts = {"ablation.csv"};
        for (const auto &[label, cfg] : cells)
            for (const char *name : {"errors.csv", "report.json", "curve.csv", "manifest_run.json"})
                artifacts.push_back("cells/" + label + "/" + name);
        Manifest m;
        m.command = std::string("ablate ") + to_string(kind);
        m.config = experiment_config_to_json(base);
        m.seed = base.seed;
        m.artifacts = checksum_artifacts(dir, std::move(artifacts));
        write_manifest(dir / "manifest_ablate.json", m);
    }
    return rows;
}

void run_generate_stage(const ExperimentConfig &config, const std::filesystem::path &dir, int jobs) {
    config.validate();
    const SceneSpec spec = effective_scene_spec(config);
    const int n = config.n_scenes;
    std::vector<GeneratedScene> generated(n);
    std::vector<std::string> failures(n);
    parallel_for(n, jobs, [&](int i) {
        try {
            generated[i] = generate_one(config, spec, i);
        } catch (const Error &e) {
            failures[i] = e.what();
        }
    });
    for (int i = 0; i < n; ++i)
        if (!failures[i].empty())
            throw ExperimentFailure("scene generation failed at " + scene_name(i) + ": " + failures[i]);

    std::vector<std::string> artifacts;
    artifacts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const std::string rel = "scenes/" + generated[i].record.scene_id + ".json";
        write_scene_record(dir / rel, generated[i].record);
        artifacts.push_back(rel);
    }
    Manifest m;
    m.command = "generate";
    m.config = experiment_config_to_json(config);
    m.seed = config.seed;
    m.artifacts = checksum_artifacts(dir, std::move(artifacts));
    write_manifest(dir / "manifest_generate.json", m);
}

namespace {

std::vector<SceneRecord> read_scene_dir(const std::filesystem::path &dir) {
    const std::filesystem::path scenes = dir / "scenes";
    if (!std::filesystem::is_directory(scenes))
        throw ConfigError("no scenes/ directory under " + dir.string() + " (run generate first)");
    std::vector<std::filesystem::path> files;
    for (const auto &entry : std::filesystem::directory_iterator(scenes))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("scenes/ holds no scene files");
    std::vector<SceneRecord> records;
    records.reserve(files.size());
    for (const auto &f : files) records.push_back(read_scene_record(f));
    return records;
}

}  // namespace

void run_solve_stage(const ExperimentConfig &config, const std::filesystem::path &dir, int jobs) {
    config.validate();
    const std::vector<SceneRecord> records = read_scene_dir(dir);
    const double f_constant = config.focal_init == FocalInit::Constant ? constant_baseline_for(config) : 0.0;

    std::vector<SolveRecord> solved(records.size());
    parallel_for(static_cast<int>(records.size()), jobs,
                 [&](int i) { solved[i] = solve_one(config, records[i], f_constant, i); });

    write_solve_records(dir / "results.json", solved);
    Manifest m;
    m.command = "solve";
    m.config = experiment_config_to_json(config);
    m.seed = config.seed;
    m.artifacts = checksum_artifacts(dir, {"results.json"});
    write_manifest(dir / "manifest_solve.json", m);
}

void run_eval_stage(const ExperimentConfig &config, const std::filesystem::path &dir) {
    config.validate();
    const std::vector<SceneRecord> records = read_scene_dir(dir);
    std::map<std::string, SolveRecord> by_id;
    for (SolveRecord &r : read_solve_records(dir / "results.json")) by_id[r.scene_id] = std::move(r);

    std::vector<SceneOutcome> outcomes;
    outcomes.reserve(records.size());
    std::size_t failed = 0;
    for (const SceneRecord &rec : records) {
        const auto it = by_id.find(rec.scene_id);
        SceneOutcome o;
        if (it == by_id.end()) {
            o.scene_id = rec.scene_id;
            o.failed = true;
            o.failure = "no solver result for this scene";
            o.errors = infinite_errors();
        } else {
            o = evaluate_one(rec, it->second);
        }
        if (o.failed) ++failed;
        outcomes.push_back(std::move(o));
    }
    abort_if_mostly_failed(failed, outcomes.size(), outcomes);

    std::vector<SampleErrors> errors;
    std::vector<double> pose_errors;
    std::vector<std::pair<std::string, SampleErrors>> rows;
    for (const auto &o : outcomes) {
        errors.push_back(o.errors);
        pose_errors.push_back(o.errors.pose);
        rows.emplace_back(o.scene_id, o.errors);
    }
    write_errors_csv(dir / "errors.csv", rows);
    write_metrics_report(dir / "report.json", aggregate(errors));
    write_curve_csv(dir / "curve.csv", accuracy_curve(pose_errors, curve_thresholds()));

    Manifest m;
    m.command = "eval";
    m.config = experiment_config_to_json(config);
    m.seed = config.seed;
    m.artifacts = checksum_artifacts(dir, {"errors.csv", "report.json", "curve.csv"});
    write_manifest(dir / "manifest_eval.json", m);
}

void rerun_manifest(const std::filesystem::path &manifest_path, const std::filesystem::path &dir, int jobs) {
    const Manifest m = read_manifest(manifest_path);
    ExperimentConfig config = experiment_config_from_json(m.config);
    config.seed = m.seed;

    if (m.command == "run") {
        config.output_dir = dir.string();
        run_experiment(config, jobs);
    } else if (m.command == "generate") {
        run_generate_stage(config, dir, jobs);
    } else if (m.command == "solve") {
        run_solve_stage(config, dir, jobs);
    } else if (m.command == "eval") {
        run_eval_stage(config, dir);
    } else if (m.command.rfind("ablate ", 0) == 0) {
        const std::string kind = m.command.substr(7);
        config.output_dir = dir.string();
        run_ablation_suite(enum_from_string(kind, {AblationKind::PnPStrategies, AblationKind::FocalInit,
                                                   AblationKind::Refinement},
                                            "ablation kind"),
                           config, jobs);
    } else {
        throw ConfigError("manifest records unknown command '" + m.command + "'");
    }
}

}  // namespace pnpf
