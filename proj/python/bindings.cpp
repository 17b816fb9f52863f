// Python bindings for the scene generation core. The surface mirrors the CLI
// pipeline -- generate, train, sample, evaluate -- with numpy arrays for point
// clouds and plain dicts for configs and reports.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "scenegen/cli/cli.hpp"
#include "scenegen/eval/metrics.hpp"
#include "scenegen/sample/sampler.hpp"
#include "scenegen/synth/corpus.hpp"
#include "scenegen/train/trainer.hpp"

namespace py = pybind11;
using namespace scenegen;

namespace {

// --- dict <-> json plumbing -------------------------------------------------

nlohmann::json to_json(const py::handle& h) {
    if (h.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
    if (py::isinstance<py::int_>(h)) return h.cast<int64_t>();
    if (py::isinstance<py::float_>(h)) return h.cast<double>();
    if (py::isinstance<py::str>(h)) return h.cast<std::string>();
    if (py::isinstance<py::dict>(h)) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& item : h.cast<py::dict>())
            j[item.first.cast<std::string>()] = to_json(item.second);
        return j;
    }
    if (py::isinstance<py::sequence>(h)) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& item : h.cast<py::sequence>()) j.push_back(to_json(item));
        return j;
    }
    throw py::type_error("unsupported config value: " +
                         py::str(py::type::handle_of(h)).cast<std::string>());
}

py::object from_json(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null:
            return py::none();
        case nlohmann::json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case nlohmann::json::value_t::number_integer:
        case nlohmann::json::value_t::number_unsigned:
            return py::int_(j.get<int64_t>());
        case nlohmann::json::value_t::number_float:
            return py::float_(j.get<double>());
        case nlohmann::json::value_t::string:
            return py::str(j.get<std::string>());
        case nlohmann::json::value_t::array: {
            py::list out;
            for (const auto& v : j) out.append(from_json(v));
            return out;
        }
        case nlohmann::json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = from_json(v);
            return out;
        }
        default:
            throw py::value_error("unsupported json value");
    }
}

// --- numpy <-> geometry plumbing --------------------------------------------

py::array_t<double> cloud_to_array(const PointCloud& pc) {
    py::array_t<double> out({static_cast<py::ssize_t>(pc.size()), py::ssize_t(3)});
    auto view = out.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < view.shape(0); ++i)
        for (py::ssize_t d = 0; d < 3; ++d)
            view(i, d) = pc.pts[static_cast<size_t>(i)][static_cast<size_t>(d)];
    return out;
}

PointCloud array_to_cloud(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(1) != 3)
        throw py::value_error("point clouds must be (N, 3) arrays");
    PointCloud pc;
    pc.pts.reserve(static_cast<size_t>(a.shape(0)));
    auto view = a.unchecked<2>();
    for (py::ssize_t i = 0; i < view.shape(0); ++i)
        pc.pts.push_back({static_cast<real>(view(i, 0)), static_cast<real>(view(i, 1)),
                          static_cast<real>(view(i, 2))});
    return pc;
}

py::array_t<double> pose_to_array(const Pose& p) {
    const std::array<real, 8> v = p.to8();
    py::array_t<double> out(8);
    auto view = out.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < 8; ++i) view(i) = v[static_cast<size_t>(i)];
    return out;
}

SynthConfig synth_config_of(const py::dict& d) {
    const nlohmann::json j = to_json(d);
    SynthConfig c;
    c.lat_res = j.value("lat_res", c.lat_res);
    c.surface_samples = j.value("surface_samples", c.surface_samples);
    c.view_size = j.value("view_size", c.view_size);
    c.views = j.value("views", c.views);
    c.max_assets = j.value("max_assets", c.max_assets);
    c.collision_res = j.value("collision_res", c.collision_res);
    c.max_layout_tries = j.value("max_layout_tries", c.max_layout_tries);
    c.min_scale = j.value("min_scale", c.min_scale);
    c.max_scale = j.value("max_scale", c.max_scale);
    c.placement_range = j.value("placement_range", c.placement_range);
    c.min_gap = j.value("min_gap", c.min_gap);
    return c;
}

py::dict registration_to_dict(const Registration& r) {
    py::dict out;
    out["q"] = py::make_tuple(r.q[0], r.q[1], r.q[2], r.q[3]);
    out["t"] = py::make_tuple(r.t[0], r.t[1], r.t[2]);
    out["iterations"] = r.iterations;
    out["objective"] = r.objective;
    return out;
}

}  // namespace

PYBIND11_MODULE(_scenegen, m) {
    m.doc() = "Compositional 3D scene generation: synthesis, training, sampling, evaluation";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<GenerationError>(m, "GenerationError", PyExc_RuntimeError);
    py::register_exception<RegistrationError>(m, "RegistrationError", PyExc_RuntimeError);
    py::register_exception<SamplingError>(m, "SamplingError", PyExc_RuntimeError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    // --- scenes --------------------------------------------------------------
    py::class_<SceneSample>(m, "Scene")
        .def_readonly("scene_id", &SceneSample::scene_id)
        .def_readonly("d_scene", &SceneSample::d_scene)
        .def_property_readonly("num_assets", &SceneSample::num_assets)
        .def_property_readonly("num_views",
                               [](const SceneSample& s) { return static_cast<int>(s.views.size()); })
        .def("surface",
             [](const SceneSample& s, int i) {
                 return cloud_to_array(s.assets.at(static_cast<size_t>(i)).surface);
             },
             py::arg("asset"), "Canonical surface samples of one asset, (N, 3)")
        .def("pose",
             [](const SceneSample& s, int i) {
                 return pose_to_array(s.poses.at(static_cast<size_t>(i)));
             },
             py::arg("asset"), "Placement relative to the query asset as [t(3), q(4), s]")
        .def("scene_cloud",
             [](const SceneSample& s) { return cloud_to_array(s.scene_cloud()); },
             "Union of the posed asset surfaces, (N, 3)")
        .def("latent_cells",
             [](const SceneSample& s, int i) {
                 return s.assets.at(static_cast<size_t>(i)).latent.size();
             },
             py::arg("asset"), "Number of occupied sparse-latent cells of one asset");

    m.def(
        "generate_scene",
        [](uint64_t seed, int num_assets, const py::dict& synth) {
            return generate_scene(seed, num_assets, synth_config_of(synth));
        },
        py::arg("seed"), py::arg("num_assets"), py::arg("synth") = py::dict(),
        "Procedural scene with collision-free placements and rendered views");

    m.def(
        "save_corpus",
        [](const std::string& path, const std::vector<SceneSample>& scenes) {
            save_corpus(path, scenes);
        },
        py::arg("path"), py::arg("scenes"));
    m.def("load_corpus", &load_corpus, py::arg("path"));

    // --- model + training ------------------------------------------------
    py::class_<SceneGenModel>(m, "Model")
        .def_static(
            "create",
            [](const py::dict& cfg, uint64_t seed) {
                return SceneGenModel::create(ModelConfig::from_json(to_json(cfg)), seed);
            },
            py::arg("config") = py::dict(), py::arg("seed") = 0)
        .def_static(
            "load",
            [](const std::string& path) {
                const Checkpoint ck = load_checkpoint(path);
                SceneGenModel model =
                    SceneGenModel::create(ModelConfig::from_json(ck.meta.at("model")), 0);
                model.load_weights(ck);
                return model;
            },
            py::arg("path"))
        .def(
            "save",
            [](const SceneGenModel& model, const std::string& path, const std::string& dtype) {
                save_checkpoint(path, model.to_checkpoint(dtype));
            },
            py::arg("path"), py::arg("dtype") = "f4")
        .def_property_readonly(
            "config", [](const SceneGenModel& m_) { return from_json(m_.cfg.to_json()); })
        .def_property_readonly(
            "param_count",
            [](const SceneGenModel& m_) { return m_.params.total_scalars(); });

    py::class_<Trainer>(m, "Trainer")
        .def(py::init([](const SceneGenModel& model, const py::dict& cfg) {
                 return Trainer(model, TrainConfig::from_json(to_json(cfg)));
             }),
             py::arg("model"), py::arg("config") = py::dict(),
             "Shares the model's weight storage; training updates the passed model in place")
        .def(
            "train_epoch",
            [](Trainer& t, const std::vector<SceneSample>& corpus) {
                const std::vector<StepRecord> recs = t.train_epoch(corpus, nullptr);
                py::list out;
                for (const StepRecord& r : recs) out.append(from_json(r.to_json()));
                return out;
            },
            py::arg("corpus"), "One shuffled pass; returns one record per optimizer step")
        .def("save_checkpoint", &Trainer::save_checkpoint, py::arg("directory"))
        .def_static("from_checkpoint", &Trainer::from_checkpoint, py::arg("directory"))
        .def_property_readonly("step", &Trainer::step)
        .def_property_readonly("epoch", &Trainer::epoch)
        .def_property_readonly("current_lambda", &Trainer::current_lambda)
        .def_property_readonly("model",
                               [](Trainer& t) -> SceneGenModel& { return t.model(); },
                               py::return_value_policy::reference_internal);

    m.def(
        "train_decoder",
        [](SceneGenModel& model, const std::vector<SceneSample>& corpus, int epochs, double lr,
           double noise_std, uint64_t seed) {
            return train_decoder(model, corpus, epochs, static_cast<real>(lr),
                                 static_cast<real>(noise_std), seed, nullptr);
        },
        py::arg("model"), py::arg("corpus"), py::arg("epochs") = 60, py::arg("lr") = 3e-3,
        py::arg("noise_std") = 0.05, py::arg("seed") = 0,
        "Structure-decoder pretraining; returns the held-out decoded-shell IoU");

    // --- sampling ---------------------------------------------------------
    py::class_<SampledScene>(m, "SampledScene")
        .def_readonly("scene_id", &SampledScene::scene_id)
        .def_property_readonly("num_assets", &SampledScene::num_assets)
        .def("cloud",
             [](const SampledScene& s, int i) {
                 return cloud_to_array(s.assets.at(static_cast<size_t>(i)).cloud);
             },
             py::arg("asset"), "Decoded shell-cell centers in the canonical frame, (N, 3)")
        .def("posed_cloud",
             [](const SampledScene& s, int i) {
                 return cloud_to_array(s.assets.at(static_cast<size_t>(i)).posed());
             },
             py::arg("asset"))
        .def("pose",
             [](const SampledScene& s, int i) {
                 return pose_to_array(s.assets.at(static_cast<size_t>(i)).pose);
             },
             py::arg("asset"), "Predicted placement as [t(3), q(4), s]")
        .def("scene_cloud",
             [](const SampledScene& s) { return cloud_to_array(s.scene_cloud()); })
        .def("write", [](const SampledScene& s, const std::string& dir) {
            write_sampled_scene(dir, s);
        }, py::arg("directory"), "Writes asset_XX.ply, poses.json and scene.ply");

    m.def("load_sampled_scene", &load_sampled_scene, py::arg("directory"));

    m.def(
        "sample_scene",
        [](const SceneGenModel& model, const SceneSample& scene, const std::vector<int>& views,
           const py::dict& cfg) {
            nlohmann::json j = to_json(cfg);
            SampleConfig sc;
            sc.steps = j.value("steps", sc.steps);
            sc.cfg_weight = static_cast<real>(j.value("cfg_weight", double(sc.cfg_weight)));
            sc.seed = j.value("seed", sc.seed);
            sc.latent_fusion = j.value("latent_fusion", sc.latent_fusion);
            return sample_scene_multiview(model, scene, views, sc);
        },
        py::arg("model"), py::arg("scene"), py::arg("views") = std::vector<int>{0},
        py::arg("config") = py::dict(),
        "Reverse flow over the conditioned structure, guided by the listed views");

    m.def(
        "shell_iou",
        [](const SampledScene& sampled, const SceneSample& gt, int asset) {
            return voxel_iou(sampled.assets.at(static_cast<size_t>(asset)).shell,
                             latent_to_shell(gt.assets.at(static_cast<size_t>(asset)).latent));
        },
        py::arg("sampled"), py::arg("scene"), py::arg("asset"),
        "Occupancy IoU between a sampled asset's shell and the ground-truth shell");

    // --- evaluation ---------------------------------------------------------
    const auto eval_config_of = [](const py::dict& d) {
        nlohmann::json j = to_json(d);
        EvalConfig c;
        c.registration = j.value("registration", c.registration);
        c.tau = static_cast<real>(j.value("tau", double(c.tau)));
        c.eval_points = j.value("eval_points", c.eval_points);
        c.reg_points = j.value("reg_points", c.reg_points);
        c.sigma_init = static_cast<real>(j.value("sigma_init", double(c.sigma_init)));
        c.max_iters = j.value("max_iters", c.max_iters);
        c.tol = static_cast<real>(j.value("tol", double(c.tol)));
        c.collision_res = j.value("collision_res", c.collision_res);
        c.multi_start = j.value("multi_start", c.multi_start);
        return c;
    };

    m.def(
        "evaluate_scene",
        [eval_config_of](const SampledScene& pred, const SceneSample& gt, const py::dict& cfg) {
            return from_json(evaluate_scene(eval_view(pred), eval_view(gt),
                                            eval_config_of(cfg)).to_json());
        },
        py::arg("pred"), py::arg("gt"), py::arg("config") = py::dict(),
        "Registered geometric metrics of a sampled scene against ground truth");
    m.def(
        "evaluate_self",
        [eval_config_of](const SceneSample& scene, const py::dict& cfg) {
            const EvalScene v = eval_view(scene);
            return from_json(evaluate_scene(v, v, eval_config_of(cfg)).to_json());
        },
        py::arg("scene"), py::arg("config") = py::dict(),
        "Scores a ground-truth scene against itself (sanity baseline)");

    m.def(
        "chamfer",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
            return chamfer(array_to_cloud(a), array_to_cloud(b));
        },
        py::arg("a"), py::arg("b"),
        "Symmetric unsquared Chamfer distance between (N, 3) clouds");
    m.def(
        "fscore",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& b, double tau) {
            return fscore(array_to_cloud(a), array_to_cloud(b), static_cast<real>(tau));
        },
        py::arg("a"), py::arg("b"), py::arg("tau") = 0.1);
    m.def(
        "register_icp",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& src,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& dst,
           int max_iters, double tol) {
            return registration_to_dict(
                register_icp(array_to_cloud(src), array_to_cloud(dst), max_iters,
                             static_cast<real>(tol)));
        },
        py::arg("src"), py::arg("dst"), py::arg("max_iters") = 60, py::arg("tol") = 1e-7);
    m.def(
        "register_filterreg",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& src,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& dst,
           double sigma_init, int max_iters, double tol) {
            return registration_to_dict(
                register_filterreg(array_to_cloud(src), array_to_cloud(dst),
                                   static_cast<real>(sigma_init), max_iters,
                                   static_cast<real>(tol)));
        },
        py::arg("src"), py::arg("dst"), py::arg("sigma_init") = 0.2, py::arg("max_iters") = 60,
        py::arg("tol") = 1e-7);

    // --- CLI passthrough ---------------------------------------------------
    m.def(
        "run_cli", [](const std::vector<std::string>& args) { return run_cli(args); },
        py::arg("args"), "Runs one CLI subcommand in-process; returns the exit code");
}
