#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lumir/checkpoint.hpp"
#include "lumir/cli.hpp"
#include "lumir/data_synth.hpp"
#include "lumir/diagnostics.hpp"
#include "lumir/diffusion.hpp"
#include "lumir/image_io.hpp"
#include "lumir/metrics.hpp"
#include "lumir/model.hpp"
#include "lumir/prompt.hpp"
#include "lumir/schedule.hpp"
#include "lumir/train.hpp"

namespace py = pybind11;
using namespace lumir;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<int> shape(static_cast<size_t>(a.ndim()));
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = static_cast<int>(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor::from_data(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

struct PySchedules {
    NoiseSchedule noise;
    ScalingSchedule scaling;
};

PySchedules make_schedules(int steps, double alpha_bar_start, double alpha_bar_end,
                           const std::vector<std::pair<int, int>>& scaling_steps,
                           const std::vector<double>& explicit_alphas) {
    NoiseSpec spec;
    spec.alpha_bar_start = alpha_bar_start;
    spec.alpha_bar_end = alpha_bar_end;
    spec.explicit_alphas = explicit_alphas;
    auto [ns, ss] = build_schedules(steps, spec, scaling_steps);
    return PySchedules{std::move(ns), std::move(ss)};
}

}  // namespace

PYBIND11_MODULE(_lumir, m) {
    m.doc() = "pyramid-diffusion illumination correction core";

    py::class_<PySchedules>(m, "Schedules")
        .def_property_readonly("steps", [](const PySchedules& s) { return s.noise.steps; })
        .def_property_readonly("alphas", [](const PySchedules& s) { return s.noise.alphas; })
        .def_property_readonly("alpha_bars",
                               [](const PySchedules& s) { return s.noise.alpha_bars; })
        .def_property_readonly("factors", [](const PySchedules& s) { return s.scaling.factors; })
        .def("alpha_bar", [](const PySchedules& s, int t) { return s.noise.alpha_bar(t); });

    m.def("build_schedules", &make_schedules, py::arg("steps") = 8,
          py::arg("alpha_bar_start") = 0.9999, py::arg("alpha_bar_end") = 0.02,
          py::arg("scaling_steps") = std::vector<std::pair<int, int>>{{4, 2}},
          py::arg("explicit_alphas") = std::vector<double>{});

    m.def(
        "forward_sample",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> x0, int t,
           const PySchedules& s, std::uint64_t seed) {
            Rng rng(seed);
            return array_from_tensor(forward_sample(tensor_from_array(x0), t, s.noise, s.scaling, rng));
        },
        py::arg("x0"), py::arg("t"), py::arg("schedules"), py::arg("seed") = 0);

    m.def(
        "reverse_step",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> x_t, int t,
           py::array_t<double, py::array::c_style | py::array::forcecast> y_pred,
           const PySchedules& s, std::uint64_t seed) {
            Rng rng(seed);
            return array_from_tensor(
                reverse_step(tensor_from_array(x_t), t, tensor_from_array(y_pred), s.noise,
                             s.scaling, rng));
        },
        py::arg("x_t"), py::arg("t"), py::arg("y_pred"), py::arg("schedules"), py::arg("seed") = 0);

    m.def(
        "sample",
        [](const std::function<py::array_t<double>(py::array_t<double>, py::array_t<double>, int)>&
               predictor,
           py::array_t<double, py::array::c_style | py::array::forcecast> cond,
           const PySchedules& s, std::uint64_t seed) {
            Rng rng(seed);
            Predictor p = [&](const Tensor& x_t, const Tensor& c, int t) {
                py::array_t<double, py::array::c_style | py::array::forcecast> out =
                    predictor(array_from_tensor(x_t), array_from_tensor(c), t);
                return tensor_from_array(out);
            };
            return array_from_tensor(sample(p, tensor_from_array(cond), s.noise, s.scaling, rng));
        },
        py::arg("predictor"), py::arg("cond"), py::arg("schedules"), py::arg("seed") = 0);

    py::class_<Model>(m, "Model")
        .def(py::init([](const py::dict& overrides, std::uint64_t seed) {
                 KvConfig cfg;
                 for (auto item : overrides) {
                     cfg.set(py::str(item.first), py::str(item.second));
                 }
                 ModelConfig mc = ModelConfig::from_config(cfg);
                 Rng rng(seed);
                 return Model(mc, rng);
             }),
             py::arg("config") = py::dict(), py::arg("seed") = 0)
        .def("predict",
             [](const Model& model,
                py::array_t<double, py::array::c_style | py::array::forcecast> x_t,
                py::array_t<double, py::array::c_style | py::array::forcecast> cond, int t) {
                 return array_from_tensor(model.predict(tensor_from_array(x_t),
                                                        tensor_from_array(cond), t));
             })
        .def("restore",
             [](const Model& model,
                py::array_t<double, py::array::c_style | py::array::forcecast> cond,
                const PySchedules& s, std::uint64_t seed) {
                 Rng rng(seed);
                 return array_from_tensor(
                     sample(model.predictor(), tensor_from_array(cond), s.noise, s.scaling, rng));
             },
             py::arg("cond"), py::arg("schedules"), py::arg("seed") = 0)
        .def_property_readonly("param_count",
                               [](const Model& model) { return model.params().total_size(); })
        .def_property_readonly("param_names",
                               [](const Model& model) { return model.params().names(); });

    m.def("load_checkpoint", [](const std::string& path) {
        LoadedCheckpoint ckpt = load_checkpoint(path);
        auto [ns, ss] =
            build_schedules(ckpt.schedule.steps, ckpt.schedule.noise, ckpt.schedule.scaling);
        return py::make_tuple(std::move(ckpt.model), PySchedules{std::move(ns), std::move(ss)});
    });

    m.def("psnr",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
             py::array_t<double, py::array::c_style | py::array::forcecast> b, double peak) {
              return psnr(tensor_from_array(a), tensor_from_array(b), peak);
          },
          py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def("ssim",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> a,
             py::array_t<double, py::array::c_style | py::array::forcecast> b, double peak) {
              return ssim(tensor_from_array(a), tensor_from_array(b), peak);
          },
          py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def("davies_bouldin",
          [](const std::vector<std::vector<double>>& features, const std::vector<int>& labels) {
              return davies_bouldin(features, labels);
          });

    m.def("apply_exposure_shift",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> img, double ev) {
              return array_from_tensor(apply_exposure_shift(tensor_from_array(img), ev));
          });
    m.def("apply_lowlight",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> img, double gamma,
             double illum) {
              return array_from_tensor(apply_lowlight(tensor_from_array(img), gamma, illum));
          });

    m.def(
        "generate_dataset",
        [](const std::string& out_dir, int count, std::uint64_t seed, const std::string& mode,
           int width, int height) {
            DatagenOptions d;
            d.count = count;
            d.seed = seed;
            d.mode = mode;
            d.width = width;
            d.height = height;
            auto manifest = generate_dataset(out_dir, d);
            py::list ids;
            for (const auto& e : manifest) ids.append(e.id);
            return ids;
        },
        py::arg("out_dir"), py::arg("count"), py::arg("seed") = 0, py::arg("mode") = "ev_shift",
        py::arg("width") = 64, py::arg("height") = 64);

    m.def("read_png", [](const std::string& path) { return array_from_tensor(read_png(path)); });
    m.def("write_png",
          [](const std::string& path,
             py::array_t<double, py::array::c_style | py::array::forcecast> img) {
              write_png(path, tensor_from_array(img));
          });

    m.def("directional_flatten",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> x, int direction) {
              return array_from_tensor(
                  directional_flatten(tensor_from_array(x), static_cast<ScanDirection>(direction)));
          });
    m.def("directional_unflatten",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> seq, int direction,
             int h, int w) {
              return array_from_tensor(directional_unflatten(
                  tensor_from_array(seq), static_cast<ScanDirection>(direction), h, w));
          });

    m.def("run_cli", [](const std::vector<std::string>& args) { return lumir::cli::run(args); });
}
