#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mirage/app.hpp"
#include "mirage/error.hpp"

namespace py = pybind11;
using namespace mirage;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W, 3) array <-> planar PixelImage.
PixelImage to_image(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw Error(ErrorKind::shape, "expected an (H, W, 3) array");
    const auto h = static_cast<std::size_t>(a.shape(0));
    const auto w = static_cast<std::size_t>(a.shape(1));
    const auto v = a.unchecked<3>();
    std::vector<double> planar(3 * h * w);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) planar[(c * h + y) * w + x] = v(y, x, c);
    return PixelImage(h, w, std::move(planar));
}

Array to_array(const PixelImage& img) {
    Array out({img.height(), img.width(), std::size_t{3}});
    auto v = out.mutable_unchecked<3>();
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
            for (std::size_t c = 0; c < 3; ++c) v(y, x, c) = img.at(c, y, x);
    return out;
}

PixelMask to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw Error(ErrorKind::shape, "expected an (H, W) mask");
    PixelMask m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    const auto v = a.unchecked<2>();
    for (std::size_t y = 0; y < m.height; ++y)
        for (std::size_t x = 0; x < m.width; ++x) m.set(y, x, v(y, x));
    return m;
}

}  // namespace

PYBIND11_MODULE(_mirage, m) {
    static PyObject* error_type = py::exception<Error>(m, "MirageError").release().ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::handle(error_type)(e.what());
            exc.attr("kind") = to_string(e.kind());
            exc.attr("stage") = e.stage();
            exc.attr("exit_code") = exit_code_for(e);
            PyErr_SetObject(error_type, exc.ptr());
        }
    });

    m.def("sample_noise", [](std::uint64_t seed, std::size_t c, std::size_t h, std::size_t w) {
        const auto g = sample_noise(seed, {c, h, w}).grid;
        Array out({c, h, w});
        std::copy(g.values().begin(), g.values().end(), out.mutable_data());
        return out;
    }, py::arg("seed"), py::arg("channels"), py::arg("height"), py::arg("width"));

    m.def("region_step_count", [](int steps, double rho) {
        return region_step_count(make_time_grid(steps), SwitchPolicy::checked(rho));
    }, py::arg("steps"), py::arg("rho"));

    m.def("patch_token_count", &patch_token_count, py::arg("height"), py::arg("width"), py::arg("vae_factor"),
          py::arg("patch"));
    m.def("overall_score", [](double pf, double cons, double pq) { return overall_score({pf, cons, pq}); },
          py::arg("pf"), py::arg("cons"), py::arg("pq"));
    m.def("psnr_from_mse", &psnr_from_mse);

    m.def("background_metrics", [](const Array& reference, const Array& edited, const std::vector<py::array_t<bool>>& masks) {
        const auto ref = to_image(reference);
        std::vector<PixelMask> pm;
        for (const auto& mk : masks) pm.push_back(to_mask(mk));
        const auto r = background_metrics(ref, to_image(edited), MaskSet(ref.height(), ref.width(), std::move(pm)));
        py::dict d;
        d["psnr"] = r.psnr;
        d["mse"] = r.mse;
        d["ssim"] = r.ssim ? py::object(py::float_(*r.ssim)) : py::object(py::none());
        d["pixel_count"] = r.pixel_count;
        return d;
    }, py::arg("reference"), py::arg("edited"), py::arg("masks"));

    m.def("stub_decompose", [](const std::string& instruction) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& p : stub_decompose(instruction).pairs) out.emplace_back(p.refer, p.edit);
        return out;
    });

    m.def("square_scene", [](int size, int instances, int extras) {
        const auto scene = make_square_scene({size, size, instances, "square", extras, "ball"});
        py::list objects;
        for (const auto& o : scene.objects) {
            objects.append(py::make_tuple(o.category, py::make_tuple(o.box.x0, o.box.y0, o.box.x1, o.box.y1)));
        }
        return py::make_tuple(to_array(scene.image), objects);
    }, py::arg("size") = 64, py::arg("instances") = 3, py::arg("extras") = 0);

    m.def("read_png", [](const std::filesystem::path& p) { return to_array(read_png(p)); });
    m.def("write_png", [](const std::filesystem::path& p, const Array& a) { write_png(p, to_image(a)); });

    // Runs one edit; config_json uses the CLI config keys. Returns the report as JSON text.
    m.def("edit_json", [](const std::filesystem::path& image, const std::string& instruction, const std::string& config_json) {
        const auto cfg = RunConfig::from_json(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        auto clients = make_clients(cfg);
        return cmd_edit(image, instruction, cfg, clients).report_json.dump();
    }, py::arg("image"), py::arg("instruction"), py::arg("config_json") = "{}");
}
