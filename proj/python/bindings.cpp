#include "depthbench/dataset_io.hpp"
#include "depthbench/error.hpp"
#include "depthbench/gradcheck.hpp"
#include "depthbench/leaderboard.hpp"
#include "depthbench/losses.hpp"
#include "depthbench/metrics.hpp"
#include "depthbench/micronet.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace depthbench;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Field to_field(const DoubleArray& a) {
    if (a.ndim() != 2) {
        throw Error(ErrorCode::ShapeMismatch, "expected a 2-D array");
    }
    const auto h = static_cast<std::size_t>(a.shape(0));
    const auto w = static_cast<std::size_t>(a.shape(1));
    return Field(h, w, std::vector<double>(a.data(), a.data() + h * w));
}

FeatureMap to_features(const DoubleArray& a) {
    if (a.ndim() != 3) {
        throw Error(ErrorCode::ShapeMismatch, "expected an (h, w, c) array");
    }
    const auto h = static_cast<std::size_t>(a.shape(0));
    const auto w = static_cast<std::size_t>(a.shape(1));
    const auto c = static_cast<std::size_t>(a.shape(2));
    return FeatureMap(h, w, c, std::vector<double>(a.data(), a.data() + h * w * c));
}

// Ground-truth validity follows the raw-zero convention: depth > 0.
MetricDepthField to_depth(const DoubleArray& a) {
    const Field f = to_field(a);
    MetricDepthField d;
    d.height = f.height;
    d.width = f.width;
    d.depth_m = f.values;
    d.mask.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) d.mask[i] = f.values[i] > 0.0;
    return d;
}

py::array_t<double> shaped(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
    py::array_t<double> out(shape);
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::tuple loss_result(const LossEvaluation& e, std::vector<py::ssize_t> shape) {
    return py::make_tuple(e.value, shaped(e.gradient, std::move(shape)));
}

py::dict report_dict(const MetricReport& r) {
    py::dict d;
    d["rmse"] = r.rmse;
    d["si_rmse"] = r.si_rmse;
    d["log10"] = r.log10_err;
    d["rel"] = r.rel_err;
    d["valid_pixels"] = r.valid_pixels;
    return d;
}

template <LossEvaluation (*Fn)(const Field&, const Field&)>
py::tuple field_loss(const DoubleArray& d, const DoubleArray& d_star) {
    return loss_result(Fn(to_field(d), to_field(d_star)), {d.shape(0), d.shape(1)});
}

SubmissionRecord record_from(const py::dict& d) {
    SubmissionRecord r;
    r.team = d["team"].cast<std::string>();
    r.si_rmse = d["si_rmse"].cast<double>();
    r.runtime_s = d["runtime_s"].cast<double>();
    if (d.contains("score") && !d["score"].is_none()) r.published_score = d["score"].cast<double>();
    return r;
}

py::dict record_dict(const SubmissionRecord& r) {
    py::dict d;
    d["team"] = r.team;
    d["si_rmse"] = r.si_rmse;
    d["rmse"] = r.rmse;
    d["log10"] = r.log10;
    d["rel"] = r.rel;
    d["runtime_s"] = r.runtime_s;
    d["model_size_mb"] = r.model_size_mb;
    d["score"] = r.published_score ? py::cast(*r.published_score) : py::none();
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Depth-estimation metrics, losses, scoring and the reference micro-net";

    py::register_exception<Error>(m, "DepthbenchError", PyExc_ValueError);

    // dataset io
    m.def(
        "load_depth_png",
        [](const std::filesystem::path& path) {
            const DepthMap map = load_depth_png(path);
            py::array_t<std::uint16_t> out({static_cast<py::ssize_t>(map.height), static_cast<py::ssize_t>(map.width)});
            std::copy(map.values.begin(), map.values.end(), out.mutable_data());
            return out;
        },
        py::arg("path"), "Raw 16-bit depth values as an (h, w) uint16 array.");
    m.def(
        "save_depth_png",
        [](const std::filesystem::path& path,
           const py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>& raw) {
            if (raw.ndim() != 2) throw Error(ErrorCode::ShapeMismatch, "expected an (h, w) array");
            DepthMap map;
            map.height = static_cast<std::size_t>(raw.shape(0));
            map.width = static_cast<std::size_t>(raw.shape(1));
            map.values.assign(raw.data(), raw.data() + map.size());
            save_depth_png(path, map);
        },
        py::arg("path"), py::arg("raw"));

    // metrics
    m.attr("DEPTH_FLOOR") = kDepthFloor;
    m.def("rmse", [](const DoubleArray& p, const DoubleArray& g) { return rmse(to_depth(p), to_depth(g)); },
          py::arg("pred"), py::arg("gt"));
    m.def("si_rmse", [](const DoubleArray& p, const DoubleArray& g) { return si_rmse(to_depth(p), to_depth(g)); },
          py::arg("pred"), py::arg("gt"));
    m.def("log10_error",
          [](const DoubleArray& p, const DoubleArray& g) { return log10_error(to_depth(p), to_depth(g)); },
          py::arg("pred"), py::arg("gt"));
    m.def("rel_error", [](const DoubleArray& p, const DoubleArray& g) { return rel_error(to_depth(p), to_depth(g)); },
          py::arg("pred"), py::arg("gt"));
    m.def(
        "evaluate_image",
        [](const DoubleArray& p, const DoubleArray& g) { return report_dict(evaluate_image(to_depth(p), to_depth(g))); },
        py::arg("pred"), py::arg("gt"), "All four metrics over pixels where gt > 0.");

    // losses: each returns (value, gradient)
    m.def("scale_invariant_loss", &field_loss<&scale_invariant_loss>, py::arg("d"), py::arg("d_star"));
    m.def(
        "gradient_matching_loss",
        [](const DoubleArray& d, const DoubleArray& ds, std::size_t levels) {
            return loss_result(gradient_matching_loss(to_field(d), to_field(ds), levels), {d.shape(0), d.shape(1)});
        },
        py::arg("d"), py::arg("d_star"), py::arg("levels") = kGradientMatchingLevels);
    m.def("rmse_loss", &field_loss<&rmse_loss>, py::arg("d"), py::arg("d_star"));
    m.def("mse_distill_loss", &field_loss<&mse_distill_loss>, py::arg("student"), py::arg("teacher"));
    m.def("l1_point_loss", &field_loss<&l1_point_loss>, py::arg("d"), py::arg("d_star"));
    m.def("l1_gradient_loss", &field_loss<&l1_gradient_loss>, py::arg("d"), py::arg("d_star"));
    m.def("ssim_loss", &field_loss<&ssim_loss>, py::arg("d"), py::arg("d_star"));
    m.def(
        "affinity_map",
        [](const DoubleArray& f) {
            const AffinityMap a = affinity_map(to_features(f));
            return shaped(a.values, {static_cast<py::ssize_t>(a.n), static_cast<py::ssize_t>(a.n)});
        },
        py::arg("features"));
    m.def(
        "pairwise_distillation_loss",
        [](const DoubleArray& s, const DoubleArray& t) {
            return loss_result(pairwise_distillation_loss(to_features(s), to_features(t)),
                               {s.shape(0), s.shape(1), s.shape(2)});
        },
        py::arg("student"), py::arg("teacher"));
    m.def(
        "combined_smart_loss",
        [](const DoubleArray& d, const DoubleArray& ds, const DoubleArray& fs, const DoubleArray& ft) {
            const auto r = combined_smart_loss(to_field(d), to_field(ds), to_features(fs), to_features(ft));
            py::dict out;
            out["value"] = r.value;
            out["scale_invariant"] = r.scale_invariant;
            out["gradient_matching"] = r.gradient_matching;
            out["pairwise"] = r.pairwise;
            out["depth_gradient"] = shaped(r.depth_gradient, {d.shape(0), d.shape(1)});
            out["feature_gradient"] = shaped(r.feature_gradient, {fs.shape(0), fs.shape(1), fs.shape(2)});
            return out;
        },
        py::arg("d"), py::arg("d_star"), py::arg("student"), py::arg("teacher"));
    m.def(
        "check_gradients",
        [](std::uint64_t seed, std::size_t trials) {
            py::list rows;
            for (const auto& r : run_gradient_suite(seed, trials)) {
                rows.append(py::make_tuple(r.loss, r.worst_error, r.passed));
            }
            return rows;
        },
        py::arg("seed") = 7, py::arg("trials") = 20, "(loss, max relative error, passed) per loss.");

    // scoring
    m.attr("FITTED_NORMALIZATION") = kFittedNormalization;
    m.def(
        "final_score",
        [](double si, double runtime_s, double c, double coefficient) {
            return final_score(si, runtime_s, ScoringConfig{coefficient, c});
        },
        py::arg("si_rmse"), py::arg("runtime_s"), py::arg("c") = kFittedNormalization,
        py::arg("exponent_coefficient") = kScoreExponentCoefficient);
    m.def("published_challenge_results", [] {
        py::list out;
        for (const auto& r : published_challenge_results()) out.append(record_dict(r));
        return out;
    });
    m.def(
        "fit_normalization_constant",
        [](const std::vector<py::dict>& records) {
            std::vector<SubmissionRecord> recs;
            for (const auto& d : records) recs.push_back(record_from(d));
            const auto fit = fit_normalization_constant(recs);
            py::list rows;
            for (const auto& r : fit.rows) rows.append(py::make_tuple(r.team, r.implied_c, r.ratio, r.outlier));
            py::dict out;
            out["c"] = fit.c;
            out["max_relative_deviation"] = fit.max_relative_deviation;
            out["rows"] = rows;
            return out;
        },
        py::arg("records"), "Records are dicts with team, si_rmse, runtime_s and score.");
    m.def(
        "render_leaderboard",
        [](const std::string& results_json, const std::string& format, double c) {
            const auto fmt = parse_report_format(format);
            if (!fmt) throw Error(ErrorCode::InvalidArgument, "unknown format " + format);
            const auto recs = parse_results_json(results_json);
            return render_report(rank(recs, ScoringConfig{kScoreExponentCoefficient, c}), *fmt);
        },
        py::arg("results_json"), py::arg("format") = "text", py::arg("c") = kFittedNormalization);

    // reference net
    py::class_<ReferenceNet>(m, "ReferenceNet")
        .def(py::init(&build_reference_net), py::arg("seed") = 0)
        .def_property_readonly("parameter_count",
                               [](const ReferenceNet& n) { return param_stats(n.graph, n.weights).parameter_count; })
        .def_property_readonly("fp32_size_bytes",
                               [](const ReferenceNet& n) { return param_stats(n.graph, n.weights).fp32_size_bytes; })
        .def("stats_json", [](const ReferenceNet& n) { return to_json(param_stats(n.graph, n.weights)); })
        .def(
            "forward",
            [](const ReferenceNet& n, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& rgb,
               std::size_t threads) {
                if (rgb.ndim() != 3 || rgb.shape(2) != 3) {
                    throw Error(ErrorCode::WrongInputShape, "expected an (h, w, 3) uint8 array");
                }
                RgbImage img;
                img.height = static_cast<std::size_t>(rgb.shape(0));
                img.width = static_cast<std::size_t>(rgb.shape(1));
                img.values.assign(rgb.data(), rgb.data() + img.height * img.width * 3);
                MetricDepthField out;
                {
                    py::gil_scoped_release release;
                    out = forward(n.graph, n.weights, img, threads);
                }
                return shaped(out.depth_m, {static_cast<py::ssize_t>(out.height), static_cast<py::ssize_t>(out.width)});
            },
            py::arg("rgb"), py::arg("threads") = 1, "Depth in meters, (480, 640) float64.");
}
