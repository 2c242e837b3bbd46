#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "epcgaze/config.hpp"
#include "epcgaze/errors.hpp"
#include "epcgaze/evaluation.hpp"
#include "epcgaze/gaze.hpp"
#include "epcgaze/llr.hpp"
#include "epcgaze/synthetic.hpp"

namespace py = pybind11;
using namespace epcgaze;

namespace {

GazeAngles to_angles(const std::pair<double, double>& g) { return {g.first, g.second}; }

struct Arrays {
    Eigen::MatrixXd features;   // N x D
    Eigen::MatrixX2d gaze;      // N x 2
    Eigen::VectorXi subjects;   // N
};

Arrays to_arrays(const std::vector<Sample>& samples) {
    Arrays a;
    const auto n = static_cast<Eigen::Index>(samples.size());
    const Eigen::Index d = samples.empty() ? 0 : samples.front().features.size();
    a.features.resize(n, d);
    a.gaze.resize(n, 2);
    a.subjects.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = samples[static_cast<std::size_t>(i)];
        a.features.row(i) = s.features.transpose();
        a.gaze(i, 0) = s.gaze.yaw;
        a.gaze(i, 1) = s.gaze.pitch;
        a.subjects(i) = s.subject_id;
    }
    return a;
}

std::vector<Sample> from_arrays(const Eigen::MatrixXd& features, const Eigen::MatrixX2d& gaze,
                                const Eigen::VectorXi& subjects) {
    if (features.rows() != gaze.rows() || features.rows() != subjects.size()) {
        throw DimensionMismatch("features, gaze and subjects must have the same number of rows");
    }
    std::vector<Sample> out(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        Sample& s = out[static_cast<std::size_t>(i)];
        s.subject_id = subjects(i);
        s.features = features.row(i).transpose();
        s.gaze = {gaze(i, 0), gaze(i, 1)};
    }
    return out;
}

RunConfig make_config(const std::map<std::string, std::string>& overrides) {
    RunConfig c;
    for (const auto& [k, v] : overrides) set_field(c, k, v);
    c.finalize();
    return c;
}

std::vector<Sample> samples_for(const RunConfig& c, const std::optional<Eigen::MatrixXd>& features,
                                const std::optional<Eigen::MatrixX2d>& gaze,
                                const std::optional<Eigen::VectorXi>& subjects) {
    if (features && gaze && subjects) return from_arrays(*features, *gaze, *subjects);
    if (features || gaze || subjects) throw InvalidInput("pass features, gaze and subjects together");
    return generate_world(c.generator, c.seed).samples;
}

}  // namespace

PYBIND11_MODULE(_epcgaze, m) {
    m.doc() = "Native core of the epcgaze package";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
    static py::exception<DimensionMismatch> dim_error(m, "DimensionMismatch", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const DimensionMismatch& e) {
            py::set_error(dim_error, e.what());
        } catch (const Error& e) {
            py::set_error(base, (e.kind() + ": " + e.what()).c_str());
        }
    });

    m.def("config_keys", [] {
        std::vector<std::string> keys;
        for (const ConfigField& f : config_fields()) keys.push_back(f.key);
        return keys;
    });
    m.def("config_text", [](const std::map<std::string, std::string>& overrides) {
        return config_to_text(make_config(overrides));
    }, py::arg("overrides") = std::map<std::string, std::string>{});
    m.def("parse_config", [](const std::string& text) {
        RunConfig c;
        apply_config_text(c, text);
        c.finalize();
        std::map<std::string, std::string> out;
        for (const ConfigField& f : config_fields()) out[f.key] = get_field(c, f.key);
        return out;
    }, py::arg("text"));

    m.def("angular_error", [](std::pair<double, double> a, std::pair<double, double> b) {
        return angular_error(to_angles(a), to_angles(b));
    }, py::arg("a"), py::arg("b"));

    m.def("llr_weights", [](std::pair<double, double> target, const std::vector<std::pair<double, double>>& neighbors,
                            std::optional<double> lambda_reg, double lambda_relative) {
        std::vector<GazeAngles> nb;
        for (const auto& g : neighbors) nb.push_back(to_angles(g));
        NeighborConfig cfg;
        cfg.k = nb.size();
        cfg.lambda_reg = lambda_reg;
        cfg.lambda_relative = lambda_relative;
        return solve_weights(local_covariance(to_angles(target), nb), cfg).weights;
    }, py::arg("target"), py::arg("neighbors"), py::arg("lambda_reg") = std::nullopt,
       py::arg("lambda_relative") = 1e-3);

    m.def("generate", [](const std::map<std::string, std::string>& overrides) {
        const RunConfig c = make_config(overrides);
        Arrays a;
        {
            py::gil_scoped_release release;
            a = to_arrays(generate_world(c.generator, c.seed).samples);
        }
        return py::make_tuple(a.features, a.gaze, a.subjects);
    }, py::arg("overrides") = std::map<std::string, std::string>{});

    m.def("loso_tables", [](const std::map<std::string, std::string>& overrides,
                          std::optional<Eigen::MatrixXd> features, std::optional<Eigen::MatrixX2d> gaze,
                          std::optional<Eigen::VectorXi> subjects) {
        const RunConfig c = make_config(overrides);
        const std::vector<Sample> samples = samples_for(c, features, gaze, subjects);
        CrossValidationSummary summary;
        {
            py::gil_scoped_release release;
            summary = run_loso(samples, c.experiment());
        }
        return py::make_tuple(summary_json(summary), summary_csv(summary));
    }, py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("features") = std::nullopt,
       py::arg("gaze") = std::nullopt, py::arg("subjects") = std::nullopt);

    m.def("ablate_csv", [](const std::map<std::string, std::string>& overrides) {
        const RunConfig c = make_config(overrides);
        const std::vector<Sample> samples = samples_for(c, std::nullopt, std::nullopt, std::nullopt);
        const AblationAxis axis = ablation_axis_from_string(c.ablate_axis);
        py::gil_scoped_release release;
        return ablation_csv(axis, ablation_sweep(samples, c.experiment(), axis, c.ablate_values));
    }, py::arg("overrides") = std::map<std::string, std::string>{});
}
