#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gmsynth/envelope.hpp"
#include "gmsynth/epsd.hpp"
#include "gmsynth/error.hpp"
#include "gmsynth/io.hpp"
#include "gmsynth/pipeline.hpp"
#include "gmsynth/records.hpp"
#include "gmsynth/response.hpp"
#include "gmsynth/rng.hpp"
#include "gmsynth/spectral.hpp"
#include "gmsynth/synth.hpp"
#include "gmsynth/uq.hpp"
#include "gmsynth/validate.hpp"

namespace py = pybind11;
using namespace gmsynth;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

std::vector<double> from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw ValidationError("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_gmsynth, m) {
    m.doc() = "Stochastic ground motion fitting, simulation and validation";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    // records
    py::class_<AccelRecord>(m, "AccelRecord")
        .def(py::init([](const std::string& id, double dt, const py::array_t<double>& s) {
                 return make_record(id, dt, from_array(s));
             }),
             py::arg("id"), py::arg("dt"), py::arg("samples"))
        .def_readwrite("id", &AccelRecord::id)
        .def_readwrite("dt", &AccelRecord::dt)
        .def_property(
            "samples", [](const AccelRecord& r) { return to_array(r.samples); },
            [](AccelRecord& r, const py::array_t<double>& s) { r.samples = from_array(s); })
        .def_readwrite("meta", &AccelRecord::meta)
        .def("duration", &AccelRecord::duration)
        .def("__len__", &AccelRecord::size);

    py::class_<IntensityMeasures>(m, "IntensityMeasures")
        .def_readonly("pga", &IntensityMeasures::pga)
        .def_readonly("pgv", &IntensityMeasures::pgv)
        .def_readonly("ia", &IntensityMeasures::ia)
        .def_readonly("d5_95", &IntensityMeasures::d5_95);

    m.def("load_record", [](const std::string& p) { return load_record(p); });
    m.def("save_record", [](const AccelRecord& r, const std::string& p) { save_record(r, p); });
    m.def("arias_intensity", &arias_intensity);
    m.def("intensity_measures", &intensity_measures);
    m.def("husid", [](const AccelRecord& r) {
        const HusidCurve h = husid(r);
        return py::make_tuple(to_array(h.times), to_array(h.ia_cum));
    });
    m.def("rotate_and_select", [](const AccelRecord& a, const AccelRecord& b) {
        auto res = rotate_and_select(a, b);
        return py::make_tuple(res.record, res.angle);
    });
    m.def("decimate_to_50hz", &decimate_to_50hz);
    m.def("truncate_energy", &truncate_energy, py::arg("record"), py::arg("lo") = 1e-4, py::arg("hi") = 0.9999);

    // envelope
    py::class_<EnvelopeParams>(m, "EnvelopeParams")
        .def(py::init([](const std::array<double, 6>& d, double ia) {
                 EnvelopeParams p;
                 p.d = d;
                 p.ia_total = ia;
                 p.validate();
                 return p;
             }),
             py::arg("durations"), py::arg("ia_total"))
        .def_readwrite("durations", &EnvelopeParams::d)
        .def_readwrite("ia_total", &EnvelopeParams::ia_total)
        .def("knot_times", &EnvelopeParams::knot_times)
        .def("t_final", &EnvelopeParams::t_final)
        .def("to_json", [](const EnvelopeParams& p) { return envelope_to_json(p); })
        .def_static("from_json", &envelope_from_json);
    m.def("fit_envelope", [](const AccelRecord& r) { return fit_envelope(husid(r)); });
    m.def("expected_husid", &expected_husid);

    // spectral
    py::class_<SpectralModel>(m, "SpectralModel")
        .def_readonly("config_id", &SpectralModel::config_id)
        .def_readwrite("theta_f", &SpectralModel::theta_f)
        .def_readwrite("fc", &SpectralModel::fc)
        .def("theta_names", &SpectralModel::theta_names)
        .def("to_json", [](const SpectralModel& s) { return spectral_model_to_json(s); })
        .def_static("from_json", &spectral_model_from_json);
    m.def("model_config", &model_config, py::arg("config_id"));
    m.def("total_param_count", &total_param_count);
    m.def("eval_filter", [](const SpectralModel& sm, const std::vector<double>& scalars, double d_omega, std::size_t n) {
        const auto p = params_from_scalars(sm.filter, scalars.data());
        return to_array(eval_filter(sm.filter, p, FreqGrid{d_omega, n}));
    });

    // epsd
    m.def(
        "sttmw",
        [](const AccelRecord& r, double window_s, double nw, int n_tapers, bool normalize, double smooth_s) {
            SttmwOptions o;
            o.window_s = window_s;
            o.nw = nw;
            o.n_tapers = n_tapers;
            EpsdGrid e = sttmw(r, o);
            if (normalize) e = normalize_epsd(e);
            if (smooth_s > 0.0) e = smooth_time(e, smooth_s);
            py::array_t<double> vals({e.n_times(), e.freq.n});
            std::copy(e.values.begin(), e.values.end(), vals.mutable_data());
            std::vector<double> om(e.freq.n);
            for (std::size_t k = 0; k < e.freq.n; ++k) om[k] = e.freq.omega(k);
            return py::make_tuple(to_array(e.times), to_array(om), vals);
        },
        py::arg("record"), py::arg("window_s") = 2.0, py::arg("nw") = 2.5, py::arg("n_tapers") = 4,
        py::arg("normalize") = false, py::arg("smooth_s") = 0.0);

    // synth
    py::class_<SimGrid>(m, "SimGrid")
        .def_static("make", &SimGrid::make, py::arg("t_f"), py::arg("dt") = 0.02, py::arg("omega_upper_hz") = 25.0)
        .def_readonly("dt", &SimGrid::dt)
        .def_readonly("t_f", &SimGrid::t_f)
        .def_readonly("K", &SimGrid::K)
        .def_readonly("d_omega", &SimGrid::d_omega)
        .def("n_time", &SimGrid::n_time);
    m.def(
        "simulate",
        [](const EnvelopeParams& env, const SpectralModel& sm, std::uint64_t seed, double dt) {
            const SimGrid g = SimGrid::make(env.t_final(), dt);
            return simulate_gm(env, sm, g, make_noise(g, seed));
        },
        py::arg("env"), py::arg("model"), py::arg("seed"), py::arg("dt") = 0.02);
    m.def("highpass",
          [](const py::array_t<double>& a, double fc, double dt) { return to_array(highpass(from_array(a), fc, dt)); });
    m.def(
        "energy_factor",
        [](const EnvelopeParams& env, const SpectralModel& sm, double dt) {
            return energy_factor(env, sm, SimGrid::make(env.t_final(), dt));
        },
        py::arg("env"), py::arg("model"), py::arg("dt") = 0.02);
    m.def(
        "optimize_fc",
        [](const EnvelopeParams& env, const SpectralModel& sm, const std::vector<double>& target, std::uint64_t seed,
           int n_sims) {
            FcOptions o;
            o.seed = seed;
            o.n_sims = n_sims;
            const FcResult r = optimize_fc(env, sm, SimGrid::make(env.t_final()), target, o);
            return py::make_tuple(r.fc, to_array(r.fc_grid), to_array(r.eps));
        },
        py::arg("env"), py::arg("model"), py::arg("target_sa"), py::arg("seed"), py::arg("n_sims") = 100);
    m.def("fc_periods", []() { return to_array(fc_periods(FcOptions{})); });

    // response
    m.def("log_spaced", [](double lo, double hi, std::size_t n) { return to_array(log_spaced(lo, hi, n)); });
    m.def(
        "linear_spectrum",
        [](const AccelRecord& r, const std::vector<double>& periods, double zeta) {
            return to_array(linear_spectrum(r, periods, zeta).values);
        },
        py::arg("record"), py::arg("periods"), py::arg("zeta") = 0.05);
    m.def(
        "inelastic_spectrum",
        [](const AccelRecord& r, const std::vector<double>& periods, double zeta, double mu) {
            return to_array(inelastic_spectrum(r, periods, zeta, mu).values);
        },
        py::arg("record"), py::arg("periods"), py::arg("zeta"), py::arg("mu"));

    // uq
    py::class_<MarginalModel>(m, "MarginalModel")
        .def_property_readonly("family", [](const MarginalModel& mm) { return to_string(mm.family); })
        .def_readonly("params", &MarginalModel::params)
        .def_readonly("lo", &MarginalModel::lo)
        .def_readonly("hi", &MarginalModel::hi)
        .def("pdf", &MarginalModel::pdf)
        .def("cdf", &MarginalModel::cdf)
        .def("quantile", &MarginalModel::quantile)
        .def("mean", &MarginalModel::mean)
        .def("sd", &MarginalModel::sd)
        .def("to_json", [](const MarginalModel& mm) { return marginal_to_json(mm); });
    m.def(
        "make_marginal",
        [](const std::string& family, const std::vector<double>& params, double lo, double hi) {
            MarginalModel mm{family_from_string(family), params, lo, hi};
            mm.validate();
            return mm;
        },
        py::arg("family"), py::arg("params"), py::arg("lo") = -std::numeric_limits<double>::infinity(),
        py::arg("hi") = std::numeric_limits<double>::infinity());
    m.def(
        "fit_marginal",
        [](const std::vector<double>& x, const std::vector<std::string>& cands, double lo, double hi) {
            std::vector<Family> f;
            for (const auto& c : cands) f.push_back(family_from_string(c));
            return fit_marginal(x, f.empty() ? all_families() : f, lo, hi).model;
        },
        py::arg("x"), py::arg("candidates") = std::vector<std::string>{},
        py::arg("lo") = -std::numeric_limits<double>::infinity(), py::arg("hi") = std::numeric_limits<double>::infinity());
    m.def("kendall_tau", &kendall_tau);

    py::class_<JointModel>(m, "JointModel")
        .def_readonly("names", &JointModel::names)
        .def_readonly("marginals", &JointModel::marginals)
        .def_property_readonly("copula", [](const JointModel& j) { return to_string(j.copula); })
        .def("dim", &JointModel::dim)
        .def("to_json", [](const JointModel& j) { return joint_model_to_json(j); })
        .def_static("from_json", &joint_model_from_json);
    m.def("reference_joint_model", &reference_joint_model);
    m.def("sample_joint", &sample_joint, py::arg("model"), py::arg("n"), py::arg("seed"));
    m.def(
        "fit_joint",
        [](const Eigen::MatrixXd& x, const std::vector<std::string>& names,
           const std::vector<std::pair<double, double>>& supports, const std::string& copula) {
            JointFitOptions o;
            o.copula = copula_kind_from_string(copula);
            return fit_joint(x, names, supports, o);
        },
        py::arg("x"), py::arg("names"), py::arg("supports"), py::arg("copula") = "CVine");

    // pipeline
    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def(py::init([](std::uint64_t seed) {
                 PipelineConfig c;
                 c.seed = seed;
                 c.fc.seed = seed;
                 return c;
             }),
             py::arg("seed"))
        .def_readwrite("config_id", &PipelineConfig::config_id)
        .def_readwrite("seed", &PipelineConfig::seed)
        .def_readwrite("n_catalogs", &PipelineConfig::n_catalogs)
        .def_property(
            "fc_n_sims", [](const PipelineConfig& c) { return c.fc.n_sims; },
            [](PipelineConfig& c, int n) { c.fc.n_sims = n; })
        .def("to_json", [](const PipelineConfig& c) { return config_to_json(c); })
        .def_static("from_json", &config_from_json);

    py::class_<FittedModel>(m, "FittedModel")
        .def_readonly("record_id", &FittedModel::record_id)
        .def_readonly("env", &FittedModel::env)
        .def_readonly("model", &FittedModel::model)
        .def_readonly("kappa", &FittedModel::kappa)
        .def("row", [](const FittedModel& f) { return to_array(model_to_row(f)); })
        .def("to_json", [](const FittedModel& f) { return fitted_model_to_json(f); })
        .def_static("from_json", &fitted_model_from_json);
    m.def("fit_record", &fit_record, py::arg("record"), py::arg("config"));
    m.def("parameter_columns", &parameter_columns);
    m.def(
        "hierarchical_sim",
        [](const JointModel& j, int config_id, std::size_t n, std::uint64_t seed, const PipelineConfig& cfg) {
            auto cat = hierarchical_sim(j, config_id, n, seed, cfg);
            return py::make_tuple(cat.parameters.values, cat.records);
        },
        py::arg("joint"), py::arg("config_id"), py::arg("n"), py::arg("seed"), py::arg("config"));

    // validate
    m.def("empirical_quantile", [](std::vector<double> x, double p) {
        std::sort(x.begin(), x.end());
        return empirical_quantile(x, p);
    });
    m.def("spectra_stats", [](const Eigen::MatrixXd& sa, const std::vector<double>& periods,
                              const std::vector<double>& levels) {
        SpectraMatrix sm;
        sm.sa = sa;
        sm.periods = periods;
        const SpectraStats s = spectra_stats(sm, levels);
        return py::make_tuple(s.quantiles, to_array(s.log_std), s.corr);
    });
    m.def("eps_curve", [](const std::vector<double>& real, const std::vector<std::vector<double>>& sims) {
        return eps_curve(real, sims).eps;
    });
    m.def("eps_corr", [](const Eigen::MatrixXd& real, const std::vector<Eigen::MatrixXd>& sims) {
        return eps_corr(real, sims).eps;
    });
}
