#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "uivi/config_io.hpp"
#include "uivi/error.hpp"
#include "uivi/estimator.hpp"
#include "uivi/evaluation.hpp"
#include "uivi/family.hpp"
#include "uivi/hmc.hpp"
#include "uivi/runner.hpp"
#include "uivi/sivi.hpp"
#include "uivi/targets.hpp"

namespace py = pybind11;
using namespace uivi;

namespace {

py::dict estimate_dict(const Estimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["std_error"] = e.std_error;
  return d;
}

Tensor matrix_from(const std::vector<Vec>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows[0].size() : 0;
  Vec flat;
  for (const auto& row : rows) {
    require(row.size() == c, ErrorKind::kDimensionMismatch, "ragged matrix");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Tensor::matrix(r, c, std::move(flat));
}

}  // namespace

PYBIND11_MODULE(_uivi, m) {
  m.doc() = "Semi-implicit variational inference with unbiased gradients";

  static py::exception<Error> error_type(m, "UiviError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<Rng>(m, "Rng").def(py::init<std::uint64_t>(), py::arg("seed"));

  py::class_<SemiImplicitQ>(m, "SemiImplicitQ")
      .def_readonly("eps_dim", &SemiImplicitQ::eps_dim)
      .def_readonly("z_dim", &SemiImplicitQ::z_dim)
      .def("scale", &SemiImplicitQ::scale)
      .def("num_params", &SemiImplicitQ::num_params)
      .def("flatten", &SemiImplicitQ::flatten)
      .def("assign_from", [](SemiImplicitQ& q, const Vec& p) { q.assign_from(p); })
      .def("cond_params",
           [](const SemiImplicitQ& q, const Vec& eps) {
             const auto cp = cond_params(q, eps);
             return py::make_tuple(cp.mean, cp.scale);
           })
      .def("sample",
           [](const SemiImplicitQ& q, Rng& rng) {
             const auto r = sample(q, rng);
             return py::make_tuple(r.eps, r.u, r.z);
           })
      .def("log_density_estimate",
           [](const SemiImplicitQ& q, const Vec& z, std::size_t M, Rng& rng) {
             return marginal_logdensity_estimate(q, z, M, rng);
           })
      .def("to_checkpoint",
           [](const SemiImplicitQ& q) {
             std::ostringstream os;
             save_checkpoint(q, os);
             return os.str();
           })
      .def_static("from_checkpoint", [](const std::string& text) {
        std::istringstream is(text);
        return load_checkpoint(is);
      });

  m.def(
      "make_family",
      [](std::size_t eps_dim, std::size_t z_dim, std::vector<std::size_t> hidden, const std::string& act,
         double init_scale, Rng& rng) {
        FamilySpec spec{eps_dim, z_dim, std::move(hidden), activation_from_string(act), init_scale};
        return make_family(spec, rng);
      },
      py::arg("eps_dim"), py::arg("z_dim"), py::arg("hidden"), py::arg("activation") = "relu",
      py::arg("init_scale") = 1.0, py::arg("rng"));
  m.def(
      "make_linear_gaussian_family",
      [](const std::vector<Vec>& weight, const Vec& bias, const Vec& scale) {
        return make_linear_gaussian_family(matrix_from(weight), bias, scale);
      },
      py::arg("weight"), py::arg("bias"), py::arg("scale"));
  m.def("make_constant_family", &make_constant_family, py::arg("eps_dim"), py::arg("mean"), py::arg("scale"));

  py::class_<TargetModel, std::shared_ptr<TargetModel>>(m, "TargetModel")
      .def("z_dim", &TargetModel::z_dim)
      .def("name", &TargetModel::name)
      .def("log_joint", [](const TargetModel& t, const Vec& z) { return t.log_joint(z); })
      .def("grad_log_joint", [](const TargetModel& t, const Vec& z) { return t.grad_z_log_joint(z); });
  m.def("toy_target", [](const std::string& name) { return std::shared_ptr<TargetModel>(make_toy_target(name)); });
  m.def("gaussian_target", [](const Vec& mean, const Vec& sd) {
    return std::shared_ptr<TargetModel>(std::make_shared<DiagGaussianTarget>(mean, sd));
  });
  m.def("conjugate_model", [](double x) {
    return std::shared_ptr<TargetModel>(std::make_shared<ConjugateGaussianModel>(x));
  });

  py::class_<HmcConfig>(m, "HmcConfig")
      .def(py::init<>())
      .def_readwrite("n_burn", &HmcConfig::n_burn)
      .def_readwrite("n_keep", &HmcConfig::n_keep)
      .def_readwrite("leapfrog_steps", &HmcConfig::leapfrog_steps)
      .def_readwrite("step_size", &HmcConfig::step_size)
      .def_readwrite("adapt_during_burn", &HmcConfig::adapt_during_burn)
      .def_readwrite("target_accept", &HmcConfig::target_accept)
      .def_readwrite("step_jitter", &HmcConfig::step_jitter);

  m.def(
      "hmc_reverse_sample",
      [](const SemiImplicitQ& q, const Vec& z, const Vec& eps_init, const HmcConfig& cfg, Rng& rng) {
        const auto r = hmc_sample(q, z, eps_init, cfg, rng);
        return py::make_tuple(r.samples, r.acceptance_rate, r.step_size);
      },
      py::arg("q"), py::arg("z"), py::arg("eps_init"), py::arg("cfg"), py::arg("rng"));

  m.def(
      "elbo_gradient",
      [](const TargetModel& t, const SemiImplicitQ& q, int S, const HmcConfig& cfg, Rng& rng) {
        const auto g = elbo_gradient(t, q, S, cfg, rng);
        py::dict d;
        d["grad"] = g.grad;
        d["hmc_acceptance"] = g.hmc_acceptance;
        d["hmc_step_size"] = g.hmc_step_size;
        return d;
      },
      py::arg("target"), py::arg("q"), py::arg("S"), py::arg("hmc"), py::arg("rng"));
  m.def(
      "sivi_surrogate",
      [](const TargetModel& t, const SemiImplicitQ& q, int L, Rng& rng) {
        const auto e = sivi_surrogate_gradient(t, q, L, rng);
        return py::make_tuple(e.value, e.grad);
      },
      py::arg("target"), py::arg("q"), py::arg("L"), py::arg("rng"));
  m.def(
      "grad_log_marginal_oracle",
      [](const SemiImplicitQ& q, const Vec& z, bool conjugate) {
        return grad_z_log_marginal_oracle(q, z, conjugate ? OracleMode::kConjugate : OracleMode::kQuadrature);
      },
      py::arg("q"), py::arg("z"), py::arg("conjugate") = true);

  m.def(
      "elbo_estimate",
      [](const TargetModel& t, const SemiImplicitQ& q, std::size_t n, std::size_t M, Rng& rng) {
        return estimate_dict(elbo_estimate(t, q, n, M, rng));
      },
      py::arg("target"), py::arg("q"), py::arg("n_outer"), py::arg("M"), py::arg("rng"));
  m.def(
      "is_log_marginal",
      [](const TargetModel& t, const SemiImplicitQ& q, std::size_t S, std::size_t M, Rng& rng) {
        return estimate_dict(is_log_marginal(t, q, S, M, rng));
      },
      py::arg("target"), py::arg("q"), py::arg("S"), py::arg("M"), py::arg("rng"));
  m.def("exact_elbo", &exact_elbo_quadrature, py::arg("target"), py::arg("q"));

  m.def(
      "run",
      [](const std::string& config_json) {
        RunConfig cfg;
        apply_json(cfg, nlohmann::json::parse(config_json));
        RunResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(cfg);
        }
        py::dict d;
        d["final_q"] = res.final_q;
        if (res.final_elbo) d["final_elbo"] = estimate_dict(*res.final_elbo);
        if (res.final_test_loglik) d["final_test_loglik"] = estimate_dict(*res.final_test_loglik);
        py::list records;
        for (const auto& r : res.records) records.append(py::str(to_json(r, false).dump()));
        d["records"] = records;
        return d;
      },
      py::arg("config_json"),
      "Runs one experiment from a JSON config string and returns its summary.");
}
