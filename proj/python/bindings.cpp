#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lof/baselines.hpp"
#include "lof/config.hpp"
#include "lof/fusion.hpp"
#include "lof/gaussian.hpp"
#include "lof/metrics.hpp"
#include "lof/state_space.hpp"
#include "lof/training.hpp"
#include "lof/weight_gen.hpp"

namespace py = pybind11;

namespace {

lof::JsdSpec make_jsd_spec(const std::string& method, int n,
                           std::uint64_t seed) {
  lof::JsdSpec spec;
  if (method == "moment_matched") {
    spec.method = lof::JsdMethod::kMomentMatched;
  } else if (method == "monte_carlo") {
    spec.method = lof::JsdMethod::kMonteCarlo;
  } else if (method == "symmetrized_kl") {
    spec.method = lof::JsdMethod::kSymmetrizedKl;
  } else {
    throw lof::ConfigError("unknown jsd method: " + method);
  }
  spec.mc_samples = n;
  spec.mc_seed = seed;
  return spec;
}

lof::RunConfig config_from_dict(const py::dict& overrides) {
  lof::RunConfig cfg;
  for (const auto& item : overrides) {
    cfg.set(py::cast<std::string>(item.first),
            py::cast<std::string>(py::str(item.second)));
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-stage multi-agent state fusion: per-agent Kalman-style "
            "estimation with learned likelihood weights and robust "
            "soft-medoid fusion.";

  py::register_exception<lof::Error>(m, "LofError");

  py::class_<lof::GaussianBelief>(m, "GaussianBelief")
      .def(py::init<Eigen::VectorXd, Eigen::MatrixXd>(), py::arg("mean"),
           py::arg("cov"))
      .def_readwrite("mean", &lof::GaussianBelief::mean)
      .def_readwrite("cov", &lof::GaussianBelief::cov)
      .def("dim", &lof::GaussianBelief::dim);

  m.def("pdf",
        [](const Eigen::VectorXd& x, const lof::GaussianBelief& b) {
          return lof::pdf(x, b);
        },
        py::arg("x"), py::arg("belief"));
  m.def("log_pdf",
        [](const Eigen::VectorXd& x, const lof::GaussianBelief& b) {
          return lof::log_pdf(x, b);
        },
        py::arg("x"), py::arg("belief"));
  m.def("mahalanobis",
        [](const Eigen::VectorXd& d, const Eigen::MatrixXd& cov) {
          return lof::mahalanobis(d, cov);
        },
        py::arg("d"), py::arg("cov"));
  m.def("js_divergence",
        [](const lof::GaussianBelief& a, const lof::GaussianBelief& b,
           const std::string& method, int n, std::uint64_t seed) {
          return lof::js_divergence(a, b, make_jsd_spec(method, n, seed));
        },
        py::arg("a"), py::arg("b"), py::arg("method") = "symmetrized_kl",
        py::arg("n") = 100000, py::arg("seed") = 0);

  m.def("evolution_matrix", &lof::evolution_matrix, py::arg("alpha_deg"),
        py::arg("dt"));
  m.def("process_noise_cov", &lof::process_noise_cov, py::arg("dt"));

  m.def("normalize_weights", &lof::normalize_weights, py::arg("weights"));
  m.def("mixture_moments", &lof::mixture_moments, py::arg("estimates"),
        py::arg("weights"));
  m.def("soft_medoid_coeffs", &lof::soft_medoid_coeffs, py::arg("weights"),
        py::arg("distances"), py::arg("temperature"));
  m.def("bci_fuse",
        [](const std::vector<lof::GaussianBelief>& estimates) {
          return lof::bci_fuse(estimates);
        },
        py::arg("estimates"));

  m.def("exact_likelihood", &lof::exact_likelihood, py::arg("innovation"),
        py::arg("innovation_cov"));
  m.def("nll_loss", &lof::nll_loss, py::arg("truth"), py::arg("fused"));
  m.def("mse_db", &lof::mse_db, py::arg("mse"));
  m.def("fusion_gain", &lof::fusion_gain, py::arg("local_mses"),
        py::arg("fused_mse"));

  m.def("episode_metrics",
        [](const py::dict& overrides, const std::string& method,
           std::uint64_t seed, const std::string& checkpoint) {
          const lof::RunConfig cfg = config_from_dict(overrides);
          const lof::Method mth = lof::parse_method(method);
          std::optional<lof::MlpParams> mlp;
          if (mth == lof::Method::kLof && !checkpoint.empty())
            mlp = lof::load_checkpoint(checkpoint).params;
          const lof::EpisodeResult r = lof::run_episode(
              cfg.episode(), mth, mlp ? &*mlp : nullptr, seed);
          py::dict out;
          out["fused_mse"] = r.fused_mse;
          out["mse_db"] = lof::mse_db(r.fused_mse);
          out["fusion_gain"] = lof::fusion_gain(r.local_mse, r.fused_mse);
          out["mnll"] = r.mnll_value;
          out["detection_ratio"] = r.detection;
          return out;
        },
        py::arg("config") = py::dict(), py::arg("method") = "lof_tm",
        py::arg("seed") = 1, py::arg("checkpoint") = "");

  m.def("config_keys", [] {
    py::dict out;
    for (const auto& k : lof::RunConfig::key_infos()) out[k.name.c_str()] = k.def;
    return out;
  });
}
