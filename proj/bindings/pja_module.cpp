#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "pja/activity.hpp"
#include "pja/levy_sim.hpp"
#include "pja/power_variation.hpp"
#include "pja/stable_math.hpp"

namespace py = pybind11;
using namespace pja;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const DoubleArray& a) {
  if (a.ndim() != 1) throw DomainError("expected a one-dimensional array");
  const auto r = a.unchecked<1>();
  std::vector<double> v(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) v[static_cast<std::size_t>(i)] = r(i);
  return v;
}

py::array_t<double> to_arr(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::memcpy(a.mutable_data(), v.data(), v.size() * sizeof(double));
  return a;
}

PathSeries path_from(const DoubleArray& x, double delta_n) {
  std::vector<double> values = to_vec(x);
  if (values.size() < 3) throw DomainError("path needs at least three observations");
  return PathSeries{SampleGrid::from_steps(delta_n, values.size() - 1), std::move(values), 0};
}

py::dict path_dict(const PathSeries& path) {
  std::vector<double> t(path.values.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) * path.grid.delta_n;
  py::dict d;
  d["t"] = to_arr(t);
  d["x"] = to_arr(path.values);
  d["delta_n"] = path.grid.delta_n;
  d["T"] = path.grid.T;
  return d;
}

py::dict estimate_dict(const ActivityEstimate& e) {
  py::dict flags;
  flags["fs_invalid"] = e.flags.fs_invalid;
  flags["ts_invalid"] = e.flags.ts_invalid;
  flags["fs_clamped"] = e.flags.fs_clamped;
  flags["tau_clamped"] = e.flags.tau_clamped;
  flags["avar_invalid"] = e.flags.avar_invalid;
  py::dict d;
  d["beta_fs"] = e.beta_fs;
  d["tau_hat"] = e.tau_hat;
  d["beta_ts"] = e.beta_ts;
  d["avar_hat"] = e.avar_hat;
  d["se_hat"] = e.se_hat;
  d["ci_lo"] = e.ci_lo;
  d["ci_hi"] = e.ci_hi;
  d["conf"] = e.conf;
  d["ok"] = e.ok;
  d["avar_ok"] = e.avar_ok;
  d["flags"] = flags;
  return d;
}

FsSpec fs_from(double p0, const std::optional<double>& truncate) {
  FsSpec fs;
  if (truncate) {
    fs.kind = FsSpec::Kind::truncated;
    fs.alpha = *truncate;
  } else {
    fs.p0 = p0;
  }
  return fs;
}

ModelSpec model_from(const std::string& model, double sigma1_sq, double sigma2, double drift,
                     double A, double beta, double lambda, double lambda_c, double r) {
  ModelSpec m;
  m.sigma1_sq = sigma1_sq;
  m.sigma2 = sigma2;
  m.drift = drift;
  if (model == "stable") {
    m.jump_kind = JumpStable{A, beta};
  } else if (model == "tempered_stable") {
    m.jump_kind = JumpTemperedStable{A, beta, lambda};
  } else if (model == "compound_poisson") {
    m.jump_kind = JumpCompoundPoisson{lambda_c, r};
  } else if (model != "none") {
    throw DomainError("unknown model: " + model);
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_pja, m) {
  m.doc() = "simulation and estimation core for jump-activity indices";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);
  py::register_exception<DegenerateError>(m, "DegenerateError", PyExc_ArithmeticError);

  m.def("mu_p", &mu_p, py::arg("p"), py::arg("beta"), "E|Z|^p for standard symmetric stable Z");
  m.def("mu_pq", &mu_pq, py::arg("p"), py::arg("q"), py::arg("beta"),
        py::arg("n_points") = std::size_t(1) << 18, "E|Z1|^p |Z1 + Z2|^q");
  m.def("pi_const", &pi_const, py::arg("A"), py::arg("beta"),
        "scale constant linking the Levy coefficient to the stable scale");
  m.def("k_kernel", &k_kernel, py::arg("p"), py::arg("q"), py::arg("beta"),
        py::arg("n_points") = std::size_t(1) << 18, "asymptotic covariance kernel K_{p,q}");
  m.def(
      "clt_cov_matrix",
      [](double p, double q, double beta) {
        const auto s = clt_cov_matrix(p, q, beta);
        return std::vector<std::vector<double>>{{s[0][0], s[0][1]}, {s[1][0], s[1][1]}};
      },
      py::arg("p"), py::arg("q"), py::arg("beta"),
      "two-scale covariance of centered power variations, coarse scale first");
  m.def(
      "optimal_power",
      [](double beta, std::size_t n_points) {
        const PowerChoice pc = optimal_power(beta, n_points);
        py::dict d;
        d["p"] = pc.p;
        d["k_value"] = pc.k_value;
        d["clamped"] = pc.clamped;
        return d;
      },
      py::arg("beta"), py::arg("n_points") = std::size_t(1) << 18,
      "variance-minimizing power for the b statistic at beta");
  m.def("power_lower_bound", &power_lower_bound, py::arg("beta"));
  m.def("power_upper_cap", &power_upper_cap, py::arg("beta"));

  m.def(
      "stable_sample",
      [](double beta, std::size_t n, std::uint64_t seed) {
        return to_arr(stable_sample(beta, n, seed));
      },
      py::arg("beta"), py::arg("n"), py::arg("seed"),
      "exact draws from the standard symmetric stable law (normal at beta = 2)");

  m.def(
      "simulate",
      [](const std::string& model, double sigma1_sq, double sigma2, double drift, double A,
         double beta, double lambda, double lambda_c, double r, double T, double delta_n,
         std::uint64_t seed) {
        const ModelSpec spec =
            model_from(model, sigma1_sq, sigma2, drift, A, beta, lambda, lambda_c, r);
        return path_dict(simulate_path(spec, SampleGrid(T, delta_n), seed));
      },
      py::arg("model") = "none", py::arg("sigma1_sq") = 0.0, py::arg("sigma2") = 0.0,
      py::arg("drift") = 0.0, py::arg("A") = 1.0, py::arg("beta") = 1.5,
      py::arg("lambda_") = 0.25, py::arg("lambda_c") = 1.0, py::arg("r") = 1.0,
      py::arg("T") = 22.0, py::arg("delta_n") = 1.0 / 390, py::arg("seed") = 1,
      "sample one path; returns a dict with t, x, delta_n, T");

  m.def(
      "read_path", [](const std::string& file) { return path_dict(read_path_auto(file)); },
      py::arg("file"), "load a csv or binary path file");
  m.def(
      "write_path",
      [](const DoubleArray& x, double delta_n, const std::string& file, const std::string& format) {
        const PathSeries path = path_from(x, delta_n);
        if (format == "csv")
          write_csv_path(path, file);
        else if (format == "binary")
          write_binary_path(path, file);
        else
          throw DomainError("format must be csv or binary");
      },
      py::arg("x"), py::arg("delta_n"), py::arg("file"), py::arg("format") = "csv");

  m.def(
      "realized_pv",
      [](const DoubleArray& x, double delta_n, double p, int scale) {
        return realized_pv(path_from(x, delta_n), p, scale);
      },
      py::arg("x"), py::arg("delta_n"), py::arg("p"), py::arg("scale") = 1,
      "sum of |increment|^p at the fine (scale 1) or coarse (scale 2) step");

  m.def(
      "b_ratio",
      [](const DoubleArray& x, double delta_n, double p) {
        const BPoint bp = b_ratio(path_from(x, delta_n), p);
        return py::make_tuple(bp.b, bp.valid);
      },
      py::arg("x"), py::arg("delta_n"), py::arg("p"),
      "two-scale activity statistic; returns (b, valid)");

  m.def(
      "two_step",
      [](const DoubleArray& x, double delta_n, double p0, std::optional<double> truncate,
         double conf) {
        return estimate_dict(two_step_point(path_from(x, delta_n), fs_from(p0, truncate), conf));
      },
      py::arg("x"), py::arg("delta_n"), py::arg("p0") = 0.1,
      py::arg("truncate") = std::nullopt, py::arg("conf") = 0.95,
      "adaptive two-step activity estimate with feasible standard errors");

  m.def(
      "feasible_avar",
      [](const DoubleArray& x, double delta_n, double beta_ts, double tau) {
        return feasible_avar(path_from(x, delta_n), beta_ts, tau);
      },
      py::arg("x"), py::arg("delta_n"), py::arg("beta_ts"), py::arg("tau"),
      "plug-in asymptotic variance of the b statistic at power tau");
}
