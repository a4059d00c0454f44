#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "aimle/bench.hpp"
#include "aimle/errors.hpp"
#include "aimle/map_solvers.hpp"

namespace py = pybind11;
using namespace aimle;

namespace {

using Bits = std::vector<std::uint8_t>;

Bits to_bits(const DiscreteState& z) { return z.bits; }

std::vector<Bits> to_bits(const std::vector<DiscreteState>& states) {
  std::vector<Bits> out;
  out.reserve(states.size());
  for (const auto& z : states) out.push_back(z.bits);
  return out;
}

// A Python loss is either a target vector b (quadratic loss ||z - b||^2) or a
// callable z -> (value, grad).
Downstream downstream_of(const py::object& loss) {
  if (py::isinstance<py::function>(loss)) {
    auto fn = loss.cast<py::function>();
    return [fn](std::span<const double> z) {
      py::gil_scoped_acquire gil;
      const auto result = fn(Vector(z.begin(), z.end())).cast<std::pair<double, Vector>>();
      return DownstreamValue{result.first, result.second};
    };
  }
  return QuadraticLoss{loss.cast<Vector>()}.as_downstream();
}

StateLoss state_loss_of(const py::object& loss) {
  const auto down = downstream_of(loss);
  return [down](const DiscreteState& z) { return down(z.as_vector()).value; };
}

NoiseSpec noise_of(const py::object& noise) {
  if (noise.is_none()) return NoNoise{};
  return parse_noise(noise.cast<std::string>());
}

Difference mode_of(const std::string& mode) {
  if (mode == "forward") return Difference::Forward;
  if (mode == "central") return Difference::Central;
  throw InvalidArgument("mode must be 'forward' or 'central'");
}

py::dict estimate_dict(const GradientEstimate& e) {
  py::dict d;
  d["grad"] = e.grad;
  d["samples_used"] = e.samples_used;
  d["l0_norm"] = e.l0_norm;
  d["is_zero"] = e.is_zero;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Perturbation-based gradient estimators for discrete exponential families";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto invalid = py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<InvalidStep>(m, "InvalidStep", invalid.ptr());
  py::register_exception<AllDegenerate>(m, "AllDegenerate", base.ptr());
  py::register_exception<EmptyBatch>(m, "EmptyBatch", base.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  py::register_exception<GuardExceeded>(m, "GuardExceeded", base.ptr());
  py::register_exception<Unsupported>(m, "Unsupported", base.ptr());
  py::register_exception<InfeasibleState>(m, "InfeasibleState", PyExc_ValueError);

  py::class_<Rng>(m, "Rng")
      .def(py::init(&make_stream), py::arg("seed"), py::arg("stream") = 0)
      .def("state", [](const Rng& r) {
        std::ostringstream out;
        out << r;
        return out.str();
      });

  py::class_<PolytopeSpec>(m, "PolytopeSpec")
      .def(py::init(&PolytopeSpec::parse), py::arg("text"))
      .def_static("categorical", &PolytopeSpec::categorical, py::arg("n"))
      .def_static("k_subset", &PolytopeSpec::k_subset, py::arg("n"), py::arg("k"))
      .def_static("spanning_tree", &PolytopeSpec::spanning_tree, py::arg("vertices"))
      .def_static("grid_path", [](std::size_t rows, std::size_t cols, bool eight) {
        return PolytopeSpec::grid_path(rows, cols, eight ? Neighborhood::Eight : Neighborhood::Four);
      }, py::arg("rows"), py::arg("cols"), py::arg("eight_connected") = false)
      .def_property_readonly("dimension", &PolytopeSpec::dimension)
      .def("__repr__", [](const PolytopeSpec& s) { return "PolytopeSpec('" + s.descriptor() + "')"; })
      .def("__str__", &PolytopeSpec::descriptor)
      .def(py::self == py::self);

  m.def("enumerate_states", [](const PolytopeSpec& spec, std::size_t max_states) {
    return to_bits(enumerate_states(spec, {max_states}));
  }, py::arg("spec"), py::arg("max_states") = 1'000'000);
  m.def("is_member", [](const PolytopeSpec& spec, const Bits& z) { return is_member(spec, DiscreteState(z)); });
  m.def("weight", [](const Bits& z, const Vector& theta) { return weight(DiscreteState(z), theta); });
  m.def("log_partition", [](const PolytopeSpec& s, const Vector& t, double tau) { return log_partition(s, t, tau); },
        py::arg("spec"), py::arg("theta"), py::arg("tau") = 1.0);
  m.def("pmf", [](const PolytopeSpec& s, const Vector& t, const Bits& z, double tau, bool strict) {
    return pmf(s, t, tau, DiscreteState(z), strict ? PmfMode::Strict : PmfMode::Lenient);
  }, py::arg("spec"), py::arg("theta"), py::arg("z"), py::arg("tau") = 1.0, py::arg("strict") = false);
  m.def("marginals", [](const PolytopeSpec& s, const Vector& t, double tau) { return marginals(s, t, tau); },
        py::arg("spec"), py::arg("theta"), py::arg("tau") = 1.0);
  m.def("sample_exact", [](const PolytopeSpec& s, const Vector& t, Rng& rng, double tau) {
    return to_bits(sample_exact(s, t, tau, rng));
  }, py::arg("spec"), py::arg("theta"), py::arg("rng"), py::arg("tau") = 1.0);
  m.def("exact_expected_loss", [](const PolytopeSpec& s, const Vector& t, const py::object& loss, double tau) {
    return exact_expected_loss(s, t, tau, state_loss_of(loss));
  }, py::arg("spec"), py::arg("theta"), py::arg("loss"), py::arg("tau") = 1.0);
  m.def("exact_gradient", [](const PolytopeSpec& s, const Vector& t, const py::object& loss, double tau) {
    return exact_gradient(s, t, tau, state_loss_of(loss));
  }, py::arg("spec"), py::arg("theta"), py::arg("loss"), py::arg("tau") = 1.0);

  m.def("map_solve", [](const PolytopeSpec& s, const Vector& t) { return to_bits(map_solve(s, t)); },
        py::arg("spec"), py::arg("theta"));
  m.def("map_grid_path", [](std::size_t rows, std::size_t cols, const Vector& cost, bool eight) {
    return to_bits(map_grid_path({rows, cols, cost, eight ? Neighborhood::Eight : Neighborhood::Four}));
  }, py::arg("rows"), py::arg("cols"), py::arg("cost"), py::arg("eight_connected") = false);

  m.def("sample_noise", [](const py::object& noise, std::size_t dim, Rng& rng) {
    return sample_noise(noise_of(noise), dim, rng);
  }, py::arg("noise"), py::arg("dim"), py::arg("rng"));
  m.def("perturb_and_map", [](const PolytopeSpec& s, const Vector& t, const py::object& noise, Rng& rng) {
    return to_bits(perturb_and_map(s, t, noise_of(noise), rng));
  }, py::arg("spec"), py::arg("theta"), py::arg("noise"), py::arg("rng"));

  m.def("estimate_sfe", [](const PolytopeSpec& s, const Vector& t, const py::object& loss, std::size_t samples,
                           Rng& rng, double tau) {
    return estimate_dict(estimate_sfe(s, t, tau, state_loss_of(loss), samples, rng));
  }, py::arg("spec"), py::arg("theta"), py::arg("loss"), py::arg("samples"), py::arg("rng"), py::arg("tau") = 1.0);
  m.def("estimate_ste", [](const PolytopeSpec& s, const Vector& t, const py::object& loss, std::size_t samples,
                           Rng& rng, const py::object& noise) {
    return estimate_dict(estimate_ste(s, t, noise_of(noise), downstream_of(loss), samples, rng));
  }, py::arg("spec"), py::arg("theta"), py::arg("loss"), py::arg("samples"), py::arg("rng"),
     py::arg("noise") = "gumbel");
  m.def("estimate_gumbel_softmax", [](const PolytopeSpec& s, const Vector& t, const py::object& loss,
                                      std::size_t samples, Rng& rng, double tau) {
    return estimate_dict(estimate_gumbel_softmax(s, t, tau, downstream_of(loss), samples, rng));
  }, py::arg("spec"), py::arg("theta"), py::arg("loss"), py::arg("samples"), py::arg("rng"), py::arg("tau") = 1.0);
  m.def("estimate_imle", [](const PolytopeSpec& s, const Vector& t, const py::object& loss, double lambda,
                            std::size_t samples, Rng& rng, const std::string& mode, const py::object& noise) {
    return estimate_dict(estimate_imle(s, t, noise_of(noise), downstream_of(loss), lambda, samples, mode_of(mode), rng));
  }, py::arg("spec"), py::arg("theta"), py::arg("loss"), py::arg("lam"), py::arg("samples"), py::arg("rng"),
     py::arg("mode") = "central", py::arg("noise") = "gumbel");

  py::class_<AimleController>(m, "AimleController")
      .def(py::init([](double alpha, double g_bar, double eta, double c, double gamma) {
        AimleController ctl{alpha, g_bar, eta, c, gamma, 0};
        ctl.validate();
        return ctl;
      }), py::arg("alpha") = 0.0, py::arg("g_bar") = 1.0, py::arg("eta") = 1e-3, py::arg("c") = 1.0,
          py::arg("gamma") = 0.9)
      .def_readwrite("alpha", &AimleController::alpha)
      .def_readwrite("g_bar", &AimleController::g_bar)
      .def_readwrite("eta", &AimleController::eta)
      .def_readwrite("c", &AimleController::c)
      .def_readwrite("gamma", &AimleController::gamma)
      .def_readwrite("t", &AimleController::t)
      .def(py::self == py::self)
      .def("__repr__", [](const AimleController& c) {
        std::ostringstream out;
        out << "AimleController(alpha=" << c.alpha << ", g_bar=" << c.g_bar << ", eta=" << c.eta << ", c=" << c.c
            << ", gamma=" << c.gamma << ", t=" << c.t << ")";
        return out.str();
      });
  m.def("compute_lambda", [](const AimleController& c, double theta_norm, const Vector& norms) {
    return compute_lambda(c, theta_norm, norms);
  });
  m.def("update_ema", [](const AimleController& c, const Vector& l0) { return update_ema(c, l0); });
  m.def("update_alpha", &update_alpha);
  m.def("estimate_aimle", [](const PolytopeSpec& s, const Vector& t, const py::object& loss,
                             const AimleController& controller, std::size_t samples, Rng& rng,
                             const std::string& mode, const py::object& noise) {
    const auto step = estimate_aimle(s, t, noise_of(noise), downstream_of(loss), controller, samples,
                                     mode_of(mode), rng);
    auto d = estimate_dict(step.estimate);
    d["lambda"] = step.lambda;
    d["controller"] = step.controller;
    return d;
  }, py::arg("spec"), py::arg("theta"), py::arg("loss"), py::arg("controller"), py::arg("samples"),
     py::arg("rng"), py::arg("mode") = "central", py::arg("noise") = "gumbel");

  m.def("quad_loss", [](const Vector& b, const Vector& z) {
    const auto v = quad_loss(b, z);
    return std::make_pair(v.value, v.grad);
  }, py::arg("b"), py::arg("z"));

  m.def("cosine_similarity", [](const Vector& a, const Vector& b) { return cosine_similarity(a, b); });
  m.def("lambda_grid", &lambda_grid, py::arg("lo"), py::arg("hi"), py::arg("points"));

  m.def("bench_cosine", [](const PolytopeSpec& spec, const std::vector<std::string>& estimators,
                           const std::vector<std::size_t>& samples, std::size_t seeds, std::uint64_t seed,
                           double lam, std::size_t jobs) {
    std::vector<EstimatorConfig> cfgs;
    for (const auto& id : estimators) {
      auto cfg = EstimatorConfig::from_id(id);
      cfg.lambda = lam;
      cfgs.push_back(cfg);
    }
    std::vector<BenchRecord> records;
    {
      py::gil_scoped_release release;
      records = bench_cosine(spec, cfgs, samples, seed_list(seed, seeds), {jobs, false, {}});
    }
    py::list out;
    for (const auto& r : records) {
      py::dict d;
      d["estimator"] = r.estimator;
      d["spec"] = r.spec;
      d["n"] = r.n;
      d["S"] = r.samples;
      d["lambda"] = r.lambda;
      d["tau"] = r.tau;
      d["seed"] = r.seed;
      d["cosine"] = r.cosine;
      d["l0_norm"] = r.l0_norm;
      d["zero_fraction"] = r.zero_fraction;
      out.append(d);
    }
    return out;
  }, py::arg("spec"), py::arg("estimators"), py::arg("samples"), py::arg("seeds") = 32, py::arg("seed") = 0,
     py::arg("lam") = 1.0, py::arg("jobs") = 1);

  m.def("expected_imle_gradient_exact", [](const PolytopeSpec& s, const Vector& t, const py::object& loss,
                                           double lambda) {
    const auto e = expected_imle_gradient_exact(s, t, downstream_of(loss), lambda);
    return std::make_pair(e.unscaled, e.scaled);
  }, py::arg("spec"), py::arg("theta"), py::arg("loss"), py::arg("lam"));

  m.def("run_toy_training", [](const PolytopeSpec& spec, const std::string& estimator, std::size_t steps,
                               std::uint64_t seed, std::size_t samples, const std::string& optimizer, double lr,
                               double lam) {
    auto cfg = EstimatorConfig::from_id(estimator);
    cfg.lambda = lam;
    OptimizerConfig opt;
    if (optimizer == "sgd") opt = Sgd{lr > 0 ? lr : Sgd{}.lr};
    else if (optimizer == "adam") opt = Adam{lr > 0 ? lr : Adam{}.lr};
    else throw InvalidArgument("optimizer must be 'sgd' or 'adam'");
    ToyOptions options;
    options.steps = steps;
    options.samples = samples;
    ToyRun run;
    {
      py::gil_scoped_release release;
      run = run_toy_training(spec, cfg, opt, seed, options);
    }
    py::list rows;
    for (const auto& r : run.trajectory) rows.append(py::make_tuple(r.step, r.loss, r.lambda, r.g_bar, r.alpha));
    py::dict d;
    d["trajectory"] = rows;
    d["theta"] = run.theta;
    d["controller"] = run.controller;
    return d;
  }, py::arg("spec"), py::arg("estimator") = "aimle_central", py::arg("steps") = 1000, py::arg("seed") = 0,
     py::arg("samples") = 1, py::arg("optimizer") = "adam", py::arg("lr") = 0.0, py::arg("lam") = 1.0);
}
