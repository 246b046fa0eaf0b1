#include "mimohmc/channel.hpp"
#include "mimohmc/coding.hpp"
#include "mimohmc/constellation.hpp"
#include "mimohmc/detectors.hpp"
#include "mimohmc/diagnostics.hpp"
#include "mimohmc/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vector>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace mimohmc;

namespace {

// draws[chain, step, dim] in C order.
ChainSamples samples_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& draws) {
  if (draws.ndim() != 3) throw py::value_error("draws must have shape (chains, steps, dims)");
  const auto* p = draws.data();
  std::vector<double> data(p, p + draws.size());
  return ChainSamples::from_array(static_cast<int>(draws.shape(0)), static_cast<int>(draws.shape(1)),
                                  static_cast<int>(draws.shape(2)), std::move(data));
}

py::array_t<double> samples_to_numpy(const ChainSamples& s) {
  py::array_t<double> out({s.chains, s.steps, s.dims});
  std::copy(s.draws.begin(), s.draws.end(), out.mutable_data());
  return out;
}

RealLinearSystem make_system(const Matrix& h, const Vector& y, double noise_var) {
  if (h.rows() != y.size()) throw py::value_error("H and y disagree in the receive dimension");
  RealLinearSystem sys;
  sys.h = h;
  sys.y = y;
  sys.noise_var = noise_var;
  return sys;
}

py::dict result_dict(const DetectionResult& r) {
  py::dict d("u_soft"_a = r.u_soft, "u_hard"_a = r.u_hard, "hard_indices"_a = r.hard_indices,
             "degraded"_a = r.degraded, "iterations"_a = r.iterations);
  d["u_var"] = r.u_var.size() ? py::cast(r.u_var) : py::none();
  d["samples"] = r.samples ? py::object(samples_to_numpy(*r.samples)) : py::none();
  return d;
}

py::dict row_dict(const CellResult& r) {
  return py::dict("snr_db"_a = r.snr_db, "detector"_a = r.detector, "modulation"_a = r.modulation,
                  "n_tx"_a = r.n_tx, "n_rx"_a = r.n_rx, "rho"_a = r.rho, "coded"_a = r.coded,
                  "iteration"_a = r.iteration, "trials"_a = r.trials, "bit_errors"_a = r.bit_errors,
                  "total_bits"_a = r.total_bits, "ber"_a = r.ber, "ess"_a = r.ess, "r_hat"_a = r.r_hat,
                  "conv_rate"_a = r.conv_rate, "seconds"_a = r.seconds);
}

// Lists and tuples become comma-separated values, matching the CLI syntax.
std::string setting_text(const py::handle& value) {
  if (!py::isinstance<py::list>(value) && !py::isinstance<py::tuple>(value)) return py::str(value);
  std::string out;
  for (const auto& item : value) {
    if (!out.empty()) out += ',';
    out += py::str(item).cast<std::string>();
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MIMO detection with Hamiltonian Monte Carlo";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Constellation>(m, "Constellation")
      .def(py::init(&Constellation::from_name), "name"_a, "avg_power"_a = 0.5)
      .def_property_readonly("order", &Constellation::order)
      .def_property_readonly("name", &Constellation::name)
      .def_property_readonly("bits_per_dim", &Constellation::bits_per_dim)
      .def_property_readonly("levels", &Constellation::levels)
      .def("label", &Constellation::label, "index"_a)
      .def("quantize", [](const Constellation& c, const Vector& u) { return quantize(u, c).values; }, "u"_a)
      .def("__repr__", [](const Constellation& c) { return "<Constellation " + c.name() + ">"; });

  m.def(
      "draw_system",
      [](int n_tx, int n_rx, double snr_db, const std::string& modulation, double rho, std::uint64_t seed) {
        const Constellation c = Constellation::from_name(modulation, 0.5);
        ComplexSystemSpec spec{n_tx, n_rx, rho, snr_db, c.avg_power()};
        Rng rng = make_rng(seed);
        UncodedInstance inst = draw_uncoded_instance(spec, c, rng);
        return py::dict("H"_a = inst.sys.h, "y"_a = inst.sys.y, "u"_a = *inst.sys.u_true,
                        "noise_var"_a = inst.sys.noise_var, "bits"_a = inst.bits);
      },
      "n_tx"_a, "n_rx"_a, "snr_db"_a, "modulation"_a = "qpsk", "rho"_a = 0.0, "seed"_a = 1,
      "Draws one uncoded instance in the real-valued representation.");

  m.def(
      "detect",
      [](const Matrix& h, const Vector& y, double noise_var, const std::string& detector,
         const std::string& modulation, std::uint64_t seed) {
        const Constellation c = Constellation::from_name(modulation, 0.5);
        const DetectorKind kind = parse_detector(detector);
        const DetectorConfig cfg = DetectorConfig::defaults(kind, static_cast<int>(h.cols() / 2), c);
        DetectionResult r;
        {
          py::gil_scoped_release release;
          r = mimohmc::detect(make_system(h, y, noise_var), c, cfg, seed);
        }
        return result_dict(r);
      },
      "H"_a, "y"_a, "noise_var"_a, "detector"_a = "hmc", "modulation"_a = "qpsk", "seed"_a = 1);

  m.def(
      "exhaustive_ml",
      [](const Matrix& h, const Vector& y, double noise_var, const std::string& modulation) {
        return exhaustive_ml(make_system(h, y, noise_var), Constellation::from_name(modulation, 0.5));
      },
      "H"_a, "y"_a, "noise_var"_a, "modulation"_a = "qpsk");

  m.def(
      "ess", [](const py::array_t<double>& draws, int dim) { return ess(samples_from_numpy(draws), dim); },
      "draws"_a, "dim"_a = 0);
  m.def(
      "r_hat", [](const py::array_t<double>& draws, int dim) { return r_hat(samples_from_numpy(draws), dim); },
      "draws"_a, "dim"_a = 0);

  py::class_<LdpcCode>(m, "LdpcCode")
      .def_static("default", &LdpcCode::default_regular)
      .def_static("toy", &LdpcCode::toy)
      .def_static("peg", &LdpcCode::progressive_edge_growth, "length"_a, "col_weight"_a = 3, "row_weight"_a = 6,
                  "seed"_a = 1)
      .def_static("load", &LdpcCode::load, "path"_a)
      .def("save", &LdpcCode::save, "path"_a)
      .def_property_readonly("length", &LdpcCode::length)
      .def_property_readonly("dimension", &LdpcCode::dimension)
      .def_property_readonly("rate", &LdpcCode::rate)
      .def("encode", [](const LdpcCode& code, const Bits& info) { return code.encode(info); }, "info"_a)
      .def("is_codeword", [](const LdpcCode& code, const Bits& w) { return code.is_codeword(w); }, "word"_a)
      .def(
          "decode",
          [](const LdpcCode& code, const std::vector<double>& llr, int max_iter) {
            const DecodeResult r = ldpc_decode(llr, code, max_iter);
            return py::dict("llr"_a = r.llr, "bits"_a = r.bits, "converged"_a = r.converged,
                            "iterations"_a = r.iterations);
          },
          "llr"_a, "max_iter"_a = 5);

  m.def(
      "run_experiment",
      [](const py::dict& settings) {
        ExperimentConfig cfg;
        for (const auto& [key, value] : settings) apply_setting(cfg, py::str(key), setting_text(value));
        cfg.validate();
        ResultTable table;
        {
          py::gil_scoped_release release;
          table = run_experiment(cfg);
        }
        py::list rows;
        for (const auto& r : table) rows.append(row_dict(r));
        return rows;
      },
      "settings"_a,
      "Runs a BER sweep. Keys and values are the same as the CLI's --set options; returns one dict per row.");

  m.def("setting_keys", &setting_keys);
}
