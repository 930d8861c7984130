#include <pybind11/eigen.h>
#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bragg/analysis.hpp"
#include "bragg/cli.hpp"
#include "bragg/core.hpp"
#include "bragg/dynamics.hpp"
#include "bragg/interferometer.hpp"
#include "bragg/objectives.hpp"
#include "bragg/optimizer.hpp"
#include "bragg/waveforms.hpp"

namespace py = pybind11;
using namespace bragg;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bragg pulse design and interferometer simulation";
  m.attr("__version__") = cli::kVersion;

  // Error hierarchy: ConfigError and IoError are ValueError / OSError subclasses.
  static py::exception<Error> error(m, "BraggError", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<NumericalError> numerical_error(m, "NumericalError", error.ptr());
  static py::exception<IoError> io_error(m, "IoError", PyExc_OSError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical_error, e.what());
    } catch (const IoError& e) {
      py::set_error(io_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<AtomSpecies>(m, "AtomSpecies")
      .def_static("rubidium87", &AtomSpecies::rubidium87)
      .def_property_readonly("mass", &AtomSpecies::mass)
      .def_property_readonly("wavenumber", &AtomSpecies::wavenumber)
      .def_property_readonly("recoil_frequency", [](const AtomSpecies& s) { return recoil_frequency(s); });

  py::class_<BlochBasis>(m, "BlochBasis")
      .def(py::init<int, int, int>(), py::arg("order"), py::arg("m_min"), py::arg("m_max"))
      .def_static("for_order", &BlochBasis::for_order)
      .def_property_readonly("order", &BlochBasis::order)
      .def_property_readonly("m_min", &BlochBasis::m_min)
      .def_property_readonly("m_max", &BlochBasis::m_max)
      .def_property_readonly("dim", &BlochBasis::dim)
      .def("index", &BlochBasis::index)
      .def("__repr__", [](const BlochBasis& b) {
        return "BlochBasis(order=" + std::to_string(b.order()) + ", m=[" + std::to_string(b.m_min()) + ", " +
               std::to_string(b.m_max()) + "])";
      });

  py::enum_<PulseRole>(m, "PulseRole")
      .value("mirror", PulseRole::mirror)
      .value("beamsplitter", PulseRole::beamsplitter)
      .value("custom", PulseRole::custom);

  py::class_<WaveformSample>(m, "WaveformSample")
      .def(py::init<>())
      .def(py::init([](double rabi, double phase, double detuning) { return WaveformSample{rabi, phase, detuning}; }),
           py::arg("rabi"), py::arg("phase") = 0.0, py::arg("detuning") = 0.0)
      .def_readwrite("rabi", &WaveformSample::rabi)
      .def_readwrite("phase", &WaveformSample::phase)
      .def_readwrite("detuning", &WaveformSample::detuning);

  py::class_<PulseWaveform>(m, "PulseWaveform")
      .def(py::init<>())
      .def_readwrite("dt", &PulseWaveform::dt)
      .def_readwrite("samples", &PulseWaveform::samples)
      .def_readwrite("role", &PulseWaveform::role)
      .def_readwrite("order", &PulseWaveform::order)
      .def_readwrite("omega_max", &PulseWaveform::omega_max)
      .def_readwrite("delta_max", &PulseWaveform::delta_max)
      .def_readwrite("filter_cutoff", &PulseWaveform::filter_cutoff)
      .def_property_readonly("duration", &PulseWaveform::duration)
      .def_property_readonly("peak_rabi", &PulseWaveform::peak_rabi)
      .def("__len__", &PulseWaveform::size)
      .def("__eq__", [](const PulseWaveform& a, const PulseWaveform& b) { return a == b; })
      .def("to_json", [](const PulseWaveform& w) { return serialize(w); })
      .def_static("from_json", [](const std::string& text) { return deserialize(text); })
      .def("to_csv", [](const PulseWaveform& w) { return to_csv(w); })
      .def("violations", [](const PulseWaveform& w) { return invariant_violations(w); });

  m.def("load_waveform", &load_waveform, py::arg("path"));
  m.def("save_waveform", &save_waveform, py::arg("waveform"), py::arg("path"));
  m.def("gaussian_pulse", &gaussian_pulse, py::arg("omega_max"), py::arg("sigma_tau"), py::arg("duration"),
        py::arg("dt"), py::arg("detuning") = 0.0, py::arg("phase") = 0.0);

  m.def(
      "propagator",
      [](const PulseWaveform& w, double delta_p, double beta, const BlochBasis& basis, const AtomSpecies& species) {
        return pulse_propagator(to_segments(w, species), delta_p, beta, basis, species).matrix;
      },
      py::arg("waveform"), py::arg("delta_p") = 0.0, py::arg("beta") = 0.0, py::arg("basis"),
      py::arg("species") = AtomSpecies::rubidium87(),
      "Pulse propagator in the Bloch basis (rows and columns ordered m_min..m_max).");
  m.def(
      "transfer_fidelity",
      [](const PulseWaveform& w, double delta_p, double beta, const AtomSpecies& species) {
        const BlochBasis b = BlochBasis::for_order(w.order);
        return state_transfer_fidelity(pulse_propagator(to_segments(w, species), delta_p, beta, b, species), 0,
                                       w.order);
      },
      py::arg("waveform"), py::arg("delta_p") = 0.0, py::arg("beta") = 0.0,
      py::arg("species") = AtomSpecies::rubidium87());
  m.def("unitarity_error", &unitarity_error);

  py::class_<FidelityLandscape>(m, "FidelityLandscape")
      .def_readonly("delta_p", &FidelityLandscape::delta_p)
      .def_readonly("beta", &FidelityLandscape::beta)
      .def_readonly("fidelity", &FidelityLandscape::fidelity);
  m.def(
      "fidelity_landscape",
      [](const PulseWaveform& w, const std::vector<double>& delta_p, const std::vector<double>& beta) {
        const AtomSpecies rb = AtomSpecies::rubidium87();
        return fidelity_landscape(w, delta_p, beta, BlochBasis::for_order(w.order), rb);
      },
      py::arg("waveform"), py::arg("delta_p"), py::arg("beta"));

  py::class_<OptimizationConfig>(m, "OptimizationConfig")
      .def_static("mirror_defaults", &OptimizationConfig::mirror_defaults)
      .def_static("beamsplitter_defaults", &OptimizationConfig::beamsplitter_defaults)
      .def_static("from_json", [](const std::string& text) { return parse_optimization_config(text); })
      .def_readwrite("order", &OptimizationConfig::order)
      .def_readwrite("segments", &OptimizationConfig::segments)
      .def_readwrite("dt", &OptimizationConfig::dt)
      .def_readwrite("omega_max", &OptimizationConfig::omega_max)
      .def_readwrite("delta_max", &OptimizationConfig::delta_max)
      .def_readwrite("filter_cutoff", &OptimizationConfig::filter_cutoff)
      .def_readwrite("sigma_p", &OptimizationConfig::sigma_p)
      .def_readwrite("beta_min", &OptimizationConfig::beta_min)
      .def_readwrite("beta_max", &OptimizationConfig::beta_max)
      .def_readwrite("batch_size", &OptimizationConfig::batch_size)
      .def_readwrite("validation_size", &OptimizationConfig::validation_size)
      .def_readwrite("iterations", &OptimizationConfig::iterations)
      .def_readwrite("seed", &OptimizationConfig::seed)
      .def("validate", &OptimizationConfig::validate);

  py::class_<OptimizationResult>(m, "OptimizationResult")
      .def_readonly("waveform", &OptimizationResult::waveform)
      .def_readonly("validation_cost", &OptimizationResult::validation_cost)
      .def_property_readonly("cost", [](const OptimizationResult& r) { return r.trace.cost; })
      .def_property_readonly("best_iteration", [](const OptimizationResult& r) { return r.trace.best_iteration; });
  m.def("optimize_pulse", &optimize_pulse, py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("calibrate_gaussian", &calibrate_gaussian, py::arg("config"));
  m.def(
      "waveform_cost",
      [](const OptimizationConfig& c, const PulseWaveform& w) { return waveform_cost(c, w, validation_ensemble(c)); },
      py::arg("config"), py::arg("waveform"), "Cost on the config's validation ensemble.");

  py::class_<SinusoidFit>(m, "SinusoidFit")
      .def_readonly("amplitude", &SinusoidFit::amplitude)
      .def_readonly("frequency", &SinusoidFit::frequency)
      .def_readonly("phase", &SinusoidFit::phase)
      .def_readonly("offset", &SinusoidFit::offset)
      .def_readonly("slope", &SinusoidFit::slope)
      .def_readonly("amplitude_error", &SinusoidFit::amplitude_error)
      .def_readonly("frequency_error", &SinusoidFit::frequency_error)
      .def_readonly("phase_error", &SinusoidFit::phase_error)
      .def_readonly("residual_rms", &SinusoidFit::residual_rms)
      .def("__call__", &SinusoidFit::evaluate);
  m.def("fit_sinusoid",
        py::overload_cast<const std::vector<double>&, const std::vector<double>&, std::optional<double>, bool>(
            &fit_sinusoid),
        py::arg("x"), py::arg("y"), py::arg("frequency") = py::none(), py::arg("linear_trend") = false);

  py::class_<LineFit>(m, "LineFit")
      .def_readonly("slope", &LineFit::slope)
      .def_readonly("slope_error", &LineFit::slope_error)
      .def_readonly("intercept", &LineFit::intercept)
      .def_readonly("intercept_error", &LineFit::intercept_error);
  m.def("extract_scale_factor", &extract_scale_factor, py::arg("acceleration"), py::arg("phase"),
        py::arg("phase_error") = std::vector<double>{});

  py::class_<SourceDistribution>(m, "SourceDistribution")
      .def(py::init([](double sigma_p, int nodes) { return SourceDistribution{sigma_p, nodes}; }),
           py::arg("sigma_p") = 0.8, py::arg("nodes") = 64)
      .def_static("single_atom", &SourceDistribution::single_atom)
      .def_readwrite("sigma_p", &SourceDistribution::sigma_p)
      .def_readwrite("nodes", &SourceDistribution::nodes);

  py::class_<InterferometerSequence>(m, "InterferometerSequence")
      .def(py::init<>())
      .def_readwrite("beamsplitter", &InterferometerSequence::beamsplitter)
      .def_readwrite("mirror", &InterferometerSequence::mirror)
      .def_readwrite("order", &InterferometerSequence::order)
      .def_readwrite("interrogation_time", &InterferometerSequence::interrogation_time)
      .def_readwrite("acceleration", &InterferometerSequence::acceleration)
      .def_readwrite("chirp_rate", &InterferometerSequence::chirp_rate)
      .def_readwrite("readout_phase", &InterferometerSequence::readout_phase)
      .def_readwrite("intensity", &InterferometerSequence::intensity)
      .def_readwrite("delta_p", &InterferometerSequence::delta_p)
      .def("validate", &InterferometerSequence::validate);

  m.def(
      "run_sequence",
      [](const InterferometerSequence& s, const SourceDistribution& source) {
        const ArmPopulations p =
            run_sequence(s, source, BlochBasis::for_order(s.order), AtomSpecies::rubidium87());
        return py::dict(py::arg("p1") = p.p1, py::arg("p2") = p.p2, py::arg("leakage") = p.leakage);
      },
      py::arg("sequence"), py::arg("source") = SourceDistribution::single_atom());
  m.def(
      "phase_scan",
      [](const InterferometerSequence& s, const std::vector<double>& phases, double sigma_beta,
         std::uint64_t seed, int shots, const SourceDistribution& source) {
        py::gil_scoped_release release;
        const FringeDataset d = phase_scan(s, phases, {sigma_beta, seed, shots}, source,
                                           BlochBasis::for_order(s.order), AtomSpecies::rubidium87());
        return std::make_pair(d.values, d.shot_sigma);
      },
      py::arg("sequence"), py::arg("phases"), py::arg("sigma_beta") = 0.0, py::arg("seed") = 0,
      py::arg("shots") = 1, py::arg("source") = SourceDistribution::single_atom(),
      "Returns (P1 - P2, shot error) at each readout phase.");
  m.def("phase_grid", &phase_grid, py::arg("points") = 33);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "bragg-forge");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns its exit code.");
}
