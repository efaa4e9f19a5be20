#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fdshape/errors.hpp"
#include "fdshape/genplant.hpp"
#include "fdshape/norms.hpp"
#include "fdshape/problem_io.hpp"
#include "fdshape/rational.hpp"
#include "fdshape/synthesis.hpp"

namespace py = pybind11;
using namespace fdshape;

PYBIND11_MODULE(_fdshape, m) {
    m.doc() = "fault detection filter synthesis by residual shaping";

    static py::exception<Error> exc(m, "FdshapeError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(exc.ptr(), e.what());
        }
    });

    py::class_<StateSpace>(m, "StateSpace")
        .def(py::init<Matrix, Matrix, Matrix, Matrix>(), py::arg("A"),
             py::arg("B"), py::arg("C"), py::arg("D"))
        .def_readonly("A", &StateSpace::A)
        .def_readonly("B", &StateSpace::B)
        .def_readonly("C", &StateSpace::C)
        .def_readonly("D", &StateSpace::D)
        .def("order", &StateSpace::order)
        .def("inputs", &StateSpace::inputs)
        .def("outputs", &StateSpace::outputs);

    py::class_<RationalTF>(m, "RationalTF")
        .def(py::init<std::vector<double>, std::vector<double>>(),
             py::arg("num"), py::arg("den"))
        .def_readonly("num", &RationalTF::num)
        .def_readonly("den", &RationalTF::den);

    py::class_<ChannelSpan>(m, "ChannelSpan")
        .def_readonly("name", &ChannelSpan::name)
        .def_readonly("offset", &ChannelSpan::offset)
        .def_readonly("width", &ChannelSpan::width);

    py::class_<GeneralizedPlant>(m, "GeneralizedPlant")
        .def_readonly("A", &GeneralizedPlant::A)
        .def_readonly("B1", &GeneralizedPlant::B1)
        .def_readonly("B2", &GeneralizedPlant::B2)
        .def_readonly("C1", &GeneralizedPlant::C1)
        .def_readonly("C2", &GeneralizedPlant::C2)
        .def_readonly("D11", &GeneralizedPlant::D11)
        .def_readonly("D12", &GeneralizedPlant::D12)
        .def_readonly("D21", &GeneralizedPlant::D21)
        .def_readonly("D22", &GeneralizedPlant::D22)
        .def("order", &GeneralizedPlant::order);

    py::class_<SynthesisConfig>(m, "SynthesisConfig")
        .def(py::init<>())
        .def_readwrite("gamma0", &SynthesisConfig::gamma0)
        .def_readwrite("mu", &SynthesisConfig::mu)
        .def_readwrite("max_outer_iters", &SynthesisConfig::max_outer_iters)
        .def_readwrite("shared_lyapunov", &SynthesisConfig::shared_lyapunov)
        .def_readwrite("disturbance_channel",
                       &SynthesisConfig::disturbance_channel)
        .def_readwrite("fault_channel", &SynthesisConfig::fault_channel)
        .def_readwrite("residual_channel",
                       &SynthesisConfig::residual_channel);

    py::class_<IterationRecord>(m, "IterationRecord")
        .def_readonly("iter", &IterationRecord::iter)
        .def_readonly("nu2_step1", &IterationRecord::nu2_step1)
        .def_readonly("nu2_step2", &IterationRecord::nu2_step2);

    py::class_<VerifyResult>(m, "VerifyResult")
        .def_readonly("hinf_disturbance", &VerifyResult::hinf_disturbance)
        .def_readonly("hminus_fault", &VerifyResult::hminus_fault)
        .def_readonly("J", &VerifyResult::J)
        .def_readonly("omegas", &VerifyResult::omegas)
        .def_readonly("smax_disturbance", &VerifyResult::smax_disturbance)
        .def_readonly("smin_fault", &VerifyResult::smin_fault);

    py::class_<SynthesisResult>(m, "SynthesisResult")
        .def_readonly("Q", &SynthesisResult::Q)
        .def_readonly("nu_certified", &SynthesisResult::nu_certified)
        .def_readonly("gamma0", &SynthesisResult::gamma0)
        .def_readonly("history", &SynthesisResult::history)
        .def_readonly("balanced", &SynthesisResult::balanced)
        .def_readonly("message", &SynthesisResult::message)
        .def_readonly("check", &SynthesisResult::check)
        .def_property_readonly("converged", [](const SynthesisResult& r) {
            return r.status == SynthesisStatus::Converged;
        });

    m.def("hinf_norm",
          [](const StateSpace& s) { return hinf_norm(s); },
          py::arg("sys"), "peak gain over frequency (requires stability)");
    m.def("hminus_index",
          [](const StateSpace& s) { return hminus_index(s); },
          py::arg("sys"),
          "minimum singular value over all frequencies, including the "
          "feedthrough limit");
    m.def("build_fdi_plant", &build_fdi_plant, py::arg("G"), py::arg("C"),
          py::arg("Gd"), py::arg("Gf"),
          "weighted generalized plant of the closed loop, channels d/f -> e");
    m.def("close_loop", &close_loop, py::arg("plant"), py::arg("filter"));
    m.def("synthesize", &synthesize, py::arg("plant"),
          py::arg("config") = SynthesisConfig{},
          py::call_guard<py::gil_scoped_release>());
    m.def("verify", &verify, py::arg("plant"), py::arg("filter"),
          py::arg("disturbance_channel") = "d", py::arg("fault_channel") = "f",
          py::arg("residual_channel") = "e",
          py::call_guard<py::gil_scoped_release>());
    m.def("post_scale_update", &post_scale_update, py::arg("plant"),
          py::arg("filter"), py::arg("gamma0"),
          py::arg("disturbance_channel") = "d",
          py::arg("residual_channel") = "e");
    m.def("scale_output", &scale_output, py::arg("sys"), py::arg("alpha"));
    m.def("load_problem", &load_problem, py::arg("path"));
    m.def("problem_plant", &problem_plant, py::arg("problem"));

    py::class_<ProblemFile>(m, "ProblemFile")
        .def_readonly("name", &ProblemFile::name)
        .def_readonly("config", &ProblemFile::config);
}
