#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "samkit/corpus.hpp"
#include "samkit/metrics.hpp"
#include "samkit/privacy.hpp"
#include "samkit/synthesis.hpp"
#include "samkit/util.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_samkit, m) {
  m.doc() = "Native bindings for the synthetic assignment pipeline";
  m.attr("__version__") = "0.1.0";

  m.def("word_count", [](const std::string& text) { return samkit::word_count(text); },
        py::arg("text"));
  m.def("sha256_hex", [](const std::string& data) { return samkit::sha256_hex(data); },
        py::arg("data"));

  py::class_<samkit::SimilarityScore>(m, "SimilarityScore")
      .def_readonly("precision", &samkit::SimilarityScore::precision)
      .def_readonly("recall", &samkit::SimilarityScore::recall)
      .def_readonly("f1", &samkit::SimilarityScore::f1);
  m.def(
      "similarity",
      [](const std::string& real_text, const std::string& synthetic_text, std::size_t dim) {
        samkit::HashEmbedder embedder(dim);
        return samkit::similarity(real_text, synthetic_text, embedder);
      },
      py::arg("real_text"), py::arg("synthetic_text"), py::arg("dim") = 64);

  m.def("pcc", &samkit::pcc, py::arg("x"), py::arg("y"));
  m.def("mae", &samkit::mae, py::arg("x"), py::arg("y"));

  py::class_<samkit::WelchResult>(m, "WelchResult")
      .def_readonly("t", &samkit::WelchResult::t)
      .def_readonly("df", &samkit::WelchResult::df)
      .def_readonly("p_two_sided", &samkit::WelchResult::p_two_sided);
  m.def("welch_t_test", &samkit::welch_t_test, py::arg("a"), py::arg("b"));

  m.def("parse_verdict", &samkit::parse_verdict, py::arg("judge_output"));
  m.def(
      "build_mimicry_prompt",
      [](const std::string& kind, const std::string& method, const std::string& real_description,
         const std::string& synthetic_description, const std::string& real_submission,
         bool prompt_protection) {
        samkit::MimicryTask task;
        task.kind = kind == "submission" ? samkit::ArtifactKind::submission
                                         : samkit::ArtifactKind::description;
        task.method = samkit::parse_method(method);
        task.real_description = real_description;
        task.synthetic_description = synthetic_description;
        task.real_submission = real_submission;
        task.real_submission_word_count = samkit::word_count(real_submission);
        task.prompt_protection = prompt_protection;
        auto messages = samkit::build_mimicry_prompt(task, samkit::PromptLibrary::builtin());
        py::list out;
        for (const auto& message : messages) {
          py::dict entry;
          entry["role"] = message.role;
          entry["content"] = message.text;
          out.append(entry);
        }
        return out;
      },
      py::arg("kind"), py::arg("method"), py::arg("real_description"),
      py::arg("synthetic_description") = "", py::arg("real_submission") = "",
      py::arg("prompt_protection") = false);
  m.def("extract_synthetic", &samkit::extract_synthetic, py::arg("response"));
  m.def("protection_rate", &samkit::protection_rate, py::arg("clean"), py::arg("total"));
  m.def("proportional_sample", &samkit::proportional_sample, py::arg("pool"), py::arg("n"),
        py::arg("seed"));
}
