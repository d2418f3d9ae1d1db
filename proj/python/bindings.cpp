#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "seqslu/annotation.hpp"
#include "seqslu/audio.hpp"
#include "seqslu/cli.hpp"
#include "seqslu/corpus.hpp"
#include "seqslu/ctc.hpp"
#include "seqslu/alignment.hpp"
#include "seqslu/errors.hpp"
#include "seqslu/evaluation.hpp"
#include "seqslu/models.hpp"
#include "seqslu/training.hpp"

namespace py = pybind11;
using namespace seqslu;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> to_tensor(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  const double* p = a.data();
  return Tensor<double>({a.shape(0), a.shape(1)}, std::vector<double>(p, p + a.size()));
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
  py::array_t<T> out({t.rows(), t.cols()});
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

py::dict utterance_dict(const Utterance& u) {
  py::dict d;
  d["id"] = u.id;
  d["dialog_id"] = u.dialog_id;
  d["turn_index"] = u.turn_index;
  d["audio"] = u.audio;
  d["transcript"] = u.transcript;
  d["annotation"] = u.annotation();
  return d;
}

py::dict manifest_dict(const Manifest& m) {
  py::dict d;
  d["dir"] = m.dir.string();
  for (const auto& [name, split] : {std::pair{"train", &m.train}, {"dev", &m.dev}, {"test", &m.test}}) {
    py::list l;
    for (const auto& u : *split) l.append(utterance_dict(u));
    d[name] = l;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sequential spoken language understanding core";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "generate_corpus",
      [](uint64_t seed, int dialogs, const std::filesystem::path& out) {
        return manifest_dict(generate_corpus(seed, dialogs, out));
      },
      py::arg("seed"), py::arg("dialogs"), py::arg("out"));
  m.def(
      "read_corpus", [](const std::filesystem::path& p) { return manifest_dict(read_corpus(p)); }, py::arg("path"));

  m.def(
      "log_spectrogram",
      [](const std::vector<float>& samples, int sample_rate) {
        AudioWave w{samples, sample_rate};
        return to_array(log_spectrogram(w).frames);
      },
      py::arg("samples"), py::arg("sample_rate") = kDefaultSampleRate);
  m.def(
      "read_wav",
      [](const std::filesystem::path& p) {
        const AudioWave w = read_wav(p);
        return py::make_tuple(w.samples, w.sample_rate);
      },
      py::arg("path"));

  m.def(
      "ctc_loss",
      [](const Array& logp, const std::vector<int>& target) {
        const auto r = ctc_loss(to_tensor(logp), target);
        return py::make_tuple(r.loss, to_array(r.grad));
      },
      py::arg("logp"), py::arg("target"), "CTC negative log-likelihood and its gradient w.r.t. logp");
  m.def(
      "greedy_decode", [](const Array& logp) { return greedy_decode(to_tensor(logp)); }, py::arg("logp"));
  m.def(
      "collapse", [](const std::vector<int>& labels) { return collapse(labels); }, py::arg("frame_labels"));

  m.def("gold_feedback_index", &gold_feedback_index, py::arg("t"), py::arg("output_length"),
        py::arg("input_length"));

  m.def("wer", &wer, py::arg("hyps"), py::arg("refs"));
  m.def("cer", &cer, py::arg("hyp_concepts"), py::arg("ref_concepts"));
  m.def(
      "edit_stats",
      [](const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
        const EditStats s = levenshtein(hyp, ref);
        return py::make_tuple(s.substitutions, s.deletions, s.insertions, s.ref_length);
      },
      py::arg("hyp"), py::arg("ref"));
  m.def("extract_concepts", &extract_concepts, py::arg("decoded"));

  m.def(
      "parse_annotation",
      [](const std::string& s) {
        const Annotation a = parse_annotation(s);
        std::vector<std::pair<std::vector<std::string>, std::string>> chunks;
        for (const auto& c : a.chunks) chunks.emplace_back(c.tokens, c.label);
        return py::make_tuple(a.transcript, chunks);
      },
      py::arg("annotation"), "Returns (transcript, [(tokens, label), ...])");
  m.def(
      "serialize_annotation",
      [](const std::vector<std::pair<std::vector<std::string>, std::string>>& chunks) {
        Annotation a;
        for (const auto& [tokens, label] : chunks) {
          a.chunks.push_back(ConceptChunk{tokens, label});
          a.transcript.insert(a.transcript.end(), tokens.begin(), tokens.end());
        }
        return serialize_annotation(a);
      },
      py::arg("chunks"));

  m.def(
      "count_params",
      [](const std::string& stage, const std::string& variant) {
        return count_params(ModelConfig{}, parse_stage_kind(stage), parse_slu_variant(variant));
      },
      py::arg("stage"), py::arg("variant") = "base", "Parameter count under the default configuration");
  m.def(
      "lr_at_epoch",
      [](int epoch, double lr0, int total_epochs) {
        TrainSchedule s;
        s.lr0 = lr0;
        s.total_epochs = total_epochs;
        return lr_at_epoch(epoch, s);
      },
      py::arg("epoch"), py::arg("lr0") = 0.0005, py::arg("total_epochs") = 60);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "seqslu");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation; returns (exit_code, stdout, stderr)");
}
