#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cru/classifier.hpp"
#include "cru/data.hpp"
#include "cru/errors.hpp"
#include "cru/rc_features.hpp"
#include "cru/recurrent.hpp"
#include "cru/verification.hpp"

namespace py = pybind11;
using namespace cru;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() < 1 || a.ndim() > 3) throw DimensionError("expected an array of rank 1 to 3");
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

/// One cell with its parameters, usable from Python without a tape.
class PyCell {
 public:
  PyCell(const std::string& variant, std::size_t input_dim, std::size_t hidden_dim,
         std::size_t filter_length, std::uint64_t seed) {
    Rng rng(seed);
    cell_ = Cell::create("cell", parse_variant(variant), input_dim, hidden_dim, filter_length, rng);
  }

  py::dict params() {
    py::dict out;
    for (Param* p : cell_.params()) out[py::str(p->name)] = to_array(p->value);
    return out;
  }

  void set_param(const std::string& name, const Array& value) {
    for (Param* p : cell_.params()) {
      if (p->name != name) continue;
      Tensor t = to_tensor(value);
      if (t.shape() != p->value.shape())
        throw DimensionError(name + ": expected " + to_string(p->value.shape()) + ", got " +
                             to_string(t.shape()));
      p->value = std::move(t);
      return;
    }
    throw ConfigError("unknown parameter '" + name + "'");
  }

  py::tuple run(const Array& e, const std::vector<std::size_t>& lengths) {
    Tape tape;
    auto out = run_sequence(cell_.bind(tape), tape.constant(to_tensor(e)), {}, lengths);
    return py::make_tuple(to_array(out.all_h.value()), to_array(out.final_h.value()));
  }

  Array gru_step(const Array& x, const Array& h) {
    Tape tape;
    auto bound = cell_.bind(tape);
    return to_array(cru::gru_step(bound.gru, tape.constant(to_tensor(x)), tape.constant(to_tensor(h))).value());
  }

  std::string variant() const { return variant_name(cell_.variant); }

 private:
  Cell cell_;
};

/// Small end-to-end classifier over raw sentences.
class PyClassifier {
 public:
  PyClassifier(const std::vector<std::string>& texts, const std::string& variant, std::size_t embed,
               std::size_t hidden, std::size_t filter_length, std::size_t fc, double dropout, double lr,
               std::size_t batch, std::uint64_t seed)
      : rng_(seed), shuffle_(seed + 1), dropout_rng_(seed + 2) {
    Corpus corpus;
    for (const auto& t : texts) corpus.samples.push_back({tokenize(t), 0});
    vocab_ = Vocab::build(corpus);
    config_.variant = parse_variant(variant);
    config_.embed_dim = embed;
    config_.hidden_dim = hidden;
    config_.filter_length = filter_length;
    config_.fc_dim = fc;
    config_.dropout = dropout;
    config_.lr = lr;
    config_.batch_size = batch;
    config_.seed = seed;
    config_.validate();
    model_ = SentimentModel::create(config_.model_config(vocab_.size()), rng_);
    auto params = model_.params();
    adam_ = AdamState(params, AdamConfig{lr});
  }

  std::vector<py::dict> fit(const std::vector<std::string>& texts, const std::vector<int>& labels,
                            std::size_t epochs) {
    const auto samples = encode(texts, labels);
    std::vector<py::dict> history;
    for (std::size_t e = 0; e < epochs; ++e) {
      const auto batches = batch_and_pad(samples, config_.batch_size, kPadId, &shuffle_);
      EpochMetrics m;
      {
        py::gil_scoped_release release;
        m = train_epoch(model_, adam_, batches, config_, dropout_rng_);
      }
      py::dict d;
      d["epoch"] = e + 1;
      d["loss"] = m.loss;
      d["accuracy"] = m.accuracy;
      history.push_back(d);
    }
    return history;
  }

  std::vector<double> predict_proba(const std::vector<std::string>& texts) {
    std::vector<double> out;
    for (const auto& t : texts) {
      const auto tokens = tokenize(t);
      if (tokens.empty()) throw ContractError("cannot classify an empty sentence");
      out.push_back(classify_sentence(model_, vocab_.encode(tokens)));
    }
    return out;
  }

  py::dict evaluate(const std::vector<std::string>& texts, const std::vector<int>& labels) {
    const auto samples = encode(texts, labels);
    const auto m = cru::evaluate(model_, batch_and_pad(samples, config_.batch_size));
    py::dict d;
    d["loss"] = m.loss;
    d["accuracy"] = m.accuracy;
    d["samples"] = m.samples;
    return d;
  }

  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  std::vector<EncodedSample> encode(const std::vector<std::string>& texts, const std::vector<int>& labels) {
    if (texts.size() != labels.size()) throw DimensionError("texts and labels differ in length");
    std::vector<EncodedSample> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto tokens = tokenize(texts[i]);
      if (tokens.empty()) throw ContractError("sample " + std::to_string(i) + " has no tokens");
      if (labels[i] != 0 && labels[i] != 1) throw ContractError("labels must be 0 or 1");
      out.push_back({vocab_.encode(tokens), labels[i]});
    }
    return out;
  }

  Rng rng_, shuffle_, dropout_rng_;
  Vocab vocab_;
  TrainConfig config_;
  SentimentModel model_;
  AdamState adam_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Contextual recurrent units: cells, features and a sentence classifier";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<IndexError>(m, "IndexError", PyExc_IndexError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("tokenize", [](const std::string& s) { return tokenize(s); }, py::arg("text"));
  m.def("doc_word_freq", [](const std::vector<std::string>& d) { return doc_word_freq(d); },
        py::arg("document"));
  m.def("count_of_query_word",
        [](const std::vector<std::string>& d, const std::vector<std::string>& q) {
          return count_of_query_word(d, q);
        },
        py::arg("document"), py::arg("query"));

  m.def(
      "same_length_conv",
      [](const Array& e, const Array& filters, const Array& bias, const std::string& activation) {
        Tape tape;
        const Var out = activate(parse_activation(activation),
                                 conv_same(tape.constant(to_tensor(e)), tape.constant(to_tensor(filters)),
                                           tape.constant(to_tensor(bias))));
        return to_array(out.value());
      },
      py::arg("embeddings"), py::arg("filters"), py::arg("bias"), py::arg("activation") = "relu",
      "Same-length 1-D convolution. embeddings [n, d_in] or [n, B, d_in], filters [d_out, k, d_in].");

  py::class_<PyCell>(m, "Cell")
      .def(py::init<const std::string&, std::size_t, std::size_t, std::size_t, std::uint64_t>(),
           py::arg("variant"), py::arg("input_dim"), py::arg("hidden_dim"), py::arg("filter_length") = 3,
           py::arg("seed") = 0)
      .def_property_readonly("variant", &PyCell::variant)
      .def("params", &PyCell::params)
      .def("set_param", &PyCell::set_param, py::arg("name"), py::arg("value"))
      .def("run", &PyCell::run, py::arg("embeddings"), py::arg("lengths") = std::vector<std::size_t>{},
           "Returns (all_h, final_h). embeddings is [n, d] or time-major [n, B, d].")
      .def("gru_step", &PyCell::gru_step, py::arg("x"), py::arg("h"));

  py::class_<PyClassifier>(m, "Classifier")
      .def(py::init<const std::vector<std::string>&, const std::string&, std::size_t, std::size_t, std::size_t,
                    std::size_t, double, double, std::size_t, std::uint64_t>(),
           py::arg("vocab_texts"), py::arg("variant") = "deep_enhanced", py::arg("embed") = 16,
           py::arg("hidden") = 16, py::arg("filter_length") = 3, py::arg("fc") = 32, py::arg("dropout") = 0.0,
           py::arg("lr") = 0.005, py::arg("batch") = 8, py::arg("seed") = 1)
      .def_property_readonly("vocab_size", &PyClassifier::vocab_size)
      .def("fit", &PyClassifier::fit, py::arg("texts"), py::arg("labels"), py::arg("epochs") = 1)
      .def("predict_proba", &PyClassifier::predict_proba, py::arg("texts"))
      .def("evaluate", &PyClassifier::evaluate, py::arg("texts"), py::arg("labels"));

  m.def(
      "gradcheck_suite",
      [](std::uint64_t seed, std::size_t seeds, double tol) {
        GradcheckSuiteOptions opt;
        opt.seed = seed;
        opt.seeds = seeds;
        opt.tol = tol;
        std::vector<py::dict> out;
        for (const auto& c : run_gradcheck_suite(opt)) {
          py::dict d;
          d["component"] = c.component;
          d["seed"] = c.seed;
          d["max_rel_error"] = c.report.max_rel_error;
          d["checked"] = c.report.checked;
          d["passed"] = c.report.passed;
          out.push_back(d);
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("seeds") = 5, py::arg("tol") = 1e-4);
}
