// Python bindings. Structured results cross the boundary as JSON text and
// are decoded by the pure-Python wrapper in poseattn/__init__.py.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <fstream>

#include "poseattn/attention_dump.hpp"
#include "poseattn/batching.hpp"
#include "poseattn/checkpoint.hpp"
#include "poseattn/config.hpp"
#include "poseattn/dataset.hpp"
#include "poseattn/evaluate.hpp"
#include "poseattn/gradcheck_runner.hpp"
#include "poseattn/ops.hpp"
#include "poseattn/pose.hpp"
#include "poseattn/synth.hpp"
#include "poseattn/train.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace poseattn;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Array to_array(const pose::FrameMatrix& m) {
  Array out({static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

pose::PoseSequence to_sequence(const Array& frames, bool second_subject) {
  if (frames.ndim() != 2 || frames.shape(1) != 150) {
    throw std::invalid_argument("expected a (frames, 150) array of joint coordinates");
  }
  pose::PoseSequence seq;
  seq.subject_present = {true, second_subject};
  for (py::ssize_t t = 0; t < frames.shape(0); ++t) {
    pose::Frame f;
    f.joints.assign(frames.data(t, 0), frames.data(t, 0) + 150);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

data::Split parse_split(const std::string& s) {
  if (s == "train") return data::Split::Train;
  if (s == "val") return data::Split::Val;
  if (s == "test") return data::Split::Test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

std::string generate(const std::string& spec_json, const std::string& path) {
  const auto spec = synth::spec_from_json(json::parse(spec_json));
  const auto g = synth::generate(spec);
  const fs::path file(path);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  data::save_dataset(g.dataset, file);
  auto manifest = data::manifest_json(g.dataset);
  manifest["spec"] = synth::to_json(spec);
  manifest["attempts"] = g.attempts;
  manifest["content_hash"] = data::content_hash(file);
  return manifest.dump();
}

std::string train(const std::string& config_json, const std::string& dataset,
                  const std::string& out_dir) {
  auto cfg = config::from_json(json::parse(config_json));
  cfg.dataset = dataset;
  config::validate(cfg);
  const auto ds = data::load_dataset(dataset);
  const batching::PreparedDataset prepared(ds);
  TrainResult r;
  {
    py::gil_scoped_release release;
    r = run_train(cfg, prepared, out_dir, data::content_hash(dataset));
  }
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"stream", e.stream},
                      {"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_accuracy", e.val_accuracy},
                      {"val_loss", e.val_loss},
                      {"improved", e.improved}});
  }
  json j = {{"epochs", epochs}, {"best_val_rgb", r.best_val_rgb}, {"best_val_pose", r.best_val_pose}};
  if (r.test) j["test_accuracy"] = r.test->accuracy;
  return j.dump();
}

std::string evaluate_checkpoint(const std::string& checkpoint, const std::string& dataset,
                                const std::string& split) {
  const auto models = load_checkpoint(checkpoint);
  const auto ds = data::load_dataset(dataset);
  const batching::PreparedDataset prepared(ds);
  const auto idx = ds.indices(parse_split(split));
  const auto r = evaluate(models, prepared, idx, models.config.train.eval_batch);
  json preds = json::array();
  for (const auto& p : r.predictions) {
    preds.push_back({{"id", p.id},
                     {"label", p.label},
                     {"predicted", p.predicted},
                     {"window_starts", p.window_starts},
                     {"logits", p.logits}});
  }
  return json{{"accuracy", r.accuracy},
              {"rgb_accuracy", r.rgb_accuracy},
              {"pose_accuracy", r.pose_accuracy},
              {"predictions", preds}}
      .dump();
}

std::string dump_attention(const std::string& checkpoint, const std::string& dataset,
                           const std::string& split, const std::string& out) {
  const auto models = load_checkpoint(checkpoint);
  const auto ds = data::load_dataset(dataset);
  const batching::PreparedDataset prepared(ds);
  const auto records = collect_attention(models, prepared, ds.indices(parse_split(split)));
  if (!out.empty()) write_jsonl(out, records);
  const auto s = summarize(records);
  return json{{"records", records.size()},
              {"active_hand_mass", s.active_hand_mass},
              {"event_mass", s.event_mass}}
      .dump();
}

std::string gradcheck(double eps, double tol, std::uint64_t seed) {
  TinyDims dims;
  dims.seed = seed;
  return to_json(run_gradcheck(default_gradcheck_cells(dims), eps, tol)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of poseattn";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<data::DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<config::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("softmax", [](const Array& x) { return to_array(softmax(to_tensor(x))); },
        "Row-wise softmax over the last axis of a 1-D or 2-D array.");
  m.def("matmul", [](const Array& a, const Array& b) {
    return to_array(matmul(to_tensor(a), to_tensor(b)));
  });
  m.def("augment_pose",
        [](const Array& frames, bool second_subject) {
          return to_array(pose::augment_pose(to_sequence(frames, second_subject)));
        },
        py::arg("frames"), py::arg("second_subject") = true);
  m.def("motion_stats",
        [](const Array& frames, bool second_subject) {
          return to_array(pose::motion_stats(to_sequence(frames, second_subject)));
        },
        py::arg("frames"), py::arg("second_subject") = true);
  m.def("eval_window_starts", [](std::size_t length, std::size_t window) {
    std::vector<std::size_t> starts;
    for (const auto& w : pose::sample_subsequences(length, window, pose::SampleMode::Eval)) {
      starts.push_back(w.front());
    }
    return starts;
  });

  m.def("default_spec_json", [](const std::string& task) {
    return synth::to_json(synth::default_spec(synth::parse_task(task))).dump();
  });
  m.def("default_config_json", [] { return config::to_json(config::RunConfig{}).dump(); });
  m.def("generate_json", &generate, py::arg("spec_json"), py::arg("path"));
  m.def("load_manifest_json", [](const std::string& path) {
    return data::manifest_json(data::load_dataset(path)).dump();
  });
  m.def("content_hash", [](const fs::path& path) { return data::content_hash(path); });
  m.def("train_json", &train, py::arg("config_json"), py::arg("dataset"),
        py::arg("out_dir") = "");
  m.def("evaluate_json", &evaluate_checkpoint, py::arg("checkpoint"), py::arg("dataset"),
        py::arg("split") = "test");
  m.def("dump_attention_json", &dump_attention, py::arg("checkpoint"), py::arg("dataset"),
        py::arg("split") = "test", py::arg("out") = "");
  m.def("gradcheck_json", &gradcheck, py::arg("eps") = 1e-5, py::arg("tol") = 1e-5,
        py::arg("seed") = 7);
}
