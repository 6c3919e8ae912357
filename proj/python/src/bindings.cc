// Copyright 2026 The mtsplit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings. JSON documents cross the boundary as text; the package's
// __init__ turns them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mtsplit/cli/commands.h"
#include "mtsplit/cli/config.h"
#include "mtsplit/data/synthetic.h"
#include "mtsplit/error.h"
#include "mtsplit/objectives/similarity.h"
#include "mtsplit/privacy/accountant.h"
#include "mtsplit/privacy/dp.h"
#include "mtsplit/runtime/wire.h"

namespace py = pybind11;
using mtsplit::Error;
using mtsplit::ErrorKind;
using mtsplit::Shape;
using mtsplit::Tensor;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor ToTensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  std::vector<float> values(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(values));
}

py::array_t<float> ToArray(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

mtsplit::privacy::GradientSet ToGradients(const FloatArray& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::kConfig, "expected a 2-D array (samples, params)");
  mtsplit::privacy::GradientSet out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    out[static_cast<std::size_t>(i)].assign(a.data(i, 0), a.data(i, 0) + a.shape(1));
  return out;
}

std::string Run(const std::function<nlohmann::json(std::ostream&)>& fn) {
  std::ostringstream log;
  return fn(log).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mtsplit native core";

  static py::exception<Error> base(m, "MtsplitError");
  static py::exception<Error> config(m, "ConfigError", base.ptr());
  static py::exception<Error> calibration(m, "CalibrationError", config.ptr());
  static py::exception<Error> protocol(m, "ProtocolError", base.ptr());
  static py::exception<Error> corruption(m, "CorruptionError", base.ptr());
  static py::exception<Error> incomplete(m, "IncompleteError", base.ptr());
  static py::exception<Error> budget(m, "BudgetExhaustedError", base.ptr());
  static py::exception<Error> session(m, "SessionError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::kConfig: config(e.what()); break;
        case ErrorKind::kCalibration: calibration(e.what()); break;
        case ErrorKind::kProtocol: protocol(e.what()); break;
        case ErrorKind::kCorruption: corruption(e.what()); break;
        case ErrorKind::kIncomplete: incomplete(e.what()); break;
        case ErrorKind::kBudgetExhausted: budget(e.what()); break;
        case ErrorKind::kSession: session(e.what()); break;
        default: base(e.what()); break;
      }
    }
  });

  m.def("compute_epsilon",
        py::overload_cast<double, double, long, double>(&mtsplit::privacy::ComputeEpsilon),
        py::arg("q"), py::arg("sigma"), py::arg("steps"), py::arg("delta"));
  m.def(
      "calibrate_sigma",
      [](double q, double epsilon, long steps, double delta) {
        mtsplit::privacy::DPConfig dp;
        dp.sample_rate = q;
        dp.target_epsilon = epsilon;
        dp.target_delta = delta;
        mtsplit::privacy::ValidateDPConfig(dp);
        return mtsplit::privacy::CalibrateSigma(dp, steps);
      },
      py::arg("q"), py::arg("epsilon"), py::arg("steps"), py::arg("delta"));

  m.def(
      "clip_per_sample",
      [](const FloatArray& grads, double clip) {
        const auto clipped = mtsplit::privacy::ClipPerSample(ToGradients(grads), clip);
        py::array_t<float> out({grads.shape(0), grads.shape(1)});
        for (std::size_t i = 0; i < clipped.size(); ++i)
          std::copy(clipped[i].begin(), clipped[i].end(),
                    out.mutable_data(static_cast<py::ssize_t>(i), 0));
        return out;
      },
      py::arg("gradients"), py::arg("clip_threshold"));
  m.def(
      "noisy_aggregate",
      [](const FloatArray& clipped, double sigma, double clip, std::uint64_t seed) {
        mtsplit::privacy::NoiseSource noise(seed);
        return mtsplit::privacy::NoisyAggregate(ToGradients(clipped), sigma, clip, noise);
      },
      py::arg("clipped"), py::arg("sigma"), py::arg("clip_threshold"), py::arg("seed"));

  m.def(
      "similarity",
      [](const FloatArray& a, const FloatArray& b, const std::string& kind) {
        mtsplit::objectives::SimilarityMeasure measure;
        measure.kind = mtsplit::objectives::ParseSimilarityKind(kind);
        return mtsplit::objectives::Similarity(ToTensor(a), ToTensor(b), measure);
      },
      py::arg("a"), py::arg("b"), py::arg("kind") = "ssim");

  m.def(
      "encode_message",
      [](int type, std::uint64_t session_id, std::uint64_t batch_index,
         const std::vector<FloatArray>& tensors, const std::string& dtype) {
        mtsplit::runtime::SplitMessage msg;
        msg.type = static_cast<mtsplit::runtime::MsgType>(type);
        msg.session_id = session_id;
        msg.batch_index = batch_index;
        for (const auto& t : tensors)
          msg.tensors.push_back(mtsplit::runtime::FeatureTensor::FromTensor(
              ToTensor(t), mtsplit::runtime::ParseDType(dtype)));
        const auto bytes = mtsplit::runtime::EncodeMessage(msg);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("type"), py::arg("session_id"), py::arg("batch_index"), py::arg("tensors"),
      py::arg("dtype") = "f32");
  m.def(
      "decode_message",
      [](const py::bytes& frame) {
        const std::string s = frame;
        const auto msg = mtsplit::runtime::DecodeMessage(
            {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
        py::list tensors;
        for (const auto& t : msg.tensors) {
          if (t.dtype == mtsplit::runtime::WireDType::kU8)
            tensors.append(py::bytes(reinterpret_cast<const char*>(t.data.data()), t.data.size()));
          else
            tensors.append(ToArray(t.ToTensor()));
        }
        py::dict out;
        out["type"] = static_cast<int>(msg.type);
        out["type_name"] = mtsplit::runtime::MsgTypeName(msg.type);
        out["session_id"] = msg.session_id;
        out["batch_index"] = msg.batch_index;
        out["tensors"] = tensors;
        return out;
      },
      py::arg("frame"));

  m.def(
      "generate_classification_pair",
      [](int num_samples, std::uint64_t seed) {
        mtsplit::data::SyntheticSceneConfig c;
        c.num_samples = num_samples;
        c.seed = seed;
        const auto ds = mtsplit::data::GenerateClassificationPair(c);
        py::dict labels;
        for (std::size_t i = 0; i < ds.task_ids.size(); ++i)
          labels[py::str(ds.task_ids[i])] = ds.targets[i].labels.values;
        return py::make_tuple(ToArray(ds.images), labels);
      },
      py::arg("num_samples"), py::arg("seed"));

  m.def("normalize_config", [](const std::string& text) {
    return mtsplit::cli::ConfigToJson(mtsplit::cli::ParseConfig(nlohmann::json::parse(text)))
        .dump();
  });
  m.def("train", [](const std::string& text) {
    const auto c = mtsplit::cli::ParseConfig(nlohmann::json::parse(text));
    py::gil_scoped_release release;
    return Run([&](std::ostream& log) { return mtsplit::cli::RunTrain(c, log); });
  });
  m.def("eval_interchange", [](const std::filesystem::path& checkpoint,
                               const std::filesystem::path& out_dir) {
    py::gil_scoped_release release;
    return Run([&](std::ostream& log) {
      return mtsplit::cli::RunEvalInterchange(checkpoint, {}, out_dir, log);
    });
  });
  m.def("exit_code_for", [](const std::string& kind) {
    for (int k = 0; k <= static_cast<int>(ErrorKind::kSession); ++k)
      if (kind == mtsplit::ErrorKindName(static_cast<ErrorKind>(k)))
        return mtsplit::cli::ExitCodeFor(static_cast<ErrorKind>(k));
    throw Error(ErrorKind::kConfig, "unknown error kind '" + kind + "'");
  });
}
