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

#include "mtsplit/data/image_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtsplit/error.h"

namespace mtsplit::data {
namespace {

namespace fs = std::filesystem;

Tensor ReadPng(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    Fail(ErrorKind::kData, "cannot decode PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    Fail(ErrorKind::kData, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  const int h = static_cast<int>(image.height), w = static_cast<int>(image.width);
  Tensor out({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out[(static_cast<std::size_t>(c) * h + y) * w + x] =
            buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
  return out;
}

// PPM header tokens, skipping '#' comments.
std::string NextToken(std::istream& in) {
  std::string token;
  while (in >> token) {
    if (token[0] != '#') return token;
    std::string rest;
    std::getline(in, rest);
  }
  return {};
}

Tensor ReadPpm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  const std::string magic = NextToken(in);
  Require(magic == "P6" || magic == "P3", ErrorKind::kData,
          path.string() + " is not a P3/P6 PPM image");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(NextToken(in));
    h = std::stoi(NextToken(in));
    maxval = std::stoi(NextToken(in));
  } catch (const std::exception&) {
    Fail(ErrorKind::kData, "malformed PPM header in " + path.string());
  }
  Require(w > 0 && h > 0 && maxval > 0 && maxval < 65536, ErrorKind::kData,
          "malformed PPM header in " + path.string());
  Tensor out({3, h, w});
  const std::size_t count = static_cast<std::size_t>(w) * h * 3;
  std::vector<int> samples(count);
  if (magic == "P6") {
    in.get();  // single whitespace after maxval
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(count * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    Require(static_cast<std::size_t>(in.gcount()) == raw.size(), ErrorKind::kData,
            "truncated PPM data in " + path.string());
    for (std::size_t i = 0; i < count; ++i)
      samples[i] = bytes == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      Require(static_cast<bool>(in >> samples[i]), ErrorKind::kData,
              "truncated PPM data in " + path.string());
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out[(static_cast<std::size_t>(c) * h + y) * w + x] =
            static_cast<float>(samples[(static_cast<std::size_t>(y) * w + x) * 3 + c]) /
            maxval;
  return out;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Tensor ReadImage(const fs::path& path) {
  Require(fs::exists(path), ErrorKind::kData, "image file not found: " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".png") return ReadPng(path);
  if (ext == ".ppm" || ext == ".pnm") return ReadPpm(path);
  Fail(ErrorKind::kData, "unsupported image format: " + path.string());
}

void WritePng(const fs::path& path, const Tensor& image) {
  Require(image.ndim() == 3 && (image.dim(0) == 3 || image.dim(0) == 1),
          ErrorKind::kConfig, "WritePng expects (3, H, W) or (1, H, W)");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<png_byte> buf(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const float v = image[(static_cast<std::size_t>(c == 3 ? ch : 0) * h + y) * w + x];
        buf[(static_cast<std::size_t>(y) * w + x) * 3 + ch] =
            static_cast<png_byte>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
      }
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(w);
  out.height = static_cast<png_uint_32>(h);
  out.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&out, path.c_str(), 0, buf.data(), 0, nullptr))
    Fail(ErrorKind::kIo, "cannot write " + path.string() + ": " + out.message);
}

Tensor Resize(const Tensor& image, int height, int width) {
  Require(image.ndim() == 3 && height > 0 && width > 0, ErrorKind::kConfig,
          "Resize expects a (C, H, W) tensor and a positive size");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == height && w == width) return image;
  Tensor out({c, height, width});
  const double sy = static_cast<double>(h) / height, sx = static_cast<double>(w) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        auto px = [&](int yy, int xx) {
          return static_cast<double>(image[(static_cast<std::size_t>(ch) * h + yy) * w + xx]);
        };
        const double v = (1 - ty) * ((1 - tx) * px(y0, x0) + tx * px(y0, x1)) +
                         ty * ((1 - tx) * px(y1, x0) + tx * px(y1, x1));
        out[(static_cast<std::size_t>(ch) * height + y) * width + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor ImageGrid(std::span<const Tensor> images, int columns) {
  Require(!images.empty() && columns > 0, ErrorKind::kConfig,
          "image grid needs images and a positive column count");
  const Shape& s = images[0].shape();
  Require(s.size() == 3, ErrorKind::kConfig, "grid images must be (C, H, W)");
  const int c = s[0], h = s[1], w = s[2];
  const int n = static_cast<int>(images.size());
  const int rows = (n + columns - 1) / columns;
  Tensor grid({c, rows * (h + 1) - 1, columns * (w + 1) - 1}, 1.0f);
  const int gh = grid.dim(1), gw = grid.dim(2);
  for (int i = 0; i < n; ++i) {
    Require(images[i].shape() == s, ErrorKind::kConfig, "grid images differ in shape");
    const int oy = (i / columns) * (h + 1), ox = (i % columns) * (w + 1);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          grid[(static_cast<std::size_t>(ch) * gh + oy + y) * gw + ox + x] =
              images[i][(static_cast<std::size_t>(ch) * h + y) * w + x];
  }
  return grid;
}

Dataset LoadImageFolder(const fs::path& folder, const fs::path& label_csv,
                        const ImageFolderConfig& config) {
  Require(config.height > 0 && config.width > 0, ErrorKind::kConfig,
          "image size must be positive");
  for (double s : config.stddev)
    Require(s > 0, ErrorKind::kConfig, "normalization stddev must be positive");
  std::ifstream in(label_csv);
  Require(in.good(), ErrorKind::kIo, "cannot open label file " + label_csv.string());
  std::string line;
  Dataset d;
  if (!std::getline(in, line)) {
    d.images = Tensor({0, 3, config.height, config.width});
    return d;
  }
  const auto header = SplitCsv(line);
  Require(!header.empty() && header[0] == "filename", ErrorKind::kData,
          label_csv.string() + " row 1: header must start with 'filename'");
  d.task_ids.assign(header.begin() + 1, header.end());

  struct Row {
    std::string file;
    std::vector<std::int32_t> labels;
  };
  std::vector<Row> rows;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = SplitCsv(line);
    const std::string where = label_csv.string() + " row " + std::to_string(row_number);
    Require(fields.size() == header.size(), ErrorKind::kData,
            where + ": expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(fields.size()));
    Require(!fields[0].empty(), ErrorKind::kData, where + ": empty filename");
    Row r{fields[0], {}};
    for (std::size_t i = 1; i < fields.size(); ++i) {
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(fields[i], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      Require(used == fields[i].size() && used > 0 && v >= 0, ErrorKind::kData,
              where + ": label '" + fields[i] + "' for task '" + header[i] +
                  "' is not a non-negative integer");
      r.labels.push_back(static_cast<std::int32_t>(v));
    }
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.file < b.file; });

  const int n = static_cast<int>(rows.size());
  d.images = Tensor({n, 3, config.height, config.width});
  d.targets.resize(d.task_ids.size());
  for (auto& t : d.targets) t.labels = LabelTensor({n});
  for (int i = 0; i < n; ++i) {
    const fs::path file = folder / rows[i].file;
    Require(fs::exists(file), ErrorKind::kData,
            "label file references missing image '" + rows[i].file + "'");
    Tensor img = Resize(ReadImage(file), config.height, config.width);
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < config.height * config.width; ++p) {
        const std::size_t idx = static_cast<std::size_t>(c) * config.height * config.width + p;
        img[idx] = static_cast<float>((img[idx] - config.mean[c]) / config.stddev[c]);
      }
    d.images.SetSample(i, img);
    for (std::size_t t = 0; t < d.targets.size(); ++t)
      d.targets[t].labels.values[i] = rows[i].labels[t];
  }
  return d;
}

}  // namespace mtsplit::data
