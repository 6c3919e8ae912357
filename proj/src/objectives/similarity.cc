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

#include "mtsplit/objectives/similarity.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "mtsplit/error.h"

namespace mtsplit::objectives {
namespace {

constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001,
                                                  0.2363, 0.1333};
constexpr double kMsSsimFloor = 1e-6;

std::vector<double> GaussianWindow(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid separable filtering of an h x w plane.
std::vector<double> Filter(const std::vector<double>& x, int h, int w,
                           const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < ow; ++j) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += g[t] * x[i * w + j + t];
      tmp[i * ow + j] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += g[t] * tmp[(i + t) * ow + j];
      out[i * ow + j] = s;
    }
  return out;
}

// Adjoint of Filter: maps an (h-k+1) x (w-k+1) plane back to h x w.
std::vector<double> FilterTranspose(const std::vector<double>& y, int h, int w,
                                    const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int i = 0; i < oh; ++i)
    for (int t = 0; t < k; ++t)
      for (int j = 0; j < ow; ++j) tmp[(i + t) * ow + j] += g[t] * y[i * ow + j];
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < ow; ++j)
      for (int t = 0; t < k; ++t) out[i * w + j + t] += g[t] * tmp[i * ow + j];
  return out;
}

struct PlaneValue {
  double ssim = 0.0;
  double cs = 0.0;
};

// Mean SSIM and mean contrast-structure term of one plane pair. When ga is
// set, adds gs * d(ssim)/d(input) + gc * d(cs)/d(input) into ga and gb.
PlaneValue SsimPlane(const std::vector<double>& a, const std::vector<double>& b,
                     int h, int w, const std::vector<double>& g, double c1,
                     double c2, double gs = 0.0, double gc = 0.0,
                     std::vector<double>* ga = nullptr,
                     std::vector<double>* gb = nullptr) {
  const std::size_t n = a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = Filter(a, h, w, g);
  const auto mu_b = Filter(b, h, w, g);
  const auto e_aa = Filter(aa, h, w, g);
  const auto e_bb = Filter(bb, h, w, g);
  const auto e_ab = Filter(ab, h, w, g);
  const std::size_t p = mu_a.size();

  PlaneValue value;
  const bool grad = ga != nullptr;
  std::vector<double> g_mu_a, g_mu_b, g_aa, g_bb, g_ab;
  if (grad) {
    g_mu_a.resize(p);
    g_mu_b.resize(p);
    g_aa.resize(p);
    g_bb.resize(p);
    g_ab.resize(p);
  }
  const double ws = gs / static_cast<double>(p);
  const double wc = gc / static_cast<double>(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    const double a1 = 2.0 * ma * mb + c1;
    const double a2 = 2.0 * cov + c2;
    const double b1 = ma * ma + mb * mb + c1;
    const double b2 = va + vb + c2;
    const double d = b1 * b2;
    const double s = a1 * a2 / d;
    const double cs = a2 / b2;
    value.ssim += s;
    value.cs += cs;
    if (!grad) continue;
    const double ds_dma = (2.0 * mb * (a2 - a1) - s * 2.0 * ma * (b2 - b1)) / d;
    const double ds_dmb = (2.0 * ma * (a2 - a1) - s * 2.0 * mb * (b2 - b1)) / d;
    const double dc_dma = (-2.0 * mb + 2.0 * ma * cs) / b2;
    const double dc_dmb = (-2.0 * ma + 2.0 * mb * cs) / b2;
    g_mu_a[i] = ws * ds_dma + wc * dc_dma;
    g_mu_b[i] = ws * ds_dmb + wc * dc_dmb;
    g_aa[i] = -(ws * s + wc * cs) / b2;
    g_bb[i] = g_aa[i];
    g_ab[i] = ws * 2.0 * a1 / d + wc * 2.0 / b2;
  }
  value.ssim /= static_cast<double>(p);
  value.cs /= static_cast<double>(p);
  if (grad) {
    const auto t_mu_a = FilterTranspose(g_mu_a, h, w, g);
    const auto t_mu_b = FilterTranspose(g_mu_b, h, w, g);
    const auto t_aa = FilterTranspose(g_aa, h, w, g);
    const auto t_bb = FilterTranspose(g_bb, h, w, g);
    const auto t_ab = FilterTranspose(g_ab, h, w, g);
    for (std::size_t i = 0; i < n; ++i) {
      (*ga)[i] += t_mu_a[i] + 2.0 * a[i] * t_aa[i] + b[i] * t_ab[i];
      (*gb)[i] += t_mu_b[i] + 2.0 * b[i] * t_bb[i] + a[i] * t_ab[i];
    }
  }
  return value;
}

std::vector<double> Downsample(const std::vector<double>& x, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j)
      out[i * ow + j] = 0.25 * (x[2 * i * w + 2 * j] + x[2 * i * w + 2 * j + 1] +
                                x[(2 * i + 1) * w + 2 * j] +
                                x[(2 * i + 1) * w + 2 * j + 1]);
  return out;
}

void DownsampleTranspose(const std::vector<double>& y, int h, int w,
                         std::vector<double>* x) {
  const int oh = h / 2, ow = w / 2;
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      const double v = 0.25 * y[i * ow + j];
      (*x)[2 * i * w + 2 * j] += v;
      (*x)[2 * i * w + 2 * j + 1] += v;
      (*x)[(2 * i + 1) * w + 2 * j] += v;
      (*x)[(2 * i + 1) * w + 2 * j + 1] += v;
    }
}

// MS-SSIM of one plane pair; scale is the gradient weight.
double MsSsimPlane(const std::vector<double>& a, const std::vector<double>& b,
                   int h, int w, const std::vector<double>& g, double c1,
                   double c2, int scales, double scale,
                   std::vector<double>* ga, std::vector<double>* gb) {
  double weight_sum = 0.0;
  for (int j = 0; j < scales; ++j) weight_sum += kMsSsimWeights[j];

  std::vector<std::vector<double>> xa{a}, xb{b};
  std::vector<int> hs{h}, wsz{w};
  for (int j = 1; j < scales; ++j) {
    xa.push_back(Downsample(xa.back(), hs.back(), wsz.back()));
    xb.push_back(Downsample(xb.back(), hs.back(), wsz.back()));
    hs.push_back(hs.back() / 2);
    wsz.push_back(wsz.back() / 2);
  }
  std::vector<double> v(scales);
  for (int j = 0; j < scales; ++j) {
    const PlaneValue pv = SsimPlane(xa[j], xb[j], hs[j], wsz[j], g, c1, c2);
    v[j] = j + 1 < scales ? pv.cs : pv.ssim;
  }
  double result = 1.0;
  for (int j = 0; j < scales; ++j)
    result *= std::pow(std::max(v[j], kMsSsimFloor), kMsSsimWeights[j] / weight_sum);
  if (ga == nullptr) return result;

  std::vector<double> up_a(xa.back().size(), 0.0), up_b(xb.back().size(), 0.0);
  for (int j = scales - 1; j >= 0; --j) {
    const double dv = v[j] > kMsSsimFloor
                          ? scale * (kMsSsimWeights[j] / weight_sum) * result / v[j]
                          : 0.0;
    const bool last = j + 1 == scales;
    SsimPlane(xa[j], xb[j], hs[j], wsz[j], g, c1, c2, last ? dv : 0.0,
              last ? 0.0 : dv, &up_a, &up_b);
    if (j == 0) break;
    std::vector<double> next_a(xa[j - 1].size(), 0.0), next_b(xb[j - 1].size(), 0.0);
    DownsampleTranspose(up_a, hs[j - 1], wsz[j - 1], &next_a);
    DownsampleTranspose(up_b, hs[j - 1], wsz[j - 1], &next_b);
    up_a = std::move(next_a);
    up_b = std::move(next_b);
  }
  for (std::size_t i = 0; i < up_a.size(); ++i) {
    (*ga)[i] += up_a[i];
    (*gb)[i] += up_b[i];
  }
  return result;
}

}  // namespace

SimilarityKind ParseSimilarityKind(const std::string& name) {
  if (name == "ssim" || name == "SSIM") return SimilarityKind::kSsim;
  if (name == "ms_ssim" || name == "MS_SSIM" || name == "ms-ssim")
    return SimilarityKind::kMsSsim;
  Fail(ErrorKind::kConfig, "unknown similarity kind '" + name +
                               "' (expected ssim or ms_ssim)");
}

const char* SimilarityKindName(SimilarityKind kind) {
  return kind == SimilarityKind::kSsim ? "ssim" : "ms_ssim";
}

void ValidateSimilarityMeasure(const SimilarityMeasure& m) {
  Require(m.window_size >= 1 && m.window_size % 2 == 1, ErrorKind::kConfig,
          "similarity window_size must be a positive odd integer");
  Require(std::isfinite(m.gaussian_sigma) && m.gaussian_sigma > 0,
          ErrorKind::kConfig, "similarity gaussian_sigma must be positive");
  Require(std::isfinite(m.k1) && m.k1 > 0 && std::isfinite(m.k2) && m.k2 > 0,
          ErrorKind::kConfig, "similarity constants k1, k2 must be positive");
  if (m.kind == SimilarityKind::kMsSsim)
    Require(m.scales >= 1 && m.scales <= static_cast<int>(kMsSsimWeights.size()),
            ErrorKind::kConfig, "ms_ssim scales must be in 1..5");
}

int MinimumSpatialSize(const SimilarityMeasure& m) {
  if (m.kind == SimilarityKind::kSsim) return m.window_size;
  return m.window_size << (m.scales - 1);
}

double Similarity(const Tensor& a, const Tensor& b, const SimilarityMeasure& m,
                  Tensor* grad_a, Tensor* grad_b) {
  ValidateSimilarityMeasure(m);
  Require(a.shape() == b.shape(), ErrorKind::kConfig,
          "similarity inputs differ in shape: " + ShapeToString(a.shape()) +
              " vs " + ShapeToString(b.shape()));
  Require(a.ndim() == 3 || a.ndim() == 4, ErrorKind::kConfig,
          "similarity expects (C, H, W) or (N, C, H, W) tensors, got " +
              ShapeToString(a.shape()));
  const int off = a.ndim() - 3;
  const int batch = off ? a.dim(0) : 1;
  const int channels = a.dim(off), h = a.dim(off + 1), w = a.dim(off + 2);
  const int min_size = MinimumSpatialSize(m);
  if (h < min_size || w < min_size) {
    Fail(ErrorKind::kConfig,
         "feature maps of " + std::to_string(h) + "x" + std::to_string(w) +
             " are smaller than the " + std::to_string(min_size) +
             " pixels required by " + SimilarityKindName(m.kind) +
             "; reduce window_size" +
             (m.kind == SimilarityKind::kMsSsim ? " or scales" : ""));
  }
  const bool want_grad = grad_a != nullptr || grad_b != nullptr;
  Tensor ga_local, gb_local;
  Tensor& ga = grad_a ? *grad_a : ga_local;
  Tensor& gb = grad_b ? *grad_b : gb_local;
  if (want_grad) {
    ga = Tensor(a.shape());
    gb = Tensor(b.shape());
  }

  const auto window = GaussianWindow(m.window_size, m.gaussian_sigma);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double scale = 1.0 / (static_cast<double>(batch) * channels);
  double total = 0.0;
  std::vector<double> pa(plane), pb(plane), da(plane), db(plane);
  for (int n = 0; n < batch; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * channels * plane;
    float lo = a[base], hi = a[base];
    for (std::size_t i = 0; i < channels * plane; ++i) {
      lo = std::min({lo, a[base + i], b[base + i]});
      hi = std::max({hi, a[base + i], b[base + i]});
    }
    double range = static_cast<double>(hi) - lo;
    if (!(range > 0.0)) range = 1.0;
    const double c1 = (m.k1 * range) * (m.k1 * range);
    const double c2 = (m.k2 * range) * (m.k2 * range);
    for (int c = 0; c < channels; ++c) {
      const std::size_t off_c = base + static_cast<std::size_t>(c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        pa[i] = a[off_c + i];
        pb[i] = b[off_c + i];
      }
      std::fill(da.begin(), da.end(), 0.0);
      std::fill(db.begin(), db.end(), 0.0);
      double v;
      if (m.kind == SimilarityKind::kSsim) {
        v = SsimPlane(pa, pb, h, w, window, c1, c2, scale, 0.0,
                      want_grad ? &da : nullptr, want_grad ? &db : nullptr)
                .ssim;
      } else {
        v = MsSsimPlane(pa, pb, h, w, window, c1, c2, m.scales, scale,
                        want_grad ? &da : nullptr, want_grad ? &db : nullptr);
      }
      total += v;
      if (want_grad) {
        for (std::size_t i = 0; i < plane; ++i) {
          ga[off_c + i] = static_cast<float>(da[i]);
          gb[off_c + i] = static_cast<float>(db[i]);
        }
      }
    }
  }
  return total * scale;
}

double TaskPrivacyLoss(const std::vector<Tensor>& features,
                       const SimilarityMeasure& m, std::vector<Tensor>* grads) {
  Require(!features.empty(), ErrorKind::kConfig,
          "task privacy loss needs at least one task feature");
  for (const Tensor& f : features) {
    Require(f.shape() == features[0].shape(), ErrorKind::kConfig,
            "task features differ in shape: " + ShapeToString(f.shape()) +
                " vs " + ShapeToString(features[0].shape()));
  }
  if (grads) {
    grads->clear();
    for (const Tensor& f : features) grads->emplace_back(f.shape());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      Tensor gi, gj;
      total += 2.0 * Similarity(features[i], features[j], m,
                                grads ? &gi : nullptr, grads ? &gj : nullptr);
      if (grads) {
        gi *= 2.0f;
        gj *= 2.0f;
        (*grads)[i] += gi;
        (*grads)[j] += gj;
      }
    }
  }
  return total;
}

}  // namespace mtsplit::objectives
