// Copyright 2026 The SPN-GAN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spn/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "spn/core/spn_layer.hpp"
#include "spn/io/checkpoint.hpp"

namespace spn {

GaussianSummary summarize_features(const Eigen::MatrixXd& x) {
  if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("no features to summarize");
  GaussianSummary s;
  s.count = x.rows();
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - s.mean.transpose();
  if (x.rows() == 1) {
    s.cov = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  } else {
    s.cov = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
    s.cov = (s.cov + s.cov.transpose()) / 2;
  }
  return s;
}

namespace {

// Symmetric square root with small negative eigenvalues clamped.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m, double tol, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) {
      throw std::domain_error(std::string(what) + " is not positive semidefinite: eigenvalue " +
                              std::to_string(ev(i)));
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b, double tol) {
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("feature dimensions differ");
  const Eigen::MatrixXd root_a = sqrt_psd(a.cov, tol, "first covariance");
  sqrt_psd(b.cov, tol, "second covariance");
  Eigen::MatrixXd prod = root_a * b.cov * root_a;
  prod = (prod + prod.transpose()) / 2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prod, Eigen::EigenvaluesOnly);
  double tr_sqrt = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev < -tol) {
      throw std::domain_error("covariance product has eigenvalue " + std::to_string(ev));
    }
    tr_sqrt += std::sqrt(std::max(ev, 0.0));
  }
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2 * tr_sqrt;
  return std::max(d, 0.0);
}

InceptionScore inception_score(const Eigen::MatrixXd& p, int splits) {
  const Eigen::Index n = p.rows();
  if (splits < 1 || n < splits) {
    throw std::invalid_argument("inception score needs at least `splits` rows");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.row(i).minCoeff() < -1e-6 || std::abs(p.row(i).sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("row " + std::to_string(i) + " is not a probability vector");
    }
  }
  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    const Eigen::Index begin = n * s / splits;
    const Eigen::Index end = n * (s + 1) / splits;
    const Eigen::MatrixXd part = p.middleRows(begin, end - begin);
    const Eigen::RowVectorXd marginal = part.colwise().mean();
    double kl = 0;
    for (Eigen::Index i = 0; i < part.rows(); ++i) {
      for (Eigen::Index k = 0; k < part.cols(); ++k) {
        const double q = part(i, k);
        if (q > 0) kl += q * (std::log(q) - std::log(marginal(k)));
      }
    }
    scores.push_back(std::exp(kl / static_cast<double>(part.rows())));
  }
  InceptionScore out;
  out.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / splits;
  double var = 0;
  for (double v : scores) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / splits);
  return out;
}

// --- toy extractor -----------------------------------------------------------

ToyExtractor::ToyExtractor(int input_size, int feature_dim, int num_classes, std::uint64_t seed)
    : size_(input_size) {
  if (input_size < 4 || input_size % 4 != 0) {
    throw std::invalid_argument("toy extractor input size must be a positive multiple of 4");
  }
  if (feature_dim < 1 || num_classes < 2) {
    throw std::invalid_argument("toy extractor needs feature_dim >= 1 and >= 2 classes");
  }
  const int in = (input_size / 4) * (input_size / 4) * 3;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  w1_.resize(feature_dim, in);
  for (Eigen::Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = nd(rng) / std::sqrt(in / 4.0);
  b1_.resize(feature_dim);
  for (Eigen::Index i = 0; i < b1_.size(); ++i) b1_(i) = 0.1 * nd(rng);
  w2_.resize(num_classes, feature_dim);
  for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = 3.0 * nd(rng) / std::sqrt(feature_dim);
}

void ToyExtractor::extract(const Tensor<float>& images, Eigen::MatrixXd& features,
                           Eigen::MatrixXd& probs) const {
  const Shape& s = images.shape();
  if (s.h != size_ || s.w != size_ || s.c != 3) {
    throw ShapeError("toy extractor expects (B," + std::to_string(size_) + "," +
                     std::to_string(size_) + ",3), got " + s.str());
  }
  const int cells = size_ / 4;
  Eigen::MatrixXd pooled(s.n, cells * cells * 3);
  for (int b = 0; b < s.n; ++b) {
    for (int cy = 0; cy < cells; ++cy) {
      for (int cx = 0; cx < cells; ++cx) {
        for (int c = 0; c < 3; ++c) {
          double acc = 0;
          for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) acc += images.at(b, cy * 4 + y, cx * 4 + x, c);
          pooled(b, (cy * cells + cx) * 3 + c) = acc / 16;
        }
      }
    }
  }
  features = ((pooled * w1_.transpose()).rowwise() + b1_.transpose()).array().tanh().matrix();
  Eigen::MatrixXd logits = features * w2_.transpose();
  probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp().matrix();
    probs.row(i) = e / e.sum();
  }
}

void ToyExtractor::save(const std::filesystem::path& path) const {
  Checkpoint c;
  c.text["extractor.kind"] = "toy";
  c.text["extractor.input_size"] = std::to_string(size_);
  auto put = [&](const std::string& name, const Eigen::MatrixXd& m) {
    Tensor<double> t(Shape{1, 1, static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index k = 0; k < m.cols(); ++k) t[r * m.cols() + k] = m(r, k);
    c.f64[name] = t;
  };
  put("extractor.w1", w1_);
  put("extractor.b1", b1_);
  put("extractor.w2", w2_);
  save_checkpoint(path, c);
}

ToyExtractor ToyExtractor::load(const std::filesystem::path& path) {
  const Checkpoint c = load_checkpoint(path);
  if (c.get_text("extractor.kind") != "toy") {
    throw CheckpointError(path.string() + " is not a toy extractor");
  }
  auto get = [&](const std::string& name) {
    auto it = c.f64.find(name);
    if (it == c.f64.end()) throw CheckpointError("extractor file lacks " + name);
    const Tensor<double>& t = it->second;
    Eigen::MatrixXd m(t.shape().w, t.shape().c);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(r, k) = t[r * m.cols() + k];
    return m;
  };
  ToyExtractor e(std::stoi(c.get_text("extractor.input_size")), 1, 2, 0);
  e.w1_ = get("extractor.w1");
  e.b1_ = get("extractor.b1");
  e.w2_ = get("extractor.w2");
  if (e.b1_.size() != e.w1_.rows() || e.w2_.cols() != e.w1_.rows() ||
      e.w1_.cols() != (e.size_ / 4) * (e.size_ / 4) * 3) {
    throw CheckpointError("inconsistent extractor shapes in " + path.string());
  }
  return e;
}

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& spec) {
  if (spec == "toy") return std::make_unique<ToyExtractor>();
  if (spec.rfind("toy:", 0) == 0) return std::make_unique<ToyExtractor>(std::stoi(spec.substr(4)));
  return std::make_unique<ToyExtractor>(ToyExtractor::load(spec));
}

// --- evaluation --------------------------------------------------------------

namespace {

// Quantizes to 8 bits and resizes to the extractor input.
Tensor<float> prepare(const std::vector<Image>& images, int size) {
  Tensor<float> t(Shape{static_cast<int>(images.size()), size, size, 3});
  const std::size_t per = static_cast<std::size_t>(size) * size * 3;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image img = (images[i].height == size && images[i].width == size)
                          ? images[i]
                          : resize_bilinear(images[i], size, size);
    for (std::size_t j = 0; j < per; ++j) t[i * per + j] = to_model_range(img.rgb[j]);
  }
  return t;
}

void append_rows(Eigen::MatrixXd& dst, const Eigen::MatrixXd& rows) {
  const Eigen::Index old = dst.rows();
  dst.conservativeResize(old + rows.rows(), rows.cols());
  dst.bottomRows(rows.rows()) = rows;
}

}  // namespace

EvalResult evaluate_model(Generator<float>& gen, int num_classes, const FeatureExtractor& ex,
                          const Dataset& real, int n_samples, std::uint64_t seed, int batch) {
  if (n_samples < 2 || batch < 1) throw std::invalid_argument("need >= 2 samples and batch >= 1");
  real.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  const int z_dim = gen.spec().z_dim;
  Eigen::MatrixXd fake_feat(0, ex.feature_dim()), fake_prob(0, ex.num_classes());
  Eigen::MatrixXd f, p;
  for (int done = 0; done < n_samples;) {
    const int b = std::min(batch, n_samples - done);
    Tensor<float> z(Shape{b, 1, 1, z_dim});
    for (float& v : z.values()) v = nd(rng);
    std::vector<int> cls;
    for (int i = 0; num_classes > 0 && i < b; ++i) {
      cls.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(num_classes)));
    }
    const Tensor<float> imgs = gen.forward(z, cls, Mode::kEval);
    ex.extract(prepare(tensor_to_images(imgs), ex.input_size()), f, p);
    append_rows(fake_feat, f);
    append_rows(fake_prob, p);
    done += b;
  }

  std::vector<int> order(real.size);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_real = std::min(n_samples, real.size);
  Eigen::MatrixXd real_feat(0, ex.feature_dim());
  for (int done = 0; done < n_real;) {
    const int b = std::min(batch, n_real - done);
    std::vector<Image> imgs;
    for (int i = 0; i < b; ++i) imgs.push_back(real.image_copy(order[done + i]));
    ex.extract(prepare(imgs, ex.input_size()), f, p);
    append_rows(real_feat, f);
    done += b;
  }

  EvalResult r;
  r.samples = n_samples;
  r.real_samples = n_real;
  r.fid = frechet_distance(summarize_features(real_feat), summarize_features(fake_feat));
  const InceptionScore is = inception_score(fake_prob, std::min(10, n_samples));
  r.is_mean = is.mean;
  r.is_std = is.std;
  return r;
}

// --- masks -------------------------------------------------------------------

MaskVisualization visualize_masks(Generator<float>& gen, const Tensor<float>& z,
                                  std::span<const int> classes, int layer,
                                  const std::vector<int>& channels, Mode mode) {
  std::vector<SpnLayer<float>*> layers = gen.spn_layers();
  if (layers.empty()) throw std::invalid_argument("generator has no SPN layers");
  const int n_layers = static_cast<int>(layers.size());
  const int idx = layer < 0 ? n_layers + layer : layer;
  if (idx < 0 || idx >= n_layers) {
    throw std::out_of_range("SPN layer " + std::to_string(layer) + " outside [-" +
                            std::to_string(n_layers) + ", " + std::to_string(n_layers) + ")");
  }
  if (channels.empty()) throw std::invalid_argument("no mask channels requested");
  gen.forward(z, classes, mode);
  const Tensor<float>& raw = layers[idx]->last_mask();
  const Shape& s = raw.shape();
  for (int ch : channels) {
    if (ch < 0 || ch >= s.c) {
      throw std::out_of_range("mask channel " + std::to_string(ch) + " outside [0, " +
                              std::to_string(s.c) + ")");
    }
  }
  const int nc = static_cast<int>(channels.size());
  MaskVisualization out;
  out.mask = Tensor<float>(Shape{s.n, s.h, s.w, nc});
  for (int b = 0; b < s.n; ++b)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x)
        for (int j = 0; j < nc; ++j) out.mask.at(b, y, x, j) = raw.at(b, y, x, channels[j]);
  const SelfLatentMask<float> m(out.mask);
  out.inverse = invert_mask(m).values();

  std::vector<Image> tiles;
  for (int b = 0; b < s.n; ++b) {
    for (const Tensor<float>* src : {&out.mask, &out.inverse}) {
      for (int j = 0; j < nc; ++j) {
        Image tile(s.h, s.w);
        for (int y = 0; y < s.h; ++y) {
          for (int x = 0; x < s.w; ++x) {
            const auto v = static_cast<std::uint8_t>(std::lround(src->at(b, y, x, j) * 255.0f));
            for (int c = 0; c < 3; ++c) tile.at(y, x, c) = v;
          }
        }
        tiles.push_back(std::move(tile));
      }
    }
  }
  out.grid = make_grid(tiles, nc);
  return out;
}

double mask_spatial_variance(const Tensor<float>& mask) {
  const Shape& s = mask.shape();
  const double hw = static_cast<double>(s.h) * s.w;
  double total = 0;
  for (int b = 0; b < s.n; ++b) {
    for (int c = 0; c < s.c; ++c) {
      double sum = 0, sq = 0;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          const double v = mask.at(b, y, x, c);
          sum += v;
          sq += v * v;
        }
      }
      const double mean = sum / hw;
      total += sq / hw - mean * mean;
    }
  }
  return total / (static_cast<double>(s.n) * s.c);
}

}  // namespace spn
