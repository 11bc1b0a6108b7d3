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

#include "spn/init.hpp"

#include <Eigen/Dense>

namespace spn {

template <typename T>
void normal_init(Tensor<T>& t, Rng& rng, T stddev) {
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  for (T& v : t.values()) v = static_cast<T>(dist(rng));
}

template <typename T>
void orthogonal_init(Tensor<T>& t, Rng& rng, T gain) {
  const Eigen::Index out = t.shape().c;
  const Eigen::Index rest = static_cast<Eigen::Index>(t.size()) / out;
  const Eigen::Index big = std::max(rest, out);
  const Eigen::Index small = std::min(rest, out);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = dist(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign correction makes the distribution uniform over orthogonal matrices.
  Eigen::MatrixXd r = qr.matrixQR().topRows(small).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < small; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  for (Eigen::Index i = 0; i < rest; ++i) {
    for (Eigen::Index o = 0; o < out; ++o) {
      const double v = rest >= out ? q(i, o) : q(o, i);
      t[static_cast<std::size_t>(i * out + o)] = static_cast<T>(gain * v);
    }
  }
}

template void normal_init(Tensor<float>&, Rng&, float);
template void normal_init(Tensor<double>&, Rng&, double);
template void orthogonal_init(Tensor<float>&, Rng&, float);
template void orthogonal_init(Tensor<double>&, Rng&, double);

}  // namespace spn
