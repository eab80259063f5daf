// Copyright 2026 The mdembed Authors.
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

#include "mdembed/linalg.hpp"

#include <cmath>
#include <limits>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "mdembed/rng.hpp"

namespace mdembed {

Svd thin_svd(const Eigen::Ref<const Matrix>& a) {
  Svd out;
  if (a.size() == 0) {
    out.u = Matrix(a.rows(), 0);
    out.v = Matrix(a.cols(), 0);
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.u = svd.matrixU();
  out.s = svd.singularValues();
  out.v = svd.matrixV();
  return out;
}

std::vector<double> singular_values(const Eigen::Ref<const Matrix>& a) {
  if (a.size() == 0) return {};
  const Eigen::MatrixXd dense = a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
  const Vector& s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

std::size_t numerical_rank(const std::vector<double>& sigma) {
  if (sigma.empty() || !(sigma.front() > 0.0)) return 0;
  const double cutoff = kRankTolerance * sigma.front();
  std::size_t r = 0;
  for (double s : sigma)
    if (s > cutoff) ++r;
  return r;
}

std::size_t numerical_rank(const Eigen::Ref<const Matrix>& a) {
  return numerical_rank(singular_values(a));
}

Matrix random_orthonormal(std::size_t n, std::size_t r, Rng& rng) {
  if (r == 0) return Matrix(n, 0);
  if (r > n) throw StructuralError("cannot draw more orthonormal columns than rows");
  Eigen::MatrixXd g(n, r);
  // Fill row-major so the stream order does not depend on Eigen's storage.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < r; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
  const Eigen::MatrixXd rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < r; ++j)
    if (rr(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

double relative_frobenius_error(const Eigen::Ref<const Matrix>& reference,
                                const Eigen::Ref<const Matrix>& estimate) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols())
    throw StructuralError("matrix shapes differ");
  const double denom = reference.norm();
  const double num = (reference - estimate).norm();
  if (denom == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / denom;
}

}  // namespace mdembed
