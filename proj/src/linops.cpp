#include "fpdhf/linops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "fpdhf/error.hpp"

namespace fpdhf {

LinearMap::LinearMap(Index in_dim, Index out_dim, Apply forward, Apply adjoint,
                     double norm_bound)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      forward_(std::move(forward)),
      adjoint_(std::move(adjoint)),
      norm_bound_(norm_bound) {
  require(in_dim > 0 && out_dim > 0, "LinearMap: dimensions must be positive");
  require(norm_bound >= 0.0 && std::isfinite(norm_bound),
          "LinearMap: norm bound must be finite and nonnegative");
}

Vector LinearMap::apply(const Vector& x) const {
  require(x.size() == in_dim_, "LinearMap::apply: got dim " +
                                   std::to_string(x.size()) + ", expected " +
                                   std::to_string(in_dim_));
  return forward_(x);
}

Vector LinearMap::adjoint(const Vector& u) const {
  require(u.size() == out_dim_, "LinearMap::adjoint: got dim " +
                                    std::to_string(u.size()) + ", expected " +
                                    std::to_string(out_dim_));
  return adjoint_(u);
}

LinearMap LinearMap::transposed() const {
  return LinearMap(out_dim_, in_dim_, adjoint_, forward_, norm_bound_);
}

LinearMap identity_map(Index dim) {
  auto id = [](const Vector& x) { return x; };
  return LinearMap(dim, dim, id, id, 1.0);
}

LinearMap scaled_identity_map(Index dim, double scale) {
  auto f = [scale](const Vector& x) -> Vector { return scale * x; };
  return LinearMap(dim, dim, f, f, std::abs(scale));
}

LinearMap matrix_map(Matrix m) {
  require(m.rows() > 0 && m.cols() > 0, "matrix_map: empty matrix");
  Eigen::JacobiSVD<Matrix> svd(m);
  // Inflate by a few ulps so the bound stays an upper bound after rounding.
  const double bound = svd.singularValues()(0) * (1.0 + 1e-12);
  auto shared = std::make_shared<const Matrix>(std::move(m));
  return LinearMap(
      shared->cols(), shared->rows(),
      [shared](const Vector& x) -> Vector { return (*shared) * x; },
      [shared](const Vector& u) -> Vector {
        return shared->transpose() * u;
      },
      bound);
}

LinearMap compose(const LinearMap& outer, const LinearMap& inner) {
  require(outer.in_dim() == inner.out_dim(), "compose: dimension mismatch");
  return LinearMap(
      inner.in_dim(), outer.out_dim(),
      [outer, inner](const Vector& x) { return outer.apply(inner.apply(x)); },
      [outer, inner](const Vector& u) {
        return inner.adjoint(outer.adjoint(u));
      },
      outer.norm_bound() * inner.norm_bound());
}

double power_iteration_norm(const LinearMap& map, int iters,
                            std::uint64_t seed) {
  require(iters >= 1, "power_iteration_norm: iters must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(map.in_dim());
  for (Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
  x.normalize();

  double best = 0.0;
  for (int k = 0; k < iters; ++k) {
    const Vector lx = map.apply(x);
    // Rayleigh quotient of L*L at the unit vector x.
    best = std::max(best, lx.squaredNorm());
    Vector next = map.adjoint(lx);
    const double n = next.norm();
    if (n == 0.0 || !std::isfinite(n)) break;
    x = next / n;
  }
  return std::sqrt(best);
}

ImageGrid::ImageGrid(Index rows, Index cols)
    : ImageGrid(rows, cols, Vector::Zero(rows * cols)) {}

ImageGrid::ImageGrid(Index rows, Index cols, Vector pixels)
    : rows_(rows), cols_(cols), pixels_(std::move(pixels)) {
  require(rows >= 1 && cols >= 1, "ImageGrid: rows and cols must be >= 1");
  require(pixels_.size() == rows * cols,
          "ImageGrid: pixel count does not match rows*cols");
}

Vector discrete_gradient(const Vector& x, Index rows, Index cols) {
  require(rows >= 1 && cols >= 1, "discrete_gradient: empty grid");
  require(x.size() == rows * cols,
          "discrete_gradient: vector length does not match grid");
  const Index n = rows * cols;
  Vector g = Vector::Zero(2 * n);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index i = r * cols + c;
      if (c + 1 < cols) g[i] = x[i + 1] - x[i];
      if (r + 1 < rows) g[n + i] = x[i + cols] - x[i];
    }
  }
  return g;
}

Vector discrete_gradient(const ImageGrid& img) {
  return discrete_gradient(img.pixels(), img.rows(), img.cols());
}

Vector discrete_divergence(const Vector& field, Index rows, Index cols) {
  require(field.size() % 2 == 0,
          "discrete_divergence: field length must be even");
  require(rows >= 1 && cols >= 1, "discrete_divergence: empty grid");
  const Index n = rows * cols;
  require(field.size() == 2 * n,
          "discrete_divergence: field length does not match grid");
  Vector out = Vector::Zero(n);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index i = r * cols + c;
      double v = 0.0;
      if (c + 1 < cols) v -= field[i];
      if (c > 0) v += field[i - 1];
      if (r + 1 < rows) v -= field[n + i];
      if (r > 0) v += field[n + i - cols];
      out[i] = v;
    }
  }
  return out;
}

double gradient_norm_bound(Index rows, Index cols) {
  require(rows >= 2 && cols >= 2, "gradient_norm_bound: need rows, cols >= 2");
  return std::sqrt(8.0);
}

LinearMap gradient_map(Index rows, Index cols) {
  const double bound = gradient_norm_bound(rows, cols);
  return LinearMap(
      rows * cols, 2 * rows * cols,
      [rows, cols](const Vector& x) { return discrete_gradient(x, rows, cols); },
      [rows, cols](const Vector& y) {
        return discrete_divergence(y, rows, cols);
      },
      bound);
}

namespace {

void check_haar_dims(Index rows, Index cols, int levels) {
  require(levels >= 1, "haar: levels must be positive");
  require(rows >= 1 && cols >= 1, "haar: empty grid");
  const Index block = Index{1} << levels;
  require(rows % block == 0 && cols % block == 0,
          "haar: rows and cols must be divisible by 2^levels");
}

// One analysis level on the top-left h x w block of a rows x cols array.
void haar_forward_level(Vector& a, Index cols, Index h, Index w) {
  const double s = 1.0 / std::sqrt(2.0);
  Vector tmp(std::max(h, w));
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w / 2; ++c) {
      const double x0 = a[r * cols + 2 * c];
      const double x1 = a[r * cols + 2 * c + 1];
      tmp[c] = s * (x0 + x1);
      tmp[w / 2 + c] = s * (x0 - x1);
    }
    for (Index c = 0; c < w; ++c) a[r * cols + c] = tmp[c];
  }
  for (Index c = 0; c < w; ++c) {
    for (Index r = 0; r < h / 2; ++r) {
      const double x0 = a[(2 * r) * cols + c];
      const double x1 = a[(2 * r + 1) * cols + c];
      tmp[r] = s * (x0 + x1);
      tmp[h / 2 + r] = s * (x0 - x1);
    }
    for (Index r = 0; r < h; ++r) a[r * cols + c] = tmp[r];
  }
}

void haar_inverse_level(Vector& a, Index cols, Index h, Index w) {
  const double s = 1.0 / std::sqrt(2.0);
  Vector tmp(std::max(h, w));
  for (Index c = 0; c < w; ++c) {
    for (Index r = 0; r < h / 2; ++r) {
      const double lo = a[r * cols + c];
      const double hi = a[(h / 2 + r) * cols + c];
      tmp[2 * r] = s * (lo + hi);
      tmp[2 * r + 1] = s * (lo - hi);
    }
    for (Index r = 0; r < h; ++r) a[r * cols + c] = tmp[r];
  }
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w / 2; ++c) {
      const double lo = a[r * cols + c];
      const double hi = a[r * cols + w / 2 + c];
      tmp[2 * c] = s * (lo + hi);
      tmp[2 * c + 1] = s * (lo - hi);
    }
    for (Index c = 0; c < w; ++c) a[r * cols + c] = tmp[c];
  }
}

Vector haar_dwt_raw(const Vector& x, Index rows, Index cols, int levels) {
  check_haar_dims(rows, cols, levels);
  require(x.size() == rows * cols, "haar_dwt: length does not match grid");
  Vector a = x;
  for (int l = 0; l < levels; ++l)
    haar_forward_level(a, cols, rows >> l, cols >> l);
  return a;
}

Vector haar_idwt_raw(const Vector& coeffs, Index rows, Index cols,
                     int levels) {
  check_haar_dims(rows, cols, levels);
  require(coeffs.size() == rows * cols,
          "haar_idwt: length does not match grid");
  Vector a = coeffs;
  for (int l = levels - 1; l >= 0; --l)
    haar_inverse_level(a, cols, rows >> l, cols >> l);
  return a;
}

}  // namespace

Vector haar_dwt(const ImageGrid& img, int levels) {
  return haar_dwt_raw(img.pixels(), img.rows(), img.cols(), levels);
}

ImageGrid haar_idwt(const Vector& coeffs, Index rows, Index cols, int levels) {
  return ImageGrid(rows, cols, haar_idwt_raw(coeffs, rows, cols, levels));
}

LinearMap haar_map(Index rows, Index cols, int levels) {
  check_haar_dims(rows, cols, levels);
  return LinearMap(
      rows * cols, rows * cols,
      [=](const Vector& x) { return haar_dwt_raw(x, rows, cols, levels); },
      [=](const Vector& c) { return haar_idwt_raw(c, rows, cols, levels); },
      1.0);
}

namespace {

Vector gaussian_taps_1d(int size, double std_dev) {
  require(size >= 1 && size % 2 == 1, "gaussian kernel: size must be odd");
  require(std_dev > 0.0, "gaussian kernel: std must be positive");
  const int half = size / 2;
  Vector g(size);
  for (int i = -half; i <= half; ++i)
    g[i + half] = std::exp(-0.5 * (i * i) / (std_dev * std_dev));
  return g / g.sum();
}

// Periodic 1-D correlation along rows (axis 0 = horizontal) or columns.
Vector periodic_filter(const Vector& x, Index rows, Index cols,
                       const Vector& taps, bool horizontal) {
  const Index half = taps.size() / 2;
  Vector out(x.size());
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (Index k = -half; k <= half; ++k) {
        Index rr = r, cc = c;
        if (horizontal) {
          cc = ((c + k) % cols + cols) % cols;
        } else {
          rr = ((r + k) % rows + rows) % rows;
        }
        acc += taps[k + half] * x[rr * cols + cc];
      }
      out[r * cols + c] = acc;
    }
  }
  return out;
}

Vector blur_raw(const Vector& x, Index rows, Index cols, const Vector& taps) {
  return periodic_filter(periodic_filter(x, rows, cols, taps, true), rows,
                         cols, taps, false);
}

}  // namespace

Matrix gaussian_kernel(int size, double std_dev) {
  const Vector g = gaussian_taps_1d(size, std_dev);
  return g * g.transpose();
}

ImageGrid gaussian_blur(const ImageGrid& img, int size, double std_dev) {
  const Vector taps = gaussian_taps_1d(size, std_dev);
  return ImageGrid(img.rows(), img.cols(),
                   blur_raw(img.pixels(), img.rows(), img.cols(), taps));
}

LinearMap blur_map(Index rows, Index cols, int size, double std_dev) {
  const Vector taps = gaussian_taps_1d(size, std_dev);
  // The Gaussian is symmetric, so periodic convolution is self-adjoint.
  auto f = [=](const Vector& x) {
    require(x.size() == rows * cols, "blur: length does not match grid");
    return blur_raw(x, rows, cols, taps);
  };
  return LinearMap(rows * cols, rows * cols, f, f, 1.0);
}

}  // namespace fpdhf
