#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>

namespace fpdhf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Matrix-free linear operator between R^in_dim and R^out_dim.
///
/// `norm_bound` is a certified upper bound on the operator norm; step-size
/// rules use it in place of the (usually unknown) exact norm.
class LinearMap {
 public:
  using Apply = std::function<Vector(const Vector&)>;

  LinearMap(Index in_dim, Index out_dim, Apply forward, Apply adjoint,
            double norm_bound);

  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }
  double norm_bound() const { return norm_bound_; }

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& u) const;

  /// The adjoint as a map of its own (swapped dims, same bound).
  LinearMap transposed() const;

 private:
  Index in_dim_;
  Index out_dim_;
  Apply forward_;
  Apply adjoint_;
  double norm_bound_;
};

LinearMap identity_map(Index dim);
LinearMap scaled_identity_map(Index dim, double scale);
/// Dense matrix; the bound is the largest singular value.
LinearMap matrix_map(Matrix m);
/// Composition outer∘inner, bound is the product of bounds.
LinearMap compose(const LinearMap& outer, const LinearMap& inner);

/// Estimate of ||L|| from power iteration on L*L. The Rayleigh quotient
/// estimate is nondecreasing in the iteration count and never exceeds the
/// true norm (up to rounding). Returns 0 for the zero map.
double power_iteration_norm(const LinearMap& map, int iters,
                            std::uint64_t seed);

/// Grayscale image, row-major. Intensities are expected in [0, x_max].
class ImageGrid {
 public:
  ImageGrid(Index rows, Index cols);
  ImageGrid(Index rows, Index cols, Vector pixels);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return rows_ * cols_; }
  const Vector& pixels() const { return pixels_; }
  Vector& pixels() { return pixels_; }

  double operator()(Index r, Index c) const { return pixels_[r * cols_ + c]; }
  double& operator()(Index r, Index c) { return pixels_[r * cols_ + c]; }

 private:
  Index rows_;
  Index cols_;
  Vector pixels_;
};

// Discrete gradient with forward differences and Neumann boundary. The
// output packs (D1 x, D2 x) into one vector of length 2N: D1 holds the
// horizontal differences x(r,c+1)-x(r,c), D2 the vertical ones
// x(r+1,c)-x(r,c); the last column of D1 and last row of D2 are zero.
Vector discrete_gradient(const ImageGrid& img);
Vector discrete_gradient(const Vector& x, Index rows, Index cols);

/// Exact adjoint of discrete_gradient (the negative of the usual
/// divergence stencil).
Vector discrete_divergence(const Vector& field, Index rows, Index cols);

/// sqrt(8), the certified bound on ||grad|| for any grid with rows, cols >= 2.
double gradient_norm_bound(Index rows, Index cols);
LinearMap gradient_map(Index rows, Index cols);

/// Orthonormal 2-D Haar transform with Mallat layout: after each level the
/// top-left (rows/2^l x cols/2^l) block holds the approximation coefficients.
Vector haar_dwt(const ImageGrid& img, int levels);
ImageGrid haar_idwt(const Vector& coeffs, Index rows, Index cols, int levels);
LinearMap haar_map(Index rows, Index cols, int levels);

/// Gaussian taps sampled at integer offsets in [-size/2, size/2]^2 and
/// normalized to sum 1. Row-major size x size.
Matrix gaussian_kernel(int size, double std_dev);

/// Periodic convolution with gaussian_kernel(size, std_dev). Self-adjoint,
/// operator norm exactly 1.
ImageGrid gaussian_blur(const ImageGrid& img, int size, double std_dev);
LinearMap blur_map(Index rows, Index cols, int size, double std_dev);

}  // namespace fpdhf
