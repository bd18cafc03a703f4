#pragma once

#include <Eigen/Dense>
#include <complex>
#include <filesystem>
#include <memory>
#include <vector>

namespace fri {

using cplx = std::complex<double>;

// Exact closed-form representation of iterated convolutions of first-order
// atoms e^{j w s} 1_[0,1)(s): on each interval [k, k+1) the function is a sum
// of terms coef * t^degree * e^{alpha t}. Evaluation is exact to double
// precision for any order, including repeated frequencies.
class ExpPolyPiecewise {
 public:
  struct Term {
    cplx alpha;
    int degree;
    cplx coef;
  };

  // E-spline of order omegas.size(): convolution of atoms e^{j omega_m s}.
  static ExpPolyPiecewise espline(const std::vector<double>& omegas);

  cplx eval(double t) const;
  int interval_count() const { return static_cast<int>(intervals_.size()); }

 private:
  ExpPolyPiecewise() = default;
  void convolve_atom(cplx alpha0);
  std::vector<std::vector<Term>> intervals_;  // interval k covers [k, k+1)
};

struct KernelSupport {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

// Sampling kernel phi(t). All variants have support starting at 0 and are
// zero for t <= 0; evaluation is pure and thread-safe.
class Kernel {
 public:
  enum class Variant { EMoms, ESpline, PiecewiseLinear, Tabulated };

  // eMOMS reproducing P+1 exponentials at omega_m = -P*pi/(P+1) + m*2*pi/(P+1).
  // Realised as the centred period-(P+1) Dirichlet window; the reproduction
  // residual test is the arbiter of correctness.
  static Kernel emoms(int P);
  static Kernel espline(const std::vector<double>& omegas);
  static Kernel piecewise_linear(std::vector<double> d, double delta);
  static Kernel tabulated(std::vector<double> values, double step);
  static Kernel from_csv(const std::filesystem::path& path);  // two columns t,phi
  void to_csv(const std::filesystem::path& path, double step = 1.0 / 64.0) const;

  double operator()(double t) const;      // real part; kernels used for sampling are real
  cplx eval_complex(double t) const;
  KernelSupport support() const { return support_; }
  Variant variant() const { return variant_; }
  bool real_valued() const { return real_valued_; }

  // PiecewiseLinear accessors
  const std::vector<double>& coefficients() const;
  double step() const;

 Kernel() = default;  // empty kernel; factories produce usable instances

 private:
  Variant variant_ = Variant::Tabulated;
  KernelSupport support_;
  bool real_valued_ = true;

  int emoms_order_ = 0;
  std::vector<double> emoms_omegas_;

  std::shared_ptr<const ExpPolyPiecewise> espline_;

  std::vector<double> pwl_d_;
  double pwl_delta_ = 0.0;

  std::vector<double> tab_values_;
  double tab_step_ = 0.0;
};

// Exponential reproduction coefficients of Eq.-(2) form: c_{m,n} = c_{m,0} e^{j omega_m n}
// with omega_m = omega0 + m*lambda, n running over the centred sample grid.
struct ExpReproCoeffs {
  Eigen::MatrixXcd c;                 // (P+1) x N
  std::vector<cplx> c0;               // c_{m,0}
  double omega0 = 0.0;
  double lambda = 0.0;
  int first_index = 0;                // n0 of the sample grid
  double residual = 0.0;              // measured sup-norm reproduction residual
  int order() const { return static_cast<int>(c.rows()) - 1; }
  int sample_count() const { return static_cast<int>(c.cols()); }
};

// Least-squares fit of c_{m,0} on a dense grid; throws NumericalError when the
// kernel cannot reproduce the requested exponentials (residual above tol).
ExpReproCoeffs exp_repro_coeffs(const Kernel& kernel, int P, double omega0, double lambda,
                                int N, int first_index, double tol = 1e-8);

// Piecewise-linear ReLU coefficients of a kernel at uniform step delta:
// d_0 = 0 and d_i = [phi((i+1)delta) - phi(i delta)]/delta - sum_{j<i} d_j.
std::vector<double> piecewise_from_kernel(const Kernel& kernel, double delta);

// phi_hat_Delta(t) = sum_i d_i * max(0, t - i*delta)
double eval_piecewise(const std::vector<double>& d, double delta, double t);

}  // namespace fri
