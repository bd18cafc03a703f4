#include "fri/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "fri/csv.hpp"
#include "fri/errors.hpp"

namespace fri {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAlphaTol = 1e-12;

// antiderivative of coef * u^r * e^{alpha u} as exp-poly terms
void append_antiderivative(std::vector<ExpPolyPiecewise::Term>& out, cplx alpha, int r, cplx coef) {
  if (std::abs(alpha) < kAlphaTol) {
    out.push_back({cplx(0.0), r + 1, coef / double(r + 1)});
    return;
  }
  // integral u^r e^{au} du = e^{au} sum_{i=0..r} (-1)^i r!/(r-i)! u^{r-i} / a^{i+1}
  double fall = 1.0;
  cplx apow = alpha;
  for (int i = 0; i <= r; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    out.push_back({alpha, r - i, coef * sign * fall / apow});
    fall *= double(r - i);
    apow *= alpha;
  }
}

cplx eval_terms(const std::vector<ExpPolyPiecewise::Term>& terms, double t) {
  cplx acc(0.0);
  for (const auto& term : terms) {
    double p = 1.0;
    for (int i = 0; i < term.degree; ++i) p *= t;
    acc += term.coef * p * std::exp(term.alpha * t);
  }
  return acc;
}

long binom(int n, int k) {
  long r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

struct TermAccumulator {
  // merge terms by (alpha, degree); alpha matched with tolerance
  std::vector<ExpPolyPiecewise::Term> terms;
  void add(cplx alpha, int degree, cplx coef) {
    for (auto& t : terms) {
      if (t.degree == degree && std::abs(t.alpha - alpha) < kAlphaTol) {
        t.coef += coef;
        return;
      }
    }
    terms.push_back({alpha, degree, coef});
  }
  void add_shifted_poly(cplx alpha, int degree, cplx coef) {
    // coef * (t-1)^degree * e^{alpha t}, expanded in powers of t
    for (int i = 0; i <= degree; ++i) {
      const double sign = ((degree - i) % 2 == 0) ? 1.0 : -1.0;
      add(alpha, i, coef * double(binom(degree, i)) * sign);
    }
  }
};

}  // namespace

ExpPolyPiecewise ExpPolyPiecewise::espline(const std::vector<double>& omegas) {
  if (omegas.empty()) throw ConfigError("espline: need at least one frequency");
  ExpPolyPiecewise rep;
  rep.intervals_.push_back({{cplx(0.0, omegas[0]), 0, cplx(1.0)}});
  for (std::size_t m = 1; m < omegas.size(); ++m) rep.convolve_atom(cplx(0.0, omegas[m]));
  return rep;
}

void ExpPolyPiecewise::convolve_atom(cplx alpha0) {
  // f(t) = int_0^1 e^{alpha0 s} g(t - s) ds, support of g is [0, p]
  const int p = static_cast<int>(intervals_.size());
  std::vector<std::vector<Term>> result(p + 1);
  for (int k = 0; k <= p; ++k) {
    TermAccumulator acc;
    // piece over u = t - s in [k, t], g on interval k
    if (k <= p - 1) {
      std::vector<Term> F;
      for (const auto& term : intervals_[k])
        append_antiderivative(F, term.alpha - alpha0, term.degree, term.coef);
      for (const auto& f : F) acc.add(f.alpha + alpha0, f.degree, f.coef);  // +e^{a0 t} F(t)
      acc.add(alpha0, 0, -eval_terms(F, double(k)));                        // -e^{a0 t} F(k)
    }
    // piece over u in [t-1, k], g on interval k-1
    if (k >= 1) {
      std::vector<Term> F;
      for (const auto& term : intervals_[k - 1])
        append_antiderivative(F, term.alpha - alpha0, term.degree, term.coef);
      acc.add(alpha0, 0, eval_terms(F, double(k)));  // +e^{a0 t} F(k)
      for (const auto& f : F) {
        // -e^{a0 t} F(t-1): expand (t-1)^degree
        if (std::abs(f.alpha) < kAlphaTol) {
          acc.add_shifted_poly(alpha0, f.degree, -f.coef);
        } else {
          acc.add_shifted_poly(f.alpha + alpha0, f.degree, -f.coef * std::exp(-f.alpha));
        }
      }
    }
    result[k] = std::move(acc.terms);
  }
  intervals_ = std::move(result);
}

cplx ExpPolyPiecewise::eval(double t) const {
  const int k = static_cast<int>(std::floor(t));
  if (k < 0 || k >= static_cast<int>(intervals_.size())) return cplx(0.0);
  return eval_terms(intervals_[k], t);
}

// ---------------------------------------------------------------------------

Kernel Kernel::emoms(int P) {
  if (P < 1) throw ConfigError("emoms: P must be >= 1");
  Kernel k;
  k.variant_ = Variant::EMoms;
  k.emoms_order_ = P;
  k.support_ = {0.0, double(P + 1)};
  k.real_valued_ = true;
  const double omega0 = -P * kPi / (P + 1);
  const double lambda = 2.0 * kPi / (P + 1);
  for (int m = 0; m <= P; ++m) k.emoms_omegas_.push_back(omega0 + m * lambda);
  return k;
}

Kernel Kernel::espline(const std::vector<double>& omegas) {
  Kernel k;
  k.variant_ = Variant::ESpline;
  k.espline_ = std::make_shared<ExpPolyPiecewise>(ExpPolyPiecewise::espline(omegas));
  k.support_ = {0.0, double(omegas.size())};
  // real valued iff frequencies are conjugate-symmetric
  std::vector<double> sorted = omegas;
  std::sort(sorted.begin(), sorted.end());
  k.real_valued_ = true;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (std::abs(sorted[i] + sorted[sorted.size() - 1 - i]) > 1e-12) k.real_valued_ = false;
  return k;
}

Kernel Kernel::piecewise_linear(std::vector<double> d, double delta) {
  if (delta <= 0.0) throw ConfigError("piecewise_linear: delta must be positive");
  Kernel k;
  k.variant_ = Variant::PiecewiseLinear;
  k.pwl_d_ = std::move(d);
  k.pwl_delta_ = delta;
  k.support_ = {0.0, delta * double(k.pwl_d_.size())};
  k.real_valued_ = true;
  return k;
}

Kernel Kernel::tabulated(std::vector<double> values, double step) {
  if (values.size() < 2 || step <= 0.0) throw ConfigError("tabulated: need >= 2 samples");
  Kernel k;
  k.variant_ = Variant::Tabulated;
  k.tab_values_ = std::move(values);
  k.tab_step_ = step;
  k.support_ = {0.0, step * double(k.tab_values_.size() - 1)};
  k.real_valued_ = true;
  return k;
}

Kernel Kernel::from_csv(const std::filesystem::path& path) {
  auto rows = csv::read_table(path);
  if (rows.size() < 2) throw ConfigError("kernel csv: need >= 2 rows");
  const double t0 = rows[0][0];
  const double step = rows[1][0] - rows[0][0];
  if (step <= 0.0) throw ConfigError("kernel csv: grid must be increasing");
  std::vector<double> values;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() < 2) throw ConfigError("kernel csv: expected two columns");
    if (std::abs(rows[i][0] - (t0 + step * double(i))) > 1e-9 * std::max(1.0, std::abs(step)))
      throw ConfigError("kernel csv: grid must be uniform");
    values.push_back(rows[i][1]);
  }
  (void)t0;  // support is normalised to start at 0
  return tabulated(std::move(values), step);
}

void Kernel::to_csv(const std::filesystem::path& path, double step) const {
  std::vector<std::vector<double>> rows;
  for (double t = support_.lo; t <= support_.hi + 1e-12; t += step)
    rows.push_back({t, (*this)(t)});
  csv::write_table(path, "", rows);
}

cplx Kernel::eval_complex(double t) const {
  switch (variant_) {
    case Variant::EMoms: {
      if (t < 0.0 || t >= support_.hi) return cplx(0.0);
      const double c = 0.5 * (emoms_order_ + 1);
      double acc = 0.0;
      for (double w : emoms_omegas_) acc += std::cos(w * (t - c));
      return cplx(acc / double(emoms_order_ + 1));
    }
    case Variant::ESpline:
      return espline_->eval(t);
    case Variant::PiecewiseLinear: {
      if (t <= 0.0) return cplx(0.0);
      return cplx(eval_piecewise(pwl_d_, pwl_delta_, t));
    }
    case Variant::Tabulated: {
      if (t < 0.0 || t > support_.hi) return cplx(0.0);
      const double x = t / tab_step_;
      const auto i = static_cast<std::size_t>(std::min(double(tab_values_.size() - 2), std::floor(x)));
      const double frac = x - double(i);
      return cplx(tab_values_[i] * (1.0 - frac) + tab_values_[i + 1] * frac);
    }
  }
  return cplx(0.0);
}

double Kernel::operator()(double t) const { return eval_complex(t).real(); }

const std::vector<double>& Kernel::coefficients() const {
  if (variant_ != Variant::PiecewiseLinear)
    throw ConfigError("coefficients(): kernel is not piecewise linear");
  return pwl_d_;
}

double Kernel::step() const {
  if (variant_ != Variant::PiecewiseLinear)
    throw ConfigError("step(): kernel is not piecewise linear");
  return pwl_delta_;
}

// ---------------------------------------------------------------------------

ExpReproCoeffs exp_repro_coeffs(const Kernel& kernel, int P, double omega0, double lambda,
                                int N, int first_index, double tol) {
  if (P < 0 || N < 1) throw ConfigError("exp_repro_coeffs: bad dimensions");
  const auto sup = kernel.support();

  // dense grid over one shift period; the shifted-kernel values are shared
  // across all frequencies
  const int grid = 1 << 11;
  const double h = 1.0 / grid;
  const int n_lo = static_cast<int>(std::floor(0.0 - sup.hi)) - 1;
  const int n_hi = static_cast<int>(std::ceil(1.0 - sup.lo)) + 1;
  const int shifts = n_hi - n_lo + 1;

  Eigen::MatrixXd phi_shift(grid, shifts);
  for (int g = 0; g < grid; ++g)
    for (int s = 0; s < shifts; ++s)
      phi_shift(g, s) = kernel(g * h - double(n_lo + s));

  ExpReproCoeffs out;
  out.omega0 = omega0;
  out.lambda = lambda;
  out.first_index = first_index;
  out.c.resize(P + 1, N);
  out.c0.resize(P + 1);

  for (int m = 0; m <= P; ++m) {
    const double w = omega0 + m * lambda;
    // psi_m(t) = sum_n e^{j w n} phi(t - n); scalar LS for c_{m,0}
    cplx num(0.0), den(0.0);
    for (int g = 0; g < grid; ++g) {
      cplx psi(0.0);
      for (int s = 0; s < shifts; ++s)
        psi += std::polar(1.0, w * double(n_lo + s)) * phi_shift(g, s);
      const cplx target = std::polar(1.0, w * (g * h));
      num += std::conj(psi) * target;
      den += std::conj(psi) * psi;
    }
    if (std::abs(den) < 1e-300)
      throw NumericalError("exp_repro_coeffs: kernel does not span frequency m=" + std::to_string(m));
    out.c0[m] = num / den;
    for (int n = 0; n < N; ++n)
      out.c(m, n) = out.c0[m] * std::polar(1.0, w * double(first_index + n));
  }

  // sup-norm residual of Eq. (2) over two shift periods
  double worst = 0.0;
  for (int m = 0; m <= P; ++m) {
    const double w = omega0 + m * lambda;
    for (int g = 0; g < 2 * grid; g += 4) {
      const double t = g * h;
      cplx acc(0.0);
      const int lo = static_cast<int>(std::floor(t - sup.hi)) - 1;
      const int hi = static_cast<int>(std::ceil(t - sup.lo)) + 1;
      for (int n = lo; n <= hi; ++n)
        acc += out.c0[m] * std::polar(1.0, w * double(n)) * kernel(t - double(n));
      worst = std::max(worst, std::abs(acc - std::polar(1.0, w * t)));
    }
  }
  out.residual = worst;
  if (worst > tol)
    throw NumericalError("exp_repro_coeffs: reproduction residual " + std::to_string(worst) +
                         " above tolerance (kernel/frequency mismatch)");
  return out;
}

std::vector<double> piecewise_from_kernel(const Kernel& kernel, double delta) {
  const auto sup = kernel.support();
  const double len = sup.length();
  const double count = len / delta;
  const auto I = static_cast<std::size_t>(std::llround(count));
  if (std::abs(count - double(I)) > 1e-9 || I == 0)
    throw ConfigError("piecewise_from_kernel: delta must divide the support length");
  // slope-increment form: the running sum of d equals the interpolant's slope
  // on [i*delta, (i+1)*delta), so phi_hat matches phi at every grid node when
  // phi vanishes at the support start (the first ReLU knot sits at 0)
  std::vector<double> d(I, 0.0);
  double partial = 0.0;  // sum of d_j, j < i
  for (std::size_t i = 0; i < I; ++i) {
    const double slope =
        (kernel(sup.lo + delta * double(i + 1)) - kernel(sup.lo + delta * double(i))) / delta;
    d[i] = slope - partial;
    partial += d[i];
  }
  return d;
}

double eval_piecewise(const std::vector<double>& d, double delta, double t) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double arg = t - delta * double(i);
    if (arg <= 0.0) break;  // knots are ascending
    acc += d[i] * arg;
  }
  return acc;
}

}  // namespace fri
