#include "fvs/probability.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fvs::probability {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t state = seed;
  (void)splitmix64(state);
  state ^= 0xD1B54A32D192ED03ULL * stream_id + 0x8CB92BA72F3D8DD7ULL;
  const std::uint64_t w0 = splitmix64(state);
  const std::uint64_t w1 = splitmix64(state);
  const std::uint64_t w2 = splitmix64(state);
  const std::uint64_t w3 = splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(w0), static_cast<std::uint32_t>(w0 >> 32),
                    static_cast<std::uint32_t>(w1), static_cast<std::uint32_t>(w1 >> 32),
                    static_cast<std::uint32_t>(w2), static_cast<std::uint32_t>(w2 >> 32),
                    static_cast<std::uint32_t>(w3), static_cast<std::uint32_t>(w3 >> 32)};
  return std::mt19937_64(seq);
}

// Regularized incomplete beta I_x(a, b) by the Lentz continued fraction.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta: continued fraction stalled");
}

double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::child(std::uint64_t key) const {
  std::uint64_t state = stream_id_ ^ (0x9E3779B97F4A7C15ULL + key);
  return RngStream(seed_, splitmix64(state));
}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double a, double b) {
  return a + (b - a) * uniform();
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int RngStream::categorical(const std::vector<double>& cum) {
  const double u = uniform();
  for (std::size_t i = 0; i < cum.size(); ++i) {
    if (u < cum[i]) return static_cast<int>(i);
  }
  return static_cast<int>(cum.size()) - 1;
}

Eigen::MatrixXd ar1_chol(int p, double rho) {
  if (p < 1) throw std::invalid_argument("ar1_chol: p must be >= 1");
  if (!(std::abs(rho) < 1.0)) {
    throw std::invalid_argument("ar1_chol: |rho| must be < 1");
  }
  Eigen::MatrixXd sigma(p, p);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < p; ++k) {
      sigma(j, k) = std::pow(rho, std::abs(j - k));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("ar1_chol: factorization failed");
  }
  return llt.matrixL();
}

double f_cdf(double x, int d1, int d2) {
  if (d1 < 1 || d2 < 1) {
    throw std::invalid_argument("f_cdf: degrees of freedom must be >= 1");
  }
  if (x <= 0.0) return 0.0;
  const double a = 0.5 * d1;
  const double b = 0.5 * d2;
  const double t = d1 * x / (d1 * x + d2);
  return ibeta(a, b, t);
}

double f_quantile(double q, int d1, int d2) {
  if (d1 < 1 || d2 < 1) {
    throw std::invalid_argument("f_quantile: degrees of freedom must be >= 1");
  }
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("f_quantile: q must lie in (0, 1)");
  }

  // Bracket the root, then bisect with Newton acceleration on the CDF.
  double lo = 0.0;
  double hi = 1.0;
  while (f_cdf(hi, d1, d2) < q) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw std::runtime_error("f_quantile: bracketing failed");
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double fx = f_cdf(x, d1, d2) - q;
    if (std::abs(fx) < 1e-10) break;
    if (fx > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    // Central F density at x for the Newton step.
    const double a = 0.5 * d1;
    const double b = 0.5 * d2;
    const double lam = static_cast<double>(d1) / d2;
    const double lpdf = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                        a * std::log(lam) + (a - 1.0) * std::log(x) -
                        (a + b) * std::log1p(lam * x);
    const double pdf = std::exp(lpdf);
    double next = pdf > 0.0 ? x - fx / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

double student_t_quantile(double q, int dof) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("student_t_quantile: q must lie in (0, 1)");
  }
  if (q == 0.5) return 0.0;
  if (q > 0.5) {
    return std::sqrt(f_quantile(2.0 * q - 1.0, 1, dof));
  }
  return -std::sqrt(f_quantile(1.0 - 2.0 * q, 1, dof));
}

Eigen::MatrixXd sample_gaussian_rows(RngStream& rng, int n,
                                     const Eigen::MatrixXd& chol) {
  if (chol.rows() != chol.cols()) {
    throw std::invalid_argument("sample_gaussian_rows: factor must be square");
  }
  const int p = static_cast<int>(chol.rows());
  Eigen::MatrixXd z(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      z(i, j) = rng.normal();
    }
  }
  return z * chol.transpose();
}

std::vector<int> sample_multinomial_categories(RngStream& rng, int n, int k,
                                               const std::vector<double>& probs) {
  if (k < 1 || static_cast<int>(probs.size()) != k) {
    throw std::invalid_argument(
        "sample_multinomial_categories: need k >= 1 probabilities");
  }
  double total = 0.0;
  for (double pr : probs) {
    if (pr < 0.0) {
      throw std::invalid_argument(
          "sample_multinomial_categories: negative probability");
    }
    total += pr;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument(
        "sample_multinomial_categories: probabilities must sum to 1");
  }
  std::vector<double> cum(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cum.begin());
  cum.back() = 1.0;
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = rng.categorical(cum) + 1;
  }
  return labels;
}

}  // namespace fvs::probability
