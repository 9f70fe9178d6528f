#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ivbart {

// splitmix64; used to derive independent stream seeds from (seed, tag...).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t t : tags) s = splitmix64(s ^ splitmix64(t));
  return s;
}

// Self-contained draw routines on top of mt19937_64 so that streams are
// reproducible independent of the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags)
      : gen_(derive_seed(seed, tags)) {}

  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;
  Rng(Rng&&) = default;
  Rng& operator=(Rng&&) = default;

  // uniform on (0,1); never returns 0 or 1
  double uniform() {
    while (true) {
      double u = (gen_() >> 11) * 0x1.0p-53;
      if (u > 0.0 && u < 1.0) return u;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t bits() { return gen_(); }

  // integer in [0, n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  double exponential() { return -std::log(uniform()); }

  // Marsaglia-Tsang; shape > 0, scale > 0
  double gamma(double shape, double scale = 1.0) {
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  double chisq(double dof) { return gamma(0.5 * dof, 2.0); }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  // index sampled proportionally to exp(logw - max(logw))
  std::size_t categorical_log(const std::vector<double>& logw) {
    double mx = logw[0];
    for (double w : logw) mx = std::max(mx, w);
    double total = 0.0;
    std::vector<double> p(logw.size());
    for (std::size_t i = 0; i < logw.size(); ++i) {
      p[i] = std::exp(logw[i] - mx);
      total += p[i];
    }
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
      acc += p[i];
      if (u <= acc) return i;
    }
    return logw.size() - 1;
  }

  std::size_t categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u <= acc) return i;
    }
    return w.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ivbart
