#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "npnce/dataset.hpp"
#include "npnce/error.hpp"
#include "npnce/graph.hpp"
#include "npnce/normal.hpp"

namespace npnce {

/// Linear SEM X = A X + eps with A strictly lower triangular; A(i, j) != 0
/// is the edge j -> i.
struct LinearSem {
  Eigen::MatrixXd weights;
  double edge_prob = 0.0;

  std::size_t p() const { return static_cast<std::size_t>(weights.rows()); }

  Dag dag() const {
    std::vector<Edge> edges;
    for (Eigen::Index i = 0; i < weights.rows(); ++i)
      for (Eigen::Index j = 0; j < i; ++j)
        if (weights(i, j) != 0.0) edges.emplace_back(static_cast<Node>(j), static_cast<Node>(i));
    return Dag(p(), edges);
  }
};

/// splitmix64 finalizer; derives independent sub-seeds from (seed, tags).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  auto step = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return step(step(step(seed) ^ a) ^ (b * 0x632be59bd9b4e019ull));
}

/// Random DAG on p nodes: each pair j < i gets the edge j -> i with
/// probability s, weight magnitude U[0.1, 1] and a random sign.
inline LinearSem random_dag(std::size_t p, double s, std::uint64_t seed) {
  if (p < 1) throw InputError("random_dag: p must be positive");
  if (!(s > 0.0 && s < 1.0)) throw DomainError("random_dag: s must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(s), sign(0.5);
  std::uniform_real_distribution<double> magnitude(0.1, 1.0);
  LinearSem sem;
  sem.edge_prob = s;
  sem.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 1; i < sem.weights.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      if (!edge(rng)) continue;
      const double w = magnitude(rng);
      sem.weights(i, j) = sign(rng) ? w : -w;
    }
  return sem;
}

/// (I - A)^-1 (I - A)^-T, the covariance of X under unit-variance noise.
inline Eigen::MatrixXd population_covariance(const LinearSem& sem) {
  const auto p = sem.weights.rows();
  const Eigen::MatrixXd b =
      (Eigen::MatrixXd::Identity(p, p) - sem.weights).triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(p, p));
  return b * b.transpose();
}

/// n draws from the SEM with standard normal noise, by forward substitution.
inline DataMatrix sample_gaussian(const LinearSem& sem, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample_gaussian: n must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto p = sem.weights.rows();
  DataMatrix out;
  out.names = default_column_names(static_cast<std::size_t>(p));
  out.values.resize(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index r = 0; r < out.values.rows(); ++r)
    for (Eigen::Index i = 0; i < p; ++i) {
      double v = noise(rng);
      for (Eigen::Index j = 0; j < i; ++j)
        if (sem.weights(i, j) != 0.0) v += sem.weights(i, j) * out.values(r, j);
      out.values(r, i) = v;
    }
  return out;
}

/// Total causal effect of X_i on X_y: coefficient of X_i in the population
/// regression of X_y on X_i and its parents; zero when y is a parent of i.
inline double true_effect(const LinearSem& sem, Node i, Node y) {
  const std::size_t p = sem.p();
  if (i >= p || y >= p || i == y) throw InputError("true_effect: invalid cause/target");
  const Dag g = sem.dag();
  const auto& pa = g.parents(i);
  if (pa.count(y)) return 0.0;
  const Eigen::MatrixXd sigma = population_covariance(sem);
  std::vector<Node> s{i};
  s.insert(s.end(), pa.begin(), pa.end());
  const auto m = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd sss(m, m);
  Eigen::VectorXd sys(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto sa = static_cast<Eigen::Index>(s[static_cast<std::size_t>(a)]);
    sys(a) = sigma(sa, static_cast<Eigen::Index>(y));
    for (Eigen::Index b = 0; b < m; ++b) sss(a, b) = sigma(sa, static_cast<Eigen::Index>(s[static_cast<std::size_t>(b)]));
  }
  return sss.llt().solve(sys)(0);
}

struct MarginalTransform {
  enum class Kind { identity, exponential };
  Kind kind = Kind::identity;
  double lambda = 1.0;

  static MarginalTransform identity() { return {}; }
  static MarginalTransform exponential(double rate) { return {Kind::exponential, rate}; }
};

/// Exponential(lambda) quantile of Phi(z), computed on the upper tail.
inline double exponential_of_normal(double z, double lambda) { return -std::log(std_cdf(-z)) / lambda; }

/// Standardizes each column to mean 0 and unit sample variance, then maps it
/// through F^-1(Phi(.)) for the chosen marginal F.
inline DataMatrix npn_transform(const DataMatrix& data, MarginalTransform marginal) {
  if (marginal.kind == MarginalTransform::Kind::exponential && !(marginal.lambda > 0.0))
    throw DomainError("npn_transform: exponential rate must be positive");
  DataMatrix out = data;
  const double n = static_cast<double>(data.values.rows());
  if (data.values.rows() < 2) throw InputError("npn_transform: need at least 2 rows");
  for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
    auto col = out.values.col(j);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
    if (!(sd > 0.0)) throw InputError("npn_transform: zero-variance column");
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      const double z = (col(r) - mean) / sd;
      col(r) = marginal.kind == MarginalTransform::Kind::identity ? z : exponential_of_normal(z, marginal.lambda);
    }
  }
  return out;
}

/// Bivariate model with Exponential(1) margins: X = F^-1(Phi(Z1)),
/// Y = F^-1(Phi((Z1 + Z2)/sqrt 2)), so the latent correlation is 1/sqrt 2.
inline DataMatrix sample_exp_model(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample_exp_model: n must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DataMatrix out;
  out.names = {"X", "Y"};
  out.response = 1;
  out.values.resize(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    out.values(r, 0) = exponential_of_normal(z1, 1.0);
    out.values(r, 1) = exponential_of_normal((z1 + z2) / std::sqrt(2.0), 1.0);
  }
  return out;
}

/// Gaussian copula with correlation rho and Exponential(lambda_x),
/// Exponential(lambda_y) margins.
struct ExpCopulaModel {
  double rho = 0.0;
  double lambda_x = 1.0;
  double lambda_y = 1.0;

  void validate() const {
    if (!(std::abs(rho) < 1.0)) throw DomainError("ExpCopulaModel: |rho| must be < 1");
    if (!(lambda_x > 0.0 && lambda_y > 0.0)) throw DomainError("ExpCopulaModel: rates must be positive");
  }
};

class QuadratureError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

inline constexpr double kQuadratureLimit = 8.0;
inline constexpr std::size_t kQuadratureNodes = 4001;
inline constexpr double kQuadratureTol = 1e-5;

namespace detail {

// Composite Simpson on [-8, 8] with an odd node count.
template <class F>
double simpson(F&& f, std::size_t nodes) {
  const double h = 2.0 * kQuadratureLimit / static_cast<double>(nodes - 1);
  double sum = f(-kQuadratureLimit) + f(kQuadratureLimit);
  for (std::size_t k = 1; k + 1 < nodes; ++k) sum += (k % 2 == 1 ? 4.0 : 2.0) * f(-kQuadratureLimit + h * static_cast<double>(k));
  return sum * h / 3.0;
}

template <class F>
double refined_simpson(F&& f, const char* who) {
  const double coarse = simpson(f, kQuadratureNodes);
  const double fine = simpson(f, 2 * kQuadratureNodes - 1);
  if (std::abs(fine - coarse) > kQuadratureTol * std::max(std::abs(fine), 1e-300) &&
      std::abs(fine - coarse) > 1e-14)
    throw QuadratureError(std::string(who) + ": Simpson refinement disagrees (" + std::to_string(coarse) + " vs " +
                          std::to_string(fine) + ")");
  return fine;
}

// Latent score of x under Exponential(lambda): Phi^-1(1 - e^(-lambda x)).
inline double exp_latent(double x, double lambda) { return -std_quantile(std::exp(-lambda * x)); }

}  // namespace detail

/// E[Y | X = x] by quadrature over w = Phi^-1(F_Y(y)).
inline double exp_conditional_mean(const ExpCopulaModel& m, double x) {
  m.validate();
  if (!(x > 0.0)) throw DomainError("exp_conditional_mean: x must be positive");
  const double s = std::sqrt(1.0 - m.rho * m.rho);
  const double zx = detail::exp_latent(x, m.lambda_x);
  return detail::refined_simpson(
      [&](double w) { return exponential_of_normal(w, m.lambda_y) * std_pdf((w - m.rho * zx) / s) / s; },
      "exp_conditional_mean");
}

/// d/dx E[Y | X = x]:
///   -(rho / (1 - rho^2)) z'(x) Int y(w) phi'(t) dw,  t = (w - rho z(x)) / sqrt(1 - rho^2),
/// with z(x) = Phi^-1(1 - e^(-lambda_x x)) and z'(x) = lambda_x e^(-lambda_x x) / phi(z(x)).
inline double exp_causal_effect_oracle(const ExpCopulaModel& m, double x) {
  m.validate();
  if (!(x > 0.0)) throw DomainError("exp_causal_effect_oracle: x must be positive");
  if (m.rho == 0.0) return 0.0;
  const double s2 = 1.0 - m.rho * m.rho;
  const double s = std::sqrt(s2);
  const double zx = detail::exp_latent(x, m.lambda_x);
  const double dz = m.lambda_x * std::exp(-m.lambda_x * x) / std_pdf(zx);
  const double integral = detail::refined_simpson(
      [&](double w) {
        const double t = (w - m.rho * zx) / s;
        return exponential_of_normal(w, m.lambda_y) * (-t * std_pdf(t));
      },
      "exp_causal_effect_oracle");
  return -(m.rho / s2) * dz * integral;
}

}  // namespace npnce
