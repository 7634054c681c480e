#include "misem/projection.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "misem/error.hpp"

namespace misem::projection {

namespace {

constexpr int kDims = 3;
constexpr double kMinProbability = 1e-12;
constexpr int kMomentumSwitchIteration = 250;
constexpr double kStartMomentum = 0.5;
constexpr double kFinalMomentum = 0.8;
constexpr double kMinGain = 0.01;
constexpr int kMaxStepHalvings = 40;

// Correctly rounded sum of a stream of doubles, so results do not depend on summation order.
class ExactSum {
 public:
  void add(double x) {
    std::size_t kept = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[kept++] = lo;
      x = hi;
    }
    partials_.resize(kept);
    partials_.push_back(x);
  }

  double value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

  void clear() { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

std::vector<double> squared_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      auto a = x.row(i);
      auto b = x.row(j);
      for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      d[i * n + j] = d[j * n + i] = s;
    }
  }
  return d;
}

// Symmetrized joint probabilities with per-point bandwidths matched to the perplexity.
std::vector<double> joint_probabilities(const Matrix& x, double perplexity) {
  const std::size_t n = x.rows();
  const auto d = squared_distances(x);
  const double target_entropy = std::log(perplexity);
  std::vector<double> conditional(n * n, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 200; ++step) {
      // Shift by the nearest distance so exp() cannot underflow to all zeros.
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) nearest = std::min(nearest, d[i * n + j]);
      }
      ExactSum sum_acc;
      ExactSum weighted_acc;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * (d[i * n + j] - nearest));
        sum_acc.add(row[j]);
        weighted_acc.add(row[j] * (d[i * n + j] - nearest));
      }
      const double sum = sum_acc.value();
      const double weighted = weighted_acc.value();
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      const double diff = entropy - target_entropy;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    std::copy(row.begin(), row.end(), conditional.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      p[i * n + j] = std::max((conditional[i * n + j] + conditional[j * n + i]) /
                                  (2.0 * static_cast<double>(n)),
                              kMinProbability);
    }
  }
  return p;
}

// Student-t kernel values 1 / (1 + |yi - yj|^2) and their off-diagonal sum.
double kernel(const std::vector<Point3>& y, std::vector<double>& num) {
  const std::size_t n = y.size();
  ExactSum total;
  for (std::size_t i = 0; i < n; ++i) {
    num[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < kDims; ++k) s += (y[i][k] - y[j][k]) * (y[i][k] - y[j][k]);
      num[i * n + j] = num[j * n + i] = 1.0 / (1.0 + s);
      total.add(2.0 * num[i * n + j]);
    }
  }
  return total.value();
}

double kl_divergence(const std::vector<double>& p, const std::vector<Point3>& y,
                     std::vector<double>& num) {
  const std::size_t n = y.size();
  const double total = kernel(y, num);
  ExactSum kl;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = std::max(num[i * n + j] / total, std::numeric_limits<double>::min());
      kl.add(p[i * n + j] * std::log(p[i * n + j] / q));
    }
  }
  return kl.value();
}

void gradient(const std::vector<double>& p, double exaggeration, const std::vector<Point3>& y,
              std::vector<double>& num, std::vector<Point3>& grad) {
  const std::size_t n = y.size();
  const double total = kernel(y, num);
  std::array<ExactSum, kDims> acc;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& a : acc) a.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double coeff =
          4.0 * (exaggeration * p[i * n + j] - num[i * n + j] / total) * num[i * n + j];
      for (int k = 0; k < kDims; ++k) acc[k].add(coeff * (y[i][k] - y[j][k]));
    }
    for (int k = 0; k < kDims; ++k) grad[i][k] = acc[k].value();
  }
}

void center(std::vector<Point3>& y) {
  std::array<ExactSum, kDims> acc;
  for (const auto& p : y) {
    for (int k = 0; k < kDims; ++k) acc[k].add(p[k]);
  }
  Point3 mean{};
  for (int k = 0; k < kDims; ++k) mean[k] = acc[k].value() / static_cast<double>(y.size());
  for (auto& p : y) {
    for (int k = 0; k < kDims; ++k) p[k] -= mean[k];
  }
}

std::vector<Point3> random_layout(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; };
  std::vector<Point3> y(n);
  for (auto& p : y) {
    for (int k = 0; k < kDims; ++k) {
      const double g = std::sqrt(-2.0 * std::log(uniform())) *
                       std::cos(2.0 * std::numbers::pi * uniform());
      p[k] = 1e-4 * g;
    }
  }
  return y;
}

}  // namespace

bool tsne_feasible(std::size_t n, double perplexity) {
  return n >= 4 && perplexity > 0.0 && perplexity < (static_cast<double>(n) - 1.0) / 3.0;
}

TsneResult project_tsne(const Matrix& embeddings, const TsneOptions& options,
                        std::stop_token stop) {
  const std::size_t n = embeddings.rows();
  if (n < 4) throw Error(ErrorCode::TooFewPoints, "t-SNE needs at least 4 points, got " + std::to_string(n));
  if (!tsne_feasible(n, options.perplexity)) {
    throw Error(ErrorCode::BadPerplexity, "perplexity " + std::to_string(options.perplexity) +
                                              " must be positive and below (n - 1) / 3 for n = " +
                                              std::to_string(n));
  }
  for (double v : embeddings.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "embeddings contain non-finite values");
  }
  if (options.initial && options.initial->size() != n) {
    throw Error(ErrorCode::LengthMismatch, "initial layout must have one point per row");
  }

  const auto p = joint_probabilities(embeddings, options.perplexity);
  std::vector<Point3> y = options.initial ? *options.initial : random_layout(n, options.seed);
  std::vector<Point3> velocity(n, Point3{0.0, 0.0, 0.0});
  std::vector<Point3> gains(n, Point3{1.0, 1.0, 1.0});
  std::vector<Point3> grad(n);
  std::vector<double> num(n * n);

  TsneResult result;
  double current_kl = std::numeric_limits<double>::infinity();
  double step_scale = 1.0;

  for (int iter = 0; iter < options.iterations; ++iter) {
    if (stop.stop_requested()) throw Error(ErrorCode::Cancelled, "t-SNE projection cancelled");
    const bool exaggerating = iter < options.exaggeration_iterations;
    const double momentum = iter < kMomentumSwitchIteration ? kStartMomentum : kFinalMomentum;
    gradient(p, exaggerating ? options.early_exaggeration : 1.0, y, num, grad);

    auto take_step = [&](double scale, std::vector<Point3>& next_velocity,
                         std::vector<Point3>& next_gains) {
      std::vector<Point3> next = y;
      for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < kDims; ++k) {
          const bool same_sign = (grad[i][k] > 0.0) == (next_velocity[i][k] > 0.0);
          next_gains[i][k] = same_sign ? next_gains[i][k] * 0.8 : next_gains[i][k] + 0.2;
          next_gains[i][k] = std::max(next_gains[i][k], kMinGain);
          next_velocity[i][k] = momentum * next_velocity[i][k] -
                                scale * options.learning_rate * next_gains[i][k] * grad[i][k];
          next[i][k] += next_velocity[i][k];
        }
      }
      center(next);
      return next;
    };

    if (exaggerating) {
      y = take_step(1.0, velocity, gains);
      continue;
    }
    if (std::isinf(current_kl)) current_kl = kl_divergence(p, y, num);

    bool accepted = false;
    for (int attempt = 0; attempt <= kMaxStepHalvings && !accepted; ++attempt) {
      auto next_velocity = velocity;
      auto next_gains = gains;
      auto next = take_step(step_scale, next_velocity, next_gains);
      const double next_kl = kl_divergence(p, next, num);
      if (next_kl <= current_kl) {
        y = std::move(next);
        velocity = std::move(next_velocity);
        gains = std::move(next_gains);
        current_kl = next_kl;
        step_scale = std::min(1.0, step_scale * 1.1);
        accepted = true;
      } else {
        // Fall back towards plain gradient descent with a shorter step.
        for (auto& v : velocity) v = {0.0, 0.0, 0.0};
        for (auto& g : gains) g = {1.0, 1.0, 1.0};
        step_scale *= 0.5;
      }
    }
    result.kl_trace.push_back(current_kl);
  }
  result.points = std::move(y);
  return result;
}

std::vector<Point3> project_pca(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  std::vector<Point3> out(n, Point3{0.0, 0.0, 0.0});
  if (n <= 1 || d == 0) return out;

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = embeddings(i, j);
  }
  x.rowwise() -= x.colwise().mean();

  // Eigendecomposition of the covariance X^T X through the SVD of X.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& singular = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();
  const double tolerance = 1e-10 * std::max(1.0, singular.size() > 0 ? singular(0) : 0.0);
  const auto components = std::min<Eigen::Index>(kDims, singular.size());
  for (Eigen::Index c = 0; c < components; ++c) {
    if (singular(c) <= tolerance) break;
    Eigen::VectorXd axis = v.col(c);
    Eigen::Index largest = 0;
    for (Eigen::Index k = 1; k < axis.size(); ++k) {
      if (std::abs(axis(k)) > std::abs(axis(largest))) largest = k;
    }
    if (axis(largest) < 0) axis = -axis;
    const Eigen::VectorXd coords = x * axis;
    for (std::size_t i = 0; i < n; ++i) out[i][static_cast<std::size_t>(c)] = coords(static_cast<Eigen::Index>(i));
  }
  return out;
}

Method parse_method(const std::string& name) {
  if (name == "tsne") return Method::Tsne;
  if (name == "pca") return Method::Pca;
  throw Error(ErrorCode::InvalidArgument, "unknown projection method '" + name + "'");
}

std::string to_string(Method method) { return method == Method::Tsne ? "tsne" : "pca"; }

Projection project(const Matrix& embeddings, Method requested, const TsneOptions& options,
                   std::stop_token stop) {
  if (requested == Method::Tsne && tsne_feasible(embeddings.rows(), options.perplexity)) {
    return {Method::Tsne, project_tsne(embeddings, options, stop).points};
  }
  return {Method::Pca, project_pca(embeddings)};
}

}  // namespace misem::projection
