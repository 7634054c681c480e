#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "misem/matrix.hpp"

namespace misem::projection {

using Point3 = std::array<double, 3>;

struct TsneOptions {
  std::uint64_t seed = 42;
  double perplexity = 5.0;
  int iterations = 500;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 100;
  double learning_rate = 100.0;
  /// Optional starting layout (one point per row). Seeded Gaussian noise otherwise.
  std::optional<std::vector<Point3>> initial;
};

struct TsneResult {
  std::vector<Point3> points;
  /// KL divergence after each post-exaggeration iteration.
  std::vector<double> kl_trace;
};

/// Exact O(n^2) t-SNE into three dimensions. Deterministic for a fixed seed.
/// After the exaggeration phase a step is only accepted when it does not increase the
/// KL divergence; rejected steps drop momentum and halve the step size.
TsneResult project_tsne(const Matrix& embeddings, const TsneOptions& options = {},
                        std::stop_token stop = {});

/// Top-3 principal components. Component signs are fixed so that the largest-magnitude
/// loading is positive; missing components (rank < 3) are zero.
std::vector<Point3> project_pca(const Matrix& embeddings);

/// True when t-SNE can run: at least 4 points and perplexity < (n - 1) / 3.
bool tsne_feasible(std::size_t n, double perplexity);

enum class Method { Tsne, Pca };
Method parse_method(const std::string& name);
std::string to_string(Method method);

struct Projection {
  Method method_used = Method::Pca;
  std::vector<Point3> points;
};

/// t-SNE when feasible, PCA otherwise.
Projection project(const Matrix& embeddings, Method requested, const TsneOptions& options = {},
                   std::stop_token stop = {});

}  // namespace misem::projection
