#pragma once

// Straight-line reference implementation of the scoring method, written with plain nested
// vectors and naive loops. Shares no code with the library; tests compare against it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;
using Partition = std::vector<std::vector<std::size_t>>;

enum class Link { Complete, Single, Average };

inline double cosine(const Vec& a, const Vec& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

inline double cluster_distance(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                               const Mat& pairwise, Link link) {
  double best_max = -1.0;
  double best_min = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (auto i : a) {
    for (auto j : b) {
      best_max = std::max(best_max, pairwise[i][j]);
      best_min = std::min(best_min, pairwise[i][j]);
      total += pairwise[i][j];
    }
  }
  switch (link) {
    case Link::Complete: return best_max;
    case Link::Single: return best_min;
    case Link::Average: return total / static_cast<double>(a.size() * b.size());
  }
  return best_max;
}

/// O(n^3) agglomerative clustering: recompute every cluster-pair linkage each round, merge
/// the closest pair (ties -> smallest pair of minimum member indices) while it is within
/// the threshold. Result is canonical: members sorted, clusters ordered by first member.
inline Partition naive_cluster(const Mat& x, double threshold, Link link = Link::Complete) {
  const std::size_t n = x.size();
  Mat pairwise(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) pairwise[i][j] = std::min(2.0, std::max(0.0, 1.0 - cosine(x[i], x[j])));
    }
  }
  Partition clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0, best_b = 0;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        const double d = cluster_distance(clusters[a], clusters[b], pairwise, link);
        if (d < best) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best > threshold) break;
    clusters[best_a].insert(clusters[best_a].end(), clusters[best_b].begin(), clusters[best_b].end());
    std::sort(clusters[best_a].begin(), clusters[best_a].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
    std::sort(clusters.begin(), clusters.end());
  }
  return clusters;
}

inline Partition canonical(const std::vector<std::size_t>& assignments) {
  std::size_t k = 0;
  for (auto a : assignments) k = std::max(k, a + 1);
  Partition p(k);
  for (std::size_t i = 0; i < assignments.size(); ++i) p[assignments[i]].push_back(i);
  p.erase(std::remove_if(p.begin(), p.end(), [](const auto& c) { return c.empty(); }), p.end());
  std::sort(p.begin(), p.end());
  return p;
}

struct Result {
  double m = 0.0;
  Vec weights;
  Vec topic_sums;
  Vec topic_scores;
  Partition topics;
};

/// Literal transcription of the score: cluster, weights |t|/|R|, centroid means, cosine
/// matrix, per-token softmax, row sums, softmax, dot product.
inline Result naive_misem(const Mat& reference, const Mat& tokens, double threshold,
                          Link link = Link::Complete) {
  Result out;
  out.topics = naive_cluster(reference, threshold, link);
  const std::size_t k = out.topics.size();
  const std::size_t n = tokens.size();
  const std::size_t dim = reference[0].size();

  Mat centroids(k, Vec(dim, 0.0));
  for (std::size_t t = 0; t < k; ++t) {
    out.weights.push_back(static_cast<double>(out.topics[t].size()) / static_cast<double>(reference.size()));
    for (auto i : out.topics[t]) {
      for (std::size_t d = 0; d < dim; ++d) centroids[t][d] += reference[i][d];
    }
    for (std::size_t d = 0; d < dim; ++d) centroids[t][d] /= static_cast<double>(out.topics[t].size());
  }

  Mat c(k, Vec(n));
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t i = 0; i < n; ++i) c[t][i] = cosine(centroids[t], tokens[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t t = 0; t < k; ++t) z += std::exp(c[t][i]);
    for (std::size_t t = 0; t < k; ++t) c[t][i] = std::exp(c[t][i]) / z;
  }
  out.topic_sums.assign(k, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t i = 0; i < n; ++i) out.topic_sums[t] += c[t][i];
  }
  double z = 0.0;
  for (double s : out.topic_sums) z += std::exp(s);
  for (double s : out.topic_sums) out.topic_scores.push_back(std::exp(s) / z);
  for (std::size_t t = 0; t < k; ++t) out.m += out.weights[t] * out.topic_scores[t];
  return out;
}

}  // namespace oracle
