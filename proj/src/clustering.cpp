#include "misem/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <tuple>

#include "misem/error.hpp"

namespace misem::cluster {

void ClusterParams::validate() const {
  if (!(distance_threshold > 0.0 && distance_threshold < 2.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "cosine distance_threshold must lie in (0, 2), got " + std::to_string(distance_threshold));
  }
}

std::string to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::Complete: return "complete";
    case Linkage::Single: return "single";
    case Linkage::Average: return "average";
  }
  return "complete";
}

Linkage parse_linkage(const std::string& name) {
  if (name == "complete") return Linkage::Complete;
  if (name == "single") return Linkage::Single;
  if (name == "average") return Linkage::Average;
  throw Error(ErrorCode::InvalidArgument, "unknown linkage '" + name + "'");
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine distance of a zero vector");
  return std::clamp(1.0 - dot(a, b) / (na * nb), 0.0, 2.0);
}

namespace {

struct Candidate {
  double distance;
  std::size_t lo;  // representative (smallest member) of one cluster
  std::size_t hi;  // representative of the other, lo < hi
  std::size_t lo_version;
  std::size_t hi_version;

  // Min-heap order: smallest distance first, then smallest (lo, hi).
  bool operator>(const Candidate& o) const {
    return std::tie(distance, lo, hi) > std::tie(o.distance, o.lo, o.hi);
  }
};

}  // namespace

std::vector<std::size_t> agglomerative_cluster(const Matrix& embeddings,
                                               const ClusterParams& params) {
  params.validate();
  const std::size_t n = embeddings.rows();
  if (n == 0) throw Error(ErrorCode::EmptyReference, "cannot cluster zero sentences");
  for (double v : embeddings.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "embeddings contain non-finite values");
  }

  // Clusters are keyed by their smallest member index; merged clusters keep the smaller key.
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist(i, j) = dist(j, i) = cosine_distance(embeddings.row(i), embeddings.row(j));
    }
  }
  std::vector<bool> active(n, true);
  std::vector<std::size_t> version(n, 0);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;

  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dist(i, j) <= params.distance_threshold) heap.push({dist(i, j), i, j, 0, 0});
    }
  }

  while (!heap.empty()) {
    const Candidate c = heap.top();
    heap.pop();
    if (!active[c.lo] || !active[c.hi] || version[c.lo] != c.lo_version ||
        version[c.hi] != c.hi_version) {
      continue;
    }
    const std::size_t keep = c.lo;
    const std::size_t gone = c.hi;
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == keep || k == gone) continue;
      double d = 0.0;
      switch (params.linkage) {
        case Linkage::Complete: d = std::max(dist(keep, k), dist(gone, k)); break;
        case Linkage::Single: d = std::min(dist(keep, k), dist(gone, k)); break;
        case Linkage::Average:
          d = (static_cast<double>(size[keep]) * dist(keep, k) +
               static_cast<double>(size[gone]) * dist(gone, k)) /
              static_cast<double>(size[keep] + size[gone]);
          break;
      }
      dist(keep, k) = dist(k, keep) = d;
    }
    active[gone] = false;
    parent[gone] = keep;
    size[keep] += size[gone];
    ++version[keep];
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == keep || dist(keep, k) > params.distance_threshold) continue;
      const auto lo = std::min(keep, k);
      const auto hi = std::max(keep, k);
      heap.push({dist(keep, k), lo, hi, version[lo], version[hi]});
    }
  }

  // Resolve each point to its root representative, then number roots in index order.
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  std::vector<std::size_t> topic_of_root(n, n);
  std::vector<std::size_t> assignments(n);
  std::size_t next_topic = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = root(i);
    if (topic_of_root[r] == n) topic_of_root[r] = next_topic++;
    assignments[i] = topic_of_root[r];
  }
  return assignments;
}

TopicModel build_topic_model(const Matrix& embeddings, const ClusterParams& params) {
  TopicModel model;
  model.params = params;
  model.assignments = agglomerative_cluster(embeddings, params);
  const std::size_t k = *std::max_element(model.assignments.begin(), model.assignments.end()) + 1;
  const std::size_t n = embeddings.rows();
  const std::size_t dim = embeddings.cols();
  model.topics.resize(k);
  for (std::size_t t = 0; t < k; ++t) {
    model.topics[t].topic_id = t;
    model.topics[t].centroid.assign(dim, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& topic = model.topics[model.assignments[i]];
    topic.member_indices.push_back(i);
    auto row = embeddings.row(i);
    for (std::size_t d = 0; d < dim; ++d) topic.centroid[d] += row[d];
  }
  for (auto& topic : model.topics) {
    const auto size = static_cast<double>(topic.member_indices.size());
    for (double& x : topic.centroid) x /= size;
    topic.weight = size / static_cast<double>(n);
  }
  return model;
}

TopicModel build_topic_model(const embed::EmbeddedReference& reference,
                             const ClusterParams& params) {
  if (reference.embeddings.rows() == 0) {
    throw Error(ErrorCode::EmptyReference, "reference has no sentences");
  }
  return build_topic_model(reference.embeddings, params);
}

}  // namespace misem::cluster
