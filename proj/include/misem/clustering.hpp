#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "misem/embedding.hpp"
#include "misem/matrix.hpp"

namespace misem::cluster {

enum class Affinity { Cosine };
enum class Linkage { Complete, Single, Average };

struct ClusterParams {
  Affinity affinity = Affinity::Cosine;
  Linkage linkage = Linkage::Complete;
  double distance_threshold = 0.38;

  /// Throws InvalidArgument unless 0 < distance_threshold < 2.
  void validate() const;
};

std::string to_string(Linkage linkage);
Linkage parse_linkage(const std::string& name);

struct Topic {
  std::size_t topic_id = 0;
  std::vector<std::size_t> member_indices;  // sorted
  std::vector<double> centroid;             // mean of member embeddings, not re-normalized
  double weight = 0.0;                      // |t| / |R|
};

struct TopicModel {
  std::vector<std::size_t> assignments;  // sentence -> topic id
  std::vector<Topic> topics;
  ClusterParams params;

  std::size_t topic_count() const { return topics.size(); }
};

/// 1 - cos(a, b), clamped to [0, 2].
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Bottom-up agglomerative clustering under cosine distance. Two clusters merge only
/// while their linkage distance is <= params.distance_threshold. Equal-distance pairs are
/// resolved by the smallest (lower, higher) pair of cluster representatives, where a
/// cluster's representative is its smallest member index. Topic ids are assigned in
/// order of each cluster's smallest member.
std::vector<std::size_t> agglomerative_cluster(const Matrix& embeddings,
                                               const ClusterParams& params);

TopicModel build_topic_model(const embed::EmbeddedReference& reference,
                             const ClusterParams& params);
TopicModel build_topic_model(const Matrix& embeddings, const ClusterParams& params);

}  // namespace misem::cluster
