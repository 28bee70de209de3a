#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace ierf {

struct KMeansResult {
  Eigen::MatrixXd centroids;            // d x K
  std::vector<std::size_t> assignment;  // per sample
  std::vector<double> cluster_sse;      // per cluster
  double total_sse() const;
};

// Bisecting k-means over the rows of `samples` (n x d). Repeatedly splits
// the cluster with the largest within-cluster SSE using 2-means (k-means++
// seeding, Lloyd iterations). A cluster of identical points is split by
// peeling off a singleton. Split s draws from its own stream derived from
// `seed`, so a run with larger K extends a run with smaller K.
KMeansResult bisecting_kmeans(const Eigen::MatrixXd& samples, std::size_t k,
                              std::uint64_t seed);

}  // namespace ierf
