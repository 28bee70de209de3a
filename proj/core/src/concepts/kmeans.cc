#include "ierf/concepts/kmeans.h"

#include <algorithm>
#include <limits>
#include <numeric>

#include "ierf/error.h"
#include "ierf/util/random.h"

namespace ierf {
namespace {

constexpr int kMaxLloydIterations = 100;
constexpr int kSplitRestarts = 3;

struct Cluster {
  std::vector<std::size_t> members;
  Eigen::VectorXd centroid;
  double sse = 0.0;
};

Cluster make_cluster(const Eigen::MatrixXd& x, std::vector<std::size_t> members) {
  Cluster c;
  c.centroid = Eigen::VectorXd::Zero(x.cols());
  for (std::size_t i : members) c.centroid += x.row(static_cast<Eigen::Index>(i)).transpose();
  c.centroid /= static_cast<double>(members.size());
  for (std::size_t i : members) {
    c.sse += (x.row(static_cast<Eigen::Index>(i)).transpose() - c.centroid).squaredNorm();
  }
  c.members = std::move(members);
  return c;
}

std::pair<Cluster, Cluster> two_means(const Eigen::MatrixXd& x, const Cluster& parent,
                                      Rng& rng) {
  const auto& m = parent.members;
  auto row = [&](std::size_t i) { return x.row(static_cast<Eigen::Index>(i)).transpose(); };
  std::pair<Cluster, Cluster> best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < kSplitRestarts; ++restart) {
    // k-means++ seeding for two centres.
    Eigen::VectorXd c0 = row(m[rng.below(m.size())]);
    std::vector<double> d2(m.size());
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) total += (d2[i] = (row(m[i]) - c0).squaredNorm());
    double pick = rng.uniform() * total;
    std::size_t second = m.size() - 1;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (pick < d2[i]) {
        second = i;
        break;
      }
      pick -= d2[i];
    }
    Eigen::VectorXd c1 = row(m[second]);

    std::vector<int> side(m.size(), -1);
    for (int it = 0; it < kMaxLloydIterations; ++it) {
      bool changed = false;
      for (std::size_t i = 0; i < m.size(); ++i) {
        const int s = (row(m[i]) - c1).squaredNorm() < (row(m[i]) - c0).squaredNorm() ? 1 : 0;
        if (s != side[i]) {
          side[i] = s;
          changed = true;
        }
      }
      std::size_t n1 = std::count(side.begin(), side.end(), 1);
      if (n1 == 0 || n1 == m.size()) {
        // Move the point farthest from the shared centre to the empty side.
        const Eigen::VectorXd& c = n1 == 0 ? c0 : c1;
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
          const double d = (row(m[i]) - c).squaredNorm();
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        side[far] = n1 == 0 ? 1 : 0;
        changed = true;
      }
      Eigen::VectorXd s0 = Eigen::VectorXd::Zero(x.cols()), s1 = s0;
      double k0 = 0, k1 = 0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (side[i] == 1) {
          s1 += row(m[i]);
          ++k1;
        } else {
          s0 += row(m[i]);
          ++k0;
        }
      }
      c0 = s0 / k0;
      c1 = s1 / k1;
      if (!changed) break;
    }
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < m.size(); ++i) (side[i] == 1 ? b : a).push_back(m[i]);
    Cluster ca = make_cluster(x, std::move(a)), cb = make_cluster(x, std::move(b));
    if (ca.sse + cb.sse < best_sse) {
      best_sse = ca.sse + cb.sse;
      best = {std::move(ca), std::move(cb)};
    }
  }
  return best;
}

}  // namespace

double KMeansResult::total_sse() const {
  return std::accumulate(cluster_sse.begin(), cluster_sse.end(), 0.0);
}

KMeansResult bisecting_kmeans(const Eigen::MatrixXd& samples, std::size_t k,
                              std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(samples.rows());
  if (k == 0) throw ConfigError("bisecting k-means: K must be positive");
  if (n < k) {
    throw ValidationError("bisecting k-means: " + std::to_string(n) +
                          " samples cannot form " + std::to_string(k) + " clusters");
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<Cluster> clusters{make_cluster(samples, std::move(all))};

  for (std::size_t split = 0; clusters.size() < k; ++split) {
    std::size_t target = clusters.size();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].members.size() < 2) continue;
      if (target == clusters.size() || clusters[c].sse > clusters[target].sse) target = c;
    }
    Cluster& parent = clusters[target];
    std::pair<Cluster, Cluster> children;
    if (parent.sse <= 0.0) {
      std::vector<std::size_t> rest = parent.members;
      const std::size_t last = rest.back();
      rest.pop_back();
      children = {make_cluster(samples, std::move(rest)), make_cluster(samples, {last})};
    } else {
      Rng rng(derive_seed(seed, {split}));
      children = two_means(samples, parent, rng);
    }
    clusters[target] = std::move(children.first);
    clusters.push_back(std::move(children.second));
  }

  KMeansResult r;
  r.centroids.resize(samples.cols(), static_cast<Eigen::Index>(k));
  r.assignment.assign(n, 0);
  for (std::size_t c = 0; c < k; ++c) {
    r.centroids.col(static_cast<Eigen::Index>(c)) = clusters[c].centroid;
    r.cluster_sse.push_back(clusters[c].sse);
    for (std::size_t i : clusters[c].members) r.assignment[i] = c;
  }
  return r;
}

}  // namespace ierf
