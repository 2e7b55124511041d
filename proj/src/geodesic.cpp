#include "ipd/geodesic.hpp"

#include <limits>
#include <queue>
#include <utility>

namespace ipd {

std::vector<double> geodesic_distances(const TriMesh& mesh,
                                       const std::vector<int>& sources) {
    const int n = mesh.vertex_count();
    if (sources.empty()) throw MeshError("geodesic_distances: no source vertices");
    for (int s : sources)
        if (s < 0 || s >= n)
            throw MeshError("geodesic_distances: source " + std::to_string(s) +
                            " out of range [0, " + std::to_string(n) + ")");

    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
    for (int s : sources) {
        if (dist[s] > 0.0) {
            dist[s] = 0.0;
            queue.push({0.0, s});
        }
    }
    while (!queue.empty()) {
        auto [d, v] = queue.top();
        queue.pop();
        if (d > dist[v]) continue;
        Eigen::RowVector3d p = mesh.vertices.row(v);
        for (int u : mesh.ring[v]) {
            double cand = d + (mesh.vertices.row(u) - p).norm();
            if (cand < dist[u]) {
                dist[u] = cand;
                queue.push({cand, u});
            }
        }
    }
    return dist;
}

Eigen::MatrixXd geodesic_pairwise(const TriMesh& mesh, const std::vector<int>& subset) {
    const int m = int(subset.size());
    Eigen::MatrixXd out(m, m);
    for (int i = 0; i < m; ++i) {
        std::vector<double> d = geodesic_distances(mesh, subset[i]);
        for (int j = 0; j < m; ++j) out(i, j) = d[subset[j]];
    }
    return out;
}

} // namespace ipd
