#pragma once

#include "ipd/attributes.hpp"
#include "ipd/forest.hpp"
#include "ipd/groundtruth.hpp"
#include "ipd/mesh.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ipd {

struct LabelingPolicy {
    std::vector<double> sigmas;
    int n_lo = 0;  // consensus range, inclusive
    int n_hi = 0;
};

// Positive = vertex that is a representative in any (sigma, n) cell of the
// policy grid. Throws if a grid cell has no GroundTruth, listing every gap.
std::vector<int> build_labels(int vertex_count, const std::vector<GroundTruth>& cells,
                              const LabelingPolicy& policy);

// psi: mean over all ground-truth vertices (pooled across models) of the
// geodesic distance to the nearest other ground-truth vertex on the same
// model. Models with fewer than two vertices are skipped with a warning;
// throws if nothing contributes.
double compute_psi(const std::vector<const TriMesh*>& meshes,
                   const std::vector<std::vector<int>>& gt_vertices,
                   std::vector<std::string>* warnings = nullptr);

struct Detection {
    int vertex = -1;
    double probability = 0.0;
    bool tie = false;  // retained only by the lower-index tie rule
};

struct DetectionResult {
    std::string model;
    std::vector<Detection> detections;  // descending probability, then vertex
    double c = 0.0;
    double psi = 0.0;
    double radius = 0.0;  // c * psi, mesh units
    std::uint64_t seed = 0;
    std::uint64_t forest_hash = 0;
    std::uint64_t config_hash = 0;
};

struct NmsCandidate {
    int vertex;
    double probability;
};

// Keeps candidates (probability > 0.5) whose probability strictly beats every
// other candidate within the Euclidean radius; equal-probability neighbors are
// resolved toward the lower vertex index and flagged. Suppression is judged
// against all candidates, not only retained ones.
DetectionResult nms(const std::vector<NmsCandidate>& candidates, const TriMesh& mesh,
                    double radius);

struct ModelData {
    std::string id;
    const TriMesh* mesh = nullptr;
    const AttributeMatrix* attributes = nullptr;
    std::vector<int> labels;  // 1 = interest, aligned with mesh vertices
};

struct PipelineOptions {
    TrainOptions train;
    double c = 5.0;
    std::uint64_t config_hash = 0;
};

struct PipelineResult {
    std::vector<DetectionResult> detections;  // aligned with test_models
    RandomForestModel forest;
    double psi = 0.0;
    std::vector<std::string> warnings;
};

// Train on the training models' vertices, score every test vertex, suppress
// with radius c * psi where psi comes from the training models only. Training
// labels that are all negative yield empty detections (nothing to learn).
PipelineResult run_pipeline(const std::vector<ModelData>& train_models,
                            const std::vector<ModelData>& test_models,
                            const PipelineOptions& opts);

void write_detections(const DetectionResult& result, std::ostream& out);
DetectionResult read_detections(std::istream& in);
void write_detections_file(const DetectionResult& result, const std::string& path);
DetectionResult read_detections_file(const std::string& path);

} // namespace ipd
