#pragma once

#include "ipd/mesh.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ipd {

struct Correspondence {
    std::vector<std::pair<int, int>> pairs;  // (ground-truth vertex, detection vertex)
    std::vector<int> unmatched_gt;
    std::vector<int> unmatched_det;
    double epsilon = 0.0;
};

// One-to-one matching: each detection is eligible only for its nearest
// ground-truth vertex (ties to the lower gt index) when that lies within
// epsilon; candidates are accepted in ascending (distance, detection index)
// order. distances(i, j) = geodesic from gt[i] to detections[j].
Correspondence match(const std::vector<int>& detections, const std::vector<int>& gt,
                     const Eigen::MatrixXd& distances, double epsilon);

// Convenience overload running one Dijkstra per ground-truth vertex.
Correspondence match(const std::vector<int>& detections, const std::vector<int>& gt,
                     const TriMesh& mesh, double epsilon);

// Geodesic distances from each gt vertex (rows) to each detection (columns).
Eigen::MatrixXd detection_distances(const std::vector<int>& detections,
                                    const std::vector<int>& gt, const TriMesh& mesh);

struct MatchErrors {
    double fne = 0.0;  // (N_G - N_C) / N_G, 0 when N_G = 0
    double fpe = 0.0;  // (N_A - N_C) / N_A, 0 when N_A = 0
    long n_a = 0;
    long n_c = 0;
    long n_g = 0;
};

MatchErrors errors_from_match(const Correspondence& corr);

struct IouCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

// Pooled TP / (FP + TP + FN); 0 when the denominator is 0.
double iou_setwise(const std::vector<IouCounts>& per_model);

// r in {0, 0.01, ..., 0.12}
std::vector<double> default_r_grid();

double trapezoid_auc(const std::vector<double>& r, const std::vector<double>& y);

struct EvalCurve {
    double sigma = 0.0;
    int consensus = 0;
    std::vector<double> r;
    std::vector<double> iou, fne, fpe;  // pooled over the model set, per r
    std::vector<long> n_c;              // matched count per r, pooled
    long n_a = 0;                       // pooled detections
    long n_g = 0;                       // pooled ground truth
    double auc_iou = 0.0, auc_fne = 0.0, auc_fpe = 0.0;
    std::uint64_t config_hash = 0;  // provenance stamps carried into the file
    std::uint64_t seed = 0;
};

struct ModelEvalInput {
    const TriMesh* mesh = nullptr;
    std::vector<int> detections;  // vertex ids
    std::vector<int> gt;          // vertex ids
};

// Sweeps epsilon = r * d_M per model over the grid, pooling counts setwise.
EvalCurve sweep_model_set(const std::vector<ModelEvalInput>& models, double sigma,
                          int consensus, const std::vector<double>& r_grid);

struct CrossvalCurve {
    EvalCurve mean;  // pointwise mean curves; AUC recomputed on the mean
    double fold_auc_iou = 0.0;  // mean of per-fold AUCs, kept for reference
    double fold_auc_fne = 0.0;
    double fold_auc_fpe = 0.0;
};

CrossvalCurve crossval_aggregate(const std::vector<EvalCurve>& folds);

void write_curve_csv(const EvalCurve& curve, std::ostream& out);
EvalCurve read_curve_csv(std::istream& in);
void write_curve_csv_file(const EvalCurve& curve, const std::string& path);
EvalCurve read_curve_csv_file(const std::string& path);

// Summary document over several (sigma, n) curves.
void write_eval_summary(const std::vector<EvalCurve>& curves, std::ostream& out);

// Self-contained SVG line chart of the curves (one panel per metric).
std::string curves_svg(const std::vector<EvalCurve>& curves);

} // namespace ipd
