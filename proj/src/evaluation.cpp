#include "ipd/evaluation.hpp"

#include "ipd/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ipd {

Eigen::MatrixXd detection_distances(const std::vector<int>& detections,
                                    const std::vector<int>& gt, const TriMesh& mesh) {
    Eigen::MatrixXd out(gt.size(), detections.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        std::vector<double> d = geodesic_distances(mesh, gt[i]);
        for (std::size_t j = 0; j < detections.size(); ++j)
            out(long(i), long(j)) = d[std::size_t(detections[j])];
    }
    return out;
}

Correspondence match(const std::vector<int>& detections, const std::vector<int>& gt,
                     const Eigen::MatrixXd& distances, double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("match tolerance must be >= 0");
    if (distances.rows() != long(gt.size()) || distances.cols() != long(detections.size()))
        throw std::invalid_argument("match distance matrix has the wrong shape");

    Correspondence corr;
    corr.epsilon = epsilon;

    struct Candidate {
        double dist;
        int det;  // index into detections
        int gt;   // index into gt
    };
    std::vector<Candidate> candidates;
    for (std::size_t j = 0; j < detections.size(); ++j) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < gt.size(); ++i) {
            double d = distances(long(i), long(j));
            if (d < best_d) {
                best_d = d;
                best = int(i);
            }
        }
        if (best >= 0 && best_d <= epsilon) candidates.push_back({best_d, int(j), best});
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                  if (a.dist != b.dist) return a.dist < b.dist;
                  return a.det < b.det;
              });

    std::vector<char> gt_used(gt.size(), 0), det_used(detections.size(), 0);
    for (const Candidate& c : candidates) {
        if (gt_used[std::size_t(c.gt)] || det_used[std::size_t(c.det)]) continue;
        gt_used[std::size_t(c.gt)] = 1;
        det_used[std::size_t(c.det)] = 1;
        corr.pairs.push_back({gt[std::size_t(c.gt)], detections[std::size_t(c.det)]});
    }
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (!gt_used[i]) corr.unmatched_gt.push_back(gt[i]);
    for (std::size_t j = 0; j < detections.size(); ++j)
        if (!det_used[j]) corr.unmatched_det.push_back(detections[j]);
    return corr;
}

Correspondence match(const std::vector<int>& detections, const std::vector<int>& gt,
                     const TriMesh& mesh, double epsilon) {
    return match(detections, gt, detection_distances(detections, gt, mesh), epsilon);
}

MatchErrors errors_from_match(const Correspondence& corr) {
    MatchErrors e;
    e.n_c = long(corr.pairs.size());
    e.n_a = e.n_c + long(corr.unmatched_det.size());
    e.n_g = e.n_c + long(corr.unmatched_gt.size());
    e.fne = e.n_g > 0 ? double(e.n_g - e.n_c) / double(e.n_g) : 0.0;
    e.fpe = e.n_a > 0 ? double(e.n_a - e.n_c) / double(e.n_a) : 0.0;
    return e;
}

double iou_setwise(const std::vector<IouCounts>& per_model) {
    long tp = 0, fp = 0, fn = 0;
    for (const IouCounts& c : per_model) {
        if (c.tp < 0 || c.fp < 0 || c.fn < 0)
            throw std::invalid_argument("iou counts must be nonnegative");
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
    }
    const long denom = fp + tp + fn;
    return denom > 0 ? double(tp) / double(denom) : 0.0;
}

std::vector<double> default_r_grid() {
    std::vector<double> r;
    for (int i = 0; i <= 12; ++i) r.push_back(i * 0.01);
    return r;
}

double trapezoid_auc(const std::vector<double>& r, const std::vector<double>& y) {
    if (r.size() != y.size()) throw std::invalid_argument("auc: grid size mismatch");
    double auc = 0.0;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        if (r[i + 1] < r[i]) throw std::invalid_argument("auc: grid must ascend");
        auc += (r[i + 1] - r[i]) * 0.5 * (y[i] + y[i + 1]);
    }
    return auc;
}

EvalCurve sweep_model_set(const std::vector<ModelEvalInput>& models, double sigma,
                          int consensus, const std::vector<double>& r_grid) {
    EvalCurve curve;
    curve.sigma = sigma;
    curve.consensus = consensus;
    curve.r = r_grid;
    const std::size_t nr = r_grid.size();
    curve.n_c.assign(nr, 0);
    curve.iou.assign(nr, 0.0);
    curve.fne.assign(nr, 0.0);
    curve.fpe.assign(nr, 0.0);

    std::vector<Eigen::MatrixXd> dists;
    for (const ModelEvalInput& m : models) {
        if (!m.mesh) throw std::invalid_argument("eval input lacks a mesh");
        dists.push_back(detection_distances(m.detections, m.gt, *m.mesh));
        curve.n_a += long(m.detections.size());
        curve.n_g += long(m.gt.size());
    }

    for (std::size_t k = 0; k < nr; ++k) {
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            const ModelEvalInput& m = models[mi];
            Correspondence corr = match(m.detections, m.gt, dists[mi],
                                        r_grid[k] * m.mesh->diameter);
            curve.n_c[k] += long(corr.pairs.size());
        }
        const long tp = curve.n_c[k];
        const long fp = curve.n_a - tp;
        const long fn = curve.n_g - tp;
        const long denom = fp + tp + fn;
        curve.iou[k] = denom > 0 ? double(tp) / double(denom) : 0.0;
        curve.fne[k] = curve.n_g > 0 ? double(fn) / double(curve.n_g) : 0.0;
        curve.fpe[k] = curve.n_a > 0 ? double(fp) / double(curve.n_a) : 0.0;
    }
    curve.auc_iou = trapezoid_auc(curve.r, curve.iou);
    curve.auc_fne = trapezoid_auc(curve.r, curve.fne);
    curve.auc_fpe = trapezoid_auc(curve.r, curve.fpe);
    return curve;
}

CrossvalCurve crossval_aggregate(const std::vector<EvalCurve>& folds) {
    if (folds.empty()) throw std::invalid_argument("no folds to aggregate");
    const EvalCurve& first = folds.front();
    for (const EvalCurve& f : folds) {
        if (f.sigma != first.sigma || f.consensus != first.consensus ||
            f.r != first.r)
            throw std::invalid_argument("fold curves disagree on (sigma, n, r) grid");
    }
    CrossvalCurve out;
    out.mean.sigma = first.sigma;
    out.mean.consensus = first.consensus;
    out.mean.r = first.r;
    const std::size_t nr = first.r.size();
    out.mean.iou.assign(nr, 0.0);
    out.mean.fne.assign(nr, 0.0);
    out.mean.fpe.assign(nr, 0.0);
    out.mean.n_c.assign(nr, 0);
    const double k = double(folds.size());
    for (const EvalCurve& f : folds) {
        for (std::size_t i = 0; i < nr; ++i) {
            out.mean.iou[i] += f.iou[i] / k;
            out.mean.fne[i] += f.fne[i] / k;
            out.mean.fpe[i] += f.fpe[i] / k;
            out.mean.n_c[i] += f.n_c[i];
        }
        out.mean.n_a += f.n_a;
        out.mean.n_g += f.n_g;
        out.fold_auc_iou += f.auc_iou / k;
        out.fold_auc_fne += f.auc_fne / k;
        out.fold_auc_fpe += f.auc_fpe / k;
    }
    out.mean.auc_iou = trapezoid_auc(out.mean.r, out.mean.iou);
    out.mean.auc_fne = trapezoid_auc(out.mean.r, out.mean.fne);
    out.mean.auc_fpe = trapezoid_auc(out.mean.r, out.mean.fpe);
    return out;
}

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

void write_curve_csv(const EvalCurve& curve, std::ostream& out) {
    char stamps[64];
    std::snprintf(stamps, sizeof stamps, " config=%016llx seed=%llu",
                  (unsigned long long)curve.config_hash,
                  (unsigned long long)curve.seed);
    out << "# ipd-curve v1 sigma=" << fmt17(curve.sigma) << " n=" << curve.consensus
        << " n_a=" << curve.n_a << " n_g=" << curve.n_g
        << " auc_iou=" << fmt17(curve.auc_iou) << " auc_fne=" << fmt17(curve.auc_fne)
        << " auc_fpe=" << fmt17(curve.auc_fpe) << stamps << '\n';
    out << "r,IOU,FNE,FPE\n";
    for (std::size_t i = 0; i < curve.r.size(); ++i)
        out << fmt17(curve.r[i]) << ',' << fmt17(curve.iou[i]) << ','
            << fmt17(curve.fne[i]) << ',' << fmt17(curve.fpe[i]) << '\n';
}

EvalCurve read_curve_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty curve file", 0);
    const std::string magic = "# ipd-curve v1 ";
    if (line.rfind(magic, 0) != 0) throw ParseError("not an ipd-curve v1 file", 1);
    EvalCurve curve;
    try {
        std::string meta = line.substr(magic.size());
        auto grab = [&](const std::string& key) {
            auto pos = meta.find(key + "=");
            if (pos == std::string::npos)
                throw ParseError("missing " + key + " in curve header", 1);
            return pos + key.size() + 1;
        };
        curve.sigma = std::stod(meta.substr(grab("sigma")));
        curve.consensus = std::stoi(meta.substr(grab("n")));
        curve.n_a = std::stol(meta.substr(grab("n_a")));
        curve.n_g = std::stol(meta.substr(grab("n_g")));
        curve.auc_iou = std::stod(meta.substr(grab("auc_iou")));
        curve.auc_fne = std::stod(meta.substr(grab("auc_fne")));
        curve.auc_fpe = std::stod(meta.substr(grab("auc_fpe")));
        auto cpos = meta.find("config=");
        if (cpos != std::string::npos)
            curve.config_hash = std::stoull(meta.substr(cpos + 7), nullptr, 16);
        auto spos = meta.find("seed=");
        if (spos != std::string::npos)
            curve.seed = std::stoull(meta.substr(spos + 5));
    } catch (const std::invalid_argument&) {
        throw ParseError("malformed curve header", 1);
    }
    if (!std::getline(in, line) || line != "r,IOU,FNE,FPE")
        throw ParseError("unexpected curve columns", 2);
    int line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        double vals[4];
        for (int i = 0; i < 4; ++i) {
            if (!std::getline(ls, cell, ','))
                throw ParseError("curve row too short", line_no);
            try {
                vals[i] = std::stod(cell);
            } catch (const std::exception&) {
                throw ParseError("malformed number in curve row", line_no);
            }
        }
        curve.r.push_back(vals[0]);
        curve.iou.push_back(vals[1]);
        curve.fne.push_back(vals[2]);
        curve.fpe.push_back(vals[3]);
    }
    return curve;
}

void write_curve_csv_file(const EvalCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write curve file: " + path);
    write_curve_csv(curve, out);
    if (!out) throw MeshError("failed writing curve file: " + path);
}

EvalCurve read_curve_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open curve file: " + path);
    try {
        return read_curve_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line);
    }
}

void write_eval_summary(const std::vector<EvalCurve>& curves, std::ostream& out) {
    out << "# ipd-eval-summary v1\n";
    for (const EvalCurve& c : curves)
        out << "curve sigma=" << fmt17(c.sigma) << " n=" << c.consensus
            << " n_a=" << c.n_a << " n_g=" << c.n_g << " auc_iou=" << fmt17(c.auc_iou)
            << " auc_fne=" << fmt17(c.auc_fne) << " auc_fpe=" << fmt17(c.auc_fpe)
            << '\n';
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt2(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

} // namespace

std::string curves_svg(const std::vector<EvalCurve>& curves) {
    const double panel_w = 340, panel_h = 300, margin_l = 48, margin_b = 36,
                 margin_t = 28, margin_r = 12;
    const double plot_w = panel_w - margin_l - margin_r;
    const double plot_h = panel_h - margin_t - margin_b;
    const double r_max = 0.12;
    const int legend_h = 18 * int(curves.size()) + 8;
    const double total_w = 3 * panel_w;
    const double total_h = panel_h + legend_h;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w
        << "\" height=\"" << total_h << "\" viewBox=\"0 0 " << total_w << ' '
        << total_h << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const char* titles[3] = {"IOU", "FNE", "FPE"};
    for (int panel = 0; panel < 3; ++panel) {
        const double ox = panel * panel_w + margin_l;
        const double oy = margin_t;
        svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
        svg << "<text x=\"" << fmt2(ox + plot_w / 2) << "\" y=\"16\" "
            << "text-anchor=\"middle\" font-size=\"13\">" << titles[panel]
            << "</text>\n";
        svg << "<rect x=\"" << fmt2(ox) << "\" y=\"" << fmt2(oy) << "\" width=\""
            << fmt2(plot_w) << "\" height=\"" << fmt2(plot_h)
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int tick = 0; tick <= 4; ++tick) {
            double fy = oy + plot_h - plot_h * tick / 4.0;
            svg << "<text x=\"" << fmt2(ox - 6) << "\" y=\"" << fmt2(fy + 4)
                << "\" text-anchor=\"end\">" << fmt2(tick / 4.0) << "</text>\n";
            double fx = ox + plot_w * tick / 4.0;
            svg << "<text x=\"" << fmt2(fx) << "\" y=\"" << fmt2(oy + plot_h + 14)
                << "\" text-anchor=\"middle\">" << fmt2(r_max * tick / 4.0)
                << "</text>\n";
        }
        svg << "<text x=\"" << fmt2(ox + plot_w / 2) << "\" y=\""
            << fmt2(oy + plot_h + 28) << "\" text-anchor=\"middle\">r</text>\n";
        for (std::size_t ci = 0; ci < curves.size(); ++ci) {
            const EvalCurve& c = curves[ci];
            const std::vector<double>& y =
                panel == 0 ? c.iou : (panel == 1 ? c.fne : c.fpe);
            svg << "<polyline fill=\"none\" stroke=\""
                << kPalette[ci % (sizeof kPalette / sizeof *kPalette)]
                << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < c.r.size(); ++i) {
                double px = ox + plot_w * (c.r[i] / r_max);
                double py = oy + plot_h * (1.0 - std::clamp(y[i], 0.0, 1.0));
                svg << fmt2(px) << ',' << fmt2(py) << ' ';
            }
            svg << "\"/>\n";
        }
        svg << "</g>\n";
    }

    svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const EvalCurve& c = curves[ci];
        double ly = panel_h + 14 + 18 * double(ci);
        svg << "<line x1=\"" << fmt2(margin_l) << "\" y1=\"" << fmt2(ly - 4)
            << "\" x2=\"" << fmt2(margin_l + 24) << "\" y2=\"" << fmt2(ly - 4)
            << "\" stroke=\"" << kPalette[ci % (sizeof kPalette / sizeof *kPalette)]
            << "\" stroke-width=\"1.5\"/>\n";
        char label[160];
        std::snprintf(label, sizeof label,
                      "sigma=%g n=%d  AUC: IOU %.5g, FNE %.5g, FPE %.5g", c.sigma,
                      c.consensus, c.auc_iou, c.auc_fne, c.auc_fpe);
        svg << "<text x=\"" << fmt2(margin_l + 32) << "\" y=\"" << fmt2(ly) << "\">"
            << label << "</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

} // namespace ipd
