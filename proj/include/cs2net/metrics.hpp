#ifndef CS2NET_METRICS_HPP
#define CS2NET_METRICS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cs2net/error.hpp"

namespace cs2net {

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::int64_t total() const { return tp + fp + tn + fn; }
};

// A metric that may be undefined (zero denominator); never silently 0 or 1.
struct Rate {
    double value = 0.0;
    bool defined = true;
    static Rate undefined() { return {0.0, false}; }
};

struct BasicRates {
    Rate acc, se, sp, fnr, fpr;
};

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // thresholds strictly decreasing
    double auc = 0.0;
};

struct CenterlineResult {
    Rate se;
    Rate fdr;
};

struct OrUr {
    Rate over;
    Rate under;
};

ConfusionCounts confusion(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& gt);

BasicRates basic_rates(const ConfusionCounts& c);

// ROC over all distinct score thresholds; AUC by trapezoidal integration.
// gt must contain both classes.
RocCurve auc_roc(const std::vector<double>& scores, const std::vector<std::uint8_t>& gt);

// 2|P ∩ G| / (|P| + |G|); 1.0 when both masks are empty.
double dice_coefficient(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt);

// OR = |P\G| / (|G| + |P\G|), UR = |G\P| / (|G| + |P\G|)
OrUr or_ur(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt);

// Zhang-Suen thinning of a 2D binary mask (row-major, height x width).
std::vector<std::uint8_t> zhang_suen_thin(const std::vector<std::uint8_t>& mask, int height,
                                          int width);

// Centerline SE/FDR against a 1-px ground-truth trace with a Euclidean
// tolerance. The prediction is thinned to a skeleton first.
CenterlineResult centerline_metrics(const std::vector<std::uint8_t>& pred_mask,
                                    const std::vector<std::uint8_t>& gt_centerline, int height,
                                    int width, double tolerance = 3.0);

// Per-sample metric rows plus an aggregate, written as CSV.
struct MetricsReport {
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::vector<Rate>>> rows;  // (sample name, values)

    void add_row(const std::string& name, const std::vector<Rate>& values);
    std::vector<Rate> aggregate() const;  // mean of defined values per column
    void write_csv(const std::string& path) const;
};

void write_roc_csv(const RocCurve& roc, const std::string& path);

}  // namespace cs2net

#endif
