#include "cs2net/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace cs2net {

ConfusionCounts confusion(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& gt) {
    if (pred.size() != gt.size()) throw DimensionError("confusion: size mismatch");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] > 1 || gt[i] > 1) throw ContractError("confusion: masks must be binary {0,1}");
        if (pred[i] && gt[i])
            ++c.tp;
        else if (pred[i] && !gt[i])
            ++c.fp;
        else if (!pred[i] && gt[i])
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

BasicRates basic_rates(const ConfusionCounts& c) {
    BasicRates r;
    std::int64_t total = c.total();
    r.acc = total > 0 ? Rate{static_cast<double>(c.tp + c.tn) / static_cast<double>(total), true}
                      : Rate::undefined();
    if (c.tp + c.fn > 0) {
        r.se = Rate{static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn), true};
        r.fnr = Rate{static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn), true};
    } else {
        r.se = Rate::undefined();
        r.fnr = Rate::undefined();
    }
    if (c.tn + c.fp > 0) {
        r.sp = Rate{static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp), true};
        r.fpr = Rate{static_cast<double>(c.fp) / static_cast<double>(c.tn + c.fp), true};
    } else {
        r.sp = Rate::undefined();
        r.fpr = Rate::undefined();
    }
    return r;
}

RocCurve auc_roc(const std::vector<double>& scores, const std::vector<std::uint8_t>& gt) {
    if (scores.size() != gt.size()) throw DimensionError("auc_roc: size mismatch");
    std::int64_t pos = 0, neg = 0;
    for (std::uint8_t g : gt) {
        if (g > 1) throw ContractError("auc_roc: labels must be binary {0,1}");
        g ? ++pos : ++neg;
    }
    if (pos == 0 || neg == 0)
        throw ContractError("auc_roc: ground truth must contain both classes");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::int64_t tp = 0, fp = 0;
    double auc = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        double t = scores[order[i]];
        // consume the whole tie group at threshold t
        while (i < order.size() && scores[order[i]] == t) {
            gt[order[i]] ? ++tp : ++fp;
            ++i;
        }
        double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        roc.points.push_back({t, fpr, tpr});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    if (roc.points.back().fpr != 1.0 || roc.points.back().tpr != 1.0)
        roc.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
    roc.auc = auc;
    return roc;
}

double dice_coefficient(const std::vector<std::uint8_t>& pred,
                        const std::vector<std::uint8_t>& gt) {
    if (pred.size() != gt.size()) throw DimensionError("dice_coefficient: size mismatch");
    std::int64_t p = 0, g = 0, both = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i]) ++p;
        if (gt[i]) ++g;
        if (pred[i] && gt[i]) ++both;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

OrUr or_ur(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt) {
    if (pred.size() != gt.size()) throw DimensionError("or_ur: size mismatch");
    std::int64_t os = 0, us = 0, rs = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && !gt[i]) ++os;
        if (!pred[i] && gt[i]) ++us;
        if (gt[i]) ++rs;
    }
    OrUr r;
    if (rs + os == 0) {
        r.over = Rate::undefined();
        r.under = Rate::undefined();
    } else {
        r.over = Rate{static_cast<double>(os) / static_cast<double>(rs + os), true};
        r.under = Rate{static_cast<double>(us) / static_cast<double>(rs + os), true};
    }
    return r;
}

std::vector<std::uint8_t> zhang_suen_thin(const std::vector<std::uint8_t>& mask, int height,
                                          int width) {
    if (static_cast<size_t>(height) * static_cast<size_t>(width) != mask.size())
        throw DimensionError("zhang_suen_thin: size mismatch");
    std::vector<std::uint8_t> img(mask);
    for (std::uint8_t v : img)
        if (v > 1) throw ContractError("zhang_suen_thin: mask must be binary {0,1}");

    auto at = [&](const std::vector<std::uint8_t>& m, int y, int x) -> int {
        if (y < 0 || y >= height || x < 0 || x >= width) return 0;
        return m[static_cast<size_t>(y) * width + x];
    };

    bool changed = true;
    std::vector<std::pair<int, int>> to_clear;
    while (changed) {
        changed = false;
        for (int phase = 0; phase < 2; ++phase) {
            to_clear.clear();
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    if (!at(img, y, x)) continue;
                    int p2 = at(img, y - 1, x), p3 = at(img, y - 1, x + 1), p4 = at(img, y, x + 1),
                        p5 = at(img, y + 1, x + 1), p6 = at(img, y + 1, x),
                        p7 = at(img, y + 1, x - 1), p8 = at(img, y, x - 1),
                        p9 = at(img, y - 1, x - 1);
                    int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;
                    int a = (p2 == 0 && p3 == 1) + (p3 == 0 && p4 == 1) + (p4 == 0 && p5 == 1) +
                            (p5 == 0 && p6 == 1) + (p6 == 0 && p7 == 1) + (p7 == 0 && p8 == 1) +
                            (p8 == 0 && p9 == 1) + (p9 == 0 && p2 == 1);
                    if (a != 1) continue;
                    if (phase == 0) {
                        if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
                    } else {
                        if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
                    }
                    to_clear.emplace_back(y, x);
                }
            }
            for (auto [y, x] : to_clear) img[static_cast<size_t>(y) * width + x] = 0;
            changed = changed || !to_clear.empty();
        }
    }
    return img;
}

namespace {

// Nearest-point distances from every pixel to the set bits of `src`,
// brute force over the (sparse) point list.
std::vector<std::pair<int, int>> points_of(const std::vector<std::uint8_t>& m, int height,
                                           int width) {
    std::vector<std::pair<int, int>> pts;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (m[static_cast<size_t>(y) * width + x]) pts.emplace_back(y, x);
    return pts;
}

double min_dist(int y, int x, const std::vector<std::pair<int, int>>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (auto [py, px] : pts) {
        double dy = y - py, dx = x - px;
        best = std::min(best, dy * dy + dx * dx);
    }
    return std::sqrt(best);
}

}  // namespace

CenterlineResult centerline_metrics(const std::vector<std::uint8_t>& pred_mask,
                                    const std::vector<std::uint8_t>& gt_centerline, int height,
                                    int width, double tolerance) {
    if (pred_mask.size() != gt_centerline.size())
        throw DimensionError("centerline_metrics: size mismatch");
    std::vector<std::uint8_t> skel = zhang_suen_thin(pred_mask, height, width);
    auto skel_pts = points_of(skel, height, width);
    auto gt_pts = points_of(gt_centerline, height, width);

    CenterlineResult r;
    if (skel_pts.empty()) {
        r.fdr = Rate::undefined();
        r.se = Rate{0.0, true};
        return r;
    }
    std::int64_t fp = 0;
    for (auto [y, x] : skel_pts)
        if (gt_pts.empty() || min_dist(y, x, gt_pts) > tolerance) ++fp;
    r.fdr = Rate{static_cast<double>(fp) / static_cast<double>(skel_pts.size()), true};

    if (gt_pts.empty()) {
        r.se = Rate::undefined();
    } else {
        std::int64_t hit = 0;
        for (auto [y, x] : gt_pts)
            if (min_dist(y, x, skel_pts) <= tolerance) ++hit;
        r.se = Rate{static_cast<double>(hit) / static_cast<double>(gt_pts.size()), true};
    }
    return r;
}

void MetricsReport::add_row(const std::string& name, const std::vector<Rate>& values) {
    if (values.size() != columns.size())
        throw ContractError("MetricsReport: row width mismatch");
    rows.emplace_back(name, values);
}

std::vector<Rate> MetricsReport::aggregate() const {
    std::vector<Rate> agg(columns.size(), Rate::undefined());
    for (size_t c = 0; c < columns.size(); ++c) {
        double sum = 0;
        std::int64_t n = 0;
        for (const auto& [name, vals] : rows) {
            if (vals[c].defined) {
                sum += vals[c].value;
                ++n;
            }
        }
        if (n > 0) agg[c] = Rate{sum / static_cast<double>(n), true};
    }
    return agg;
}

void MetricsReport::write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "sample";
    for (const auto& c : columns) f << "," << c;
    f << "\n";
    f.precision(12);
    auto write_vals = [&f](const std::vector<Rate>& vals) {
        for (const auto& v : vals) {
            f << ",";
            if (v.defined)
                f << v.value;
            else
                f << "undefined";
        }
        f << "\n";
    };
    for (const auto& [name, vals] : rows) {
        f << name;
        write_vals(vals);
    }
    f << "aggregate";
    write_vals(aggregate());
}

void write_roc_csv(const RocCurve& roc, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "threshold,fpr,tpr\n";
    f.precision(12);
    for (const auto& p : roc.points) f << p.threshold << "," << p.fpr << "," << p.tpr << "\n";
    f << "# auc," << roc.auc << "\n";
}

}  // namespace cs2net
