#pragma once

// Classification and localization metrics from two sufficient statistics:
// integer confusion counts and (score,label) pairs. Ranking metrics use
// exact rank statistics on tie groups, never curve discretization, so any
// two evaluation orders (or worker counts) agree bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fbench/error.hpp"
#include "fbench/image.hpp"

namespace fbench {

struct BinaryCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    bool operator==(const BinaryCounts&) const = default;
};

inline BinaryCounts merge_counts(const BinaryCounts& a, const BinaryCounts& b) {
    return {a.tp + b.tp, a.fp + b.fp, a.tn + b.tn, a.fn + b.fn};
}

struct ScoredLabel {
    double score = 0.0;
    int label = 0;
};

inline constexpr double kDefaultThreshold = 0.5;

// Named metric values in a fixed order so reports are stable.
struct MetricSet {
    std::vector<std::pair<std::string, double>> values;

    void set(std::string_view name, double v) {
        for (auto& [n, x] : values)
            if (n == name) { x = v; return; }
        values.emplace_back(std::string(name), v);
    }
    bool has(std::string_view name) const {
        for (const auto& [n, x] : values) {
            (void)x;
            if (n == name) return true;
        }
        return false;
    }
    double get(std::string_view name) const {
        for (const auto& [n, x] : values)
            if (n == name) return x;
        throw BenchError("MissingMetric", "no metric '" + std::string(name) + "'");
    }
};

inline BinaryCounts confusion_from_scores(std::span<const ScoredLabel> items,
                                          double threshold = kDefaultThreshold) {
    if (items.empty())
        throw BenchError("EmptyInput", "no scored items to tally");
    BinaryCounts c;
    for (const auto& it : items) {
        const bool pred = it.score >= threshold;
        if (it.label == 1)
            (pred ? c.tp : c.fn)++;
        else
            (pred ? c.fp : c.tn)++;
    }
    return c;
}

inline BinaryCounts confusion_from_masks(const ScoreMap& pred, const BinaryMask& gt,
                                         double threshold = kDefaultThreshold) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw BenchError("DimensionMismatch",
                         "prediction " + std::to_string(pred.width) + "x" +
                             std::to_string(pred.height) + " vs ground truth " +
                             std::to_string(gt.width) + "x" +
                             std::to_string(gt.height));
    BinaryCounts c;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const bool p = pred.values[i] >= threshold;
        if (gt.values[i])
            (p ? c.tp : c.fn)++;
        else
            (p ? c.fp : c.tn)++;
    }
    return c;
}

namespace detail {

inline long double u128_to_ld(unsigned __int128 v) {
    return static_cast<long double>(static_cast<std::uint64_t>(v >> 64)) *
               18446744073709551616.0L +
           static_cast<long double>(static_cast<std::uint64_t>(v));
}

}  // namespace detail

// Every denominator-zero case evaluates to 0 so batch reports never divide
// by zero; MCC is 0 whenever any factor under the root vanishes.
inline MetricSet threshold_metrics(const BinaryCounts& c) {
    const auto ratio = [](std::uint64_t num, std::uint64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    MetricSet m;
    m.set("ACC", ratio(c.tp + c.tn, c.total()));
    m.set("F1", ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn));
    m.set("IoU", ratio(c.tp, c.tp + c.fp + c.fn));

    const std::uint64_t s1 = c.tp + c.fp, s2 = c.tp + c.fn;
    const std::uint64_t s3 = c.tn + c.fp, s4 = c.tn + c.fn;
    double mcc = 0.0;
    if (s1 && s2 && s3 && s4) {
        const unsigned __int128 pos = static_cast<unsigned __int128>(c.tp) * c.tn;
        const unsigned __int128 neg = static_cast<unsigned __int128>(c.fp) * c.fn;
        const long double numer = pos >= neg ? detail::u128_to_ld(pos - neg)
                                             : -detail::u128_to_ld(neg - pos);
        const long double denom = std::sqrt(static_cast<long double>(s1)) *
                                  std::sqrt(static_cast<long double>(s2)) *
                                  std::sqrt(static_cast<long double>(s3)) *
                                  std::sqrt(static_cast<long double>(s4));
        mcc = static_cast<double>(numer / denom);
    }
    m.set("MCC", mcc);
    m.set("TNR", ratio(c.tn, s3));
    m.set("TPR", ratio(c.tp, s2));
    m.set("Precision", ratio(c.tp, s1));
    m.set("Recall", ratio(c.tp, s2));
    return m;
}

namespace detail {

// Walks ascending tie groups of (score,label) pairs sorted by score and
// returns the doubled Mann-Whitney win count: 2*#(pos>neg) + #(ties).
// Integer-exact, so the result is independent of input order.
struct RankTally {
    unsigned __int128 wins2 = 0;
    std::uint64_t pos_total = 0;
    std::uint64_t neg_total = 0;
};

template <typename GroupVisitor>
inline RankTally rank_tally_over_groups(GroupVisitor&& for_each_group) {
    RankTally t;
    std::uint64_t neg_before = 0;
    for_each_group([&](std::uint64_t pos_g, std::uint64_t neg_g) {
        t.wins2 += static_cast<unsigned __int128>(pos_g) * (2 * neg_before) +
                   static_cast<unsigned __int128>(pos_g) * neg_g;
        neg_before += neg_g;
        t.pos_total += pos_g;
        t.neg_total += neg_g;
    });
    return t;
}

inline double auc_from_tally(const RankTally& t) {
    if (t.pos_total == 0 || t.neg_total == 0)
        throw BenchError("SingleClass", "AUC needs both labels present");
    const long double denom = 2.0L * static_cast<long double>(t.pos_total) *
                              static_cast<long double>(t.neg_total);
    return static_cast<double>(u128_to_ld(t.wins2) / denom);
}

// Walks descending tie groups and accumulates step-interpolated AP:
// sum over groups of (pos_g/P) * precision-at-group.
template <typename GroupVisitor>
inline double ap_over_groups(std::uint64_t pos_total, GroupVisitor&& for_each_group) {
    if (pos_total == 0)
        throw BenchError("NoPositives", "AP needs at least one positive");
    long double ap = 0.0L;
    std::uint64_t cum_tp = 0, cum_fp = 0;
    for_each_group([&](std::uint64_t pos_g, std::uint64_t neg_g) {
        cum_tp += pos_g;
        cum_fp += neg_g;
        if (pos_g > 0) {
            const long double prec = static_cast<long double>(cum_tp) /
                                     static_cast<long double>(cum_tp + cum_fp);
            ap += static_cast<long double>(pos_g) /
                  static_cast<long double>(pos_total) * prec;
        }
    });
    return static_cast<double>(ap);
}

// Sorts items by score and yields (pos,neg) per tie group, ascending.
template <typename Fn>
inline void scored_groups_ascending(std::span<const ScoredLabel> items, Fn&& fn) {
    std::vector<std::uint32_t> order(items.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return items[a].score < items[b].score;
    });
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = items[order[i]].score;
        std::uint64_t pos = 0, neg = 0;
        while (i < order.size() && items[order[i]].score == s) {
            (items[order[i]].label == 1 ? pos : neg)++;
            ++i;
        }
        fn(pos, neg);
    }
}

}  // namespace detail

// P(score_pos > score_neg) + half the tie mass; equals the trapezoidal ROC
// area over all thresholds.
inline double auc(std::span<const ScoredLabel> items) {
    auto tally = detail::rank_tally_over_groups([&](auto&& visit) {
        detail::scored_groups_ascending(items, visit);
    });
    return detail::auc_from_tally(tally);
}

inline double average_precision(std::span<const ScoredLabel> items) {
    std::uint64_t pos_total = 0;
    for (const auto& it : items) pos_total += it.label == 1;
    // Collect ascending groups, then walk them in reverse for the
    // descending-threshold sweep.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> groups;
    detail::scored_groups_ascending(
        items, [&](std::uint64_t p, std::uint64_t n) { groups.emplace_back(p, n); });
    return detail::ap_over_groups(pos_total, [&](auto&& visit) {
        for (auto it = groups.rbegin(); it != groups.rend(); ++it)
            visit(it->first, it->second);
    });
}

// Per-class pixel tallies over the quantization grid of a score map. Lets a
// dataset's worth of pixels rank exactly without keeping them all: bin k of
// L levels holds pixels whose score is k/(L-1).
struct ClassHistogram {
    int levels = 0;
    std::vector<std::uint64_t> pos, neg;

    bool empty() const { return levels == 0; }
    std::uint64_t pos_total() const {
        std::uint64_t s = 0;
        for (auto v : pos) s += v;
        return s;
    }
    std::uint64_t neg_total() const {
        std::uint64_t s = 0;
        for (auto v : neg) s += v;
        return s;
    }
};

inline ClassHistogram make_histogram(int levels) {
    if (levels != 256 && levels != 65536)
        throw BenchError("BadQuantization",
                         "histograms support 256 or 65536 levels, got " +
                             std::to_string(levels));
    ClassHistogram h;
    h.levels = levels;
    h.pos.assign(static_cast<std::size_t>(levels), 0);
    h.neg.assign(static_cast<std::size_t>(levels), 0);
    return h;
}

inline void accumulate_histogram(ClassHistogram& h, const ScoreMap& pred,
                                 const BinaryMask& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw BenchError("DimensionMismatch", "prediction and mask differ in size");
    std::size_t stride = 1;
    if (pred.levels != h.levels) {
        // An 8-bit map slots into a 16-bit histogram on the 257-step lattice;
        // any other mixture has no exact embedding.
        if (pred.levels == 256 && h.levels == 65536)
            stride = 257;
        else
            throw BenchError("BadQuantization",
                             "map quantized to " + std::to_string(pred.levels) +
                                 " levels, histogram expects " +
                                 std::to_string(h.levels));
    }
    const double scale = static_cast<double>(pred.levels - 1);
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const auto k = static_cast<std::size_t>(pred.values[i] * scale + 0.5);
        (gt.values[i] ? h.pos : h.neg)[k * stride]++;
    }
}

// The 256-level grid embeds exactly into the 65536-level one: bin k at
// score k/255 lands on bin 257k at score 257k/65535, the same real value.
inline ClassHistogram merge_histograms(const ClassHistogram& a,
                                       const ClassHistogram& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    const int levels = std::max(a.levels, b.levels);
    ClassHistogram out = make_histogram(levels);
    const auto add = [&](const ClassHistogram& h) {
        const std::size_t stride = levels == h.levels ? 1 : 257;
        for (std::size_t k = 0; k < h.pos.size(); ++k) {
            out.pos[k * stride] += h.pos[k];
            out.neg[k * stride] += h.neg[k];
        }
    };
    add(a);
    add(b);
    return out;
}

inline BinaryCounts counts_from_histogram(const ClassHistogram& h,
                                          double threshold = kDefaultThreshold) {
    BinaryCounts c;
    const double scale = static_cast<double>(h.levels - 1);
    for (int k = 0; k < h.levels; ++k) {
        const bool pred = static_cast<double>(k) / scale >= threshold;
        if (pred) {
            c.tp += h.pos[static_cast<std::size_t>(k)];
            c.fp += h.neg[static_cast<std::size_t>(k)];
        } else {
            c.fn += h.pos[static_cast<std::size_t>(k)];
            c.tn += h.neg[static_cast<std::size_t>(k)];
        }
    }
    return c;
}

inline double auc(const ClassHistogram& h) {
    auto tally = detail::rank_tally_over_groups([&](auto&& visit) {
        for (int k = 0; k < h.levels; ++k)
            visit(h.pos[static_cast<std::size_t>(k)],
                  h.neg[static_cast<std::size_t>(k)]);
    });
    return detail::auc_from_tally(tally);
}

inline double average_precision(const ClassHistogram& h) {
    return detail::ap_over_groups(h.pos_total(), [&](auto&& visit) {
        for (int k = h.levels - 1; k >= 0; --k)
            visit(h.pos[static_cast<std::size_t>(k)],
                  h.neg[static_cast<std::size_t>(k)]);
    });
}

// Threshold metrics of the per-pixel confusion, plus pixel AUC/AP when the
// ground truth carries both classes (omitted otherwise).
inline MetricSet pixel_evaluate(const ScoreMap& pred, const BinaryMask& gt,
                                double threshold = kDefaultThreshold) {
    if (pred.levels == 256 || pred.levels == 65536) {
        // Quantized maps take the histogram route: same numbers as the sort
        // route on lattice values, but linear in pixels instead of n log n.
        ClassHistogram h = make_histogram(pred.levels);
        accumulate_histogram(h, pred, gt);
        MetricSet m = threshold_metrics(counts_from_histogram(h, threshold));
        if (h.pos_total() > 0 && h.neg_total() > 0) {
            m.set("AUC", auc(h));
            m.set("AP", average_precision(h));
        }
        return m;
    }
    MetricSet m = threshold_metrics(confusion_from_masks(pred, gt, threshold));
    std::uint64_t pos = 0;
    for (auto v : gt.values) pos += v;
    if (pos > 0 && pos < gt.values.size()) {
        std::vector<ScoredLabel> items(pred.values.size());
        for (std::size_t i = 0; i < items.size(); ++i)
            items[i] = {pred.values[i], gt.values[i] ? 1 : 0};
        m.set("AUC", auc(items));
        m.set("AP", average_precision(items));
    }
    return m;
}

}  // namespace fbench
