#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "fbench/metrics.hpp"

using namespace fbench;

// ---------------------------------------------------------------------------
// Independent oracles. Deliberately naive: per-item tallies, all-pairs
// enumeration for AUC, an O(n^2) threshold sweep for AP.
// ---------------------------------------------------------------------------

namespace {

struct OracleCounts { long tp = 0, fp = 0, tn = 0, fn = 0; };

OracleCounts oracle_tally(const std::vector<ScoredLabel>& items, double thr) {
    OracleCounts c;
    for (auto& it : items) {
        if (it.label == 1 && it.score >= thr) c.tp++;
        if (it.label == 1 && it.score < thr) c.fn++;
        if (it.label == 0 && it.score >= thr) c.fp++;
        if (it.label == 0 && it.score < thr) c.tn++;
    }
    return c;
}

double oracle_auc(const std::vector<ScoredLabel>& items) {
    double wins = 0;
    long pairs = 0;
    for (auto& p : items) {
        if (p.label != 1) continue;
        for (auto& n : items) {
            if (n.label != 0) continue;
            pairs++;
            if (p.score > n.score) wins += 1.0;
            else if (p.score == n.score) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

double oracle_ap(const std::vector<ScoredLabel>& items) {
    std::set<double, std::greater<double>> thresholds;
    for (auto& it : items) thresholds.insert(it.score);
    long total_pos = 0;
    for (auto& it : items) total_pos += it.label == 1;
    double ap = 0, prev_recall = 0;
    for (double t : thresholds) {
        long tp = 0, fp = 0;
        for (auto& it : items) {
            if (it.score >= t) (it.label == 1 ? tp : fp)++;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        double prec = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * prec;
        prev_recall = recall;
    }
    return ap;
}

double oracle_mcc(long tp, long fp, long tn, long fn) {
    double s1 = double(tp + fp), s2 = double(tp + fn);
    double s3 = double(tn + fp), s4 = double(tn + fn);
    if (s1 == 0 || s2 == 0 || s3 == 0 || s4 == 0) return 0;
    return (double(tp) * tn - double(fp) * fn) / std::sqrt(s1 * s2 * s3 * s4);
}

std::vector<ScoredLabel> random_items(std::mt19937& rng, int n, bool quantized) {
    std::uniform_int_distribution<int> lab(0, 1), q(0, 10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ScoredLabel> items(n);
    for (auto& it : items) {
        it.label = lab(rng);
        it.score = quantized ? q(rng) / 10.0 : u(rng);
    }
    return items;
}

bool both_classes(const std::vector<ScoredLabel>& items) {
    bool p = false, n = false;
    for (auto& it : items) (it.label == 1 ? p : n) = true;
    return p && n;
}

}  // namespace

TEST_CASE("confusion_from_scores matches stated examples") {
    std::vector<ScoredLabel> a = {{0.9, 1}, {0.1, 0}};
    auto c = confusion_from_scores(a);
    CHECK(c.tp == 1);
    CHECK(c.tn == 1);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);

    std::vector<ScoredLabel> b = {{0.5, 0}};
    auto cb = confusion_from_scores(b, 0.5);
    CHECK(cb.fp == 1);  // score equal to threshold counts as positive

    CHECK_THROWS_AS(confusion_from_scores({}), BenchError);
}

TEST_CASE("confusion_from_scores equals per-item oracle") {
    std::mt19937 rng(11);
    for (int t = 0; t < 200; ++t) {
        auto items = random_items(rng, 8, t % 2 == 0);
        double thr = (t % 5) / 5.0;
        auto c = confusion_from_scores(items, thr);
        auto o = oracle_tally(items, thr);
        CHECK(c.tp == static_cast<std::uint64_t>(o.tp));
        CHECK(c.fp == static_cast<std::uint64_t>(o.fp));
        CHECK(c.tn == static_cast<std::uint64_t>(o.tn));
        CHECK(c.fn == static_cast<std::uint64_t>(o.fn));
    }
}

TEST_CASE("confusion_from_masks tallies pixels") {
    auto pred = make_score_map(10, 10, 256, 1.0);
    BinaryMask gt{10, 10, std::vector<std::uint8_t>(100, 0)};
    auto c = confusion_from_masks(pred, gt);
    CHECK(c.fp == 100);
    CHECK(c.tp + c.tn + c.fn == 0);

    // pred == gt exactly: no errors
    for (int i = 0; i < 100; ++i) {
        gt.values[static_cast<std::size_t>(i)] = i % 3 == 0;
        pred.values[static_cast<std::size_t>(i)] = gt.values[static_cast<std::size_t>(i)];
    }
    auto c2 = confusion_from_masks(pred, gt);
    CHECK(c2.fp == 0);
    CHECK(c2.fn == 0);

    auto wrong = make_score_map(9, 10, 256);
    CHECK_THROWS_AS(confusion_from_masks(wrong, gt), BenchError);

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    auto rp = make_score_map(16, 16);
    BinaryMask rg{16, 16, std::vector<std::uint8_t>(256)};
    for (int i = 0; i < 256; ++i) {
        rp.values[static_cast<std::size_t>(i)] = u(rng);
        rg.values[static_cast<std::size_t>(i)] = u(rng) < 0.5;
    }
    std::vector<ScoredLabel> flat(256);
    for (int i = 0; i < 256; ++i)
        flat[static_cast<std::size_t>(i)] = {rp.values[static_cast<std::size_t>(i)],
                                             rg.values[static_cast<std::size_t>(i)]};
    auto cm = confusion_from_masks(rp, rg);
    auto cs = confusion_from_scores(flat);
    CHECK(cm == cs);
}

TEST_CASE("threshold_metrics worked example") {
    BinaryCounts c{2, 1, 6, 1};
    auto m = threshold_metrics(c);
    CHECK(m.get("Precision") == Catch::Approx(2.0 / 3).margin(1e-15));
    CHECK(m.get("Recall") == Catch::Approx(2.0 / 3).margin(1e-15));
    CHECK(m.get("F1") == Catch::Approx(2.0 / 3).margin(1e-15));
    CHECK(m.get("ACC") == Catch::Approx(0.8).margin(1e-15));
    CHECK(m.get("IoU") == Catch::Approx(0.5).margin(1e-15));
    CHECK(m.get("TNR") == Catch::Approx(6.0 / 7).margin(1e-15));
    CHECK(m.get("TPR") == Catch::Approx(2.0 / 3).margin(1e-15));
    CHECK(m.get("MCC") == Catch::Approx(11.0 / 21).margin(1e-12));
}

TEST_CASE("threshold_metrics boundary policies") {
    SECTION("perfect counts give all ones") {
        auto m = threshold_metrics({5, 0, 7, 0});
        for (const char* name : {"ACC", "F1", "IoU", "MCC", "TNR", "TPR",
                                 "Precision", "Recall"})
            CHECK(m.get(name) == 1.0);
    }
    SECTION("all-negative input") {
        auto m = threshold_metrics({0, 0, 10, 0});
        CHECK(m.get("F1") == 0.0);
        CHECK(m.get("IoU") == 0.0);
        CHECK(m.get("Recall") == 0.0);
        CHECK(m.get("Precision") == 0.0);
        CHECK(m.get("ACC") == 1.0);
        CHECK(m.get("TNR") == 1.0);
        CHECK(m.get("MCC") == 0.0);
    }
    SECTION("MCC is 1 exactly when no errors and both classes present") {
        CHECK(threshold_metrics({3, 0, 4, 0}).get("MCC") == 1.0);
        CHECK(threshold_metrics({3, 1, 4, 0}).get("MCC") < 1.0);
        CHECK(threshold_metrics({3, 0, 0, 0}).get("MCC") == 0.0);
    }
}

TEST_CASE("metrics agree with direct-formula oracle on random counts") {
    std::mt19937 rng(23);
    std::uniform_int_distribution<long> d(0, 40);
    for (int t = 0; t < 1000; ++t) {
        long tp = d(rng), fp = d(rng), tn = d(rng), fn = d(rng);
        if (tp + fp + tn + fn == 0) continue;
        BinaryCounts c{static_cast<std::uint64_t>(tp), static_cast<std::uint64_t>(fp),
                       static_cast<std::uint64_t>(tn), static_cast<std::uint64_t>(fn)};
        auto m = threshold_metrics(c);
        auto safe = [](long num, long den) {
            return den == 0 ? 0.0 : double(num) / double(den);
        };
        CHECK(m.get("ACC") == Catch::Approx(safe(tp + tn, tp + fp + tn + fn)).margin(1e-12));
        CHECK(m.get("F1") == Catch::Approx(safe(2 * tp, 2 * tp + fp + fn)).margin(1e-12));
        CHECK(m.get("IoU") == Catch::Approx(safe(tp, tp + fp + fn)).margin(1e-12));
        CHECK(m.get("TNR") == Catch::Approx(safe(tn, tn + fp)).margin(1e-12));
        CHECK(m.get("TPR") == Catch::Approx(safe(tp, tp + fn)).margin(1e-12));
        CHECK(m.get("Precision") == Catch::Approx(safe(tp, tp + fp)).margin(1e-12));
        CHECK(m.get("Recall") == Catch::Approx(safe(tp, tp + fn)).margin(1e-12));
        CHECK(m.get("MCC") == Catch::Approx(oracle_mcc(tp, fp, tn, fn)).margin(1e-12));

        // Algebraic identities
        double iou = m.get("IoU");
        if (tp + fp + fn > 0)
            CHECK(m.get("F1") == Catch::Approx(2 * iou / (1 + iou)).margin(1e-12));
        if (tp + fn > 0)
            CHECK(m.get("TPR") + safe(fn, tp + fn) == Catch::Approx(1.0).margin(1e-12));
        if (tn + fp > 0)
            CHECK(m.get("TNR") + safe(fp, tn + fp) == Catch::Approx(1.0).margin(1e-12));
        CHECK(m.get("MCC") >= -1.0 - 1e-12);
        CHECK(m.get("MCC") <= 1.0 + 1e-12);
    }
}

TEST_CASE("auc matches stated examples") {
    std::vector<ScoredLabel> items = {{0.1, 0}, {0.4, 0}, {0.35, 1}, {0.8, 1}};
    CHECK(auc(items) == Catch::Approx(0.75).margin(1e-15));

    std::vector<ScoredLabel> perfect = {{0.1, 0}, {0.2, 0}, {0.7, 1}, {0.9, 1}};
    CHECK(auc(perfect) == 1.0);

    std::vector<ScoredLabel> ties = {{0.5, 0}, {0.5, 1}, {0.5, 0}, {0.5, 1}};
    CHECK(auc(ties) == 0.5);

    std::vector<ScoredLabel> single = {{0.5, 1}, {0.6, 1}};
    CHECK_THROWS_AS(auc(single), BenchError);
}

TEST_CASE("average_precision matches stated examples") {
    std::vector<ScoredLabel> two = {{0.4, 1}, {0.8, 0}};
    CHECK(average_precision(two) == Catch::Approx(0.5).margin(1e-15));

    std::vector<ScoredLabel> four = {{0.1, 0}, {0.4, 0}, {0.35, 1}, {0.8, 1}};
    CHECK(average_precision(four) == Catch::Approx(0.5 + 1.0 / 3).margin(1e-12));

    std::vector<ScoredLabel> perfect = {{0.9, 1}, {0.8, 1}, {0.2, 0}};
    CHECK(average_precision(perfect) == 1.0);

    std::vector<ScoredLabel> none = {{0.4, 0}, {0.8, 0}};
    CHECK_THROWS_AS(average_precision(none), BenchError);
}

TEST_CASE("ranking metrics equal brute-force oracles on random inputs") {
    std::mt19937 rng(31);
    std::uniform_int_distribution<int> nsel(2, 64);
    int done = 0;
    while (done < 1000) {
        auto items = random_items(rng, nsel(rng), done % 3 == 0);
        if (!both_classes(items)) continue;
        done++;
        CHECK(auc(items) == Catch::Approx(oracle_auc(items)).margin(1e-12));
        CHECK(average_precision(items) ==
              Catch::Approx(oracle_ap(items)).margin(1e-12));
    }
}

TEST_CASE("auc invariances") {
    std::mt19937 rng(37);
    for (int t = 0; t < 100; ++t) {
        auto items = random_items(rng, 20, t % 2 == 0);
        if (!both_classes(items)) continue;
        double base = auc(items);

        auto cubed = items;
        for (auto& it : cubed) it.score = it.score * it.score * it.score;
        CHECK(auc(cubed) == base);  // strictly monotone transform

        auto mirrored = items;
        for (auto& it : mirrored) {
            it.score = 1.0 - it.score;
            it.label = 1 - it.label;
        }
        CHECK(auc(mirrored) == Catch::Approx(base).margin(1e-12));

        auto shuffled = items;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(auc(shuffled) == base);
        CHECK(average_precision(shuffled) == average_precision(items));
    }
}

TEST_CASE("merge_counts is a commutative monoid") {
    std::mt19937 rng(41);
    std::uniform_int_distribution<std::uint64_t> d(0, 1000);
    BinaryCounts zero;
    std::vector<BinaryCounts> cs;
    for (int i = 0; i < 10; ++i) cs.push_back({d(rng), d(rng), d(rng), d(rng)});

    CHECK(merge_counts(cs[0], zero) == cs[0]);
    CHECK(merge_counts(cs[1], cs[2]) == merge_counts(cs[2], cs[1]));

    BinaryCounts left = cs[0];
    for (std::size_t i = 1; i < cs.size(); ++i) left = merge_counts(left, cs[i]);
    BinaryCounts right = cs.back();
    for (std::size_t i = cs.size() - 1; i-- > 0;) right = merge_counts(cs[i], right);
    CHECK(left == right);
}

TEST_CASE("histogram path equals sort path on quantized maps") {
    std::mt19937 rng(43);
    std::uniform_int_distribution<int> v8(0, 255), v16(0, 65535), lab(0, 1);
    for (int t = 0; t < 20; ++t) {
        const int w = 13, h = 9;
        bool wide = t % 2 == 1;
        int levels = wide ? 65536 : 256;
        auto pred = make_score_map(w, h, levels);
        BinaryMask gt{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
        std::vector<ScoredLabel> flat(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            int raw = wide ? v16(rng) : v8(rng);
            pred.values[i] = raw / static_cast<double>(levels - 1);
            gt.values[i] = static_cast<std::uint8_t>(lab(rng));
            flat[i] = {pred.values[i], gt.values[i]};
        }
        auto hist = make_histogram(levels);
        accumulate_histogram(hist, pred, gt);

        CHECK(auc(hist) == auc(flat));
        CHECK(average_precision(hist) == average_precision(flat));
        for (double thr : {0.0, 0.3, 0.5, 0.731, 1.0})
            CHECK(counts_from_histogram(hist, thr) == confusion_from_scores(flat, thr));
    }
}

TEST_CASE("8-bit histograms embed exactly into 16-bit ones") {
    std::mt19937 rng(47);
    std::uniform_int_distribution<int> v8(0, 255), lab(0, 1);
    const int w = 16, h = 16;
    auto pred = make_score_map(w, h, 256);
    BinaryMask gt{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    std::vector<ScoredLabel> flat(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pred.values[i] = v8(rng) / 255.0;
        gt.values[i] = static_cast<std::uint8_t>(lab(rng));
        flat[i] = {pred.values[i], gt.values[i]};
    }
    auto h8 = make_histogram(256);
    accumulate_histogram(h8, pred, gt);

    auto h16 = make_histogram(65536);
    accumulate_histogram(h16, pred, gt);  // widening accumulate
    CHECK(auc(h16) == auc(flat));

    auto merged = merge_histograms(h8, make_histogram(65536));
    CHECK(merged.levels == 65536);
    CHECK(auc(merged) == auc(flat));
    CHECK(average_precision(merged) == average_precision(flat));
    for (double thr : {0.25, 0.5, 0.75})
        CHECK(counts_from_histogram(merged, thr) == confusion_from_scores(flat, thr));

    // Merging two disjoint halves equals one histogram over everything.
    auto top = make_score_map(w, h / 2, 256);
    auto bottom = make_score_map(w, h / 2, 256);
    BinaryMask gt_top{w, h / 2, {gt.values.begin(), gt.values.begin() + w * h / 2}};
    BinaryMask gt_bot{w, h / 2, {gt.values.begin() + w * h / 2, gt.values.end()}};
    std::copy(pred.values.begin(), pred.values.begin() + w * h / 2,
              top.values.begin());
    std::copy(pred.values.begin() + w * h / 2, pred.values.end(),
              bottom.values.begin());
    auto ha = make_histogram(256), hb = make_histogram(256);
    accumulate_histogram(ha, top, gt_top);
    accumulate_histogram(hb, bottom, gt_bot);
    auto both = merge_histograms(ha, hb);
    CHECK(auc(both) == auc(flat));
}

TEST_CASE("pixel_evaluate matches brute-force recomputation") {
    std::mt19937 rng(53);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 50; ++t) {
        auto pred = make_score_map(8, 8);
        BinaryMask gt{8, 8, std::vector<std::uint8_t>(64)};
        for (std::size_t i = 0; i < 64; ++i) {
            pred.values[i] = u(rng);
            gt.values[i] = u(rng) < 0.4;
        }
        auto m = pixel_evaluate(pred, gt);

        std::vector<ScoredLabel> flat(64);
        for (std::size_t i = 0; i < 64; ++i)
            flat[i] = {pred.values[i], gt.values[i]};
        auto oc = oracle_tally(flat, 0.5);
        auto om = threshold_metrics({static_cast<std::uint64_t>(oc.tp),
                                     static_cast<std::uint64_t>(oc.fp),
                                     static_cast<std::uint64_t>(oc.tn),
                                     static_cast<std::uint64_t>(oc.fn)});
        for (const char* name : {"ACC", "F1", "IoU", "MCC", "TNR", "TPR",
                                 "Precision", "Recall"})
            CHECK(m.get(name) == Catch::Approx(om.get(name)).margin(1e-12));

        bool pos = false, neg = false;
        for (auto v : gt.values) (v ? pos : neg) = true;
        if (pos && neg) {
            CHECK(m.get("AUC") == Catch::Approx(oracle_auc(flat)).margin(1e-12));
            CHECK(m.get("AP") == Catch::Approx(oracle_ap(flat)).margin(1e-12));
        } else {
            CHECK_FALSE(m.has("AUC"));
            CHECK_FALSE(m.has("AP"));
        }
    }
}

TEST_CASE("pixel_evaluate trivial cases") {
    auto pred = make_score_map(4, 4, 256);
    BinaryMask gt{4, 4, std::vector<std::uint8_t>(16, 0)};
    for (std::size_t i = 0; i < 8; ++i) gt.values[i] = 1;
    for (std::size_t i = 0; i < 16; ++i) pred.values[i] = gt.values[i];
    auto m = pixel_evaluate(pred, gt);
    CHECK(m.get("F1") == 1.0);
    CHECK(m.get("IoU") == 1.0);

    for (std::size_t i = 0; i < 16; ++i) pred.values[i] = 1.0 - gt.values[i];
    auto mc = pixel_evaluate(pred, gt);
    CHECK(mc.get("F1") == 0.0);
    CHECK(mc.get("ACC") == 0.0);

    // single-class ground truth omits ranking metrics
    BinaryMask allneg{4, 4, std::vector<std::uint8_t>(16, 0)};
    auto mn = pixel_evaluate(pred, allneg);
    CHECK_FALSE(mn.has("AUC"));
    CHECK(mn.has("ACC"));
}
