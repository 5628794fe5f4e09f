#pragma once

// Evaluation runner: pairs predictions with manifest records, scores every
// group of a resolved protocol, and serializes the result in a canonical
// form. All per-item work runs under parallel_for with one slot per item and
// a sequential index-order reduction, so the serialized result is
// byte-identical for any worker count. Wall-clock timings are kept out of
// the canonical form for the same reason; they travel in a sidecar.

#include <fbench/core.hpp>
#include <fbench/error.hpp>
#include <fbench/image.hpp>
#include <fbench/metrics.hpp>
#include <fbench/parallel.hpp>
#include <fbench/protocols.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace fbench {

enum class EvalMode { Image, Pixel, Both };
enum class PixelAveraging { PerImageMean, Pooled };

inline std::string_view to_string(EvalMode m) {
    switch (m) {
        case EvalMode::Image: return "image";
        case EvalMode::Pixel: return "pixel";
        case EvalMode::Both: return "both";
    }
    return "";
}

inline EvalMode eval_mode_from_string(std::string_view s) {
    if (s == "image") return EvalMode::Image;
    if (s == "pixel") return EvalMode::Pixel;
    if (s == "both") return EvalMode::Both;
    throw BenchError("UnknownMode", "unknown evaluation mode '" + std::string(s) + "'");
}

inline std::string_view to_string(PixelAveraging a) {
    return a == PixelAveraging::PerImageMean ? "per-image-mean" : "pooled";
}

inline PixelAveraging averaging_from_string(std::string_view s) {
    if (s == "per-image-mean") return PixelAveraging::PerImageMean;
    if (s == "pooled") return PixelAveraging::Pooled;
    throw BenchError("UnknownAveraging",
                     "unknown pixel averaging '" + std::string(s) + "'");
}

struct EvalOptions {
    EvalMode mode = EvalMode::Image;
    double threshold = kDefaultThreshold;
    PixelAveraging averaging = PixelAveraging::PerImageMean;
    std::filesystem::path data_root;  // base for record image/mask paths
    std::filesystem::path pred_root;  // base for prediction mask paths
    int workers = 1;
};

// ---------------------------------------------------------------------------
// Prediction alignment
// ---------------------------------------------------------------------------

// Reorders predictions to match `records` one-to-one by id. Extra
// predictions are tolerated (one file may cover several groups); absences
// and duplicates are not.
inline std::vector<PredictionRecord> align_predictions(
    const std::vector<PredictionRecord>& preds,
    const std::vector<SampleRecord>& records) {
    std::unordered_map<std::string_view, const PredictionRecord*> by_id;
    by_id.reserve(preds.size());
    for (const auto& p : preds)
        if (!by_id.emplace(p.sample_id, &p).second)
            throw BenchError("DuplicatePrediction",
                             "more than one prediction for id '" + p.sample_id + "'");
    std::vector<PredictionRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        const auto it = by_id.find(r.id);
        if (it == by_id.end())
            throw BenchError("MissingPrediction", "no prediction for id '" + r.id + "'");
        out.push_back(*it->second);
    }
    return out;
}

inline std::vector<PredictionRecord> load_predictions(
    const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BenchError("IoFailure", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return align_predictions(parse_predictions(buf.str()), manifest.records);
}

// ---------------------------------------------------------------------------
// Group evaluation
// ---------------------------------------------------------------------------

struct EvalPair {
    PredictionRecord pred;
    SampleRecord sample;
};

struct GroupEvaluation {
    MetricSet metrics;
    std::uint64_t images = 0;        // pairs evaluated at image level
    std::uint64_t pixel_images = 0;  // images entering the pixel average
    std::uint64_t pixels = 0;        // pixels behind the pixel-level numbers
};

namespace detail {

inline constexpr const char* kMetricOrder[] = {"ACC", "F1",  "IoU",       "MCC",
                                               "TNR", "TPR", "Precision", "Recall",
                                               "AUC", "AP"};

struct ItemStats {
    double image_score = 0.0;
    bool pixel_evaluated = false;
    MetricSet pixel_metrics;
    std::uint64_t pixels = 0;
    BinaryCounts pixel_counts;   // pooled averaging only
    ClassHistogram pixel_hist;   // pooled averaging only
};

inline ScoreMap load_prediction_map(const std::filesystem::path& pred_root,
                                    const PredictionRecord& pred) {
    if (!pred.mask_score_ref)
        throw BenchError("MissingMask",
                         "prediction for id '" + pred.sample_id +
                             "' carries no score map");
    return load_score_map(pred_root / *pred.mask_score_ref);
}

}  // namespace detail

inline GroupEvaluation evaluate_group(std::span<const EvalPair> pairs,
                                      const EvalOptions& options = {}) {
    const bool want_image =
        options.mode == EvalMode::Image || options.mode == EvalMode::Both;
    const bool want_pixel =
        options.mode == EvalMode::Pixel || options.mode == EvalMode::Both;

    std::vector<detail::ItemStats> slots(pairs.size());
    parallel_for(pairs.size(), options.workers, [&](std::size_t i) {
        const auto& [pred, sample] = pairs[i];
        auto& slot = slots[i];
        if (want_image) {
            if (pred.score)
                slot.image_score = *pred.score;
            else
                slot.image_score =
                    mask_to_label(detail::load_prediction_map(options.pred_root, pred));
        }
        if (want_pixel) {
            if (!sample.mask) {
                if (sample.label == 1)
                    throw BenchError("MissingMask",
                                     "manipulated sample '" + sample.id +
                                         "' has no ground-truth mask");
                return;  // authentic samples stay out of pixel averaging
            }
            const BinaryMask gt =
                binarize_mask(load_pgm(options.data_root / *sample.mask));
            std::uint64_t marked = 0;
            for (auto v : gt.values) marked += v;
            if (marked == 0) return;  // empty mask: nothing to localize
            const ScoreMap map = detail::load_prediction_map(options.pred_root, pred);
            slot.pixel_evaluated = true;
            slot.pixels = map.size();
            if (options.averaging == PixelAveraging::PerImageMean) {
                slot.pixel_metrics = pixel_evaluate(map, gt, options.threshold);
            } else {
                if (map.levels != 256 && map.levels != 65536)
                    throw BenchError("UnquantizedMap",
                                     "pooled averaging needs quantized score maps, id '" +
                                         sample.id + "'");
                slot.pixel_counts = confusion_from_masks(map, gt, options.threshold);
                slot.pixel_hist = make_histogram(map.levels);
                accumulate_histogram(slot.pixel_hist, map, gt);
            }
        }
    });

    // Reduction walks slots in index order so results never depend on thread
    // scheduling.
    GroupEvaluation out;
    out.images = pairs.size();
    const char* image_prefix = options.mode == EvalMode::Both ? "image_" : "";
    const char* pixel_prefix = options.mode == EvalMode::Both ? "pixel_" : "";

    if (want_image) {
        std::vector<ScoredLabel> items(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i)
            items[i] = {slots[i].image_score, pairs[i].sample.label};
        const MetricSet m =
            threshold_metrics(confusion_from_scores(items, options.threshold));
        for (const auto& [name, value] : m.values)
            out.metrics.set(image_prefix + std::string(name), value);
        std::uint64_t pos = 0;
        for (const auto& it : items) pos += it.label == 1;
        if (pos > 0 && pos < items.size()) {
            out.metrics.set(image_prefix + std::string("AUC"), auc(items));
            out.metrics.set(image_prefix + std::string("AP"), average_precision(items));
        }
    }

    if (want_pixel) {
        for (const auto& s : slots) {
            out.pixel_images += s.pixel_evaluated;
            out.pixels += s.pixels;
        }
        if (options.averaging == PixelAveraging::PerImageMean) {
            for (const char* name : detail::kMetricOrder) {
                double sum = 0.0;
                std::uint64_t n = 0;
                for (const auto& s : slots) {
                    if (!s.pixel_evaluated || !s.pixel_metrics.has(name)) continue;
                    sum += s.pixel_metrics.get(name);
                    ++n;
                }
                if (n > 0)
                    out.metrics.set(pixel_prefix + std::string(name),
                                    sum / static_cast<double>(n));
            }
        } else {
            BinaryCounts pooled;
            ClassHistogram hist;
            bool any = false;
            for (const auto& s : slots) {
                if (!s.pixel_evaluated) continue;
                any = true;
                pooled = merge_counts(pooled, s.pixel_counts);
                hist = merge_histograms(hist, s.pixel_hist);
            }
            if (any) {
                const MetricSet m = threshold_metrics(pooled);
                for (const auto& [name, value] : m.values)
                    out.metrics.set(pixel_prefix + std::string(name), value);
                if (hist.pos_total() > 0 && hist.neg_total() > 0) {
                    out.metrics.set(pixel_prefix + std::string("AUC"), auc(hist));
                    out.metrics.set(pixel_prefix + std::string("AP"),
                                    average_precision(hist));
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whole-run evaluation
// ---------------------------------------------------------------------------

struct GroupResult {
    std::string name;
    MetricSet metrics;
    std::uint64_t images = 0;
    std::uint64_t pixel_images = 0;
    std::uint64_t pixels = 0;
};

struct RunResult {
    std::string protocol;
    std::string fingerprint;
    std::vector<GroupResult> groups;
    // Stage timings in seconds. Deliberately absent from the canonical
    // serialization: two runs that score identically must serialize
    // identically.
    std::vector<std::pair<std::string, double>> timing;
};

// FNV-1a over the configuration text; pins a result file to the exact
// configuration that produced it.
inline std::string fingerprint_of(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[h & 0xf];
        h >>= 4;
    }
    return out;
}

using PredictionSource =
    std::function<std::vector<PredictionRecord>(const ResolvedGroup&)>;

inline RunResult evaluate_run(const ResolvedProtocol& resolved,
                              const PredictionSource& source,
                              const EvalOptions& options = {},
                              std::string fingerprint = "") {
    using clock = std::chrono::steady_clock;
    const auto seconds_since = [](clock::time_point start) {
        return std::chrono::duration<double>(clock::now() - start).count();
    };
    RunResult out;
    out.protocol = resolved.name;
    out.fingerprint = std::move(fingerprint);
    const auto run_start = clock::now();
    for (const auto& group : resolved.groups) {
        const auto group_start = clock::now();
        GroupEvaluation ev;
        try {
            const auto preds = align_predictions(source(group), group.records);
            std::vector<EvalPair> pairs(group.records.size());
            for (std::size_t i = 0; i < pairs.size(); ++i)
                pairs[i] = {preds[i], group.records[i]};
            ev = evaluate_group(pairs, options);
        } catch (const BenchError& e) {
            throw EvalError(e.code(), "group '" + group.name + "': " + e.message());
        }
        out.groups.push_back({group.name, std::move(ev.metrics), ev.images,
                              ev.pixel_images, ev.pixels});
        out.timing.emplace_back("evaluate:" + group.name, seconds_since(group_start));
    }
    out.timing.emplace_back("total", seconds_since(run_start));
    return out;
}

inline RunResult evaluate_run(
    const ResolvedProtocol& resolved,
    const std::map<std::string, std::vector<PredictionRecord>>& by_group,
    const EvalOptions& options = {}, std::string fingerprint = "") {
    return evaluate_run(
        resolved,
        [&](const ResolvedGroup& g) -> std::vector<PredictionRecord> {
            const auto it = by_group.find(g.name);
            if (it == by_group.end())
                throw BenchError("MissingPrediction", "no predictions supplied");
            return it->second;
        },
        options, std::move(fingerprint));
}

// ---------------------------------------------------------------------------
// Result serialization
// ---------------------------------------------------------------------------

inline std::string serialize_run_result(const RunResult& r) {
    ordered_json j;
    j["protocol"] = r.protocol;
    j["fingerprint"] = r.fingerprint;
    j["groups"] = ordered_json::array();
    for (const auto& g : r.groups) {
        ordered_json jg;
        jg["name"] = g.name;
        jg["images"] = g.images;
        jg["pixel_images"] = g.pixel_images;
        jg["pixels"] = g.pixels;
        ordered_json metrics = ordered_json::object();
        for (const auto& [name, value] : g.metrics.values) metrics[name] = value;
        jg["metrics"] = std::move(metrics);
        j["groups"].push_back(std::move(jg));
    }
    return j.dump() + "\n";
}

inline std::string serialize_run_timing(const RunResult& r) {
    ordered_json j;
    for (const auto& [stage, secs] : r.timing) j[stage] = secs;
    return j.dump() + "\n";
}

inline RunResult parse_run_result(const std::string& text) {
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw BenchError("ResultParse", "run result is not a JSON object");
    static constexpr const char* kResultKeys[] = {"protocol", "fingerprint",
                                                  "groups"};
    detail::reject_unknown_keys(j, kResultKeys, "run result");
    RunResult r;
    r.protocol = j.at("protocol").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    static constexpr const char* kGroupKeys[] = {"name", "images", "pixel_images",
                                                 "pixels", "metrics"};
    for (const auto& jg : j.at("groups")) {
        detail::reject_unknown_keys(jg, kGroupKeys, "run result group");
        GroupResult g;
        g.name = jg.at("name").get<std::string>();
        g.images = jg.at("images").get<std::uint64_t>();
        g.pixel_images = jg.at("pixel_images").get<std::uint64_t>();
        g.pixels = jg.at("pixels").get<std::uint64_t>();
        for (const auto& [name, value] : jg.at("metrics").items())
            g.metrics.set(name, value.get<double>());
        r.groups.push_back(std::move(g));
    }
    return r;
}

inline void save_run_result(const std::filesystem::path& path, const RunResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BenchError("IoFailure", "cannot write " + path.string());
    out << serialize_run_result(r);
}

inline RunResult load_run_result(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BenchError("IoFailure", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_result(buf.str());
}

}  // namespace fbench
