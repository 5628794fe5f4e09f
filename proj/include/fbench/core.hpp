#pragma once

// Universal data vocabulary: samples, manifests and predictions.
// Manifests are line-delimited JSON (one header line, one record per line)
// with a fixed key order so that serialization is byte-stable.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fbench/error.hpp"

namespace fbench {

using ordered_json = nlohmann::ordered_json;

enum class Domain { Deepfake, Imdl, Aigc, Document };
inline constexpr Domain kAllDomains[] = {Domain::Deepfake, Domain::Imdl,
                                         Domain::Aigc, Domain::Document};

enum class Split { Train, Val, Test };

inline std::string_view to_string(Domain d) {
    switch (d) {
        case Domain::Deepfake: return "deepfake";
        case Domain::Imdl: return "imdl";
        case Domain::Aigc: return "aigc";
        case Domain::Document: return "document";
    }
    throw BenchError("UnknownDomain", "invalid domain enum value");
}

inline Domain domain_from_string(std::string_view s) {
    if (s == "deepfake") return Domain::Deepfake;
    if (s == "imdl") return Domain::Imdl;
    if (s == "aigc") return Domain::Aigc;
    if (s == "document") return Domain::Document;
    throw BenchError("UnknownDomain", "not a domain: '" + std::string(s) + "'");
}

inline std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    throw BenchError("UnknownSplit", "invalid split enum value");
}

inline Split split_from_string(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw BenchError("UnknownSplit", "not a split: '" + std::string(s) + "'");
}

// One image with label, optional mask and provenance. Paths are relative to
// the dataset root so manifests stay relocatable.
struct SampleRecord {
    std::string id;
    std::string image;
    int label = 0;  // 0 = authentic, 1 = fake
    std::optional<std::string> mask;
    Domain domain = Domain::Deepfake;
    std::string dataset;
    Split split = Split::Train;
    std::optional<int> orig_w;  // pre-padding size, set when a tile was padded
    std::optional<int> orig_h;

    bool operator==(const SampleRecord&) const = default;
};

struct AnnotationSet {
    bool label = false;
    bool mask = false;
    bool operator==(const AnnotationSet&) const = default;
};

struct DatasetManifest {
    std::string name;
    Domain domain = Domain::Deepfake;
    std::vector<SampleRecord> records;
    std::uint64_t real_count = 0;
    std::uint64_t fake_count = 0;
    AnnotationSet annotation;
};

// sample_id must resolve against the evaluation manifest. Mask-only models
// carry no scalar score; evaluation derives one by max-pooling the map.
struct PredictionRecord {
    std::string sample_id;
    std::optional<double> score;
    std::optional<std::string> mask_score_ref;

    bool operator==(const PredictionRecord&) const = default;
};

inline SampleRecord make_sample(std::string id, std::string image, int label,
                                Domain domain, std::string dataset, Split split,
                                std::optional<std::string> mask = std::nullopt) {
    if (id.empty())
        throw BenchError("EmptyId", "sample id must be non-empty");
    if (label != 0 && label != 1)
        throw BenchError("InvalidLabel",
                         "label must be 0 or 1, got " + std::to_string(label));
    SampleRecord r;
    r.id = std::move(id);
    r.image = std::move(image);
    r.label = label;
    r.mask = std::move(mask);
    r.domain = domain;
    r.dataset = std::move(dataset);
    r.split = split;
    return r;
}

inline AnnotationSet annotation_of(const std::vector<SampleRecord>& records) {
    AnnotationSet a;
    a.label = true;  // every record carries a label in this schema
    for (const auto& r : records)
        if (r.mask) { a.mask = true; break; }
    return a;
}

// Builds a manifest with counts and annotation derived from the records.
inline DatasetManifest make_manifest(std::string name, Domain domain,
                                     std::vector<SampleRecord> records) {
    DatasetManifest m;
    m.name = std::move(name);
    m.domain = domain;
    m.records = std::move(records);
    for (const auto& r : m.records)
        (r.label == 0 ? m.real_count : m.fake_count)++;
    m.annotation = annotation_of(m.records);
    return m;
}

namespace detail {

inline ordered_json annotation_json(const AnnotationSet& a) {
    ordered_json arr = ordered_json::array();
    if (a.label) arr.push_back("label");
    if (a.mask) arr.push_back("mask");
    return arr;
}

inline AnnotationSet annotation_from_json(const ordered_json& arr) {
    if (!arr.is_array())
        throw BenchError("ManifestParse", "annotation must be an array");
    AnnotationSet a;
    for (const auto& v : arr) {
        const std::string s = v.get<std::string>();
        if (s == "label") a.label = true;
        else if (s == "mask") a.mask = true;
        else throw BenchError("ManifestParse", "unknown annotation '" + s + "'");
    }
    return a;
}

template <typename Allowed>
inline void reject_unknown_keys(const ordered_json& obj, const Allowed& allowed,
                                const char* what) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const auto& a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok)
            throw BenchError("ManifestParse",
                             std::string(what) + " has unknown key '" + key + "'");
    }
}

}  // namespace detail

inline ordered_json record_to_json(const SampleRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["image"] = r.image;
    j["label"] = r.label;
    if (r.mask) j["mask"] = *r.mask;
    j["domain"] = std::string(to_string(r.domain));
    j["dataset"] = r.dataset;
    j["split"] = std::string(to_string(r.split));
    if (r.orig_w) j["orig_w"] = *r.orig_w;
    if (r.orig_h) j["orig_h"] = *r.orig_h;
    return j;
}

inline SampleRecord record_from_json(const ordered_json& j) {
    static constexpr const char* kKeys[] = {"id",     "image",   "label",
                                            "mask",   "domain",  "dataset",
                                            "split",  "orig_w",  "orig_h"};
    if (!j.is_object())
        throw BenchError("ManifestParse", "record line is not an object");
    detail::reject_unknown_keys(j, kKeys, "record");
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.image = j.at("image").get<std::string>();
    r.label = j.at("label").get<int>();
    if (r.id.empty()) throw BenchError("EmptyId", "record has empty id");
    if (r.label != 0 && r.label != 1)
        throw BenchError("InvalidLabel", "record label out of {0,1}");
    if (j.contains("mask")) r.mask = j.at("mask").get<std::string>();
    r.domain = domain_from_string(j.at("domain").get<std::string>());
    r.dataset = j.at("dataset").get<std::string>();
    r.split = split_from_string(j.at("split").get<std::string>());
    if (j.contains("orig_w")) r.orig_w = j.at("orig_w").get<int>();
    if (j.contains("orig_h")) r.orig_h = j.at("orig_h").get<int>();
    return r;
}

inline std::string serialize_manifest(const DatasetManifest& m) {
    std::string out;
    ordered_json header;
    header["name"] = m.name;
    header["domain"] = std::string(to_string(m.domain));
    header["real_count"] = m.real_count;
    header["fake_count"] = m.fake_count;
    header["annotation"] = detail::annotation_json(m.annotation);
    out += header.dump();
    out += '\n';
    for (const auto& r : m.records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

inline DatasetManifest parse_manifest(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line))
        throw BenchError("ManifestParse", "empty manifest");

    ordered_json header = ordered_json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object())
        throw BenchError("ManifestParse", "header line is not a JSON object");
    static constexpr const char* kHeaderKeys[] = {"name", "domain", "real_count",
                                                  "fake_count", "annotation"};
    detail::reject_unknown_keys(header, kHeaderKeys, "header");

    DatasetManifest m;
    m.name = header.at("name").get<std::string>();
    m.domain = domain_from_string(header.at("domain").get<std::string>());
    m.real_count = header.at("real_count").get<std::uint64_t>();
    m.fake_count = header.at("fake_count").get<std::uint64_t>();
    m.annotation = detail::annotation_from_json(header.at("annotation"));

    std::size_t line_no = 1;
    std::uint64_t real = 0, fake = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw BenchError("ManifestParse",
                             "line " + std::to_string(line_no) + " is not valid JSON");
        SampleRecord r = record_from_json(j);
        (r.label == 0 ? real : fake)++;
        m.records.push_back(std::move(r));
    }
    if (real != m.real_count || fake != m.fake_count)
        throw BenchError("CountMismatch",
                         "header says " + std::to_string(m.real_count) + "/" +
                             std::to_string(m.fake_count) + " real/fake, records have " +
                             std::to_string(real) + "/" + std::to_string(fake));
    if (m.annotation != annotation_of(m.records))
        throw BenchError("AnnotationMismatch",
                         "header annotation does not match records");
    return m;
}

inline ordered_json prediction_to_json(const PredictionRecord& p) {
    ordered_json j;
    j["id"] = p.sample_id;
    if (p.score) j["score"] = *p.score;
    if (p.mask_score_ref) j["mask"] = *p.mask_score_ref;
    return j;
}

inline PredictionRecord prediction_from_json(const ordered_json& j) {
    static constexpr const char* kKeys[] = {"id", "score", "mask"};
    if (!j.is_object())
        throw BenchError("PredictionParse", "prediction line is not an object");
    detail::reject_unknown_keys(j, kKeys, "prediction");
    PredictionRecord p;
    p.sample_id = j.at("id").get<std::string>();
    if (p.sample_id.empty()) throw BenchError("EmptyId", "prediction has empty id");
    if (j.contains("score")) {
        p.score = j.at("score").get<double>();
        if (!(*p.score >= 0.0 && *p.score <= 1.0))
            throw BenchError("ScoreOutOfRange",
                             "score for '" + p.sample_id + "' outside [0,1]");
    }
    if (j.contains("mask")) p.mask_score_ref = j.at("mask").get<std::string>();
    if (!p.score && !p.mask_score_ref)
        throw BenchError("PredictionParse",
                         "prediction for '" + p.sample_id +
                             "' carries neither score nor mask");
    return p;
}

inline std::string serialize_predictions(const std::vector<PredictionRecord>& preds) {
    std::string out;
    for (const auto& p : preds) {
        out += prediction_to_json(p).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<PredictionRecord> parse_predictions(std::string_view text) {
    std::vector<PredictionRecord> preds;
    std::unordered_set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw BenchError("PredictionParse",
                             "line " + std::to_string(line_no) + " is not valid JSON");
        PredictionRecord p = prediction_from_json(j);
        if (!seen.insert(p.sample_id).second)
            throw BenchError("DuplicatePrediction",
                             "id '" + p.sample_id + "' predicted twice");
        preds.push_back(std::move(p));
    }
    return preds;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw BenchError("IoFailure", "cannot write " + path.string());
    out << serialize_manifest(m);
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw BenchError("IoFailure", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_manifest(buf.str());
    } catch (const BenchError& e) {
        throw BenchError(e.code(), path.string() + ": " + e.message());
    }
}

}  // namespace fbench
