#pragma once

// Adapters from on-disk dataset layouts to manifests, plus the frame
// sampling arithmetic that turns a video into a fixed number of stills.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "fbench/core.hpp"
#include "fbench/image.hpp"

namespace fbench {

namespace fs = std::filesystem;

enum class LayoutKind { PairedDirs, FlatWithIndex };

// All paths are relative to the dataset root handed to ingest_dataset.
struct LayoutSpec {
    LayoutKind kind = LayoutKind::PairedDirs;
    std::optional<std::string> real_dir;
    std::optional<std::string> fake_dir;
    std::optional<std::string> index_file;
    std::optional<std::string> mask_dir;
    std::string mask_suffix = "_mask";
};

namespace detail {

inline bool looks_like_image(const fs::path& p) {
    static const char* kExts[] = {".pgm", ".ppm", ".png", ".jpg",
                                  ".jpeg", ".bmp", ".tif", ".tiff"};
    const std::string ext = p.extension().string();
    for (auto* e : kExts)
        if (ext == e) return true;
    return false;
}

inline std::string strip_extension(const std::string& rel) {
    const auto dot = rel.rfind('.');
    const auto slash = rel.rfind('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return rel;
    return rel.substr(0, dot);
}

inline std::vector<std::string> list_images(const fs::path& root,
                                            const std::string& rel_dir) {
    const fs::path dir = root / rel_dir;
    if (!fs::is_directory(dir))
        throw BenchError("LayoutMismatch", "not a directory: " + dir.string());
    std::vector<std::string> rels;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || !looks_like_image(entry.path())) continue;
        rels.push_back(fs::relative(entry.path(), root).generic_string());
    }
    std::sort(rels.begin(), rels.end());
    return rels;
}

inline void check_layout_fields(const LayoutSpec& layout) {
    if (layout.kind == LayoutKind::PairedDirs) {
        if (!layout.real_dir || !layout.fake_dir || layout.index_file)
            throw BenchError("LayoutMismatch",
                             "paired layout needs real_dir and fake_dir only");
    } else {
        if (!layout.index_file || layout.real_dir || layout.fake_dir ||
            layout.mask_dir)
            throw BenchError("LayoutMismatch",
                             "indexed layout needs index_file only");
    }
}

// Splits one CSV row; the format has no quoting or escapes.
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// Scans a dataset tree and emits one record per image, ordered
// lexicographically by root-relative path so repeat runs are byte-identical.
inline DatasetManifest ingest_dataset(const fs::path& root, const LayoutSpec& layout,
                                      const std::string& name, Domain domain,
                                      Split split) {
    detail::check_layout_fields(layout);
    if (!fs::is_directory(root))
        throw BenchError("LayoutMismatch", "dataset root missing: " + root.string());

    std::vector<SampleRecord> records;
    if (layout.kind == LayoutKind::PairedDirs) {
        for (int label : {0, 1}) {
            const std::string& dir = label == 0 ? *layout.real_dir : *layout.fake_dir;
            for (const auto& rel : detail::list_images(root, dir)) {
                auto rec = make_sample(detail::strip_extension(rel), rel, label,
                                       domain, name, split);
                if (label == 1 && layout.mask_dir) {
                    const fs::path img_rel =
                        fs::relative(root / rel, root / dir);
                    fs::path mask_rel = fs::path(*layout.mask_dir) / img_rel;
                    mask_rel.replace_filename(mask_rel.stem().string() +
                                              layout.mask_suffix + ".pgm");
                    if (!fs::is_regular_file(root / mask_rel))
                        throw BenchError("DanglingMask",
                                         "no mask for " + rel + " at " +
                                             mask_rel.generic_string());
                    rec.mask = mask_rel.generic_string();
                }
                records.push_back(std::move(rec));
            }
        }
    } else {
        const fs::path index = root / *layout.index_file;
        std::ifstream in(index);
        if (!in)
            throw BenchError("LayoutMismatch", "index file missing: " + index.string());
        std::string line;
        if (!std::getline(in, line))
            throw BenchError("IndexParse", index.string() + ": empty index");
        auto header = detail::split_csv(line);
        const bool has_mask_col =
            header.size() == 3 && header[2] == "mask";
        if (!(header.size() >= 2 && header[0] == "image" && header[1] == "label") ||
            (header.size() == 3 && !has_mask_col) || header.size() > 3)
            throw BenchError("IndexParse",
                             index.string() + ": header must be image,label[,mask]");
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r") continue;
            auto cols = detail::split_csv(line);
            if (cols.size() < 2 || cols.size() > (has_mask_col ? 3u : 2u))
                throw BenchError("IndexParse", index.string() + ":" +
                                                   std::to_string(line_no) +
                                                   ": wrong column count");
            if (cols[1] != "0" && cols[1] != "1")
                throw BenchError("InvalidLabel", index.string() + ":" +
                                                     std::to_string(line_no) +
                                                     ": label must be 0 or 1");
            auto rec = make_sample(detail::strip_extension(cols[0]), cols[0],
                                   cols[1] == "1" ? 1 : 0, domain, name, split);
            if (cols.size() == 3 && !cols[2].empty()) {
                if (!fs::is_regular_file(root / cols[2]))
                    throw BenchError("DanglingMask",
                                     "no mask for " + cols[0] + " at " + cols[2]);
                rec.mask = cols[2];
            }
            records.push_back(std::move(rec));
        }
        std::sort(records.begin(), records.end(),
                  [](const SampleRecord& a, const SampleRecord& b) {
                      return a.image < b.image;
                  });
    }
    return make_manifest(name, domain, std::move(records));
}

// Equally spaced frame picks with inclusive endpoints:
// round(i*(T-1)/(k-1)), computed in integers so rounding is exactly half-up.
inline std::vector<int> frame_indices(int total_frames, int k = 32) {
    if (total_frames < 1 || k < 1)
        throw BenchError("BadFrameRequest", "need total_frames >= 1 and k >= 1");
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    if (k == 1 || total_frames == 1) return idx;
    const std::int64_t span = total_frames - 1, steps = k - 1;
    for (int i = 0; i < k; ++i)
        idx[static_cast<std::size_t>(i)] =
            static_cast<int>((2 * i * span + steps) / (2 * steps));
    return idx;
}

// Union of datasets from one domain; ids gain a "<source>/" prefix so the
// merged namespace stays collision-free.
inline DatasetManifest merge_manifests(const std::vector<DatasetManifest>& manifests,
                                       const std::string& name) {
    if (manifests.empty())
        throw BenchError("EmptyInput", "nothing to merge");
    const Domain domain = manifests.front().domain;
    std::vector<SampleRecord> records;
    for (const auto& m : manifests) {
        if (m.domain != domain)
            throw BenchError("DomainMismatch",
                             "manifest '" + m.name + "' is " +
                                 std::string(to_string(m.domain)) + ", expected " +
                                 std::string(to_string(domain)));
        for (SampleRecord r : m.records) {
            r.id = m.name + "/" + r.id;
            records.push_back(std::move(r));
        }
    }
    return make_manifest(name, domain, std::move(records));
}

struct ValidationIssue {
    std::string code;  // MissingImage, MissingMask, DuplicateId, ...
    std::string id;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

// Non-throwing consistency audit of a manifest against the files it names.
inline ValidationReport validate_manifest(const DatasetManifest& m,
                                          const fs::path& root) {
    ValidationReport rep;
    const auto add = [&](std::string code, const std::string& id, std::string detail) {
        rep.issues.push_back({std::move(code), id, std::move(detail)});
    };

    std::unordered_set<std::string> seen;
    std::uint64_t real = 0, fake = 0;
    for (const auto& r : m.records) {
        (r.label == 0 ? real : fake)++;
        if (!seen.insert(r.id).second) add("DuplicateId", r.id, "id appears twice");
        if (!fs::is_regular_file(root / r.image))
            add("MissingImage", r.id, r.image);
        if (r.mask) {
            if (!fs::is_regular_file(root / *r.mask)) {
                add("MissingMask", r.id, *r.mask);
            } else {
                bool manipulated = false;
                try {
                    const Image mask = load_pgm(root / *r.mask);
                    for (auto v : mask.pixels)
                        if (v > 127) { manipulated = true; break; }
                } catch (const BenchError& e) {
                    add("MissingMask", r.id, std::string("unreadable: ") + e.what());
                    continue;
                }
                if (r.label == 0 && manipulated)
                    add("LabelMaskContradiction", r.id,
                        "authentic label but mask marks manipulated pixels");
                if (r.label == 1 && !manipulated)
                    add("LabelMaskContradiction", r.id,
                        "fake label but mask marks nothing");
            }
        }
    }
    if (real != m.real_count || fake != m.fake_count)
        add("CountMismatch", "",
            "header " + std::to_string(m.real_count) + "/" +
                std::to_string(m.fake_count) + " vs records " + std::to_string(real) +
                "/" + std::to_string(fake));
    if (m.annotation != annotation_of(m.records))
        add("AnnotationMismatch", "", "header annotation does not match records");
    return rep;
}

}  // namespace fbench
