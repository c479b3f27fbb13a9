#pragma once

// Paths to the shipped fixtures and small builders shared by the tests.

#include "annotation.hpp"
#include "core_model.hpp"
#include "gold_cg.hpp"
#include "retrieval.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#ifndef CGROUND_TEST_DATA
#error "CGROUND_TEST_DATA must point at tests/data"
#endif

namespace fixtures {

inline std::filesystem::path data(const std::string& name) {
    return std::filesystem::path(CGROUND_TEST_DATA) / name;
}

/// The 15-conversation dataset enriched with gold CG and docs.
inline std::vector<cground::Conversation> oracle_dataset() {
    return cground::load_dataset(data("oracle_dataset.jsonl"));
}

inline const cground::Bm25Index& passage_index() {
    static const cground::Bm25Index index =
        cground::Bm25Index::build(cground::load_passages(data("passages.jsonl")));
    return index;
}

inline std::vector<std::string> surfaces(const std::vector<cground::Proposition>& props) {
    std::vector<std::string> out;
    for (const auto& p : props) out.push_back(p.surface());
    return out;
}

inline std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

inline std::vector<cground::Proposition> propositions_of(const std::string& text) {
    static const cground::ReferenceAnnotator annotator;
    return cground::extract_propositions(annotator.annotate(text), 0);
}

/// A unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0;; ++i) {
            path_ = base / ("cground-test-" + std::to_string(::getpid()) + "-" + std::to_string(i));
            if (std::filesystem::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace fixtures
