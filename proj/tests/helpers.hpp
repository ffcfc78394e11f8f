#pragma once

// Shared test fixtures: unique temp directories and small table builders.

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "symscope/rng.hpp"
#include "symscope/scoretable.hpp"

namespace testutil {

inline int next_dir_id() {
    static std::atomic<int> counter{0};
    return counter.fetch_add(1);
}

// Fresh directory under the system temp root, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("symscope_test_" + tag + "_" + std::to_string(next_dir_id()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

// Random score table with every column guaranteed nonconstant.
inline symscope::ScoreTable random_table(std::size_t n, std::uint64_t seed,
                                         const std::string& source = "model",
                                         bool with_mask = false) {
    symscope::ScoreTable t;
    t.source = source;
    symscope::Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        t.row_ids.push_back("r" + std::to_string(i));
        std::array<int, symscope::kNumSymptoms> row{};
        for (auto& v : row) v = static_cast<int>(rng.uniform_int(4));
        t.matrix.push_back(row);
        if (with_mask) {
            std::array<bool, symscope::kNumSymptoms> m{};
            for (auto& b : m) b = rng.bernoulli(0.5);
            t.explicit_mask.push_back(m);
        }
    }
    for (std::size_t j = 0; j < symscope::kNumSymptoms && n >= 2; ++j) {
        t.matrix[0][j] = 0;
        t.matrix[1][j] = 3;
    }
    symscope::refresh_totals(t);
    return t;
}

}  // namespace testutil
