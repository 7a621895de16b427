// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>

#include <Eigen/Dense>

namespace kie {

inline constexpr int kEmbeddingDim = 300;
inline constexpr int kTrigramBins = 1024;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Frozen text embedding: the average of per-token vectors.
///
/// HashedTrigram tokens are padded as "<tok>", cut into byte trigrams, hashed
/// into 1024 count bins and projected through a seeded 1024x300 uniform(-1,1)
/// matrix, then L2-normalized. ExternalTable looks tokens up in a word2vec
/// text table and uses the zero vector for unknown tokens.
class TextEmbedder {
public:
    enum class Mode { HashedTrigram, ExternalTable };

    static TextEmbedder hashed(std::uint64_t seed);
    static TextEmbedder from_table(const std::filesystem::path& path);

    Mode mode() const { return mode_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& table_path() const { return table_path_; }

    Eigen::VectorXd embed(std::string_view text) const;
    Eigen::VectorXd embed_token(std::string_view token) const;

private:
    TextEmbedder() = default;

    Mode mode_ = Mode::HashedTrigram;
    std::uint64_t seed_ = 0;
    Eigen::MatrixXd projection_;  // kTrigramBins x kEmbeddingDim
    std::unordered_map<std::string, Eigen::VectorXd> table_;
    std::string table_path_;
};

}  // namespace kie
