// SPDX-License-Identifier: Apache-2.0
#include "kie/text_embedder.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "kie/rng.hpp"

namespace kie {

namespace {

std::vector<std::string_view> split_whitespace(std::string_view text) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (j > i) tokens.push_back(text.substr(i, j - i));
        i = j;
    }
    return tokens;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

TextEmbedder TextEmbedder::hashed(std::uint64_t seed) {
    TextEmbedder e;
    e.mode_ = Mode::HashedTrigram;
    e.seed_ = seed;
    e.projection_.resize(kTrigramBins, kEmbeddingDim);
    Rng rng(seed);
    for (int r = 0; r < kTrigramBins; ++r) {
        for (int c = 0; c < kEmbeddingDim; ++c) e.projection_(r, c) = rng.uniform(-1.0, 1.0);
    }
    return e;
}

TextEmbedder TextEmbedder::from_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding table " + path.string());
    TextEmbedder e;
    e.mode_ = Mode::ExternalTable;
    e.table_path_ = path.string();

    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string token;
        if (!(ls >> token)) continue;
        std::vector<double> values;
        double v;
        while (ls >> v) values.push_back(v);
        if (values.size() == 1) continue;  // word2vec "count dim" header
        if (values.size() != static_cast<std::size_t>(kEmbeddingDim)) {
            throw std::runtime_error("embedding table row for '" + token + "' has " +
                                     std::to_string(values.size()) + " values, expected 300");
        }
        e.table_.insert_or_assign(token, Eigen::Map<Eigen::VectorXd>(values.data(), kEmbeddingDim));
    }
    return e;
}

Eigen::VectorXd TextEmbedder::embed_token(std::string_view token) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(kEmbeddingDim);
    if (token.empty()) return out;

    if (mode_ == Mode::ExternalTable) {
        auto it = table_.find(std::string(token));
        if (it != table_.end()) out = it->second;
        return out;
    }

    std::string padded;
    padded.reserve(token.size() + 2);
    padded.push_back('<');
    padded.append(token);
    padded.push_back('>');

    std::vector<int> counts(kTrigramBins, 0);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        const auto bin = fnv1a64(std::string_view(padded).substr(i, 3)) % kTrigramBins;
        ++counts[bin];
    }
    // Sparse accumulation in bin order keeps the sum order fixed.
    for (int bin = 0; bin < kTrigramBins; ++bin) {
        if (counts[bin] == 0) continue;
        out += static_cast<double>(counts[bin]) * projection_.row(bin).transpose();
    }
    const double norm = out.norm();
    if (norm > 0.0) out /= norm;
    return out;
}

Eigen::VectorXd TextEmbedder::embed(std::string_view text) const {
    const auto tokens = split_whitespace(text);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(kEmbeddingDim);
    if (tokens.empty()) return sum;
    for (auto t : tokens) sum += embed_token(t);
    return sum / static_cast<double>(tokens.size());
}

}  // namespace kie
