// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hfdiff/image.hpp"
#include "hfdiff/random.hpp"
#include "hfdiff/tensor.hpp"

namespace hfdiff {

// ---------------------------------------------------------------------------
// Auxiliary prompt
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSemanticQuery = "Describe this image and its style in a very detailed manner";
inline constexpr std::string_view kDefectQuery = "Introduce the drawback of the image";

/// Semantic response followed by the defect response, joined by one space.
/// An empty side contributes nothing (no stray separator).
std::string build_auxiliary_prompt(std::string_view semantic, std::string_view defect);

/// Answers a free-text query about an image. Implementations must be deterministic
/// and safe to call concurrently.
class AuxiliaryProvider {
public:
    virtual ~AuxiliaryProvider() = default;
    virtual std::string query(const ImageBuffer& image, std::string_view query_text) const = 0;
};

struct CannedResponse {
    std::string semantic;
    std::string defect;
};

/// Task tag -> (semantic caption, defect description).
class CannedResponseTable {
public:
    /// Table covering every task the forge produces.
    static CannedResponseTable builtin();
    /// JSON object: {"<task>": {"semantic": "...", "defect": "..."}, ...}.
    static CannedResponseTable load(const std::filesystem::path& path);

    void set(std::string task, CannedResponse response);
    bool contains(std::string_view task) const;
    /// Composite tags ("a+b+c") join the component defects; the semantic caption
    /// comes from the first component.
    CannedResponse lookup(std::string_view task) const;
    const std::map<std::string, CannedResponse, std::less<>>& entries() const { return entries_; }

private:
    std::map<std::string, CannedResponse, std::less<>> entries_;
};

/// Stand-in for a vision-language model: routes the semantic and defect queries to
/// the canned strings for one task tag. Any other query is rejected.
class CannedAuxiliaryProvider final : public AuxiliaryProvider {
public:
    CannedAuxiliaryProvider(CannedResponseTable table, std::string task);
    std::string query(const ImageBuffer& image, std::string_view query_text) const override;

private:
    CannedResponseTable table_;
    std::string task_;
};

/// Queries the provider with both fixed questions and assembles the auxiliary prompt.
std::string auxiliary_prompt(const AuxiliaryProvider& provider, const ImageBuffer& image);

// ---------------------------------------------------------------------------
// Toy text tower
// ---------------------------------------------------------------------------

inline constexpr std::size_t kVocabBuckets = 4096;
inline constexpr std::size_t kMaxTokens = 16;

/// Lowercased whitespace-separated tokens.
std::vector<std::string> tokenize(std::string_view text);
/// FNV-1a bucket of each token, truncated to kMaxTokens.
std::vector<std::size_t> token_buckets(std::string_view text);

struct PromptEmbedding {
    Tensor tokens;  // [kMaxTokens, dim]
    bool is_null = false;
};

/// Frozen hashed embedding table. Padding positions are zero vectors; empty text maps
/// to the null sequence.
class TextEncoder {
public:
    TextEncoder() = default;
    TextEncoder(Tensor table, Tensor null_tokens);
    static TextEncoder random(std::size_t dim, std::uint64_t seed);

    std::size_t dim() const { return table_.dim(1); }
    PromptEmbedding embed(std::string_view text) const;
    PromptEmbedding null() const { return {null_tokens_, true}; }

    const Tensor& table() const { return table_; }
    const Tensor& null_tokens() const { return null_tokens_; }

private:
    Tensor table_;        // [kVocabBuckets, dim]
    Tensor null_tokens_;  // [kMaxTokens, dim]
};

PromptEmbedding tokenize_embed(std::string_view text, const TextEncoder& encoder);

// ---------------------------------------------------------------------------
// Dual cross-attention
// ---------------------------------------------------------------------------

/// One cross-attention layer: queries from the latent tokens, keys and values from a
/// prompt embedding, and a residual gate.
struct AttentionLayer {
    Tensor wq;  // [d_model, d_head]
    Tensor wk;  // [d_text, d_head]
    Tensor wv;  // [d_text, d_head]
    Tensor wo;  // [d_head, d_model]
    double gate = 1.0;
};

/// Two structurally identical layers applied in series: instruction first, auxiliary second.
struct DualAttentionParams {
    AttentionLayer instruction;
    AttentionLayer auxiliary;

    /// Gaussian projections scaled by 1/sqrt(fan_in); instruction gate 1, auxiliary gate 0.
    static DualAttentionParams init(std::size_t d_model, std::size_t d_text, std::size_t d_head, Prng& prng);
};

/// softmax(x Wq (ctx Wk)^T / sqrt(d_head)) (ctx Wv) Wo, without the residual.
/// When `weights` is non-null it receives the [n, m] row-stochastic attention matrix.
Tensor cross_attention(const Tensor& x, const Tensor& context, const AttentionLayer& layer, Tensor* weights = nullptr);

/// x' = x + g_i Attn(x; instr), x'' = x' + g_a Attn(x'; aux). x is [n_tokens, d_model].
Tensor dual_cross_attention(const Tensor& x, const PromptEmbedding& instruction, const PromptEmbedding& auxiliary,
                            const DualAttentionParams& params);

/// Only the instruction layer: x + g_i Attn(x; instr).
Tensor single_cross_attention(const Tensor& x, const PromptEmbedding& instruction, const DualAttentionParams& params);

// ---------------------------------------------------------------------------
// Conditioning bundle and training-time dropout
// ---------------------------------------------------------------------------

struct DropFlags {
    bool image = false;
    bool instruction = false;
    bool auxiliary = false;

    bool operator==(const DropFlags&) const = default;
};

/// Everything the denoiser is conditioned on. Dropped branches carry a null
/// embedding (is_null set) or a zeroed image latent.
struct ConditioningBundle {
    PromptEmbedding instruction;
    PromptEmbedding auxiliary;
    Tensor image_latent;
    DropFlags dropped;

    /// Copy with the requested branches replaced by their null stand-ins.
    ConditioningBundle with_dropped(DropFlags flags) const;
};

/// Independently drops each branch with the same probability.
struct ConditioningDropout {
    double probability = 0.075;

    /// `uniform` must return draws in [0, 1); it is called exactly three times
    /// (image, instruction, auxiliary).
    DropFlags draw(const std::function<double()>& uniform) const;
    DropFlags draw(Prng& prng) const;
};

}  // namespace hfdiff
