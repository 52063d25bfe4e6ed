// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/conditioning.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hfdiff/tape.hpp"

namespace hfdiff {

std::string build_auxiliary_prompt(std::string_view semantic, std::string_view defect) {
    if (semantic.empty()) return std::string(defect);
    if (defect.empty()) return std::string(semantic);
    std::string out;
    out.reserve(semantic.size() + defect.size() + 1);
    out.append(semantic).append(" ").append(defect);
    return out;
}

CannedResponseTable CannedResponseTable::builtin() {
    CannedResponseTable t;
    t.set("lowlight", {"a small photograph of a scene with soft shapes and muted colors",
                       "the image is very dark and underexposed with visible sensor noise"});
    t.set("haze", {"a small photograph of an outdoor scene with distant shapes",
                   "the image is washed out by a thick grey haze that hides distant detail"});
    t.set("snow", {"a small photograph of a street scene in winter",
                   "the image is obscured by falling snow flakes streaking across the view"});
    t.set("watermark", {"a small photograph with colorful regions and shapes",
                        "the image is covered by a semi transparent text watermark"});
    t.set("colorization", {"a small photograph of a scene with several objects",
                           "the image has no color and looks like a black and white photo"});
    t.set("superres", {"a small photograph of a scene with fine edges",
                       "the image is blurry and pixelated because of its low resolution"});
    t.set("removal", {"a small picture of simple objects on a textured background",
                      "the image contains an unwanted object in the foreground"});
    t.set("creation", {"a small picture of simple objects on a textured background",
                       "the image is missing an object the user wants to see"});
    return t;
}

CannedResponseTable CannedResponseTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("canned table: cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("canned table: " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("canned table: top level must be an object");
    CannedResponseTable t;
    for (const auto& [task, entry] : doc.items()) {
        if (!entry.is_object() || !entry.contains("semantic") || !entry.contains("defect")) {
            throw std::invalid_argument("canned table: entry '" + task + "' needs semantic and defect strings");
        }
        for (const auto& [key, _] : entry.items()) {
            if (key != "semantic" && key != "defect") {
                throw std::invalid_argument("canned table: unknown key '" + key + "' in entry '" + task + "'");
            }
        }
        t.set(task, {entry.at("semantic").get<std::string>(), entry.at("defect").get<std::string>()});
    }
    return t;
}

void CannedResponseTable::set(std::string task, CannedResponse response) {
    entries_[std::move(task)] = std::move(response);
}

bool CannedResponseTable::contains(std::string_view task) const {
    try {
        (void)lookup(task);
        return true;
    } catch (const std::out_of_range&) {
        return false;
    }
}

CannedResponse CannedResponseTable::lookup(std::string_view task) const {
    if (auto it = entries_.find(task); it != entries_.end()) return it->second;
    if (task.find('+') == std::string_view::npos) {
        throw std::out_of_range("canned table: no entry for task '" + std::string(task) + "'");
    }
    CannedResponse out;
    std::size_t start = 0;
    while (start <= task.size()) {
        const std::size_t plus = task.find('+', start);
        const std::string_view part = task.substr(start, plus == std::string_view::npos ? task.npos : plus - start);
        const auto it = entries_.find(part);
        if (it == entries_.end()) {
            throw std::out_of_range("canned table: no entry for task '" + std::string(part) + "'");
        }
        if (out.semantic.empty()) out.semantic = it->second.semantic;
        out.defect = build_auxiliary_prompt(out.defect, it->second.defect);
        if (plus == std::string_view::npos) break;
        start = plus + 1;
    }
    return out;
}

CannedAuxiliaryProvider::CannedAuxiliaryProvider(CannedResponseTable table, std::string task)
    : table_(std::move(table)), task_(std::move(task)) {
    (void)table_.lookup(task_);
}

std::string CannedAuxiliaryProvider::query(const ImageBuffer&, std::string_view query_text) const {
    const CannedResponse r = table_.lookup(task_);
    if (query_text == kSemanticQuery) return r.semantic;
    if (query_text == kDefectQuery) return r.defect;
    throw std::invalid_argument("canned provider: unsupported query '" + std::string(query_text) + "'");
}

std::string auxiliary_prompt(const AuxiliaryProvider& provider, const ImageBuffer& image) {
    return build_auxiliary_prompt(provider.query(image, kSemanticQuery), provider.query(image, kDefectQuery));
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<std::size_t> token_buckets(std::string_view text) {
    std::vector<std::size_t> out;
    for (const std::string& tok : tokenize(text)) {
        if (out.size() == kMaxTokens) break;
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : tok) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        out.push_back(static_cast<std::size_t>(h % kVocabBuckets));
    }
    return out;
}

TextEncoder::TextEncoder(Tensor table, Tensor null_tokens) : table_(std::move(table)), null_tokens_(std::move(null_tokens)) {
    if (table_.rank() != 2 || table_.dim(0) != kVocabBuckets) {
        throw std::invalid_argument("text encoder: table must be [4096, d]");
    }
    if (null_tokens_.rank() != 2 || null_tokens_.dim(0) != kMaxTokens || null_tokens_.dim(1) != table_.dim(1)) {
        throw std::invalid_argument("text encoder: null sequence must be [16, d]");
    }
}

TextEncoder TextEncoder::random(std::size_t dim, std::uint64_t seed) {
    Prng prng(seed);
    Tensor table = gaussian(prng, Shape{kVocabBuckets, dim});
    return TextEncoder(std::move(table), Tensor(Shape{kMaxTokens, dim}));
}

PromptEmbedding TextEncoder::embed(std::string_view text) const {
    const std::vector<std::size_t> buckets = token_buckets(text);
    if (buckets.empty()) return null();
    const std::size_t d = dim();
    Tensor tokens(Shape{kMaxTokens, d});
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) tokens.at(i, j) = table_.at(buckets[i], j);
    }
    return {std::move(tokens), false};
}

PromptEmbedding tokenize_embed(std::string_view text, const TextEncoder& encoder) { return encoder.embed(text); }

namespace {

Tensor scaled_gaussian(Prng& prng, std::size_t rows, std::size_t cols) {
    Tensor t = gaussian(prng, Shape{rows, cols});
    t *= 1.0 / std::sqrt(static_cast<double>(rows));
    return t;
}

AttentionLayer init_layer(std::size_t d_model, std::size_t d_text, std::size_t d_head, Prng& prng, double gate) {
    AttentionLayer l;
    l.wq = scaled_gaussian(prng, d_model, d_head);
    l.wk = scaled_gaussian(prng, d_text, d_head);
    l.wv = scaled_gaussian(prng, d_text, d_head);
    l.wo = scaled_gaussian(prng, d_head, d_model);
    l.gate = gate;
    return l;
}

}  // namespace

DualAttentionParams DualAttentionParams::init(std::size_t d_model, std::size_t d_text, std::size_t d_head, Prng& prng) {
    DualAttentionParams p;
    p.instruction = init_layer(d_model, d_text, d_head, prng, 1.0);
    p.auxiliary = init_layer(d_model, d_text, d_head, prng, 0.0);
    return p;
}

Tensor cross_attention(const Tensor& x, const Tensor& context, const AttentionLayer& layer, Tensor* weights) {
    if (x.rank() != 2 || context.rank() != 2) throw std::invalid_argument("cross_attention: expected token matrices");
    if (x.dim(1) != layer.wq.dim(0)) throw std::invalid_argument("cross_attention: latent dimension mismatch");
    if (context.dim(1) != layer.wk.dim(0) || context.dim(1) != layer.wv.dim(0)) {
        throw std::invalid_argument("cross_attention: prompt embedding dimension mismatch");
    }
    const Tensor q = matmul(x, layer.wq);
    const Tensor k = matmul(context, layer.wk);
    const Tensor v = matmul(context, layer.wv);
    Tensor scores = matmul(q, k, false, true);
    scores *= 1.0 / std::sqrt(static_cast<double>(layer.wq.dim(1)));
    const Tensor attn = softmax_rows(scores);
    if (weights) *weights = attn;
    return matmul(matmul(attn, v), layer.wo);
}

Tensor single_cross_attention(const Tensor& x, const PromptEmbedding& instruction, const DualAttentionParams& params) {
    Tensor out = x;
    Tensor a = cross_attention(x, instruction.tokens, params.instruction);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += params.instruction.gate * a[i];
    return out;
}

Tensor dual_cross_attention(const Tensor& x, const PromptEmbedding& instruction, const PromptEmbedding& auxiliary,
                            const DualAttentionParams& params) {
    if (instruction.tokens.dim(1) != auxiliary.tokens.dim(1)) {
        throw std::invalid_argument("dual_cross_attention: instruction and auxiliary dimensions differ");
    }
    Tensor out = single_cross_attention(x, instruction, params);
    if (params.auxiliary.gate == 0.0) return out;
    const Tensor a = cross_attention(out, auxiliary.tokens, params.auxiliary);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += params.auxiliary.gate * a[i];
    return out;
}

ConditioningBundle ConditioningBundle::with_dropped(DropFlags flags) const {
    ConditioningBundle out = *this;
    if (flags.image) {
        out.image_latent = Tensor(image_latent.shape());
        out.dropped.image = true;
    }
    if (flags.instruction) {
        out.instruction = {Tensor(instruction.tokens.shape()), true};
        out.dropped.instruction = true;
    }
    if (flags.auxiliary) {
        out.auxiliary = {Tensor(auxiliary.tokens.shape()), true};
        out.dropped.auxiliary = true;
    }
    return out;
}

DropFlags ConditioningDropout::draw(const std::function<double()>& uniform) const {
    DropFlags f;
    f.image = uniform() < probability;
    f.instruction = uniform() < probability;
    f.auxiliary = uniform() < probability;
    return f;
}

DropFlags ConditioningDropout::draw(Prng& prng) const {
    return draw([&prng] { return prng.uniform(); });
}

}  // namespace hfdiff
