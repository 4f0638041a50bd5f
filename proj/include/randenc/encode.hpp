#pragma once

// Single entry point over all encoder kinds, plus order-stable batch encoding. //

#include "encoders.hpp"
#include "trees.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace randenc {

/// One sentence ready for encoding. `tree` is required by tree_lstm and ignored otherwise.
struct EncoderInput {
    TokenSequence tokens;
    std::optional<ParseTree> tree;
};

inline ContextMatrix encode(const EncoderParams& params, const TokenSequence& seq, const ParseTree* tree = nullptr)
{
    switch (params.config.kind) {
    case EncoderKind::borep: return encode_borep(params, seq);
    case EncoderKind::rand_lstm: return encode_rand_lstm(params, seq);
    case EncoderKind::esn: return encode_esn(params, seq);
    case EncoderKind::cnn: return encode_cnn(params, seq);
    case EncoderKind::self_attention: return encode_self_attention(params, seq);
    case EncoderKind::tree_lstm:
        if (!tree) throw config_error{"tree_lstm needs a parse tree for every sentence"};
        return encode_tree_lstm(params, seq, *tree);
    }
    throw config_error{"unknown encoder kind"};
}

inline ContextMatrix encode(const EncoderParams& params, const EncoderInput& input)
{
    return encode(params, input.tokens, input.tree ? &*input.tree : nullptr);
}

inline SentenceEmbedding embed(const EncoderParams& params, const EncoderInput& input, PoolingKind pooling)
{
    return {pool(encode(params, input), pooling), params.config.kind, params.config.seed, pooling};
}

/// Encodes and pools every input under each requested pooling. result[p][i] is sentence i under
/// poolings[p]. Work is spread over `workers` threads; output order never depends on scheduling.
inline std::vector<std::vector<Vector>> encode_batch(const EncoderParams& params, const std::vector<EncoderInput>& inputs,
                                                     const std::vector<PoolingKind>& poolings, std::size_t workers = 1)
{
    std::vector<std::vector<Vector>> result(poolings.size(), std::vector<Vector>(inputs.size()));
    auto work = [&](std::size_t i) {
        const ContextMatrix h = encode(params, inputs[i]);
        for (std::size_t p = 0; p < poolings.size(); ++p) result[p][i] = pool(h, poolings[p]);
    };
    workers = std::max<std::size_t>(1, std::min(workers, inputs.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < inputs.size(); ++i) work(i);
        return result;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool_threads;
        for (std::size_t w = 0; w < workers; ++w) {
            pool_threads.emplace_back([&] {
                for (std::size_t i = next++; i < inputs.size(); i = next++) {
                    try {
                        work(i);
                    } catch (...) {
                        std::lock_guard lock{failure_mutex};
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return result;
}

}  // namespace randenc
