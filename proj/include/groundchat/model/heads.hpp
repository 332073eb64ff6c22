#pragma once

#include <string>

#include "groundchat/model/tensor.hpp"

namespace groundchat::model {

/// Single cross-attention Q-Former: Q learned queries attend over the
/// encoder features.
///   K = F Wk, V = F Wv, A = softmax(queries K^T / sqrt(D_q)),
///   out = queries + A V      (Q x D_q, independent of L_enc)
struct QFormerHead {
    Matrix queries; // Q x D_q
    Matrix w_key;   // D_enc x D_q
    Matrix w_value; // D_enc x D_q

    static QFormerHead init(std::size_t queries, std::size_t encoder_dim, std::size_t dim, Rng& rng);

    struct Cache {
        Matrix features;
        Matrix keys;
        Matrix values;
        Matrix attention;
    };

    struct Grads {
        Matrix queries;
        Matrix w_key;
        Matrix w_value;
    };

    Matrix forward(const Matrix& features, Cache* cache = nullptr) const;
    Grads backward(const Cache& cache, const Matrix& d_out) const;

    std::size_t query_count() const { return static_cast<std::size_t>(queries.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(queries.cols()); }
    std::string parameter_hash() const;
};

/// Affine map D_q -> D_llm applied row-wise.
struct ProjectionHead {
    Matrix weight;  // D_q x D_llm
    RowVector bias; // 1 x D_llm

    static ProjectionHead init(std::size_t in_dim, std::size_t out_dim, Rng& rng);

    struct Grads {
        Matrix weight;
        RowVector bias;
        Matrix input; // dL/dX
    };

    Matrix forward(const Matrix& x) const;
    Grads backward(const Matrix& x, const Matrix& d_out) const;

    std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }
    std::string parameter_hash() const;
};

} // namespace groundchat::model
