#include "groundchat/model/heads.hpp"

#include <cmath>

#include "groundchat/core/digest.hpp"

namespace groundchat::model {

QFormerHead QFormerHead::init(std::size_t queries, std::size_t encoder_dim, std::size_t dim, Rng& rng) {
    const auto q = static_cast<Eigen::Index>(queries);
    const auto e = static_cast<Eigen::Index>(encoder_dim);
    const auto d = static_cast<Eigen::Index>(dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(encoder_dim));
    QFormerHead head;
    head.queries = random_normal(q, d, 0.5, rng);
    head.w_key = random_normal(e, d, scale, rng);
    head.w_value = random_normal(e, d, scale, rng);
    return head;
}

Matrix QFormerHead::forward(const Matrix& features, Cache* cache) const {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim()));
    Matrix keys = features * w_key;
    Matrix values = features * w_value;
    Matrix attention = softmax_rows((queries * keys.transpose()) * scale);
    Matrix out = queries + attention * values;
    if (cache != nullptr) {
        cache->features = features;
        cache->keys = std::move(keys);
        cache->values = std::move(values);
        cache->attention = std::move(attention);
    }
    return out;
}

QFormerHead::Grads QFormerHead::backward(const Cache& cache, const Matrix& d_out) const {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim()));
    const Matrix d_attention = d_out * cache.values.transpose();
    const Matrix d_values = cache.attention.transpose() * d_out;
    const Matrix d_scores = softmax_rows_backward(cache.attention, d_attention) * scale;
    const Matrix d_keys = d_scores.transpose() * queries;
    Grads g;
    g.queries = d_out + d_scores * cache.keys;
    g.w_key = cache.features.transpose() * d_keys;
    g.w_value = cache.features.transpose() * d_values;
    return g;
}

std::string QFormerHead::parameter_hash() const {
    Sha256 h;
    hash_into(h, queries);
    hash_into(h, w_key);
    hash_into(h, w_value);
    return h.finish();
}

ProjectionHead ProjectionHead::init(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
    ProjectionHead head;
    head.weight = random_normal(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(out_dim), 0.02, rng);
    head.bias = RowVector::Zero(static_cast<Eigen::Index>(out_dim));
    return head;
}

Matrix ProjectionHead::forward(const Matrix& x) const {
    Matrix out = x * weight;
    out.rowwise() += bias;
    return out;
}

ProjectionHead::Grads ProjectionHead::backward(const Matrix& x, const Matrix& d_out) const {
    Grads g;
    g.weight = x.transpose() * d_out;
    g.bias = d_out.colwise().sum();
    g.input = d_out * weight.transpose();
    return g;
}

std::string ProjectionHead::parameter_hash() const {
    Sha256 h;
    hash_into(h, weight);
    hash_into(h, bias);
    return h.finish();
}

} // namespace groundchat::model
