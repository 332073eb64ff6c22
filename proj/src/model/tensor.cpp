#include "groundchat/model/tensor.hpp"

#include <cmath>
#include <limits>
#include <span>

#include "groundchat/core/digest.hpp"

namespace groundchat::model {

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

namespace {

void hash_raw(Sha256& hasher, std::int64_t rows, std::int64_t cols, const double* data) {
    const std::int64_t shape[2] = {rows, cols};
    hasher.update(std::span(reinterpret_cast<const std::uint8_t*>(shape), sizeof shape));
    hasher.update(std::span(reinterpret_cast<const std::uint8_t*>(data),
                            static_cast<std::size_t>(rows * cols) * sizeof(double)));
}

} // namespace

void hash_into(Sha256& hasher, const Matrix& m) { hash_raw(hasher, m.rows(), m.cols(), m.data()); }
void hash_into(Sha256& hasher, const RowVector& v) { hash_raw(hasher, 1, v.cols(), v.data()); }

std::string hash_of(const Matrix& m) {
    Sha256 h;
    hash_into(h, m);
    return h.finish();
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix out(scores.rows(), scores.cols());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double max = scores.row(r).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            const double s = scores(r, c);
            const double e = s == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(s - max);
            out(r, c) = e;
            sum += e;
        }
        out.row(r) /= sum;
    }
    return out;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& d_probs) {
    const Eigen::VectorXd dot = probs.cwiseProduct(d_probs).rowwise().sum();
    Matrix out = d_probs;
    out.colwise() -= dot;
    return probs.cwiseProduct(out);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace groundchat::model
