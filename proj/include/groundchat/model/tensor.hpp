#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Core>

namespace groundchat {
class Sha256;
}

namespace groundchat::model {

// Rows are sequence positions throughout the model code.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

using Rng = std::mt19937_64;

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

/// Feeds shape and raw little-endian bytes into the hash.
void hash_into(Sha256& hasher, const Matrix& m);
void hash_into(Sha256& hasher, const RowVector& v);

std::string hash_of(const Matrix& m);

/// Row-wise softmax; entries equal to -infinity get probability 0.
Matrix softmax_rows(const Matrix& scores);

/// Backward of a row-wise softmax: given probabilities P and dL/dP,
/// returns dL/dScores = P * (dP - rowsum(dP * P)).
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& d_probs);

bool all_finite(const Matrix& m);

} // namespace groundchat::model
