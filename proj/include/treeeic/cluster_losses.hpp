#pragma once

#include "treeeic/numkernel.hpp"

/**
 * @file cluster_losses.hpp
 *
 * @brief Teacher-student losses on soft assignment matrices.
 *
 * Both functions compare a fixed teacher `p` (rows = samples, cols = clusters) against a student
 * `q` of the same shape and optionally write dL/dq. No gradient is produced for the teacher.
 */
namespace treeeic {

/// Sum over rows of ||p_i - q_i||^2.
double consistency_rows(const Matrix& p, const Matrix& q, Matrix* dq = nullptr);

/**
 * Cluster-level InfoNCE between the columns of `p` and `q`.
 *
 * For each cluster k the positive pair is (p_k, q_k). The negatives for q_k are its cosine
 * similarity to every other teacher column p_k' and every other student column q_k'. All
 * similarities are divided by `temperature`. The positive is not part of the log-sum-exp.
 * Returns the mean over clusters of  -s+ + log sum exp(s-).
 *
 * A zero-norm column contributes cosine 0 to every pair it is in, with no gradient, and a
 * warning is recorded in `diag`.
 */
double infonce_columns(const Matrix& p, const Matrix& q, double temperature, Matrix* dq = nullptr,
                       Diagnostics* diag = nullptr);

}  // namespace treeeic
