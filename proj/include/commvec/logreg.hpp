#pragma once

// L2-regularized binary logistic regression over sparse rows, fit with
// L-BFGS. Objective: mean log-loss + (l2 / 2) * |w|^2, intercept unpenalized.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace commvec::classify {

/// (feature id, value) pairs sorted by id.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

struct LogRegOptions {
    /// Penalty strength. Unset means 1 / (number of training rows), which
    /// gives the same optimum as summed log-loss + |w|^2 / 2.
    std::optional<double> l2;
    /// Stop when the Euclidean norm of the full gradient (weights and
    /// intercept) falls below this.
    double tolerance = 1e-4;
    std::size_t max_iterations = 2000;
    std::size_t history = 10;
};

struct FitStats {
    double l2 = 0.0;
    std::size_t iterations = 0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    bool converged = false;
};

class LogisticModel {
public:
    LogisticModel() = default;
    LogisticModel(std::vector<double> weights, double intercept)
        : weights_(std::move(weights)), intercept_(intercept) {}

    double decision(const SparseVector& x) const;
    double probability(const SparseVector& x) const;
    bool predict(const SparseVector& x) const { return decision(x) > 0.0; }

    const std::vector<double>& weights() const noexcept { return weights_; }
    double intercept() const noexcept { return intercept_; }

    friend bool operator==(const LogisticModel&, const LogisticModel&) = default;

private:
    std::vector<double> weights_;
    double intercept_ = 0.0;
};

/// `labels[i]` is true for the positive class. Throws std::invalid_argument
/// when only one class is present or shapes disagree.
LogisticModel train_model(std::span<const SparseVector> rows, std::span<const std::uint8_t> labels, std::size_t dim,
                          const LogRegOptions& options = {}, FitStats* stats = nullptr);

/// The strength train_model uses for `n` training rows.
double resolved_l2(const LogRegOptions& options, std::size_t n);

/// Objective and gradient at (weights, intercept); exposed for tests.
double logistic_objective(std::span<const SparseVector> rows, std::span<const std::uint8_t> labels,
                          std::span<const double> weights, double intercept, double l2,
                          std::vector<double>* gradient = nullptr);

}  // namespace commvec::classify
