#include "commvec/logreg.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace commvec::classify {

namespace {

// log(1 + exp(-m)) without overflow.
double log1pexp_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

// 1 / (1 + exp(m))
double sigmoid_neg(double m) {
    if (m >= 0) {
        const double e = std::exp(-m);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(m));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

double LogisticModel::decision(const SparseVector& x) const {
    double z = intercept_;
    for (const auto& [i, v] : x) {
        if (i < weights_.size()) z += weights_[i] * v;
    }
    return z;
}

double LogisticModel::probability(const SparseVector& x) const { return 1.0 - sigmoid_neg(decision(x)); }

double logistic_objective(std::span<const SparseVector> rows, std::span<const std::uint8_t> labels,
                          std::span<const double> weights, double intercept, double l2, std::vector<double>* gradient) {
    const double n = static_cast<double>(rows.size());
    if (gradient) gradient->assign(weights.size() + 1, 0.0);
    double loss = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double z = intercept;
        for (const auto& [i, v] : rows[r]) z += weights[i] * v;
        const double sign = labels[r] ? 1.0 : -1.0;
        const double margin = sign * z;
        loss += log1pexp_neg(margin);
        if (gradient) {
            const double g = -sign * sigmoid_neg(margin);
            for (const auto& [i, v] : rows[r]) (*gradient)[i] += g * v;
            gradient->back() += g;
        }
    }
    loss /= n;
    double sq = 0.0;
    for (double w : weights) sq += w * w;
    if (gradient) {
        for (std::size_t i = 0; i < weights.size(); ++i) (*gradient)[i] = (*gradient)[i] / n + l2 * weights[i];
        gradient->back() /= n;
    }
    return loss + 0.5 * l2 * sq;
}

double resolved_l2(const LogRegOptions& options, std::size_t n) {
    if (options.l2) return *options.l2;
    return n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
}

LogisticModel train_model(std::span<const SparseVector> rows, std::span<const std::uint8_t> labels, std::size_t dim,
                          const LogRegOptions& options, FitStats* stats) {
    if (rows.size() != labels.size()) throw std::invalid_argument("rows and labels differ in length");
    if (rows.empty()) throw std::invalid_argument("empty training set");
    std::size_t positives = 0;
    for (auto y : labels) positives += y ? 1 : 0;
    if (positives == 0 || positives == labels.size()) {
        throw std::invalid_argument("training data contains a single class");
    }
    const double l2 = resolved_l2(options, rows.size());
    if (!(l2 >= 0.0)) throw std::invalid_argument("l2 strength must be non-negative");
    for (const auto& row : rows) {
        for (const auto& [i, v] : row) {
            if (i >= dim) throw std::invalid_argument("feature id out of range");
        }
    }

    const std::size_t p = dim + 1;  // weights then intercept
    std::vector<double> theta(p, 0.0);
    std::vector<double> grad;
    auto evaluate = [&](const std::vector<double>& t, std::vector<double>& g) {
        return logistic_objective(rows, labels, std::span(t).first(dim), t[dim], l2, &g);
    };

    double f = evaluate(theta, grad);
    struct Pair {
        std::vector<double> s;
        std::vector<double> y;
        double rho;
    };
    std::deque<Pair> memory;
    std::vector<double> direction(p);
    std::vector<double> alpha(options.history);
    std::vector<double> trial(p);
    std::vector<double> trial_grad;

    FitStats local;
    local.l2 = l2;
    for (local.iterations = 0; local.iterations < options.max_iterations; ++local.iterations) {
        local.gradient_norm = std::sqrt(dot(grad, grad));
        if (local.gradient_norm <= options.tolerance) {
            local.converged = true;
            break;
        }

        // Two-loop recursion.
        direction = grad;
        for (std::size_t k = memory.size(); k-- > 0;) {
            alpha[k] = memory[k].rho * dot(memory[k].s, direction);
            for (std::size_t i = 0; i < p; ++i) direction[i] -= alpha[k] * memory[k].y[i];
        }
        double gamma = 1.0;
        if (!memory.empty()) {
            const auto& last = memory.back();
            gamma = dot(last.s, last.y) / dot(last.y, last.y);
        } else {
            gamma = 1.0 / std::max(1.0, local.gradient_norm);
        }
        for (auto& d : direction) d *= gamma;
        for (std::size_t k = 0; k < memory.size(); ++k) {
            const double beta = memory[k].rho * dot(memory[k].y, direction);
            for (std::size_t i = 0; i < p; ++i) direction[i] += memory[k].s[i] * (alpha[k] - beta);
        }
        for (auto& d : direction) d = -d;

        double slope = dot(grad, direction);
        if (slope >= 0.0) {
            // Not a descent direction; fall back to steepest descent.
            memory.clear();
            for (std::size_t i = 0; i < p; ++i) direction[i] = -grad[i] / std::max(1.0, local.gradient_norm);
            slope = dot(grad, direction);
        }

        // Backtracking line search on the Armijo condition.
        double step = 1.0;
        double f_trial = f;
        bool accepted = false;
        for (int tries = 0; tries < 60; ++tries) {
            for (std::size_t i = 0; i < p; ++i) trial[i] = theta[i] + step * direction[i];
            f_trial = evaluate(trial, trial_grad);
            if (f_trial <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Pair pair{std::vector<double>(p), std::vector<double>(p), 0.0};
        for (std::size_t i = 0; i < p; ++i) {
            pair.s[i] = trial[i] - theta[i];
            pair.y[i] = trial_grad[i] - grad[i];
        }
        const double sy = dot(pair.s, pair.y);
        theta.swap(trial);
        grad.swap(trial_grad);
        f = f_trial;
        if (sy > 1e-12) {
            pair.rho = 1.0 / sy;
            memory.push_back(std::move(pair));
            if (memory.size() > options.history) memory.pop_front();
        }
    }
    local.objective = f;
    local.gradient_norm = std::sqrt(dot(grad, grad));
    local.converged = local.gradient_norm <= options.tolerance;
    if (stats) *stats = local;

    const double intercept = theta[dim];
    theta.resize(dim);
    return LogisticModel(std::move(theta), intercept);
}

}  // namespace commvec::classify
