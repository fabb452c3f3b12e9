#pragma once

// Multinomial logistic-regression probe over pooled feature vectors,
// trained with minibatch SGD on cross-entropy + L2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dvpool/error.hpp"
#include "dvpool/matrix.hpp"
#include "dvpool/metrics.hpp"

namespace dvpool {

struct TrainSpec {
    double learning_rate = 0.1;
    int epochs = 200;
    std::size_t batch_size = 32;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
    bool standardize = true;

    void validate() const {
        detail::require(learning_rate > 0.0, "TrainSpec: learning_rate must be positive");
        detail::require(epochs > 0, "TrainSpec: epochs must be positive");
        detail::require(batch_size > 0, "TrainSpec: batch_size must be positive");
        detail::require(l2 > 0.0, "TrainSpec: l2 must be positive");
    }
    friend bool operator==(const TrainSpec&, const TrainSpec&) = default;
};

/// Per-dimension z-score. An empty standardizer is the identity.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    bool empty() const { return mean.empty(); }

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        s.mean.assign(x.cols(), 0.0);
        s.scale.assign(x.cols(), 0.0);
        const double n = static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) s.mean[j] += x(i, j);
        for (double& m : s.mean) m /= n;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < x.cols(); ++j) {
                const double d = x(i, j) - s.mean[j];
                s.scale[j] += d * d;
            }
        }
        for (double& v : s.scale) {
            v = std::sqrt(v / n);
            // Constant dimensions carry no signal; keep them at zero.
            if (v < 1e-12) v = 1.0;
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        if (empty()) return x;
        detail::require(x.cols() == mean.size(), "Standardizer: dimension mismatch");
        Matrix out = x;
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = (out(i, j) - mean[j]) / scale[j];
        return out;
    }
};

struct LinearProbe {
    Matrix weights;  // K x D
    std::vector<double> bias;
    Standardizer standardizer;

    std::size_t classes() const { return weights.rows(); }
    std::size_t dims() const { return weights.cols(); }
};

struct TrainResult {
    LinearProbe probe;
    /// Full-training-set objective before the first epoch and after each epoch.
    std::vector<double> loss_history;
};

struct ProbeGradient {
    Matrix weights;
    std::vector<double> bias;
};

namespace detail {

inline void check_probe_inputs(const Matrix& w, std::span<const double> b, const Matrix& x,
                               std::span<const std::int64_t> labels) {
    require(b.size() == w.rows(), "probe: bias length must equal class count");
    require(x.cols() == w.cols(), "probe: dimension mismatch, probe expects D=" +
                                      std::to_string(w.cols()) + ", features have D=" +
                                      std::to_string(x.cols()));
    require(labels.size() == x.rows(), "probe: label count mismatch");
}

/// Class scores W x + b for one row, converted in place to probabilities.
inline void row_probabilities(const Matrix& w, std::span<const double> b,
                              std::span<const double> x, std::span<double> out) {
    for (std::size_t k = 0; k < w.rows(); ++k) {
        const auto wk = w.row(k);
        double z = b[k];
        for (std::size_t j = 0; j < x.size(); ++j) z += wk[j] * x[j];
        out[k] = z;
    }
    const double top = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (double& v : out) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : out) v /= total;
}

inline double l2_penalty(const Matrix& w, double l2) {
    double s = 0.0;
    for (double v : w.data()) s += v * v;
    return l2 * s;
}

inline double batch_loss(const Matrix& w, std::span<const double> b, const Matrix& x,
                         std::span<const std::int64_t> labels, std::span<const std::size_t> rows,
                         double l2) {
    std::vector<double> prob(w.rows());
    double total = 0.0;
    for (std::size_t r : rows) {
        row_probabilities(w, b, x.row(r), prob);
        total -= std::log(std::max(prob[static_cast<std::size_t>(labels[r])], 1e-300));
    }
    return total / static_cast<double>(rows.size()) + l2_penalty(w, l2);
}

inline ProbeGradient batch_gradient(const Matrix& w, std::span<const double> b, const Matrix& x,
                                    std::span<const std::int64_t> labels,
                                    std::span<const std::size_t> rows, double l2) {
    ProbeGradient g{Matrix(w.rows(), w.cols()), std::vector<double>(w.rows(), 0.0)};
    std::vector<double> prob(w.rows());
    const double scale = 1.0 / static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        const auto xr = x.row(r);
        row_probabilities(w, b, xr, prob);
        prob[static_cast<std::size_t>(labels[r])] -= 1.0;
        for (std::size_t k = 0; k < w.rows(); ++k) {
            const double delta = prob[k] * scale;
            g.bias[k] += delta;
            auto gk = g.weights.row(k);
            for (std::size_t j = 0; j < xr.size(); ++j) gk[j] += delta * xr[j];
        }
    }
    for (std::size_t i = 0; i < w.data().size(); ++i) g.weights.data()[i] += 2.0 * l2 * w.data()[i];
    return g;
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

}  // namespace detail

/// Mean cross-entropy of softmax(W x + b) plus l2 * ||W||^2 (bias unpenalized).
inline double probe_loss(const Matrix& w, std::span<const double> b, const Matrix& x,
                         std::span<const std::int64_t> labels, double l2) {
    detail::check_probe_inputs(w, b, x, labels);
    detail::require(x.rows() > 0, "probe_loss: empty batch");
    const auto rows = detail::all_rows(x.rows());
    return detail::batch_loss(w, b, x, labels, rows, l2);
}

/// Analytic gradient of probe_loss: dW = mean (p - y) x^T + 2 l2 W, db = mean (p - y).
inline ProbeGradient probe_gradient(const Matrix& w, std::span<const double> b, const Matrix& x,
                                    std::span<const std::int64_t> labels, double l2) {
    detail::check_probe_inputs(w, b, x, labels);
    detail::require(x.rows() > 0, "probe_gradient: empty batch");
    const auto rows = detail::all_rows(x.rows());
    return detail::batch_gradient(w, b, x, labels, rows, l2);
}

inline TrainResult train(const Matrix& features, std::span<const std::int64_t> labels,
                         const TrainSpec& spec) {
    spec.validate();
    detail::require(labels.size() == features.rows(), "train: label count mismatch");
    detail::require(features.cols() > 0, "train: features must have at least one dimension");
    for (auto y : labels) detail::require(y >= 0, "train: labels must be non-negative");
    const std::set<std::int64_t> distinct(labels.begin(), labels.end());
    detail::require(distinct.size() >= 2, "train: labels must cover at least two classes");
    const auto classes = static_cast<std::size_t>(*distinct.rbegin()) + 1;
    detail::require(features.rows() >= classes, "train: need at least as many samples as classes");

    TrainResult result;
    LinearProbe& probe = result.probe;
    if (spec.standardize) probe.standardizer = Standardizer::fit(features);
    const Matrix x = probe.standardizer.apply(features);
    probe.weights = Matrix(classes, x.cols());
    probe.bias.assign(classes, 0.0);

    std::vector<std::size_t> order = detail::all_rows(x.rows());
    const std::vector<std::size_t> everything = order;
    std::mt19937_64 rng(spec.seed);
    result.loss_history.reserve(static_cast<std::size_t>(spec.epochs) + 1);
    result.loss_history.push_back(
        detail::batch_loss(probe.weights, probe.bias, x, labels, everything, spec.l2));

    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
            const std::size_t stop = std::min(order.size(), start + spec.batch_size);
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            const auto g =
                detail::batch_gradient(probe.weights, probe.bias, x, labels, batch, spec.l2);
            for (std::size_t i = 0; i < g.weights.data().size(); ++i)
                probe.weights.data()[i] -= spec.learning_rate * g.weights.data()[i];
            for (std::size_t k = 0; k < classes; ++k)
                probe.bias[k] -= spec.learning_rate * g.bias[k];
        }
        result.loss_history.push_back(
            detail::batch_loss(probe.weights, probe.bias, x, labels, everything, spec.l2));
    }
    return result;
}

/// Raw class scores W f + b after the probe's standardization.
inline Matrix predict_logits(const LinearProbe& probe, const Matrix& features) {
    detail::require(features.cols() == probe.dims(),
                    "dimension mismatch: probe expects D=" + std::to_string(probe.dims()) +
                        ", features have D=" + std::to_string(features.cols()));
    const Matrix x = probe.standardizer.apply(features);
    Matrix out(x.rows(), probe.classes());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t k = 0; k < probe.classes(); ++k) {
            double z = probe.bias[k];
            const auto wk = probe.weights.row(k);
            const auto xi = x.row(i);
            for (std::size_t j = 0; j < xi.size(); ++j) z += wk[j] * xi[j];
            out(i, k) = z;
        }
    }
    return out;
}

inline Matrix predict_proba(const LinearProbe& probe, const Matrix& features) {
    return softmax(predict_logits(probe, features));
}

/// A small random problem for checking the analytic gradient.
struct ProbeInstance {
    Matrix weights;
    std::vector<double> bias;
    Matrix features;
    std::vector<std::int64_t> labels;
    double l2 = 1e-4;
};

inline ProbeInstance random_probe_instance(std::size_t classes, std::size_t dims,
                                           std::size_t samples, std::uint64_t seed,
                                           double l2 = 1e-2) {
    detail::require(classes >= 2 && dims >= 1 && samples >= 1,
                    "random_probe_instance: need K >= 2, D >= 1, N >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> label(0, static_cast<std::int64_t>(classes) - 1);
    ProbeInstance inst;
    inst.weights = Matrix(classes, dims);
    for (double& v : inst.weights.data()) v = 0.5 * normal(rng);
    inst.bias.resize(classes);
    for (double& v : inst.bias) v = 0.5 * normal(rng);
    inst.features = Matrix(samples, dims);
    for (double& v : inst.features.data()) v = normal(rng);
    inst.labels.resize(samples);
    for (auto& y : inst.labels) y = label(rng);
    inst.l2 = l2;
    return inst;
}

struct GradientCheckResult {
    double max_relative_error = 0.0;
    ProbeGradient analytic;
    ProbeGradient numeric;
};

/// Compares probe_gradient with central finite differences (step h).
/// Relative error per entry is |a - n| / max(|a|, |n|, 1e-8).
inline GradientCheckResult gradient_check(const ProbeInstance& inst, double h = 1e-5) {
    GradientCheckResult r;
    r.analytic = probe_gradient(inst.weights, inst.bias, inst.features, inst.labels, inst.l2);
    r.numeric = {Matrix(inst.weights.rows(), inst.weights.cols()),
                 std::vector<double>(inst.bias.size())};
    Matrix w = inst.weights;
    std::vector<double> b = inst.bias;
    auto loss = [&] { return probe_loss(w, b, inst.features, inst.labels, inst.l2); };
    auto central = [&](double& param) {
        const double saved = param;
        param = saved + h;
        const double up = loss();
        param = saved - h;
        const double down = loss();
        param = saved;
        return (up - down) / (2.0 * h);
    };
    for (std::size_t i = 0; i < w.data().size(); ++i) r.numeric.weights.data()[i] = central(w.data()[i]);
    for (std::size_t k = 0; k < b.size(); ++k) r.numeric.bias[k] = central(b[k]);

    auto rel = [](double a, double n) {
        return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
    };
    for (std::size_t i = 0; i < w.data().size(); ++i)
        r.max_relative_error = std::max(
            r.max_relative_error, rel(r.analytic.weights.data()[i], r.numeric.weights.data()[i]));
    for (std::size_t k = 0; k < b.size(); ++k)
        r.max_relative_error = std::max(r.max_relative_error, rel(r.analytic.bias[k], r.numeric.bias[k]));
    return r;
}

}  // namespace dvpool
