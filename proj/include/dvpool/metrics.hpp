#pragma once

// Classification metrics (ACC, bAcc, macro F1, Cohen's kappa), calibration
// metrics (ECE, Brier) and post-hoc temperature scaling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dvpool/error.hpp"
#include "dvpool/matrix.hpp"

namespace dvpool {

/// Per-sample class probabilities plus integer ground truth.
/// Rows are non-negative and sum to one within 1e-6.
class PredictionSet {
public:
    PredictionSet(Matrix probs, std::vector<std::int64_t> labels)
        : probs_(std::move(probs)), labels_(std::move(labels)) {
        detail::require(probs_.rows() >= 1, "PredictionSet: need at least one sample");
        detail::require(probs_.cols() >= 2, "PredictionSet: need at least two classes");
        detail::require(labels_.size() == probs_.rows(),
                        "PredictionSet: " + std::to_string(labels_.size()) + " labels for " +
                            std::to_string(probs_.rows()) + " probability rows");
        for (std::size_t i = 0; i < probs_.rows(); ++i) {
            double s = 0.0;
            for (double p : probs_.row(i)) {
                detail::require(std::isfinite(p) && p >= 0.0,
                                "PredictionSet: probabilities must be finite and non-negative");
                s += p;
            }
            detail::require(std::abs(s - 1.0) <= 1e-6,
                            "PredictionSet: row " + std::to_string(i) + " sums to " +
                                std::to_string(s));
            detail::require(labels_[i] >= 0 &&
                                static_cast<std::size_t>(labels_[i]) < probs_.cols(),
                            "PredictionSet: label out of range at row " + std::to_string(i));
        }
    }

    const Matrix& probs() const { return probs_; }
    std::span<const std::int64_t> labels() const { return labels_; }
    std::size_t samples() const { return probs_.rows(); }
    std::size_t classes() const { return probs_.cols(); }

private:
    Matrix probs_;
    std::vector<std::int64_t> labels_;
};

/// Row-wise exp-normalize with max subtraction.
inline Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto in = logits.row(i);
        for (double z : in) detail::require(std::isfinite(z), "softmax: non-finite logit");
        const double top = *std::max_element(in.begin(), in.end());
        auto row = out.row(i);
        double total = 0.0;
        for (std::size_t k = 0; k < in.size(); ++k) {
            row[k] = std::exp(in[k] - top);
            total += row[k];
        }
        for (double& v : row) v /= total;
    }
    return out;
}

/// Index of the largest entry; ties go to the smallest index.
inline std::size_t argmax(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[best]) best = k;
    return best;
}

inline std::vector<std::size_t> predicted_classes(const PredictionSet& p) {
    std::vector<std::size_t> pred(p.samples());
    for (std::size_t i = 0; i < p.samples(); ++i) pred[i] = argmax(p.probs().row(i));
    return pred;
}

/// K x K counts, rows = true class, columns = predicted class.
inline Matrix confusion_matrix(const PredictionSet& p) {
    Matrix cm(p.classes(), p.classes());
    const auto pred = predicted_classes(p);
    for (std::size_t i = 0; i < p.samples(); ++i)
        cm(static_cast<std::size_t>(p.labels()[i]), pred[i]) += 1.0;
    return cm;
}

inline double accuracy(const PredictionSet& p) {
    const auto pred = predicted_classes(p);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < p.samples(); ++i)
        hits += pred[i] == static_cast<std::size_t>(p.labels()[i]);
    return static_cast<double>(hits) / static_cast<double>(p.samples());
}

/// Mean per-class recall over classes that occur in the labels.
inline double balanced_accuracy(const PredictionSet& p) {
    const Matrix cm = confusion_matrix(p);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < p.classes(); ++k) {
        double support = 0.0;
        for (std::size_t j = 0; j < p.classes(); ++j) support += cm(k, j);
        if (support == 0.0) continue;
        sum += cm(k, k) / support;
        ++present;
    }
    return sum / static_cast<double>(present);
}

/// Mean per-class F1 over classes that occur in the labels or predictions.
/// A class with precision + recall == 0 contributes F1 = 0.
inline double macro_f1(const PredictionSet& p) {
    const Matrix cm = confusion_matrix(p);
    const std::size_t k_count = p.classes();
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
        double support = 0.0;
        double predicted = 0.0;
        for (std::size_t j = 0; j < k_count; ++j) {
            support += cm(k, j);
            predicted += cm(j, k);
        }
        if (support == 0.0 && predicted == 0.0) continue;
        ++present;
        const double tp = cm(k, k);
        const double precision = predicted > 0.0 ? tp / predicted : 0.0;
        const double recall = support > 0.0 ? tp / support : 0.0;
        if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
    }
    return sum / static_cast<double>(present);
}

enum class KappaWeighting { unweighted, quadratic };

struct KappaResult {
    double value = 0.0;
    /// Set when expected disagreement is zero; value is then reported as 0.
    bool degenerate = false;
};

/// Cohen's kappa from the confusion matrix. Quadratic mode weights a
/// disagreement between classes i and j by (i - j)^2 / (K - 1)^2.
inline KappaResult cohen_kappa(const PredictionSet& p,
                               KappaWeighting weighting = KappaWeighting::unweighted) {
    const Matrix cm = confusion_matrix(p);
    const std::size_t k_count = p.classes();
    const double n = static_cast<double>(p.samples());
    std::vector<double> truth(k_count, 0.0), pred(k_count, 0.0);
    for (std::size_t i = 0; i < k_count; ++i) {
        for (std::size_t j = 0; j < k_count; ++j) {
            truth[i] += cm(i, j);
            pred[j] += cm(i, j);
        }
    }
    auto weight = [&](std::size_t i, std::size_t j) {
        if (weighting == KappaWeighting::unweighted) return i == j ? 0.0 : 1.0;
        const double d = static_cast<double>(i) - static_cast<double>(j);
        const double span = static_cast<double>(k_count - 1);
        return d * d / (span * span);
    };
    // kappa = 1 - observed / expected, both as weighted disagreement.
    double observed = 0.0;
    double expected = 0.0;
    for (std::size_t i = 0; i < k_count; ++i) {
        for (std::size_t j = 0; j < k_count; ++j) {
            const double w = weight(i, j);
            observed += w * cm(i, j) / n;
            expected += w * truth[i] * pred[j] / (n * n);
        }
    }
    if (expected <= 0.0) return {0.0, true};
    return {1.0 - observed / expected, false};
}

struct ReliabilityBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

struct ReliabilityTable {
    std::vector<ReliabilityBin> bins;
    double ece = 0.0;
};

inline constexpr std::size_t kDefaultEceBins = 15;

/// Lower edge of bin b out of `bins` equal-width bins on [0, 1].
inline double bin_edge(std::size_t b, std::size_t bins) {
    return static_cast<double>(b) / static_cast<double>(bins);
}

/// Bin holding confidence c: b with edge(b) <= c < edge(b+1); the last bin
/// is closed on the right.
inline std::size_t confidence_bin(double c, std::size_t bins) {
    auto b = static_cast<std::size_t>(std::clamp(std::floor(c * static_cast<double>(bins)), 0.0,
                                                 static_cast<double>(bins - 1)));
    // floor(c * B) can land one bin off the edge comparison; settle on the edges.
    while (b > 0 && c < bin_edge(b, bins)) --b;
    while (b + 1 < bins && c >= bin_edge(b + 1, bins)) ++b;
    return b;
}

/// Expected calibration error with B equal-width confidence bins, where
/// confidence is the max class probability of each row.
inline ReliabilityTable ece(const PredictionSet& p, std::size_t bins = kDefaultEceBins) {
    detail::require(bins >= 1, "ece: bin count must be >= 1");
    ReliabilityTable table;
    table.bins.resize(bins);
    std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
    for (std::size_t i = 0; i < p.samples(); ++i) {
        const auto row = p.probs().row(i);
        const std::size_t top = argmax(row);
        const std::size_t b = confidence_bin(row[top], bins);
        conf_sum[b] += row[top];
        hit_sum[b] += top == static_cast<std::size_t>(p.labels()[i]) ? 1.0 : 0.0;
        ++table.bins[b].count;
    }
    const double n = static_cast<double>(p.samples());
    for (std::size_t b = 0; b < bins; ++b) {
        auto& bin = table.bins[b];
        bin.lower = bin_edge(b, bins);
        bin.upper = bin_edge(b + 1, bins);
        if (bin.count == 0) continue;
        const double count = static_cast<double>(bin.count);
        bin.mean_confidence = conf_sum[b] / count;
        bin.accuracy = hit_sum[b] / count;
        table.ece += (count / n) * std::abs(bin.accuracy - bin.mean_confidence);
    }
    return table;
}

/// Multiclass Brier score: mean over samples of sum_k (p_k - [y == k])^2.
inline double brier(const PredictionSet& p) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.samples(); ++i) {
        const auto row = p.probs().row(i);
        double s = 0.0;
        for (std::size_t k = 0; k < row.size(); ++k) {
            const double target = k == static_cast<std::size_t>(p.labels()[i]) ? 1.0 : 0.0;
            s += (row[k] - target) * (row[k] - target);
        }
        total += s;
    }
    return total / static_cast<double>(p.samples());
}

inline Matrix scale_logits(const Matrix& logits, double temperature) {
    Matrix out = logits;
    for (double& z : out.data()) z /= temperature;
    return out;
}

/// Mean negative log-likelihood of softmax(logits / T).
inline double temperature_nll(const Matrix& logits, std::span<const std::int64_t> labels,
                              double temperature) {
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        double top = -std::numeric_limits<double>::infinity();
        for (double z : row) top = std::max(top, z / temperature);
        double sum = 0.0;
        for (double z : row) sum += std::exp(z / temperature - top);
        total += top + std::log(sum) - row[static_cast<std::size_t>(labels[i])] / temperature;
    }
    return total / static_cast<double>(logits.rows());
}

struct TemperatureFit {
    double temperature = 1.0;
    double nll = 0.0;
    /// NLL does not depend on T (every logit row is constant); T = 1.
    bool degenerate = false;
    /// Optimum sits on a search bound; T is snapped to that bound.
    bool at_boundary = false;
};

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;
inline constexpr double kTemperatureTolerance = 1e-4;

/// Golden-section search for the T minimizing temperature_nll on
/// [0.05, 20]. NLL is unimodal in T because it is convex in 1/T.
inline TemperatureFit temperature_fit(const Matrix& logits, std::span<const std::int64_t> labels) {
    detail::require(logits.rows() >= 1, "temperature_fit: need at least one sample");
    detail::require(logits.cols() >= 2, "temperature_fit: need at least two classes");
    detail::require(labels.size() == logits.rows(), "temperature_fit: label count mismatch");
    for (auto y : labels)
        detail::require(y >= 0 && static_cast<std::size_t>(y) < logits.cols(),
                        "temperature_fit: label out of range");
    for (double z : logits.data())
        detail::require(std::isfinite(z), "temperature_fit: non-finite logit");

    bool constant = true;
    for (std::size_t i = 0; i < logits.rows() && constant; ++i) {
        const auto row = logits.row(i);
        constant = std::all_of(row.begin(), row.end(), [&](double z) { return z == row[0]; });
    }
    if (constant) return {1.0, temperature_nll(logits, labels, 1.0), true, false};

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = kMinTemperature;
    double hi = kMaxTemperature;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = temperature_nll(logits, labels, x1);
    double f2 = temperature_nll(logits, labels, x2);
    while (hi - lo > kTemperatureTolerance) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = temperature_nll(logits, labels, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = temperature_nll(logits, labels, x2);
        }
    }
    TemperatureFit fit;
    fit.temperature = 0.5 * (lo + hi);
    if (fit.temperature - kMinTemperature <= kTemperatureTolerance) {
        fit.temperature = kMinTemperature;
        fit.at_boundary = true;
    } else if (kMaxTemperature - fit.temperature <= kTemperatureTolerance) {
        fit.temperature = kMaxTemperature;
        fit.at_boundary = true;
    }
    fit.nll = temperature_nll(logits, labels, fit.temperature);
    return fit;
}

}  // namespace dvpool
