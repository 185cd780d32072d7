#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fedclip/errors.hpp"
#include "fedclip/objective.hpp"
#include "fedclip/rng.hpp"

namespace fedclip {

/// Labeled classification samples, row-major feature matrix.
struct ClassificationDataset {
    std::size_t n_samples = 0;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<double> features; // n_samples * n_features
    std::vector<int> labels;      // values in [0, n_classes)

    const double* row(std::size_t i) const { return features.data() + i * n_features; }

    void validate() const {
        if (n_samples == 0 || n_features == 0 || n_classes < 2)
            throw ConfigError("ClassificationDataset: need samples, features and >= 2 classes");
        if (features.size() != n_samples * n_features || labels.size() != n_samples)
            throw ConfigError("ClassificationDataset: inconsistent sizes");
        for (int l : labels) {
            if (l < 0 || static_cast<std::size_t>(l) >= n_classes)
                throw ConfigError("ClassificationDataset: label out of range");
        }
    }
};

/// Gaussian class-conditional clusters with controllable separation; labels
/// are balanced round-robin. Fully determined by the seed.
inline ClassificationDataset make_synthetic_classification(std::size_t n_samples,
                                                           std::size_t n_features,
                                                           std::size_t n_classes,
                                                           double separation,
                                                           std::uint64_t seed) {
    if (n_samples == 0 || n_features == 0 || n_classes < 2)
        throw ConfigError("make_synthetic_classification: need samples, features and >= 2 classes");
    if (!(separation >= 0.0)) throw ConfigError("make_synthetic_classification: separation < 0");

    // Class centers: random directions scaled to the requested separation.
    std::vector<double> centers(n_classes * n_features, 0.0);
    for (std::size_t c = 0; c < n_classes; ++c) {
        RngStream rng(seed, c, 0, 0, DrawPurpose::kDataset);
        double norm2 = 0.0;
        for (std::size_t j = 0; j < n_features; ++j) {
            const double v = rng.gaussian();
            centers[c * n_features + j] = v;
            norm2 += v * v;
        }
        const double scale = separation / std::max(std::sqrt(norm2), 1e-12);
        for (std::size_t j = 0; j < n_features; ++j) centers[c * n_features + j] *= scale;
    }

    ClassificationDataset ds;
    ds.n_samples = n_samples;
    ds.n_features = n_features;
    ds.n_classes = n_classes;
    ds.features.resize(n_samples * n_features);
    ds.labels.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const std::size_t c = i % n_classes;
        ds.labels[i] = static_cast<int>(c);
        RngStream rng(seed, c, 1, i, DrawPurpose::kDataset);
        for (std::size_t j = 0; j < n_features; ++j)
            ds.features[i * n_features + j] = centers[c * n_features + j] + rng.gaussian();
    }
    return ds;
}

/// CSV layout: header "x0,...,x{d-1},label", one sample per row.
inline void save_dataset_csv(const ClassificationDataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_dataset_csv: cannot open " + path.string());
    for (std::size_t j = 0; j < ds.n_features; ++j) out << "x" << j << ",";
    out << "label\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.n_samples; ++i) {
        for (std::size_t j = 0; j < ds.n_features; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features[i * ds.n_features + j]);
            out << buf << ",";
        }
        out << ds.labels[i] << "\n";
    }
    if (!out) throw IoError("save_dataset_csv: write failed for " + path.string());
}

inline ClassificationDataset load_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_dataset_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError("load_dataset_csv: empty file " + path.string());

    std::size_t n_features = 0;
    {
        std::stringstream header(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(header, col, ',')) cols.push_back(col);
        if (cols.size() < 2 || cols.back() != "label")
            throw IoError("load_dataset_csv: expected feature columns followed by 'label'");
        n_features = cols.size() - 1;
    }

    ClassificationDataset ds;
    ds.n_features = n_features;
    int max_label = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(row, cell, ',')) {
            try {
                if (col < n_features) {
                    ds.features.push_back(std::stod(cell));
                } else if (col == n_features) {
                    const int l = std::stoi(cell);
                    ds.labels.push_back(l);
                    max_label = std::max(max_label, l);
                } else {
                    throw IoError("too many columns");
                }
            } catch (const std::exception&) {
                throw IoError("load_dataset_csv: bad value at " + path.string() + ":" +
                              std::to_string(line_no));
            }
            ++col;
        }
        if (col != n_features + 1)
            throw IoError("load_dataset_csv: wrong column count at " + path.string() + ":" +
                          std::to_string(line_no));
    }
    ds.n_samples = ds.labels.size();
    ds.n_classes = static_cast<std::size_t>(max_label) + 1;
    ds.validate();
    return ds;
}

/// Multinomial logistic loss over one client's index list. The parameter
/// vector is the flattened class-major weight matrix, dim = classes * features.
class LogisticClient final : public Objective {
public:
    LogisticClient(std::shared_ptr<const ClassificationDataset> dataset, std::vector<int> indices)
        : dataset_(std::move(dataset)), indices_(std::move(indices)) {
        if (!dataset_) throw ConfigError("LogisticClient: null dataset");
        dataset_->validate();
        if (indices_.empty()) throw ConfigError("LogisticClient: client has no samples");
        for (int i : indices_) {
            if (i < 0 || static_cast<std::size_t>(i) >= dataset_->n_samples)
                throw ConfigError("LogisticClient: sample index out of range");
        }
    }

    std::size_t dim() const override { return dataset_->n_classes * dataset_->n_features; }

    double value(const ParameterVector& x) const override {
        check_dim(x);
        const std::size_t k = dataset_->n_classes;
        std::vector<double> logits(k);
        double loss = 0.0;
        for (int idx : indices_) {
            compute_logits(x, static_cast<std::size_t>(idx), logits);
            loss += log_sum_exp(logits) - logits[static_cast<std::size_t>(dataset_->labels[idx])];
        }
        return loss / static_cast<double>(indices_.size());
    }

    ParameterVector gradient(const ParameterVector& x) const override {
        check_dim(x);
        const std::size_t k = dataset_->n_classes;
        const std::size_t d = dataset_->n_features;
        ParameterVector g = ParameterVector::zeros(dim());
        std::vector<double> logits(k);
        const double inv_m = 1.0 / static_cast<double>(indices_.size());
        for (int idx : indices_) {
            const std::size_t i = static_cast<std::size_t>(idx);
            compute_logits(x, i, logits);
            const double lse = log_sum_exp(logits);
            const double* feat = dataset_->row(i);
            for (std::size_t c = 0; c < k; ++c) {
                double p = std::exp(logits[c] - lse);
                if (static_cast<int>(c) == dataset_->labels[i]) p -= 1.0;
                const double w = p * inv_m;
                for (std::size_t j = 0; j < d; ++j) g[c * d + j] += w * feat[j];
            }
        }
        return g;
    }

    const std::vector<int>& indices() const { return indices_; }

private:
    void check_dim(const ParameterVector& x) const {
        if (x.dim() != dim()) throw DimensionError("LogisticClient: parameter dimension mismatch");
    }

    void compute_logits(const ParameterVector& x, std::size_t sample, std::vector<double>& out) const {
        const std::size_t d = dataset_->n_features;
        const double* feat = dataset_->row(sample);
        for (std::size_t c = 0; c < out.size(); ++c) {
            double z = 0.0;
            for (std::size_t j = 0; j < d; ++j) z += x[c * d + j] * feat[j];
            out[c] = z;
        }
    }

    static double log_sum_exp(const std::vector<double>& z) {
        const double m = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double v : z) s += std::exp(v - m);
        return m + std::log(s);
    }

    std::shared_ptr<const ClassificationDataset> dataset_;
    std::vector<int> indices_;
};

inline std::vector<ObjectivePtr> make_logistic_clients(
    std::shared_ptr<const ClassificationDataset> dataset,
    const std::vector<std::vector<int>>& partition) {
    std::vector<ObjectivePtr> out;
    out.reserve(partition.size());
    for (const auto& indices : partition)
        out.push_back(std::make_shared<LogisticClient>(dataset, indices));
    return out;
}

} // namespace fedclip
