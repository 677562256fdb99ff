#pragma once

#include "fmprog/joint/nn.hpp"
#include "fmprog/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace fmprog::joint {

/// Network sizes. The (hidden1, hidden2) pair sizes both the classifier's two dense hidden layers
/// and each regressor's two stacked LSTM layers.
struct Architecture {
    int window = 60;
    int features = 0;
    int modes = 1;
    int hidden1 = 16;
    int hidden2 = 16;

    bool has_classifier() const { return modes > 1; }
    std::size_t classifier_size() const;
    std::size_t regressor_size() const;  // one mode
    std::size_t parameter_count() const;
};

/// Weights of the combined objective sum(w_c l_c) + w_r sum(l_r) + eta sum(pen).
struct LossConfig {
    double lambda = 10.0;  // infinity drops the classification term (RUL-only objective)
    double eta = 0.0;
    double zeta = -1.0;
    double a = 0.9;
    int stride = 1;  // end-cycle gap that makes two windows consecutive

    double classification_weight() const { return std::isinf(lambda) ? 0.0 : 1.0; }
    double regression_weight() const { return std::isinf(lambda) ? 1.0 : lambda; }
    void validate() const;
};

/// A batch of windows. Mode labels are required when the classifier term is active.
struct Batch {
    std::vector<const RowMatrix*> inputs;  // each window x features
    std::vector<double> targets;
    std::vector<int> modes;     // -1 when unknown
    std::vector<int> unit_ids;
    std::vector<int> end_cycles;

    std::size_t size() const { return inputs.size(); }
};

struct BatchOutput {
    RowMatrix probabilities;  // B x V
    RowMatrix mode_rul;       // B x V, clamped at 0
    Eigen::VectorXd rul;      // probability-weighted combination
};

struct LossBreakdown {
    double classification = 0.0;  // unweighted sums
    double regression = 0.0;
    double monotonic = 0.0;
    double total = 0.0;            // weighted objective
    std::size_t pairs = 0;         // consecutive pairs that entered the penalty
    double kink_margin = std::numeric_limits<double>::infinity();  // distance of the nearest non-smooth point
};

class JointModel {
public:
    JointModel() = default;

    /// Random initialisation. RUL outputs are rul_scale times the linear head, whose bias starts at
    /// rul_offset / rul_scale.
    JointModel(const Architecture& arch, double rul_scale, double rul_offset, std::uint64_t seed);
    JointModel(const Architecture& arch, double rul_scale, Eigen::VectorXd parameters);

    const Architecture& architecture() const { return arch_; }
    double rul_scale() const { return rul_scale_; }
    const Eigen::VectorXd& parameters() const { return params_; }
    Eigen::VectorXd& parameters() { return params_; }

    BatchOutput forward(const std::vector<const RowMatrix*>& windows) const;

    /// Summed objective over the batch; the gradient is written to grad (resized) when non-null.
    LossBreakdown loss(const Batch& batch, const LossConfig& config, Eigen::VectorXd* grad = nullptr) const;

private:
    struct Trace;
    void run_forward(const std::vector<const RowMatrix*>& windows, Trace& trace) const;

    Architecture arch_;
    double rul_scale_ = 1.0;
    Eigen::VectorXd params_;
};

}  // namespace fmprog::joint
