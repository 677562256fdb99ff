#include "fmprog/joint/model.hpp"

#include "fmprog/error.hpp"
#include "fmprog/joint/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace fmprog::joint {

namespace {

struct Layout {
    nn::DenseLayer c1, c2, c3;
    nn::LstmLayer r1, r2;
    nn::DenseLayer head;
    std::size_t classifier = 0;
    std::size_t regressor = 0;

    explicit Layout(const Architecture& a)
        : c1{a.window * a.features, a.hidden1},
          c2{a.hidden1, a.hidden2},
          c3{a.hidden2, a.modes},
          r1{a.features, a.hidden1},
          r2{a.hidden1, a.hidden2},
          head{a.hidden2, 1} {
        classifier = a.has_classifier() ? c1.size() + c2.size() + c3.size() : 0;
        regressor = r1.size() + r2.size() + head.size();
    }

    std::size_t mode_offset(int v) const { return classifier + static_cast<std::size_t>(v) * regressor; }
};

void check_architecture(const Architecture& a) {
    if (a.window < 1 || a.features < 1 || a.modes < 1 || a.hidden1 < 1 || a.hidden2 < 1) {
        throw Error(ErrorKind::Parameter, "joint model: window, features, modes and hidden sizes must be positive");
    }
}

RowMatrix relu(const RowMatrix& z) { return z.cwiseMax(0.0); }

}  // namespace

std::size_t Architecture::classifier_size() const { return Layout(*this).classifier; }
std::size_t Architecture::regressor_size() const { return Layout(*this).regressor; }
std::size_t Architecture::parameter_count() const {
    const Layout l(*this);
    return l.classifier + static_cast<std::size_t>(modes) * l.regressor;
}

void LossConfig::validate() const {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::Parameter, "lambda must be >= 0");
    if (!(eta >= 0.0)) throw Error(ErrorKind::Parameter, "eta must be >= 0");
    if (stride < 1) throw Error(ErrorKind::Parameter, "stride must be >= 1");
    if (eta > 0.0) {
        if (!(zeta < 0.0)) throw Error(ErrorKind::Parameter, "zeta must be negative");
        if (!(a > 0.0 && a < -zeta)) throw Error(ErrorKind::Parameter, "need 0 < a < -zeta");
    }
}

struct JointModel::Trace {
    std::vector<RowMatrix> xs;  // step -> B x S
    RowMatrix flat, z1, h1, z2, h2, probabilities;
    struct Mode {
        nn::LstmTrace l1, l2;
        Eigen::VectorXd raw;  // head output before scaling and clamp
    };
    std::vector<Mode> modes;
    RowMatrix mode_rul;
    Eigen::VectorXd rul;
};

JointModel::JointModel(const Architecture& arch, double rul_scale, double rul_offset, std::uint64_t seed)
    : arch_(arch), rul_scale_(rul_scale) {
    check_architecture(arch);
    if (!(rul_scale > 0.0)) throw Error(ErrorKind::Parameter, "joint model: rul_scale must be positive");
    const Layout l(arch);
    params_.resize(static_cast<Eigen::Index>(arch.parameter_count()));
    std::mt19937_64 rng(seed);
    double* p = params_.data();
    if (arch.has_classifier()) {
        nn::dense_init(l.c1, p, rng);
        nn::dense_init(l.c2, p + l.c1.size(), rng);
        nn::dense_init(l.c3, p + l.c1.size() + l.c2.size(), rng);
    }
    for (int v = 0; v < arch.modes; ++v) {
        double* r = p + l.mode_offset(v);
        nn::lstm_init(l.r1, r, rng);
        nn::lstm_init(l.r2, r + l.r1.size(), rng);
        double* head = r + l.r1.size() + l.r2.size();
        nn::dense_init(l.head, head, rng);
        head[arch.hidden2] = rul_offset / rul_scale;
    }
}

JointModel::JointModel(const Architecture& arch, double rul_scale, Eigen::VectorXd parameters)
    : arch_(arch), rul_scale_(rul_scale), params_(std::move(parameters)) {
    check_architecture(arch);
    if (static_cast<std::size_t>(params_.size()) != arch.parameter_count()) {
        throw Error(ErrorKind::Contract, "joint model: parameter vector has " + std::to_string(params_.size()) +
                                             " entries, architecture needs " + std::to_string(arch.parameter_count()));
    }
}

void JointModel::run_forward(const std::vector<const RowMatrix*>& windows, Trace& tr) const {
    const Layout l(arch_);
    const auto batch = static_cast<Eigen::Index>(windows.size());
    if (batch == 0) throw Error(ErrorKind::Contract, "joint model: empty batch");
    for (const auto* w : windows) {
        if (w->rows() != arch_.window || w->cols() != arch_.features) {
            throw Error(ErrorKind::Contract, "joint model: window is " + std::to_string(w->rows()) + "x" +
                                                 std::to_string(w->cols()) + ", expected " +
                                                 std::to_string(arch_.window) + "x" + std::to_string(arch_.features));
        }
    }
    tr.xs.assign(static_cast<std::size_t>(arch_.window), RowMatrix(batch, arch_.features));
    for (Eigen::Index b = 0; b < batch; ++b) {
        for (int t = 0; t < arch_.window; ++t) tr.xs[static_cast<std::size_t>(t)].row(b) = windows[static_cast<std::size_t>(b)]->row(t);
    }

    const double* p = params_.data();
    if (arch_.has_classifier()) {
        tr.flat.resize(batch, arch_.window * arch_.features);
        for (Eigen::Index b = 0; b < batch; ++b) {
            tr.flat.row(b) = Eigen::Map<const Eigen::RowVectorXd>(windows[static_cast<std::size_t>(b)]->data(), tr.flat.cols());
        }
        tr.z1 = nn::dense_forward(l.c1, p, tr.flat);
        tr.h1 = relu(tr.z1);
        tr.z2 = nn::dense_forward(l.c2, p + l.c1.size(), tr.h1);
        tr.h2 = relu(tr.z2);
        tr.probabilities = nn::softmax_rows(nn::dense_forward(l.c3, p + l.c1.size() + l.c2.size(), tr.h2));
    } else {
        tr.probabilities = RowMatrix::Ones(batch, 1);
    }

    tr.modes.resize(static_cast<std::size_t>(arch_.modes));
    tr.mode_rul.resize(batch, arch_.modes);
    for (int v = 0; v < arch_.modes; ++v) {
        auto& m = tr.modes[static_cast<std::size_t>(v)];
        const double* r = p + l.mode_offset(v);
        nn::lstm_forward(l.r1, r, tr.xs, m.l1);
        nn::lstm_forward(l.r2, r + l.r1.size(), m.l1.hidden, m.l2);
        m.raw = nn::dense_forward(l.head, r + l.r1.size() + l.r2.size(), m.l2.hidden.back()).col(0);
        tr.mode_rul.col(v) = (rul_scale_ * m.raw).cwiseMax(0.0);
    }
    tr.rul = tr.probabilities.cwiseProduct(tr.mode_rul).rowwise().sum();
}

BatchOutput JointModel::forward(const std::vector<const RowMatrix*>& windows) const {
    Trace tr;
    run_forward(windows, tr);
    return {std::move(tr.probabilities), std::move(tr.mode_rul), std::move(tr.rul)};
}

LossBreakdown JointModel::loss(const Batch& batch, const LossConfig& config, Eigen::VectorXd* grad) const {
    config.validate();
    const std::size_t n = batch.size();
    if (batch.targets.size() != n || batch.modes.size() != n || batch.unit_ids.size() != n || batch.end_cycles.size() != n) {
        throw Error(ErrorKind::Contract, "joint loss: batch fields differ in length");
    }
    Trace tr;
    run_forward(batch.inputs, tr);

    const double wc = arch_.has_classifier() ? config.classification_weight() : 0.0;
    const double wr = config.regression_weight();
    const auto bsz = static_cast<Eigen::Index>(n);
    const int modes = arch_.modes;

    LossBreakdown out;
    Eigen::VectorXd d_rul(bsz);
    RowMatrix d_prob = RowMatrix::Zero(bsz, modes);
    for (Eigen::Index i = 0; i < bsz; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (wc > 0.0) {
            const int q = batch.modes[ui];
            if (q < 0 || q >= modes) throw Error(ErrorKind::Contract, "joint loss: instance lacks a valid mode label");
            const double pq = tr.probabilities(i, q);
            out.classification -= std::log(std::max(pq, kProbabilityFloor));
            if (pq >= kProbabilityFloor) d_prob(i, q) -= wc / pq;
        }
        out.regression += loss_hs(tr.rul[i], batch.targets[ui]);
        d_rul[i] = wr * loss_hs_grad(tr.rul[i], batch.targets[ui]);
        out.kink_margin = std::min(out.kink_margin, std::abs(tr.rul[i] - batch.targets[ui]));
    }
    if (config.eta > 0.0) {
        for (std::size_t i = 1; i < n; ++i) {
            if (batch.unit_ids[i] != batch.unit_ids[i - 1] || batch.end_cycles[i] - batch.end_cycles[i - 1] != config.stride) {
                continue;
            }
            const auto ii = static_cast<Eigen::Index>(i);
            const double slope = (tr.rul[ii] - tr.rul[ii - 1]) / config.stride;
            out.monotonic += loss_mono(slope, config.zeta, config.a);
            ++out.pairs;
            out.kink_margin = std::min(out.kink_margin, std::abs(std::abs(slope - config.zeta) - config.a));
            const double g = config.eta * loss_mono_grad(slope, config.zeta, config.a) / config.stride;
            d_rul[ii] += g;
            d_rul[ii - 1] -= g;
        }
    }
    out.total = wc * out.classification + wr * out.regression + config.eta * out.monotonic;
    for (Eigen::Index i = 0; i < bsz; ++i) {
        for (int v = 0; v < modes; ++v) {
            if (tr.mode_rul(i, v) == 0.0) out.kink_margin = std::min(out.kink_margin, std::abs(rul_scale_ * tr.modes[static_cast<std::size_t>(v)].raw[i]));
        }
    }
    if (arch_.has_classifier()) {
        out.kink_margin = std::min({out.kink_margin, tr.z1.cwiseAbs().minCoeff(), tr.z2.cwiseAbs().minCoeff()});
    }
    if (!grad) return out;

    const Layout l(arch_);
    grad->setZero(params_.size());
    const double* p = params_.data();
    double* g = grad->data();

    // y = sum_v P_v R_v
    d_prob += d_rul.asDiagonal() * tr.mode_rul;
    if (arch_.has_classifier()) {
        const Eigen::VectorXd inner = tr.probabilities.cwiseProduct(d_prob).rowwise().sum();
        RowMatrix d_logits = tr.probabilities.cwiseProduct(d_prob - inner.replicate(1, modes));
        RowMatrix dh2, dh1;
        nn::dense_backward(l.c3, p + l.c1.size() + l.c2.size(), tr.h2, d_logits, g + l.c1.size() + l.c2.size(), &dh2);
        dh2 = dh2.cwiseProduct((tr.z2.array() > 0.0).cast<double>().matrix());
        nn::dense_backward(l.c2, p + l.c1.size(), tr.h1, dh2, g + l.c1.size(), &dh1);
        dh1 = dh1.cwiseProduct((tr.z1.array() > 0.0).cast<double>().matrix());
        nn::dense_backward(l.c1, p, tr.flat, dh1, g, nullptr);
    }
    for (int v = 0; v < modes; ++v) {
        const auto& m = tr.modes[static_cast<std::size_t>(v)];
        const std::size_t off = l.mode_offset(v);
        RowMatrix d_raw(bsz, 1);
        for (Eigen::Index i = 0; i < bsz; ++i) {
            d_raw(i, 0) = tr.mode_rul(i, v) > 0.0 ? d_rul[i] * tr.probabilities(i, v) * rul_scale_ : 0.0;
        }
        RowMatrix d_top;
        nn::dense_backward(l.head, p + off + l.r1.size() + l.r2.size(), m.l2.hidden.back(), d_raw,
                           g + off + l.r1.size() + l.r2.size(), &d_top);
        std::vector<RowMatrix> dh(static_cast<std::size_t>(arch_.window));
        dh.back() = std::move(d_top);
        std::vector<RowMatrix> d_below;
        nn::lstm_backward(l.r2, p + off + l.r1.size(), m.l1.hidden, m.l2, dh, g + off + l.r1.size(), &d_below);
        nn::lstm_backward(l.r1, p + off, tr.xs, m.l1, d_below, g + off, nullptr);
    }
    return out;
}

}  // namespace fmprog::joint
