#include "fmprog/joint/nn.hpp"

#include <cmath>

namespace fmprog::joint::nn {

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const Eigen::RowVectorXd>;
using RowMap = Eigen::Map<Eigen::RowVectorXd>;

struct LstmViews {
    ConstMap wx, wh;
    ConstRowMap b;
};

LstmViews lstm_views(const LstmLayer& l, const double* p) {
    const Eigen::Index g = 4 * l.hidden;
    return {ConstMap(p, l.input, g), ConstMap(p + l.input * g, l.hidden, g),
            ConstRowMap(p + (l.input + l.hidden) * g, g)};
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void lstm_init(const LstmLayer& l, double* p, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.hidden));
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t weights = 4 * static_cast<std::size_t>(l.hidden) * static_cast<std::size_t>(l.input + l.hidden);
    for (std::size_t i = 0; i < weights; ++i) p[i] = u(rng);
    double* b = p + weights;
    for (int j = 0; j < 4 * l.hidden; ++j) b[j] = 0.0;
    for (int j = l.hidden; j < 2 * l.hidden; ++j) b[j] = 1.0;  // forget gate
}

void lstm_forward(const LstmLayer& l, const double* p, const std::vector<RowMatrix>& xs, LstmTrace& trace) {
    const auto v = lstm_views(l, p);
    const std::size_t steps = xs.size();
    const Eigen::Index batch = steps ? xs.front().rows() : 0;
    const Eigen::Index h = l.hidden;
    trace.gates.resize(steps);
    trace.cell.resize(steps);
    trace.cell_tanh.resize(steps);
    trace.hidden.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        RowMatrix z = xs[t] * v.wx;
        z.rowwise() += v.b;
        if (t > 0) z.noalias() += trace.hidden[t - 1] * v.wh;
        auto& a = trace.gates[t];
        a.resize(batch, 4 * h);
        a.leftCols(2 * h) = z.leftCols(2 * h).unaryExpr(&sigmoid);
        a.middleCols(2 * h, h) = z.middleCols(2 * h, h).array().tanh().matrix();
        a.rightCols(h) = z.rightCols(h).unaryExpr(&sigmoid);

        auto& c = trace.cell[t];
        c = a.leftCols(h).cwiseProduct(a.middleCols(2 * h, h));
        if (t > 0) c += a.middleCols(h, h).cwiseProduct(trace.cell[t - 1]);
        trace.cell_tanh[t] = c.array().tanh().matrix();
        trace.hidden[t] = a.rightCols(h).cwiseProduct(trace.cell_tanh[t]);
    }
}

void lstm_backward(const LstmLayer& l, const double* p, const std::vector<RowMatrix>& xs, const LstmTrace& trace,
                   const std::vector<RowMatrix>& dh, double* grad, std::vector<RowMatrix>* dxs) {
    const auto v = lstm_views(l, p);
    const Eigen::Index g4 = 4 * l.hidden;
    const Eigen::Index h = l.hidden;
    Map gwx(grad, l.input, g4);
    Map gwh(grad + l.input * g4, h, g4);
    RowMap gb(grad + (l.input + h) * g4, g4);

    const std::size_t steps = xs.size();
    if (steps == 0) return;
    const Eigen::Index batch = xs.front().rows();
    if (dxs) dxs->assign(steps, RowMatrix());
    RowMatrix dh_next = RowMatrix::Zero(batch, h);
    RowMatrix dc_next = RowMatrix::Zero(batch, h);
    RowMatrix dz(batch, g4);
    for (std::size_t t = steps; t-- > 0;) {
        const auto& a = trace.gates[t];
        const auto i = a.leftCols(h).array();
        const auto f = a.middleCols(h, h).array();
        const auto gg = a.middleCols(2 * h, h).array();
        const auto o = a.rightCols(h).array();
        const auto tc = trace.cell_tanh[t].array();

        RowMatrix dht = dh_next;
        if (dh[t].size() != 0) dht += dh[t];
        const Eigen::ArrayXXd dc = dc_next.array() + dht.array() * o * (1.0 - tc.square());

        dz.leftCols(h) = (dc * gg * i * (1.0 - i)).matrix();
        if (t > 0) {
            dz.middleCols(h, h) = (dc * trace.cell[t - 1].array() * f * (1.0 - f)).matrix();
        } else {
            dz.middleCols(h, h).setZero();
        }
        dz.middleCols(2 * h, h) = (dc * i * (1.0 - gg.square())).matrix();
        dz.rightCols(h) = (dht.array() * tc * o * (1.0 - o)).matrix();

        gwx.noalias() += xs[t].transpose() * dz;
        gb += dz.colwise().sum();
        if (t > 0) gwh.noalias() += trace.hidden[t - 1].transpose() * dz;
        if (dxs) (*dxs)[t].noalias() = dz * v.wx.transpose();
        dh_next.noalias() = dz * v.wh.transpose();
        dc_next = (dc * f).matrix();
    }
}

void dense_init(const DenseLayer& l, double* p, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.input));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < l.size(); ++i) p[i] = u(rng);
}

RowMatrix dense_forward(const DenseLayer& l, const double* p, const RowMatrix& x) {
    const ConstMap w(p, l.input, l.output);
    const ConstRowMap b(p + l.input * l.output, l.output);
    RowMatrix y = x * w;
    y.rowwise() += b;
    return y;
}

void dense_backward(const DenseLayer& l, const double* p, const RowMatrix& x, const RowMatrix& dy, double* grad,
                    RowMatrix* dx) {
    Map gw(grad, l.input, l.output);
    RowMap gb(grad + l.input * l.output, l.output);
    gw.noalias() += x.transpose() * dy;
    gb += dy.colwise().sum();
    if (dx) {
        const ConstMap w(p, l.input, l.output);
        dx->noalias() = dy * w.transpose();
    }
}

RowMatrix softmax_rows(const RowMatrix& logits) {
    RowMatrix out = logits;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        out.row(r).array() -= out.row(r).maxCoeff();
        out.row(r) = out.row(r).array().exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

}  // namespace fmprog::joint::nn
