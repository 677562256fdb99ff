#pragma once

#include "fmprog/types.hpp"

#include <cstddef>
#include <random>
#include <vector>

// Batched layers over a flat parameter vector. Rows of every matrix are batch items.
namespace fmprog::joint::nn {

/// Parameter layout: Wx (input x 4H), Wh (H x 4H), b (4H), all row-major. Gate order i, f, g, o.
struct LstmLayer {
    int input = 0;
    int hidden = 0;

    std::size_t size() const {
        return 4 * static_cast<std::size_t>(hidden) * static_cast<std::size_t>(input + hidden + 1);
    }
};

/// Per-step activations kept for the backward pass.
struct LstmTrace {
    std::vector<RowMatrix> gates;  // B x 4H after the nonlinearity
    std::vector<RowMatrix> cell;
    std::vector<RowMatrix> cell_tanh;
    std::vector<RowMatrix> hidden;
};

void lstm_init(const LstmLayer& layer, double* params, std::mt19937_64& rng);

/// xs holds one B x input matrix per time step; zero initial state.
void lstm_forward(const LstmLayer& layer, const double* params, const std::vector<RowMatrix>& xs, LstmTrace& trace);

/// dh[t] is the loss gradient w.r.t. hidden[t]; an empty matrix means zero. Gradients are added to
/// grad; dxs receives the input gradients when non-null.
void lstm_backward(const LstmLayer& layer, const double* params, const std::vector<RowMatrix>& xs,
                   const LstmTrace& trace, const std::vector<RowMatrix>& dh, double* grad,
                   std::vector<RowMatrix>* dxs);

/// Parameter layout: W (input x output) row-major, then b (output).
struct DenseLayer {
    int input = 0;
    int output = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(input) * static_cast<std::size_t>(output) + static_cast<std::size_t>(output);
    }
};

void dense_init(const DenseLayer& layer, double* params, std::mt19937_64& rng);
RowMatrix dense_forward(const DenseLayer& layer, const double* params, const RowMatrix& x);
void dense_backward(const DenseLayer& layer, const double* params, const RowMatrix& x, const RowMatrix& dy,
                    double* grad, RowMatrix* dx);

/// Row-wise softmax with max subtraction.
RowMatrix softmax_rows(const RowMatrix& logits);

}  // namespace fmprog::joint::nn
