#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "predlab/common.hpp"

namespace predlab {

// Row-major dense matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw SpecError("negative matrix dimensions");
    }

    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// Reverse-mode tape over matrix primitives. Build a graph forward, then call
// backward on a 1x1 root; node creation order doubles as the topological order.
class Tape {
public:
    int leaf(const Matrix& m);

    const Matrix& val(int id) const { return nodes_[check(id)].value; }
    const Matrix& grad(int id) const { return nodes_[check(id)].grad; }

    int gather_rows(int table, const std::vector<int>& ids);
    int add(int a, int b);
    int add_const(int a, const Matrix& c);
    int add_row(int a, int row);  // broadcast a 1xC bias over every row
    int matmul(int a, int b);
    int matmul_nt(int a, int b);  // A * B^T
    int const_matmul(const Matrix& a, int b);
    int scale(int a, double s);
    int relu(int a);
    int slice_cols(int a, int from, int width);
    int concat_cols(const std::vector<int>& parts);
    // row-wise softmax where row i sees only columns j with i-span < j <= i
    int causal_span_softmax(int logits, int span);
    // mean over rows of -log softmax(row)[label]; returns a 1x1 node
    int softmax_xent_mean(int logits, const std::vector<int>& labels);
    int mean_scalars(const std::vector<int>& scalars);
    int sum_all(int a);

    void backward(int root);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;

    int check(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw SpecError("tape node id out of range");
        return id;
    }
    int push(Matrix value, std::function<void(Tape&)> back);
    Matrix& g(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
};

// Adam-style adaptive gradient step over a fixed set of tensors.
class Adam {
public:
    explicit Adam(std::vector<Matrix*> params, double lr = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);
    void step(const std::vector<const Matrix*>& grads);

private:
    std::vector<Matrix*> params_;
    std::vector<Matrix> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace predlab
