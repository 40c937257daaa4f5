#include "predlab/autodiff.hpp"

#include <cmath>

namespace predlab {

int Tape::push(Matrix value, std::function<void(Tape&)> back) {
    Node n;
    n.grad = Matrix(value.rows, value.cols);
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(const Matrix& m) {
    return push(m, nullptr);
}

int Tape::gather_rows(int table, const std::vector<int>& ids) {
    const Matrix& T = val(table);
    for (int r : ids)
        if (r < 0 || r >= T.rows) throw SpecError("gather row out of range");
    Matrix out(static_cast<int>(ids.size()), T.cols);
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < T.cols; ++j)
            out.at(static_cast<int>(i), j) = T.at(ids[i], j);
    return push(std::move(out), [table, ids, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        Matrix& gt = t.g(table);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < up.cols; ++j)
                gt.at(ids[i], j) += up.at(static_cast<int>(i), j);
    });
}

int Tape::add(int a, int b) {
    const Matrix& A = val(a);
    const Matrix& B = val(b);
    if (!A.same_shape(B)) throw SpecError("shape mismatch in add");
    Matrix out = A;
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += B.a[i];
    int id = push(std::move(out), [a, b, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        for (std::size_t i = 0; i < up.a.size(); ++i) {
            t.g(a).a[i] += up.a[i];
            t.g(b).a[i] += up.a[i];
        }
    });
    return id;
}

int Tape::add_const(int a, const Matrix& c) {
    const Matrix& A = val(a);
    if (!A.same_shape(c)) throw SpecError("shape mismatch in add_const");
    Matrix out = A;
    for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += c.a[i];
    return push(std::move(out), [a, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        for (std::size_t i = 0; i < up.a.size(); ++i) t.g(a).a[i] += up.a[i];
    });
}

int Tape::add_row(int a, int row) {
    const Matrix& A = val(a);
    const Matrix& R = val(row);
    if (R.rows != 1 || R.cols != A.cols) throw SpecError("bias row shape mismatch");
    Matrix out = A;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += R.at(0, j);
    return push(std::move(out), [a, row, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        for (int i = 0; i < up.rows; ++i)
            for (int j = 0; j < up.cols; ++j) {
                t.g(a).at(i, j) += up.at(i, j);
                t.g(row).at(0, j) += up.at(i, j);
            }
    });
}

namespace {

Matrix mul(const Matrix& A, const Matrix& B) {
    if (A.cols != B.rows) throw SpecError("shape mismatch in matmul");
    Matrix out(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            double aik = A.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) out.at(i, j) += aik * B.at(k, j);
        }
    return out;
}

Matrix mul_nt(const Matrix& A, const Matrix& B) {
    if (A.cols != B.cols) throw SpecError("shape mismatch in matmul_nt");
    Matrix out(A.rows, B.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < B.rows; ++j) {
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += A.at(i, k) * B.at(j, k);
            out.at(i, j) = s;
        }
    return out;
}

Matrix mul_tn(const Matrix& A, const Matrix& B) {
    if (A.rows != B.rows) throw SpecError("shape mismatch in matmul_tn");
    Matrix out(A.cols, B.cols);
    for (int k = 0; k < A.rows; ++k)
        for (int i = 0; i < A.cols; ++i) {
            double aki = A.at(k, i);
            if (aki == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) out.at(i, j) += aki * B.at(k, j);
        }
    return out;
}

void accumulate(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += src.a[i];
}

}  // namespace

int Tape::matmul(int a, int b) {
    Matrix out = mul(val(a), val(b));
    return push(std::move(out), [a, b, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        accumulate(t.g(a), mul_nt(up, t.val(b)));
        accumulate(t.g(b), mul_tn(t.val(a), up));
    });
}

int Tape::matmul_nt(int a, int b) {
    Matrix out = mul_nt(val(a), val(b));
    return push(std::move(out), [a, b, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        accumulate(t.g(a), mul(up, t.val(b)));
        accumulate(t.g(b), mul_tn(up, t.val(a)));
    });
}

int Tape::const_matmul(const Matrix& a, int b) {
    Matrix out = mul(a, val(b));
    return push(std::move(out), [a, b, id = static_cast<int>(nodes_.size())](Tape& t) {
        accumulate(t.g(b), mul_tn(a, t.g(id)));
    });
}

int Tape::scale(int a, double s) {
    Matrix out = val(a);
    for (double& v : out.a) v *= s;
    return push(std::move(out), [a, s, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        for (std::size_t i = 0; i < up.a.size(); ++i) t.g(a).a[i] += s * up.a[i];
    });
}

int Tape::relu(int a) {
    Matrix out = val(a);
    for (double& v : out.a)
        if (v < 0.0) v = 0.0;
    return push(std::move(out), [a, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        const Matrix& x = t.val(a);
        for (std::size_t i = 0; i < up.a.size(); ++i)
            if (x.a[i] > 0.0) t.g(a).a[i] += up.a[i];
    });
}

int Tape::slice_cols(int a, int from, int width) {
    const Matrix& A = val(a);
    if (from < 0 || width < 1 || from + width > A.cols)
        throw SpecError("column slice out of range");
    Matrix out(A.rows, width);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < width; ++j) out.at(i, j) = A.at(i, from + j);
    return push(std::move(out), [a, from, width, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        for (int i = 0; i < up.rows; ++i)
            for (int j = 0; j < width; ++j) t.g(a).at(i, from + j) += up.at(i, j);
    });
}

int Tape::concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw SpecError("empty concatenation");
    int rows = val(parts[0]).rows, cols = 0;
    for (int p : parts) {
        if (val(p).rows != rows) throw SpecError("row mismatch in concat_cols");
        cols += val(p).cols;
    }
    Matrix out(rows, cols);
    int off = 0;
    for (int p : parts) {
        const Matrix& P = val(p);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < P.cols; ++j) out.at(i, off + j) = P.at(i, j);
        off += P.cols;
    }
    return push(std::move(out), [parts, id = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& up = t.g(id);
        int off = 0;
        for (int p : parts) {
            Matrix& gp = t.g(p);
            for (int i = 0; i < up.rows; ++i)
                for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += up.at(i, off + j);
            off += gp.cols;
        }
    });
}

int Tape::causal_span_softmax(int logits, int span) {
    const Matrix& L = val(logits);
    if (L.rows != L.cols) throw SpecError("attention logits must be square");
    if (span < 1) throw SpecError("span must be >= 1");
    Matrix out(L.rows, L.cols);
    for (int i = 0; i < L.rows; ++i) {
        int lo = std::max(0, i - span + 1);
        double m = L.at(i, lo);
        for (int j = lo; j <= i; ++j) m = std::max(m, L.at(i, j));
        double z = 0.0;
        for (int j = lo; j <= i; ++j) z += std::exp(L.at(i, j) - m);
        for (int j = lo; j <= i; ++j) out.at(i, j) = std::exp(L.at(i, j) - m) / z;
    }
    return push(std::move(out),
                [logits, span, id = static_cast<int>(nodes_.size())](Tape& t) {
                    const Matrix& up = t.g(id);
                    const Matrix& s = t.val(id);
                    for (int i = 0; i < up.rows; ++i) {
                        int lo = std::max(0, i - span + 1);
                        double dot = 0.0;
                        for (int j = lo; j <= i; ++j) dot += up.at(i, j) * s.at(i, j);
                        for (int j = lo; j <= i; ++j)
                            t.g(logits).at(i, j) += s.at(i, j) * (up.at(i, j) - dot);
                    }
                });
}

int Tape::softmax_xent_mean(int logits, const std::vector<int>& labels) {
    const Matrix& L = val(logits);
    if (static_cast<int>(labels.size()) != L.rows)
        throw SpecError("label count does not match logit rows");
    for (int y : labels)
        if (y < 0 || y >= L.cols) throw SpecError("label outside logit columns");
    Matrix out(1, 1);
    double total = 0.0;
    for (int i = 0; i < L.rows; ++i) {
        double m = L.at(i, 0);
        for (int j = 1; j < L.cols; ++j) m = std::max(m, L.at(i, j));
        double z = 0.0;
        for (int j = 0; j < L.cols; ++j) z += std::exp(L.at(i, j) - m);
        total += m + std::log(z) - L.at(i, labels[static_cast<std::size_t>(i)]);
    }
    out.at(0, 0) = total / L.rows;
    return push(std::move(out),
                [logits, labels, id = static_cast<int>(nodes_.size())](Tape& t) {
                    const double up = t.g(id).at(0, 0);
                    const Matrix& L = t.val(logits);
                    const double inv = up / L.rows;
                    for (int i = 0; i < L.rows; ++i) {
                        double m = L.at(i, 0);
                        for (int j = 1; j < L.cols; ++j) m = std::max(m, L.at(i, j));
                        double z = 0.0;
                        for (int j = 0; j < L.cols; ++j) z += std::exp(L.at(i, j) - m);
                        for (int j = 0; j < L.cols; ++j) {
                            double p = std::exp(L.at(i, j) - m) / z;
                            double delta = j == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                            t.g(logits).at(i, j) += inv * (p - delta);
                        }
                    }
                });
}

int Tape::mean_scalars(const std::vector<int>& scalars) {
    if (scalars.empty()) throw SpecError("mean over no scalars");
    Matrix out(1, 1);
    for (int s : scalars) {
        const Matrix& S = val(s);
        if (S.rows != 1 || S.cols != 1) throw SpecError("mean_scalars needs 1x1 nodes");
        out.at(0, 0) += S.at(0, 0);
    }
    out.at(0, 0) /= static_cast<double>(scalars.size());
    return push(std::move(out),
                [scalars, id = static_cast<int>(nodes_.size())](Tape& t) {
                    double share = t.g(id).at(0, 0) / static_cast<double>(scalars.size());
                    for (int s : scalars) t.g(s).at(0, 0) += share;
                });
}

int Tape::sum_all(int a) {
    Matrix out(1, 1);
    for (double v : val(a).a) out.at(0, 0) += v;
    return push(std::move(out), [a, id = static_cast<int>(nodes_.size())](Tape& t) {
        double up = t.g(id).at(0, 0);
        for (double& v : t.g(a).a) v += up;
    });
}

void Tape::backward(int root) {
    Matrix& r = g(check(root));
    if (r.rows != 1 || r.cols != 1) throw SpecError("backward needs a 1x1 root");
    r.at(0, 0) = 1.0;
    for (int id = root; id >= 0; --id) {
        auto& n = nodes_[static_cast<std::size_t>(id)];
        if (n.back) n.back(*this);
    }
}

Adam::Adam(std::vector<Matrix*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (Matrix* p : params_) {
        m_.emplace_back(p->rows, p->cols);
        v_.emplace_back(p->rows, p->cols);
    }
}

void Adam::step(const std::vector<const Matrix*>& grads) {
    if (grads.size() != params_.size()) throw SpecError("gradient list size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Matrix& w = *params_[p];
        const Matrix& grad = *grads[p];
        if (!w.same_shape(grad)) throw SpecError("gradient shape mismatch");
        for (std::size_t i = 0; i < w.a.size(); ++i) {
            double gi = grad.a[i];
            m_[p].a[i] = beta1_ * m_[p].a[i] + (1.0 - beta1_) * gi;
            v_[p].a[i] = beta2_ * v_[p].a[i] + (1.0 - beta2_) * gi * gi;
            double mhat = m_[p].a[i] / bc1;
            double vhat = v_[p].a[i] / bc2;
            w.a[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace predlab
