#include "codl/tensor.hpp"

#include <cmath>
#include <utility>

#include "codl/kernels.hpp"

namespace codl {

std::string Shape::str() const {
    if (rank == 0) return "[]";
    if (rank == 1) return "[" + std::to_string(rows) + "]";
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// --- Tensor ---------------------------------------------------------------

Tensor Tensor::constant(Shape s, std::vector<double> values) {
    if ((int)values.size() != s.len())
        throw DimensionError("constant: shape " + s.str() + " needs " + std::to_string(s.len()) +
                             " values, got " + std::to_string(values.size()));
    Tensor t;
    t.shape_ = s;
    t.owned_ = std::make_shared<std::vector<double>>(std::move(values));
    return t;
}

Tensor Tensor::scalar(double v) { return constant(Shape::scalar(), {v}); }

Tensor Tensor::vector(std::vector<double> values) {
    Shape s = Shape::vector((int)values.size());
    return constant(s, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
    return constant(Shape::matrix(rows, cols), std::move(values));
}

Tensor Tensor::zeros(Shape s) { return constant(s, std::vector<double>(s.len(), 0.0)); }

std::vector<int> Tensor::shape() const {
    if (shape_.rank == 0) return {};
    if (shape_.rank == 1) return {shape_.rows};
    return {shape_.rows, shape_.cols};
}

std::span<const double> Tensor::data() const {
    if (tape_) return {tape_->vals_.data() + off_, (size_t)shape_.len()};
    if (owned_) return {owned_->data(), owned_->size()};
    throw ContractError("data() on empty tensor");
}

double Tensor::value() const {
    if (len() != 1) throw ContractError("value() on non-scalar tensor " + shape_.str());
    return data()[0];
}

std::span<const double> Tensor::grad() const {
    if (!tape_) throw ContractError("grad() on a tensor not attached to a tape");
    if (!tape_->has_grads_) throw ContractError("grad() before backward()");
    return {tape_->grads_.data() + off_, (size_t)shape_.len()};
}

// --- Tape -----------------------------------------------------------------

void Tape::reset() {
    nodes_.clear();
    vals_.clear();
    grads_.clear();
    has_grads_ = false;
}

Tensor Tape::leaf(Shape s, std::span<const double> values) {
    if ((int)values.size() != s.len())
        throw DimensionError("leaf: shape " + s.str() + " needs " + std::to_string(s.len()) +
                             " values, got " + std::to_string(values.size()));
    has_grads_ = false;
    size_t off = vals_.size();
    vals_.insert(vals_.end(), values.begin(), values.end());
    Node n;
    n.op = Op::Leaf;
    n.shape = s;
    n.off = off;
    nodes_.push_back(std::move(n));
    Tensor t;
    t.tape_ = this;
    t.id_ = (int32_t)nodes_.size() - 1;
    t.off_ = off;
    t.shape_ = s;
    return t;
}

double* Tape::grad_dst(const Tensor& parent) {
    if (!parent.tape_) return nullptr;
    return grads_.data() + parent.off_;
}

// --- op plumbing ----------------------------------------------------------

struct TapeInternal {
    // Allocates the result (on the inputs' tape, or as a constant) and
    // returns its writable storage. Must run before input data() spans are
    // taken: growing the value arena can move it.
    static std::pair<Tensor, double*> make(Op op, Shape s, const Tensor& a, const Tensor& b,
                                           double c, std::vector<Tensor> list) {
        Tape* tape = a.tape_;
        auto merge = [&tape](const Tensor& t) {
            if (!t.tape_) return;
            if (tape && tape != t.tape_) throw ContractError("operands belong to different tapes");
            tape = t.tape_;
        };
        merge(b);
        for (const Tensor& t : list) merge(t);

        Tensor out;
        out.shape_ = s;
        double* dst = nullptr;
        if (tape) {
            tape->has_grads_ = false;
            size_t off = tape->vals_.size();
            tape->vals_.resize(off + (size_t)s.len());
            Tape::Node n;
            n.op = op;
            n.shape = s;
            n.off = off;
            n.c = c;
            n.a = a;
            n.b = b;
            n.list = std::move(list);
            tape->nodes_.push_back(std::move(n));
            out.tape_ = tape;
            out.id_ = (int32_t)tape->nodes_.size() - 1;
            out.off_ = off;
            dst = tape->vals_.data() + off;
        } else {
            out.owned_ = std::make_shared<std::vector<double>>((size_t)s.len());
            dst = out.owned_->data();
        }
        return {std::move(out), dst};
    }

    static void backward(Tape& tape, const Tensor& loss);
};

namespace {

Shape same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!(a.dims() == b.dims()))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.dims().str() + " vs " +
                             b.dims().str());
    return a.dims();
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.dims();
    const Shape& sb = b.dims();
    if (sa.rank != 2 || (sb.rank != 2 && sb.rank != 1) || sa.cols != sb.rows)
        throw DimensionError("matmul: incompatible shapes " + sa.str() + " x " + sb.str());
    Shape out = sb.rank == 2 ? Shape::matrix(sa.rows, sb.cols) : Shape::vector(sa.rows);
    auto [t, dst] = TapeInternal::make(Op::Matmul, out, a, b, 0.0, {});
    kern::matmul(a.data().data(), b.data().data(), dst, sa.rows, sa.cols, sb.cols);
    return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
    Shape s = same_shape("add", a, b);
    auto [t, dst] = TapeInternal::make(Op::Add, s, a, b, 0.0, {});
    kern::add(a.data().data(), b.data().data(), dst, s.len());
    return t;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Shape s = same_shape("sub", a, b);
    auto [t, dst] = TapeInternal::make(Op::Sub, s, a, b, 0.0, {});
    kern::sub(a.data().data(), b.data().data(), dst, s.len());
    return t;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Shape s = same_shape("mul", a, b);
    auto [t, dst] = TapeInternal::make(Op::Mul, s, a, b, 0.0, {});
    kern::mul(a.data().data(), b.data().data(), dst, s.len());
    return t;
}

Tensor axpy(const Tensor& a, const Tensor& b, double c) {
    Shape s = same_shape("axpy", a, b);
    auto [t, dst] = TapeInternal::make(Op::Axpy, s, a, b, c, {});
    kern::axpy(a.data().data(), b.data().data(), c, dst, s.len());
    return t;
}

Tensor scale(const Tensor& a, double c) {
    auto [t, dst] = TapeInternal::make(Op::Scale, a.dims(), a, {}, c, {});
    kern::scale(a.data().data(), c, dst, a.len());
    return t;
}

Tensor add_scalar(const Tensor& a, double c) {
    auto [t, dst] = TapeInternal::make(Op::AddScalar, a.dims(), a, {}, c, {});
    kern::add_scalar(a.data().data(), c, dst, a.len());
    return t;
}

Tensor tanh(const Tensor& a) {
    auto [t, dst] = TapeInternal::make(Op::Tanh, a.dims(), a, {}, 0.0, {});
    kern::tanh_map(a.data().data(), dst, a.len());
    return t;
}

Tensor elu(const Tensor& a) {
    auto [t, dst] = TapeInternal::make(Op::Elu, a.dims(), a, {}, 0.0, {});
    kern::elu_map(a.data().data(), dst, a.len());
    return t;
}

Tensor relu_pos(const Tensor& a) {
    auto [t, dst] = TapeInternal::make(Op::ReluPos, a.dims(), a, {}, 0.0, {});
    kern::relu_pos_map(a.data().data(), dst, a.len());
    return t;
}

Tensor abs(const Tensor& a) {
    auto [t, dst] = TapeInternal::make(Op::Abs, a.dims(), a, {}, 0.0, {});
    kern::abs_map(a.data().data(), dst, a.len());
    return t;
}

Tensor square(const Tensor& a) {
    auto [t, dst] = TapeInternal::make(Op::Square, a.dims(), a, {}, 0.0, {});
    kern::square_map(a.data().data(), dst, a.len());
    return t;
}

Tensor sum(const Tensor& a) {
    auto [t, dst] = TapeInternal::make(Op::Sum, Shape::scalar(), a, {}, 0.0, {});
    auto av = a.data();
    double s = 0.0;
    for (double x : av) s += x;
    *dst = s;
    return t;
}

Tensor mean(const Tensor& a) {
    if (a.len() < 1) throw ContractError("mean of empty tensor");
    auto [t, dst] = TapeInternal::make(Op::Mean, Shape::scalar(), a, {}, 0.0, {});
    auto av = a.data();
    double s = 0.0;
    for (double x : av) s += x;
    *dst = s / (double)a.len();
    return t;
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    Shape s = same_shape("mse", pred, target);
    if (s.len() < 1) throw ContractError("mse of empty tensors");
    auto [t, dst] = TapeInternal::make(Op::Mse, Shape::scalar(), pred, target, 0.0, {});
    auto pv = pred.data();
    auto tv = target.data();
    double acc = 0.0;
    for (int i = 0; i < s.len(); ++i) {
        double d = pv[i] - tv[i];
        acc += d * d;
    }
    *dst = acc / (double)s.len();
    return t;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ContractError("stack_rows of zero rows");
    const Shape rs = rows.front().dims();
    if (rs.rank > 1) throw DimensionError("stack_rows: rows must be scalars or vectors");
    for (const Tensor& r : rows)
        if (!(r.dims() == rs))
            throw DimensionError("stack_rows: row shape " + r.dims().str() + " differs from " +
                                 rs.str());
    int n = (int)rows.size();
    int d = rs.len();
    Shape out = rs.rank == 0 ? Shape::vector(n) : Shape::matrix(n, d);
    auto [t, dst] = TapeInternal::make(Op::StackRows, out, {}, {}, 0.0, rows);
    for (int r = 0; r < n; ++r) {
        auto rv = rows[r].data();
        for (int i = 0; i < d; ++i) dst[(size_t)r * d + i] = rv[i];
    }
    return t;
}

// --- backward ---------------------------------------------------------------

void TapeInternal::backward(Tape& tape, const Tensor& loss) {
    if (loss.tape_ != &tape) throw ContractError("backward: loss does not belong to this tape");
    if (loss.len() != 1)
        throw ContractError("backward: loss must be scalar, got " + loss.dims().str());

    tape.grads_.assign(tape.vals_.size(), 0.0);
    tape.has_grads_ = true;
    tape.grads_[loss.off_] = 1.0;

    for (size_t idx = tape.nodes_.size(); idx-- > 0;) {
        Tape::Node& n = tape.nodes_[idx];
        const double* g = tape.grads_.data() + n.off;
        const int len = n.shape.len();
        double* ga = tape.grad_dst(n.a);
        double* gb = tape.grad_dst(n.b);
        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Matmul: {
            const int m = n.a.dims().rows, k = n.a.dims().cols, c = n.b.dims().cols;
            if (ga) kern::matmul_acc_nt(g, n.b.data().data(), ga, m, k, c);
            if (gb) kern::matmul_acc_tn(n.a.data().data(), g, gb, m, k, c);
            break;
        }
        case Op::Add:
            if (ga) kern::acc(g, ga, len);
            if (gb) kern::acc(g, gb, len);
            break;
        case Op::Sub:
            if (ga) kern::acc(g, ga, len);
            if (gb) kern::acc_scaled(g, -1.0, gb, len);
            break;
        case Op::Mul:
            if (ga) kern::mul_acc(g, n.b.data().data(), ga, len);
            if (gb) kern::mul_acc(g, n.a.data().data(), gb, len);
            break;
        case Op::Axpy:
            if (ga) kern::acc(g, ga, len);
            if (gb) kern::acc_scaled(g, n.c, gb, len);
            break;
        case Op::Scale:
            if (ga) kern::acc_scaled(g, n.c, ga, len);
            break;
        case Op::AddScalar:
            if (ga) kern::acc(g, ga, len);
            break;
        case Op::Tanh:
            if (ga) kern::tanh_bwd(g, tape.vals_.data() + n.off, ga, len);
            break;
        case Op::Elu:
            if (ga) kern::elu_bwd(g, n.a.data().data(), ga, len);
            break;
        case Op::ReluPos:
            if (ga) kern::relu_pos_bwd(g, n.a.data().data(), ga, len);
            break;
        case Op::Abs:
            if (ga) kern::abs_bwd(g, n.a.data().data(), ga, len);
            break;
        case Op::Square:
            if (ga) kern::square_bwd(g, n.a.data().data(), ga, len);
            break;
        case Op::Sum: {
            const double gs = *g;
            if (ga) {
                const int an = n.a.len();
                for (int i = 0; i < an; ++i) ga[i] += gs;
            }
            break;
        }
        case Op::Mean: {
            if (ga) {
                const int an = n.a.len();
                const double gs = *g / (double)an;
                for (int i = 0; i < an; ++i) ga[i] += gs;
            }
            break;
        }
        case Op::Mse: {
            const double gs = 2.0 * *g / (double)n.a.len();
            const double* pv = n.a.data().data();
            const double* tv = n.b.data().data();
            const int an = n.a.len();
            for (int i = 0; i < an; ++i) {
                const double d = gs * (pv[i] - tv[i]);
                if (ga) ga[i] += d;
                if (gb) gb[i] -= d;
            }
            break;
        }
        case Op::StackRows: {
            const int d = (int)n.list.front().len();
            for (size_t r = 0; r < n.list.size(); ++r) {
                if (double* gr = tape.grad_dst(n.list[r])) {
                    const double* gsrc = g + r * d;
                    for (int i = 0; i < d; ++i) gr[i] += gsrc[i];
                }
            }
            break;
        }
        }
    }
}

void Tape::backward(const Tensor& loss) { TapeInternal::backward(*this, loss); }

} // namespace codl
