#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "codl/errors.hpp"

namespace codl {

class Tape;

// Dense shape, rank <= 2. Scalars are rank 0, vectors rank 1 (column),
// matrices rank 2, all stored row-major.
struct Shape {
    int8_t rank = 0;
    int rows = 1;
    int cols = 1;

    static Shape scalar() { return {0, 1, 1}; }
    static Shape vector(int n) { return {1, n, 1}; }
    static Shape matrix(int r, int c) { return {2, r, c}; }

    int len() const { return rows * cols; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

// Value handle over 64-bit floats. A Tensor either owns constant data or
// refers to a node on a Tape; arithmetic on tape-attached tensors is
// recorded for reverse-mode differentiation, arithmetic on constants is
// evaluated eagerly with no recording. Copies are cheap handles.
class Tensor {
  public:
    Tensor() = default;

    static Tensor constant(Shape s, std::vector<double> values);
    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(int rows, int cols, std::vector<double> values);
    static Tensor zeros(Shape s);

    bool empty() const { return !tape_ && !owned_; }
    bool on_tape() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }

    const Shape& dims() const { return shape_; }
    std::vector<int> shape() const;
    int len() const { return shape_.len(); }

    std::span<const double> data() const;
    // Scalar value; contract error if len() != 1.
    double value() const;
    // Gradient accumulated by the owning tape's last backward pass.
    std::span<const double> grad() const;

  private:
    friend class Tape;
    friend struct TapeInternal;
    Tape* tape_ = nullptr;
    int32_t id_ = -1;
    size_t off_ = 0;
    std::shared_ptr<std::vector<double>> owned_;
    Shape shape_;
};

enum class Op : uint8_t {
    Leaf,
    Matmul,
    Add,
    Sub,
    Mul,
    Axpy,      // a + c*b
    Scale,     // c*a
    AddScalar, // a + c
    Tanh,
    Elu,
    ReluPos,
    Abs,
    Square,
    Sum,
    Mean,
    Mse,
    StackRows,
};

// Records one forward pass as a topologically ordered node list with value
// and gradient arenas. Rebuilt (reset) per forward pass; confined to a
// single thread. backward() visits each node exactly once, in reverse
// recording order, so gradients are bit-deterministic.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Clears all nodes and buffers; keeps capacity for reuse.
    void reset();

    // Registers a differentiable input, copying `values` into the arena.
    Tensor leaf(Shape s, std::span<const double> values);

    // Reverse pass from a scalar loss. Leaves not on the path get zero
    // gradient. Throws ContractError on a non-scalar or foreign loss.
    void backward(const Tensor& loss);

    size_t size() const { return nodes_.size(); }

  private:
    friend class Tensor;
    friend struct TapeInternal;

    struct Node {
        Op op;
        Shape shape;
        size_t off;
        double c = 0.0;
        Tensor a, b;
        std::vector<Tensor> list; // StackRows inputs
    };

    double* grad_dst(const Tensor& parent);

    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<double> grads_;
    bool has_grads_ = false;
};

// --- recorded operations -------------------------------------------------
// Mixing tensors from two different tapes is a contract error. The result
// lives on the inputs' tape, or is a constant when no input is attached.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor axpy(const Tensor& a, const Tensor& b, double c); // a + c*b
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor relu_pos(const Tensor& a); // [z]+ = max(z, 0)
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mse(const Tensor& pred, const Tensor& target);
// Stacks equally-shaped rows: scalars -> [N], vectors [d] -> [N x d].
Tensor stack_rows(const std::vector<Tensor>& rows);

bool all_finite(std::span<const double> v);

} // namespace codl
