#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "codl/tensor.hpp"

using namespace codl;

namespace {

std::vector<double> random_vec(size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = ((double)(rng() >> 11) * 0x1.0p-52 - 1.0) * scale;
    return v;
}

using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

// Autodiff gradient of fn at theta, next to a central-difference probe.
std::vector<double> autodiff_grad(const std::vector<double>& theta, const ScalarFn& fn) {
    Tape tape;
    Tensor leaf = tape.leaf(Shape::vector((int)theta.size()), theta);
    Tensor loss = fn(tape, leaf);
    tape.backward(loss);
    auto g = leaf.grad();
    return {g.begin(), g.end()};
}

double eval_at(const std::vector<double>& theta, const ScalarFn& fn) {
    Tape tape;
    Tensor leaf = tape.leaf(Shape::vector((int)theta.size()), theta);
    return fn(tape, leaf).value();
}

// Max relative error of autodiff vs central differences over every coordinate.
double fd_worst_rel_err(const std::vector<double>& theta, const ScalarFn& fn, double h = 1e-6) {
    const auto grad = autodiff_grad(theta, fn);
    double worst = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        auto tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        const double fd = (eval_at(tp, fn) - eval_at(tm, fn)) / (2 * h);
        const double scale = std::max({std::fabs(fd), std::fabs(grad[i]), 1e-6});
        worst = std::max(worst, std::fabs(fd - grad[i]) / scale);
    }
    return worst;
}

} // namespace

TEST_CASE("matmul examples") {
    Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    Tensor r = matmul(eye, a);
    auto rd = r.data();
    CHECK(std::vector<double>(rd.begin(), rd.end()) == std::vector<double>{1, 2, 3, 4});

    Tensor pick = Tensor::matrix(1, 2, {1, 0});
    Tensor col = Tensor::matrix(2, 1, {0, 5});
    CHECK(matmul(pick, col).value() == 0.0);

    Tensor b = Tensor::matrix(2, 1, {5, 6});
    Tensor m = matmul(a, b);
    CHECK(m.data()[0] == 17.0);
    CHECK(m.data()[1] == 39.0);

    CHECK_THROWS_AS(matmul(a, Tensor::matrix(3, 1, {1, 2, 3})), DimensionError);
}

TEST_CASE("elementwise op examples") {
    CHECK(tanh(Tensor::scalar(0.0)).value() == 0.0);
    CHECK(relu_pos(Tensor::scalar(-3.2)).value() == 0.0);
    CHECK(relu_pos(Tensor::scalar(0.0)).value() == 0.0);
    CHECK(elu(Tensor::scalar(-1.0)).value() == doctest::Approx(std::expm1(-1.0)).epsilon(1e-15));
    CHECK(elu(Tensor::scalar(-1.0)).value() == doctest::Approx(-0.6321).epsilon(1e-4));
    CHECK(elu(Tensor::scalar(2.5)).value() == 2.5);
    CHECK(abs(Tensor::scalar(-2.0)).value() == 2.0);
}

TEST_CASE("mse examples") {
    Tensor a = Tensor::matrix(2, 2, {1, 1, 3, 3});
    CHECK(mse(a, a).value() == 0.0);
    CHECK(mse(Tensor::vector({0}), Tensor::vector({2})).value() == 4.0);
    Tensor b = Tensor::matrix(2, 2, {1, 2, 3, 5});
    CHECK(mse(a, b).value() == doctest::Approx(1.25).epsilon(1e-15));
    CHECK_THROWS_AS(mse(a, Tensor::vector({1, 2})), DimensionError);
}

TEST_CASE("backward basics") {
    // loss = sum(theta) -> gradient of ones
    {
        Tape tape;
        Tensor th = tape.leaf(Shape::vector(5), std::vector<double>{1, 2, 3, 4, 5});
        Tensor loss = sum(th);
        tape.backward(loss);
        for (double g : th.grad()) CHECK(g == 1.0);
    }
    // loss = mse(theta, 0) with theta=[2] -> gradient [4]
    {
        Tape tape;
        Tensor th = tape.leaf(Shape::vector(1), std::vector<double>{2.0});
        Tensor loss = mse(th, Tensor::vector({0.0}));
        tape.backward(loss);
        CHECK(th.grad()[0] == 4.0);
    }
    // leaves off the path get zero gradient
    {
        Tape tape;
        Tensor a = tape.leaf(Shape::vector(2), std::vector<double>{1, 2});
        Tensor b = tape.leaf(Shape::vector(2), std::vector<double>{3, 4});
        tape.backward(sum(a));
        CHECK(b.grad()[0] == 0.0);
        CHECK(b.grad()[1] == 0.0);
    }
    // non-scalar loss rejected
    {
        Tape tape;
        Tensor a = tape.leaf(Shape::vector(2), std::vector<double>{1, 2});
        CHECK_THROWS_AS(tape.backward(add(a, a)), ContractError);
    }
}

TEST_CASE("subgradients at kinks are zero") {
    Tape tape;
    Tensor a = tape.leaf(Shape::vector(3), std::vector<double>{-1.0, 0.0, 1.0});
    tape.backward(sum(relu_pos(a)));
    CHECK(a.grad()[0] == 0.0);
    CHECK(a.grad()[1] == 0.0);
    CHECK(a.grad()[2] == 1.0);

    Tape tape2;
    Tensor b = tape2.leaf(Shape::vector(3), std::vector<double>{-1.0, 0.0, 1.0});
    tape2.backward(sum(abs(b)));
    CHECK(b.grad()[0] == -1.0);
    CHECK(b.grad()[1] == 0.0);
    CHECK(b.grad()[2] == 1.0);
}

TEST_CASE("finite differences validate every primitive") {
    std::mt19937_64 rng(42);
    // Each builder maps a parameter vector to a scalar loss through one
    // primitive (plus sum/mean to scalarize). Kinked ops get inputs bounded
    // away from the kink by the draw scale below.
    struct Probe {
        const char* name;
        int n;
        ScalarFn fn;
    };
    const std::vector<Probe> probes = {
        {"matmul", 3,
         [](Tape&, const Tensor& th) {
             Tensor w = Tensor::matrix(2, 3, {0.3, -0.2, 0.5, 1.0, 0.7, -0.4});
             return sum(matmul(w, th));
         }},
        {"add/sub/mul", 4,
         [](Tape&, const Tensor& th) {
             Tensor c = Tensor::vector({0.5, -1.5, 2.0, 0.25});
             return sum(mul(sub(add(th, c), mul(th, c)), th));
         }},
        {"axpy/scale/add_scalar", 4,
         [](Tape&, const Tensor& th) {
             return sum(add_scalar(scale(axpy(th, mul(th, th), 0.5), -1.25), 3.0));
         }},
        {"tanh", 5, [](Tape&, const Tensor& th) { return sum(tanh(th)); }},
        {"elu", 5, [](Tape&, const Tensor& th) { return sum(elu(th)); }},
        {"relu_pos", 5, [](Tape&, const Tensor& th) { return sum(relu_pos(th)); }},
        {"abs", 5, [](Tape&, const Tensor& th) { return sum(abs(th)); }},
        {"square", 5, [](Tape&, const Tensor& th) { return mean(square(th)); }},
        {"mse", 5,
         [](Tape&, const Tensor& th) {
             return mse(th, Tensor::vector({0.1, 0.2, 0.3, 0.4, 0.5}));
         }},
        {"stack_rows", 6,
         [](Tape& tape, const Tensor& th) {
             (void)tape;
             std::vector<Tensor> rows;
             rows.push_back(tanh(th));
             rows.push_back(mul(th, th));
             return mean(square(stack_rows(rows)));
         }},
    };
    for (const auto& p : probes) {
        CAPTURE(p.name);
        for (int draw = 0; draw < 10; ++draw) {
            // keep a margin around kinks so central differences are valid
            std::vector<double> theta = random_vec(p.n, rng);
            for (auto& x : theta)
                if (std::fabs(x) < 1e-2) x = x < 0 ? x - 1e-2 : x + 1e-2;
            CHECK(fd_worst_rel_err(theta, p.fn) < 1e-4);
        }
    }
}

TEST_CASE("finite differences validate a 3-layer MLP loss") {
    std::mt19937_64 rng(7);
    // 2 -> 3 -> 3 -> 2 MLP with tanh/elu, loss = mse against a constant.
    const int n_params = (2 * 3 + 3) + (3 * 3 + 3) + (3 * 2 + 2);
    ScalarFn fn = [](Tape&, const Tensor& th) {
        auto slice = [&th](int off, int len, Shape s) {
            std::vector<Tensor> rows;
            (void)rows;
            // constant selector matrix picks params [off, off+len) from th
            std::vector<double> sel((size_t)len * th.len(), 0.0);
            for (int i = 0; i < len; ++i) sel[(size_t)i * th.len() + off + i] = 1.0;
            Tensor picked = matmul(Tensor::matrix(len, th.len(), std::move(sel)), th);
            if (s.rank == 2) {
                // rebuild matrix shape via stack of row slices
                std::vector<Tensor> rs;
                for (int r = 0; r < s.rows; ++r) {
                    std::vector<double> rowsel((size_t)s.cols * len, 0.0);
                    for (int c = 0; c < s.cols; ++c)
                        rowsel[(size_t)c * len + r * s.cols + c] = 1.0;
                    rs.push_back(matmul(Tensor::matrix(s.cols, len, std::move(rowsel)), picked));
                }
                return stack_rows(rs);
            }
            return picked;
        };
        int off = 0;
        Tensor w1 = slice(off, 6, Shape::matrix(3, 2));
        off += 6;
        Tensor b1 = slice(off, 3, Shape::vector(3));
        off += 3;
        Tensor w2 = slice(off, 9, Shape::matrix(3, 3));
        off += 9;
        Tensor b2 = slice(off, 3, Shape::vector(3));
        off += 3;
        Tensor w3 = slice(off, 6, Shape::matrix(2, 3));
        off += 6;
        Tensor b3 = slice(off, 2, Shape::vector(2));

        Tensor x = Tensor::vector({0.3, -0.7});
        Tensor h1 = tanh(add(matmul(w1, x), b1));
        Tensor h2 = elu(add(matmul(w2, h1), b2));
        Tensor out = add(matmul(w3, h2), b3);
        return mse(out, Tensor::vector({0.5, -0.25}));
    };
    for (int draw = 0; draw < 5; ++draw) {
        std::vector<double> theta = random_vec(n_params, rng, 0.8);
        CHECK(fd_worst_rel_err(theta, fn) < 1e-5);
    }
}

TEST_CASE("backward is deterministic") {
    std::mt19937_64 rng(11);
    const std::vector<double> theta = random_vec(8, rng);
    ScalarFn fn = [](Tape&, const Tensor& th) { return mean(square(tanh(th))); };
    CHECK(autodiff_grad(theta, fn) == autodiff_grad(theta, fn));
}

TEST_CASE("tapes cannot be mixed and reset reuses storage") {
    Tape t1, t2;
    Tensor a = t1.leaf(Shape::vector(2), std::vector<double>{1, 2});
    Tensor b = t2.leaf(Shape::vector(2), std::vector<double>{3, 4});
    CHECK_THROWS_AS(add(a, b), ContractError);

    t1.reset();
    CHECK(t1.size() == 0);
    Tensor c = t1.leaf(Shape::vector(2), std::vector<double>{5, 6});
    t1.backward(sum(c));
    CHECK(c.grad()[0] == 1.0);
}

TEST_CASE("constant-path evaluation records nothing") {
    Tape tape;
    Tensor c = mul(Tensor::vector({1, 2}), Tensor::vector({3, 4}));
    CHECK(!c.on_tape());
    CHECK(tape.size() == 0);
    CHECK(c.data()[1] == 8.0);
}
