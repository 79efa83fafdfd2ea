#include "codl/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace codl {

void validate_spec(const std::vector<LayerSpec>& spec) {
    int first_in = -1, cur = -1;
    for (const auto& l : spec) {
        if (l.kind == LayerSpec::Kind::Linear) {
            if (l.in < 1 || l.out < 1) throw ConfigError("linear layer with non-positive width");
            if (first_in < 0)
                first_in = l.in;
            else if (l.in != cur)
                throw ConfigError("linear input width " + std::to_string(l.in) +
                                  " does not match previous output width " + std::to_string(cur));
            cur = l.out;
        } else if (first_in < 0) {
            throw ConfigError("network must start with a linear layer");
        }
    }
    if (first_in < 0) throw ConfigError("network has no linear layer");
    if (cur != first_in)
        throw ConfigError("output width " + std::to_string(cur) + " does not match state dim " +
                          std::to_string(first_in));
}

int DynamicsNet::state_dim() const {
    for (const auto& l : spec)
        if (l.kind == LayerSpec::Kind::Linear) return l.in;
    return 0;
}

int param_count(const std::vector<LayerSpec>& spec) {
    int n = 0;
    for (const auto& l : spec)
        if (l.kind == LayerSpec::Kind::Linear) n += l.in * l.out + l.out;
    return n;
}

uint64_t spec_hash(const std::vector<LayerSpec>& spec) {
    uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
    auto mix = [&h](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& l : spec) {
        mix((uint64_t)l.kind);
        mix((uint64_t)(uint32_t)l.in);
        mix((uint64_t)(uint32_t)l.out);
    }
    return h;
}

DynamicsNet build_net(std::vector<LayerSpec> spec, uint64_t seed) {
    validate_spec(spec);
    DynamicsNet net;
    net.spec = std::move(spec);
    net.rng_seed = seed;
    net.params.reserve(param_count(net.spec));
    std::mt19937_64 rng(seed);
    auto uniform = [&rng]() {
        // top 53 bits -> [0, 1)
        return (double)(rng() >> 11) * 0x1.0p-53;
    };
    for (const auto& l : net.spec) {
        if (l.kind != LayerSpec::Kind::Linear) continue;
        const double bound = 1.0 / std::sqrt((double)l.in);
        const int n = l.in * l.out + l.out;
        for (int i = 0; i < n; ++i) net.params.push_back((2.0 * uniform() - 1.0) * bound);
    }
    return net;
}

DynamicsNet build_wpg_net(uint64_t seed) {
    return build_net({LayerSpec::linear(1, 50), LayerSpec::tanh(), LayerSpec::linear(50, 50),
                      LayerSpec::elu(), LayerSpec::linear(50, 1)},
                     seed);
}

DynamicsNet build_cr_net(uint64_t seed) {
    return build_net({LayerSpec::linear(4, 50), LayerSpec::tanh(), LayerSpec::linear(50, 64),
                      LayerSpec::elu(), LayerSpec::linear(64, 50), LayerSpec::tanh(),
                      LayerSpec::linear(50, 4)},
                     seed);
}

NetEval::NetEval(Tape* tape, const DynamicsNet& net) : NetEval(tape, net.spec, net.params) {}

NetEval::NetEval(Tape* tape, const std::vector<LayerSpec>& spec, std::span<const double> theta)
    : spec_(spec), on_tape_(tape != nullptr) {
    validate_spec(spec_);
    n_params_ = param_count(spec_);
    if ((int)theta.size() != n_params_)
        throw DimensionError("parameter vector has " + std::to_string(theta.size()) +
                             " entries, spec needs " + std::to_string(n_params_));
    size_t off = 0;
    for (const auto& l : spec_) {
        if (l.kind != LayerSpec::Kind::Linear) continue;
        Bound b;
        b.in = l.in;
        b.out = l.out;
        auto wspan = theta.subspan(off, (size_t)l.in * l.out);
        auto bspan = theta.subspan(off + (size_t)l.in * l.out, l.out);
        if (tape) {
            b.w = tape->leaf(Shape::matrix(l.out, l.in), wspan);
            b.b = tape->leaf(Shape::vector(l.out), bspan);
        } else {
            b.w = Tensor::constant(Shape::matrix(l.out, l.in), {wspan.begin(), wspan.end()});
            b.b = Tensor::constant(Shape::vector(l.out), {bspan.begin(), bspan.end()});
        }
        off += (size_t)l.in * l.out + l.out;
        linear_.push_back(std::move(b));
    }
}

Tensor NetEval::operator()(double /*t*/, const Tensor& y) const {
    Tensor h = y;
    size_t li = 0;
    for (const auto& l : spec_) {
        switch (l.kind) {
        case LayerSpec::Kind::Linear: {
            const Bound& b = linear_[li++];
            h = add(matmul(b.w, h), b.b);
            break;
        }
        case LayerSpec::Kind::Tanh:
            h = tanh(h);
            break;
        case LayerSpec::Kind::Elu:
            h = elu(h);
            break;
        }
    }
    return h;
}

Dynamics NetEval::dynamics() const {
    return [ev = *this](double t, const Tensor& y) { return ev(t, y); };
}

void NetEval::collect_grad(std::vector<double>& grad) const {
    if (!on_tape_) throw ContractError("collect_grad on a constant-bound network");
    grad.resize(n_params_);
    size_t off = 0;
    for (const auto& b : linear_) {
        auto gw = b.w.grad();
        std::memcpy(grad.data() + off, gw.data(), gw.size() * sizeof(double));
        off += gw.size();
        auto gb = b.b.grad();
        std::memcpy(grad.data() + off, gb.data(), gb.size() * sizeof(double));
        off += gb.size();
    }
}

Tensor net_forward(const DynamicsNet& net, double t, const Tensor& y) {
    return NetEval(nullptr, net)(t, y);
}

// --- parameter file -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'C', 'O', 'D', 'L'};
constexpr uint8_t kVersion = 1;

void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back((char)((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back((char)((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    const std::string& path;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size())
            throw ParseError(path + ": truncated at byte offset " + std::to_string(pos) +
                             " (need " + std::to_string(n) + " more bytes)");
    }
    uint8_t u8() {
        need(1);
        return (uint8_t)buf[pos++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= (uint32_t)(uint8_t)buf[pos + i] << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= (uint64_t)(uint8_t)buf[pos + i] << (8 * i);
        pos += 8;
        return v;
    }
};

} // namespace

void save_params(const DynamicsNet& net, const std::string& path) {
    std::string s;
    s.append(kMagic, 4);
    s.push_back((char)kVersion);
    put_u64(s, spec_hash(net.spec));
    put_u32(s, (uint32_t)net.spec.size());
    for (const auto& l : net.spec) {
        s.push_back((char)l.kind);
        put_u32(s, (uint32_t)l.in);
        put_u32(s, (uint32_t)l.out);
    }
    put_u64(s, net.rng_seed);
    put_u64(s, (uint64_t)net.params.size());
    for (double v : net.params) put_u64(s, std::bit_cast<uint64_t>(v));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write(s.data(), (std::streamsize)s.size());
    if (!out) throw Error("write failed: " + path);
}

DynamicsNet load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r{buf, path};
    r.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw ParseError(path + ": bad magic at byte offset 0");
    r.pos = 4;
    const uint8_t version = r.u8();
    if (version != kVersion)
        throw ParseError(path + ": unsupported version " + std::to_string(version) +
                         " at byte offset 4");
    const uint64_t stored_hash = r.u64();

    DynamicsNet net;
    const uint32_t n_layers = r.u32();
    for (uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec l;
        const uint8_t kind = r.u8();
        if (kind > (uint8_t)LayerSpec::Kind::Elu)
            throw ParseError(path + ": unknown layer kind at byte offset " +
                             std::to_string(r.pos - 1));
        l.kind = (LayerSpec::Kind)kind;
        l.in = (int)r.u32();
        l.out = (int)r.u32();
        net.spec.push_back(l);
    }
    if (spec_hash(net.spec) != stored_hash)
        throw ParseError(path + ": spec hash mismatch (file corrupt or layer table altered)");

    net.rng_seed = r.u64();
    const uint64_t n_params = r.u64();
    if (n_params != (uint64_t)param_count(net.spec))
        throw ParseError(path + ": parameter count " + std::to_string(n_params) +
                         " does not match layer table (" + std::to_string(param_count(net.spec)) +
                         ")");
    net.params.reserve(n_params);
    for (uint64_t i = 0; i < n_params; ++i)
        net.params.push_back(std::bit_cast<double>(r.u64()));
    if (r.pos != buf.size())
        throw ParseError(path + ": trailing bytes at offset " + std::to_string(r.pos));
    validate_spec(net.spec);
    return net;
}

} // namespace codl
