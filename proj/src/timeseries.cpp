#include "codl/timeseries.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace codl {

std::span<const double> TimeSeries::row(int i) const {
    if (i < 0 || i >= n_points()) throw ContractError("TimeSeries row out of range");
    return states.data().subspan((size_t)i * dim(), dim());
}

Tensor TimeSeries::initial_state() const {
    auto r = row(0);
    return Tensor::vector({r.begin(), r.end()});
}

Tensor TimeSeries::target_states() const {
    const int n = n_points(), d = dim();
    if (n < 2) throw ContractError("TimeSeries has no target rows");
    auto all = states.data();
    return Tensor::matrix(n - 1, d, {all.begin() + d, all.end()});
}

void TimeSeries::validate() const {
    if (times.size() < 2) throw ContractError("TimeSeries needs at least 2 points");
    if (states.dims().rank != 2 || states.dims().rows != (int)times.size())
        throw ContractError("TimeSeries states shape " + states.dims().str() +
                            " does not match " + std::to_string(times.size()) + " times");
    if ((int)names.size() != dim())
        throw ContractError("TimeSeries has " + std::to_string(names.size()) + " names for dim " +
                            std::to_string(dim()));
    for (size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ContractError("TimeSeries times not strictly increasing at index " +
                                std::to_string(i));
}

namespace {

void append_g17(std::string& s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    s += buf;
}

} // namespace

void write_csv(const TimeSeries& ts, const std::string& path) {
    ts.validate();
    std::string body = "t";
    for (const auto& n : ts.names) {
        body += ',';
        body += n;
    }
    body += '\n';
    const int d = ts.dim();
    auto vals = ts.states.data();
    for (int i = 0; i < ts.n_points(); ++i) {
        append_g17(body, ts.times[i]);
        for (int j = 0; j < d; ++j) {
            body += ',';
            append_g17(body, vals[(size_t)i * d + j]);
        }
        body += '\n';
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << body;
    if (!out) throw Error("write failed: " + path);
}

TimeSeries read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": line 1: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    TimeSeries ts;
    {
        std::stringstream ss(line);
        std::string col;
        bool first = true;
        while (std::getline(ss, col, ',')) {
            if (first) {
                if (col != "t")
                    throw ParseError(path + ": line 1: first column must be 't', got '" + col +
                                     "'");
                first = false;
            } else {
                ts.names.push_back(col);
            }
        }
        if (first || ts.names.empty()) throw ParseError(path + ": line 1: malformed header");
    }

    const size_t d = ts.names.size();
    std::vector<double> flat;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) {
            size_t pos = 0;
            double v = 0;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw ParseError(path + ": line " + std::to_string(lineno) + ": bad number '" +
                                 cell + "'");
            }
            if (pos != cell.size())
                throw ParseError(path + ": line " + std::to_string(lineno) +
                                 ": trailing characters in '" + cell + "'");
            vals.push_back(v);
        }
        if (vals.size() != d + 1)
            throw ParseError(path + ": line " + std::to_string(lineno) + ": expected " +
                             std::to_string(d + 1) + " fields, got " + std::to_string(vals.size()));
        ts.times.push_back(vals[0]);
        flat.insert(flat.end(), vals.begin() + 1, vals.end());
    }
    if (ts.times.size() < 2) throw ParseError(path + ": fewer than 2 data rows");
    ts.states = Tensor::matrix((int)ts.times.size(), (int)d, std::move(flat));
    ts.validate();
    return ts;
}

} // namespace codl
