#include "spectron/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace spectron {

namespace {

constexpr double kRmsEps = 1e-8;
constexpr double kGeluCoeff = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / 3.14159265358979323846);

} // namespace

Tape::NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::at(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
        throw std::invalid_argument("tape: node id " + std::to_string(id) + " out of range");
    return nodes_[static_cast<std::size_t>(id)];
}

const DenseMatrix& Tape::value(NodeId id) const { return at(id).value; }

Tape::NodeId Tape::leaf(const DenseMatrix& value, const std::string& name) {
    if (!name.empty())
        for (const Node& n : nodes_)
            if (n.name == name)
                throw std::invalid_argument("tape: duplicate leaf name '" + name + "'");
    Node node;
    node.op = Op::Leaf;
    node.value = value;
    node.name = name;
    return push(std::move(node));
}

Tape::NodeId Tape::matmul(NodeId x, NodeId y, bool trans_x, bool trans_y) {
    Node node;
    node.op = Op::MatMul;
    node.x = x;
    node.y = y;
    node.trans_x = trans_x;
    node.trans_y = trans_y;
    node.value = matmul_t(at(x).value, trans_x, at(y).value, trans_y);
    return push(std::move(node));
}

Tape::NodeId Tape::add(NodeId x, NodeId y) {
    Node node;
    node.op = Op::Add;
    node.x = x;
    node.y = y;
    node.value = spectron::add(at(x).value, at(y).value);
    return push(std::move(node));
}

Tape::NodeId Tape::scale(NodeId x, double c) {
    Node node;
    node.op = Op::Scale;
    node.x = x;
    node.c = c;
    node.value = spectron::scale(at(x).value, c);
    return push(std::move(node));
}

Tape::NodeId Tape::gelu(NodeId x) {
    Node node;
    node.op = Op::Gelu;
    node.x = x;
    node.value = at(x).value;
    for (double& v : node.value.data()) {
        const double u = kSqrt2OverPi * (v + kGeluCoeff * v * v * v);
        v = 0.5 * v * (1.0 + std::tanh(u));
    }
    return push(std::move(node));
}

Tape::NodeId Tape::rms_norm(NodeId x, NodeId gain) {
    const DenseMatrix& xv = at(x).value;
    const DenseMatrix& gv = at(gain).value;
    if (gv.rows() != 1 || gv.cols() != xv.cols())
        throw std::invalid_argument("rms_norm: gain must be 1x" + std::to_string(xv.cols()));
    Node node;
    node.op = Op::RmsNorm;
    node.x = x;
    node.y = gain;
    node.value = DenseMatrix(xv.rows(), xv.cols());
    const std::size_t n = xv.cols();
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        double mean_sq = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean_sq += xv(i, j) * xv(i, j);
        mean_sq /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(mean_sq + kRmsEps);
        for (std::size_t j = 0; j < n; ++j) node.value(i, j) = gv(0, j) * xv(i, j) * inv;
    }
    return push(std::move(node));
}

Tape::NodeId Tape::causal_softmax(NodeId scores) {
    const DenseMatrix& s = at(scores).value;
    if (s.rows() != s.cols())
        throw std::invalid_argument("causal_softmax: scores must be square, got " + shape_str(s));
    Node node;
    node.op = Op::CausalSoftmax;
    node.x = scores;
    node.value = DenseMatrix(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double hi = s(i, 0);
        for (std::size_t j = 1; j <= i; ++j) hi = std::max(hi, s(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j <= i; ++j) denom += std::exp(s(i, j) - hi);
        for (std::size_t j = 0; j <= i; ++j) node.value(i, j) = std::exp(s(i, j) - hi) / denom;
    }
    return push(std::move(node));
}

Tape::NodeId Tape::slice_rows(NodeId x, std::size_t begin, std::size_t end) {
    const DenseMatrix& xv = at(x).value;
    if (begin >= end || end > xv.rows())
        throw std::invalid_argument("slice_rows: bad range");
    Node node;
    node.op = Op::SliceRows;
    node.x = x;
    node.begin = begin;
    node.end = end;
    node.value = DenseMatrix(end - begin, xv.cols());
    for (std::size_t i = begin; i < end; ++i)
        for (std::size_t j = 0; j < xv.cols(); ++j) node.value(i - begin, j) = xv(i, j);
    return push(std::move(node));
}

Tape::NodeId Tape::slice_cols(NodeId x, std::size_t begin, std::size_t end) {
    const DenseMatrix& xv = at(x).value;
    if (begin >= end || end > xv.cols())
        throw std::invalid_argument("slice_cols: bad range");
    Node node;
    node.op = Op::SliceCols;
    node.x = x;
    node.begin = begin;
    node.end = end;
    node.value = DenseMatrix(xv.rows(), end - begin);
    for (std::size_t i = 0; i < xv.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j) node.value(i, j - begin) = xv(i, j);
    return push(std::move(node));
}

Tape::NodeId Tape::concat_rows(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    std::size_t rows = 0;
    const std::size_t cols = at(parts.front()).value.cols();
    for (NodeId p : parts) {
        if (at(p).value.cols() != cols)
            throw std::invalid_argument("concat_rows: column mismatch");
        rows += at(p).value.rows();
    }
    Node node;
    node.op = Op::ConcatRows;
    node.parts = parts;
    node.value = DenseMatrix(rows, cols);
    std::size_t at_row = 0;
    for (NodeId p : parts) {
        const DenseMatrix& pv = at(p).value;
        for (std::size_t i = 0; i < pv.rows(); ++i)
            for (std::size_t j = 0; j < cols; ++j) node.value(at_row + i, j) = pv(i, j);
        at_row += pv.rows();
    }
    return push(std::move(node));
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    std::size_t cols = 0;
    const std::size_t rows = at(parts.front()).value.rows();
    for (NodeId p : parts) {
        if (at(p).value.rows() != rows)
            throw std::invalid_argument("concat_cols: row mismatch");
        cols += at(p).value.cols();
    }
    Node node;
    node.op = Op::ConcatCols;
    node.parts = parts;
    node.value = DenseMatrix(rows, cols);
    std::size_t at_col = 0;
    for (NodeId p : parts) {
        const DenseMatrix& pv = at(p).value;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < pv.cols(); ++j) node.value(i, at_col + j) = pv(i, j);
        at_col += pv.cols();
    }
    return push(std::move(node));
}

Tape::NodeId Tape::embed(NodeId table, const std::vector<int>& ids) {
    const DenseMatrix& tv = at(table).value;
    Node node;
    node.op = Op::Embed;
    node.x = table;
    node.ids = ids;
    node.value = DenseMatrix(ids.size(), tv.cols());
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const int id = ids[k];
        if (id < 0 || static_cast<std::size_t>(id) >= tv.rows())
            throw std::invalid_argument("embed: id " + std::to_string(id) +
                                        " out of range for table " + shape_str(tv));
        for (std::size_t j = 0; j < tv.cols(); ++j)
            node.value(k, j) = tv(static_cast<std::size_t>(id), j);
    }
    return push(std::move(node));
}

Tape::NodeId Tape::cross_entropy(NodeId logits, const std::vector<int>& targets) {
    const DenseMatrix& lv = at(logits).value;
    if (targets.size() != lv.rows())
        throw std::invalid_argument("cross_entropy: expected " + std::to_string(lv.rows()) +
                                    " targets, got " + std::to_string(targets.size()));
    Node node;
    node.op = Op::CrossEntropy;
    node.x = logits;
    node.ids = targets;

    double total = 0.0;
    std::size_t n_valid = 0;
    for (std::size_t i = 0; i < lv.rows(); ++i) {
        const int t = targets[i];
        if (t < 0) continue;
        if (static_cast<std::size_t>(t) >= lv.cols())
            throw std::invalid_argument("cross_entropy: target " + std::to_string(t) +
                                        " out of range");
        double hi = lv(i, 0);
        for (std::size_t j = 1; j < lv.cols(); ++j) hi = std::max(hi, lv(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < lv.cols(); ++j) denom += std::exp(lv(i, j) - hi);
        total += std::log(denom) + hi - lv(i, static_cast<std::size_t>(t));
        ++n_valid;
    }
    if (n_valid == 0) throw std::invalid_argument("cross_entropy: no valid targets");
    node.value = DenseMatrix(1, 1);
    node.value(0, 0) = total / static_cast<double>(n_valid);
    return push(std::move(node));
}

std::map<std::string, DenseMatrix> Tape::backward(NodeId loss) const {
    const Node& top = at(loss);
    if (top.value.rows() != 1 || top.value.cols() != 1)
        throw std::invalid_argument("backward: loss node must be 1x1, got " +
                                    shape_str(top.value));

    std::vector<DenseMatrix> grads(nodes_.size());
    auto grad_of = [&](NodeId id) -> DenseMatrix& {
        DenseMatrix& g = grads[static_cast<std::size_t>(id)];
        if (g.empty() && !nodes_[static_cast<std::size_t>(id)].value.empty())
            g = DenseMatrix(nodes_[static_cast<std::size_t>(id)].value.rows(),
                            nodes_[static_cast<std::size_t>(id)].value.cols());
        return g;
    };
    grad_of(loss)(0, 0) = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        const DenseMatrix& g = grads[static_cast<std::size_t>(id)];
        if (g.empty()) continue;

        switch (node.op) {
        case Op::Leaf:
            break;
        case Op::MatMul: {
            const DenseMatrix& xv = nodes_[node.x].value;
            const DenseMatrix& yv = nodes_[node.y].value;
            // value = op(x) * op(y); chain rule per transpose flag pattern.
            DenseMatrix gx = node.trans_x ? matmul_t(yv, node.trans_y, g, true)
                                          : matmul_t(g, false, yv, !node.trans_y);
            DenseMatrix gy = node.trans_y ? matmul_t(g, true, xv, node.trans_x)
                                          : matmul_t(xv, !node.trans_x, g, false);
            axpy(grad_of(node.x), 1.0, gx);
            axpy(grad_of(node.y), 1.0, gy);
            break;
        }
        case Op::Add:
            axpy(grad_of(node.x), 1.0, g);
            axpy(grad_of(node.y), 1.0, g);
            break;
        case Op::Scale:
            axpy(grad_of(node.x), node.c, g);
            break;
        case Op::Gelu: {
            const DenseMatrix& xv = nodes_[node.x].value;
            DenseMatrix& gx = grad_of(node.x);
            for (std::size_t i = 0; i < xv.size(); ++i) {
                const double x = xv.data()[i];
                const double u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
                const double t = std::tanh(u);
                const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
                const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                gx.data()[i] += g.data()[i] * d;
            }
            break;
        }
        case Op::RmsNorm: {
            const DenseMatrix& xv = nodes_[node.x].value;
            const DenseMatrix& gv = nodes_[node.y].value;
            DenseMatrix& gx = grad_of(node.x);
            DenseMatrix& gg = grad_of(node.y);
            const std::size_t n = xv.cols();
            for (std::size_t i = 0; i < xv.rows(); ++i) {
                double mean_sq = 0.0;
                for (std::size_t j = 0; j < n; ++j) mean_sq += xv(i, j) * xv(i, j);
                mean_sq /= static_cast<double>(n);
                const double inv = 1.0 / std::sqrt(mean_sq + kRmsEps);
                // Shared term: sum_j g_ij * gain_j * x_ij.
                double inner = 0.0;
                for (std::size_t j = 0; j < n; ++j) inner += g(i, j) * gv(0, j) * xv(i, j);
                const double inv3_n = inv * inv * inv / static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) {
                    gx(i, j) += g(i, j) * gv(0, j) * inv - xv(i, j) * inv3_n * inner;
                    gg(0, j) += g(i, j) * xv(i, j) * inv;
                }
            }
            break;
        }
        case Op::CausalSoftmax: {
            const DenseMatrix& p = node.value;
            DenseMatrix& gx = grad_of(node.x);
            for (std::size_t i = 0; i < p.rows(); ++i) {
                double inner = 0.0;
                for (std::size_t j = 0; j <= i; ++j) inner += g(i, j) * p(i, j);
                for (std::size_t j = 0; j <= i; ++j)
                    gx(i, j) += p(i, j) * (g(i, j) - inner);
            }
            break;
        }
        case Op::SliceRows: {
            DenseMatrix& gx = grad_of(node.x);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gx(node.begin + i, j) += g(i, j);
            break;
        }
        case Op::SliceCols: {
            DenseMatrix& gx = grad_of(node.x);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gx(i, node.begin + j) += g(i, j);
            break;
        }
        case Op::ConcatRows: {
            std::size_t at_row = 0;
            for (NodeId p : node.parts) {
                DenseMatrix& gp = grad_of(p);
                for (std::size_t i = 0; i < gp.rows(); ++i)
                    for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(at_row + i, j);
                at_row += gp.rows();
            }
            break;
        }
        case Op::ConcatCols: {
            std::size_t at_col = 0;
            for (NodeId p : node.parts) {
                DenseMatrix& gp = grad_of(p);
                for (std::size_t i = 0; i < gp.rows(); ++i)
                    for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, at_col + j);
                at_col += gp.cols();
            }
            break;
        }
        case Op::Embed: {
            DenseMatrix& gt = grad_of(node.x);
            for (std::size_t k = 0; k < node.ids.size(); ++k) {
                const std::size_t row = static_cast<std::size_t>(node.ids[k]);
                for (std::size_t j = 0; j < g.cols(); ++j) gt(row, j) += g(k, j);
            }
            break;
        }
        case Op::CrossEntropy: {
            const DenseMatrix& lv = nodes_[node.x].value;
            DenseMatrix& gl = grad_of(node.x);
            std::size_t n_valid = 0;
            for (int t : node.ids)
                if (t >= 0) ++n_valid;
            const double w = g(0, 0) / static_cast<double>(n_valid);
            for (std::size_t i = 0; i < lv.rows(); ++i) {
                const int t = node.ids[i];
                if (t < 0) continue;
                double hi = lv(i, 0);
                for (std::size_t j = 1; j < lv.cols(); ++j) hi = std::max(hi, lv(i, j));
                double denom = 0.0;
                for (std::size_t j = 0; j < lv.cols(); ++j) denom += std::exp(lv(i, j) - hi);
                for (std::size_t j = 0; j < lv.cols(); ++j) {
                    const double p = std::exp(lv(i, j) - hi) / denom;
                    const double onehot = (static_cast<std::size_t>(t) == j) ? 1.0 : 0.0;
                    gl(i, j) += w * (p - onehot);
                }
            }
            break;
        }
        }
    }

    std::map<std::string, DenseMatrix> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].op != Op::Leaf || nodes_[i].name.empty()) continue;
        if (grads[i].empty())
            grads[i] = DenseMatrix(nodes_[i].value.rows(), nodes_[i].value.cols());
        out.emplace(nodes_[i].name, std::move(grads[i]));
    }
    return out;
}

} // namespace spectron
