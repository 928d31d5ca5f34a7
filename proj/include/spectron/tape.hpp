#ifndef SPECTRON_TAPE_HPP
#define SPECTRON_TAPE_HPP

#include <map>
#include <string>
#include <vector>

#include "spectron/matrix.hpp"

namespace spectron {

/// Reverse-mode autodiff over DenseMatrix values.
///
/// Operations append nodes in evaluation order, so node ids form a
/// topological order and the backward pass is a single reverse sweep.
/// Gradients accumulate additively wherever a node fans out. Leaves
/// registered with a name receive an entry in the gradient map; anonymous
/// leaves (token inputs, constants) are terminal.
class Tape {
public:
    using NodeId = int;

    /// Register a leaf. Named leaves are parameters: backward() returns
    /// their gradients keyed by name. Names must be unique per tape.
    NodeId leaf(const DenseMatrix& value, const std::string& name = "");

    /// op(x) * op(y) with optional transposes.
    NodeId matmul(NodeId x, NodeId y, bool trans_x = false, bool trans_y = false);

    NodeId add(NodeId x, NodeId y);
    NodeId scale(NodeId x, double c);

    /// Elementwise GELU, tanh approximation.
    NodeId gelu(NodeId x);

    /// Row-wise RMS normalization with a learned gain (1 x cols):
    /// y_ij = gain_j * x_ij / sqrt(mean_j x_ij^2 + 1e-8).
    NodeId rms_norm(NodeId x, NodeId gain);

    /// Causal (lower-triangular) softmax of a square score matrix: row i is
    /// a softmax over columns 0..i, zero above the diagonal.
    NodeId causal_softmax(NodeId scores);

    /// Contiguous row/column slices [begin, end).
    NodeId slice_rows(NodeId x, std::size_t begin, std::size_t end);
    NodeId slice_cols(NodeId x, std::size_t begin, std::size_t end);

    /// Stack parts vertically / side by side.
    NodeId concat_rows(const std::vector<NodeId>& parts);
    NodeId concat_cols(const std::vector<NodeId>& parts);

    /// Row lookup: output row k is table row ids[k]. Ids must be in range.
    NodeId embed(NodeId table, const std::vector<int>& ids);

    /// Mean cross-entropy in nats over rows of logits against target ids;
    /// targets equal to -1 are ignored. Produces a 1x1 node.
    NodeId cross_entropy(NodeId logits, const std::vector<int>& targets);

    const DenseMatrix& value(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }

    /// Reverse sweep from a scalar node; returns gradients for every named
    /// leaf. Throws if `loss` is not a 1x1 node or ids are out of range.
    std::map<std::string, DenseMatrix> backward(NodeId loss) const;

private:
    enum class Op {
        Leaf,
        MatMul,
        Add,
        Scale,
        Gelu,
        RmsNorm,
        CausalSoftmax,
        SliceRows,
        SliceCols,
        ConcatRows,
        ConcatCols,
        Embed,
        CrossEntropy,
    };

    struct Node {
        Op op;
        NodeId x = -1;
        NodeId y = -1;
        DenseMatrix value;
        bool trans_x = false;
        bool trans_y = false;
        double c = 0.0;
        std::size_t begin = 0;
        std::size_t end = 0;
        std::vector<NodeId> parts;
        std::vector<int> ids;
        std::string name;
    };

    NodeId push(Node node);
    const Node& at(NodeId id) const;

    std::vector<Node> nodes_;
};

} // namespace spectron

#endif // SPECTRON_TAPE_HPP
