#pragma once

// Bracketed constituency parses, binarisation and the binary TreeLSTM encoder. //

#include "encoders.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace randenc {

/// n-ary parse as read from bracketed text. Labels are discarded; a node without children is a
/// terminal.
struct RawTree {
    std::string terminal;
    std::vector<RawTree> children;

    bool is_terminal() const noexcept { return children.empty(); }
};

class tree_parse_error : public parse_error {
    std::size_t offset_;

public:
    tree_parse_error(const std::string& what, std::size_t offset)
      : parse_error{what + " at byte " + std::to_string(offset)}, offset_{offset}
    {
    }
    std::size_t offset() const noexcept { return offset_; }
};

namespace detail {

class BracketReader {
    std::string_view text_;
    std::size_t pos_ = 0;

    void skip_space()
    {
        while (pos_ < text_.size()
               && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
            ++pos_;
    }

    std::string_view atom()
    {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != ' '
               && text_[pos_] != '\t' && text_[pos_] != '\n' && text_[pos_] != '\r')
            ++pos_;
        return text_.substr(start, pos_ - start);
    }

    // Expects pos_ at '('.
    RawTree node()
    {
        const std::size_t open = pos_++;
        RawTree tree;
        skip_space();
        std::vector<RawTree> items;
        bool first = true;
        bool first_was_atom = false;
        while (true) {
            skip_space();
            if (pos_ >= text_.size()) throw tree_parse_error{"unbalanced parentheses", pos_};
            const char c = text_[pos_];
            if (c == ')') {
                ++pos_;
                break;
            }
            if (c == '(') {
                items.push_back(node());
            } else {
                RawTree leaf;
                leaf.terminal = std::string{atom()};
                items.push_back(std::move(leaf));
                if (first) first_was_atom = true;
            }
            first = false;
        }
        // A leading atom followed by more items is the constituent label.
        if (first_was_atom && items.size() > 1) items.erase(items.begin());
        if (items.empty()) throw tree_parse_error{"empty constituent", open};
        tree.children = std::move(items);
        return tree;
    }

public:
    explicit BracketReader(std::string_view text) : text_{text} {}

    RawTree parse()
    {
        skip_space();
        if (pos_ >= text_.size()) throw tree_parse_error{"empty parse", pos_};
        if (text_[pos_] != '(') throw tree_parse_error{"expected '('", pos_};
        RawTree tree = node();
        skip_space();
        if (pos_ != text_.size()) throw tree_parse_error{"trailing characters after parse", pos_};
        return tree;
    }
};

}  // namespace detail

/// Reads one Penn-Treebank style parse, e.g. "(S (NP a) (VP b))".
inline RawTree parse_bracketed(std::string_view text) { return detail::BracketReader{text}.parse(); }

/// Terminals in left-to-right order.
inline std::vector<std::string> terminals(const RawTree& tree)
{
    std::vector<std::string> out;
    std::function<void(const RawTree&)> walk = [&](const RawTree& t) {
        if (t.is_terminal()) {
            out.push_back(t.terminal);
            return;
        }
        for (const auto& c : t.children) walk(c);
    };
    walk(tree);
    return out;
}

/// Node of a binary tree stored in post-order. Leaves carry the token position.
struct TreeNode {
    static constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::size_t left = none;
    std::size_t right = none;
    std::size_t leaf = none;

    bool is_leaf() const noexcept { return leaf != none; }
};

/// Strictly binary tree; nodes are in post-order so children precede parents and the root is
/// last. Leaves appear in token order.
struct ParseTree {
    std::vector<TreeNode> nodes;
    std::vector<std::string> leaves;

    std::size_t leaf_count() const noexcept { return leaves.size(); }
    std::size_t root() const noexcept { return nodes.size() - 1; }
};

/// Collapses unary chains and splits wider nodes right-branching: (a b c) -> (a (b c)).
inline ParseTree binarize(const RawTree& raw)
{
    ParseTree tree;
    // Returns the index of the emitted node for children[first, last).
    std::function<std::size_t(const RawTree&)> emit;
    std::function<std::size_t(const std::vector<RawTree>&, std::size_t)> emit_span =
      [&](const std::vector<RawTree>& kids, std::size_t first) -> std::size_t {
        if (first + 1 == kids.size()) return emit(kids[first]);
        const std::size_t left = emit(kids[first]);
        const std::size_t right = emit_span(kids, first + 1);
        tree.nodes.push_back({left, right, TreeNode::none});
        return tree.nodes.size() - 1;
    };
    emit = [&](const RawTree& t) -> std::size_t {
        if (t.is_terminal()) {
            tree.nodes.push_back({TreeNode::none, TreeNode::none, tree.leaves.size()});
            tree.leaves.push_back(t.terminal);
            return tree.nodes.size() - 1;
        }
        return emit_span(t.children, 0);
    };
    emit(raw);
    return tree;
}

/// Checks strict binarity, post-order layout and the 2L-1 node count.
inline bool is_well_formed(const ParseTree& tree)
{
    if (tree.leaves.empty() || tree.nodes.size() != 2 * tree.leaves.size() - 1) return false;
    std::size_t next_leaf = 0;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        if (n.is_leaf()) {
            if (n.left != TreeNode::none || n.right != TreeNode::none || n.leaf != next_leaf++) return false;
        } else if (n.left >= i || n.right >= i || n.left == TreeNode::none || n.right == TreeNode::none) {
            return false;
        }
    }
    return next_leaf == tree.leaves.size();
}

// TreeLSTM ---------------------------------------------------------------------------------

/// Applies the binary TreeLSTM cell bottom-up. Leaf i reads row i of `leaf_inputs` with zero
/// child states; internal nodes combine their children only. Row n of the result is h of node n.
inline Matrix run_tree_cell(const TreeCellWeights& w, const Matrix& leaf_inputs, const ParseTree& tree)
{
    if (leaf_inputs.rows() != tree.leaf_count())
        throw error{"tree has " + std::to_string(tree.leaf_count()) + " leaves but "
                    + std::to_string(leaf_inputs.rows()) + " token vectors were given"};
    const std::size_t width = w.bias_i.rows();
    Matrix h{tree.nodes.size(), width};
    Matrix c{tree.nodes.size(), width};

    auto affine = [](const Matrix& a, std::span<const double> x, const Matrix& b, std::span<const double> y,
                     const Matrix& bias) {
        Vector z = matvec(a, x);
        if (!b.empty()) matvec_add(b, y, z);
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += bias(j, 0);
        return z;
    };
    const Matrix none;

    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
        const auto& node = tree.nodes[n];
        auto hn = h.row(n);
        auto cn = c.row(n);
        if (node.is_leaf()) {
            auto x = leaf_inputs.row(node.leaf);
            const Vector i = affine(w.input_i, x, none, {}, w.bias_i);
            const Vector o = affine(w.input_o, x, none, {}, w.bias_o);
            const Vector u = affine(w.input_u, x, none, {}, w.bias_u);
            for (std::size_t j = 0; j < width; ++j) {
                cn[j] = sigmoid(i[j]) * std::tanh(u[j]);
                hn[j] = sigmoid(o[j]) * std::tanh(cn[j]);
            }
        } else {
            auto hl = h.row(node.left);
            auto hr = h.row(node.right);
            const Vector i = affine(w.left_i, hl, w.right_i, hr, w.bias_i);
            const Vector fl = affine(w.left_fl, hl, w.right_fl, hr, w.bias_fl);
            const Vector fr = affine(w.left_fr, hl, w.right_fr, hr, w.bias_fr);
            const Vector o = affine(w.left_o, hl, w.right_o, hr, w.bias_o);
            const Vector u = affine(w.left_u, hl, w.right_u, hr, w.bias_u);
            auto cl = c.row(node.left);
            auto cr = c.row(node.right);
            for (std::size_t j = 0; j < width; ++j) {
                cn[j] = sigmoid(i[j]) * std::tanh(u[j]) + sigmoid(fl[j]) * cl[j] + sigmoid(fr[j]) * cr[j];
                hn[j] = sigmoid(o[j]) * std::tanh(cn[j]);
            }
        }
    }
    return h;
}

/// BiLSTM over the tokens, then the TreeLSTM over the parse. Rows are node states in post-order
/// (all 2L-1 nodes, or only the L leaves when the pool domain is `leaves`).
inline ContextMatrix encode_tree_lstm(const EncoderParams& params, const TokenSequence& seq, const ParseTree& tree)
{
    detail::check_input(params, EncoderKind::tree_lstm, seq);
    if (tree.leaf_count() != seq.length())
        throw error{"tree/token alignment: " + std::to_string(tree.leaf_count()) + " leaves vs "
                    + std::to_string(seq.length()) + " tokens"};
    const auto& w = std::get<TreeLstmWeights>(params.weights);
    const Matrix contextual = run_bilstm(w.bilstm, seq.as_matrix());
    Matrix states = run_tree_cell(w.cell, contextual, tree);
    if (params.config.tree_pool_domain == TreePoolDomain::all) return states;

    Matrix leaves{tree.leaf_count(), states.cols()};
    for (std::size_t n = 0; n < tree.nodes.size(); ++n)
        if (tree.nodes[n].is_leaf())
            std::copy(states.row(n).begin(), states.row(n).end(), leaves.row(tree.nodes[n].leaf).begin());
    return leaves;
}

/// Parses, binarises and cleans one tree line; the cleaned leaves become the sentence tokens.
inline ParseTree read_tree_line(std::string_view line, bool lowercase = true)
{
    ParseTree tree = binarize(parse_bracketed(line));
    tree.leaves = clean_tokens(tree.leaves);
    if (lowercase)
        for (auto& t : tree.leaves) t = tokenize(t, true).front();
    return tree;
}

}  // namespace randenc
