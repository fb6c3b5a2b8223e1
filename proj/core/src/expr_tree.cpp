#include "egp/expr_tree.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace egp {

namespace {

constexpr double kMaxReal = std::numeric_limits<double>::max();

double saturate(double v) {
    if (v > kMaxReal) return kMaxReal;
    if (v < -kMaxReal) return -kMaxReal;
    return v;
}

// Recompute subtree sizes after a splice: a single right-to-left pass,
// children sizes are always ready before their parent.
void fix_sizes(std::vector<TreeNode>& nodes) {
    std::vector<std::uint32_t> stack;
    stack.reserve(64);
    for (std::size_t k = nodes.size(); k-- > 0;) {
        const int a = arity(nodes[k].op);
        std::uint32_t size = 1;
        for (int c = 0; c < a; ++c) {
            size += stack.back();
            stack.pop_back();
        }
        nodes[k].size = size;
        stack.push_back(size);
    }
    assert(stack.size() == 1 && stack.back() == nodes.size());
}

bool structurally_valid(const std::vector<TreeNode>& nodes) {
    if (nodes.empty()) return false;
    std::vector<std::uint32_t> stack;
    for (std::size_t k = nodes.size(); k-- > 0;) {
        const int a = arity(nodes[k].op);
        if (static_cast<std::size_t>(a) > stack.size()) return false;
        std::uint32_t size = 1;
        for (int c = 0; c < a; ++c) {
            size += stack.back();
            stack.pop_back();
        }
        if (nodes[k].size != size) return false;
        stack.push_back(size);
    }
    return stack.size() == 1 && stack.back() == nodes.size();
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Div: return "/";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Var: return "x";
    }
    return "?";
}

}  // namespace

ExpressionTree::ExpressionTree(std::vector<TreeNode> nodes, std::shared_ptr<const Bag> bag)
    : nodes_(std::move(nodes)), bag_(std::move(bag)) {
    if (!bag_) throw std::invalid_argument("expression tree needs a bag");
    if (!structurally_valid(nodes_)) throw std::invalid_argument("malformed expression tree");
}

double ExpressionTree::eval(std::span<const double> row) const {
    // Right-to-left scan over the prefix array; the first pop is the left
    // operand. Stack depth is bounded by the node count.
    thread_local std::vector<double> stack;
    stack.clear();
    for (std::size_t k = nodes_.size(); k-- > 0;) {
        const TreeNode& n = nodes_[k];
        switch (n.op) {
            case Op::Var:
                stack.push_back(row[n.var]);
                break;
            case Op::Add: {
                const double a = stack.back(); stack.pop_back();
                const double b = stack.back(); stack.pop_back();
                stack.push_back(saturate(a + b));
                break;
            }
            case Op::Sub: {
                const double a = stack.back(); stack.pop_back();
                const double b = stack.back(); stack.pop_back();
                stack.push_back(saturate(a - b));
                break;
            }
            case Op::Mul: {
                const double a = stack.back(); stack.pop_back();
                const double b = stack.back(); stack.pop_back();
                stack.push_back(saturate(a * b));
                break;
            }
            case Op::Div: {
                const double a = stack.back(); stack.pop_back();
                const double b = stack.back(); stack.pop_back();
                stack.push_back(b == 0.0 ? a : saturate(a / b));
                break;
            }
            case Op::Log: {
                const double a = stack.back(); stack.pop_back();
                stack.push_back(a <= 0.0 ? a : std::log(a));
                break;
            }
            case Op::Sqrt: {
                const double a = stack.back(); stack.pop_back();
                stack.push_back(a < 0.0 ? a : std::sqrt(a));
                break;
            }
        }
    }
    return stack.back();
}

std::size_t ExpressionTree::depth() const {
    std::vector<std::size_t> stack;
    for (std::size_t k = nodes_.size(); k-- > 0;) {
        const int a = arity(nodes_[k].op);
        std::size_t d = 0;
        for (int c = 0; c < a; ++c) {
            d = std::max(d, stack.back() + 1);
            stack.pop_back();
        }
        stack.push_back(d);
    }
    return stack.back();
}

bool ExpressionTree::respects_mask() const {
    const auto& mask = bag_->feature_mask;
    for (const TreeNode& n : nodes_)
        if (n.op == Op::Var &&
            !std::binary_search(mask.begin(), mask.end(), n.var))
            return false;
    return true;
}

bool ExpressionTree::same_structure(const ExpressionTree& other) const {
    if (nodes_.size() != other.nodes_.size()) return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].op != other.nodes_[i].op || (nodes_[i].op == Op::Var && nodes_[i].var != other.nodes_[i].var))
            return false;
    return true;
}

std::string ExpressionTree::to_prefix() const {
    std::string out;
    // Emit recursively by index; depth is bounded by tree depth.
    auto emit = [&](auto&& self, std::size_t i) -> std::size_t {
        const TreeNode& n = nodes_[i];
        if (n.op == Op::Var) {
            out += 'x';
            out += std::to_string(n.var);
            return i + 1;
        }
        out += '(';
        out += op_name(n.op);
        std::size_t next = i + 1;
        for (int c = 0; c < arity(n.op); ++c) {
            out += ' ';
            next = self(self, next);
        }
        out += ')';
        return next;
    };
    emit(emit, 0);
    return out;
}

ExpressionTree ExpressionTree::parse_prefix(std::string_view text, std::shared_ptr<const Bag> bag) {
    std::vector<TreeNode> nodes;
    std::size_t pos = 0;
    auto skip_ws = [&] { while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos; };
    auto fail = [&](const std::string& why) -> void {
        throw std::invalid_argument("prefix parse error at offset " + std::to_string(pos) + ": " + why);
    };

    auto parse_node = [&](auto&& self) -> void {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        if (text[pos] == '(') {
            ++pos;
            skip_ws();
            std::size_t start = pos;
            while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) && text[pos] != ')')
                ++pos;
            const std::string_view tok = text.substr(start, pos - start);
            Op op;
            if (tok == "+") op = Op::Add;
            else if (tok == "-") op = Op::Sub;
            else if (tok == "*") op = Op::Mul;
            else if (tok == "/") op = Op::Div;
            else if (tok == "log") op = Op::Log;
            else if (tok == "sqrt") op = Op::Sqrt;
            else { fail("unknown operator '" + std::string(tok) + "'"); return; }
            nodes.push_back({op, 0, 1});
            for (int c = 0; c < arity(op); ++c) self(self);
            skip_ws();
            if (pos >= text.size() || text[pos] != ')') fail("expected ')'");
            ++pos;
        } else if (text[pos] == 'x') {
            ++pos;
            std::uint32_t v = 0;
            auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v);
            if (ec != std::errc{}) fail("expected feature index after 'x'");
            pos = static_cast<std::size_t>(ptr - text.data());
            nodes.push_back({Op::Var, v, 1});
        } else {
            fail("expected '(' or terminal");
        }
    };
    parse_node(parse_node);
    skip_ws();
    if (pos != text.size()) fail("trailing input");
    fix_sizes(nodes);
    return ExpressionTree(std::move(nodes), std::move(bag));
}

TreeMetrics metrics(const ExpressionTree& tree) {
    return {tree.node_count(), tree.depth()};
}

namespace {

constexpr Op kFunctions[] = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Log, Op::Sqrt};
constexpr std::size_t kFunctionCount = 6;

// Koza-style builders over the prefix array. `full` places functions until
// the target depth; `grow` may stop early once min_depth is reached, with
// the terminal/function choice weighted by the combined primitive set.
void build_rec(std::vector<TreeNode>& nodes, const std::vector<std::uint32_t>& mask,
               unsigned depth, unsigned min_depth, unsigned target, bool full, Rng& rng) {
    const double terminal_ratio =
        static_cast<double>(mask.size()) / static_cast<double>(mask.size() + kFunctionCount);
    const bool at_target = depth >= target;
    const bool may_stop = depth >= min_depth;
    bool terminal;
    if (at_target)
        terminal = true;
    else if (full)
        terminal = false;
    else
        terminal = may_stop && rng.chance(terminal_ratio);

    if (terminal) {
        nodes.push_back({Op::Var, mask[rng.index(mask.size())], 1});
        return;
    }
    const Op op = kFunctions[rng.index(kFunctionCount)];
    nodes.push_back({op, 0, 1});
    for (int c = 0; c < arity(op); ++c)
        build_rec(nodes, mask, depth + 1, min_depth, target, full, rng);
}

ExpressionTree build_tree(std::shared_ptr<const Bag> bag, DepthRange range, bool full, Rng& rng) {
    const auto target = static_cast<unsigned>(
        rng.range(static_cast<std::int64_t>(range.min), static_cast<std::int64_t>(range.max)));
    std::vector<TreeNode> nodes;
    build_rec(nodes, bag->feature_mask, 0, range.min, target, full, rng);
    fix_sizes(nodes);
    return ExpressionTree(std::move(nodes), std::move(bag));
}

}  // namespace

ExpressionTree ramped_half_and_half(std::shared_ptr<const Bag> bag, DepthRange depth_range,
                                    Rng& rng) {
    const bool full = rng.chance(0.5);
    return build_tree(std::move(bag), depth_range, full, rng);
}

ExpressionTree grow_tree(std::shared_ptr<const Bag> bag, DepthRange depth_range, Rng& rng) {
    return build_tree(std::move(bag), depth_range, false, rng);
}

std::pair<ExpressionTree, ExpressionTree> crossover_at(const ExpressionTree& p1,
                                                       const ExpressionTree& p2,
                                                       std::size_t point1, std::size_t point2) {
    const auto n1 = p1.nodes();
    const auto n2 = p2.nodes();
    const std::size_t s1 = n1[point1].size;
    const std::size_t s2 = n2[point2].size;

    std::vector<TreeNode> c1;
    c1.reserve(n1.size() - s1 + s2);
    c1.insert(c1.end(), n1.begin(), n1.begin() + point1);
    c1.insert(c1.end(), n2.begin() + point2, n2.begin() + point2 + s2);
    c1.insert(c1.end(), n1.begin() + point1 + s1, n1.end());
    fix_sizes(c1);

    std::vector<TreeNode> c2;
    c2.reserve(n2.size() - s2 + s1);
    c2.insert(c2.end(), n2.begin(), n2.begin() + point2);
    c2.insert(c2.end(), n1.begin() + point1, n1.begin() + point1 + s1);
    c2.insert(c2.end(), n2.begin() + point2 + s2, n2.end());
    fix_sizes(c2);

    return {ExpressionTree(std::move(c1), p1.bag_ptr()),
            ExpressionTree(std::move(c2), p2.bag_ptr())};
}

std::pair<ExpressionTree, ExpressionTree> subtree_crossover(const ExpressionTree& p1,
                                                            const ExpressionTree& p2, Rng& rng) {
    const std::size_t point1 = rng.index(p1.node_count());
    const std::size_t point2 = rng.index(p2.node_count());
    return crossover_at(p1, p2, point1, point2);
}

namespace {

// Replace every terminal in nodes[first, first+count) that is outside the
// mask with the legal feature of maximal similarity (ties -> lowest index).
std::size_t fix_terminals(std::vector<TreeNode>& nodes, std::size_t first, std::size_t count,
                          const std::vector<std::uint32_t>& mask, const FeatureSimilarity& sim) {
    std::size_t repairs = 0;
    for (std::size_t i = first; i < first + count; ++i) {
        TreeNode& n = nodes[i];
        if (n.op != Op::Var) continue;
        if (std::binary_search(mask.begin(), mask.end(), n.var)) continue;
        std::uint32_t best = mask.front();
        double best_sim = sim(n.var, best);
        for (std::size_t k = 1; k < mask.size(); ++k) {
            const double s = sim(n.var, mask[k]);
            if (s > best_sim) {
                best_sim = s;
                best = mask[k];
            }
        }
        n.var = best;
        ++repairs;
    }
    return repairs;
}

}  // namespace

std::pair<ExpressionTree, ExpressionTree> e_crossover(const ExpressionTree& p1,
                                                      const ExpressionTree& p2,
                                                      const FeatureSimilarity& sim, Rng& rng,
                                                      std::size_t* repair_count) {
    const std::size_t point1 = rng.index(p1.node_count());
    const std::size_t point2 = rng.index(p2.node_count());
    const std::size_t s1 = p1.nodes()[point1].size;
    const std::size_t s2 = p2.nodes()[point2].size;

    auto [c1, c2] = crossover_at(p1, p2, point1, point2);

    std::size_t repairs = 0;
    {
        std::vector<TreeNode> n1(c1.nodes().begin(), c1.nodes().end());
        repairs += fix_terminals(n1, point1, s2, p1.bag().feature_mask, sim);
        c1 = ExpressionTree(std::move(n1), p1.bag_ptr());
    }
    {
        std::vector<TreeNode> n2(c2.nodes().begin(), c2.nodes().end());
        repairs += fix_terminals(n2, point2, s1, p2.bag().feature_mask, sim);
        c2 = ExpressionTree(std::move(n2), p2.bag_ptr());
    }
    if (repair_count) *repair_count += repairs;
    return {std::move(c1), std::move(c2)};
}

ExpressionTree e_mutation(const ExpressionTree& p, DepthRange depth_range, Rng& rng) {
    const std::size_t point = rng.index(p.node_count());
    const ExpressionTree branch = grow_tree(p.bag_ptr(), depth_range, rng);

    const auto n = p.nodes();
    const std::size_t s = n[point].size;
    std::vector<TreeNode> out;
    out.reserve(n.size() - s + branch.node_count());
    out.insert(out.end(), n.begin(), n.begin() + point);
    out.insert(out.end(), branch.nodes().begin(), branch.nodes().end());
    out.insert(out.end(), n.begin() + point + s, n.end());
    fix_sizes(out);
    return ExpressionTree(std::move(out), p.bag_ptr());
}

}  // namespace egp
