#include "chord/expr.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <vector>

namespace chord {

namespace {

enum class Kind { Scalar, Vector };

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':';
}

// Feature keys whose value is a 3-vector.
bool vector_feature(const std::string& name) {
    return name == "centroid" || name == "principal_axis" || name == "top_point" ||
           name == "bottom_point" || name == "fractional_point" ||
           name == "gripper_origin" || name == "gravity_dir";
}

bool scalar_feature(const std::string& name) {
    return name == "point_count" || name == "gripper_width" ||
           name == "relative_distance" || name == "event_count";
}

}  // namespace

struct Expr::Node {
    enum class Op {
        Literal, Feature,
        Add, Sub, Mul, Div, Min, Max,   // elementwise scalar ops (Add/Sub also on vectors)
        Norm, Dot, Arccos, Abs,
        CompX, CompY, CompZ,
    };
    Op op = Op::Literal;
    Kind kind = Kind::Scalar;
    double literal = 0.0;
    std::string feature_key;
    std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;
using Node = Expr::Node;
using Op = Expr::Node::Op;

class Parser {
  public:
    Parser(const std::string& src, std::set<std::string>& keys) : src_(src), keys_(keys) {}

    NodePtr parse() {
        auto n = expression();
        skip_ws();
        if (pos_ != src_.size()) fail("trailing characters");
        if (n->kind != Kind::Scalar) fail("expression must be scalar-valued");
        return n;
    }

  private:
    const std::string& src_;
    std::set<std::string>& keys_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) {
        throw SchemaViolation("expr parse error at offset " + std::to_string(pos_) + ": " +
                              what + " in \"" + src_ + "\"");
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    NodePtr expression() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '+')
            return number();
        return call_or_feature();
    }

    NodePtr number() {
        std::size_t start = pos_;
        if (src_[pos_] == '-' || src_[pos_] == '+') ++pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                src_[pos_] == 'e' || src_[pos_] == 'E' ||
                ((src_[pos_] == '-' || src_[pos_] == '+') &&
                 (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
            ++pos_;
        auto n = std::make_shared<Node>();
        try {
            n->literal = std::stod(src_.substr(start, pos_ - start));
        } catch (const std::exception&) {
            fail("bad numeric literal");
        }
        return n;
    }

    NodePtr call_or_feature() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        std::string name = src_.substr(start, pos_ - start);
        if (name.empty()) fail("expected identifier");

        if (name == "gravity_dir") return feature_node(name, {});

        if (!consume('(')) fail("expected '(' after " + name);

        static const std::map<std::string, std::pair<Op, int>> builtins = {
            {"add", {Op::Add, 2}},   {"sub", {Op::Sub, 2}},   {"mul", {Op::Mul, 2}},
            {"div", {Op::Div, 2}},   {"min", {Op::Min, 2}},   {"max", {Op::Max, 2}},
            {"norm", {Op::Norm, 1}}, {"dot", {Op::Dot, 2}},   {"arccos", {Op::Arccos, 1}},
            {"abs", {Op::Abs, 1}},   {"x", {Op::CompX, 1}},   {"y", {Op::CompY, 1}},
            {"z", {Op::CompZ, 1}},
        };

        auto it = builtins.find(name);
        if (it == builtins.end()) return feature_ref(name);

        std::vector<NodePtr> args;
        args.push_back(expression());
        for (int i = 1; i < it->second.second; ++i) {
            if (!consume(',')) fail("expected ',' in " + name + "()");
            args.push_back(expression());
        }
        if (!consume(')')) fail("expected ')' closing " + name + "()");
        return typed_call(it->second.first, name, std::move(args));
    }

    // Raw arguments of a feature reference: identifiers or numbers,
    // reassembled into the canonical key string.
    NodePtr feature_ref(const std::string& name) {
        if (!vector_feature(name) && !scalar_feature(name))
            fail("unknown function or feature: " + name);
        std::vector<std::string> args;
        skip_ws();
        if (!consume(')')) {
            while (true) {
                skip_ws();
                std::size_t start = pos_;
                while (pos_ < src_.size() &&
                       (is_ident_char(src_[pos_]) || src_[pos_] == '.' ))
                    ++pos_;
                if (pos_ == start) fail("expected feature argument");
                args.push_back(src_.substr(start, pos_ - start));
                if (consume(')')) break;
                if (!consume(',')) fail("expected ',' or ')' in feature reference");
            }
        }
        return feature_node(name, args);
    }

    NodePtr feature_node(const std::string& name, const std::vector<std::string>& args) {
        std::string key = name;
        if (name != "gravity_dir") {
            key += '(';
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (i) key += ',';
                key += args[i];
            }
            key += ')';
        }
        auto n = std::make_shared<Node>();
        n->op = Op::Feature;
        n->kind = vector_feature(name) ? Kind::Vector : Kind::Scalar;
        n->feature_key = key;
        keys_.insert(key);
        return n;
    }

    NodePtr typed_call(Op op, const std::string& name, std::vector<NodePtr> args) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->args = std::move(args);
        auto k = [&](int i) { return n->args[i]->kind; };
        switch (op) {
            case Op::Add:
            case Op::Sub:
                if (k(0) != k(1)) fail(name + "() needs matching operand types");
                n->kind = k(0);
                break;
            case Op::Mul:
                if (k(0) == Kind::Vector && k(1) == Kind::Vector)
                    fail("mul() of two vectors is undefined; use dot()");
                n->kind = (k(0) == Kind::Vector || k(1) == Kind::Vector) ? Kind::Vector
                                                                         : Kind::Scalar;
                break;
            case Op::Div:
            case Op::Min:
            case Op::Max:
            case Op::Arccos:
            case Op::Abs:
                for (const auto& a : n->args)
                    if (a->kind != Kind::Scalar) fail(name + "() needs scalar operands");
                n->kind = Kind::Scalar;
                break;
            case Op::Norm:
            case Op::CompX:
            case Op::CompY:
            case Op::CompZ:
                if (k(0) != Kind::Vector) fail(name + "() needs a vector operand");
                n->kind = Kind::Scalar;
                break;
            case Op::Dot:
                if (k(0) != Kind::Vector || k(1) != Kind::Vector)
                    fail("dot() needs vector operands");
                n->kind = Kind::Scalar;
                break;
            default:
                break;
        }
        return n;
    }
};

FeatureValue eval_node(const Node& n, const FeatureVector& z) {
    auto scalar = [&](int i) { return std::get<double>(eval_node(*n.args[i], z)); };
    auto vec = [&](int i) { return std::get<Vec3>(eval_node(*n.args[i], z)); };
    switch (n.op) {
        case Op::Literal: return n.literal;
        case Op::Feature: {
            if (z.is_missing(n.feature_key))
                throw MissingFeature("feature flagged missing: " + n.feature_key);
            auto it = z.values.find(n.feature_key);
            if (it == z.values.end())
                throw MissingFeature("feature not extracted: " + n.feature_key);
            return it->second;
        }
        case Op::Add:
            if (n.kind == Kind::Vector) return vec(0) + vec(1);
            return scalar(0) + scalar(1);
        case Op::Sub:
            if (n.kind == Kind::Vector) return vec(0) - vec(1);
            return scalar(0) - scalar(1);
        case Op::Mul:
            if (n.kind == Kind::Vector) {
                if (n.args[0]->kind == Kind::Vector) return vec(0) * scalar(1);
                return scalar(0) * vec(1);
            }
            return scalar(0) * scalar(1);
        case Op::Div: return scalar(0) / scalar(1);
        case Op::Min: return std::min(scalar(0), scalar(1));
        case Op::Max: return std::max(scalar(0), scalar(1));
        case Op::Norm: return vec(0).norm();
        case Op::Dot: return vec(0).dot(vec(1));
        case Op::Arccos: return std::acos(std::clamp(scalar(0), -1.0, 1.0));
        case Op::Abs: return std::abs(scalar(0));
        case Op::CompX: return vec(0).x;
        case Op::CompY: return vec(0).y;
        case Op::CompZ: return vec(0).z;
    }
    throw Error("unreachable expr op");
}

}  // namespace

Expr Expr::parse(const std::string& source) {
    Expr e;
    e.source_ = source;
    Parser p(source, e.keys_);
    e.root_ = p.parse();
    return e;
}

double Expr::eval(const FeatureVector& z) const {
    return std::get<double>(eval_node(*root_, z));
}

}  // namespace chord
