#pragma once
// Closed arithmetic expression language over feature keys and literals.
// Function-call syntax only: add, sub, mul, div, norm, dot, arccos, abs,
// min, max, plus the component accessors x, y, z. Anything that is not a
// builtin call parses as a feature reference, e.g. centroid(bottle).
// Expressions compile once at load time and evaluate against a
// FeatureVector; there is no general code execution.

#include <memory>
#include <set>
#include <string>

#include "chord/features.hpp"

namespace chord {

class Expr {
  public:
    // Throws SchemaViolation on syntax errors or type mismatches
    // (e.g. norm of a scalar).
    static Expr parse(const std::string& source);

    // Throws MissingFeature when a referenced key is flagged missing.
    double eval(const FeatureVector& z) const;

    // Feature keys the expression reads.
    const std::set<std::string>& required_keys() const { return keys_; }

    const std::string& source() const { return source_; }

    struct Node;  // AST node, defined in the implementation

  private:
    std::shared_ptr<const Node> root_;
    std::set<std::string> keys_;
    std::string source_;
};

}  // namespace chord
