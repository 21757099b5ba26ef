#pragma once

#include <cctype>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "aerisai/common.hpp"

// Tree access policies for CP-ABE. Every node is a threshold gate over its
// children: AND = k-of-k, OR = 1-of-k, and explicit "k of (...)" gates. Leaves
// name attributes. Child indices are 1-based and contiguous under each parent;
// they feed the Lagrange interpolation during decryption.
//
// Grammar:
//   expr   := term ("OR" term)*
//   term   := factor ("AND" factor)*
//   factor := attribute | "(" expr ")" | INT "of" "(" expr ("," expr)* ")"
//   attribute := [a-z0-9:_-]+

namespace aerisai::cpabe {

struct PolicyNode {
  unsigned threshold = 1;             // q_x; leaves have q_x = 1
  std::string attribute;              // leaf only
  std::vector<PolicyNode> children;   // empty for leaves
  unsigned index = 0;                 // 1-based position under parent; 0 at root

  bool is_leaf() const { return children.empty(); }

  static PolicyNode leaf(std::string attr) {
    PolicyNode n;
    n.attribute = std::move(attr);
    n.threshold = 1;
    return n;
  }

  static PolicyNode gate(unsigned threshold, std::vector<PolicyNode> kids) {
    if (kids.empty() || threshold < 1 || threshold > kids.size())
      fail(Err::kPolicySyntax, "threshold out of range");
    PolicyNode n;
    n.threshold = threshold;
    n.children = std::move(kids);
    for (size_t i = 0; i < n.children.size(); ++i)
      n.children[i].index = static_cast<unsigned>(i + 1);
    return n;
  }
};

struct AccessTree {
  PolicyNode root;

  size_t leaf_count() const {
    size_t n = 0;
    walk_leaves(root, [&](const PolicyNode&) { ++n; });
    return n;
  }

  template <typename Fn>
  static void walk_leaves(const PolicyNode& node, Fn&& fn) {
    if (node.is_leaf()) {
      fn(node);
      return;
    }
    for (const auto& c : node.children) walk_leaves(c, fn);
  }
};

inline bool node_satisfies(const PolicyNode& node,
                           const std::unordered_set<std::string>& attrs) {
  if (node.is_leaf()) return attrs.count(node.attribute) > 0;
  unsigned hits = 0;
  for (const auto& c : node.children)
    if (node_satisfies(c, attrs)) ++hits;
  return hits >= node.threshold;
}

inline bool satisfies(const AccessTree& policy, const std::unordered_set<std::string>& attrs) {
  return node_satisfies(policy.root, attrs);
}

// ---- parsing / printing ----

namespace detail {

class PolicyParser {
 public:
  explicit PolicyParser(const std::string& text) : text_(text) {}

  PolicyNode parse() {
    PolicyNode n = expr();
    skip_ws();
    if (pos_ != text_.size()) err("trailing input");
    return n;
  }

 private:
  [[noreturn]] void err(const std::string& what) const {
    fail(Err::kPolicySyntax,
         "policy syntax error at position " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat_word(const char* w) {
    skip_ws();
    size_t len = std::strlen(w);
    if (text_.compare(pos_, len, w) != 0) return false;
    size_t end = pos_ + len;
    if (end < text_.size()) {
      char c = text_[end];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == ':' || c == '_' || c == '-')
        return false;
    }
    pos_ = end;
    return true;
  }

  bool eat_char(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static bool attr_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ':' || c == '_' || c == '-';
  }

  PolicyNode expr() {
    std::vector<PolicyNode> terms;
    terms.push_back(term());
    while (eat_word("OR")) terms.push_back(term());
    if (terms.size() == 1) return std::move(terms[0]);
    return PolicyNode::gate(1, std::move(terms));
  }

  PolicyNode term() {
    std::vector<PolicyNode> factors;
    factors.push_back(factor());
    while (eat_word("AND")) factors.push_back(factor());
    if (factors.size() == 1) return std::move(factors[0]);
    unsigned k = static_cast<unsigned>(factors.size());
    return PolicyNode::gate(k, std::move(factors));
  }

  PolicyNode factor() {
    skip_ws();
    if (pos_ >= text_.size()) err("unexpected end of input");
    if (eat_char('(')) {
      PolicyNode n = expr();
      if (!eat_char(')')) err("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      size_t start = pos_;
      unsigned long k = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        k = k * 10 + static_cast<unsigned long>(text_[pos_] - '0');
        if (k > 1000) err("threshold too large");
        ++pos_;
      }
      if (!eat_word("of")) {
        pos_ = start;
        err("expected 'of' after threshold");
      }
      if (!eat_char('(')) err("expected '(' after 'of'");
      std::vector<PolicyNode> kids;
      kids.push_back(expr());
      while (eat_char(',')) kids.push_back(expr());
      if (!eat_char(')')) err("expected ')'");
      if (k < 1 || k > kids.size()) err("threshold out of range");
      if (kids.size() == 1) return std::move(kids[0]);  // canonicalize 1-of-1
      return PolicyNode::gate(static_cast<unsigned>(k), std::move(kids));
    }
    size_t start = pos_;
    while (pos_ < text_.size() && attr_char(text_[pos_])) ++pos_;
    if (pos_ == start) err("expected attribute");
    return PolicyNode::leaf(text_.substr(start, pos_ - start));
  }

  const std::string& text_;
  size_t pos_ = 0;
};

inline void print_node(const PolicyNode& n, std::string& out) {
  if (n.is_leaf()) {
    out += n.attribute;
    return;
  }
  if (n.threshold == n.children.size() || n.threshold == 1) {
    const char* op = n.threshold == 1 ? " OR " : " AND ";
    out += '(';
    for (size_t i = 0; i < n.children.size(); ++i) {
      if (i) out += op;
      print_node(n.children[i], out);
    }
    out += ')';
    return;
  }
  out += std::to_string(n.threshold);
  out += " of (";
  for (size_t i = 0; i < n.children.size(); ++i) {
    if (i) out += ", ";
    print_node(n.children[i], out);
  }
  out += ')';
}

}  // namespace detail

inline AccessTree parse_policy(const std::string& text) {
  detail::PolicyParser p(text);
  return AccessTree{p.parse()};
}

inline std::string print_policy(const AccessTree& policy) {
  std::string out;
  detail::print_node(policy.root, out);
  return out;
}

}  // namespace aerisai::cpabe
