#include "tmap/query.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace tmap {

std::string_view op_symbol(CompareOp op) {
  switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::LessEqual: return "<=";
    case CompareOp::Equal: return "=";
    case CompareOp::GreaterEqual: return ">=";
    case CompareOp::Greater: return ">";
  }
  return "?";
}

bool compare(double lhs, CompareOp op, double rhs) {
  switch (op) {
    case CompareOp::Less: return lhs < rhs;
    case CompareOp::LessEqual: return lhs <= rhs;
    case CompareOp::Equal: return lhs == rhs;
    case CompareOp::GreaterEqual: return lhs >= rhs;
    case CompareOp::Greater: return lhs > rhs;
  }
  return false;
}

QueryNode QueryNode::comparison(LayerKind layer, std::string key, CompareOp op, double threshold,
                                NormalizationMode mode) {
  QueryNode n;
  n.kind = Kind::Compare;
  n.layer = layer;
  n.key = std::move(key);
  n.op = op;
  n.threshold = threshold;
  n.mode = mode;
  return n;
}

QueryNode QueryNode::organ(std::string code) {
  QueryNode n;
  n.kind = Kind::Organ;
  n.key = std::move(code);
  return n;
}

QueryNode QueryNode::has(LayerKind layer, std::string key) {
  QueryNode n;
  n.kind = Kind::Has;
  n.layer = layer;
  n.key = std::move(key);
  return n;
}

namespace {

QueryNode combine(QueryNode::Kind kind, std::vector<QueryNode> children) {
  if (children.size() == 1) return std::move(children.front());
  QueryNode n;
  n.kind = kind;
  n.children = std::move(children);
  return n;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::toupper(static_cast<unsigned char>(a[i])) != std::toupper(static_cast<unsigned char>(b[i]))) return false;
  return true;
}

bool is_keyword(std::string_view w) { return iequals(w, "AND") || iequals(w, "OR") || iequals(w, "NOT"); }

class Parser {
 public:
  Parser(std::string_view text, NormalizationMode default_mode) : text_(text), default_mode_(default_mode) {}

  Query run() {
    skip_ws();
    if (pos_ == text_.size()) return QueryNode::all();
    Query q = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return q;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw QueryError(pos_, what); }
  [[noreturn]] void fail_at(std::size_t at, const std::string& what) const { throw QueryError(at, what); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string_view word() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_word_char(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  // Peeks at the next bare word without consuming it.
  std::string_view peek_word() {
    const std::size_t save = pos_;
    auto w = word();
    pos_ = save;
    return w;
  }

  std::string key() {
    if (peek() == '"') {
      ++pos_;
      std::string out;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
        out.push_back(text_[pos_++]);
      }
      if (pos_ >= text_.size()) fail("unterminated string");
      ++pos_;
      return out;
    }
    auto w = word();
    if (w.empty()) fail("expected a class key");
    return std::string(w);
  }

  LayerKind layer() {
    const std::size_t at = (skip_ws(), pos_);
    auto w = word();
    if (w.empty()) fail("expected a layer name");
    try {
      return parse_layer_name(w);
    } catch (const Error&) {
      fail_at(at, "unknown layer '" + std::string(w) + "' (expected source|tissue|alteration)");
    }
  }

  CompareOp op() {
    const char c = peek();
    auto two = [&](char next) { return pos_ + 1 < text_.size() && text_[pos_ + 1] == next; };
    if (c == '<') {
      if (two('=')) return pos_ += 2, CompareOp::LessEqual;
      return ++pos_, CompareOp::Less;
    }
    if (c == '>') {
      if (two('=')) return pos_ += 2, CompareOp::GreaterEqual;
      return ++pos_, CompareOp::Greater;
    }
    if (c == '=') {
      if (two('=')) return pos_ += 2, CompareOp::Equal;
      return ++pos_, CompareOp::Equal;
    }
    fail("expected a comparison operator (<, <=, =, >=, >)");
  }

  double number() {
    skip_ws();
    const std::size_t at = pos_;
    double v = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (ec != std::errc{} || ptr == text_.data() + pos_) fail("expected a number");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      fail_at(at, "threshold " + std::string(text_.substr(at, pos_ - at)) + " outside [0,1]");
    return v;
  }

  Query expr() {
    std::vector<QueryNode> terms{term()};
    while (iequals(peek_word(), "OR")) {
      word();
      terms.push_back(term());
    }
    return combine(QueryNode::Kind::Or, std::move(terms));
  }

  Query term() {
    std::vector<QueryNode> factors{factor()};
    while (iequals(peek_word(), "AND")) {
      word();
      factors.push_back(factor());
    }
    return combine(QueryNode::Kind::And, std::move(factors));
  }

  Query factor() {
    const char c = peek();
    const std::size_t at = pos_;
    if (c == '(') {
      ++pos_;
      Query inner = expr();
      expect(')');
      return inner;
    }
    if (c == '\0') fail("unexpected end of query");
    auto w = word();
    if (w.empty()) fail(std::string("unexpected character '") + c + "'");
    if (iequals(w, "NOT")) {
      QueryNode n = QueryNode::negate(factor());
      n.offset = at;
      return n;
    }
    if (w == "organ" && peek() == '=') {
      ++pos_;
      if (peek() == '=') ++pos_;
      QueryNode n = QueryNode::organ(key());
      n.offset = at;
      return n;
    }
    if (w == "has" && peek() == '(') {
      ++pos_;
      LayerKind l = layer();
      expect('.');
      std::string k = key();
      expect(')');
      QueryNode n = QueryNode::has(l, std::move(k));
      n.offset = at;
      return n;
    }
    LayerKind l;
    try {
      l = parse_layer_name(w);
    } catch (const Error&) {
      fail_at(at, "unknown layer '" + std::string(w) + "' (expected source|tissue|alteration, organ or has)");
    }
    expect('.');
    std::string k = key();
    CompareOp o = op();
    double t = number();
    NormalizationMode m = default_mode_;
    if (peek() == '@') {
      ++pos_;
      const std::size_t mat = (skip_ws(), pos_);
      auto mw = word();
      try {
        m = parse_mode_name(mw);
      } catch (const Error&) {
        fail_at(mat, "unknown mode '" + std::string(mw) + "' (expected per_image|per_specimen|per_content)");
      }
    }
    QueryNode n = QueryNode::comparison(l, std::move(k), o, t, m);
    n.offset = at;
    return n;
  }

  std::string_view text_;
  NormalizationMode default_mode_;
  std::size_t pos_ = 0;
};

std::string quote_key(const std::string& k) {
  bool bare = !k.empty() && !is_keyword(k);
  for (char c : k) bare = bare && is_word_char(c);
  if (bare) return k;
  std::string out = "\"";
  for (char c : k) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string number_text(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string child_text(const QueryNode& c) {
  if (c.kind == QueryNode::Kind::All) throw QueryError(c.offset, "match-all cannot be nested");
  const bool group = c.kind == QueryNode::Kind::And || c.kind == QueryNode::Kind::Or;
  return group ? "(" + to_string(c) + ")" : to_string(c);
}

}  // namespace

QueryNode QueryNode::conj(std::vector<QueryNode> children) { return combine(Kind::And, std::move(children)); }
QueryNode QueryNode::disj(std::vector<QueryNode> children) { return combine(Kind::Or, std::move(children)); }

QueryNode QueryNode::negate(QueryNode child) {
  QueryNode n;
  n.kind = Kind::Not;
  n.children.push_back(std::move(child));
  return n;
}

bool operator==(const QueryNode& a, const QueryNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case QueryNode::Kind::All: return true;
    case QueryNode::Kind::Compare:
      return a.layer == b.layer && a.key == b.key && a.op == b.op && a.threshold == b.threshold && a.mode == b.mode;
    case QueryNode::Kind::Organ: return a.key == b.key;
    case QueryNode::Kind::Has: return a.layer == b.layer && a.key == b.key;
    default: return a.children == b.children;
  }
}

Query parse_query(std::string_view text, NormalizationMode default_mode) {
  return Parser(text, default_mode).run();
}

std::string to_string(const Query& q) {
  switch (q.kind) {
    case QueryNode::Kind::All: return "";
    case QueryNode::Kind::Compare:
      return std::string(layer_name(q.layer)) + "." + quote_key(q.key) + " " + std::string(op_symbol(q.op)) + " " +
             number_text(q.threshold) + "@" + std::string(mode_name(q.mode));
    case QueryNode::Kind::Organ: return "organ = " + quote_key(q.key);
    case QueryNode::Kind::Has: return "has(" + std::string(layer_name(q.layer)) + "." + quote_key(q.key) + ")";
    case QueryNode::Kind::Not: return "NOT " + child_text(q.children.at(0));
    case QueryNode::Kind::And:
    case QueryNode::Kind::Or: {
      const char* sep = q.kind == QueryNode::Kind::And ? " AND " : " OR ";
      std::string out;
      for (std::size_t i = 0; i < q.children.size(); ++i) {
        if (i) out += sep;
        out += child_text(q.children[i]);
      }
      return out;
    }
  }
  return "";
}

}  // namespace tmap
