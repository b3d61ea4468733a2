#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tmap/stats.hpp"
#include "tmap/types.hpp"

namespace tmap {

enum class CompareOp { Less, LessEqual, Equal, GreaterEqual, Greater };

std::string_view op_symbol(CompareOp op);
bool compare(double lhs, CompareOp op, double rhs);

/// Composition-query AST.
///
///   expr       := term (OR term)*
///   term       := factor (AND factor)*
///   factor     := NOT factor | '(' expr ')' | comparison | organ | has
///   comparison := layer '.' key op number ['@' mode]
///   organ      := 'organ' '=' code
///   has        := 'has' '(' layer '.' key ')'
///
/// Keys are bare words ([A-Za-z0-9_-]+) or double-quoted strings. An empty
/// query matches everything.
struct QueryNode {
  enum class Kind { All, Compare, Organ, Has, And, Or, Not };

  Kind kind = Kind::All;
  LayerKind layer = LayerKind::Source;
  std::string key;  // class key, or organ code for Organ
  CompareOp op = CompareOp::GreaterEqual;
  double threshold = 0.0;
  NormalizationMode mode = NormalizationMode::PerSpecimen;
  std::vector<QueryNode> children;
  std::size_t offset = 0;  // byte offset in the source text

  static QueryNode all() { return {}; }
  static QueryNode comparison(LayerKind layer, std::string key, CompareOp op, double threshold,
                              NormalizationMode mode = NormalizationMode::PerSpecimen);
  static QueryNode organ(std::string code);
  static QueryNode has(LayerKind layer, std::string key);
  static QueryNode conj(std::vector<QueryNode> children);
  static QueryNode disj(std::vector<QueryNode> children);
  static QueryNode negate(QueryNode child);

  /// Structural equality; source offsets are ignored.
  friend bool operator==(const QueryNode& a, const QueryNode& b);
};

using Query = QueryNode;

class QueryError : public Error {
 public:
  QueryError(std::size_t offset, const std::string& what)
      : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

Query parse_query(std::string_view text, NormalizationMode default_mode = NormalizationMode::PerSpecimen);

/// Canonical text; parse_query(to_string(q)) == q.
std::string to_string(const Query& q);

}  // namespace tmap
