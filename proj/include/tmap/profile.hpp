#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tmap/types.hpp"

namespace tmap {

/// One row of a layer profile.
struct ProfileEntry {
  int id = 0;
  int parent_id = -1;
  std::string code;
  std::string def_color;  // annotation-tool color, "#RRGGBB"
  std::string color;      // tissue-map visualization color, "#RRGGBB"
  std::string name;
  std::string comment;
  std::string ontology_url;
  std::string concept_url;

  friend bool operator==(const ProfileEntry&, const ProfileEntry&) = default;
};

/// Column names, in canonical order.
inline constexpr std::array<std::string_view, 9> kProfileColumns{
    "ID", "PARENT", "CODE", "DEF COLOR", "COLOR", "NAME", "COMMENT", "ONTOLOGY", "CONCEPT"};

inline constexpr std::array<std::string_view, 4> kNullValueNames{"NI", "UNC", "UNK", "NV"};
inline constexpr std::size_t kMaxProfileEntries = 256;

/// A coded class vocabulary for one tissue-map layer. Immutable once built.
class Profile {
 public:
  Profile() = default;
  Profile(LayerKind kind, std::vector<ProfileEntry> entries);

  LayerKind kind() const { return kind_; }
  const std::vector<ProfileEntry>& entries() const { return entries_; }
  const std::string& content_hash() const { return content_hash_; }

  /// Entry with the given id, or nullptr. Ids outside 0..255 never match.
  const ProfileEntry* find(int id) const;
  bool contains(int id) const { return find(id) != nullptr; }

  friend bool operator==(const Profile& a, const Profile& b) {
    return a.kind_ == b.kind_ && a.entries_ == b.entries_ && a.content_hash_ == b.content_hash_;
  }

 private:
  LayerKind kind_ = LayerKind::Source;
  std::vector<ProfileEntry> entries_;
  std::array<int, 256> slot_{};  // id -> index+1 into entries_, 0 when absent
  std::string content_hash_;
};

class ProfileParseError : public Error {
 public:
  ProfileParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row), detail_(what) {}
  /// 1-based record number; the header is row 1.
  std::size_t row() const { return row_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t row_;
  std::string detail_;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

Profile parse_profile(std::string_view csv_text, LayerKind kind);
Profile load_profile(const std::string& path, LayerKind kind);

/// Canonical CSV: header in canonical column order, LF line ends, minimal quoting.
std::string to_csv(const Profile& p);

enum class ViolationKind {
  NullValues,
  DuplicateId,
  DuplicateCode,
  DuplicateName,
  IdRange,
  MissingParent,
  Cycle,
  Color,
  TooManyEntries,
};

std::string_view violation_name(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::vector<int> ids;  // offending entry ids
  std::string message;
};

std::vector<Violation> validate_profile(const Profile& p);

/// Ids from the parent of `id` up to its root. Throws LookupError on unknown id
/// or a cyclic parent chain.
std::vector<int> ancestors(const Profile& p, int id);

/// Exact code match first, then exact name match.
/// Throws LookupError on no match or ambiguous match.
int lookup(const Profile& p, std::string_view key);
std::optional<int> try_lookup(const Profile& p, std::string_view key);

inline constexpr Rgb kFallbackColor{255, 0, 255};

/// 256-slot color table. Slots without an entry (or with an unparsable
/// color) get kFallbackColor.
std::array<Rgb, 256> lut(const Profile& p);

}  // namespace tmap
