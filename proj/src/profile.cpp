#include "tmap/profile.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "tmap/csv.hpp"
#include "tmap/hash.hpp"

namespace tmap {

namespace {

std::string canonical_csv(const std::vector<ProfileEntry>& entries) {
  std::string out;
  {
    std::vector<std::string> header(kProfileColumns.begin(), kProfileColumns.end());
    out += csv::join_row(header);
    out += '\n';
  }
  for (const auto& e : entries) {
    out += csv::join_row({std::to_string(e.id), std::to_string(e.parent_id), e.code, e.def_color,
                          e.color, e.name, e.comment, e.ontology_url, e.concept_url});
    out += '\n';
  }
  return out;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(ids[i]);
  }
  return s;
}

}  // namespace

Profile::Profile(LayerKind kind, std::vector<ProfileEntry> entries)
    : kind_(kind), entries_(std::move(entries)) {
  slot_.fill(0);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    int id = entries_[i].id;
    if (id >= 0 && id < 256 && slot_[id] == 0) slot_[id] = static_cast<int>(i) + 1;
  }
  content_hash_ = sha256_digest(canonical_csv(entries_));
}

const ProfileEntry* Profile::find(int id) const {
  if (id < 0 || id >= 256 || slot_[id] == 0) return nullptr;
  return &entries_[slot_[id] - 1];
}

Profile parse_profile(std::string_view csv_text, LayerKind kind) {
  std::vector<csv::Record> records;
  try {
    records = csv::parse(csv_text);
  } catch (const csv::ParseError& e) {
    throw ProfileParseError(e.line(), std::string("malformed CSV: ") + e.what());
  }
  if (records.empty()) throw ProfileParseError(1, "missing header row");

  // Column name -> position in file.
  std::array<int, kProfileColumns.size()> col{};
  col.fill(-1);
  const auto& header = records.front().fields;
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto it = std::find(kProfileColumns.begin(), kProfileColumns.end(), header[i]);
    if (it == kProfileColumns.end())
      throw ProfileParseError(1, "unknown header column '" + header[i] + "'");
    auto c = static_cast<std::size_t>(it - kProfileColumns.begin());
    if (col[c] >= 0) throw ProfileParseError(1, "duplicate header column '" + header[i] + "'");
    col[c] = static_cast<int>(i);
  }
  for (std::size_t c = 0; c < col.size(); ++c)
    if (col[c] < 0)
      throw ProfileParseError(1, "missing header column '" + std::string(kProfileColumns[c]) + "'");

  std::vector<ProfileEntry> entries;
  entries.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    const std::size_t row = r + 1;
    if (f.size() != header.size())
      throw ProfileParseError(row, "malformed CSV row: expected " + std::to_string(header.size()) +
                                       " fields, found " + std::to_string(f.size()));
    auto field = [&](std::size_t c) -> const std::string& { return f[col[c]]; };

    ProfileEntry e;
    auto id = parse_int(field(0));
    if (!id) throw ProfileParseError(row, "non-integer ID '" + field(0) + "'");
    auto parent = parse_int(field(1));
    if (!parent) throw ProfileParseError(row, "non-integer PARENT '" + field(1) + "'");
    e.id = *id;
    e.parent_id = *parent;
    e.code = field(2);
    e.def_color = field(3);
    e.color = field(4);
    if (!is_hex_color(e.def_color))
      throw ProfileParseError(row, "malformed hex color in DEF COLOR '" + e.def_color + "'");
    if (!is_hex_color(e.color))
      throw ProfileParseError(row, "malformed hex color in COLOR '" + e.color + "'");
    e.name = field(5);
    e.comment = field(6);
    e.ontology_url = field(7);
    e.concept_url = field(8);
    entries.push_back(std::move(e));
  }
  return Profile(kind, std::move(entries));
}

Profile load_profile(const std::string& path, LayerKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open profile '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_profile(ss.str(), kind);
  } catch (const ProfileParseError& e) {
    throw ProfileParseError(e.row(), path + ": " + e.detail());
  }
}

std::string to_csv(const Profile& p) { return canonical_csv(p.entries()); }

std::string_view violation_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::NullValues: return "null-values";
    case ViolationKind::DuplicateId: return "duplicate-id";
    case ViolationKind::DuplicateCode: return "duplicate-code";
    case ViolationKind::DuplicateName: return "duplicate-name";
    case ViolationKind::IdRange: return "id-range";
    case ViolationKind::MissingParent: return "missing-parent";
    case ViolationKind::Cycle: return "cycle";
    case ViolationKind::Color: return "color";
    case ViolationKind::TooManyEntries: return "too-many-entries";
  }
  return "?";
}

std::vector<Violation> validate_profile(const Profile& p) {
  std::vector<Violation> out;
  const auto& entries = p.entries();

  if (entries.size() > kMaxProfileEntries)
    out.push_back({ViolationKind::TooManyEntries, {},
                   std::to_string(entries.size()) + " entries exceed the limit of 256"});

  {
    std::vector<int> bad;
    for (int id = 0; id < kSentinelCount; ++id) {
      const ProfileEntry* e = p.find(id);
      if (!e || e->name != kNullValueNames[id]) bad.push_back(id);
    }
    if (!bad.empty())
      out.push_back({ViolationKind::NullValues, bad,
                     "ids 0-3 must be NI, UNC, UNK, NV; offending ids: " + join_ids(bad)});
  }

  std::map<int, int> id_count;
  for (const auto& e : entries) {
    if (e.id < 0 || e.id > 255)
      out.push_back({ViolationKind::IdRange, {e.id}, "id " + std::to_string(e.id) + " outside 0..255"});
    if (++id_count[e.id] == 2)
      out.push_back({ViolationKind::DuplicateId, {e.id}, "id " + std::to_string(e.id) + " appears more than once"});
  }

  auto check_unique = [&](auto field, ViolationKind kind, const char* label) {
    std::map<std::string, std::vector<int>> seen;
    for (const auto& e : entries) seen[e.*field].push_back(e.id);
    for (const auto& [key, ids] : seen)
      if (ids.size() > 1)
        out.push_back({kind, ids, std::string(label) + " '" + key + "' shared by ids " + join_ids(ids)});
  };
  check_unique(&ProfileEntry::code, ViolationKind::DuplicateCode, "code");
  check_unique(&ProfileEntry::name, ViolationKind::DuplicateName, "name");

  for (const auto& e : entries) {
    if (e.parent_id != -1 && !p.contains(e.parent_id))
      out.push_back({ViolationKind::MissingParent, {e.id},
                     "id " + std::to_string(e.id) + " has unknown parent " + std::to_string(e.parent_id)});
    if (!is_hex_color(e.color) || !is_hex_color(e.def_color))
      out.push_back({ViolationKind::Color, {e.id}, "id " + std::to_string(e.id) + " has a malformed color"});
  }

  // Cycle detection over parent links (out-degree <= 1): colour walk.
  std::array<int, 256> state{};  // 0 unvisited, 1 on current walk, 2 done
  for (const auto& start : entries) {
    if (!p.find(start.id) || p.find(start.id) != &start) continue;
    std::vector<int> walk;
    int cur = start.id;
    while (cur >= 0 && cur < 256 && p.contains(cur) && state[cur] == 0) {
      state[cur] = 1;
      walk.push_back(cur);
      cur = p.find(cur)->parent_id;
    }
    if (cur >= 0 && cur < 256 && p.contains(cur) && state[cur] == 1) {
      auto it = std::find(walk.begin(), walk.end(), cur);
      std::vector<int> cycle(it, walk.end());
      std::sort(cycle.begin(), cycle.end());
      out.push_back({ViolationKind::Cycle, cycle, "parent cycle through ids " + join_ids(cycle)});
    }
    for (int id : walk) state[id] = 2;
  }
  return out;
}

std::vector<int> ancestors(const Profile& p, int id) {
  const ProfileEntry* e = p.find(id);
  if (!e) throw LookupError("unknown id " + std::to_string(id));
  std::vector<int> path;
  int cur = e->parent_id;
  while (cur != -1) {
    const ProfileEntry* parent = p.find(cur);
    if (!parent) throw LookupError("id " + std::to_string(id) + " has dangling parent " + std::to_string(cur));
    path.push_back(cur);
    if (path.size() >= kMaxProfileEntries)
      throw LookupError("parent chain of id " + std::to_string(id) + " is cyclic");
    cur = parent->parent_id;
  }
  return path;
}

std::optional<int> try_lookup(const Profile& p, std::string_view key) {
  const ProfileEntry* hit = nullptr;
  for (const auto& e : p.entries()) {
    if (e.code != key) continue;
    if (hit) throw LookupError("ambiguous key '" + std::string(key) + "' matches several codes");
    hit = &e;
  }
  if (hit) return hit->id;
  for (const auto& e : p.entries()) {
    if (e.name != key) continue;
    if (hit) throw LookupError("ambiguous key '" + std::string(key) + "' matches several names");
    hit = &e;
  }
  if (hit) return hit->id;
  return std::nullopt;
}

int lookup(const Profile& p, std::string_view key) {
  auto id = try_lookup(p, key);
  if (!id)
    throw LookupError("no " + std::string(layer_name(p.kind())) + " profile entry with code or name '" +
                      std::string(key) + "'");
  return *id;
}

std::array<Rgb, 256> lut(const Profile& p) {
  std::array<Rgb, 256> table;
  table.fill(kFallbackColor);
  for (int id = 0; id < 256; ++id) {
    const ProfileEntry* e = p.find(id);
    if (e && is_hex_color(e->color)) table[id] = parse_hex_color(e->color);
  }
  return table;
}

}  // namespace tmap
