#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tmap/profile.hpp"
#include "tmap/query.hpp"
#include "tmap/stats.hpp"
#include "tmap/tissue_map.hpp"

namespace tmap {

/// Searchable metadata for one whole-slide image.
struct CatalogRecord {
  std::string wsi_id;
  std::optional<std::string> case_id;
  std::vector<std::string> organ_codes;  // source codes with nonzero area
  std::string map_ref;                   // stem of the encoded map (.png + .json)
  CompositionSet compositions;           // [layer][mode], direct (not rolled up)
  std::array<std::string, 3> profile_hashes;
  std::string ingested_at;               // ISO-8601 UTC

  const CompositionVector& composition(LayerKind l, NormalizationMode m) const {
    return compositions[layer_index(l)][static_cast<std::size_t>(m)];
  }
  friend bool operator==(const CatalogRecord&, const CatalogRecord&) = default;
};

struct CaseMetadata {
  std::optional<std::string> case_id;
  std::string map_ref;
  std::string ingested_at;  // empty: current UTC time
  bool overwrite = false;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

class DuplicateRecordError : public CatalogError {
 public:
  using CatalogError::CatalogError;
};

using ProfileSet = std::array<Profile, 3>;

nlohmann::ordered_json record_to_json(const CatalogRecord& r, const ProfileSet& profiles);
CatalogRecord record_from_json(const nlohmann::ordered_json& j, const ProfileSet& profiles);

/// Builds a record from a map and its nine compositions.
CatalogRecord make_record(const TissueMap& map, const CompositionSet& compositions, const ProfileSet& profiles,
                          const CaseMetadata& meta);

enum class ManifestFormat { Csv, Json };
ManifestFormat parse_manifest_format(std::string_view name);

/// Append-only catalog: one JSON record per line, last line per wsi_id wins.
/// One writer at a time; searches run on an immutable snapshot.
class Catalog {
 public:
  /// Opens (creating if absent) the log at `path` and rebuilds the index.
  Catalog(std::string path, ProfileSet profiles);

  const ProfileSet& profiles() const { return profiles_; }
  const Profile& profile(LayerKind k) const { return profiles_[layer_index(k)]; }
  const std::string& path() const { return path_; }

  /// Appends durably, then publishes a new snapshot.
  CatalogRecord ingest(const TissueMap& map, const CompositionSet& compositions, const CaseMetadata& meta);
  void ingest(const CatalogRecord& record, bool overwrite = false);

  std::size_t size() const;
  std::optional<CatalogRecord> get(std::string_view wsi_id) const;
  std::vector<std::string> ids() const;

  /// Matching wsi_ids in ascending order. Comparisons and has() use rolled-up
  /// values; organ matches any nonzero (rolled-up) source area.
  std::vector<std::string> search(const Query& q) const;
  std::vector<std::string> search(std::string_view query_text,
                                  NormalizationMode default_mode = NormalizationMode::PerSpecimen) const;

  std::string export_cohort(const std::vector<std::string>& ids, ManifestFormat format,
                            std::string_view query_text = {}) const;

  struct Snapshot;

 private:
  std::shared_ptr<const Snapshot> snapshot() const;
  void publish(std::shared_ptr<const Snapshot> s);
  void check_hashes(const CatalogRecord& r) const;
  void append_line(const std::string& line);

  std::string path_;
  ProfileSet profiles_;
  mutable std::mutex write_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

/// wsi_ids listed in a manifest produced by export_cohort.
std::vector<std::string> parse_manifest_ids(std::string_view text, ManifestFormat format);

}  // namespace tmap
