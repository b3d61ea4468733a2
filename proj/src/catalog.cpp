#include "tmap/catalog.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "tmap/csv.hpp"

namespace tmap {

using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Fixed-size bit set over snapshot positions.
class Bits {
 public:
  explicit Bits(std::size_t n, bool value = false)
      : n_(n), words_((n + 63) / 64, value ? ~std::uint64_t{0} : 0) {
    trim();
  }
  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
  Bits& operator&=(const Bits& o) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
    return *this;
  }
  Bits& operator|=(const Bits& o) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
    return *this;
  }
  Bits operator~() const {
    Bits out = *this;
    for (auto& w : out.words_) w = ~w;
    out.trim();
    return out;
  }
  std::size_t size() const { return n_; }

 private:
  void trim() {
    if (n_ % 64 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (n_ % 64)) - 1;
  }
  std::size_t n_;
  std::vector<std::uint64_t> words_;
};

struct RatioPosting {
  double ratio;
  std::uint32_t pos;
};

struct ClassPostings {
  std::vector<RatioPosting> sorted;  // ascending ratio
  std::optional<Bits> present;
};

}  // namespace

struct Catalog::Snapshot {
  std::map<std::string, std::shared_ptr<const CatalogRecord>, std::less<>> records;

  // Built on first search.
  struct Index {
    std::vector<const CatalogRecord*> order;  // ascending wsi_id
    // [layer][mode] -> class id -> postings of rolled-up ratios
    std::array<std::array<std::map<int, ClassPostings>, 3>, 3> ratios;
    // [layer] -> class id -> records with rolled-up pixel count > 0
    std::array<std::map<int, Bits>, 3> has;
  };
  mutable std::once_flag once;
  mutable std::unique_ptr<Index> index;

  const Index& get_index(const ProfileSet& profiles) const {
    std::call_once(once, [&] { index = build(profiles); });
    return *index;
  }

  std::unique_ptr<Index> build(const ProfileSet& profiles) const {
    auto idx = std::make_unique<Index>();
    const std::size_t n = records.size();
    for (const auto& [id, r] : records) idx->order.push_back(r.get());
    for (std::uint32_t pos = 0; pos < n; ++pos) {
      const CatalogRecord& r = *idx->order[pos];
      for (LayerKind l : kAllLayers) {
        const Profile& p = profiles[layer_index(l)];
        for (NormalizationMode m : kAllModes) {
          const CompositionVector rolled = rollup(r.composition(l, m), p);
          auto& by_class = idx->ratios[layer_index(l)][static_cast<std::size_t>(m)];
          for (const auto& [cls, ratio] : rolled.ratios) {
            auto& post = by_class[cls];
            post.sorted.push_back({ratio, pos});
            if (!post.present) post.present.emplace(n);
            post.present->set(pos);
          }
          if (m == NormalizationMode::PerImage)
            for (const auto& [cls, count] : rolled.pixel_counts)
              if (count > 0) idx->has[layer_index(l)].try_emplace(cls, n).first->second.set(pos);
        }
      }
    }
    for (auto& layer : idx->ratios)
      for (auto& mode : layer)
        for (auto& [cls, post] : mode)
          std::sort(post.sorted.begin(), post.sorted.end(),
                    [](const RatioPosting& a, const RatioPosting& b) { return a.ratio < b.ratio; });
    return idx;
  }
};

namespace {

using Snapshot = Catalog::Snapshot;

Bits evaluate(const Query& q, const Snapshot::Index& idx, const ProfileSet& profiles) {
  const std::size_t n = idx.order.size();
  auto resolve = [&](LayerKind l, const std::string& key) {
    try {
      return lookup(profiles[layer_index(l)], key);
    } catch (const LookupError& e) {
      throw QueryError(q.offset, std::string("unresolvable class key: ") + e.what());
    }
  };
  switch (q.kind) {
    case QueryNode::Kind::All: return Bits(n, true);
    case QueryNode::Kind::Compare: {
      const int cls = resolve(q.layer, q.key);
      const auto& by_class = idx.ratios[layer_index(q.layer)][static_cast<std::size_t>(q.mode)];
      Bits out(n);
      auto it = by_class.find(cls);
      if (it != by_class.end()) {
        const auto& v = it->second.sorted;
        auto lo = std::lower_bound(v.begin(), v.end(), q.threshold,
                                   [](const RatioPosting& p, double t) { return p.ratio < t; });
        auto hi = std::upper_bound(v.begin(), v.end(), q.threshold,
                                   [](double t, const RatioPosting& p) { return t < p.ratio; });
        auto first = v.begin(), last = v.end();
        switch (q.op) {
          case CompareOp::Less: last = lo; break;
          case CompareOp::LessEqual: last = hi; break;
          case CompareOp::Equal: first = lo, last = hi; break;
          case CompareOp::GreaterEqual: first = lo; break;
          case CompareOp::Greater: first = hi; break;
        }
        for (auto p = first; p != last; ++p) out.set(p->pos);
      }
      // Records without the class carry an implicit ratio of 0.
      if (compare(0.0, q.op, q.threshold)) {
        if (it == by_class.end()) return Bits(n, true);
        out |= ~*it->second.present;
      }
      return out;
    }
    case QueryNode::Kind::Organ:
    case QueryNode::Kind::Has: {
      const LayerKind l = q.kind == QueryNode::Kind::Organ ? LayerKind::Source : q.layer;
      const int cls = resolve(l, q.key);
      const auto& has = idx.has[layer_index(l)];
      auto it = has.find(cls);
      return it == has.end() ? Bits(n) : it->second;
    }
    case QueryNode::Kind::Not: return ~evaluate(q.children.at(0), idx, profiles);
    case QueryNode::Kind::And: {
      Bits out(n, true);
      for (const auto& c : q.children) out &= evaluate(c, idx, profiles);
      return out;
    }
    case QueryNode::Kind::Or: {
      Bits out(n);
      for (const auto& c : q.children) out |= evaluate(c, idx, profiles);
      return out;
    }
  }
  return Bits(n);
}

}  // namespace

ordered_json record_to_json(const CatalogRecord& r, const ProfileSet& profiles) {
  ordered_json j;
  j["wsi_id"] = r.wsi_id;
  j["case_id"] = r.case_id ? ordered_json(*r.case_id) : ordered_json(nullptr);
  j["organ_codes"] = r.organ_codes;
  j["map_ref"] = r.map_ref;
  j["ingested_at"] = r.ingested_at;
  j["profile_hashes"] = {{"source", r.profile_hashes[0]},
                         {"tissue", r.profile_hashes[1]},
                         {"alteration", r.profile_hashes[2]}};
  ordered_json comps = ordered_json::object();
  for (LayerKind l : kAllLayers)
    for (NormalizationMode m : kAllModes)
      comps[std::string(layer_name(l))][std::string(mode_name(m))] =
          to_json(r.composition(l, m), profiles[layer_index(l)]);
  j["compositions"] = std::move(comps);
  return j;
}

CatalogRecord record_from_json(const ordered_json& j, const ProfileSet& profiles) {
  try {
    CatalogRecord r;
    r.wsi_id = j.at("wsi_id").get<std::string>();
    if (j.contains("case_id") && !j["case_id"].is_null()) r.case_id = j["case_id"].get<std::string>();
    r.organ_codes = j.at("organ_codes").get<std::vector<std::string>>();
    r.map_ref = j.at("map_ref").get<std::string>();
    r.ingested_at = j.at("ingested_at").get<std::string>();
    for (LayerKind l : kAllLayers) {
      const std::string ln(layer_name(l));
      r.profile_hashes[layer_index(l)] = j.at("profile_hashes").at(ln).get<std::string>();
      for (NormalizationMode m : kAllModes)
        r.compositions[layer_index(l)][static_cast<std::size_t>(m)] =
            composition_from_json(j.at("compositions").at(ln).at(std::string(mode_name(m))), profiles[layer_index(l)]);
    }
    return r;
  } catch (const ordered_json::exception& e) {
    throw CatalogError(std::string("malformed catalog record: ") + e.what());
  }
}

CatalogRecord make_record(const TissueMap& map, const CompositionSet& compositions, const ProfileSet& profiles,
                          const CaseMetadata& meta) {
  CatalogRecord r;
  r.wsi_id = map.wsi_id;
  r.case_id = meta.case_id;
  r.map_ref = meta.map_ref;
  r.ingested_at = meta.ingested_at.empty() ? utc_now() : meta.ingested_at;
  r.compositions = compositions;
  r.profile_hashes = map.profile_hashes;
  const auto& src = r.composition(LayerKind::Source, NormalizationMode::PerImage);
  for (const auto& [id, count] : src.pixel_counts) {
    if (is_sentinel(id) || count <= 0) continue;
    const ProfileEntry* e = profiles[0].find(id);
    if (!e) throw CatalogError("source class id " + std::to_string(id) + " missing from source profile");
    r.organ_codes.push_back(e->code);
  }
  return r;
}

ManifestFormat parse_manifest_format(std::string_view name) {
  if (name == "csv") return ManifestFormat::Csv;
  if (name == "json") return ManifestFormat::Json;
  throw CatalogError("unknown manifest format '" + std::string(name) + "' (expected csv|json)");
}

Catalog::Catalog(std::string path, ProfileSet profiles) : path_(std::move(path)), profiles_(std::move(profiles)) {
  for (LayerKind l : kAllLayers)
    if (profiles_[layer_index(l)].kind() != l)
      throw CatalogError("profile for layer " + std::string(layer_name(l)) + " has the wrong kind");
  auto snap = std::make_shared<Snapshot>();
  std::ifstream in(path_);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    CatalogRecord r;
    try {
      r = record_from_json(ordered_json::parse(line), profiles_);
    } catch (const std::exception& e) {
      throw CatalogError(path_ + ":" + std::to_string(lineno) + ": " + e.what());
    }
    check_hashes(r);
    std::string id = r.wsi_id;
    snap->records[std::move(id)] = std::make_shared<const CatalogRecord>(std::move(r));
  }
  snapshot_ = std::move(snap);
}

std::shared_ptr<const Catalog::Snapshot> Catalog::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void Catalog::publish(std::shared_ptr<const Snapshot> s) {
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(s);
}

void Catalog::check_hashes(const CatalogRecord& r) const {
  for (LayerKind l : kAllLayers) {
    const auto& want = profiles_[layer_index(l)].content_hash();
    if (r.profile_hashes[layer_index(l)] != want)
      throw CatalogError("record '" + r.wsi_id + "' was built with a different " + std::string(layer_name(l)) +
                         " profile (" + r.profile_hashes[layer_index(l)] + " vs " + want + ")");
    for (NormalizationMode m : kAllModes) {
      const auto& h = r.composition(l, m).profile_hash;
      if (h != want)
        throw CatalogError("record '" + r.wsi_id + "' has a " + std::string(layer_name(l)) + "/" +
                           std::string(mode_name(m)) + " composition from a different profile");
    }
  }
}

void Catalog::append_line(const std::string& line) {
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw CatalogError("cannot open catalog '" + path_ + "': " + std::strerror(errno));
  const std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t w = ::write(fd, data.data() + done, data.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw CatalogError("write to catalog failed: " + std::string(std::strerror(err)));
    }
    done += static_cast<std::size_t>(w);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw CatalogError("fsync of catalog failed");
}

CatalogRecord Catalog::ingest(const TissueMap& map, const CompositionSet& compositions, const CaseMetadata& meta) {
  CatalogRecord r = make_record(map, compositions, profiles_, meta);
  ingest(r, meta.overwrite);
  return r;
}

void Catalog::ingest(const CatalogRecord& record, bool overwrite) {
  check_hashes(record);
  std::lock_guard lock(write_mutex_);
  auto current = snapshot();
  if (!overwrite && current->records.count(record.wsi_id))
    throw DuplicateRecordError("wsi_id '" + record.wsi_id + "' already in catalog (use overwrite)");
  append_line(record_to_json(record, profiles_).dump());
  auto next = std::make_shared<Snapshot>();
  next->records = current->records;
  next->records[record.wsi_id] = std::make_shared<const CatalogRecord>(record);
  publish(std::move(next));
}

std::size_t Catalog::size() const { return snapshot()->records.size(); }

std::optional<CatalogRecord> Catalog::get(std::string_view wsi_id) const {
  auto s = snapshot();
  auto it = s->records.find(wsi_id);
  if (it == s->records.end()) return std::nullopt;
  return *it->second;
}

std::vector<std::string> Catalog::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, r] : snapshot()->records) out.push_back(id);
  return out;
}

std::vector<std::string> Catalog::search(const Query& q) const {
  auto s = snapshot();
  const auto& idx = s->get_index(profiles_);
  const Bits hits = evaluate(q, idx, profiles_);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < hits.size(); ++i)
    if (hits.test(i)) out.push_back(idx.order[i]->wsi_id);
  return out;
}

std::vector<std::string> Catalog::search(std::string_view query_text, NormalizationMode default_mode) const {
  return search(parse_query(query_text, default_mode));
}

std::string Catalog::export_cohort(const std::vector<std::string>& ids, ManifestFormat format,
                                   std::string_view query_text) const {
  auto s = snapshot();
  std::vector<std::shared_ptr<const CatalogRecord>> rows;
  for (const auto& id : ids) {
    auto it = s->records.find(id);
    if (it == s->records.end()) throw CatalogError("unknown wsi_id '" + id + "'");
    rows.push_back(it->second);
  }
  auto join_codes = [](const std::vector<std::string>& codes) {
    std::string out;
    for (std::size_t i = 0; i < codes.size(); ++i) out += (i ? ";" : "") + codes[i];
    return out;
  };
  if (format == ManifestFormat::Csv) {
    std::string out = "wsi_id,case_id,organ_codes,map_ref,query\n";
    for (const auto& r : rows)
      out += csv::join_row({r->wsi_id, r->case_id.value_or(""), join_codes(r->organ_codes), r->map_ref,
                            std::string(query_text)}) +
             "\n";
    return out;
  }
  ordered_json j;
  j["query"] = query_text;
  j["records"] = ordered_json::array();
  for (const auto& r : rows)
    j["records"].push_back({{"wsi_id", r->wsi_id},
                            {"case_id", r->case_id ? ordered_json(*r->case_id) : ordered_json(nullptr)},
                            {"organ_codes", r->organ_codes},
                            {"map_ref", r->map_ref}});
  return j.dump(2) + "\n";
}

std::vector<std::string> parse_manifest_ids(std::string_view text, ManifestFormat format) {
  std::vector<std::string> out;
  if (format == ManifestFormat::Csv) {
    auto records = csv::parse(text);
    if (records.empty() || records.front().fields.empty() || records.front().fields.front() != "wsi_id")
      throw CatalogError("manifest has no wsi_id header");
    for (std::size_t i = 1; i < records.size(); ++i) out.push_back(records[i].fields.front());
    return out;
  }
  try {
    const auto doc = ordered_json::parse(text);
    for (const auto& r : doc.at("records")) out.push_back(r.at("wsi_id").get<std::string>());
  } catch (const ordered_json::exception& e) {
    throw CatalogError(std::string("malformed manifest: ") + e.what());
  }
  return out;
}

}  // namespace tmap
