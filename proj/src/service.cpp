#include "tmap/service.hpp"

#include <httplib.h>

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "tmap/png_io.hpp"

namespace tmap {

using nlohmann::ordered_json;

struct Service::Server {
  httplib::Server http;
};

namespace {

struct HttpError {
  int status;
  std::string message;
};

ServiceResponse json_response(const ordered_json& j, int status = 200) {
  return {status, "application/json", j.dump(2) + "\n", {}};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') {
      ++i;
      continue;
    }
    const std::size_t j = path.find('/', i);
    parts.push_back(path.substr(i, j == std::string::npos ? std::string::npos : j - i));
    if (j == std::string::npos) break;
    i = j;
  }
  return parts;
}

std::string param(const ServiceRequest& req, const std::string& name, const std::string& fallback = {}) {
  auto it = req.params.find(name);
  return it == req.params.end() ? fallback : it->second;
}

NormalizationMode mode_param(const ServiceRequest& req, NormalizationMode fallback) {
  auto it = req.params.find("mode");
  if (it == req.params.end() || it->second.empty()) return fallback;
  try {
    return parse_mode_name(it->second);
  } catch (const Error& e) {
    throw HttpError{400, e.what()};
  }
}

ordered_json summary(const CatalogRecord& r) {
  return {{"wsi_id", r.wsi_id},
          {"case_id", r.case_id ? ordered_json(*r.case_id) : ordered_json(nullptr)},
          {"organ_codes", r.organ_codes},
          {"map_ref", r.map_ref},
          {"ingested_at", r.ingested_at}};
}

std::string resolve_map_ref(const Catalog& catalog, const std::string& ref) {
  namespace fs = std::filesystem;
  const fs::path p(ref);
  if (p.is_absolute()) return ref;
  return (fs::path(catalog.path()).parent_path() / p).string();
}

}  // namespace

Service::Service(const Catalog& catalog) : catalog_(catalog), server_(std::make_unique<Server>()) {
  auto adapt = [this](const httplib::Request& hreq, httplib::Response& hres) {
    ServiceRequest req{hreq.method, hreq.path, {}, hreq.body};
    for (const auto& [k, v] : hreq.params) req.params.emplace(k, v);
    const ServiceResponse res = handle(req);
    hres.status = res.status;
    for (const auto& [k, v] : res.headers) hres.set_header(k, v);
    hres.set_content(res.body, res.content_type);
  };
  server_->http.Get(R"(/.*)", adapt);
  server_->http.Post(R"(/.*)", adapt);
}

Service::~Service() = default;

int Service::bind(const std::string& host, int port) {
  if (port == 0) return server_->http.bind_to_any_port(host);
  return server_->http.bind_to_port(host, port) ? port : -1;
}

bool Service::listen_after_bind() { return server_->http.listen_after_bind(); }

void Service::stop() { server_->http.stop(); }

ServiceResponse Service::handle(const ServiceRequest& req) const {
  ServiceResponse res;
  try {
    const auto parts = split_path(req.path);
    auto record = [&](const std::string& id) {
      auto r = catalog_.get(id);
      if (!r) throw HttpError{404, "unknown wsi_id '" + id + "'"};
      return *r;
    };

    if (req.method == "GET" && parts.size() == 1 && parts[0] == "wsis") {
      const std::string text = param(req, "query");
      const NormalizationMode mode = mode_param(req, NormalizationMode::PerSpecimen);
      std::vector<std::string> ids;
      try {
        ids = catalog_.search(text, mode);
      } catch (const QueryError& e) {
        throw HttpError{400, e.what()};
      }
      ordered_json j;
      j["query"] = text;
      j["mode"] = mode_name(mode);
      j["count"] = ids.size();
      j["records"] = ordered_json::array();
      for (const auto& id : ids) j["records"].push_back(summary(record(id)));
      res = json_response(j);
    } else if (req.method == "GET" && parts.size() == 3 && parts[0] == "wsis" && parts[2] == "composition") {
      const CatalogRecord r = record(parts[1]);
      ordered_json j;
      j["wsi_id"] = r.wsi_id;
      ordered_json comps = ordered_json::object();
      for (LayerKind l : kAllLayers)
        for (NormalizationMode m : kAllModes)
          comps[std::string(layer_name(l))][std::string(mode_name(m))] =
              to_json(r.composition(l, m), catalog_.profile(l));
      j["compositions"] = std::move(comps);
      res = json_response(j);
    } else if (req.method == "GET" && parts.size() == 3 && parts[0] == "wsis" && parts[2] == "map") {
      const CatalogRecord r = record(parts[1]);
      LayerKind layer;
      double alpha = 1.0;
      try {
        layer = parse_layer_name(param(req, "layer", "alteration"));
        const std::string a = param(req, "alpha", "1");
        std::size_t used = 0;
        alpha = std::stod(a, &used);
        if (used != a.size() || !std::isfinite(alpha) || alpha < 0.0 || alpha > 1.0)
          throw Error("alpha must be a number in [0,1]");
      } catch (const std::invalid_argument&) {
        throw HttpError{400, "alpha must be a number in [0,1]"};
      } catch (const std::out_of_range&) {
        throw HttpError{400, "alpha must be a number in [0,1]"};
      } catch (const Error& e) {
        throw HttpError{400, e.what()};
      }
      const std::string stem = resolve_map_ref(catalog_, r.map_ref);
      const TissueMap map = load_map(stem);
      std::optional<RgbImage> base;
      if (std::filesystem::exists(stem + ".thumb.png")) {
        base = decode_png_rgb(read_file_bytes(stem + ".thumb.png"));
        if (base->width() != map.width() || base->height() != map.height()) base.reset();
      }
      const RgbImage img = render_layer(map, layer, catalog_.profile(layer), alpha, base ? &*base : nullptr);
      const auto png = encode_png_rgb(img);
      res = {200, "image/png", std::string(png.begin(), png.end()), {}};
    } else if (req.method == "GET" && parts.size() == 3 && parts[0] == "wsis" && parts[2] == "barchart") {
      const CatalogRecord r = record(parts[1]);
      const NormalizationMode mode = mode_param(req, NormalizationMode::PerSpecimen);
      std::array<CompositionVector, 3> vectors;
      std::array<const Profile*, 3> profiles{};
      for (LayerKind l : kAllLayers) {
        vectors[layer_index(l)] = r.composition(l, mode);
        profiles[layer_index(l)] = &catalog_.profile(l);
      }
      res = {200, "image/svg+xml", to_barchart(vectors, profiles, r.wsi_id + " (" + std::string(mode_name(mode)) + ")"),
             {}};
    } else if (req.method == "POST" && parts.size() == 1 && parts[0] == "cohorts") {
      ordered_json body;
      try {
        body = ordered_json::parse(req.body);
      } catch (const ordered_json::exception& e) {
        throw HttpError{400, std::string("request body is not JSON: ") + e.what()};
      }
      if (!body.is_object()) throw HttpError{400, "request body must be a JSON object"};
      const std::string query = body.value("query", "");
      ManifestFormat format;
      std::vector<std::string> ids;
      try {
        format = parse_manifest_format(body.value("format", "csv"));
        if (body.contains("ids"))
          ids = body["ids"].get<std::vector<std::string>>();
        else
          ids = catalog_.search(query);
      } catch (const ordered_json::exception&) {
        throw HttpError{400, "ids must be a list of strings"};
      } catch (const QueryError& e) {
        throw HttpError{400, e.what()};
      } catch (const CatalogError& e) {
        throw HttpError{400, e.what()};
      }
      for (const auto& id : ids) record(id);
      res = {200, format == ManifestFormat::Csv ? "text/csv" : "application/json",
             catalog_.export_cohort(ids, format, query), {}};
    } else if (req.method == "GET" && parts.size() == 2 && parts[0] == "profiles") {
      LayerKind layer;
      try {
        layer = parse_layer_name(parts[1]);
      } catch (const Error& e) {
        throw HttpError{404, e.what()};
      }
      res = {200, "text/csv", to_csv(catalog_.profile(layer)), {}};
    } else {
      throw HttpError{404, "no route for " + req.method + " " + req.path};
    }
  } catch (const HttpError& e) {
    res = json_response({{"error", e.message}}, e.status);
  } catch (const Error& e) {
    res = json_response({{"error", e.what()}}, 400);
  }
  res.headers["X-Profile-Hash-Source"] = catalog_.profile(LayerKind::Source).content_hash();
  res.headers["X-Profile-Hash-Tissue"] = catalog_.profile(LayerKind::TissueType).content_hash();
  res.headers["X-Profile-Hash-Alteration"] = catalog_.profile(LayerKind::Alteration).content_hash();
  return res;
}

}  // namespace tmap
