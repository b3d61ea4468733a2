#pragma once

#include <map>
#include <memory>
#include <string>

#include "tmap/catalog.hpp"

namespace tmap {

struct ServiceRequest {
  std::string method;  // GET | POST
  std::string path;
  std::map<std::string, std::string> params;  // decoded query parameters
  std::string body;
};

struct ServiceResponse {
  int status = 200;
  std::string content_type;
  std::string body;
  std::map<std::string, std::string> headers;
};

/// HTTP front end over a catalog.
///
///   GET  /wsis?query=<text>&mode=<mode>      record summaries (JSON)
///   GET  /wsis/{id}/composition              nine composition vectors
///   GET  /wsis/{id}/map?layer=<l>&alpha=<a>  rendered layer (PNG)
///   GET  /wsis/{id}/barchart?mode=<mode>     bar chart (SVG)
///   POST /cohorts {"ids", "query", "format"} manifest
///   GET  /profiles/{layer}                   profile CSV
///
/// Every response carries X-Profile-Hash-{Source,Tissue,Alteration}. Errors
/// are JSON objects {"error": ...} with status 400 or 404.
class Service {
 public:
  explicit Service(const Catalog& catalog);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Routes one request without any socket involved.
  ServiceResponse handle(const ServiceRequest& req) const;

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen_after_bind();
  void stop();

 private:
  const Catalog& catalog_;
  struct Server;
  std::unique_ptr<Server> server_;
};

}  // namespace tmap
