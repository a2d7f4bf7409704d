#include <thread>

// Eigen must come before httplib: <resolv.h> defines a _res macro.
#include "euph/curation.hpp"
#include "euph/error.hpp"

#include <httplib.h>
#include <json.hpp>

namespace euph {

using nlohmann::json;

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kConflict: return 409;
    case ErrorKind::kValidation: return 422;
    case ErrorKind::kUsage:
    case ErrorKind::kData: return 400;
    case ErrorKind::kBackend:
    case ErrorKind::kCache: return 502;
    case ErrorKind::kNumeric: return 500;
  }
  return 500;
}

namespace {

json summary_json(const PetSummary& s) {
  return {{"pet_id", s.pet_id}, {"term", s.term}, {"description", s.description},
          {"revision", s.revision}, {"example_count", s.example_count}};
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message,
                json extra = nullptr) {
  json err = {{"kind", kind}, {"message", message}};
  if (!extra.is_null()) err.update(extra);
  send_json(res, {{"error", err}}, status);
}

json parse_body(const httplib::Request& req) {
  try {
    auto body = json::parse(req.body);
    if (!body.is_object()) throw UsageError("request body must be a JSON object");
    return body;
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("malformed JSON body: ") + e.what());
  }
}

}  // namespace

struct CurationServer::Impl {
  CurationService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(CurationService& s) : service(s) { routes(); }

  template <typename F>
  auto guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ConflictError& e) {
        // The workbench shows the server copy next to the preserved draft.
        json current = nullptr;
        if (req.matches.size() > 1) {
          if (auto cur = service.lexicon().get(req.matches[1].str()))
            current = {{"description", cur->first.description}, {"revision", cur->second}};
        }
        send_error(res, 409, to_string(e.kind()), e.what(), {{"current", current}});
      } catch (const Error& e) {
        send_error(res, http_status(e.kind()), to_string(e.kind()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "usage", std::string("bad request: ") + e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    server.Get("/pets", guarded([this](const httplib::Request&, httplib::Response& res) {
      json pets = json::array();
      for (const auto& s : service.list_pets()) pets.push_back(summary_json(s));
      send_json(res, {{"pets", pets}});
    }));

    server.Get(R"(/pets/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, summary_json(service.get_pet(req.matches[1].str())));
    }));

    server.Put(R"(/pets/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      if (!body.contains("description") || !body["description"].is_string())
        throw ValidationError("body needs a string 'description'");
      if (!body.contains("expected_revision") || !body["expected_revision"].is_number_integer())
        throw UsageError("body needs an integer 'expected_revision'");
      auto rev = service.put_description(req.matches[1].str(), body["description"].get<std::string>(),
                                         body["expected_revision"].get<long>(), body.value("author", "curator"));
      send_json(res, {{"pet_id", rev.pet_id}, {"description", rev.description}, {"revision", rev.revision},
                      {"author", rev.author}, {"timestamp", rev.timestamp}});
    }));

    server.Post(R"(/pets/([^/]+)/imagery)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto p = service.preview_imagery(req.matches[1].str());
      send_json(res, {{"term_grid", p.term_url}, {"description_grid", p.description_url}, {"k", p.k}});
    }));

    server.Post(R"(/pets/([^/]+)/rescore)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      if (!body.contains("draft") || !body["draft"].is_string()) throw ValidationError("body needs a string 'draft'");
      std::optional<std::string> ckpt;
      if (auto it = body.find("checkpoint_id"); it != body.end() && it->is_string()) ckpt = it->get<std::string>();
      json diffs = json::array();
      for (const auto& d : service.rescore(req.matches[1].str(), body["draft"].get<std::string>(), ckpt)) {
        diffs.push_back({{"example_id", d.example_id}, {"p_hat_before", d.p_hat_before},
                         {"p_hat_after", d.p_hat_after}, {"y_hat_before", d.y_hat_before},
                         {"y_hat_after", d.y_hat_after}});
      }
      send_json(res, {{"diffs", diffs}});
    }));

    server.Get("/examples", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("pet")) throw UsageError("missing query parameter 'pet'");
      json out = json::array();
      for (const auto& ex : service.examples_for(req.get_param_value("pet"))) {
        json e = {{"id", ex.id}, {"sentence", ex.sentence}, {"term", ex.term_surface},
                  {"term_span", {ex.term_span.begin, ex.term_span.end}}};
        e["label"] = ex.label ? json(*ex.label) : json(nullptr);
        out.push_back(std::move(e));
      }
      send_json(res, {{"examples", out}});
    }));

    if (auto* imagery = service.imagery()) {
      const auto sheets = imagery->cache().root() / "sheets";
      std::filesystem::create_directories(sheets);
      server.set_mount_point(CurationService::kSheetRoute, sheets.string());
    }

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty())
        send_error(res, res.status, res.status == 404 ? "not_found" : "usage", "request failed with status " + std::to_string(res.status));
    });
  }
};

CurationServer::CurationServer(CurationService& service) : impl_(std::make_unique<Impl>(service)) {}

CurationServer::~CurationServer() { stop(); }

int CurationServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw BackendError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void CurationServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw BackendError("cannot listen on " + host + ":" + std::to_string(port));
}

void CurationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace euph
