// SPDX-License-Identifier: Apache-2.0
#include "prefguide/service.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <numeric>

#include <httplib.h>

#include "prefguide/error.hpp"

namespace prefguide {

namespace {

using nlohmann::ordered_json;

class BadRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

HttpResponse json_response(int status, const ordered_json& doc) {
  return {status, doc.dump()};
}

ordered_json parse_body(const std::string& body) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw BadRequest("request body is not valid JSON");
  }
  if (!doc.is_object()) {
    throw BadRequest("request body must be a JSON object");
  }
  return doc;
}

template <typename T>
T field(const ordered_json& doc, const char* name, T fallback) {
  if (!doc.contains(name) || doc[name].is_null()) {
    return fallback;
  }
  try {
    return doc[name].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw BadRequest(std::string("field '") + name + "' has the wrong type");
  }
}

std::size_t size_field(const ordered_json& doc, const char* name, std::size_t fallback) {
  if (!doc.contains(name) || doc[name].is_null()) {
    return fallback;
  }
  if (!doc[name].is_number_unsigned()) {
    throw BadRequest(std::string("field '") + name + "' must be a non-negative integer");
  }
  return doc[name].get<std::size_t>();
}

PreferenceRequest parse_preferences(const ordered_json& doc) {
  PreferenceRequest req;
  if (!doc.contains("preferences") || doc["preferences"].is_null()) {
    return req;
  }
  const auto& prefs = doc["preferences"];
  if (!prefs.is_array()) {
    throw BadRequest("'preferences' must be an array");
  }
  for (const auto& p : prefs) {
    if (!p.is_object() || !p.contains("dim") || !p["dim"].is_string()) {
      throw BadRequest("each preference needs a string 'dim'");
    }
    if (!p.contains("alpha") || !p["alpha"].is_number()) {
      throw BadRequest("each preference needs a numeric 'alpha'");
    }
    req.entries.push_back({p["dim"].get<std::string>(), p["alpha"].get<double>()});
  }
  return req;
}

DecodeConfig parse_decode(const ordered_json& doc, DecodeConfig cfg) {
  if (doc.contains("strategy") && !doc["strategy"].is_null()) {
    if (!doc["strategy"].is_string()) {
      throw BadRequest("'strategy' must be a string");
    }
    cfg.strategy = parse_strategy(doc["strategy"].get<std::string>());
  }
  cfg.temperature = field<double>(doc, "temperature", cfg.temperature);
  cfg.top_k = size_field(doc, "top_k", cfg.top_k);
  cfg.max_tokens = size_field(doc, "max_tokens", cfg.max_tokens);
  cfg.seed = size_field(doc, "seed", cfg.seed);
  cfg.trace = field<bool>(doc, "trace", false);
  return cfg;
}

std::string required_prompt(const ordered_json& doc) {
  if (!doc.contains("prompt") || !doc["prompt"].is_string()) {
    throw BadRequest("'prompt' must be a string");
  }
  return doc["prompt"].get<std::string>();
}

ordered_json trace_json(const GenerationResult& result, const Vocab& vocab) {
  ordered_json steps = ordered_json::array();
  for (std::size_t pos = 0; pos < result.steps.size(); ++pos) {
    const auto& step = result.steps[pos];
    const auto& combined = step.combined_dist;
    std::vector<TokenId> ids(combined.size());
    std::iota(ids.begin(), ids.end(), 0);
    const std::size_t n = std::min(kTraceTopN, ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                      [&](TokenId a, TokenId b) {
                        return combined[a] > combined[b] || (combined[a] == combined[b] && a < b);
                      });
    ordered_json top = ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
      const TokenId v = ids[i];
      ordered_json class_p = ordered_json::object();
      for (std::size_t k = 0; k < step.class_dims.size(); ++k) {
        class_p[step.class_dims[k]] = step.class_columns[k][v];
      }
      top.push_back({{"token", vocab.token(v)},
                     {"base_p", step.base_dist[v]},
                     {"combined_p", combined[v]},
                     {"class_p", std::move(class_p)}});
    }
    steps.push_back({{"position", pos}, {"chosen", vocab.token(step.chosen)}, {"top", std::move(top)}});
  }
  return steps;
}

std::vector<AlphaTuple> parse_grid(const ordered_json& doc, const RunConfig& defaults,
                                   std::size_t num_dims) {
  if (!doc.contains("grid") || doc["grid"].is_null()) {
    return sweep_grid_for(defaults, num_dims);
  }
  const auto& g = doc["grid"];
  if (!g.is_array() || g.empty()) {
    throw BadRequest("'grid' must be a non-empty array");
  }
  if (std::all_of(g.begin(), g.end(), [](const auto& x) { return x.is_number(); })) {
    return product_grid(g.get<std::vector<double>>(), num_dims);
  }
  std::vector<AlphaTuple> tuples;
  for (const auto& t : g) {
    if (!t.is_array() || t.size() != num_dims ||
        !std::all_of(t.begin(), t.end(), [](const auto& x) { return x.is_number(); })) {
      throw BadRequest("each grid tuple must hold one number per preference");
    }
    tuples.push_back(t.get<AlphaTuple>());
  }
  return tuples;
}

}  // namespace

ordered_json generation_json(const GenerationResult& result, const Vocab& vocab) {
  ordered_json tokens = ordered_json::array();
  for (const TokenId id : result.tokens) {
    tokens.push_back(vocab.token(id));
  }
  ordered_json doc = {{"text", result.text},
                      {"tokens", std::move(tokens)},
                      {"stop_reason", std::string(stop_reason_name(result.stop_reason))}};
  if (result.traced) {
    doc["trace"] = trace_json(result, vocab);
  }
  return doc;
}

Service::Service(std::shared_ptr<const Engine> engine, RunConfig defaults,
                 std::array<std::vector<std::string>, 2> sweep_subsets)
    : engine_(std::move(engine)),
      defaults_(std::move(defaults)),
      sweep_subsets_(std::move(sweep_subsets)) {}

template <typename F>
HttpResponse Service::guarded(F&& f) const {
  try {
    return f();
  } catch (const UnknownDimensionError& e) {
    return json_response(422, {{"error", e.what()}, {"dim", e.dim()}});
  } catch (const BadRequest& e) {
    return json_response(400, {{"error", e.what()}});
  } catch (const ParameterError& e) {
    return json_response(400, {{"error", e.what()}});
  } catch (const std::exception& e) {
    char id[32];
    std::snprintf(id, sizeof id, "E%08llx",
                  static_cast<unsigned long long>(failures_.fetch_add(1) + 1));
    std::cerr << "internal error " << id << ": " << e.what() << "\n";
    return json_response(500, {{"error", "internal error"}, {"id", id}});
  }
}

HttpResponse Service::health() const {
  return json_response(200, {{"status", "ok"}, {"format_version", kCheckpointFormatVersion}});
}

HttpResponse Service::dimensions() const {
  ordered_json dims = ordered_json::array();
  for (const auto& d : engine_->registry().dims()) {
    dims.push_back({{"symbol", d.symbol},
                    {"name", d.name},
                    {"pair_id", d.pair_id},
                    {"polarity", std::string(1, polarity_char(d.polarity))}});
  }
  return json_response(200, {{"dims", std::move(dims)}});
}

HttpResponse Service::generate(const std::string& body) const {
  return guarded([&] {
    const auto doc = parse_body(body);
    const auto prompt = required_prompt(doc);
    const auto req = parse_preferences(doc);
    const auto cfg = parse_decode(doc, defaults_.decode);
    const auto result = engine_->generate(prompt, req, cfg);
    return json_response(200, generation_json(result, engine_->vocab()));
  });
}

HttpResponse Service::sweep(const std::string& body) const {
  return guarded([&] {
    const auto doc = parse_body(body);
    const auto req = parse_preferences(doc);
    if (req.entries.empty()) {
      throw BadRequest("sweep needs at least one preference");
    }
    std::vector<std::string> dims;
    for (const auto& e : req.entries) {
      dims.push_back(e.dim);
    }
    const auto cfg = parse_decode(doc, defaults_.decode);
    const auto grid = parse_grid(doc, defaults_, dims.size());
    auto subsets = sweep_subsets_;
    if (doc.contains("subsets") && !doc["subsets"].is_null()) {
      const auto& s = doc["subsets"];
      if (!s.is_array() || s.size() != 2) {
        throw BadRequest("'subsets' must hold two prompt lists");
      }
      try {
        subsets = {s[0].get<std::vector<std::string>>(), s[1].get<std::vector<std::string>>()};
      } catch (const nlohmann::json::exception&) {
        throw BadRequest("'subsets' must hold two prompt lists");
      }
    }
    const double tau = field<double>(doc, "tau", defaults_.judge_tau);
    const auto report = engine_->sweep(grid, dims, subsets, cfg, tau);
    return json_response(200, to_json(report));
  });
}

void Service::install(httplib::Server& server) const {
  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json; charset=utf-8");
  };
  server.Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, health());
  });
  server.Get("/v1/dimensions", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, dimensions());
  });
  server.Post("/v1/generate", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, generate(req.body));
  });
  server.Post("/v1/sweep", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, sweep(req.body));
  });
}

void serve(const Service& service, const std::string& host, int port) {
  httplib::Server server;
  service.install(server);
  if (!server.listen(host, port)) {
    throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace prefguide
