// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefguide/config.hpp"
#include "prefguide/engine.hpp"

namespace httplib {
class Server;
}

namespace prefguide {

inline constexpr std::size_t kTraceTopN = 10;

struct HttpResponse {
  int status = 200;
  std::string body;
};

// JSON API over one loaded Engine:
//   GET  /v1/health      {status, format_version}
//   GET  /v1/dimensions  {dims: [{symbol, name, pair_id, polarity}]}
//   POST /v1/generate    {prompt, preferences, strategy, temperature, top_k,
//                         max_tokens, seed, trace}
//   POST /v1/sweep       generate fields plus optional grid and subsets
// Unknown dimension -> 422 {error, dim}; malformed body -> 400 {error};
// anything else -> 500 {error, id}.
class Service {
 public:
  // Omitted decode fields fall back to defaults.decode; sweep_subsets are the
  // prompt lists used when a sweep request brings none.
  Service(std::shared_ptr<const Engine> engine, RunConfig defaults,
          std::array<std::vector<std::string>, 2> sweep_subsets);

  HttpResponse health() const;
  HttpResponse dimensions() const;
  HttpResponse generate(const std::string& body) const;
  HttpResponse sweep(const std::string& body) const;

  void install(httplib::Server& server) const;

 private:
  template <typename F>
  HttpResponse guarded(F&& f) const;

  std::shared_ptr<const Engine> engine_;
  RunConfig defaults_;
  std::array<std::vector<std::string>, 2> sweep_subsets_;
  mutable std::atomic<std::uint64_t> failures_{0};
};

// GenerationResult as the /v1/generate response document.
nlohmann::ordered_json generation_json(const GenerationResult& result, const Vocab& vocab);

// Blocks serving on host:port until the process is stopped.
void serve(const Service& service, const std::string& host, int port);

}  // namespace prefguide
