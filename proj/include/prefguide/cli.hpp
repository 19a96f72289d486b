// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefguide/classifier.hpp"
#include "prefguide/decoder.hpp"

namespace prefguide {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Subcommands: synth, train, generate, sweep, eval, correlate, serve.
// Returns kExitOk, kExitUsage for bad arguments, kExitRuntime otherwise.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

// Parses one SYMBOL:ALPHA token; throws ParameterError naming the token.
PreferenceEntry parse_pref(const std::string& token);

nlohmann::ordered_json to_json(const TrainReport& report, const PreferenceRegistry& registry);

}  // namespace prefguide
