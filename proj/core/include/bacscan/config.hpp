#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bacscan/detector.hpp"
#include "bacscan/dispatcher.hpp"
#include "bacscan/har.hpp"
#include "bacscan/iam.hpp"

namespace bacscan {

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8765;
  bool allow_remote = false;
  std::string ui_dir;  // static assets served at /, optional
};

struct Config {
  std::filesystem::path store = "bacscan.db";
  ScopePolicy scope;
  DispatchConfig dispatch;
  DetectorConfig detector;
  std::vector<IamDescriptor> iams = IamRegistry::builtin().default_descriptors();
  std::size_t budget_per_request = 0;
  bool dedupe = true;
  ServiceConfig service;
};

// Parses the JSON config format. Unknown keys and type mismatches raise
// ConfigError whose location is a JSON pointer into the document.
Config parse_config(std::string_view document);
Config load_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

// BACSCAN_STORE replaces the store path, BACSCAN_BIND the service bind address.
void apply_env_overrides(Config& config, const EnvLookup& env);
std::optional<std::string> process_env(const char* name);

nlohmann::json to_json(const Config& config);

}  // namespace bacscan
