#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace histocell::cli {

/// Exit-code contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // validation or metric failure
inline constexpr int kExitIoOrConfig = 2;

/// Runs one invocation, e.g. {"loo", "--config", "exp.json"}. Normal output
/// goes to `out`, diagnostics to `err`. `cancel` is polled between folds.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::atomic<bool>* cancel = nullptr);

/// Default configuration: experiment keys plus a "synth" section.
nlohmann::json default_config();

/// Applies one dotted `key=value` override. The key must already exist and
/// the value is converted to the existing value's type.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Relative path -> SHA-256 for every regular file under `dir`, skipping run.json.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir);

}  // namespace histocell::cli
