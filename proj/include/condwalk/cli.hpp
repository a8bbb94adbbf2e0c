#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace condwalk::cli {

std::string_view version();

/// Exit codes of the command-line tool.
enum ExitCode : int { kPass = 0, kAssertionFailed = 1, kUsage = 2, kResource = 3 };

/// Fully resolved run configuration. The worker count is deliberately not part
/// of it: outputs must not depend on it.
struct RunConfig {
    /// Canonical literal of the increment law.
    std::string distribution = "span:1 atoms:-1:0.5,+1:0.5";
    std::vector<std::string> x_grid = {"0", "1", "2", "5", "10", "t0.5", "t1", "t2"};
    std::vector<long> n_grid = {64, 256, 1024, 4096};
    std::vector<double> u_grid;  // filled with 81 points on [0, 4]
    std::int64_t trials = 100000;
    std::uint64_t seed = 1;
    std::string method = "exact";
    std::string remainder_variant = "general";
    double remainder_delta = 1.0;
    /// text | csv | json.
    std::string format = "text";
    std::string output;
    long horizon = 1000000;
    double level = 0.99;
    std::int64_t max_cells = 1LL << 26;

    RunConfig();

    nlohmann::json to_json() const;
    /// Missing keys take their defaults; unknown keys and invalid values throw ConfigError.
    static RunConfig from_json(const nlohmann::json& j);
    /// Compact JSON text with sorted keys.
    std::string canonical() const;
    /// FNV-1a hash of canonical().
    std::string hash() const;
    /// Checks every field; throws ConfigError or ValidationError.
    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

/// Parses "a,b,c" into doubles, or "lo:hi:count" into count evenly spaced points.
std::vector<double> parse_real_list(std::string_view text);
std::vector<long> parse_int_list(std::string_view text);
std::vector<std::string> split_list(std::string_view text);

/// Runs the tool on argv[1..] and returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace condwalk::cli
