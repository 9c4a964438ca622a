#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vesselnet {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, truncated payload, bad CSV row).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or unknown configuration keys and values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string read_file(const std::string& path);

// Creates parent directories, writes `<path>.tmp`, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

// Shortest round-trip decimal form; stable across runs.
std::string format_number(double x);

/// Human-readable `key = value` file. '#' starts a comment; blank lines are
/// ignored; keys are unique. The first line of a versioned file is
/// `format = <name> <version>`.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws ConfigError naming the first key not in `allowed` (exact names
  // or prefixes ending in '.').
  void reject_unknown(const std::set<std::string>& allowed) const;

  // Keys in insertion order.
  const std::vector<std::string>& keys() const { return order_; }
  std::string to_string() const;

 private:
  std::string origin_ = "<string>";
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

// Minimal CSV: comma separated, no quoting (all fields are numbers or
// identifiers without commas). First row is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  std::string to_string() const;
  static CsvTable parse(const std::string& text, const std::string& origin = "<string>");
};

}  // namespace vesselnet
