#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace homing {

/// One `key = value` line of a structured text file.
struct KeyValueEntry {
  std::string key;
  std::string value;
  int line = 0;
};

/// Ordered `key = value` document. '#' starts a comment; blank lines are ignored.
/// Repeated keys are kept in order (world files list one `tree` per line).
class KeyValueDocument {
 public:
  static KeyValueDocument parse(const std::string& text, const std::string& source = "<string>");
  static KeyValueDocument load(const std::filesystem::path& path);

  /// Last value for the key, if any.
  std::optional<std::string> get(const std::string& key) const;
  const KeyValueEntry* find(const std::string& key) const;
  std::vector<const KeyValueEntry*> all(const std::string& key) const;

  /// Replaces every occurrence of `key` (or appends it) with `value`.
  void set(const std::string& key, const std::string& value);

  const std::vector<KeyValueEntry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  std::string to_string() const;

 private:
  std::vector<KeyValueEntry> entries_;
  std::string source_;
};

std::vector<double> parse_numbers(const std::string& text);
std::string trim(const std::string& s);

}  // namespace homing
