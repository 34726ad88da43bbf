#include "homing/keyvalue.hpp"

#include <fstream>
#include <sstream>

#include "homing/error.hpp"

namespace homing {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

KeyValueDocument KeyValueDocument::parse(const std::string& text, const std::string& source) {
  KeyValueDocument doc;
  doc.source_ = source;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    }
    KeyValueEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": empty key");
    }
    doc.entries_.push_back(std::move(e));
  }
  return doc;
}

KeyValueDocument KeyValueDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const KeyValueEntry* KeyValueDocument::find(const std::string& key) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->key == key) return &*it;
  }
  return nullptr;
}

std::optional<std::string> KeyValueDocument::get(const std::string& key) const {
  if (const auto* e = find(key)) return e->value;
  return std::nullopt;
}

std::vector<const KeyValueEntry*> KeyValueDocument::all(const std::string& key) const {
  std::vector<const KeyValueEntry*> out;
  for (const auto& e : entries_) {
    if (e.key == key) out.push_back(&e);
  }
  return out;
}

void KeyValueDocument::set(const std::string& key, const std::string& value) {
  bool replaced = false;
  std::vector<KeyValueEntry> kept;
  for (auto& e : entries_) {
    if (e.key != key) {
      kept.push_back(e);
    } else if (!replaced) {
      kept.push_back({key, value, e.line});
      replaced = true;
    }
  }
  if (!replaced) kept.push_back({key, value, 0});
  entries_ = std::move(kept);
}

std::string KeyValueDocument::to_string() const {
  std::string out;
  for (const auto& e : entries_) out += e.key + " = " + e.value + "\n";
  return out;
}

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw FormatError("not a number: '" + tok + "'");
    }
    if (used != tok.size()) throw FormatError("not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace homing
