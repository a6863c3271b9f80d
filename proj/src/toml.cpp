#include "mixlab/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mixlab::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw std::runtime_error("toml: line " + std::to_string(line) + ": " + what);
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Removes a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

Value parse_scalar(const std::string& tok, int line) {
  Value v;
  if (tok.empty()) fail(line, "empty value");
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"') fail(line, "unterminated string");
    v.kind = Value::Kind::Str;
    v.str = tok.substr(1, tok.size() - 2);
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.kind = Value::Kind::Bool;
    v.boolean = (tok == "true");
    return v;
  }
  try {
    std::size_t used = 0;
    v.num = std::stod(tok, &used);
    if (used != tok.size()) fail(line, "trailing characters in number '" + tok + "'");
    v.kind = Value::Kind::Num;
    return v;
  } catch (const std::invalid_argument&) {
    fail(line, "unrecognized value '" + tok + "'");
  }
}

Value parse_value(const std::string& raw, int line) {
  std::string s = strip(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') fail(line, "unterminated array");
    Value v;
    v.kind = Value::Kind::Arr;
    std::string body = s.substr(1, s.size() - 2);
    std::string tok;
    bool quoted = false;
    for (char c : body) {
      if (c == '"') quoted = !quoted;
      if (c == ',' && !quoted) {
        if (!strip(tok).empty()) v.arr.push_back(parse_scalar(strip(tok), line));
        tok.clear();
      } else {
        tok += c;
      }
    }
    if (!strip(tok).empty()) v.arr.push_back(parse_scalar(strip(tok), line));
    return v;
  }
  return parse_scalar(s, line);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  return true;
}

} // namespace

double Table::num(const std::string& key, double fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second.kind != Value::Kind::Num)
    throw std::runtime_error("toml: key '" + key + "' is not a number");
  return it->second.num;
}

double Table::num_required(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("toml: missing required key '" + key + "'");
  if (it->second.kind != Value::Kind::Num)
    throw std::runtime_error("toml: key '" + key + "' is not a number");
  return it->second.num;
}

std::string Table::str(const std::string& key, const std::string& fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second.kind != Value::Kind::Str)
    throw std::runtime_error("toml: key '" + key + "' is not a string");
  return it->second.str;
}

bool Table::boolean(const std::string& key, bool fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second.kind != Value::Kind::Bool)
    throw std::runtime_error("toml: key '" + key + "' is not a boolean");
  return it->second.boolean;
}

std::vector<double> Table::nums(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end()) return {};
  std::vector<double> out;
  if (it->second.kind == Value::Kind::Num) {
    out.push_back(it->second.num);
    return out;
  }
  if (it->second.kind != Value::Kind::Arr)
    throw std::runtime_error("toml: key '" + key + "' is not an array");
  for (const Value& v : it->second.arr) {
    if (v.kind != Value::Kind::Num)
      throw std::runtime_error("toml: array '" + key + "' has a non-numeric entry");
    out.push_back(v.num);
  }
  return out;
}

const Table& Document::table(const std::string& name) const {
  auto it = tables.find(name);
  if (it == tables.end()) throw std::runtime_error("toml: missing table [" + name + "]");
  return it->second;
}

Document parse_string(const std::string& text) {
  Document doc;
  Table* current = &doc.root;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = strip(strip_comment(raw));
    if (s.empty()) continue;
    if (s.size() >= 4 && s.substr(0, 2) == "[[") {
      if (s.substr(s.size() - 2) != "]]") fail(line, "malformed table array header");
      std::string name = strip(s.substr(2, s.size() - 4));
      if (!valid_key(name)) fail(line, "bad table array name");
      doc.table_arrays[name].emplace_back();
      current = &doc.table_arrays[name].back();
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed table header");
      std::string name = strip(s.substr(1, s.size() - 2));
      if (!valid_key(name)) fail(line, "bad table name");
      current = &doc.tables[name];
      continue;
    }
    std::size_t eq = std::string::npos;
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '=' && !quoted) { eq = i; break; }
    }
    if (eq == std::string::npos) fail(line, "expected key = value");
    std::string key = strip(s.substr(0, eq));
    if (!valid_key(key)) fail(line, "bad key '" + key + "'");
    if (current->kv.count(key)) fail(line, "duplicate key '" + key + "'");
    current->kv[key] = parse_value(s.substr(eq + 1), line);
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("toml: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

} // namespace mixlab::toml
