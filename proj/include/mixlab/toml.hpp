// Minimal TOML subset reader, enough for run configs and custom model
// files: [section], [[array of tables]], bare keys, strings, numbers,
// booleans, flat arrays, and # comments.  Unsupported syntax is rejected
// with a line-numbered error rather than silently misread.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mixlab::toml {

struct Value {
  enum class Kind { Str, Num, Bool, Arr };
  Kind kind = Kind::Num;
  std::string str;
  double num = 0.0;
  bool boolean = false;
  std::vector<Value> arr;
};

struct Table {
  std::map<std::string, Value> kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  double num(const std::string& key, double fallback) const;
  double num_required(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<double> nums(const std::string& key) const;
};

struct Document {
  Table root;
  std::map<std::string, Table> tables;
  std::map<std::string, std::vector<Table>> table_arrays;

  const Table& table(const std::string& name) const;
  bool has_table(const std::string& name) const { return tables.count(name) > 0; }
};

Document parse_string(const std::string& text);
Document parse_file(const std::string& path);

} // namespace mixlab::toml
