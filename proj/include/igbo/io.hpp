#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "igbo/pathoracle.hpp"
#include "igbo/seqmodel.hpp"

namespace igbo {

// Whole-file helpers. Missing or unreadable files raise ContractViolation
// naming the path.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// {version, role: "model", h, d, T_free: true, activation, params}
// where params maps each block name to {shape, data}.
std::string model_to_json(const SeqModelParams& params);
SeqModelParams model_from_json(const std::string& text);

// Same layout with role "oracle", the fixed T, and the default anchor count.
std::string oracle_to_json(const OracleParams& oracle, std::size_t K);
struct OracleCheckpoint {
  OracleParams oracle;
  std::size_t K = 3;
};
OracleCheckpoint oracle_from_json(const std::string& text);

// Dataset CSV: series_id,t,x_0..x_{d-1},y with rows grouped by series and
// ordered by t.
void write_dataset(std::ostream& out, const std::vector<Sample>& samples);
std::vector<Sample> read_dataset(std::istream& in);
std::vector<Sample> load_dataset(const std::filesystem::path& path);

std::vector<TimeSeries> series_of(const std::vector<Sample>& samples);

// Minimal TOML: [section] headers, key = value with numbers, booleans,
// "strings" and flat arrays of those; # comments. Keys are "section.key".
class Config {
 public:
  using Scalar = std::variant<double, bool, std::string>;
  using Value = std::variant<double, bool, std::string, std::vector<Scalar>>;

  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  double number(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key,
                              const std::vector<double>& fallback) const;

  void set(const std::string& key, Value value) { values_[key] = std::move(value); }
  const std::map<std::string, Value>& values() const { return values_; }

 private:
  const Value* find(const std::string& key) const;
  std::map<std::string, Value> values_;
};

}  // namespace igbo
