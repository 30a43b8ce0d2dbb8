#include "igbo/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "igbo/errors.hpp"
#include "igbo/format.hpp"
#include "json.hpp"

namespace igbo {

using nlohmann::json;
using nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractViolation("cannot write " + path.string());
  out << text;
  if (!out) throw ContractViolation("failed writing " + path.string());
}

namespace {

ordered_json blocks_json(const std::vector<std::string>& names,
                         const std::vector<const Array*>& blocks) {
  ordered_json params;
  for (std::size_t i = 0; i < names.size(); ++i) {
    ordered_json b;
    b["shape"] = blocks[i]->shape().to_vector();
    b["data"] = blocks[i]->vec();
    params[names[i]] = b;
  }
  return params;
}

void read_blocks(const json& params, const std::vector<std::string>& names,
                 const std::vector<Array*>& blocks) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const json& b = params.at(names[i]);
    const auto shape = b.at("shape").get<std::vector<std::size_t>>();
    auto data = b.at("data").get<std::vector<double>>();
    require(shape.size() == 2, "parameter " + names[i] + " must be rank 2");
    const Shape s(shape);
    require(s.size() == data.size(),
            "parameter " + names[i] + " data length does not match its shape");
    *blocks[i] = Array(s, std::move(data));
  }
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("malformed ") + what + " JSON: " + e.what());
  }
}

}  // namespace

std::string model_to_json(const SeqModelParams& params) {
  ordered_json j;
  j["version"] = 1;
  j["role"] = "model";
  j["h"] = params.hidden();
  j["d"] = params.features();
  j["T_free"] = true;
  j["activation"] = params.activation == Activation::kTanh ? "tanh" : "identity";
  j["params"] = blocks_json(SeqModelParams::names(), params.blocks());
  return j.dump(2);
}

SeqModelParams model_from_json(const std::string& text) {
  return guarded("model checkpoint", [&] {
    const json j = json::parse(text);
    require(j.value("role", std::string("model")) == "model",
            "checkpoint role is not \"model\"");
    SeqModelParams p;
    read_blocks(j.at("params"), SeqModelParams::names(), p.blocks());
    const std::string act = j.value("activation", std::string("tanh"));
    require(act == "tanh" || act == "identity", "unknown activation " + act);
    p.activation = act == "tanh" ? Activation::kTanh : Activation::kIdentity;
    p.validate();
    require(j.at("h").get<std::size_t>() == p.hidden() &&
                j.at("d").get<std::size_t>() == p.features(),
            "checkpoint h/d disagree with the parameter shapes");
    return p;
  });
}

std::string oracle_to_json(const OracleParams& oracle, std::size_t K) {
  ordered_json j;
  j["version"] = 1;
  j["role"] = "oracle";
  j["h"] = oracle.width();
  j["d"] = oracle.d;
  j["T"] = oracle.T;
  j["K"] = K;
  j["params"] = blocks_json(OracleParams::names(), oracle.blocks());
  return j.dump(2);
}

OracleCheckpoint oracle_from_json(const std::string& text) {
  return guarded("oracle checkpoint", [&] {
    const json j = json::parse(text);
    require(j.value("role", std::string()) == "oracle",
            "checkpoint role is not \"oracle\"");
    OracleCheckpoint c;
    c.oracle.T = j.at("T").get<std::size_t>();
    c.oracle.d = j.at("d").get<std::size_t>();
    c.K = j.value("K", std::size_t{3});
    read_blocks(j.at("params"), OracleParams::names(), c.oracle.blocks());
    c.oracle.validate();
    require(c.K >= 1, "oracle checkpoint needs K >= 1");
    return c;
  });
}

void write_dataset(std::ostream& out, const std::vector<Sample>& samples) {
  require(!samples.empty(), "cannot write an empty dataset");
  const std::size_t d = samples.front().x.features();
  out << "series_id,t";
  for (std::size_t k = 0; k < d; ++k) out << ",x_" << k;
  out << ",y\n";
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const Sample& smp = samples[s];
    require(smp.x.features() == d, "dataset series disagree on feature count");
    require(smp.target.size() == smp.x.length(), "target length must equal series length");
    for (std::size_t t = 0; t < smp.x.length(); ++t) {
      out << s << ',' << t;
      for (std::size_t k = 0; k < d; ++k) out << ',' << fmt17(smp.x.values()(t, k));
      out << ',' << fmt17(smp.target[t]) << '\n';
    }
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  require(ec == std::errc() && ptr == end && std::isfinite(v),
          "dataset line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<Sample> read_dataset(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "dataset is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv(line);
  require(header.size() >= 4 && header[0] == "series_id" && header[1] == "t" &&
              header.back() == "y",
          "dataset header must be series_id,t,x_0..x_{d-1},y");
  const std::size_t d = header.size() - 3;
  for (std::size_t k = 0; k < d; ++k) {
    require(header[2 + k] == "x_" + std::to_string(k),
            "dataset column " + std::to_string(2 + k) + " should be x_" + std::to_string(k));
  }

  std::vector<Sample> samples;
  std::vector<double> xs, ys;
  long current = -1;
  auto flush = [&] {
    if (current < 0) return;
    const std::size_t T = ys.size();
    samples.push_back({TimeSeries(Array(Shape{T, d}, std::move(xs))), std::move(ys)});
    xs.clear();
    ys.clear();
  };
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    require(cells.size() == d + 3, "dataset line " + std::to_string(lineno) +
                                       ": expected " + std::to_string(d + 3) + " cells");
    const double id = parse_double(cells[0], lineno);
    const double t = parse_double(cells[1], lineno);
    if (static_cast<long>(id) != current) {
      flush();
      current = static_cast<long>(id);
      require(current == static_cast<long>(samples.size()),
              "dataset line " + std::to_string(lineno) + ": series ids must run 0, 1, ...");
    }
    require(static_cast<std::size_t>(t) == ys.size(),
            "dataset line " + std::to_string(lineno) + ": time index out of order");
    for (std::size_t k = 0; k < d; ++k) xs.push_back(parse_double(cells[2 + k], lineno));
    ys.push_back(parse_double(cells.back(), lineno));
  }
  flush();
  require(!samples.empty(), "dataset has no rows");
  return samples;
}

std::vector<Sample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot read " + path.string());
  return read_dataset(in);
}

std::vector<TimeSeries> series_of(const std::vector<Sample>& samples) {
  std::vector<TimeSeries> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.x);
  return out;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing # comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

Config::Scalar parse_scalar(const std::string& raw, std::size_t line) {
  const std::string s = trim(raw);
  const std::string where = "config line " + std::to_string(line) + ": ";
  require(!s.empty(), where + "missing value");
  if (s.front() == '"') {
    require(s.size() >= 2 && s.back() == '"', where + "unterminated string");
    return s.substr(1, s.size() - 2);
  }
  if (s == "true") return true;
  if (s == "false") return false;
  std::string digits;
  for (char c : s) {
    if (c != '_') digits.push_back(c);
  }
  double v = 0.0;
  const char* end = digits.data() + digits.size();
  const char* begin = digits.data() + (digits.front() == '+' ? 1 : 0);
  auto [ptr, ec] = std::from_chars(begin, end, v);
  require(ec == std::errc() && ptr == end, where + "cannot parse value '" + s + "'");
  return v;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      require(s.back() == ']' && s.size() > 2,
              "config line " + std::to_string(lineno) + ": bad section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const std::size_t eq = s.find('=');
    require(eq != std::string::npos,
            "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string raw = trim(s.substr(eq + 1));
    require(!key.empty(), "config line " + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!raw.empty() && raw.front() == '[') {
      require(raw.back() == ']',
              "config line " + std::to_string(lineno) + ": arrays must fit on one line");
      std::vector<Scalar> items;
      const std::string body = trim(raw.substr(1, raw.size() - 2));
      if (!body.empty()) {
        std::string cell;
        std::istringstream cells(body);
        while (std::getline(cells, cell, ',')) {
          if (trim(cell).empty()) continue;  // trailing comma
          items.push_back(parse_scalar(cell, lineno));
        }
      }
      cfg.values_[full] = std::move(items);
    } else {
      std::visit([&](auto&& v) { cfg.values_[full] = v; }, parse_scalar(raw, lineno));
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

const Config::Value* Config::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

double Config::number(const std::string& key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  const double* d = std::get_if<double>(v);
  require(d != nullptr, "config key " + key + " must be a number");
  return *d;
}

std::size_t Config::count(const std::string& key, std::size_t fallback) const {
  if (!has(key)) return fallback;
  const double v = number(key, 0.0);
  require(v >= 0.0 && v == std::floor(v) && v < 1e15,
          "config key " + key + " must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

bool Config::flag(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  const bool* b = std::get_if<bool>(v);
  require(b != nullptr, "config key " + key + " must be true or false");
  return *b;
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const std::string* s = std::get_if<std::string>(v)) return *s;
  if (const double* d = std::get_if<double>(v)) return fmt17(*d);
  throw ContractViolation("config key " + key + " must be a string");
}

std::vector<double> Config::numbers(const std::string& key,
                                    const std::vector<double>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const double* d = std::get_if<double>(v)) return {*d};
  const auto* items = std::get_if<std::vector<Scalar>>(v);
  require(items != nullptr, "config key " + key + " must be a number array");
  std::vector<double> out;
  for (const Scalar& s : *items) {
    const double* d = std::get_if<double>(&s);
    require(d != nullptr, "config key " + key + " must contain only numbers");
    out.push_back(*d);
  }
  return out;
}

}  // namespace igbo
