#include <charconv>
#include <fstream>
#include <sstream>

#include "noisygrad/harness.hpp"

namespace noisygrad {

namespace {

constexpr const char* kHeader = "experiment_id,n,replication,error,regret,delta,seed";

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <class T>
T parse_number(const std::string& s, const char* column) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error(std::string("csv: bad value in column ") + column + ": '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::string out = kHeader;
  out += '\n';
  for (const auto& r : records) {
    out += quote_field(r.experiment_id);
    out += ',' + std::to_string(r.n) + ',' + std::to_string(r.replication) + ',' + format_double(r.error) +
           ',' + format_double(r.regret) + ',' + format_double(r.delta) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

std::vector<RunRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::runtime_error("csv: unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error("csv: expected 7 fields, got " + std::to_string(f.size()));
    RunRecord r;
    r.experiment_id = f[0];
    r.n = parse_number<long>(f[1], "n");
    r.replication = parse_number<long>(f[2], "replication");
    r.error = parse_number<double>(f[3], "error");
    r.regret = parse_number<double>(f[4], "regret");
    r.delta = parse_number<double>(f[5], "delta");
    r.seed = parse_number<std::uint64_t>(f[6], "seed");
    out.push_back(std::move(r));
  }
  return out;
}

void write_records(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << records_to_csv(records);
}

std::vector<RunRecord> read_records(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return records_from_csv(ss.str());
}

std::string summary_path_for(const std::string& csv_path) {
  const auto dot = csv_path.find_last_of('.');
  const auto slash = csv_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return csv_path + ".json";
  return csv_path.substr(0, dot) + ".json";
}

void write_outputs(const std::string& csv_path, const std::vector<RunRecord>& records,
                   const nlohmann::json& summary) {
  write_records(csv_path, records);
  std::ofstream f(summary_path_for(csv_path));
  if (!f) throw std::runtime_error("cannot write summary for " + csv_path);
  f << summary.dump(2) << '\n';
}

}  // namespace noisygrad
