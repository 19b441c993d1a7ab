#include "demix/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace demix {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

double to_number(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw std::out_of_range("no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return to_number(rows.at(row).at(column(name)));
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

void write_csv(const std::string& path, const std::string& hash,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# config_hash=" << hash << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# config_hash=";
      if (line.rfind(key, 0) == 0) t.config_hash = line.substr(key.size());
      continue;
    }
    auto cells = split_commas(line);
    for (auto& c : cells) c = strip(c);
    if (!have_header) {
      t.columns = std::move(cells);
      have_header = true;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw std::runtime_error("empty csv: " + path);
  return t;
}

void write_profile_csv(const std::string& path, const std::string& hash, const MixtureState& s) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(s.c1.size());
  for (std::size_t k = 0; k < s.c1.size(); ++k)
    rows.push_back({format_double(s.c1.grid().center(k)), format_double(s.c1[k]),
                    format_double(s.c2[k])});
  write_csv(path, hash, {"x", "c1", "c2"}, rows);
}

std::vector<double> read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    line = strip(line);
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  }
  if (lines.empty()) throw std::runtime_error("no data in " + path);
  std::size_t col = 0;
  std::size_t first = 0;
  auto head = split_commas(lines[0]);
  bool numeric_head = true;
  try {
    for (auto& c : head) to_number(strip(c));
  } catch (const std::exception&) {
    numeric_head = false;
  }
  if (!numeric_head) {
    first = 1;
    bool found = false;
    for (std::size_t i = 0; i < head.size(); ++i)
      if (strip(head[i]) == "c1") {
        col = i;
        found = true;
      }
    if (!found && head.size() != 1)
      throw std::runtime_error("profile csv needs a c1 column: " + path);
  } else if (head.size() != 1) {
    throw std::runtime_error("headerless profile csv must have one column: " + path);
  }
  std::vector<double> v;
  for (std::size_t i = first; i < lines.size(); ++i) {
    auto cells = split_commas(lines[i]);
    if (col >= cells.size()) throw std::runtime_error("short row in " + path);
    v.push_back(to_number(strip(cells[col])));
  }
  return v;
}

void write_json(const std::string& path, const std::string& hash, nlohmann::json doc) {
  doc["config_hash"] = hash;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace demix
