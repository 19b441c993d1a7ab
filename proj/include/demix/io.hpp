#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "demix/energy.hpp"

namespace demix {

/// Round-trip text for a double ("%.17g"); non-finite values print as nan/inf.
std::string format_double(double x);

struct CsvTable {
  std::string config_hash;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Column index, or throws std::out_of_range.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Writes "# config_hash=<hash>", the header line, then the rows.
void write_csv(const std::string& path, const std::string& hash,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows);

CsvTable read_csv(const std::string& path);

/// Columns x, c1, c2.
void write_profile_csv(const std::string& path, const std::string& hash, const MixtureState& s);

/// Reads the c1 column (or the only column) of a profile file. '#' lines are skipped.
std::vector<double> read_profile_csv(const std::string& path);

/// JSON documents carry the hash as a top-level "config_hash" member.
void write_json(const std::string& path, const std::string& hash, nlohmann::json doc);

void ensure_directory(const std::string& path);

}  // namespace demix
