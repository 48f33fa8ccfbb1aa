#pragma once

// Dataset interchange as CSV with header `j,arm,time,response`.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ncc/datagen.hpp"
#include "ncc/error.hpp"

namespace ncc {

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, end);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t\"");
    const auto e = f.find_last_not_of(" \t\"");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return fields;
}

inline void write_dataset_csv(std::ostream& out, const std::vector<PatientRecord>& records) {
  out << "j,arm,time,response\n";
  for (const auto& r : records)
    out << r.j << ',' << r.arm << ',' << format_double(r.time) << ',' << format_double(r.response)
        << '\n';
}

namespace detail {

template <typename T>
T parse_number(const std::string& field, std::size_t line, std::string_view column) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last)
    throw DataError("line " + std::to_string(line) + ": column '" + std::string(column) +
                    "' is not numeric ('" + field + "')");
  return value;
}

}  // namespace detail

inline std::vector<PatientRecord> read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset is empty (missing header)");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const char* required : {"j", "arm", "time", "response"})
    if (!column.contains(required))
      throw DataError(std::string("missing column '") + required + "' (header must contain j,arm,time,response)");

  std::vector<PatientRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    PatientRecord r;
    r.j = detail::parse_number<std::int64_t>(fields[column["j"]], line_no, "j");
    r.arm = detail::parse_number<int>(fields[column["arm"]], line_no, "arm");
    r.time = detail::parse_number<double>(fields[column["time"]], line_no, "time");
    r.response = detail::parse_number<double>(fields[column["response"]], line_no, "response");
    records.push_back(r);
  }
  return records;
}

inline std::vector<PatientRecord> read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

}  // namespace ncc
