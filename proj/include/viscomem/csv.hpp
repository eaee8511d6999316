#pragma once

/// @file csv.hpp
/// @brief RFC-4180 CSV writing (CRLF records, quoted fields when needed) and reading.

#include <iosfwd>
#include <string>
#include <vector>

namespace viscomem {

/// Shortest decimal text that round-trips the double.
std::string format_number(double x);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(&os) {}
    void row(const std::vector<std::string>& fields);
    void row_numbers(const std::vector<double>& values);
    /// Field quoted when it contains a comma, quote, CR or LF.
    static std::string escape(const std::string& field);

private:
    std::ostream* os_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Parses quoted fields and CRLF or LF record ends; every record must have the
/// header's field count.
CsvTable read_csv(std::istream& is);

}  // namespace viscomem
