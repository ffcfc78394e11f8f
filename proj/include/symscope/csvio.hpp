#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace symscope {

// Fixed-precision double formatting so artifact files are byte-identical
// across reruns. Normalizes -0 to 0.
std::string fmt_double(double value, int precision = 6);

std::string csv_escape(const std::string& field);

// Minimal RFC-4180-ish reader: quoted fields, embedded commas/quotes.
// Newlines inside quoted fields are not supported (no input format here
// needs them).
std::vector<std::string> split_csv_line(const std::string& line);

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);

    void write_row(const std::vector<std::string>& fields);
    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

// Whole-file helpers used by every artifact writer.
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

} // namespace symscope
