#pragma once
// Internal: raw TATF1 primitives (header line + f64le payload) shared by the
// typed readers/writers in io.cpp and by the cache files of other modules.
// Library sources only; requires the vendored nlohmann/json.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace tatk::tatf_detail {

// Writes header (magic/dtype filled in) + payload; rejects non-finite samples.
void write_tatf(const std::string& path, const nlohmann::json& header,
                const double* data, std::size_t count);

// Reads and validates the header line.
nlohmann::json read_header(std::ifstream& in, const std::string& path);

// Reads exactly `count` doubles and requires EOF right after.
std::vector<double> read_payload(std::ifstream& in, const std::string& path,
                                 std::size_t count);

}  // namespace tatk::tatf_detail
