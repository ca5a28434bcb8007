#pragma once

#include <string>
#include <vector>

#include "nvsim/trace.hpp"

namespace nvsim {

/// Parse a two-column time,value CSV (header row required) into a trace, so
/// recorded lab data can flow through the same analysis pipeline.
TimeTrace read_trace_csv(const std::string& path);

/// Write rows under a header, RFC-style quoting for text cells, doubles with
/// full round-trip precision. Written atomically (temp file then rename).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string format_double(double v);

}  // namespace nvsim
