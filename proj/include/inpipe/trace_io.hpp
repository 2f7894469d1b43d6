#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "inpipe/simulation.hpp"

namespace inpipe {

/// Pinned column order of the trace CSV. Changing it is a format break.
inline constexpr std::string_view kTraceHeader =
    "t,x,x_dot,phi,phi_dot,psi,psi_dot,mode,junction_index,sonar,pf_mean,pf_var,n_particles,"
    "f1,f2,f3,w1,w2,w3";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

void write_trace(const std::vector<TraceRecord>& trace, std::ostream& out);
void write_trace(const std::vector<TraceRecord>& trace, const std::filesystem::path& path);

/// Inverse of write_trace. Wheel angles are not stored and come back zero.
/// Throws SchemaError on a bad header or row.
std::vector<TraceRecord> read_trace(std::istream& in);
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

/// Writes attitude.svg, velocity.svg, mode.svg, pf.svg and forces.svg into
/// `dir` (created if missing) and returns their paths. Throws IoError.
std::vector<std::filesystem::path> emit_plots(const std::vector<TraceRecord>& trace,
                                              const std::filesystem::path& dir);

}  // namespace inpipe
