#pragma once

#include <chi2/noise_model.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace chi2 {

/// Locale-independent shortest-exact rendering with 17 significant digits.
std::string format_double(double value);

/// Reads two or three columns (tau in s, g2, optional sigma) separated by
/// commas or whitespace. Lines starting with '#' and blank lines are skipped,
/// as is a first non-numeric header row.
CorrelationCurve read_curve(std::istream& in);
CorrelationCurve read_curve_file(const std::filesystem::path& path);

/// Writes "tau_s,g2[,sigma]" rows; `header` lines are emitted first, each
/// prefixed with "# ".
void write_curve(std::ostream& out, const CorrelationCurve& curve, std::string_view header = {});

}  // namespace chi2
