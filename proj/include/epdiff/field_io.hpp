#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "epdiff/field.hpp"

namespace epdiff {

/// Text snapshot: header `EPDIFF-FIELD v1 d=<d> N=<N> c=<c>`, then one line
/// per (component, band frequency): `<c> <k_0> [<k_1>] <re> <im>`, values
/// printed with 17 significant digits. Missing lines read as zero.
void write_field(std::ostream& out, const SpectralField& f);
SpectralField read_field(std::istream& in);

/// Atomic write (temporary file then rename).
void save_field(const std::filesystem::path& path, const SpectralField& f);
SpectralField load_field(const std::filesystem::path& path);

/// Writes `text` to `path` through a temporary sibling and a rename, so
/// readers never observe a partial file.
void write_file_atomically(const std::filesystem::path& path, const std::string& text);

/// %.17g formatting used by every artifact writer.
std::string format_double(double v);

/// format_double for finite values, `null` otherwise.
std::string json_number(double v);
/// Quoted and escaped JSON string literal.
std::string json_string(const std::string& s);

}  // namespace epdiff
