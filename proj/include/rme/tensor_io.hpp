#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rme/core.hpp"

namespace rme::io {

// RMT1 layout: "RMT1", u8 ndim, ndim x u64 LE dims (M, N, K), then f64 LE
// payload with k fastest, then m, then n.
std::vector<std::uint8_t> encode_rmt1(const RadioMap& x);
RadioMap decode_rmt1(const std::vector<std::uint8_t>& bytes);

void write_rmt1(const std::filesystem::path& path, const RadioMap& x);
RadioMap read_rmt1(const std::filesystem::path& path);

// Mask file: JSON array of [m, n] pairs, 0-based.
std::string encode_mask(const SamplingMask& mask);
SamplingMask decode_mask(const std::string& text, GridDims dims);
void write_mask(const std::filesystem::path& path, const SamplingMask& mask);
SamplingMask read_mask(const std::filesystem::path& path, GridDims dims);

/// Writes via a sibling temp file and rename, so readers never see a
/// partially written artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// Splits an M x N x R tensor into R spatial fields (one per k-slice), for
/// importing externally simulated loss fields.
std::vector<Field> slices_as_fields(const RadioMap& stack);
RadioMap fields_as_slices(const std::vector<Field>& fields);

}  // namespace rme::io
