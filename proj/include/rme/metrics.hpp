#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "rme/core.hpp"

namespace rme::metrics {

/// |est - truth|_F^2 / |truth|_F^2.
double rse(const RadioMap& estimate, const RadioMap& truth);

struct SsimOptions {
  int window = 11;
  double gaussian_sigma = 1.5;
  double c1 = 1e-4;
  double c2 = 9e-4;
  /// Floor inside the dB transform, relative to the largest true entry.
  double floor_rel = 1e-12;
};

/// SSIM of two images already scaled to [0, 1]; mean over 'valid' windows.
double ssim(const Field& a, const Field& b, const SsimOptions& opts = {});

/// Per-band SSIM in dB (both slices normalized by their joint range),
/// clamped to [0, 1] and averaged over bands.
double mssim(const RadioMap& estimate, const RadioMap& truth, const SsimOptions& opts = {});

struct MetricRow {
  std::string run_id;
  std::string method;
  double tau = 0.0;
  double sigma_s = 0.0;
  /// NaN for clean runs (written as "clean").
  double snr_db = 0.0;
  double rse = 0.0;
  double mssim = 0.0;
  double seconds = 0.0;
  int iterations = 0;
};

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const MetricRow& row);

}  // namespace rme::metrics
