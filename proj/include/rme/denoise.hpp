#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <Eigen/Sparse>

#include "rme/core.hpp"

namespace rme::denoise {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Kind { identity, box, gaussian, nlm, dsg_nlm, external };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& name);

struct DenoiserSpec {
  Kind kind = Kind::dsg_nlm;
  int box_radius = 1;
  /// Gaussian kernel std in grid units; support truncated at gaussian_radius.
  double gaussian_bandwidth = 1.0;
  int gaussian_radius = 3;
  /// 5x5 patches compared within an 11x11 search window.
  int patch_radius = 2;
  int search_radius = 5;
  /// NLM bandwidth: h^2 = h_scale * 2 * (patch pixel count) * sigma^2.
  double h_scale = 1.0;
  /// Rebuild image-dependent kernels up to and including this ADMM iteration.
  int freeze_after = 10;
  bool spectral_shift = true;
  bool log_wrap = false;
  /// Shell command for Kind::external.
  std::string command;

  bool linear() const noexcept { return kind != Kind::external; }
  bool image_dependent() const noexcept { return kind == Kind::nlm || kind == Kind::dsg_nlm; }
  void validate() const;

  /// Parses a CLI denoiser name: identity, box, gaussian, nlm, dsg-nlm or
  /// external:<command>. External denoisers default to log wrapping.
  static DenoiserSpec parse(const std::string& text);
};

/// Raw symmetric nonnegative kernel over the M x N grid (linear index n*M+m).
/// Only in-grid neighbours get entries. sigma sets the NLM bandwidth and is
/// ignored by the spatial kernels.
SparseMatrix build_kernel_matrix(const Field& image, const DenoiserSpec& spec, double sigma);

/// Explicit denoising matrix W with bookkeeping for freezing.
class LinearDenoiser {
 public:
  LinearDenoiser(SparseMatrix w, GridDims dims, int built_at_iter, bool spectral_shift,
                 int sinkhorn_sweeps = 0);

  const SparseMatrix& matrix() const noexcept { return w_; }
  GridDims dims() const noexcept { return dims_; }
  int built_at_iter() const noexcept { return built_at_iter_; }
  bool spectral_shift() const noexcept { return spectral_shift_; }
  bool frozen() const noexcept { return frozen_; }
  int sinkhorn_sweeps() const noexcept { return sinkhorn_sweeps_; }
  void freeze() noexcept { frozen_ = true; }

  Field apply(const Field& image) const;
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(w_); }

 private:
  SparseMatrix w_;
  GridDims dims_;
  int built_at_iter_ = 0;
  bool spectral_shift_ = false;
  bool frozen_ = false;
  int sinkhorn_sweeps_ = 0;
};

struct SinkhornOptions {
  double tolerance = 1e-8;
  int max_sweeps = 1000;
};

/// Symmetric Sinkhorn scaling D K D to a doubly stochastic matrix, then
/// optionally W <- (W + I) / 2.
LinearDenoiser dsg_normalize(const SparseMatrix& kernel, GridDims dims, bool spectral_shift,
                             int built_at_iter = 0, const SinkhornOptions& opts = {});

/// Classic NLM normalization D^{-1} K (row stochastic, not symmetric).
LinearDenoiser row_normalize(const SparseMatrix& kernel, GridDims dims, int built_at_iter = 0);

struct LogFrame {
  double lo = 0.0;
  double hi = 0.0;
  double floor = 0.0;
  bool degenerate() const noexcept { return !(hi > lo); }
};

struct LogWrapped {
  Field image;
  LogFrame frame;
};

/// y = 10 log10(max(x, 0) + floor), then affine to [0, 1] by the frame's own
/// range. A constant frame maps to 0.5. floor = floor_rel * max(x).
LogWrapped log_forward(const Field& x, double floor_rel = 1e-12);
Field log_inverse(const Field& y, const LogFrame& frame);

/// True when an image-dependent kernel must be rebuilt at this ADMM
/// iteration (1-based).
bool freeze_policy(const DenoiserSpec& spec, int admm_iter);

/// Child process speaking the DNRQ/DNRS stdio protocol. Requests are
/// serialized; the process is reused across calls.
class PluginBridge {
 public:
  explicit PluginBridge(const std::string& command);
  ~PluginBridge();
  PluginBridge(const PluginBridge&) = delete;
  PluginBridge& operator=(const PluginBridge&) = delete;

  Field denoise(const Field& image, double sigma);
  long calls() const noexcept { return calls_; }

 private:
  void write_all(const void* data, std::size_t size);
  void read_all(void* data, std::size_t size);
  void fail(const std::string& what);

  std::mutex mutex_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  long calls_ = 0;
};

/// Denoiser bound to one latent field: owns that field's W (rebuilt and
/// frozen per freeze_policy) and records the boundedness monitor
/// |D(X) - X|_F^2 / (MN sigma^2) on every call.
class SlotDenoiser {
 public:
  explicit SlotDenoiser(DenoiserSpec spec, std::shared_ptr<PluginBridge> plugin = nullptr);

  Field operator()(const Field& image, double sigma, int admm_iter);

  const DenoiserSpec& spec() const noexcept { return spec_; }
  /// Current explicit matrix, if the kind is linear and one was built.
  const LinearDenoiser* linear() const noexcept { return w_ ? &*w_ : nullptr; }
  double last_boundedness() const noexcept { return last_boundedness_; }
  long calls() const noexcept { return calls_; }

 private:
  Field apply_inner(const Field& image, double sigma, int admm_iter);

  DenoiserSpec spec_;
  std::shared_ptr<PluginBridge> plugin_;
  std::optional<LinearDenoiser> w_;
  double last_boundedness_ = 0.0;
  long calls_ = 0;
};

}  // namespace rme::denoise
