#include "rme/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rme/errors.hpp"

namespace rme::denoise {

using Triplet = Eigen::Triplet<double>;

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::identity: return "identity";
    case Kind::box: return "box";
    case Kind::gaussian: return "gaussian";
    case Kind::nlm: return "nlm";
    case Kind::dsg_nlm: return "dsg-nlm";
    case Kind::external: return "external";
  }
  return "unknown";
}

Kind kind_from_string(const std::string& name) {
  if (name == "identity") return Kind::identity;
  if (name == "box") return Kind::box;
  if (name == "gaussian") return Kind::gaussian;
  if (name == "nlm") return Kind::nlm;
  if (name == "dsg-nlm") return Kind::dsg_nlm;
  if (name == "external") return Kind::external;
  throw ArgumentError("unknown denoiser '" + name + "'");
}

void DenoiserSpec::validate() const {
  if (box_radius < 0) throw ArgumentError("box radius must be >= 0");
  if (!(gaussian_bandwidth > 0.0)) throw ArgumentError("gaussian bandwidth must be positive");
  if (gaussian_radius < 0) throw ArgumentError("gaussian radius must be >= 0");
  if (patch_radius < 0 || search_radius < 0) throw ArgumentError("NLM radii must be >= 0");
  if (!(h_scale > 0.0)) throw ArgumentError("NLM bandwidth scale must be positive");
  if (freeze_after < 0) throw ArgumentError("freeze_after must be >= 0");
  if (kind == Kind::external && command.empty()) {
    throw ArgumentError("external denoiser needs a command");
  }
}

DenoiserSpec DenoiserSpec::parse(const std::string& text) {
  DenoiserSpec spec;
  const std::string prefix = "external:";
  if (text.rfind(prefix, 0) == 0) {
    spec.kind = Kind::external;
    spec.command = text.substr(prefix.size());
    spec.log_wrap = true;
  } else {
    spec.kind = kind_from_string(text);
    if (spec.kind == Kind::external) throw ArgumentError("use external:<command>");
  }
  spec.validate();
  return spec;
}

namespace {

SparseMatrix from_triplets(Index n, std::vector<Triplet>& trips) {
  SparseMatrix k(n, n);
  k.setFromTriplets(trips.begin(), trips.end());
  k.makeCompressed();
  return k;
}

// Spatial kernels: weight depends only on the offset; each unordered pair is
// inserted once per direction with the same value.
template <typename WeightFn>
SparseMatrix spatial_kernel(GridDims g, int radius, WeightFn weight) {
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(g.cells() * (2 * radius + 1) * (2 * radius + 1)));
  for (Index n = 0; n < g.n; ++n) {
    for (Index m = 0; m < g.m; ++m) {
      const Index i = n * g.m + m;
      for (int dn = -radius; dn <= radius; ++dn) {
        for (int dm = -radius; dm <= radius; ++dm) {
          const Index mm = m + dm;
          const Index nn = n + dn;
          if (mm < 0 || mm >= g.m || nn < 0 || nn >= g.n) continue;
          const double w = weight(dm, dn);
          if (w > 0.0) trips.emplace_back(i, nn * g.m + mm, w);
        }
      }
    }
  }
  return from_triplets(g.cells(), trips);
}

Index reflect(Index i, Index size) {
  if (size == 1) return 0;
  const Index period = 2 * (size - 1);
  i %= period;
  if (i < 0) i += period;
  return i < size ? i : period - i;
}

SparseMatrix nlm_kernel(const Field& image, const DenoiserSpec& spec, double sigma) {
  const GridDims g{image.rows(), image.cols()};
  const int pr = spec.patch_radius;
  const int sr = spec.search_radius;
  const double patch_pixels = static_cast<double>((2 * pr + 1) * (2 * pr + 1));
  const double h2 = spec.h_scale * 2.0 * patch_pixels * sigma * sigma;
  if (!(h2 > 0.0) || !std::isfinite(h2)) throw ArgumentError("NLM bandwidth h must be positive");

  // Reflect-padded copy so every pixel has a full patch.
  const Index pm = g.m + 2 * pr;
  const Index pn = g.n + 2 * pr;
  Eigen::MatrixXd padded(pm, pn);
  for (Index n = 0; n < pn; ++n) {
    for (Index m = 0; m < pm; ++m) padded(m, n) = image(reflect(m - pr, g.m), reflect(n - pr, g.n));
  }

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(g.cells() * (2 * sr + 1) * (2 * sr + 1)));
  for (Index i = 0; i < g.cells(); ++i) trips.emplace_back(i, i, 1.0);

  // Half-plane of offsets; each distance computed once and mirrored, so the
  // kernel is exactly symmetric.
  Eigen::MatrixXd diff(pm, pn);
  for (int dn = 0; dn <= sr; ++dn) {
    for (int dm = -sr; dm <= sr; ++dm) {
      if (dn == 0 && dm <= 0) continue;
      for (Index n = 0; n < g.n; ++n) {
        for (Index m = 0; m < g.m; ++m) {
          const Index mm = m + dm;
          const Index nn = n + dn;
          if (mm < 0 || mm >= g.m || nn < 0 || nn >= g.n) continue;
          double dist = 0.0;
          for (int pv = -pr; pv <= pr; ++pv) {
            for (int pu = -pr; pu <= pr; ++pu) {
              const double d = padded(m + pr + pu, n + pr + pv) - padded(mm + pr + pu, nn + pr + pv);
              dist += d * d;
            }
          }
          const double w = std::exp(-dist / h2);
          if (w > 0.0) {
            const Index i = n * g.m + m;
            const Index j = nn * g.m + mm;
            trips.emplace_back(i, j, w);
            trips.emplace_back(j, i, w);
          }
        }
      }
    }
  }
  return from_triplets(g.cells(), trips);
}

}  // namespace

SparseMatrix build_kernel_matrix(const Field& image, const DenoiserSpec& spec, double sigma) {
  spec.validate();
  if (!image.allFinite()) throw ArgumentError("denoiser input must be finite");
  const GridDims g{image.rows(), image.cols()};
  switch (spec.kind) {
    case Kind::box:
      return spatial_kernel(g, spec.box_radius, [](int, int) { return 1.0; });
    case Kind::gaussian: {
      const double bw2 = spec.gaussian_bandwidth * spec.gaussian_bandwidth;
      const double r2 = static_cast<double>(spec.gaussian_radius) * spec.gaussian_radius;
      return spatial_kernel(g, spec.gaussian_radius, [=](int dm, int dn) {
        const double d2 = static_cast<double>(dm * dm + dn * dn);
        return d2 <= r2 ? std::exp(-d2 / (2.0 * bw2)) : 0.0;
      });
    }
    case Kind::nlm:
    case Kind::dsg_nlm:
      return nlm_kernel(image, spec, sigma);
    default:
      throw ArgumentError("no explicit kernel for denoiser kind " + to_string(spec.kind));
  }
}

LinearDenoiser::LinearDenoiser(SparseMatrix w, GridDims dims, int built_at_iter, bool spectral_shift,
                               int sinkhorn_sweeps)
    : w_(std::move(w)),
      dims_(dims),
      built_at_iter_(built_at_iter),
      spectral_shift_(spectral_shift),
      sinkhorn_sweeps_(sinkhorn_sweeps) {
  if (w_.rows() != dims.cells() || w_.cols() != dims.cells()) {
    throw ShapeError("denoising matrix does not match grid");
  }
}

Field LinearDenoiser::apply(const Field& image) const {
  if (image.rows() != dims_.m || image.cols() != dims_.n) throw ShapeError("image does not match W");
  Eigen::VectorXd out = w_ * vec(image);
  return unvec(out, dims_);
}

LinearDenoiser dsg_normalize(const SparseMatrix& kernel, GridDims dims, bool spectral_shift,
                             int built_at_iter, const SinkhornOptions& opts) {
  const Index n = kernel.rows();
  if (kernel.cols() != n) throw ShapeError("kernel must be square");
  Eigen::VectorXd row_sums = kernel * Eigen::VectorXd::Ones(n);
  for (Index i = 0; i < n; ++i) {
    if (!(row_sums(i) > 0.0)) throw DegenerateKernelError("kernel row " + std::to_string(i) + " is zero");
  }

  // Symmetric Sinkhorn: d <- sqrt(d / (K d)); row sums of D K D are d .* (K d).
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  int sweeps = 0;
  for (;; ++sweeps) {
    Eigen::VectorXd kd = kernel * d;
    const double dev = (d.cwiseProduct(kd).array() - 1.0).abs().maxCoeff();
    if (dev <= opts.tolerance) break;
    if (sweeps >= opts.max_sweeps) {
      throw NumericalError("Sinkhorn scaling did not converge in " + std::to_string(opts.max_sweeps) +
                           " sweeps (deviation " + std::to_string(dev) + ")");
    }
    d = (d.array() / kd.array()).sqrt();
  }

  SparseMatrix w = kernel;
  for (Index col = 0; col < w.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(w, col); it; ++it) it.valueRef() *= d(it.row()) * d(it.col());
  }
  if (spectral_shift) {
    SparseMatrix eye(n, n);
    eye.setIdentity();
    w = 0.5 * (w + eye);
  }
  w.makeCompressed();
  return LinearDenoiser(std::move(w), dims, built_at_iter, spectral_shift, sweeps);
}

LinearDenoiser row_normalize(const SparseMatrix& kernel, GridDims dims, int built_at_iter) {
  const Index n = kernel.rows();
  Eigen::VectorXd row_sums = kernel * Eigen::VectorXd::Ones(n);
  for (Index i = 0; i < n; ++i) {
    if (!(row_sums(i) > 0.0)) throw DegenerateKernelError("kernel row " + std::to_string(i) + " is zero");
  }
  SparseMatrix w = kernel;
  for (Index col = 0; col < w.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(w, col); it; ++it) it.valueRef() /= row_sums(it.row());
  }
  return LinearDenoiser(std::move(w), dims, built_at_iter, false);
}

LogWrapped log_forward(const Field& x, double floor_rel) {
  const double peak = x.maxCoeff();
  LogFrame frame;
  frame.floor = peak > 0.0 ? floor_rel * peak : floor_rel;
  Field y = (x.array().max(0.0) + frame.floor).log10() * 10.0;
  frame.lo = y.minCoeff();
  frame.hi = y.maxCoeff();
  if (frame.degenerate()) {
    frame.hi = frame.lo;
    return {Field::Constant(x.rows(), x.cols(), 0.5), frame};
  }
  return {(y.array() - frame.lo) / (frame.hi - frame.lo), frame};
}

Field log_inverse(const Field& y, const LogFrame& frame) {
  Field db;
  if (frame.degenerate()) {
    db = Field::Constant(y.rows(), y.cols(), frame.lo);
  } else {
    db = y.array() * (frame.hi - frame.lo) + frame.lo;
  }
  return (db.array() / 10.0).unaryExpr([](double v) { return std::pow(10.0, v); }) - frame.floor;
}

bool freeze_policy(const DenoiserSpec& spec, int admm_iter) {
  if (admm_iter < 1) throw ArgumentError("ADMM iterations are 1-based");
  return spec.image_dependent() && admm_iter <= spec.freeze_after;
}

SlotDenoiser::SlotDenoiser(DenoiserSpec spec, std::shared_ptr<PluginBridge> plugin)
    : spec_(std::move(spec)), plugin_(std::move(plugin)) {
  spec_.validate();
  if (spec_.kind == Kind::external && !plugin_) plugin_ = std::make_shared<PluginBridge>(spec_.command);
}

Field SlotDenoiser::apply_inner(const Field& image, double sigma, int admm_iter) {
  const GridDims g{image.rows(), image.cols()};
  switch (spec_.kind) {
    case Kind::identity:
      return image;
    case Kind::external:
      return plugin_->denoise(image, sigma);
    case Kind::box:
    case Kind::gaussian:
      if (!w_) {
        w_ = dsg_normalize(build_kernel_matrix(image, spec_, sigma), g, spec_.spectral_shift, admm_iter);
        w_->freeze();
      }
      return w_->apply(image);
    case Kind::nlm:
    case Kind::dsg_nlm:
      if (!w_ || (!w_->frozen() && freeze_policy(spec_, admm_iter))) {
        auto kernel = build_kernel_matrix(image, spec_, sigma);
        w_ = spec_.kind == Kind::dsg_nlm ? dsg_normalize(kernel, g, spec_.spectral_shift, admm_iter)
                                         : row_normalize(kernel, g, admm_iter);
      }
      if (!freeze_policy(spec_, admm_iter + 1)) w_->freeze();
      return w_->apply(image);
  }
  throw ArgumentError("unhandled denoiser kind");
}

Field SlotDenoiser::operator()(const Field& image, double sigma, int admm_iter) {
  if (!image.allFinite()) throw ArgumentError("denoiser input must be finite");
  if (spec_.kind == Kind::external && !(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  ++calls_;
  Field out;
  if (spec_.log_wrap) {
    auto wrapped = log_forward(image);
    out = log_inverse(apply_inner(wrapped.image, sigma, admm_iter), wrapped.frame);
  } else {
    out = apply_inner(image, sigma, admm_iter);
  }
  const double denom = static_cast<double>(image.size()) * sigma * sigma;
  last_boundedness_ = denom > 0.0 ? (out - image).squaredNorm() / denom : 0.0;
  return out;
}

}  // namespace rme::denoise
