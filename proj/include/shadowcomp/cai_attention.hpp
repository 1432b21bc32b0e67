#pragma once

// Cross-attention integration: foreground features query background features
// through a row-normalised affinity map, and the attended background features
// are concatenated with the foreground ones.
//
// Feature maps are stored as N x C matrices (N = H * W positions in row-major
// order), so every 1x1 convolution is a single matrix product.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowcomp/error.hpp"

namespace shadowcomp::cai {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct FeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  Matrix data;  // (height * width) x channels

  FeatureMap() = default;
  FeatureMap(std::size_t h, std::size_t w, std::size_t c) : height(h), width(w), data(Matrix::Zero(h * w, c)) {}
  FeatureMap(std::size_t h, std::size_t w, Matrix m) : height(h), width(w), data(std::move(m)) {
    if (static_cast<std::size_t>(data.rows()) != h * w) {
      throw DimensionMismatch("feature map rows must equal height * width");
    }
  }

  std::size_t positions() const noexcept { return height * width; }
  std::size_t channels() const noexcept { return static_cast<std::size_t>(data.cols()); }
  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data(static_cast<Eigen::Index>(r * width + c), static_cast<Eigen::Index>(ch));
  }
  bool same_shape(const FeatureMap& o) const noexcept {
    return height == o.height && width == o.width && channels() == o.channels();
  }
};

/// Deterministic generator for weights and test tensors. Values come straight
/// from mt19937_64 bits so they do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = -1.0, double hi = 1.0) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * uniform();
    return m;
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// 1x1 convolution: out(i) = kernel^T x(i) + bias at every position.
/// `kernel` is C_in x C_out.
inline FeatureMap conv1x1(const FeatureMap& x, const Matrix& kernel, const Vector& bias) {
  if (static_cast<std::size_t>(kernel.rows()) != x.channels()) {
    throw DimensionMismatch("conv1x1: kernel has " + std::to_string(kernel.rows()) +
                            " input channels, feature map has " + std::to_string(x.channels()));
  }
  if (bias.size() != kernel.cols()) throw DimensionMismatch("conv1x1: bias length != kernel outputs");
  Matrix out = x.data * kernel;
  out.rowwise() += bias.transpose();
  return {x.height, x.width, std::move(out)};
}

inline constexpr double kSigmaFloor = 1e-12;

/// Power-iteration estimate of a kernel's top singular value with a persistent
/// left vector. One `step` is one iteration; repeated calls refine in place.
class SpectralNormEstimator {
 public:
  SpectralNormEstimator(Eigen::Index rows, std::uint64_t seed) {
    Rng rng(seed);
    u_ = rng.matrix(rows, 1);
    const double n = u_.norm();
    u_ = n > 0 ? Vector(u_ / n) : Vector(Vector::Unit(rows, 0));
  }

  double step(const Matrix& kernel) {
    if (kernel.rows() != u_.size()) throw DimensionMismatch("spectral norm estimator shape changed");
    Vector v = kernel.transpose() * u_;
    const double vn = v.norm();
    if (vn < kSigmaFloor) return sigma_ = 0.0;
    v /= vn;
    Vector u = kernel * v;
    const double un = u.norm();
    if (un < kSigmaFloor) return sigma_ = 0.0;
    u_ = u / un;
    sigma_ = un;  // == u^T K v after normalisation
    return sigma_;
  }

  double sigma() const noexcept { return sigma_; }

 private:
  Vector u_;
  double sigma_ = 0.0;
};

/// kernel / sigma_hat, sigma_hat from `power_iters` power iterations seeded by
/// `seed`. The estimate is floored at 1e-12, so a zero matrix comes back as is.
inline Matrix spectral_normalize(const Matrix& kernel, std::size_t power_iters, std::uint64_t seed) {
  if (power_iters == 0) throw InvalidArgument("spectral_normalize needs at least one power iteration");
  SpectralNormEstimator est(kernel.rows(), seed);
  for (std::size_t i = 0; i < power_iters; ++i) est.step(kernel);
  return kernel / std::max(est.sigma(), kSigmaFloor);
}

/// Projection kernels of the layer. f, g and h map C -> C/8; v maps C/8 -> C_out.
/// f and g produce scores and carry no bias.
struct CaiWeights {
  Matrix f_kernel;  // applied to background features
  Matrix g_kernel;  // applied to foreground features
  Matrix h_kernel;
  Vector h_bias;
  Matrix v_kernel;
  Vector v_bias;
  std::uint64_t seed = 0;

  std::size_t in_channels() const noexcept { return static_cast<std::size_t>(f_kernel.rows()); }
  std::size_t key_channels() const noexcept { return static_cast<std::size_t>(f_kernel.cols()); }
  std::size_t out_channels() const noexcept { return static_cast<std::size_t>(v_kernel.cols()); }

  void validate() const {
    const auto c = f_kernel.rows(), d = f_kernel.cols();
    if (g_kernel.rows() != c || g_kernel.cols() != d || h_kernel.rows() != c || h_kernel.cols() != d ||
        h_bias.size() != d || v_kernel.rows() != d || v_bias.size() != v_kernel.cols()) {
      throw DimensionMismatch("inconsistent CAI weight shapes");
    }
  }

  /// Random weights with spectrally normalised f and g. Requires C % 8 == 0.
  static CaiWeights random(std::size_t channels, std::size_t out_channels, std::uint64_t seed,
                           std::size_t power_iters = 100) {
    if (channels == 0 || channels % 8 != 0) {
      throw InvalidArgument("CAI input channels must be a positive multiple of 8, got " +
                            std::to_string(channels));
    }
    if (out_channels == 0) throw InvalidArgument("CAI output channels must be positive");
    const auto c = static_cast<Eigen::Index>(channels);
    const auto d = static_cast<Eigen::Index>(channels / 8);
    const auto co = static_cast<Eigen::Index>(out_channels);
    Rng rng(seed);
    const double s_in = 1.0 / std::sqrt(static_cast<double>(c));
    const double s_key = 1.0 / std::sqrt(static_cast<double>(d));
    CaiWeights w;
    w.seed = seed;
    const Matrix f_raw = rng.matrix(c, d, s_in);
    const Matrix g_raw = rng.matrix(c, d, s_in);
    w.h_kernel = rng.matrix(c, d, s_in);
    w.h_bias = rng.matrix(d, 1, 0.1);
    w.v_kernel = rng.matrix(d, co, s_key);
    w.v_bias = rng.matrix(co, 1, 0.1);
    w.f_kernel = spectral_normalize(f_raw, power_iters, rng.next());
    w.g_kernel = spectral_normalize(g_raw, power_iters, rng.next());
    return w;
  }
};

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    RowVector e = (scores.row(i).array() - m).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return out;
}

namespace detail {

inline void require_cai_inputs(const FeatureMap& xf, const FeatureMap& xb, const CaiWeights& w) {
  w.validate();
  if (!xf.same_shape(xb)) throw DimensionMismatch("CAI foreground/background feature maps differ in shape");
  if (xf.channels() != w.in_channels()) {
    throw DimensionMismatch("CAI weights expect " + std::to_string(w.in_channels()) + " channels, got " +
                            std::to_string(xf.channels()));
  }
}

}  // namespace detail

/// Query-by-key scores: rows index foreground positions, columns background ones.
inline Matrix affinity_scores(const FeatureMap& xf, const FeatureMap& xb, const CaiWeights& w) {
  detail::require_cai_inputs(xf, xb, w);
  return (xf.data * w.g_kernel) * (xb.data * w.f_kernel).transpose();
}

/// softmax over key positions of g(X_f) f(X_b)^T; every row sums to 1.
inline Matrix affinity(const FeatureMap& xf, const FeatureMap& xb, const CaiWeights& w) {
  return softmax_rows(affinity_scores(xf, xb, w));
}

struct CaiOutput {
  FeatureMap attended;      // H x W x C_out
  FeatureMap concatenated;  // H x W x (C_out + C): [attended, foreground]
};

inline FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  Matrix m(a.data.rows(), a.data.cols() + b.data.cols());
  m << a.data, b.data;
  return {a.height, a.width, std::move(m)};
}

inline CaiOutput cai_forward(const FeatureMap& xf, const FeatureMap& xb, const CaiWeights& w) {
  const Matrix a = affinity(xf, xb, w);
  const Matrix values = xb.data * w.h_kernel + Matrix::Ones(xb.data.rows(), 1) * w.h_bias.transpose();
  Matrix att = (a * values) * w.v_kernel;
  att.rowwise() += w.v_bias.transpose();
  FeatureMap attended(xf.height, xf.width, std::move(att));
  FeatureMap cat = concat_channels(attended, xf);
  return {std::move(attended), std::move(cat)};
}

/// Forward-mode derivative of cai_forward's concatenated output along the
/// tangent (dxf, dxb). Weights are held fixed.
///
/// With S = G F^T, G = X_f g, F = X_b f, A = softmax_rows(S):
///   dS = dX_f g F^T + G (dX_b f)^T
///   dA_ij = A_ij (dS_ij - sum_k A_ik dS_ik)
///   d(A H) = dA H + A dX_b h
///
/// `drop_softmax_centering` omits the row-centring term of the softmax
/// Jacobian; it exists only as a negative control for the gradient checker.
inline FeatureMap cai_jvp(const FeatureMap& xf, const FeatureMap& xb, const CaiWeights& w, const FeatureMap& dxf,
                          const FeatureMap& dxb, bool drop_softmax_centering = false) {
  detail::require_cai_inputs(xf, xb, w);
  if (!dxf.same_shape(xf) || !dxb.same_shape(xb)) throw DimensionMismatch("CAI tangent shape mismatch");

  const Matrix g = xf.data * w.g_kernel;
  const Matrix f = xb.data * w.f_kernel;
  const Matrix a = softmax_rows(g * f.transpose());
  const Matrix ds = (dxf.data * w.g_kernel) * f.transpose() + g * (dxb.data * w.f_kernel).transpose();

  Matrix da = a.cwiseProduct(ds);
  if (!drop_softmax_centering) {
    const Vector row_dot = da.rowwise().sum();
    da -= a.cwiseProduct(row_dot * RowVector::Ones(a.cols()));
  }

  const Matrix values = xb.data * w.h_kernel + Matrix::Ones(xb.data.rows(), 1) * w.h_bias.transpose();
  const Matrix d_att = (da * values + a * (dxb.data * w.h_kernel)) * w.v_kernel;
  return concat_channels(FeatureMap(xf.height, xf.width, d_att), dxf);
}

struct GradCheckReport {
  std::size_t height = 0, width = 0, channels = 0, trials = 0;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double threshold = 1e-4;
  std::vector<double> trial_errors;
  double max_relative_error = 0.0;
  bool passed = false;
};

inline FeatureMap random_feature_map(std::size_t h, std::size_t w, std::size_t c, Rng& rng) {
  return {h, w, rng.matrix(static_cast<Eigen::Index>(h * w), static_cast<Eigen::Index>(c))};
}

/// Relative error max|analytic - numeric| / max(max|numeric|, 1e-12).
inline double relative_error(const Matrix& analytic, const Matrix& numeric) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

/// Randomised JVP-versus-central-difference trials. Each trial draws fresh
/// weights, inputs and tangents; C_out = C.
inline GradCheckReport grad_check_report(std::size_t height, std::size_t width, std::size_t channels,
                                         std::size_t trials, std::uint64_t seed, bool break_jvp = false) {
  if (height == 0 || width == 0) throw InvalidArgument("grad check dims must be positive");
  GradCheckReport rep;
  rep.height = height;
  rep.width = width;
  rep.channels = channels;
  rep.trials = trials;
  rep.seed = seed;
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const CaiWeights w = CaiWeights::random(channels, channels, rng.next());
    const FeatureMap xf = random_feature_map(height, width, channels, rng);
    const FeatureMap xb = random_feature_map(height, width, channels, rng);
    const FeatureMap dxf = random_feature_map(height, width, channels, rng);
    const FeatureMap dxb = random_feature_map(height, width, channels, rng);

    const FeatureMap jvp = cai_jvp(xf, xb, w, dxf, dxb, break_jvp);
    const double h = rep.step;
    const FeatureMap xf_p(height, width, xf.data + h * dxf.data), xf_m(height, width, xf.data - h * dxf.data);
    const FeatureMap xb_p(height, width, xb.data + h * dxb.data), xb_m(height, width, xb.data - h * dxb.data);
    const Matrix numeric =
        (cai_forward(xf_p, xb_p, w).concatenated.data - cai_forward(xf_m, xb_m, w).concatenated.data) / (2.0 * h);
    rep.trial_errors.push_back(relative_error(jvp.data, numeric));
  }
  rep.max_relative_error =
      rep.trial_errors.empty() ? 0.0 : *std::max_element(rep.trial_errors.begin(), rep.trial_errors.end());
  rep.passed = rep.max_relative_error < rep.threshold;
  return rep;
}

inline nlohmann::json to_json(const GradCheckReport& r) {
  return {{"height", r.height},
          {"width", r.width},
          {"channels", r.channels},
          {"trials", r.trials},
          {"seed", r.seed},
          {"step", r.step},
          {"threshold", r.threshold},
          {"trial_errors", r.trial_errors},
          {"max_relative_error", r.max_relative_error},
          {"passed", r.passed}};
}

// Weight container: 8-byte magic, little-endian u64 header length, JSON
// header, then every tensor as little-endian f64 in row-major order at the
// offsets listed in the header (relative to the start of the payload).

inline constexpr char kWeightsMagic[8] = {'S', 'C', 'C', 'A', 'I', 'W', '0', '1'};

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void put_f64_le(std::string& out, double d) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double get_f64_le(const unsigned char* p) {
  const std::uint64_t bits = get_u64_le(p);
  double d = 0;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

}  // namespace detail

inline void save_weights(const CaiWeights& w, const std::filesystem::path& path) {
  w.validate();
  struct Entry {
    const char* name;
    const Matrix m;
  };
  const Entry entries[] = {{"f_kernel", w.f_kernel}, {"g_kernel", w.g_kernel}, {"h_kernel", w.h_kernel},
                           {"h_bias", w.h_bias},     {"v_kernel", w.v_kernel}, {"v_bias", w.v_bias}};
  nlohmann::json header = {{"format", "shadowcomp-cai-weights"},
                           {"version", 1},
                           {"dtype", "f64le"},
                           {"in_channels", w.in_channels()},
                           {"key_channels", w.key_channels()},
                           {"out_channels", w.out_channels()},
                           {"seed", w.seed},
                           {"tensors", nlohmann::json::array()}};
  std::string payload;
  for (const Entry& e : entries) {
    header["tensors"].push_back(
        {{"name", e.name}, {"rows", e.m.rows()}, {"cols", e.m.cols()}, {"offset", payload.size()}});
    for (Eigen::Index r = 0; r < e.m.rows(); ++r)
      for (Eigen::Index c = 0; c < e.m.cols(); ++c) detail::put_f64_le(payload, e.m(r, c));
  }
  const std::string head = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write weights file " + path.string());
  os.write(kWeightsMagic, sizeof kWeightsMagic);
  detail::put_u64_le(os, head.size());
  os.write(head.data(), static_cast<std::streamsize>(head.size()));
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!os) throw IoError("failed writing weights file " + path.string());
}

inline CaiWeights load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open weights file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kWeightsMagic, 8) != 0) {
    throw IoError("not a CAI weights file: " + path.string());
  }
  const std::uint64_t head_len = detail::get_u64_le(raw + 8);
  if (head_len > bytes.size() - 16) throw IoError("truncated weights header in " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, head_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad weights header in " + path.string() + ": " + e.what());
  }
  const std::size_t payload_at = 16 + head_len;
  CaiWeights w;
  w.seed = header.value("seed", std::uint64_t{0});
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto off = t.at("offset").get<std::size_t>();
    const auto count = static_cast<std::size_t>(rows * cols);
    if (payload_at + off + 8 * count > bytes.size()) throw IoError("truncated weights payload in " + path.string());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        m(r, c) = detail::get_f64_le(raw + payload_at + off + 8 * static_cast<std::size_t>(r * cols + c));
    const auto name = t.at("name").get<std::string>();
    if ((name == "h_bias" || name == "v_bias") && cols != 1) {
      throw IoError("bias tensor '" + name + "' must be a column in " + path.string());
    }
    if (name == "f_kernel") w.f_kernel = m;
    else if (name == "g_kernel") w.g_kernel = m;
    else if (name == "h_kernel") w.h_kernel = m;
    else if (name == "h_bias") w.h_bias = m;
    else if (name == "v_kernel") w.v_kernel = m;
    else if (name == "v_bias") w.v_bias = m;
    else throw IoError("unknown tensor '" + name + "' in " + path.string());
  }
  try {
    w.validate();
  } catch (const DimensionMismatch& e) {
    throw IoError(std::string("weights file ") + path.string() + ": " + e.what());
  }
  return w;
}

}  // namespace shadowcomp::cai
