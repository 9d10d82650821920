#include "attnreg/attreg.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "attnreg/csv.hpp"
#include "attnreg/error.hpp"
#include "attnreg/rng.hpp"

namespace attnreg {

void AttRegConfig::validate() const {
  if (heads < 1) throw Error(ErrorKind::InvalidArgument, "need at least one head");
  if (!(ridge_penalty >= 0.0)) throw Error(ErrorKind::InvalidArgument, "ridge_penalty must be >= 0");
  if (!(init_noise_scale >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "init_noise_scale must be >= 0");
  }
  if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
  if (patience < 1) throw Error(ErrorKind::InvalidArgument, "patience must be >= 1");
}

MultiHeadModel::MultiHeadModel(std::vector<AttentionHead> heads_, DesignMatrix train_x_,
                               Vector train_y_, AttRegConfig config_)
    : heads(std::move(heads_)),
      train_x(std::move(train_x_)),
      train_y(std::move(train_y_)),
      config(config_) {
  if (heads.empty()) throw Error(ErrorKind::InvalidArgument, "model needs at least one head");
  if (train_x.rows() != train_y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "training rows differ from outcome length");
  }
  for (const auto& h : heads) {
    if (h.factor.rows() != train_x.cols() || h.factor.cols() != train_x.cols()) {
      throw Error(ErrorKind::DimensionMismatch, "head factor must be P x P");
    }
  }
}

namespace {

constexpr Eigen::Index kQueryChunk = 2048;
// Cache per-head weight matrices during training below this many doubles.
constexpr double kCacheLimit = 32.0 * 1024 * 1024;

// N x J matrix; column q holds query q's softmax weights over the keys.
// Keys run down the columns so every softmax works on contiguous memory.
void key_major_weights(const Matrix& z_keys, const Matrix& z_query, bool mask_diagonal, Matrix& w) {
  constexpr Eigen::Index kBlock = 64;
  w.resize(z_keys.rows(), z_query.rows());
  // Scores are produced and normalized one cache-sized column block at a time.
  for (Eigen::Index start = 0; start < w.cols(); start += kBlock) {
    const Eigen::Index len = std::min(kBlock, w.cols() - start);
    w.middleCols(start, len).noalias() = z_keys * z_query.middleRows(start, len).transpose();
    for (Eigen::Index q = start; q < start + len; ++q) {
      auto col = w.col(q);
      if (mask_diagonal) col(q) = -std::numeric_limits<double>::infinity();
      const double top = col.maxCoeff();
      col = (col.array() - top).exp().matrix();
      col /= col.sum();
    }
  }
}

bool same_design(const DesignMatrix& a, const DesignMatrix& b) {
  return &a == &b || (a.rows() == b.rows() && a.cols() == b.cols() && a.values() == b.values());
}

Vector forward_impl(const std::vector<AttentionHead>& heads, const Matrix& x_train,
                    const Vector& y, const Matrix& x_query, bool mask_diagonal) {
  Vector out = Vector::Zero(x_query.rows());
  Matrix w;
  for (const auto& head : heads) {
    const Matrix z_keys = x_train * head.factor;
    if (mask_diagonal) {
      key_major_weights(z_keys, x_query * head.factor, true, w);
      out += head.alpha * (w.transpose() * y);
      continue;
    }
    for (Eigen::Index start = 0; start < x_query.rows(); start += kQueryChunk) {
      const Eigen::Index len = std::min(kQueryChunk, x_query.rows() - start);
      const Matrix z_query = x_query.middleRows(start, len) * head.factor;
      key_major_weights(z_keys, z_query, false, w);
      out.segment(start, len) += head.alpha * (w.transpose() * y);
    }
  }
  return out;
}

double penalty(const std::vector<AttentionHead>& heads, double lambda) {
  double total = 0.0;
  for (const auto& h : heads) total += h.factor.squaredNorm();
  return lambda * total;
}

struct Evaluation {
  double loss = 0.0;
  ModelGradient gradient;
};

// Buffers reused across evaluations of one fit; the N x N weight matrices
// dominate the cost of allocation.
struct Workspace {
  std::vector<Matrix> weights;
};

Evaluation evaluate(const std::vector<AttentionHead>& heads, const Matrix& x, const Vector& y,
                    const AttRegConfig& config, bool want_gradient, Workspace& ws) {
  const Eigen::Index n = x.rows();
  const size_t m_count = heads.size();
  const bool cache = want_gradient &&
                     static_cast<double>(m_count) * static_cast<double>(n) * n <= kCacheLimit;

  std::vector<Matrix> z(m_count);
  ws.weights.resize(cache ? m_count : 1);
  std::vector<Vector> head_out(m_count);
  Vector fitted = Vector::Zero(n);
  for (size_t m = 0; m < m_count; ++m) {
    z[m] = x * heads[m].factor;
    Matrix& w = ws.weights[cache ? m : 0];
    key_major_weights(z[m], z[m], config.diagonal_mask, w);
    head_out[m] = w.transpose() * y;
    fitted += heads[m].alpha * head_out[m];
  }
  const Vector residual = y - fitted;

  Evaluation ev;
  ev.loss = residual.squaredNorm() + penalty(heads, config.ridge_penalty);
  if (!want_gradient) return ev;

  ev.gradient.factors.resize(m_count);
  ev.gradient.alphas.resize(static_cast<Eigen::Index>(m_count));
  for (size_t m = 0; m < m_count; ++m) {
    if (!cache) key_major_weights(z[m], z[m], config.diagonal_mask, ws.weights[0]);
    const Matrix& k = ws.weights[cache ? m : 0];
    // With c = −2 α_m r and h the head output, ∂loss/∂S has entries
    // G(j,i) = c_i K(j,i) (y_j − h_i), i.e. G = diag(y) K diag(c) − K diag(c ⊙ h).
    // (G + G') Z is then assembled from two thin products with K.
    const Eigen::Index p = z[m].cols();
    const Vector c = -2.0 * heads[m].alpha * residual;
    const Vector ch = c.cwiseProduct(head_out[m]);
    Matrix right(n, 2 * p);
    right.leftCols(p) = c.asDiagonal() * z[m];
    right.rightCols(p) = ch.asDiagonal() * z[m];
    Matrix left(n, 2 * p);
    left.leftCols(p) = y.asDiagonal() * z[m];
    left.rightCols(p) = z[m];
    const Matrix kr = k * right;
    const Matrix kl = k.transpose() * left;
    const Matrix back = y.asDiagonal() * kr.leftCols(p) - kr.rightCols(p) +
                        c.asDiagonal() * kl.leftCols(p) - ch.asDiagonal() * kl.rightCols(p);
    Matrix grad_l = x.transpose() * back;
    grad_l += 2.0 * config.ridge_penalty * heads[m].factor;
    ev.gradient.factors[m] = grad_l.triangularView<Eigen::Lower>();
    ev.gradient.alphas(static_cast<Eigen::Index>(m)) = -2.0 * residual.dot(head_out[m]);
  }
  return ev;
}

}  // namespace

std::vector<AttentionHead> init_heads(const DesignMatrix& x_train, const AttRegConfig& config) {
  config.validate();
  const Eigen::Index p = x_train.cols();
  const double n = static_cast<double>(x_train.rows());
  const Matrix regularized = x_train.gram() + config.ridge_penalty * Matrix::Identity(p, p);
  Eigen::LLT<Matrix> gram_chol(regularized);
  if (gram_chol.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularGram, "X'X + lambda I is not positive definite");
  }
  const Matrix precision = gram_chol.solve(Matrix::Identity(p, p));
  Eigen::LLT<Matrix> precision_chol(0.5 * (precision + precision.transpose()));
  if (precision_chol.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularGram, "precision matrix is not positive definite");
  }
  const Matrix base = std::sqrt(n) * Matrix(precision_chol.matrixL());

  const double sd = config.init_noise_scale * base.norm() / static_cast<double>(p);
  CounterRng rng(derive_seed({config.seed, 0x1417}));
  std::vector<AttentionHead> heads;
  heads.reserve(static_cast<size_t>(config.heads));
  for (int m = 0; m < config.heads; ++m) {
    AttentionHead head{base, 1.0 / config.heads};
    if (sd > 0.0) {
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) head.factor(i, j) += sd * rng.normal();
      }
    }
    heads.push_back(std::move(head));
  }
  return heads;
}

Vector forward(const MultiHeadModel& model, const DesignMatrix& x_query) {
  if (x_query.cols() != model.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "query columns differ from training design");
  }
  const bool mask = model.config.diagonal_mask && same_design(x_query, model.train_x);
  return forward_impl(model.heads, model.train_x.values(), model.train_y, x_query.values(), mask);
}

Vector predict(const MultiHeadModel& model, const DesignMatrix& x_test) {
  if (x_test.cols() != model.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "test columns differ from training design");
  }
  return forward_impl(model.heads, model.train_x.values(), model.train_y, x_test.values(), false);
}

double loss(const MultiHeadModel& model) {
  Workspace ws;
  return evaluate(model.heads, model.train_x.values(), model.train_y, model.config, false, ws).loss;
}

ModelGradient loss_gradient(const MultiHeadModel& model) {
  Workspace ws;
  return evaluate(model.heads, model.train_x.values(), model.train_y, model.config, true, ws)
      .gradient;
}

Vector pack_parameters(const std::vector<AttentionHead>& heads) {
  const Eigen::Index p = heads.front().factor.rows();
  const Eigen::Index tri = p * (p + 1) / 2;
  const auto m_count = static_cast<Eigen::Index>(heads.size());
  Vector theta(m_count * tri + m_count);
  Eigen::Index k = 0;
  for (const auto& h : heads) {
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) theta(k++) = h.factor(i, j);
    }
  }
  for (const auto& h : heads) theta(k++) = h.alpha;
  return theta;
}

void unpack_parameters(const Vector& theta, std::vector<AttentionHead>& heads) {
  const Eigen::Index p = heads.front().factor.rows();
  const Eigen::Index tri = p * (p + 1) / 2;
  const auto m_count = static_cast<Eigen::Index>(heads.size());
  if (theta.size() != m_count * tri + m_count) {
    throw Error(ErrorKind::DimensionMismatch, "parameter vector has the wrong length");
  }
  Eigen::Index k = 0;
  for (auto& h : heads) {
    h.factor.setZero();
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) h.factor(i, j) = theta(k++);
    }
  }
  for (auto& h : heads) h.alpha = theta(k++);
}

MultiHeadModel fit(const DesignMatrix& x_train, const Vector& y, const AttRegConfig& config) {
  config.validate();
  if (x_train.rows() < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 observations");
  if (y.size() != x_train.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "y length differs from training rows");
  }
  if (!y.allFinite()) throw Error(ErrorKind::InvalidArgument, "y has non-finite entries");

  MultiHeadModel model(init_heads(x_train, config), x_train, y, config);
  const Matrix& x = model.train_x.values();
  std::vector<AttentionHead> scratch = model.heads;
  std::vector<AttentionHead> grad_heads = model.heads;
  Workspace ws;

  optim::ValueAndGradient fg = [&](const Vector& theta, Vector& grad) {
    unpack_parameters(theta, scratch);
    Evaluation ev = evaluate(scratch, x, y, config, true, ws);
    for (size_t m = 0; m < scratch.size(); ++m) {
      grad_heads[m].factor = ev.gradient.factors[m];
      grad_heads[m].alpha = ev.gradient.alphas(static_cast<Eigen::Index>(m));
    }
    grad = pack_parameters(grad_heads);
    return ev.loss;
  };

  optim::LbfgsConfig opt;
  opt.max_iterations = config.max_iterations;
  optim::MinimizeResult result;
  try {
    result = optim::minimize(fg, pack_parameters(model.heads), opt, config.improvement_tol,
                             config.patience);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::LineSearchFailure || e.kind() == ErrorKind::NonFiniteObjective) {
      throw Error(ErrorKind::OptimizationFailed, e.what());
    }
    throw;
  }

  unpack_parameters(result.solution, model.heads);
  auto& diag = model.diagnostics;
  diag.initial_loss = result.history.front().value;
  diag.final_loss = result.value;
  diag.iterations = result.iterations;
  diag.stop_reason = result.stop_reason;
  diag.loss_history.reserve(result.history.size());
  for (const auto& rec : result.history) diag.loss_history.push_back(rec.value);
  return model;
}

// ---- serialization

namespace {

optim::StopReason parse_stop_reason(const std::string& s) {
  for (auto r : {optim::StopReason::gradient_tol, optim::StopReason::improvement_stall,
                 optim::StopReason::max_iterations, optim::StopReason::line_search_failure}) {
    if (optim::to_string(r) == s) return r;
  }
  throw Error(ErrorKind::ParseError, "unknown stop reason '" + s + "'");
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string s;
    if (!(in_ >> s)) throw Error(ErrorKind::ParseError, "model file truncated");
    return s;
  }
  void expect(const std::string& keyword) {
    const std::string got = word();
    if (got != keyword) {
      throw Error(ErrorKind::ParseError, "expected '" + keyword + "', found '" + got + "'");
    }
  }
  double real() {
    const std::string s = word();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw Error(ErrorKind::ParseError, "bad number '" + s + "'");
    return v;
  }
  long long integer() {
    const std::string s = word();
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) throw Error(ErrorKind::ParseError, "bad integer '" + s + "'");
    return v;
  }
  std::uint64_t unsigned_integer() {
    const std::string s = word();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) throw Error(ErrorKind::ParseError, "bad integer '" + s + "'");
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_model(std::ostream& out, const MultiHeadModel& model) {
  using csv::format_double;
  const Eigen::Index p = model.dim();
  const auto& c = model.config;
  const auto& d = model.diagnostics;
  out << "attnreg-model " << kModelFormatVersion << '\n';
  out << "dims " << p << ' ' << model.heads.size() << ' ' << model.train_x.rows() << ' '
      << (model.train_x.has_intercept() ? 1 : 0) << '\n';
  out << "config " << c.heads << ' ' << format_double(c.ridge_penalty) << ' '
      << format_double(c.init_noise_scale) << ' ' << c.max_iterations << ' '
      << format_double(c.improvement_tol) << ' ' << c.patience << ' ' << (c.diagonal_mask ? 1 : 0)
      << ' ' << c.seed << '\n';
  out << "diagnostics " << format_double(d.initial_loss) << ' ' << format_double(d.final_loss)
      << ' ' << d.iterations << ' ' << optim::to_string(d.stop_reason) << '\n';
  out << "alpha";
  for (const auto& h : model.heads) out << ' ' << format_double(h.alpha);
  out << '\n';
  for (const auto& h : model.heads) {
    out << "factor";
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) out << ' ' << format_double(h.factor(i, j));
    }
    out << '\n';
  }
  const Matrix& x = model.train_x.values();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out << "row " << format_double(model.train_y(i));
    for (Eigen::Index j = 0; j < p; ++j) out << ' ' << format_double(x(i, j));
    out << '\n';
  }
  out << "end\n";
}

MultiHeadModel load_model(std::istream& in) {
  TokenReader r(in);
  r.expect("attnreg-model");
  const long long version = r.integer();
  if (version != kModelFormatVersion) {
    throw Error(ErrorKind::ParseError, "unsupported model format version " +
                                           std::to_string(version));
  }
  r.expect("dims");
  const long long p = r.integer();
  const long long m_count = r.integer();
  const long long n = r.integer();
  const bool intercept = r.integer() != 0;
  if (p < 1 || m_count < 1 || n < 1) throw Error(ErrorKind::ParseError, "bad model dimensions");

  AttRegConfig c;
  r.expect("config");
  c.heads = static_cast<int>(r.integer());
  c.ridge_penalty = r.real();
  c.init_noise_scale = r.real();
  c.max_iterations = static_cast<int>(r.integer());
  c.improvement_tol = r.real();
  c.patience = static_cast<int>(r.integer());
  c.diagonal_mask = r.integer() != 0;
  c.seed = r.unsigned_integer();

  FitDiagnostics d;
  r.expect("diagnostics");
  d.initial_loss = r.real();
  d.final_loss = r.real();
  d.iterations = static_cast<int>(r.integer());
  d.stop_reason = parse_stop_reason(r.word());

  std::vector<AttentionHead> heads(static_cast<size_t>(m_count));
  r.expect("alpha");
  for (auto& h : heads) h.alpha = r.real();
  for (auto& h : heads) {
    r.expect("factor");
    h.factor = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) h.factor(i, j) = r.real();
    }
  }
  Matrix x(n, p);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.expect("row");
    y(i) = r.real();
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = r.real();
  }
  r.expect("end");
  MultiHeadModel model(std::move(heads), DesignMatrix(std::move(x), intercept), std::move(y), c);
  model.diagnostics = d;
  return model;
}

}  // namespace attnreg
