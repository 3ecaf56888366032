#include "emog/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "emog/error.hpp"

namespace emog {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
using StridedC = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

using detail::Node;

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

bool wants(const Node* n) { return n && n->requires_grad; }

std::size_t valid_count(std::span<const std::uint8_t> valid, std::size_t total) {
  if (valid.empty()) return total;
  return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(), [](auto v) { return v != 0; }));
}

void check_mask(std::span<const std::uint8_t> valid, std::size_t batch, std::size_t frames, const char* op) {
  if (!valid.empty() && valid.size() != batch * frames) {
    throw DimensionError(std::string(op) + ": mask of " + std::to_string(valid.size()) + " flags for " +
                         std::to_string(batch) + "x" + std::to_string(frames) + " frames");
  }
}

inline bool is_valid(std::span<const std::uint8_t> valid, std::size_t i) { return valid.empty() || valid[i] != 0; }

template <class F, class DF>
Tensor unary(const char* name, const Tensor& x, F f, DF df) {
  const auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  Node* xn = x.node();
  return Tensor::from_op(name, x.shape(), std::move(out), {x}, [xn, df](Node& self) {
    if (!wants(xn)) return;
    auto& gx = xn->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * df(xn->value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Node* an = a.node();
  Node* bn = b.node();
  return Tensor::from_op("add", a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    for (Node* n : {an, bn}) {
      if (!wants(n)) continue;
      auto& g = n->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Node* an = a.node();
  Node* bn = b.node();
  return Tensor::from_op("sub", a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (wants(an)) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(bn)) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Node* an = a.node();
  Node* bn = b.node();
  return Tensor::from_op("mul", a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (wants(an)) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (wants(bn)) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double v) { return s * v; }, [s](double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double v) { return v + s; }, [](double) { return 1.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Tensor silu(const Tensor& x) {
  return unary(
      "silu", x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul", "left operand");
  require_rank(b, 2, "matmul", "right operand");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " . " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  Node* an = a.node();
  Node* bn = b.node();
  return Tensor::from_op("matmul", {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
    MapC dy(self.grad.data(), m, n);
    if (wants(an)) Map(an->ensure_grad().data(), m, k).noalias() += dy * MapC(bn->value.data(), k, n).transpose();
    if (wants(bn)) Map(bn->ensure_grad().data(), k, n).noalias() += MapC(an->value.data(), m, k).transpose() * dy;
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(w, 2, "linear", "weight");
  if (x.rank() < 1 || x.shape().back() != w.dim(0)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  const std::size_t in = w.dim(0), outd = w.dim(1);
  if (b.defined() && (b.rank() != 1 || b.dim(0) != outd)) {
    throw DimensionError("linear: bias " + shape_string(b.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  const std::size_t rows = x.numel() / in;
  std::vector<double> out(rows * outd);
  Map y(out.data(), rows, outd);
  y.noalias() = MapC(x.data().data(), rows, in) * MapC(w.data().data(), in, outd);
  if (b.defined()) y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), outd);
  Shape shape = x.shape();
  shape.back() = outd;
  Node* xn = x.node();
  Node* wn = w.node();
  Node* bn = b.node();
  return Tensor::from_op("linear", std::move(shape), std::move(out), {x, w, b},
                         [xn, wn, bn, rows, in, outd](Node& self) {
                           MapC dy(self.grad.data(), rows, outd);
                           if (wants(xn)) {
                             Map(xn->ensure_grad().data(), rows, in).noalias() +=
                                 dy * MapC(wn->value.data(), in, outd).transpose();
                           }
                           if (wants(wn)) {
                             Map(wn->ensure_grad().data(), in, outd).noalias() +=
                                 MapC(xn->value.data(), rows, in).transpose() * dy;
                           }
                           if (wants(bn)) {
                             // Row-by-row accumulation; Eigen's colwise sum rounds differently
                             // depending on buffer alignment, which breaks run-to-run replay.
                             auto& gb = bn->ensure_grad();
                             const double* g = self.grad.data();
                             for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t o = 0; o < outd; ++o) gb[o] += g[r * outd + o];
                           }
                         });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() < 1) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  for (const Tensor* p : {&gain, &bias}) {
    if (p->defined() && (p->rank() != 1 || p->dim(0) != d)) {
      throw DimensionError("layer_norm: affine parameter " + shape_string(p->shape()) + " for feature dim " +
                           std::to_string(d));
    }
  }
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  std::vector<double> xhat(x.numel());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) xhat[r * d + c] = (row[c] - mu) * rstd[r];
  }
  std::vector<double> out = xhat;
  if (gain.defined() || bias.defined()) {
    const auto g = gain.data();
    const auto bb = bias.data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        double v = xhat[r * d + c];
        if (gain.defined()) v *= g[c];
        if (bias.defined()) v += bb[c];
        out[r * d + c] = v;
      }
    }
  }
  Node* xn = x.node();
  Node* gn = gain.node();
  Node* bn = bias.node();
  return Tensor::from_op(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [xn, gn, bn, d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        const auto& dy = self.grad;
        if (wants(gn)) {
          auto& gg = gn->ensure_grad();
          for (std::size_t i = 0; i < dy.size(); ++i) gg[i % d] += dy[i] * xhat[i];
        }
        if (wants(bn)) {
          auto& gb = bn->ensure_grad();
          for (std::size_t i = 0; i < dy.size(); ++i) gb[i % d] += dy[i];
        }
        if (!wants(xn)) return;
        auto& gx = xn->ensure_grad();
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double g = gn ? gn->value[c] : 1.0;
            dxhat[c] = dy[r * d + c] * g;
            m1 += dxhat[c];
            m2 += dxhat[c] * xhat[r * d + c];
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          for (std::size_t c = 0; c < d; ++c) {
            gx[r * d + c] += rstd[r] * (dxhat[c] - m1 - xhat[r * d + c] * m2);
          }
        }
      });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() < 1 || x.shape().back() == 0) throw DimensionError("softmax: empty last axis");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  const auto xv = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += (out[r * n + c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= z;
  }
  Node* xn = x.node();
  return Tensor::from_op("softmax", x.shape(), out, {x}, [xn, n, rows, y = out](Node& self) {
    if (!wants(xn)) return;
    auto& gx = xn->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += self.grad[r * n + c] * y[r * n + c];
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += y[r * n + c] * (self.grad[r * n + c] - dot);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy", "logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(batch) + " rows");
  }
  const auto xv = logits.data();
  std::vector<double> probs(xv.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ArgumentError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    const double* row = xv.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] = std::exp(row[c] - lse);
    loss += lse - row[label];
  }
  loss /= static_cast<double>(batch);
  Node* xn = logits.node();
  std::vector<int> lab(labels.begin(), labels.end());
  return Tensor::from_op("cross_entropy", {}, {loss}, {logits},
                         [xn, batch, classes, probs = std::move(probs), lab = std::move(lab)](Node& self) {
                           if (!wants(xn)) return;
                           auto& gx = xn->ensure_grad();
                           const double g = self.grad[0] / static_cast<double>(batch);
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t c = 0; c < classes; ++c) {
                               const double target = static_cast<int>(c) == lab[b] ? 1.0 : 0.0;
                               gx[b * classes + c] += g * (probs[b * classes + c] - target);
                             }
                           }
                         });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, double scale,
                 std::span<const std::uint8_t> key_valid) {
  require_rank(q, 3, "attention", "query");
  require_rank(k, 3, "attention", "key");
  require_rank(v, 3, "attention", "value");
  const std::size_t batch = q.dim(0), nq = q.dim(1), dk = q.dim(2);
  const std::size_t nk = k.dim(1), dv = v.dim(2);
  if (k.dim(0) != batch || v.dim(0) != batch || k.dim(2) != dk || v.dim(1) != nk) {
    throw DimensionError("attention: incompatible shapes Q" + shape_string(q.shape()) + " K" +
                         shape_string(k.shape()) + " V" + shape_string(v.shape()));
  }
  if (heads == 0 || dk % heads != 0 || dv % heads != 0) {
    throw DimensionError("attention: " + std::to_string(heads) + " heads do not divide key dim " +
                         std::to_string(dk) + " / value dim " + std::to_string(dv));
  }
  check_mask(key_valid, batch, nk, "attention");
  const std::size_t hk = dk / heads, hv = dv / heads;
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();

  std::vector<double> out(batch * nq * dv);
  std::vector<double> probs(batch * heads * nq * nk);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      StridedC qm(qd + b * nq * dk + h * hk, nq, hk, Eigen::OuterStride<>(dk));
      StridedC km(kd + b * nk * dk + h * hk, nk, hk, Eigen::OuterStride<>(dk));
      StridedC vm(vd + b * nk * dv + h * hv, nk, hv, Eigen::OuterStride<>(dv));
      Map p(probs.data() + (b * heads + h) * nq * nk, nq, nk);
      p.noalias() = (qm * km.transpose()) * scale;
      for (std::size_t i = 0; i < nq; ++i) {
        double mx = kNegInf;
        for (std::size_t j = 0; j < nk; ++j) {
          if (!is_valid(key_valid, b * nk + j)) p(i, j) = kNegInf;
          mx = std::max(mx, p(i, j));
        }
        if (mx == kNegInf) throw ArgumentError("attention: every key is masked for batch item " + std::to_string(b));
        double z = 0.0;
        for (std::size_t j = 0; j < nk; ++j) z += (p(i, j) = std::exp(p(i, j) - mx));
        for (std::size_t j = 0; j < nk; ++j) p(i, j) /= z;
      }
      Strided om(out.data() + b * nq * dv + h * hv, nq, hv, Eigen::OuterStride<>(dv));
      om.noalias() = p * vm;
    }
  }

  Node* qn = q.node();
  Node* kn = k.node();
  Node* vn = v.node();
  return Tensor::from_op(
      "attention", {batch, nq, dv}, std::move(out), {q, k, v},
      [qn, kn, vn, batch, heads, nq, nk, dk, dv, hk, hv, scale, probs = std::move(probs)](Node& self) {
        double* gq = wants(qn) ? qn->ensure_grad().data() : nullptr;
        double* gk = wants(kn) ? kn->ensure_grad().data() : nullptr;
        double* gv = wants(vn) ? vn->ensure_grad().data() : nullptr;
        RowMat dp(nq, nk);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            MapC p(probs.data() + (b * heads + h) * nq * nk, nq, nk);
            StridedC dout(self.grad.data() + b * nq * dv + h * hv, nq, hv, Eigen::OuterStride<>(dv));
            StridedC vm(vn->value.data() + b * nk * dv + h * hv, nk, hv, Eigen::OuterStride<>(dv));
            if (gv) {
              Strided(gv + b * nk * dv + h * hv, nk, hv, Eigen::OuterStride<>(dv)).noalias() += p.transpose() * dout;
            }
            if (!gq && !gk) continue;
            dp.noalias() = dout * vm.transpose();
            // softmax backward, row by row
            for (std::size_t i = 0; i < nq; ++i) {
              double dot = 0.0;
              for (std::size_t j = 0; j < nk; ++j) dot += dp(i, j) * p(i, j);
              for (std::size_t j = 0; j < nk; ++j) dp(i, j) = p(i, j) * (dp(i, j) - dot) * scale;
            }
            StridedC qm(qn->value.data() + b * nq * dk + h * hk, nq, hk, Eigen::OuterStride<>(dk));
            StridedC km(kn->value.data() + b * nk * dk + h * hk, nk, hk, Eigen::OuterStride<>(dk));
            if (gq) Strided(gq + b * nq * dk + h * hk, nq, hk, Eigen::OuterStride<>(dk)).noalias() += dp * km;
            if (gk) {
              Strided(gk + b * nk * dk + h * hk, nk, hk, Eigen::OuterStride<>(dk)).noalias() += dp.transpose() * qm;
            }
          }
        }
      });
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale) {
  require_rank(q, 2, "scaled_dot_attention", "Q");
  require_rank(k, 2, "scaled_dot_attention", "K");
  require_rank(v, 2, "scaled_dot_attention", "V");
  if (q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0)) {
    throw DimensionError("scaled_dot_attention: incompatible shapes Q" + shape_string(q.shape()) + " K" +
                         shape_string(k.shape()) + " V" + shape_string(v.shape()));
  }
  Tensor out = attention(reshape(q, {1, q.dim(0), q.dim(1)}), reshape(k, {1, k.dim(0), k.dim(1)}),
                         reshape(v, {1, v.dim(0), v.dim(1)}), 1, scale);
  return reshape(out, {q.dim(0), v.dim(1)});
}

Tensor modulate(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require_rank(x, 3, "modulate", "features");
  const std::size_t batch = x.dim(0), frames = x.dim(1), d = x.dim(2);
  for (const Tensor* p : {&gamma, &beta}) {
    if (p->rank() != 2 || p->dim(0) != batch || p->dim(1) != d) {
      throw DimensionError("modulate: modulation " + shape_string(p->shape()) + " does not fit features " +
                           shape_string(x.shape()));
    }
  }
  const auto xv = x.data(), gv = gamma.data(), bv = beta.data();
  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < frames; ++n) {
      const std::size_t base = (b * frames + n) * d;
      for (std::size_t c = 0; c < d; ++c) out[base + c] = gv[b * d + c] * xv[base + c] + bv[b * d + c];
    }
  }
  Node* xn = x.node();
  Node* gn = gamma.node();
  Node* bn = beta.node();
  return Tensor::from_op("modulate", x.shape(), std::move(out), {x, gamma, beta},
                         [xn, gn, bn, batch, frames, d](Node& self) {
                           double* gx = wants(xn) ? xn->ensure_grad().data() : nullptr;
                           double* gg = wants(gn) ? gn->ensure_grad().data() : nullptr;
                           double* gb = wants(bn) ? bn->ensure_grad().data() : nullptr;
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t n = 0; n < frames; ++n) {
                               const std::size_t base = (b * frames + n) * d;
                               for (std::size_t c = 0; c < d; ++c) {
                                 const double dy = self.grad[base + c];
                                 if (gx) gx[base + c] += dy * gn->value[b * d + c];
                                 if (gg) gg[b * d + c] += dy * xn->value[base + c];
                                 if (gb) gb[b * d + c] += dy;
                               }
                             }
                           }
                         });
}

Tensor add_frames(const Tensor& x, const Tensor& v) {
  require_rank(x, 3, "add_frames", "features");
  const std::size_t batch = x.dim(0), frames = x.dim(1), d = x.dim(2);
  if (v.rank() != 2 || v.dim(0) != batch || v.dim(1) != d) {
    throw DimensionError("add_frames: " + shape_string(v.shape()) + " does not broadcast over " +
                         shape_string(x.shape()));
  }
  const auto xv = x.data(), vv = v.data();
  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < frames; ++n) {
      const std::size_t base = (b * frames + n) * d;
      for (std::size_t c = 0; c < d; ++c) out[base + c] = xv[base + c] + vv[b * d + c];
    }
  }
  Node* xn = x.node();
  Node* vn = v.node();
  return Tensor::from_op("add_frames", x.shape(), std::move(out), {x, v}, [xn, vn, batch, frames, d](Node& self) {
    if (wants(xn)) {
      auto& g = xn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(vn)) {
      auto& g = vn->ensure_grad();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t n = 0; n < frames; ++n) {
          for (std::size_t c = 0; c < d; ++c) g[b * d + c] += self.grad[(b * frames + n) * d + c];
        }
      }
    }
  });
}

Tensor add_positional(const Tensor& x, const Tensor& table) {
  require_rank(x, 3, "add_positional", "features");
  require_rank(table, 2, "add_positional", "table");
  const std::size_t batch = x.dim(0), frames = x.dim(1), d = x.dim(2);
  if (table.dim(1) != d || table.dim(0) < frames) {
    throw DimensionError("add_positional: table " + shape_string(table.shape()) + " cannot cover " +
                         shape_string(x.shape()));
  }
  const auto xv = x.data(), tv = table.data();
  std::vector<double> out(x.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < frames * d; ++i) out[b * frames * d + i] = xv[b * frames * d + i] + tv[i];
  }
  Node* xn = x.node();
  Node* tn = table.node();
  return Tensor::from_op("add_positional", x.shape(), std::move(out), {x, table},
                         [xn, tn, batch, frames, d](Node& self) {
                           if (wants(xn)) {
                             auto& g = xn->ensure_grad();
                             for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                           }
                           if (wants(tn)) {
                             auto& g = tn->ensure_grad();
                             for (std::size_t b = 0; b < batch; ++b) {
                               for (std::size_t i = 0; i < frames * d; ++i) g[i] += self.grad[b * frames * d + i];
                             }
                           }
                         });
}

Tensor concat_tokens(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "concat_tokens", "first operand");
  require_rank(b, 3, "concat_tokens", "second operand");
  const std::size_t batch = a.dim(0), na = a.dim(1), nb = b.dim(1), d = a.dim(2);
  if (b.dim(0) != batch || b.dim(2) != d) {
    throw DimensionError("concat_tokens: " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(batch * (na + nb) * d);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    std::copy_n(av.data() + bi * na * d, na * d, out.data() + bi * (na + nb) * d);
    std::copy_n(bv.data() + bi * nb * d, nb * d, out.data() + bi * (na + nb) * d + na * d);
  }
  Node* an = a.node();
  Node* bn = b.node();
  return Tensor::from_op("concat_tokens", {batch, na + nb, d}, std::move(out), {a, b},
                         [an, bn, batch, na, nb, d](Node& self) {
                           for (std::size_t bi = 0; bi < batch; ++bi) {
                             const double* src = self.grad.data() + bi * (na + nb) * d;
                             if (wants(an)) {
                               double* g = an->ensure_grad().data() + bi * na * d;
                               for (std::size_t i = 0; i < na * d; ++i) g[i] += src[i];
                             }
                             if (wants(bn)) {
                               double* g = bn->ensure_grad().data() + bi * nb * d;
                               for (std::size_t i = 0; i < nb * d; ++i) g[i] += src[na * d + i];
                             }
                           }
                         });
}

Tensor slice_tokens(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank(x, 3, "slice_tokens", "input");
  const std::size_t batch = x.dim(0), n = x.dim(1), d = x.dim(2);
  if (start + count > n) {
    throw DimensionError("slice_tokens: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(x.shape()));
  }
  const auto xv = x.data();
  std::vector<double> out(batch * count * d);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(xv.data() + (b * n + start) * d, count * d, out.data() + b * count * d);
  }
  Node* xn = x.node();
  return Tensor::from_op("slice_tokens", {batch, count, d}, std::move(out), {x},
                         [xn, batch, n, d, start, count](Node& self) {
                           if (!wants(xn)) return;
                           auto& g = xn->ensure_grad();
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t i = 0; i < count * d; ++i) {
                               g[(b * n + start) * d + i] += self.grad[b * count * d + i];
                             }
                           }
                         });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  Node* xn = x.node();
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::from_op("reshape", std::move(shape), std::move(out), {x}, [xn](Node& self) {
    if (!wants(xn)) return;
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_rank(table, 2, "embedding", "table");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  const auto tv = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows) {
      throw ArgumentError("embedding: index " + std::to_string(ids[i]) + " outside [0, " + std::to_string(rows) +
                          ")");
    }
    std::copy_n(tv.data() + ids[i] * d, d, out.data() + i * d);
  }
  Node* tn = table.node();
  std::vector<int> idx(ids.begin(), ids.end());
  return Tensor::from_op("embedding", {ids.size(), d}, std::move(out), {table},
                         [tn, d, idx = std::move(idx)](Node& self) {
                           if (!wants(tn)) return;
                           auto& g = tn->ensure_grad();
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                             for (std::size_t c = 0; c < d; ++c) g[idx[i] * d + c] += self.grad[i * d + c];
                           }
                         });
}

Tensor masked_mean_frames(const Tensor& x, std::span<const std::uint8_t> valid) {
  require_rank(x, 3, "masked_mean_frames", "input");
  const std::size_t batch = x.dim(0), frames = x.dim(1), d = x.dim(2);
  check_mask(valid, batch, frames, "masked_mean_frames");
  std::vector<double> weights(batch * frames, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t count = 0;
    for (std::size_t n = 0; n < frames; ++n) count += is_valid(valid, b * frames + n) ? 1 : 0;
    if (count == 0) throw ArgumentError("masked_mean_frames: batch item " + std::to_string(b) + " has no valid frames");
    for (std::size_t n = 0; n < frames; ++n) {
      if (is_valid(valid, b * frames + n)) weights[b * frames + n] = 1.0 / static_cast<double>(count);
    }
  }
  const auto xv = x.data();
  std::vector<double> out(batch * d, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < frames; ++n) {
      const double w = weights[b * frames + n];
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) out[b * d + c] += w * xv[(b * frames + n) * d + c];
    }
  }
  Node* xn = x.node();
  return Tensor::from_op("masked_mean_frames", {batch, d}, std::move(out), {x},
                         [xn, batch, frames, d, weights = std::move(weights)](Node& self) {
                           if (!wants(xn)) return;
                           auto& g = xn->ensure_grad();
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t n = 0; n < frames; ++n) {
                               const double w = weights[b * frames + n];
                               for (std::size_t c = 0; c < d; ++c) g[(b * frames + n) * d + c] += w * self.grad[b * d + c];
                             }
                           }
                         });
}

Tensor time_collapse(const Tensor& x, const Tensor& w, std::span<const std::uint8_t> valid) {
  require_rank(x, 3, "time_collapse", "input");
  require_rank(w, 1, "time_collapse", "weights");
  const std::size_t batch = x.dim(0), frames = x.dim(1), f = x.dim(2);
  if (w.dim(0) < frames) {
    throw DimensionError("time_collapse: " + std::to_string(frames) + " frames exceed weight length " +
                         std::to_string(w.dim(0)));
  }
  check_mask(valid, batch, frames, "time_collapse");
  const auto xv = x.data(), wv = w.data();
  std::vector<double> out(batch * f, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < frames; ++n) {
      if (!is_valid(valid, b * frames + n)) continue;
      for (std::size_t c = 0; c < f; ++c) out[b * f + c] += wv[n] * xv[(b * frames + n) * f + c];
    }
  }
  Node* xn = x.node();
  Node* wn = w.node();
  std::vector<std::uint8_t> mask(valid.begin(), valid.end());
  return Tensor::from_op("time_collapse", {batch, f}, std::move(out), {x, w},
                         [xn, wn, batch, frames, f, mask = std::move(mask)](Node& self) {
                           double* gx = wants(xn) ? xn->ensure_grad().data() : nullptr;
                           double* gw = wants(wn) ? wn->ensure_grad().data() : nullptr;
                           for (std::size_t b = 0; b < batch; ++b) {
                             for (std::size_t n = 0; n < frames; ++n) {
                               if (!is_valid(mask, b * frames + n)) continue;
                               const std::size_t base = (b * frames + n) * f;
                               for (std::size_t c = 0; c < f; ++c) {
                                 const double dy = self.grad[b * f + c];
                                 if (gx) gx[base + c] += wn->value[n] * dy;
                                 if (gw) gw[n] += dy * xn->value[base + c];
                               }
                             }
                           }
                         });
}

Tensor scale_batch(const Tensor& x, std::span<const double> coeffs) {
  if (x.rank() < 1 || x.dim(0) != coeffs.size()) {
    throw DimensionError("scale_batch: " + std::to_string(coeffs.size()) + " coefficients for " +
                         shape_string(x.shape()));
  }
  const std::size_t per = coeffs.empty() ? 0 : x.numel() / coeffs.size();
  const auto xv = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = coeffs[i / per] * xv[i];
  Node* xn = x.node();
  std::vector<double> c(coeffs.begin(), coeffs.end());
  return Tensor::from_op("scale_batch", x.shape(), std::move(out), {x}, [xn, per, c = std::move(c)](Node& self) {
    if (!wants(xn)) return;
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c[i / per] * self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Node* xn = x.node();
  return Tensor::from_op("sum", {}, {s}, {x}, [xn](Node& self) {
    if (!wants(xn)) return;
    auto& g = xn->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor masked_mse(const Tensor& pred, const Tensor& target, std::span<const std::uint8_t> valid) {
  require_same(pred, target, "masked_mse");
  require_rank(pred, 3, "masked_mse", "prediction");
  const std::size_t batch = pred.dim(0), frames = pred.dim(1), f = pred.dim(2);
  check_mask(valid, batch, frames, "masked_mse");
  const std::size_t count = valid_count(valid, batch * frames);
  if (count == 0) throw ArgumentError("masked_mse: every frame is masked");
  const double denom = static_cast<double>(count * f);
  const auto pv = pred.data(), tv = target.data();
  double acc = 0.0;
  for (std::size_t r = 0; r < batch * frames; ++r) {
    if (!is_valid(valid, r)) continue;
    for (std::size_t c = 0; c < f; ++c) {
      const double e = pv[r * f + c] - tv[r * f + c];
      acc += e * e;
    }
  }
  Node* pn = pred.node();
  Node* tn = target.node();
  std::vector<std::uint8_t> mask(valid.begin(), valid.end());
  return Tensor::from_op("masked_mse", {}, {acc / denom}, {pred, target},
                         [pn, tn, f, denom, rows = batch * frames, mask = std::move(mask)](Node& self) {
                           double* gp = wants(pn) ? pn->ensure_grad().data() : nullptr;
                           double* gt = wants(tn) ? tn->ensure_grad().data() : nullptr;
                           const double k = 2.0 * self.grad[0] / denom;
                           for (std::size_t r = 0; r < rows; ++r) {
                             if (!is_valid(mask, r)) continue;
                             for (std::size_t c = 0; c < f; ++c) {
                               const double e = pn->value[r * f + c] - tn->value[r * f + c];
                               if (gp) gp[r * f + c] += k * e;
                               if (gt) gt[r * f + c] -= k * e;
                             }
                           }
                         });
}

Tensor masked_frame_norm(const Tensor& pred, const Tensor& target, std::span<const std::uint8_t> valid) {
  require_same(pred, target, "masked_frame_norm");
  require_rank(pred, 3, "masked_frame_norm", "prediction");
  const std::size_t batch = pred.dim(0), frames = pred.dim(1), f = pred.dim(2);
  check_mask(valid, batch, frames, "masked_frame_norm");
  const std::size_t count = valid_count(valid, batch * frames);
  if (count == 0) throw ArgumentError("masked_frame_norm: every frame is masked");
  const auto pv = pred.data(), tv = target.data();
  std::vector<double> norms(batch * frames, 0.0);
  double acc = 0.0;
  for (std::size_t r = 0; r < batch * frames; ++r) {
    if (!is_valid(valid, r)) continue;
    double s = 0.0;
    for (std::size_t c = 0; c < f; ++c) {
      const double e = pv[r * f + c] - tv[r * f + c];
      s += e * e;
    }
    norms[r] = std::sqrt(s);
    acc += norms[r];
  }
  const double denom = static_cast<double>(count);
  Node* pn = pred.node();
  Node* tn = target.node();
  std::vector<std::uint8_t> mask(valid.begin(), valid.end());
  return Tensor::from_op(
      "masked_frame_norm", {}, {acc / denom}, {pred, target},
      [pn, tn, f, denom, rows = batch * frames, mask = std::move(mask), norms = std::move(norms)](Node& self) {
        double* gp = wants(pn) ? pn->ensure_grad().data() : nullptr;
        double* gt = wants(tn) ? tn->ensure_grad().data() : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
          // zero-norm frames take the zero subgradient
          if (!is_valid(mask, r) || norms[r] == 0.0) continue;
          const double k = self.grad[0] / (denom * norms[r]);
          for (std::size_t c = 0; c < f; ++c) {
            const double e = pn->value[r * f + c] - tn->value[r * f + c];
            if (gp) gp[r * f + c] += k * e;
            if (gt) gt[r * f + c] -= k * e;
          }
        }
      });
}

}  // namespace emog
