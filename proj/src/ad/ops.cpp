#include "voxport/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "voxport/errors.hpp"

namespace voxport::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC as_matrix(const Tensor& t) {
  return MapC(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
Map as_matrix(Tensor& t) {
  return Map(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                     " differ");
  }
}

double apply(Activation act, double x) {
  switch (act) {
    case Activation::none: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::leaky_relu: return x > 0.0 ? x : kLeakySlope * x;
    case Activation::sigmoid:
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

// Derivative expressed through the activation's output.
double derivative_from_output(Activation act, double y) {
  switch (act) {
    case Activation::none: return 1.0;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return y > 0.0 ? 1.0 : kLeakySlope;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::tanh: return 1.0 - y * y;
  }
  return 1.0;
}

void note_signs(Tape& tape, Activation act, const Tensor& y) {
  if (!tape.tracking_branches() || (act != Activation::relu && act != Activation::leaky_relu)) return;
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    word = (word << 1) | (y[i] > 0.0 ? 1u : 0u);
    if (i % 64 == 63) {
      tape.note_branch(word);
      word = 0;
    }
  }
  tape.note_branch(word);
}

Shape replace_last(Shape s, std::size_t last) {
  if (s.empty()) s.push_back(last);
  else s.back() = last;
  return s;
}

}  // namespace

Var matmul(const Var& x, const Var& w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 2 || xv.rank() < 1 || xv.cols() != wv.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + to_string(xv.shape()) + " by " + to_string(wv.shape()));
  }
  Tensor out(replace_last(xv.shape(), wv.dim(1)));
  as_matrix(out).noalias() = as_matrix(xv) * as_matrix(wv);
  return x.tape().make(std::move(out), {x, w}, [](detail::Node& n) {
    auto& xn = *n.inputs[0];
    auto& wn = *n.inputs[1];
    const auto g = as_matrix(static_cast<const Tensor&>(n.grad));
    if (xn.requires_grad) as_matrix(xn.ensure_grad()).noalias() += g * as_matrix(static_cast<const Tensor&>(wn.value)).transpose();
    if (wn.requires_grad) as_matrix(wn.ensure_grad()).noalias() += as_matrix(static_cast<const Tensor&>(xn.value)).transpose() * g;
  });
}

Var dense(const Var& x, const Var& w, const Var& b, Activation act) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (wv.rank() != 2 || xv.rank() < 1 || xv.cols() != wv.dim(0) || bv.size() != wv.dim(1)) {
    throw ShapeError("dense: input " + to_string(xv.shape()) + " incompatible with weights " +
                     to_string(wv.shape()) + " and bias " + to_string(bv.shape()));
  }
  Tensor out(replace_last(xv.shape(), wv.dim(1)));
  auto om = as_matrix(out);
  om.noalias() = as_matrix(xv) * as_matrix(wv);
  const Eigen::Map<const Eigen::RowVectorXd> bias(bv.data(), static_cast<Eigen::Index>(bv.size()));
  om.rowwise() += bias;
  if (act != Activation::none) {
    for (auto& v : out.storage()) v = apply(act, v);
  }
  note_signs(x.tape(), act, out);
  return x.tape().make(std::move(out), {x, w, b}, [act](detail::Node& n) {
    auto& xn = *n.inputs[0];
    auto& wn = *n.inputs[1];
    auto& bn = *n.inputs[2];
    Tensor pre = n.grad;
    if (act != Activation::none) {
      for (std::size_t i = 0; i < pre.size(); ++i) pre[i] *= derivative_from_output(act, n.value[i]);
    }
    const auto g = as_matrix(static_cast<const Tensor&>(pre));
    if (xn.requires_grad) as_matrix(xn.ensure_grad()).noalias() += g * as_matrix(static_cast<const Tensor&>(wn.value)).transpose();
    if (wn.requires_grad) as_matrix(wn.ensure_grad()).noalias() += as_matrix(static_cast<const Tensor&>(xn.value)).transpose() * g;
    if (bn.requires_grad) {
      Eigen::Map<Eigen::RowVectorXd> db(bn.ensure_grad().data(), static_cast<Eigen::Index>(bn.value.size()));
      db += g.colwise().sum();
    }
  });
}

Var activate(const Var& x, Activation act) {
  Tensor out = x.value();
  for (auto& v : out.storage()) v = apply(act, v);
  note_signs(x.tape(), act, out);
  return x.tape().make(std::move(out), {x}, [act](detail::Node& n) {
    auto& xn = *n.inputs[0];
    if (!xn.requires_grad) return;
    Tensor& g = xn.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * derivative_from_output(act, n.value[i]);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return a.tape().make(std::move(out), {a, b}, [](detail::Node& n) {
    for (auto& in : n.inputs) {
      if (in->requires_grad) in->ensure_grad() += n.grad;
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().make(std::move(out), {a, b}, [](detail::Node& n) {
    if (n.inputs[0]->requires_grad) n.inputs[0]->ensure_grad() += n.grad;
    if (n.inputs[1]->requires_grad) {
      Tensor& g = n.inputs[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().make(std::move(out), {a, b}, [](detail::Node& n) {
    auto& an = *n.inputs[0];
    auto& bn = *n.inputs[1];
    if (an.requires_grad) {
      Tensor& g = an.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      Tensor& g = bn.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * an.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= s;
  return a.tape().make(std::move(out), {a}, [s](detail::Node& n) {
    auto& an = *n.inputs[0];
    if (!an.requires_grad) return;
    Tensor& g = an.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.value().size() != 1) throw ShapeError("mul_scalar: scale must hold one value, got " + to_string(s.shape()));
  const double k = s.value()[0];
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= k;
  return a.tape().make(std::move(out), {a, s}, [](detail::Node& n) {
    auto& an = *n.inputs[0];
    auto& sn = *n.inputs[1];
    const double k = sn.value[0];
    if (an.requires_grad) {
      Tensor& g = an.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * n.grad[i];
    }
    if (sn.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * an.value[i];
      sn.ensure_grad()[0] += acc;
    }
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  const std::size_t rows = parts[0].value().rows();
  std::size_t width = 0;
  for (const auto& p : parts) {
    if (p.value().rows() != rows || p.shape().size() != parts[0].shape().size()) {
      throw ShapeError("concat: " + to_string(p.shape()) + " does not line up with " + to_string(parts[0].shape()));
    }
    width += p.value().cols();
  }
  Tensor out(replace_last(parts[0].shape(), width));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    const std::size_t c = v.cols();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(v.data() + r * c, c, out.data() + r * width + offset);
    offset += c;
  }
  return parts[0].tape().make(std::move(out), parts, [rows, width](detail::Node& n) {
    std::size_t offset = 0;
    for (auto& in : n.inputs) {
      const std::size_t c = in->value.cols();
      if (in->requires_grad) {
        Tensor& g = in->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < c; ++j) g[r * c + j] += n.grad[r * width + offset + j];
        }
      }
      offset += c;
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  if (shape_size(shape) != x.value().size()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  Tensor out(std::move(shape), x.value().storage());
  return x.tape().make(std::move(out), {x}, [](detail::Node& n) {
    auto& xn = *n.inputs[0];
    if (!xn.requires_grad) return;
    Tensor& g = xn.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  const std::size_t r_in = xv.rows();
  Tensor out({rows.size(), c});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= r_in) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[r]) + " of " + std::to_string(r_in));
    }
    std::copy_n(xv.data() + rows[r] * c, c, out.data() + r * c);
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  return x.tape().make(std::move(out), {x}, [idx, c](detail::Node& n) {
    auto& xn = *n.inputs[0];
    if (!xn.requires_grad) return;
    Tensor& g = xn.ensure_grad();
    for (std::size_t r = 0; r < idx->size(); ++r) {
      double* dst = g.data() + (*idx)[r] * c;
      const double* src = n.grad.data() + r * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw std::invalid_argument("softmax: axis out of range for " + to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];

  Tensor out(s);
  const Tensor& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < len; ++k) m = std::max(m, xv[base + k * inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        out[base + k * inner] = std::exp(xv[base + k * inner] - m);
        z += out[base + k * inner];
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= z;
    }
  }
  return x.tape().make(std::move(out), {x}, [outer, inner, len](detail::Node& n) {
    auto& xn = *n.inputs[0];
    if (!xn.requires_grad) return;
    Tensor& g = xn.ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dotp = 0.0;
        for (std::size_t k = 0; k < len; ++k) dotp += n.grad[base + k * inner] * n.value[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t i = base + k * inner;
          g[i] += n.value[i] * (n.grad[i] - dotp);
        }
      }
    }
  });
}

Var attentive_pool(const Var& features, const Var& scores, std::size_t k) {
  require_same_shape(features, scores, "attentive_pool");
  const Tensor& f = features.value();
  const Tensor& s = scores.value();
  if (k == 0 || f.rows() % k != 0) {
    throw ShapeError("attentive_pool: " + std::to_string(f.rows()) + " rows do not split into groups of " +
                     std::to_string(k));
  }
  const std::size_t groups = f.rows() / k;
  const std::size_t d = f.cols();
  auto weights = std::make_shared<Tensor>(f.shape());
  Tensor out({groups, d});
  for (std::size_t i = 0; i < groups; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) m = std::max(m, s[(i * k + j) * d + c]);
      double z = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double e = std::exp(s[(i * k + j) * d + c] - m);
        (*weights)[(i * k + j) * d + c] = e;
        z += e;
      }
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = (i * k + j) * d + c;
        (*weights)[idx] /= z;
        acc += f[idx] * (*weights)[idx];
      }
      out.at(i, c) = acc;
    }
  }
  return features.tape().make(std::move(out), {features, scores}, [weights, groups, d, k](detail::Node& n) {
    auto& fn = *n.inputs[0];
    auto& sn = *n.inputs[1];
    const Tensor& a = *weights;
    for (std::size_t i = 0; i < groups; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        const double go = n.grad[i * d + c];
        if (fn.requires_grad) {
          Tensor& g = fn.ensure_grad();
          for (std::size_t j = 0; j < k; ++j) g[(i * k + j) * d + c] += go * a[(i * k + j) * d + c];
        }
        if (sn.requires_grad) {
          Tensor& g = sn.ensure_grad();
          double dotp = 0.0;
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t idx = (i * k + j) * d + c;
            dotp += go * fn.value[idx] * a[idx];
          }
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t idx = (i * k + j) * d + c;
            g[idx] += a[idx] * (go * fn.value[idx] - dotp);
          }
        }
      }
    }
  });
}

Var max_pool_global(const Var& x) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows();
  const std::size_t d = xv.cols();
  if (rows == 0 || xv.rank() < 2) throw std::invalid_argument("max_pool_global needs a non-empty [N, D] input");
  auto argmax = std::make_shared<std::vector<std::size_t>>(d, 0);
  Tensor out({d});
  for (std::size_t c = 0; c < d; ++c) {
    double best = xv[c];
    for (std::size_t r = 1; r < rows; ++r) {
      if (xv[r * d + c] > best) {
        best = xv[r * d + c];
        (*argmax)[c] = r;
      }
    }
    out[c] = best;
  }
  if (x.tape().tracking_branches()) {
    for (auto r : *argmax) x.tape().note_branch(r);
  }
  return x.tape().make(std::move(out), {x}, [argmax, d](detail::Node& n) {
    auto& xn = *n.inputs[0];
    if (!xn.requires_grad) return;
    Tensor& g = xn.ensure_grad();
    for (std::size_t c = 0; c < d; ++c) g[(*argmax)[c] * d + c] += n.grad[c];
  });
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return x.tape().make(Tensor::scalar(acc), {x}, [](detail::Node& n) {
    auto& xn = *n.inputs[0];
    if (!xn.requires_grad) return;
    Tensor& g = xn.ensure_grad();
    for (auto& v : g.storage()) v += n.grad[0];
  });
}

Var mean(const Var& x) {
  const auto count = static_cast<double>(std::max<std::size_t>(1, x.value().size()));
  return scale(sum(x), 1.0 / count);
}

Var mse(const Var& a, const Var& b) {
  const Var d = sub(a, b);
  return mean(mul(d, d));
}

double temporal_intensity(double s) {
  // 1 / (1 + e^s) evaluated without overflow for large |s|.
  if (s > 0.0) {
    const double e = std::exp(-s);
    return e / (1.0 + e) + 1.0;
  }
  return 1.0 / (1.0 + std::exp(s)) + 1.0;
}

Var temporal_intensity(const Var& s) {
  Tensor out = s.value();
  for (auto& v : out.storage()) v = temporal_intensity(v);
  return s.tape().make(std::move(out), {s}, [](detail::Node& n) {
    auto& sn = *n.inputs[0];
    if (!sn.requires_grad) return;
    Tensor& g = sn.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double low = n.value[i] - 1.0;  // sigma(-s)
      g[i] -= n.grad[i] * low * (1.0 - low);
    }
  });
}

Var dropout(const Var& x, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  std::bernoulli_distribution keep(1.0 - rate);
  const double kept = 1.0 / (1.0 - rate);
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep(rng) ? kept : 0.0;
    out[i] *= (*mask)[i];
  }
  return x.tape().make(std::move(out), {x}, [mask](detail::Node& n) {
    auto& xn = *n.inputs[0];
    if (!xn.requires_grad) return;
    Tensor& g = xn.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (*mask)[i];
  });
}

Var weighted_cross_entropy(const Var& logits, std::span<const int> labels, std::span<const double> class_weights) {
  const Tensor& z = logits.value();
  const std::size_t n = z.rows();
  const std::size_t c = z.cols();
  if (labels.size() != n) {
    throw std::invalid_argument("cross entropy: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " rows");
  }
  if (class_weights.size() != c) throw std::invalid_argument("cross entropy: one weight per class required");
  auto probs = std::make_shared<Tensor>(z.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= c) throw std::invalid_argument("cross entropy: label out of range");
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, z.at(i, j));
    double sumexp = 0.0;
    for (std::size_t j = 0; j < c; ++j) sumexp += std::exp(z.at(i, j) - m);
    for (std::size_t j = 0; j < c; ++j) probs->at(i, j) = std::exp(z.at(i, j) - m) / sumexp;
    loss += class_weights[y] * (std::log(sumexp) + m - z.at(i, y));
  }
  loss /= static_cast<double>(std::max<std::size_t>(n, 1));
  auto lab = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  auto w = std::make_shared<std::vector<double>>(class_weights.begin(), class_weights.end());
  return logits.tape().make(Tensor::scalar(loss), {logits}, [probs, lab, w, n, c](detail::Node& node) {
    auto& zn = *node.inputs[0];
    if (!zn.requires_grad) return;
    Tensor& g = zn.ensure_grad();
    const double scale = node.grad[0] / static_cast<double>(std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = static_cast<std::size_t>((*lab)[i]);
      const double wy = (*w)[y] * scale;
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += wy * (probs->at(i, j) - (j == y ? 1.0 : 0.0));
    }
  });
}

}  // namespace voxport::ad
