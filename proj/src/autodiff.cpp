#include "seaget/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seaget/errors.hpp"

namespace seaget {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, &p, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [this](const Var& v) { return requires_grad(v); });
  nodes_.push_back(Node{std::move(value), {}, nullptr, needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.size() != n.value.size() || n.grad.rows() != n.value.rows())
    n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ContractError("backward: variable belongs to another tape");
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ContractError("backward: loss must be a scalar, got " + shape_string(lv));
  if (backward_done_) throw ContractError("backward: tape already consumed");
  backward_done_ = true;
  if (!requires_grad(loss)) return;
  grad(loss)[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      // The callback may touch other nodes' gradients; ours stays put (deque).
      n.backward(*this, n.grad);
    } else if (n.param != nullptr) {
      Tensor& pg = n.param->grad;
      if (pg.size() != n.grad.size()) pg = Tensor(n.grad.rows(), n.grad.cols());
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
}

namespace ad {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes differ, " + shape_string(a) + " vs " +
                     shape_string(b));
}

void add_into(Tensor& dst, const Tensor& src, double s = 1.0) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += s * src[k];
}

Tape& tape_of(Var v) {
  if (!v.valid()) throw ContractError("autodiff: uninitialized variable");
  return v.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  Tensor out = seaget::matmul(a.value(), b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) add_into(tp.grad(a), seaget::matmul(g, tp.value(b).transposed()));
    if (tp.requires_grad(b)) add_into(tp.grad(b), seaget::matmul(tp.value(a).transposed(), g));
  });
}

Var matmul(const Tensor& a, Var b) {
  Tape& t = tape_of(b);
  const Tensor* ap = &a;
  return t.record(seaget::matmul(a, b.value()), {b}, [ap, b](Tape& tp, const Tensor& g) {
    add_into(tp.grad(b), seaget::matmul(ap->transposed(), g));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  add_into(out, b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) add_into(tp.grad(a), g);
    if (tp.requires_grad(b)) add_into(tp.grad(b), g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  add_into(out, b.value(), -1.0);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) add_into(tp.grad(a), g);
    if (tp.requires_grad(b)) add_into(tp.grad(b), g, -1.0);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape("hadamard", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad(a);
      const Tensor& vb = tp.value(b);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * vb[k];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad(b);
      const Tensor& va = tp.value(a);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * va[k];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= s;
  return t.record(std::move(out), {a}, [a, s](Tape& tp, const Tensor& g) {
    add_into(tp.grad(a), g, s);
  });
}

Var add_bias(Var x, Var bias) {
  Tape& t = tape_of(x);
  const Tensor& b = bias.value();
  if (b.rows() != 1 || b.cols() != x.cols())
    throw ShapeError("add_bias: bias " + shape_string(b) + " does not fit " +
                     shape_string(x.value()));
  Tensor out = x.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b[c];
  return t.record(std::move(out), {x, bias}, [x, bias](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(x)) add_into(tp.grad(x), g);
    if (tp.requires_grad(bias)) {
      Tensor& gb = tp.grad(bias);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
    }
  });
}

Var leaky_relu(Var x, double slope) {
  Tape& t = tape_of(x);
  Tensor out = x.value();
  for (std::size_t k = 0; k < out.size(); ++k)
    if (out[k] < 0.0) out[k] *= slope;
  return t.record(std::move(out), {x}, [x, slope](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    const Tensor& v = tp.value(x);
    for (std::size_t k = 0; k < g.size(); ++k) gx[k] += v[k] < 0.0 ? slope * g[k] : g[k];
  });
}

Var relu(Var x) {
  Tape& t = tape_of(x);
  Tensor out = x.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::max(out[k], 0.0);
  return t.record(std::move(out), {x}, [x](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    const Tensor& v = tp.value(x);
    for (std::size_t k = 0; k < g.size(); ++k)
      if (v[k] > 0.0) gx[k] += g[k];
  });
}

Var periodic(Var x) {
  Tape& t = tape_of(x);
  Tensor out = x.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 1; c < out.cols(); ++c) out(r, c) = std::sin(out(r, c));
  return t.record(std::move(out), {x}, [x](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    const Tensor& v = tp.value(x);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      gx(r, 0) += g(r, 0);
      for (std::size_t c = 1; c < g.cols(); ++c) gx(r, c) += g(r, c) * std::cos(v(r, c));
    }
  });
}

Var transpose(Var x) {
  Tape& t = tape_of(x);
  return t.record(x.value().transposed(), {x}, [x](Tape& tp, const Tensor& g) {
    add_into(tp.grad(x), g.transposed());
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + off);
    off += v.cols();
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [in](Tape& tp, const Tensor& g) {
    std::size_t o = 0;
    for (const Var& p : in) {
      const std::size_t w = tp.value(p).cols();
      if (tp.requires_grad(p)) {
        Tensor& gp = tp.grad(p);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) gp(r, c) += g(r, o + c);
      }
      o += w;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t cols = parts[0].cols();
  std::vector<double> values;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    values.insert(values.end(), p.value().values().begin(), p.value().values().end());
    rows += p.rows();
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return t.record(Tensor(rows, cols, std::move(values)), parts, [in](Tape& tp, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : in) {
      const std::size_t n = tp.value(p).size();
      if (tp.requires_grad(p)) {
        Tensor& gp = tp.grad(p);
        for (std::size_t k = 0; k < n; ++k) gp[k] += g[off + k];
      }
      off += n;
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  if (begin + count > v.cols()) throw ShapeError("slice_cols: range exceeds " + shape_string(v));
  Tensor out(v.rows(), count);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = v(r, begin + c);
  return t.record(std::move(out), {x}, [x, begin](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, begin + c) += g(r, c);
  });
}

Var gather_rows(Var x, std::span<const std::size_t> ids) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  Tensor out(ids.size(), v.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= v.rows())
      throw ContractError("gather_rows: id " + std::to_string(ids[i]) + " out of range for " +
                          shape_string(v));
    std::copy(v.row(ids[i]).begin(), v.row(ids[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return t.record(std::move(out), {x}, [x, idx](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < g.cols(); ++c) gx(idx[i], c) += g(i, c);
  });
}

Var outer_sum(Var col, Var row) {
  Tape& t = tape_of(col);
  const Tensor& cv = col.value();
  const Tensor& rv = row.value();
  if (cv.cols() != 1 || rv.rows() != 1)
    throw ShapeError("outer_sum: expects column and row vectors, got " + shape_string(cv) +
                     " and " + shape_string(rv));
  Tensor out(cv.rows(), rv.cols());
  for (std::size_t i = 0; i < cv.rows(); ++i)
    for (std::size_t j = 0; j < rv.cols(); ++j) out(i, j) = cv[i] + rv[j];
  return t.record(std::move(out), {col, row}, [col, row](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(col)) {
      Tensor& gc = tp.grad(col);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gc[i] += g(i, j);
    }
    if (tp.requires_grad(row)) {
      Tensor& gr = tp.grad(row);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
    }
  });
}

Var softmax_rows(Var s, std::span<const std::uint8_t> allowed) {
  Tape& t = tape_of(s);
  const Tensor& v = s.value();
  if (!allowed.empty() && allowed.size() != v.size())
    throw ShapeError("softmax_rows: mask size does not match " + shape_string(v));
  Tensor out(v.rows(), v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < v.cols(); ++c)
      if (allowed.empty() || allowed[r * v.cols() + c]) mx = std::max(mx, v(r, c));
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double z = 0.0;
    for (std::size_t c = 0; c < v.cols(); ++c) {
      if (!allowed.empty() && !allowed[r * v.cols() + c]) continue;
      out(r, c) = std::exp(v(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, c) /= z;
  }
  Tensor y = out;
  return t.record(std::move(out), {s}, [s, y = std::move(y)](Tape& tp, const Tensor& g) {
    Tensor& gs = tp.grad(s);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) gs(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  const std::size_t d = v.cols();
  if (d < 2) throw ContractError("layer_norm: needs at least 2 features");
  if (gain.value().size() != d || bias.value().size() != d)
    throw ShapeError("layer_norm: gain/bias width differs from " + shape_string(v));
  Tensor xhat(v.rows(), d);
  std::vector<double> inv_std(v.rows());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double mean = 0.0;
    for (double a : v.row(r)) mean += a;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double a : v.row(r)) var += (a - mean) * (a - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) xhat(r, c) = (v(r, c) - mean) * inv_std[r];
  }
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(v.rows(), d);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) = xhat(r, c) * gv[c] + bv[c];
  return t.record(std::move(out), {x, gain, bias},
                  [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Tape& tp, const Tensor& g) {
                    const std::size_t n = g.cols();
                    const Tensor& gv2 = tp.value(gain);
                    if (tp.requires_grad(gain) || tp.requires_grad(bias)) {
                      Tensor* gg = tp.requires_grad(gain) ? &tp.grad(gain) : nullptr;
                      Tensor* gb = tp.requires_grad(bias) ? &tp.grad(bias) : nullptr;
                      for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < n; ++c) {
                          if (gg) (*gg)[c] += g(r, c) * xhat(r, c);
                          if (gb) (*gb)[c] += g(r, c);
                        }
                    }
                    if (!tp.requires_grad(x)) return;
                    Tensor& gx = tp.grad(x);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      double sum_g = 0.0;
                      double sum_gx = 0.0;
                      for (std::size_t c = 0; c < n; ++c) {
                        const double gh = g(r, c) * gv2[c];
                        sum_g += gh;
                        sum_gx += gh * xhat(r, c);
                      }
                      const double dn = static_cast<double>(n);
                      for (std::size_t c = 0; c < n; ++c) {
                        const double gh = g(r, c) * gv2[c];
                        gx(r, c) += inv_std[r] * (gh - sum_g / dn - xhat(r, c) * sum_gx / dn);
                      }
                    }
                  });
}

Var dropout(Var x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  Tape& t = tape_of(x);
  Tensor keep(x.rows(), x.cols());
  const double s = 1.0 / (1.0 - p);
  for (std::size_t k = 0; k < keep.size(); ++k) keep[k] = rng.uniform() >= p ? s : 0.0;
  Tensor out = x.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= keep[k];
  return t.record(std::move(out), {x}, [x, keep = std::move(keep)](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * keep[k];
  });
}

Var spmm(const CsrMatrix& a, Var x) {
  Tape& t = tape_of(x);
  const CsrMatrix* ap = &a;
  return t.record(seaget::spmm(a, x.value()), {x}, [ap, x](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    const std::size_t n = g.cols();
    for (std::size_t r = 0; r < ap->rows; ++r)
      for (std::size_t k = ap->row_ptr[r]; k < ap->row_ptr[r + 1]; ++k) {
        const double w = ap->values[k];
        double* dst = gx.data() + ap->col_idx[k] * n;
        const double* src = g.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += w * src[j];
      }
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return t.record(Tensor(1, 1, s), {x}, [x](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g[0];
  });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets,
                  std::span<const std::uint8_t> valid) {
  Tape& t = tape_of(logits);
  const Tensor& z = logits.value();
  if (targets.size() != z.rows() || valid.size() != z.rows())
    throw ShapeError("cross_entropy: targets/mask length differs from " + shape_string(z));
  std::size_t count = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (!valid[r]) continue;
    if (targets[r] >= z.cols())
      throw ContractError("cross_entropy: target " + std::to_string(targets[r]) +
                          " out of range for " + std::to_string(z.cols()) + " classes");
    ++count;
  }
  if (count == 0) throw DegenerateError("cross_entropy: every position is masked");
  Tensor probs(z.rows(), z.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (!valid[r]) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : z.row(r)) mx = std::max(mx, v);
    double s = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) {
      probs(r, c) = std::exp(z(r, c) - mx);
      s += probs(r, c);
    }
    for (std::size_t c = 0; c < z.cols(); ++c) probs(r, c) /= s;
    total += (mx + std::log(s)) - z(r, targets[r]);
  }
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  Mask vm(valid.begin(), valid.end());
  return t.record(Tensor(1, 1, total * inv), {logits},
                  [logits, probs = std::move(probs), tg = std::move(tg), vm = std::move(vm), inv](
                      Tape& tp, const Tensor& g) {
                    Tensor& gz = tp.grad(logits);
                    const double s = g[0] * inv;
                    for (std::size_t r = 0; r < probs.rows(); ++r) {
                      if (!vm[r]) continue;
                      for (std::size_t c = 0; c < probs.cols(); ++c) gz(r, c) += s * probs(r, c);
                      gz(r, tg[r]) -= s;
                    }
                  });
}

Var mse(Var pred, const Tensor& target, std::span<const std::uint8_t> valid) {
  Tape& t = tape_of(pred);
  const Tensor& p = pred.value();
  require_same_shape("mse", p, target);
  if (valid.size() != p.size()) throw ShapeError("mse: mask length differs from " + shape_string(p));
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!valid[k]) continue;
    ++count;
    total += (p[k] - target[k]) * (p[k] - target[k]);
  }
  if (count == 0) throw DegenerateError("mse: every position is masked");
  const double inv = 1.0 / static_cast<double>(count);
  Mask vm(valid.begin(), valid.end());
  return t.record(Tensor(1, 1, total * inv), {pred},
                  [pred, target, vm = std::move(vm), inv](Tape& tp, const Tensor& g) {
                    Tensor& gp = tp.grad(pred);
                    const Tensor& pv = tp.value(pred);
                    for (std::size_t k = 0; k < pv.size(); ++k)
                      if (vm[k]) gp[k] += g[0] * 2.0 * inv * (pv[k] - target[k]);
                  });
}

}  // namespace ad
}  // namespace seaget
