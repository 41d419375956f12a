#include "lootcrawl/nn/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace lootcrawl::nn {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const Mat<T>>;

template <typename T>
ConstMapMat<T> as_matrix(const Tensor<T>& t, int rows, int cols) {
  return ConstMapMat<T>(t.ptr(), rows, cols);
}
template <typename T>
MapMat<T> as_matrix(Tensor<T>& t, int rows, int cols) {
  return MapMat<T>(t.ptr(), rows, cols);
}

/// Rows x last-dim view of an arbitrary-rank tensor.
struct Rows2d {
  int rows;
  int cols;
};
template <typename T>
Rows2d rows_of(const Tensor<T>& t) {
  if (t.rank() == 0) return {1, 1};
  const int cols = t.shape.back();
  return {cols == 0 ? 0 : static_cast<int>(t.size() / static_cast<std::size_t>(cols)), cols};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

}  // namespace

template <typename T>
Var Tape<T>::push(Tensor<T> value, bool requires_grad, std::function<void(Tape&, int)> back) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = requires_grad && recording();
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::param(std::size_t index) {
  Node n;
  n.ref = &params_->value(index);
  if (recording()) {
    n.requires_grad = true;
    n.grad_ref = &(*sink_)[index];
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), false, nullptr);
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  const Node& n = node(v);
  return n.ref ? *n.ref : n.own;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(int id) {
  Node& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.grad_ref) return *n.grad_ref;
  if (n.grad_own.data.empty()) n.grad_own = Tensor<T>(value(Var{id}).shape);
  return n.grad_own;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) {
  return grad_buffer(v.id);
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  require(va.shape == vb.shape, "add: " + shape_string(va.shape) + " vs " + shape_string(vb.shape));
  Tensor<T> out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const auto& g = t.grad_buffer(self);
    for (Var in : {a, b}) {
      if (!t.needs(in)) continue;
      auto& d = t.grad_buffer(in.id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

template <typename T>
Var Tape<T>::relu(Var x) {
  Tensor<T> out = value(x);
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  return push(std::move(out), needs(x), [x](Tape& t, int self) {
    const auto& y = t.value(Var{self});
    const auto& g = t.grad_buffer(self);
    auto& d = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (y[i] > T(0)) d[i] += g[i];
    }
  });
}

template <typename T>
Var Tape<T>::tanh(Var x) {
  Tensor<T> out = value(x);
  for (auto& v : out.data) v = std::tanh(v);
  return push(std::move(out), needs(x), [x](Tape& t, int self) {
    const auto& y = t.value(Var{self});
    const auto& g = t.grad_buffer(self);
    auto& d = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var Tape<T>::scale(Var x, T s) {
  Tensor<T> out = value(x);
  for (auto& v : out.data) v *= s;
  return push(std::move(out), needs(x), [x, s](Tape& t, int self) {
    const auto& g = t.grad_buffer(self);
    auto& d = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * g[i];
  });
}

template <typename T>
Var Tape<T>::reshape(Var x, Shape shape) {
  const auto& vx = value(x);
  require(shape_size(shape) == vx.size(), "reshape: " + shape_string(vx.shape) + " -> " + shape_string(shape));
  Tensor<T> out(std::move(shape), vx.data);
  return push(std::move(out), needs(x), [x](Tape& t, int self) {
    const auto& g = t.grad_buffer(self);
    auto& d = t.grad_buffer(x.id);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

template <typename T>
Var Tape<T>::sum(Var x) {
  const auto& vx = value(x);
  T total = T(0);
  for (T v : vx.data) total += v;
  return push(Tensor<T>(Shape{}, total), needs(x), [x](Tape& t, int self) {
    const T g = t.grad_buffer(self)[0];
    for (auto& v : t.grad_buffer(x.id).data) v += g;
  });
}

template <typename T>
Var Tape<T>::linear(Var x, Var w, Var b) {
  const auto& vx = value(x);
  const auto& vw = value(w);
  require(vw.rank() == 2, "linear: weight must be a matrix");
  const int in = vw.dim(0);
  const int outd = vw.dim(1);
  const auto xr = rows_of(vx);
  require(xr.cols == in, "linear: input width " + std::to_string(xr.cols) + " vs weight " + shape_string(vw.shape));
  Shape out_shape = vx.shape;
  out_shape.back() = outd;
  Tensor<T> out(out_shape);
  auto Y = as_matrix(out, xr.rows, outd);
  Y.noalias() = as_matrix(vx, xr.rows, in) * as_matrix(vw, in, outd);
  if (b.valid()) {
    const auto& vb = value(b);
    require(static_cast<int>(vb.size()) == outd, "linear: bias size");
    Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(vb.ptr(), outd);
  }
  const bool any = needs(x) || needs(w) || (b.valid() && needs(b));
  return push(std::move(out), any, [x, w, b, rows = xr.rows, in, outd](Tape& t, int self) {
    const auto G = as_matrix(t.grad_buffer(self), rows, outd);
    if (t.needs(x)) as_matrix(t.grad_buffer(x.id), rows, in).noalias() += G * as_matrix(t.value(w), in, outd).transpose();
    if (t.needs(w)) as_matrix(t.grad_buffer(w.id), in, outd).noalias() += as_matrix(t.value(x), rows, in).transpose() * G;
    if (b.valid() && t.needs(b)) as_matrix(t.grad_buffer(b.id), 1, outd) += G.colwise().sum();
  });
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  require(va.rank() == 2 && vb.rank() == 2 && va.dim(1) == vb.dim(0),
          "matmul: " + shape_string(va.shape) + " x " + shape_string(vb.shape));
  const int n = va.dim(0), k = va.dim(1), m = vb.dim(1);
  Tensor<T> out(Shape{n, m});
  as_matrix(out, n, m).noalias() = as_matrix(va, n, k) * as_matrix(vb, k, m);
  return push(std::move(out), needs(a) || needs(b), [a, b, n, k, m](Tape& t, int self) {
    const auto G = as_matrix(t.grad_buffer(self), n, m);
    if (t.needs(a)) as_matrix(t.grad_buffer(a.id), n, k).noalias() += G * as_matrix(t.value(b), k, m).transpose();
    if (t.needs(b)) as_matrix(t.grad_buffer(b.id), k, m).noalias() += as_matrix(t.value(a), n, k).transpose() * G;
  });
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  require(va.rank() == 2 && vb.rank() == 2 && va.dim(1) == vb.dim(1),
          "matmul_nt: " + shape_string(va.shape) + " x " + shape_string(vb.shape) + "^T");
  const int n = va.dim(0), k = va.dim(1), m = vb.dim(0);
  Tensor<T> out(Shape{n, m});
  as_matrix(out, n, m).noalias() = as_matrix(va, n, k) * as_matrix(vb, m, k).transpose();
  return push(std::move(out), needs(a) || needs(b), [a, b, n, k, m](Tape& t, int self) {
    const auto G = as_matrix(t.grad_buffer(self), n, m);
    if (t.needs(a)) as_matrix(t.grad_buffer(a.id), n, k).noalias() += G * as_matrix(t.value(b), m, k);
    if (t.needs(b)) as_matrix(t.grad_buffer(b.id), m, k).noalias() += G.transpose() * as_matrix(t.value(a), n, k);
  });
}

template <typename T>
Var Tape<T>::softmax_rows(Var x) {
  const auto& vx = value(x);
  const auto r = rows_of(vx);
  Tensor<T> out = vx;
  for (int i = 0; i < r.rows; ++i) {
    T* row = out.ptr() + static_cast<std::ptrdiff_t>(i) * r.cols;
    const T mx = *std::max_element(row, row + r.cols);
    T z = T(0);
    for (int j = 0; j < r.cols; ++j) z += (row[j] = std::exp(row[j] - mx));
    for (int j = 0; j < r.cols; ++j) row[j] /= z;
  }
  return push(std::move(out), needs(x), [x, r](Tape& t, int self) {
    const auto& y = t.value(Var{self});
    const auto& g = t.grad_buffer(self);
    auto& d = t.grad_buffer(x.id);
    for (int i = 0; i < r.rows; ++i) {
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(i) * r.cols;
      T dot = T(0);
      for (int j = 0; j < r.cols; ++j) dot += g[off + j] * y[off + j];
      for (int j = 0; j < r.cols; ++j) d[off + j] += y[off + j] * (g[off + j] - dot);
    }
  });
}

template <typename T>
Var Tape<T>::conv3x3(Var x, Var w, Var b) {
  const auto& vx = value(x);
  const auto& vw = value(w);
  require(vx.rank() == 3 && vw.rank() == 4 && vw.dim(0) == 3 && vw.dim(1) == 3 && vw.dim(2) == vx.dim(2),
          "conv3x3: input " + shape_string(vx.shape) + " kernel " + shape_string(vw.shape));
  const int h = vx.dim(0), wd = vx.dim(1), cin = vx.dim(2), cout = vw.dim(3);
  const int cells = h * wd;
  const int patch = 9 * cin;

  // im2col: one row per output cell, columns ordered (ky, kx, cin) to match the kernel layout.
  auto cols = std::make_shared<Tensor<T>>(Shape{cells, patch});
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < wd; ++xx) {
      T* row = cols->ptr() + static_cast<std::ptrdiff_t>(y * wd + xx) * patch;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = y + ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = xx + kx - 1;
          if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
          std::copy_n(vx.ptr() + static_cast<std::ptrdiff_t>(iy * wd + ix) * cin, cin, row + (ky * 3 + kx) * cin);
        }
      }
    }
  }
  Tensor<T> out(Shape{h, wd, cout});
  auto Y = as_matrix(out, cells, cout);
  Y.noalias() = as_matrix(*cols, cells, patch) * as_matrix(vw, patch, cout);
  const auto& vb = value(b);
  require(static_cast<int>(vb.size()) == cout, "conv3x3: bias size");
  Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(vb.ptr(), cout);

  const bool any = needs(x) || needs(w) || needs(b);
  return push(std::move(out), any, [x, w, b, cols, h, wd, cin, cout, cells, patch](Tape& t, int self) {
    const auto G = as_matrix(t.grad_buffer(self), cells, cout);
    if (t.needs(w)) as_matrix(t.grad_buffer(w.id), patch, cout).noalias() += as_matrix(*cols, cells, patch).transpose() * G;
    if (t.needs(b)) as_matrix(t.grad_buffer(b.id), 1, cout) += G.colwise().sum();
    if (!t.needs(x)) return;
    Mat<T> dcols = G * as_matrix(t.value(w), patch, cout).transpose();
    auto& dx = t.grad_buffer(x.id);
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < wd; ++xx) {
        const T* row = dcols.data() + static_cast<std::ptrdiff_t>(y * wd + xx) * patch;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = xx + kx - 1;
            if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
            T* dst = dx.ptr() + static_cast<std::ptrdiff_t>(iy * wd + ix) * cin;
            const T* src = row + (ky * 3 + kx) * cin;
            for (int c = 0; c < cin; ++c) dst[c] += src[c];
          }
        }
      }
    }
  });
}

template <typename T>
Var Tape<T>::concat_last(std::span<const Var> parts) {
  require(!parts.empty(), "concat_last: no inputs");
  const auto r0 = rows_of(value(parts[0]));
  std::vector<int> widths;
  int total = 0;
  bool any = false;
  for (Var p : parts) {
    const auto& v = value(p);
    const auto r = rows_of(v);
    require(r.rows == r0.rows && v.rank() == value(parts[0]).rank(), "concat_last: leading dimensions differ");
    widths.push_back(r.cols);
    total += r.cols;
    any = any || needs(p);
  }
  Shape shape = value(parts[0]).shape;
  shape.back() = total;
  Tensor<T> out(shape);
  int offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = value(parts[k]);
    for (int i = 0; i < r0.rows; ++i) {
      std::copy_n(v.ptr() + static_cast<std::ptrdiff_t>(i) * widths[k], widths[k],
                  out.ptr() + static_cast<std::ptrdiff_t>(i) * total + offset);
    }
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), any, [inputs, widths, total, rows = r0.rows](Tape& t, int self) {
    const auto& g = t.grad_buffer(self);
    int offset = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (t.needs(inputs[k])) {
        auto& d = t.grad_buffer(inputs[k].id);
        for (int i = 0; i < rows; ++i) {
          const T* src = g.ptr() + static_cast<std::ptrdiff_t>(i) * total + offset;
          T* dst = d.ptr() + static_cast<std::ptrdiff_t>(i) * widths[k];
          for (int j = 0; j < widths[k]; ++j) dst[j] += src[j];
        }
      }
      offset += widths[k];
    }
  });
}

template <typename T>
Var Tape<T>::concat_flat(std::span<const Var> parts) {
  std::size_t total = 0;
  bool any = false;
  for (Var p : parts) {
    total += value(p).size();
    any = any || needs(p);
  }
  Tensor<T> out(Shape{static_cast<int>(total)});
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& v = value(p);
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), any, [inputs](Tape& t, int self) {
    const auto& g = t.grad_buffer(self);
    std::size_t offset = 0;
    for (Var in : inputs) {
      const std::size_t n = t.value(in).size();
      if (t.needs(in)) {
        auto& d = t.grad_buffer(in.id);
        for (std::size_t j = 0; j < n; ++j) d[j] += g[offset + j];
      }
      offset += n;
    }
  });
}

template <typename T>
Var Tape<T>::embedding(Var table, std::span<const int> ids) {
  const auto& vt = value(table);
  require(vt.rank() == 2, "embedding: table must be a matrix");
  const int rows = vt.dim(0), d = vt.dim(1);
  Tensor<T> out(Shape{static_cast<int>(ids.size()), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < rows, "embedding: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(rows));
    std::copy_n(vt.ptr() + static_cast<std::ptrdiff_t>(ids[i]) * d, d, out.ptr() + static_cast<std::ptrdiff_t>(i) * d);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return push(std::move(out), needs(table), [table, idx = std::move(idx), d](Tape& t, int self) {
    const auto& g = t.grad_buffer(self);
    auto& dt = t.grad_buffer(table.id);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      T* dst = dt.ptr() + static_cast<std::ptrdiff_t>(idx[i]) * d;
      const T* src = g.ptr() + static_cast<std::ptrdiff_t>(i) * d;
      for (int j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var Tape<T>::scatter_rows(Var e, std::span<const Position> positions, int height, int width) {
  const auto& ve = value(e);
  require(ve.rank() == 2 && ve.dim(0) == static_cast<int>(positions.size()), "scatter_rows: one position per row");
  const int d = ve.dim(1);
  Tensor<T> out(Shape{height, width, d});
  std::vector<int> cells;
  cells.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Position p = positions[i];
    if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) throw Error(ErrorCode::ShapeMismatch, "scatter position out of bounds");
    const int cell = p.y * width + p.x;
    if (std::find(cells.begin(), cells.end(), cell) != cells.end()) throw Error(ErrorCode::DuplicatePosition, "two entities on one cell");
    cells.push_back(cell);
    std::copy_n(ve.ptr() + static_cast<std::ptrdiff_t>(i) * d, d, out.ptr() + static_cast<std::ptrdiff_t>(cell) * d);
  }
  return push(std::move(out), needs(e), [e, cells = std::move(cells), d](Tape& t, int self) {
    const auto& g = t.grad_buffer(self);
    auto& de = t.grad_buffer(e.id);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const T* src = g.ptr() + static_cast<std::ptrdiff_t>(cells[i]) * d;
      T* dst = de.ptr() + static_cast<std::ptrdiff_t>(i) * d;
      for (int j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var Tape<T>::ppo_objective(Var logits, int action, T old_log_prob, T advantage, T clip_epsilon, T entropy_coef, T weight) {
  const auto& z = value(logits);
  const int n = static_cast<int>(z.size());
  require(action >= 0 && action < n, "ppo_objective: action outside logits");
  std::vector<T> logp = log_softmax<T>(z.data);
  std::vector<T> p(logp.size());
  T entropy = T(0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = std::exp(logp[j]);
    entropy -= p[j] * logp[j];
  }
  const T ratio = std::exp(logp[static_cast<std::size_t>(action)] - old_log_prob);
  const T clipped = std::clamp(ratio, T(1) - clip_epsilon, T(1) + clip_epsilon);
  const bool unclipped_branch = ratio * advantage <= clipped * advantage;
  const T surrogate = unclipped_branch ? ratio * advantage : clipped * advantage;
  const T loss = weight * (-surrogate - entropy_coef * entropy);

  return push(Tensor<T>(Shape{}, loss), needs(logits),
              [logits, action, p = std::move(p), logp = std::move(logp), entropy, ratio, advantage, unclipped_branch,
               entropy_coef, weight](Tape& t, int self) {
                const T g = t.grad_buffer(self)[0] * weight;
                // d surrogate / d log pi(action)
                const T ds = unclipped_branch ? ratio * advantage : T(0);
                auto& d = t.grad_buffer(logits.id);
                for (std::size_t j = 0; j < p.size(); ++j) {
                  const T dlogp = (static_cast<int>(j) == action ? T(1) : T(0)) - p[j];
                  const T dentropy = -p[j] * (logp[j] + entropy);
                  d[j] += g * (-ds * dlogp - entropy_coef * dentropy);
                }
              });
}

template <typename T>
Var Tape<T>::squared_error(Var v, T target, T weight) {
  const auto& vv = value(v);
  require(vv.size() == 1, "squared_error: expects one value");
  const T diff = vv[0] - target;
  return push(Tensor<T>(Shape{}, weight * diff * diff), needs(v), [v, diff, weight](Tape& t, int self) {
    t.grad_buffer(v.id)[0] += t.grad_buffer(self)[0] * T(2) * weight * diff;
  });
}

template <typename T>
void Tape<T>::backward(Var loss) {
  require(value(loss).size() == 1, "backward: loss must be a scalar");
  backward(loss, Tensor<T>(value(loss).shape, T(1)));
}

template <typename T>
void Tape<T>::backward(Var out, const Tensor<T>& seed) {
  if (!recording() || nodes_.empty() || !out.valid()) throw Error(ErrorCode::NoTape, "backward without a recorded forward pass");
  if (!needs(out)) return;  // no parameter reachable
  require(seed.shape == value(out).shape, "backward: seed shape");
  auto& g = grad_buffer(out.id);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.back || n.grad_own.data.empty()) continue;
    n.back(*this, id);
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace lootcrawl::nn
