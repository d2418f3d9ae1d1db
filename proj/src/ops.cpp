#include "seqslu/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqslu {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

template <typename T>
CMapM<T> as_mat(const Tensor<T>& t) {
  return CMapM<T>(t.data(), t.rows(), t.cols());
}
template <typename T>
MapM<T> as_mat(Tensor<T>& t) {
  return MapM<T>(t.data(), t.rows(), t.cols());
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

template <typename T>
Tensor<T>& gbuf(Node<T>& n, size_t i) {
  return n.parents[i]->grad_buffer();
}
template <typename T>
bool wants(Node<T>& n, size_t i) {
  return n.parents[i]->requires_grad;
}

template <typename T>
T sigm(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require(a.cols() == b.rows(), "matmul: inner dims differ " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
  Tensor<T> out({a.rows(), b.cols()});
  as_mat(out).noalias() = as_mat(a.value()) * as_mat(b.value());
  return make_op<T>("matmul", std::move(out), {a, b}, [](Node<T>& n) {
    auto g = as_mat(static_cast<const Tensor<T>&>(n.grad));
    if (wants(n, 0)) as_mat(gbuf(n, 0)).noalias() += g * as_mat(n.parents[1]->value).transpose();
    if (wants(n, 1)) as_mat(gbuf(n, 1)).noalias() += as_mat(n.parents[0]->value).transpose() * g;
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape("add", a, b);
  Tensor<T> out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op<T>("add", std::move(out), {a, b}, [](Node<T>& n) {
    for (size_t p = 0; p < 2; ++p) {
      if (!wants(n, p)) continue;
      auto& g = gbuf(n, p);
      for (int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape("mul", a, b);
  Tensor<T> out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op<T>("mul", std::move(out), {a, b}, [](Node<T>& n) {
    for (size_t p = 0; p < 2; ++p) {
      if (!wants(n, p)) continue;
      auto& g = gbuf(n, p);
      const auto& other = n.parents[1 - p]->value;
      for (int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * other[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= s;
  return make_op<T>("scale", std::move(out), {a}, [s](Node<T>& n) {
    auto& g = gbuf(n, 0);
    for (int64_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

template <typename T>
Var<T> add_bias(const Var<T>& a, const Var<T>& b) {
  require(b.value().size() == a.cols(), "add_bias: bias length " + std::to_string(b.value().size()) +
                                            " != cols " + std::to_string(a.cols()));
  Tensor<T> out = a.value();
  as_mat(out).rowwise() += as_mat(b.value()).row(0);
  return make_op<T>("add_bias", std::move(out), {a, b}, [](Node<T>& n) {
    auto g = as_mat(static_cast<const Tensor<T>&>(n.grad));
    if (wants(n, 0)) as_mat(gbuf(n, 0)) += g;
    if (wants(n, 1)) {
      auto& gb = gbuf(n, 1);
      MapM<T>(gb.data(), 1, gb.size()) += g.colwise().sum();
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  require(x.cols() == w.rows(), "linear: input width " + std::to_string(x.cols()) +
                                    " vs weight " + shape_str(w.shape()));
  require(b.value().size() == w.cols(), "linear: bias length mismatch");
  Tensor<T> out({x.rows(), w.cols()});
  auto o = as_mat(out);
  o.noalias() = as_mat(x.value()) * as_mat(w.value());
  o.rowwise() += CMapM<T>(b.value().data(), 1, w.cols()).row(0);
  return make_op<T>("linear", std::move(out), {x, w, b}, [](Node<T>& n) {
    auto g = as_mat(static_cast<const Tensor<T>&>(n.grad));
    if (wants(n, 0)) as_mat(gbuf(n, 0)).noalias() += g * as_mat(n.parents[1]->value).transpose();
    if (wants(n, 1)) as_mat(gbuf(n, 1)).noalias() += as_mat(n.parents[0]->value).transpose() * g;
    if (wants(n, 2)) {
      auto& gb = gbuf(n, 2);
      MapM<T>(gb.data(), 1, gb.size()) += g.colwise().sum();
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().values()) s += v;
  return make_op<T>("sum", Tensor<T>({1}, std::vector<T>{s}), {a}, [](Node<T>& n) {
    auto& g = gbuf(n, 0);
    const T d = n.grad[0];
    for (auto& v : g.values()) v += d;
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = v > T(0) ? v : T(0);
  return make_op<T>("relu", std::move(out), {a}, [](Node<T>& n) {
    auto& g = gbuf(n, 0);
    const auto& x = n.parents[0]->value;
    for (int64_t i = 0; i < g.size(); ++i)
      if (x[i] > T(0)) g[i] += n.grad[i];
  });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = std::tanh(v);
  return make_op<T>("tanh", std::move(out), {a}, [](Node<T>& n) {
    auto& g = gbuf(n, 0);
    for (int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (T(1) - n.value[i] * n.value[i]);
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = sigm(v);
  return make_op<T>("sigmoid", std::move(out), {a}, [](Node<T>& n) {
    auto& g = gbuf(n, 0);
    for (int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.value[i] * (T(1) - n.value[i]);
  });
}

template <typename T>
Var<T> log_softmax(const Var<T>& x) {
  require(x.cols() >= 1, "log_softmax: empty last dimension");
  Tensor<T> out = x.value();
  for (int64_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const T m = *std::max_element(row.begin(), row.end());
    T s = 0;
    for (T v : row) s += std::exp(v - m);
    const T lse = m + std::log(s);
    for (auto& v : row) v -= lse;
  }
  return make_op<T>("log_softmax", std::move(out), {x}, [](Node<T>& n) {
    auto& g = gbuf(n, 0);
    for (int64_t r = 0; r < g.rows(); ++r) {
      auto gy = n.grad.row(r);
      auto y = n.value.row(r);
      auto gx = g.row(r);
      T total = 0;
      for (T v : gy) total += v;
      for (size_t c = 0; c < gx.size(); ++c) gx[c] += gy[c] - std::exp(y[c]) * total;
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps) {
  const int64_t d = x.cols();
  require(d >= 2, "layer_norm: needs at least 2 features");
  require(gain.value().size() == d && bias.value().size() == d, "layer_norm: affine size mismatch");
  const int64_t rows = x.rows();
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(static_cast<size_t>(rows));
  Tensor<T> out(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    auto in = x.value().row(r);
    T mean = 0;
    for (T v : in) mean += v;
    mean /= T(d);
    T var = 0;
    for (T v : in) var += (v - mean) * (v - mean);
    var /= T(d);
    const T is = T(1) / std::sqrt(var + T(eps));
    inv_std[static_cast<size_t>(r)] = is;
    for (int64_t c = 0; c < d; ++c) {
      const T h = (in[static_cast<size_t>(c)] - mean) * is;
      xhat(r, c) = h;
      out(r, c) = h * gain.value()[c] + bias.value()[c];
    }
  }
  return make_op<T>("layer_norm", std::move(out), {x, gain, bias},
                    [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& n) {
                      const int64_t d = xhat.cols();
                      const auto& gamma = n.parents[1]->value;
                      for (int64_t r = 0; r < xhat.rows(); ++r) {
                        auto gy = n.grad.row(r);
                        if (wants(n, 1) || wants(n, 2)) {
                          for (int64_t c = 0; c < d; ++c) {
                            if (wants(n, 1)) gbuf(n, 1)[c] += gy[c] * xhat(r, c);
                            if (wants(n, 2)) gbuf(n, 2)[c] += gy[c];
                          }
                        }
                        if (!wants(n, 0)) continue;
                        T mean_g = 0, mean_gx = 0;
                        for (int64_t c = 0; c < d; ++c) {
                          const T gh = gy[c] * gamma[c];
                          mean_g += gh;
                          mean_gx += gh * xhat(r, c);
                        }
                        mean_g /= T(d);
                        mean_gx /= T(d);
                        auto gx = gbuf(n, 0).row(r);
                        const T is = inv_std[static_cast<size_t>(r)];
                        for (int64_t c = 0; c < d; ++c) {
                          gx[c] += is * (gy[c] * gamma[c] - mean_g - xhat(r, c) * mean_gx);
                        }
                      }
                    });
}

template <typename T>
Var<T> dropout(const Var<T>& x, double p, Phase phase, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (phase == Phase::kEval || p == 0.0) return x;
  const T keep_scale = T(1.0 / (1.0 - p));
  Tensor<T> mask(x.shape());
  for (auto& m : mask.values()) m = rng.bernoulli(p) ? T(0) : keep_scale;
  Tensor<T> out = x.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op<T>("dropout", std::move(out), {x}, [mask = std::move(mask)](Node<T>& n) {
    auto& g = gbuf(n, 0);
    for (int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * mask[i];
  });
}

template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  require(a.rows() == b.rows(), "concat_cols: row count mismatch");
  const int64_t ca = a.cols(), cb = b.cols();
  Tensor<T> out({a.rows(), ca + cb});
  for (int64_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.value().row(r).data(), ca, out.row(r).data());
    std::copy_n(b.value().row(r).data(), cb, out.row(r).data() + ca);
  }
  return make_op<T>("concat_cols", std::move(out), {a, b}, [ca, cb](Node<T>& n) {
    for (int64_t r = 0; r < n.grad.rows(); ++r) {
      auto gy = n.grad.row(r);
      if (wants(n, 0)) {
        auto g = gbuf(n, 0).row(r);
        for (int64_t c = 0; c < ca; ++c) g[c] += gy[c];
      }
      if (wants(n, 1)) {
        auto g = gbuf(n, 1).row(r);
        for (int64_t c = 0; c < cb; ++c) g[c] += gy[ca + c];
      }
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, int64_t begin, int64_t end) {
  require(0 <= begin && begin < end && end <= a.cols(), "slice_cols: bad range");
  const int64_t w = end - begin;
  Tensor<T> out({a.rows(), w});
  for (int64_t r = 0; r < a.rows(); ++r) std::copy_n(a.value().row(r).data() + begin, w, out.row(r).data());
  return make_op<T>("slice_cols", std::move(out), {a}, [begin, w](Node<T>& n) {
    auto& g = gbuf(n, 0);
    for (int64_t r = 0; r < n.grad.rows(); ++r)
      for (int64_t c = 0; c < w; ++c) g(r, begin + c) += n.grad(r, c);
  });
}

template <typename T>
Var<T> select_row(const Var<T>& a, int64_t r) {
  require(0 <= r && r < a.rows(), "select_row: row " + std::to_string(r) + " out of range");
  const int64_t c = a.cols();
  Tensor<T> out({1, c});
  std::copy_n(a.value().row(r).data(), c, out.data());
  return make_op<T>("select_row", std::move(out), {a}, [r](Node<T>& n) {
    auto g = gbuf(n, 0).row(r);
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[static_cast<int64_t>(i)];
  });
}

template <typename T>
Var<T> stack_rows(const std::vector<Var<T>>& rows) {
  require(!rows.empty(), "stack_rows: nothing to stack");
  const int64_t c = rows.front().cols();
  int64_t total = 0;
  for (const auto& v : rows) {
    require(v.cols() == c, "stack_rows: width mismatch");
    total += v.rows();
  }
  Tensor<T> out({total, c});
  std::vector<int64_t> offsets;
  offsets.reserve(rows.size());
  int64_t off = 0;
  for (const auto& v : rows) {
    offsets.push_back(off);
    std::copy_n(v.value().data(), v.value().size(), out.data() + off * c);
    off += v.rows();
  }
  return make_op<T>("stack_rows", std::move(out), rows, [offsets = std::move(offsets)](Node<T>& n) {
    const int64_t c = n.grad.cols();
    for (size_t p = 0; p < n.parents.size(); ++p) {
      if (!wants(n, p)) continue;
      auto& g = gbuf(n, p);
      const T* src = n.grad.data() + offsets[p] * c;
      for (int64_t i = 0; i < g.size(); ++i) g[i] += src[i];
    }
  });
}

int64_t conv1d_output_length(int64_t length, int kernel, int stride, int pad) {
  const int64_t span = length + 2 * pad - kernel;
  return span < 0 ? 0 : span / stride + 1;
}

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  require(w.value().rank() == 3, "conv1d: weight must be Cout x Cin x K");
  const int64_t cout = w.value().dim(0), cin = w.value().dim(1), k = w.value().dim(2);
  require(x.cols() == cin, "conv1d: input channels " + std::to_string(x.cols()) + " != " +
                               std::to_string(cin));
  require(b.value().size() == cout, "conv1d: bias length mismatch");
  require(stride >= 1 && pad >= 0, "conv1d: bad stride/pad");
  const int64_t len = x.rows();
  const int64_t out_len = conv1d_output_length(len, static_cast<int>(k), stride, pad);
  require(out_len >= 1, "conv1d: input too short");

  // im2col: patch column index is ci * K + tap, matching the weight layout.
  Tensor<T> patches({out_len, cin * k});
  for (int64_t t = 0; t < out_len; ++t) {
    for (int64_t tap = 0; tap < k; ++tap) {
      const int64_t src = t * stride - pad + tap;
      if (src < 0 || src >= len) continue;
      for (int64_t ci = 0; ci < cin; ++ci) patches(t, ci * k + tap) = x.value()(src, ci);
    }
  }
  CMapM<T> wm(w.value().data(), cout, cin * k);
  Tensor<T> out({out_len, cout});
  auto o = as_mat(out);
  o.noalias() = as_mat(patches) * wm.transpose();
  o.rowwise() += CMapM<T>(b.value().data(), 1, cout).row(0);

  return make_op<T>("conv1d", std::move(out), {x, w, b},
                    [patches = std::move(patches), stride, pad, len, cin, k, cout](Node<T>& n) {
                      auto g = as_mat(static_cast<const Tensor<T>&>(n.grad));
                      if (wants(n, 1)) {
                        auto& gw = gbuf(n, 1);
                        MapM<T>(gw.data(), cout, cin * k).noalias() += g.transpose() * as_mat(patches);
                      }
                      if (wants(n, 2)) {
                        auto& gb = gbuf(n, 2);
                        MapM<T>(gb.data(), 1, cout) += g.colwise().sum();
                      }
                      if (wants(n, 0)) {
                        CMapM<T> wm(n.parents[1]->value.data(), cout, cin * k);
                        Mat<T> gp = g * wm;
                        auto& gx = gbuf(n, 0);
                        for (int64_t t = 0; t < gp.rows(); ++t) {
                          for (int64_t tap = 0; tap < k; ++tap) {
                            const int64_t src = t * stride - pad + tap;
                            if (src < 0 || src >= len) continue;
                            for (int64_t ci = 0; ci < cin; ++ci) gx(src, ci) += gp(t, ci * k + tap);
                          }
                        }
                      }
                    });
}

template <typename T>
Var<T> lstm_cell(const Var<T>& gates_in, const Var<T>& h_prev, const Var<T>& c_prev,
                 const Var<T>& wh) {
  const int64_t hdim = wh.rows();
  const int64_t rows = gates_in.rows();
  require(wh.cols() == 4 * hdim, "lstm_cell: recurrent weight must be H x 4H");
  require(gates_in.cols() == 4 * hdim, "lstm_cell: gate input width mismatch");
  require(h_prev.cols() == hdim && c_prev.cols() == hdim && h_prev.rows() == rows &&
              c_prev.rows() == rows,
          "lstm_cell: state shape mismatch");

  Tensor<T> gates = gates_in.value();
  as_mat(gates).noalias() += as_mat(h_prev.value()) * as_mat(wh.value());
  Tensor<T> out({rows, 2 * hdim});
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < hdim; ++j) {
      T& gi = gates(r, j);
      T& gf = gates(r, hdim + j);
      T& gg = gates(r, 2 * hdim + j);
      T& go = gates(r, 3 * hdim + j);
      gi = sigm(gi);
      gf = sigm(gf);
      gg = std::tanh(gg);
      go = sigm(go);
      const T c = gf * c_prev.value()(r, j) + gi * gg;
      out(r, hdim + j) = c;
      out(r, j) = go * std::tanh(c);
    }
  }
  // `gates` now holds the activated gate values.
  return make_op<T>("lstm_cell", std::move(out), {gates_in, h_prev, c_prev, wh},
                    [gates = std::move(gates), hdim](Node<T>& n) {
                      const int64_t rows = gates.rows();
                      Tensor<T> dg({rows, 4 * hdim});
                      const auto& cprev = n.parents[2]->value;
                      for (int64_t r = 0; r < rows; ++r) {
                        for (int64_t j = 0; j < hdim; ++j) {
                          const T i = gates(r, j), f = gates(r, hdim + j);
                          const T g = gates(r, 2 * hdim + j), o = gates(r, 3 * hdim + j);
                          const T c = n.value(r, hdim + j);
                          const T tc = std::tanh(c);
                          const T dh = n.grad(r, j);
                          const T dc = n.grad(r, hdim + j) + dh * o * (T(1) - tc * tc);
                          dg(r, j) = dc * g * i * (T(1) - i);
                          dg(r, hdim + j) = dc * cprev(r, j) * f * (T(1) - f);
                          dg(r, 2 * hdim + j) = dc * i * (T(1) - g * g);
                          dg(r, 3 * hdim + j) = dh * tc * o * (T(1) - o);
                          if (wants(n, 2)) gbuf(n, 2)(r, j) += dc * f;
                        }
                      }
                      if (wants(n, 0)) as_mat(gbuf(n, 0)) += as_mat(dg);
                      if (wants(n, 1))
                        as_mat(gbuf(n, 1)).noalias() += as_mat(dg) * as_mat(n.parents[3]->value).transpose();
                      if (wants(n, 3))
                        as_mat(gbuf(n, 3)).noalias() += as_mat(n.parents[1]->value).transpose() * as_mat(dg);
                    });
}

template <typename T>
int64_t argmax_row(const Tensor<T>& t, int64_t r) {
  auto row = t.row(r);
  int64_t best = 0;
  for (int64_t c = 1; c < static_cast<int64_t>(row.size()); ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

#define SEQSLU_INSTANTIATE_OPS(T)                                                       \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                 \
  template Var<T> add(const Var<T>&, const Var<T>&);                                    \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                    \
  template Var<T> scale(const Var<T>&, T);                                              \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                               \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                  \
  template Var<T> sum(const Var<T>&);                                                   \
  template Var<T> relu(const Var<T>&);                                                  \
  template Var<T> tanh(const Var<T>&);                                                  \
  template Var<T> sigmoid(const Var<T>&);                                               \
  template Var<T> log_softmax(const Var<T>&);                                           \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);      \
  template Var<T> dropout(const Var<T>&, double, Phase, Rng&);                          \
  template Var<T> concat_cols(const Var<T>&, const Var<T>&);                            \
  template Var<T> slice_cols(const Var<T>&, int64_t, int64_t);                          \
  template Var<T> select_row(const Var<T>&, int64_t);                                   \
  template Var<T> stack_rows(const std::vector<Var<T>>&);                               \
  template Var<T> conv1d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);        \
  template Var<T> lstm_cell(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&); \
  template int64_t argmax_row(const Tensor<T>&, int64_t);

SEQSLU_INSTANTIATE_OPS(float)
SEQSLU_INSTANTIATE_OPS(double)

}  // namespace seqslu
