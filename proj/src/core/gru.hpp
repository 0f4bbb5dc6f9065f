#pragma once

#include <string>
#include <vector>

#include "core/layers.hpp"
#include "core/tensor.hpp"

namespace dlsvm {

// Column-wise concat of two matrices with equal row counts.
template <typename T>
TensorT<T> concat_cols(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.dim(0) != b.dim(0))
    throw_dimension("concat_cols: row counts disagree: " + a.shape_str() + " vs " + b.shape_str());
  const size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  TensorT<T> out({n, ca + cb});
  for (size_t i = 0; i < n; ++i) {
    std::copy(a.data() + i * ca, a.data() + (i + 1) * ca, out.data() + i * (ca + cb));
    std::copy(b.data() + i * cb, b.data() + (i + 1) * cb, out.data() + i * (ca + cb) + ca);
  }
  return out;
}

// One gated recurrent cell. The three weight matrices act on the
// concatenation [h_prev, x_t] (hidden first), shape {hid+in, hid} each.
// Gate biases are zero-initialized, so a freshly built cell computes the
// bias-free update equations exactly.
template <typename T>
struct GruCell {
  size_t input_dim = 0, hidden_dim = 0;
  TensorT<T> wz, wr, wh;  // update gate, reset gate, candidate
  TensorT<T> bz, br, bh;
  TensorT<T> dwz, dwr, dwh, dbz, dbr, dbh;

  GruCell() = default;
  GruCell(size_t in, size_t hid)
      : input_dim(in), hidden_dim(hid),
        wz({in + hid, hid}), wr({in + hid, hid}), wh({in + hid, hid}),
        bz({hid}), br({hid}), bh({hid}),
        dwz({in + hid, hid}), dwr({in + hid, hid}), dwh({in + hid, hid}),
        dbz({hid}), dbr({hid}), dbh({hid}) {}

  void init(Rng& rng) {
    // Uniform(+-sqrt(6/(fan_in+fan_out)))
    double bound = std::sqrt(6.0 / double((input_dim + hidden_dim) + hidden_dim));
    for (auto* m : {&wz, &wr, &wh})
      for (auto& v : m->vec()) v = T(rng.uniform(-bound, bound));
  }

  void zero_grads() {
    for (auto* g : {&dwz, &dwr, &dwh, &dbz, &dbr, &dbh}) g->fill(T(0));
  }
};

template <typename T>
struct GruStepOut {
  TensorT<T> h, z, r, hc;
};

// z = sigmoid([h,x]Wz + bz); r = sigmoid([h,x]Wr + br);
// hc = tanh([r*h, x]Wh + bh); h_t = (1-z)*h + z*hc
template <typename T>
GruStepOut<T> gru_step(const GruCell<T>& cell, const TensorT<T>& h_prev, const TensorT<T>& x_t) {
  if (h_prev.rank() != 2 || h_prev.dim(1) != cell.hidden_dim)
    throw_dimension("gru_step: hidden state " + h_prev.shape_str() + " does not match cell size " +
                    std::to_string(cell.hidden_dim));
  if (x_t.rank() != 2 || x_t.dim(1) != cell.input_dim)
    throw_dimension("gru_step: input " + x_t.shape_str() + " does not match cell input dim " +
                    std::to_string(cell.input_dim));
  const size_t n = h_prev.dim(0), hid = cell.hidden_dim;
  TensorT<T> u = concat_cols(h_prev, x_t);
  GruStepOut<T> out;
  out.z = matmul(u, cell.wz);
  out.r = matmul(u, cell.wr);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < hid; ++j) {
      out.z[i * hid + j] = sigmoid_scalar(out.z[i * hid + j] + cell.bz[j]);
      out.r[i * hid + j] = sigmoid_scalar(out.r[i * hid + j] + cell.br[j]);
    }
  TensorT<T> rh = h_prev;
  for (size_t i = 0; i < rh.size(); ++i) rh[i] *= out.r[i];
  TensorT<T> v = concat_cols(rh, x_t);
  out.hc = matmul(v, cell.wh);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < hid; ++j)
      out.hc[i * hid + j] = std::tanh(out.hc[i * hid + j] + cell.bh[j]);
  out.h = TensorT<T>({n, hid});
  for (size_t i = 0; i < out.h.size(); ++i)
    out.h[i] = (T(1) - out.z[i]) * h_prev[i] + out.z[i] * out.hc[i];
  return out;
}

// Stacked GRU consuming {n, T, features}; layer l feeds its full hidden
// sequence to layer l+1; the final timestep hidden state of the top layer is
// the output. h_0 = 0 for every layer. Backward is full BPTT.
template <typename T>
class GruStackLayer : public Layer<T> {
 public:
  GruStackLayer(size_t num_layers, size_t input_dim, size_t hidden_dim) {
    if (num_layers < 1) throw_config("gru: need at least one layer");
    cells_.emplace_back(input_dim, hidden_dim);
    for (size_t l = 1; l < num_layers; ++l) cells_.emplace_back(hidden_dim, hidden_dim);
  }

  const char* kind() const override { return "gru"; }

  void init(Rng& rng) {
    for (auto& c : cells_) c.init(rng);
  }

  TensorT<T> forward(const TensorT<T>& x, Mode mode) override {
    if (x.rank() != 3)
      throw_dimension("gru: input must be {n, timesteps, features}, got " + x.shape_str());
    const size_t n = x.dim(0), steps = x.dim(1), feat = x.dim(2);
    if (steps < 1) throw_input("gru: empty sequence");
    if (feat != cells_[0].input_dim)
      throw_dimension("gru: feature dim " + std::to_string(feat) + " does not match cell input " +
                      std::to_string(cells_[0].input_dim));
    const size_t hid = cells_[0].hidden_dim;
    const bool keep = (mode == Mode::Train);
    steps_ = steps;

    // slice timesteps of the raw input once
    std::vector<TensorT<T>> seq(steps);
    for (size_t t = 0; t < steps; ++t) {
      TensorT<T> xt({n, feat});
      for (size_t s = 0; s < n; ++s)
        std::copy(x.data() + (s * steps + t) * feat, x.data() + (s * steps + t + 1) * feat,
                  xt.data() + s * feat);
      seq[t] = std::move(xt);
    }
    if (keep) {
      x_seq_ = seq;
      hs_.assign(cells_.size(), {});
      zs_.assign(cells_.size(), {});
      rs_.assign(cells_.size(), {});
      hcs_.assign(cells_.size(), {});
    } else {
      x_seq_.clear();
      hs_.clear();
      zs_.clear();
      rs_.clear();
      hcs_.clear();
    }

    TensorT<T> last;
    for (size_t l = 0; l < cells_.size(); ++l) {
      TensorT<T> h({n, hid}, T(0));
      std::vector<TensorT<T>> out_seq(steps);
      if (keep) {
        hs_[l].resize(steps + 1);
        hs_[l][0] = h;
        zs_[l].resize(steps);
        rs_[l].resize(steps);
        hcs_[l].resize(steps);
      }
      for (size_t t = 0; t < steps; ++t) {
        GruStepOut<T> so = gru_step(cells_[l], h, seq[t]);
        h = so.h;
        out_seq[t] = h;
        if (keep) {
          hs_[l][t + 1] = h;
          zs_[l][t] = std::move(so.z);
          rs_[l][t] = std::move(so.r);
          hcs_[l][t] = std::move(so.hc);
        }
      }
      last = h;
      seq = std::move(out_seq);
    }
    return last;
  }

  TensorT<T> backward(const TensorT<T>& upstream) override {
    const size_t layers = cells_.size();
    const size_t n = upstream.dim(0);
    const size_t hid = cells_[0].hidden_dim;
    const size_t steps = steps_;

    // dh_ext[t]: gradient arriving at layer l's hidden state at step t from
    // above (the upper layer's input gradient, or the loss for t = last).
    std::vector<TensorT<T>> dh_ext(steps);
    for (size_t t = 0; t + 1 < steps; ++t) dh_ext[t] = TensorT<T>({n, hid}, T(0));
    dh_ext[steps - 1] = upstream;

    std::vector<TensorT<T>> dx_seq(steps);
    for (size_t li = layers; li-- > 0;) {
      GruCell<T>& cell = cells_[li];
      const size_t in = cell.input_dim;
      const std::vector<TensorT<T>>& xin = (li == 0) ? x_seq_ : hs_[li - 1];
      // xin for upper layers is offset by one: hs_[l-1][t+1] is that layer's
      // output at step t.
      for (size_t t = 0; t < steps; ++t) dx_seq[t] = TensorT<T>({n, in}, T(0));

      TensorT<T> dh({n, hid}, T(0));
      for (size_t t = steps; t-- > 0;) {
        const TensorT<T>& x_t = (li == 0) ? xin[t] : xin[t + 1];
        const TensorT<T>& h_prev = hs_[li][t];
        const TensorT<T>& z = zs_[li][t];
        const TensorT<T>& r = rs_[li][t];
        const TensorT<T>& hc = hcs_[li][t];
        for (size_t i = 0; i < dh.size(); ++i) dh[i] += dh_ext[t][i];

        TensorT<T> dz({n, hid}), dhc({n, hid}), dh_prev({n, hid});
        for (size_t i = 0; i < dh.size(); ++i) {
          dz[i] = dh[i] * (hc[i] - h_prev[i]);
          dhc[i] = dh[i] * z[i];
          dh_prev[i] = dh[i] * (T(1) - z[i]);
        }

        // candidate: hc = tanh([r*h_prev, x] Wh + bh)
        TensorT<T> dv = dhc;
        for (size_t i = 0; i < dv.size(); ++i) dv[i] *= (T(1) - hc[i] * hc[i]);
        TensorT<T> rh = h_prev;
        for (size_t i = 0; i < rh.size(); ++i) rh[i] *= r[i];
        TensorT<T> v = concat_cols(rh, x_t);
        matmul_tn_acc(v, dv, cell.dwh);
        column_sum_acc(dv, cell.dbh);
        TensorT<T> dv_in = matmul_nt(dv, cell.wh);  // {n, hid+in}

        TensorT<T> dr({n, hid});
        for (size_t i = 0; i < n; ++i) {
          const T* row = dv_in.data() + i * (hid + in);
          for (size_t j = 0; j < hid; ++j) {
            dr[i * hid + j] = row[j] * h_prev[i * hid + j];
            dh_prev[i * hid + j] += row[j] * r[i * hid + j];
          }
          T* dxrow = dx_seq[t].data() + i * in;
          for (size_t j = 0; j < in; ++j) dxrow[j] += row[hid + j];
        }

        // gates: pre-activation grads through the logistic derivative
        TensorT<T> dz_pre = dz, dr_pre = dr;
        for (size_t i = 0; i < dz_pre.size(); ++i) {
          dz_pre[i] *= z[i] * (T(1) - z[i]);
          dr_pre[i] *= r[i] * (T(1) - r[i]);
        }
        TensorT<T> u = concat_cols(h_prev, x_t);
        matmul_tn_acc(u, dz_pre, cell.dwz);
        column_sum_acc(dz_pre, cell.dbz);
        matmul_tn_acc(u, dr_pre, cell.dwr);
        column_sum_acc(dr_pre, cell.dbr);
        TensorT<T> du_z = matmul_nt(dz_pre, cell.wz);
        TensorT<T> du_r = matmul_nt(dr_pre, cell.wr);
        for (size_t i = 0; i < n; ++i) {
          const T* zr = du_z.data() + i * (hid + in);
          const T* rr = du_r.data() + i * (hid + in);
          for (size_t j = 0; j < hid; ++j) dh_prev[i * hid + j] += zr[j] + rr[j];
          T* dxrow = dx_seq[t].data() + i * in;
          for (size_t j = 0; j < in; ++j) dxrow[j] += zr[hid + j] + rr[hid + j];
        }
        dh = std::move(dh_prev);
      }
      dh_ext = std::move(dx_seq);
      dx_seq = std::vector<TensorT<T>>(steps);
    }

    // dh_ext now holds gradients wrt the raw input slices; reassemble {n,T,f}
    const size_t feat = cells_[0].input_dim;
    TensorT<T> dx({n, steps, feat});
    for (size_t t = 0; t < steps; ++t)
      for (size_t s = 0; s < n; ++s)
        std::copy(dh_ext[t].data() + s * feat, dh_ext[t].data() + (s + 1) * feat,
                  dx.data() + (s * steps + t) * feat);
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    for (size_t l = 0; l < cells_.size(); ++l) {
      std::string p = prefix + ".l" + std::to_string(l);
      out.push_back({p + ".wz", &cells_[l].wz, &cells_[l].dwz});
      out.push_back({p + ".wr", &cells_[l].wr, &cells_[l].dwr});
      out.push_back({p + ".wh", &cells_[l].wh, &cells_[l].dwh});
      out.push_back({p + ".bz", &cells_[l].bz, &cells_[l].dbz});
      out.push_back({p + ".br", &cells_[l].br, &cells_[l].dbr});
      out.push_back({p + ".bh", &cells_[l].bh, &cells_[l].dbh});
    }
  }

  void zero_grads() override {
    for (auto& c : cells_) c.zero_grads();
  }

  std::string nonfinite_report() const override {
    for (const auto& c : cells_)
      if (!c.wz.all_finite() || !c.wr.all_finite() || !c.wh.all_finite()) return "parameters";
    for (const auto& layer_h : hs_)
      for (const auto& h : layer_h)
        if (!h.all_finite()) return "hidden states";
    return {};
  }

  std::vector<GruCell<T>>& cells() { return cells_; }
  // Cached hidden sequences per layer (index 0 is h_0), train mode only.
  const std::vector<std::vector<TensorT<T>>>& hidden_sequences() const { return hs_; }

 private:
  std::vector<GruCell<T>> cells_;
  size_t steps_ = 0;
  std::vector<TensorT<T>> x_seq_;
  std::vector<std::vector<TensorT<T>>> hs_, zs_, rs_, hcs_;
};

}  // namespace dlsvm
