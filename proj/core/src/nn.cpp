#include "jigcm/nn.hpp"

#include <algorithm>
#include <cstring>

#include "jigcm/errors.hpp"

namespace jigcm::nn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvShape {
  int in_ch, out_ch, h, w;
};

std::array<ConvShape, 4> conv_shapes(const ModelConfig& cfg) {
  const int h = cfg.input_height();
  const int w = cfg.input_width();
  const auto& ch = cfg.conv_channels;
  return {{{cfg.channels_in, ch[0], h, w},
           {ch[0], ch[1], h, w},
           {ch[1], ch[2], h / 2, w / 2},
           {ch[2], ch[3], h / 4, w / 4}}};
}

// cols[(ky*3+kx)*C + c, s*HW + y*W + x] = x[c, s*HW + (y+ky-1)*W + (x+kx-1)], zero outside.
template <typename T>
Matrix<T> im2col(const Matrix<T>& x, int batch, int h, int w) {
  const int c = static_cast<int>(x.rows());
  const int hw = h * w;
  Matrix<T> cols(9 * c, static_cast<Eigen::Index>(batch) * hw);
  for (int s = 0; s < batch; ++s)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        T* dst = cols.col(static_cast<Eigen::Index>(s) * hw + y * w + xx).data();
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            T* out = dst + (ky * 3 + kx) * c;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              std::fill(out, out + c, T(0));
            } else {
              const T* src = x.col(static_cast<Eigen::Index>(s) * hw + sy * w + sx).data();
              std::memcpy(out, src, sizeof(T) * c);
            }
          }
        }
      }
  return cols;
}

template <typename T>
void col2im_add(const Matrix<T>& cols, int batch, int h, int w, Matrix<T>& dx) {
  const int c = static_cast<int>(dx.rows());
  const int hw = h * w;
  for (int s = 0; s < batch; ++s)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const T* src = cols.col(static_cast<Eigen::Index>(s) * hw + y * w + xx).data();
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= w) continue;
            T* out = dx.col(static_cast<Eigen::Index>(s) * hw + sy * w + sx).data();
            const T* in = src + (ky * 3 + kx) * c;
            for (int k = 0; k < c; ++k) out[k] += in[k];
          }
        }
      }
}

template <typename T>
Matrix<T> conv_relu(const Matrix<T>& x, int batch, const ConvShape& sh, const T* weight,
                    const T* bias) {
  const Matrix<T> cols = im2col(x, batch, sh.h, sh.w);
  Eigen::Map<const RowMatrix<T>> wm(weight, sh.out_ch, 9 * sh.in_ch);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias, sh.out_ch);
  Matrix<T> out(sh.out_ch, cols.cols());
  out.noalias() = wm * cols;
  out.colwise() += b;
  out = out.cwiseMax(T(0));
  return out;
}

template <typename T>
Matrix<T> max_pool(const Matrix<T>& x, int batch, int h, int w, std::vector<int>* argmax) {
  const int c = static_cast<int>(x.rows());
  const int oh = h / 2;
  const int ow = w / 2;
  Matrix<T> out(c, static_cast<Eigen::Index>(batch) * oh * ow);
  if (argmax) argmax->assign(static_cast<std::size_t>(out.size()), 0);
  for (int s = 0; s < batch; ++s)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        const Eigen::Index o = static_cast<Eigen::Index>(s) * oh * ow + y * ow + xx;
        const Eigen::Index base = static_cast<Eigen::Index>(s) * h * w;
        const Eigen::Index taps[4] = {base + (2 * y) * w + 2 * xx, base + (2 * y) * w + 2 * xx + 1,
                                      base + (2 * y + 1) * w + 2 * xx,
                                      base + (2 * y + 1) * w + 2 * xx + 1};
        for (int k = 0; k < c; ++k) {
          Eigen::Index best = taps[0];
          T v = x(k, best);
          for (int t = 1; t < 4; ++t)
            if (x(k, taps[t]) > v) {
              v = x(k, taps[t]);
              best = taps[t];
            }
          out(k, o) = v;
          if (argmax) (*argmax)[static_cast<std::size_t>(o * c + k)] = static_cast<int>(best * c + k);
        }
      }
  return out;
}

}  // namespace

NetworkLayout network_layout(const ModelConfig& cfg) {
  NetworkLayout l;
  std::size_t off = 0;
  const auto shapes = conv_shapes(cfg);
  for (int i = 0; i < 4; ++i) {
    l.conv_weight[i] = off;
    off += static_cast<std::size_t>(shapes[i].out_ch) * 9 * shapes[i].in_ch;
    l.conv_bias[i] = off;
    off += shapes[i].out_ch;
  }
  const std::size_t group_in = static_cast<std::size_t>(cfg.output_channels() / cfg.groups) *
                               cfg.output_height() * cfg.output_width();
  const std::size_t group_out = static_cast<std::size_t>(cfg.embedding_dim / cfg.groups);
  for (int g = 0; g < cfg.groups; ++g) {
    l.fc_weight.push_back(off);
    off += group_out * group_in;
    l.fc_bias.push_back(off);
    off += group_out;
  }
  l.size = off;
  return l;
}

template <typename T>
Matrix<T> pack(std::span<const Piece* const> pieces) {
  if (pieces.empty()) return {};
  const int s = pieces.front()->size;
  const int c = pieces.front()->channels;
  const Eigen::Index per = static_cast<Eigen::Index>(s) * s;
  Matrix<T> m(c, per * static_cast<Eigen::Index>(pieces.size()));
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Piece& p = *pieces[i];
    if (p.size != s || p.channels != c) throw UsageError("batch pieces differ in shape");
    T* dst = m.data() + static_cast<Eigen::Index>(i) * per * c;
    for (std::size_t k = 0; k < p.data.size(); ++k) dst[k] = static_cast<T>(p.data[k]);
  }
  return m;
}

template <typename T>
Matrix<T> pack_pairs(std::span<const Piece* const> left, std::span<const Piece* const> right) {
  if (left.size() != right.size()) throw UsageError("pair batch halves differ in length");
  if (left.empty()) return {};
  const int s = left.front()->size;
  const int c = left.front()->channels;
  const Eigen::Index per = static_cast<Eigen::Index>(s) * 2 * s;
  Matrix<T> m(c, per * static_cast<Eigen::Index>(left.size()));
  for (std::size_t i = 0; i < left.size(); ++i) {
    const Piece& l = *left[i];
    const Piece& r = *right[i];
    if (l.size != s || r.size != s || l.channels != c || r.channels != c)
      throw UsageError("pair batch pieces differ in shape");
    T* dst = m.data() + static_cast<Eigen::Index>(i) * per * c;
    for (int y = 0; y < s; ++y) {
      for (int k = 0; k < s * c; ++k) dst[(y * 2 * s) * c + k] = static_cast<T>(l.data[y * s * c + k]);
      for (int k = 0; k < s * c; ++k)
        dst[(y * 2 * s + s) * c + k] = static_cast<T>(r.data[y * s * c + k]);
    }
  }
  return m;
}

template <typename T>
Matrix<T> forward(const ModelConfig& cfg, const T* params, const Matrix<T>& input, int batch,
                  Trace<T>* trace) {
  const auto shapes = conv_shapes(cfg);
  const NetworkLayout l = network_layout(cfg);
  const Eigen::Index in_cols =
      static_cast<Eigen::Index>(batch) * cfg.input_height() * cfg.input_width();
  if (input.rows() != cfg.channels_in || input.cols() != in_cols)
    throw UsageError("input batch does not match the model configuration");

  Matrix<T> a1 = conv_relu(input, batch, shapes[0], params + l.conv_weight[0], params + l.conv_bias[0]);
  Matrix<T> a2 = conv_relu(a1, batch, shapes[1], params + l.conv_weight[1], params + l.conv_bias[1]);
  std::vector<int> am1, am2;
  Matrix<T> p1 = max_pool(a2, batch, shapes[1].h, shapes[1].w, trace ? &am1 : nullptr);
  Matrix<T> a3 = conv_relu(p1, batch, shapes[2], params + l.conv_weight[2], params + l.conv_bias[2]);
  Matrix<T> p2 = max_pool(a3, batch, shapes[2].h, shapes[2].w, trace ? &am2 : nullptr);
  Matrix<T> a4 = conv_relu(p2, batch, shapes[3], params + l.conv_weight[3], params + l.conv_bias[3]);

  const int groups = cfg.groups;
  const int cg = cfg.output_channels() / groups;
  const int positions = cfg.output_height() * cfg.output_width();
  const int dg = cfg.embedding_dim / groups;
  Matrix<T> z(cfg.embedding_dim, batch);
  Matrix<T> feat(cg * positions, batch);
  for (int g = 0; g < groups; ++g) {
    for (int s = 0; s < batch; ++s)
      for (int cl = 0; cl < cg; ++cl)
        for (int p = 0; p < positions; ++p)
          feat(cl * positions + p, s) = a4(g * cg + cl, static_cast<Eigen::Index>(s) * positions + p);
    Eigen::Map<const RowMatrix<T>> wg(params + l.fc_weight[g], dg, cg * positions);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bg(params + l.fc_bias[g], dg);
    z.middleRows(static_cast<Eigen::Index>(g) * dg, dg).noalias() = wg * feat;
    z.middleRows(static_cast<Eigen::Index>(g) * dg, dg).colwise() += bg;
  }

  if (trace) {
    trace->batch = batch;
    trace->input = input;
    trace->conv = {std::move(a1), std::move(a2), std::move(a3), std::move(a4)};
    trace->pooled = {std::move(p1), std::move(p2)};
    trace->argmax = {std::move(am1), std::move(am2)};
  }
  return z;
}

template <typename T>
void backward(const ModelConfig& cfg, const T* params, const Trace<T>& tr,
              const Matrix<T>& grad_output, T* grad) {
  const auto shapes = conv_shapes(cfg);
  const NetworkLayout l = network_layout(cfg);
  const int batch = tr.batch;
  const int groups = cfg.groups;
  const int cg = cfg.output_channels() / groups;
  const int positions = cfg.output_height() * cfg.output_width();
  const int dg = cfg.embedding_dim / groups;

  // Grouped projection.
  Matrix<T> d4 = Matrix<T>::Zero(tr.conv[3].rows(), tr.conv[3].cols());
  Matrix<T> feat(cg * positions, batch);
  for (int g = 0; g < groups; ++g) {
    for (int s = 0; s < batch; ++s)
      for (int cl = 0; cl < cg; ++cl)
        for (int p = 0; p < positions; ++p)
          feat(cl * positions + p, s) =
              tr.conv[3](g * cg + cl, static_cast<Eigen::Index>(s) * positions + p);
    const auto dz = grad_output.middleRows(static_cast<Eigen::Index>(g) * dg, dg);
    Eigen::Map<RowMatrix<T>> gw(grad + l.fc_weight[g], dg, cg * positions);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(grad + l.fc_bias[g], dg);
    gw.noalias() += dz * feat.transpose();
    gb += dz.rowwise().sum();
    Eigen::Map<const RowMatrix<T>> wg(params + l.fc_weight[g], dg, cg * positions);
    const Matrix<T> dfeat = wg.transpose() * dz;
    for (int s = 0; s < batch; ++s)
      for (int cl = 0; cl < cg; ++cl)
        for (int p = 0; p < positions; ++p)
          d4(g * cg + cl, static_cast<Eigen::Index>(s) * positions + p) = dfeat(cl * positions + p, s);
  }

  // Conv layer: `dpost` is the gradient w.r.t. the post-ReLU output.
  auto conv_back = [&](int layer, const Matrix<T>& x_in, Matrix<T> dpost, Matrix<T>* dx) {
    const ConvShape& sh = shapes[layer];
    dpost = dpost.cwiseProduct((tr.conv[layer].array() > T(0)).template cast<T>().matrix());
    const Matrix<T> cols = im2col(x_in, batch, sh.h, sh.w);
    Eigen::Map<RowMatrix<T>> gw(grad + l.conv_weight[layer], sh.out_ch, 9 * sh.in_ch);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(grad + l.conv_bias[layer], sh.out_ch);
    gw.noalias() += dpost * cols.transpose();
    gb += dpost.rowwise().sum();
    if (dx) {
      Eigen::Map<const RowMatrix<T>> wm(params + l.conv_weight[layer], sh.out_ch, 9 * sh.in_ch);
      const Matrix<T> dcols = wm.transpose() * dpost;
      *dx = Matrix<T>::Zero(x_in.rows(), x_in.cols());
      col2im_add(dcols, batch, sh.h, sh.w, *dx);
    }
  };
  auto unpool = [](const Matrix<T>& dout, const std::vector<int>& argmax, Eigen::Index rows,
                   Eigen::Index cols) {
    Matrix<T> din = Matrix<T>::Zero(rows, cols);
    for (Eigen::Index k = 0; k < dout.size(); ++k) din.data()[argmax[k]] += dout.data()[k];
    return din;
  };

  Matrix<T> dp2, dp1, da2;
  conv_back(3, tr.pooled[1], std::move(d4), &dp2);
  Matrix<T> da3 = unpool(dp2, tr.argmax[1], tr.conv[2].rows(), tr.conv[2].cols());
  conv_back(2, tr.pooled[0], std::move(da3), &dp1);
  da2 = unpool(dp1, tr.argmax[0], tr.conv[1].rows(), tr.conv[1].cols());
  Matrix<T> da1;
  conv_back(1, tr.conv[0], std::move(da2), &da1);
  conv_back(0, tr.input, std::move(da1), nullptr);
}

#define JIGCM_NN_INSTANTIATE(T)                                                                  \
  template Matrix<T> pack<T>(std::span<const Piece* const>);                                     \
  template Matrix<T> pack_pairs<T>(std::span<const Piece* const>, std::span<const Piece* const>); \
  template Matrix<T> forward<T>(const ModelConfig&, const T*, const Matrix<T>&, int, Trace<T>*); \
  template void backward<T>(const ModelConfig&, const T*, const Trace<T>&, const Matrix<T>&, T*);

JIGCM_NN_INSTANTIATE(float)
JIGCM_NN_INSTANTIATE(double)

}  // namespace jigcm::nn
