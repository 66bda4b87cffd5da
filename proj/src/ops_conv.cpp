#include <Eigen/Dense>
#include <memory>
#include <stdexcept>

#include "lumir/autograd.hpp"

namespace lumir::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Col layout: (Cin*k*k) rows x (Ho*Wo) cols, row r = (ci*k + ky)*k + kx.
void im2col(const Tensor& x, int k, int stride, int pad, int ho, int wo, Tensor& col) {
    int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    const double* xp = x.data();
    double* cp = col.data();
    std::int64_t p_total = static_cast<std::int64_t>(ho) * wo;
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cp + ((static_cast<std::int64_t>(ci) * k + ky) * k + kx) * p_total;
                for (int yo = 0; yo < ho; ++yo) {
                    int yi = yo * stride - pad + ky;
                    double* dst = row + static_cast<std::int64_t>(yo) * wo;
                    if (yi < 0 || yi >= h) {
                        for (int xo = 0; xo < wo; ++xo) dst[xo] = 0.0;
                        continue;
                    }
                    const double* src = xp + (static_cast<std::int64_t>(ci) * h + yi) * w;
                    for (int xo = 0; xo < wo; ++xo) {
                        int xi = xo * stride - pad + kx;
                        dst[xo] = (xi >= 0 && xi < w) ? src[xi] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const Tensor& dcol, int k, int stride, int pad, int ho, int wo, Tensor& dx) {
    int cin = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
    const double* cp = dcol.data();
    double* xp = dx.data();
    std::int64_t p_total = static_cast<std::int64_t>(ho) * wo;
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cp + ((static_cast<std::int64_t>(ci) * k + ky) * k + kx) * p_total;
                for (int yo = 0; yo < ho; ++yo) {
                    int yi = yo * stride - pad + ky;
                    if (yi < 0 || yi >= h) continue;
                    const double* src = row + static_cast<std::int64_t>(yo) * wo;
                    double* dst = xp + (static_cast<std::int64_t>(ci) * h + yi) * w;
                    for (int xo = 0; xo < wo; ++xo) {
                        int xi = xo * stride - pad + kx;
                        if (xi >= 0 && xi < w) dst[xi] += src[xo];
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    if (!x.valid() || !w.valid()) throw std::logic_error("conv2d: invalid arguments");
    Graph& g = *x.graph;
    if (w.graph != &g || (b.valid() && b.graph != &g)) {
        throw std::logic_error("conv2d: arguments belong to different graphs");
    }
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    if (xv.rank() != 3) throw std::invalid_argument("conv2d: input must be (Cin,H,W)");
    if (wv.rank() != 4 || wv.dim(2) != wv.dim(3)) {
        throw std::invalid_argument("conv2d: weight must be (Cout,Cin,k,k)");
    }
    int cin = xv.dim(0), h = xv.dim(1), wdim = xv.dim(2);
    int cout = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != cin) {
        throw std::invalid_argument("conv2d: weight expects " + std::to_string(wv.dim(1)) +
                                    " input channels, input has " + std::to_string(cin));
    }
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
    int ho = (h + 2 * pad - k) / stride + 1;
    int wo = (wdim + 2 * pad - k) / stride + 1;
    if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");
    if (b.valid() && (b.val().rank() != 1 || b.val().dim(0) != cout)) {
        throw std::invalid_argument("conv2d: bias must be (Cout)");
    }

    std::int64_t p_total = static_cast<std::int64_t>(ho) * wo;
    int ckk = cin * k * k;
    auto col = std::make_shared<Tensor>(std::vector<int>{ckk, static_cast<int>(p_total)});
    im2col(xv, k, stride, pad, ho, wo, *col);

    Tensor out({cout, ho, wo});
    {
        ConstMatMap wm(wv.data(), cout, ckk);
        ConstMatMap cm(col->data(), ckk, p_total);
        MatMap om(out.data(), cout, p_total);
        om.noalias() = wm * cm;
        if (b.valid()) {
            const double* bp = b.val().data();
            for (int co = 0; co < cout; ++co) om.row(co).array() += bp[co];
        }
    }

    bool rg = g.requires_grad(x) || g.requires_grad(w) || (b.valid() && g.requires_grad(b));
    int self = static_cast<int>(g.size());
    int px = x.id, pw = w.id, pb = b.valid() ? b.id : -1;
    return g.make_node(
        std::move(out), rg,
        [self, px, pw, pb, col, cin, cout, k, stride, pad, ho, wo, ckk, p_total](Graph& gg) {
            const Tensor& go = gg.node_grad(self);
            ConstMatMap dom(go.data(), cout, p_total);
            if (gg.node_requires_grad(pw)) {
                Tensor& gw = gg.grad_acc(pw);
                MatMap gwm(gw.data(), cout, ckk);
                ConstMatMap cm(col->data(), ckk, p_total);
                gwm.noalias() += dom * cm.transpose();
            }
            if (pb >= 0 && gg.node_requires_grad(pb)) {
                Tensor& gb = gg.grad_acc(pb);
                for (int co = 0; co < cout; ++co) gb[co] += dom.row(co).sum();
            }
            if (gg.node_requires_grad(px)) {
                const Tensor& wv2 = gg.node_value(pw);
                ConstMatMap wm(wv2.data(), cout, ckk);
                Tensor dcol({ckk, static_cast<int>(p_total)});
                MatMap dcm(dcol.data(), ckk, p_total);
                dcm.noalias() = wm.transpose() * dom;
                col2im_add(dcol, k, stride, pad, ho, wo, gg.grad_acc(px));
            }
        });
}

}  // namespace lumir::ag
