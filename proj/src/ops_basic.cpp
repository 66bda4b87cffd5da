#include <cmath>
#include <memory>
#include <stdexcept>

#include "lumir/autograd.hpp"
#include "lumir/resize.hpp"

namespace lumir::ag {

namespace {

Graph& same_graph(std::initializer_list<Var> vs) {
    Graph* g = nullptr;
    for (const Var& v : vs) {
        if (!v.valid()) continue;
        if (g == nullptr) g = v.graph;
        if (v.graph != g) throw std::logic_error("op arguments belong to different graphs");
    }
    if (g == nullptr) throw std::logic_error("op requires at least one valid Var");
    return *g;
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
    if (!a.val().same_shape(b.val())) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a.val()) +
                                    " vs " + shape_str(b.val()));
    }
}

void require_chw(const Var& v, const char* what) {
    if (v.val().rank() != 3) {
        throw std::invalid_argument(std::string(what) + ": expected (C,H,W), got " +
                                    shape_str(v.val()));
    }
}

}  // namespace

Var add(Var a, Var b) { return add_n({a, b}); }

Var add_n(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("add_n: empty argument list");
    Graph& g = same_graph({xs.front()});
    std::vector<int> parents;
    bool rg = false;
    for (const Var& v : xs) {
        if (!v.valid() || v.graph != &g) throw std::logic_error("add_n: invalid or foreign Var");
        require_same_shape(xs.front(), v, "add_n");
        parents.push_back(v.id);
        rg = rg || g.requires_grad(v);
    }
    Tensor out = xs.front().val();
    for (size_t i = 1; i < xs.size(); ++i) out += xs[i].val();
    int self = static_cast<int>(g.size());
    return g.make_node(std::move(out), rg, [self, parents](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        for (int p : parents) {
            if (gg.node_requires_grad(p)) gg.grad_acc(p) += go;
        }
    });
}

Var sub(Var a, Var b) {
    Graph& g = same_graph({a, b});
    require_same_shape(a, b, "sub");
    Tensor out = a.val();
    const Tensor& bv = b.val();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
    bool rg = g.requires_grad(a) || g.requires_grad(b);
    int self = static_cast<int>(g.size());
    int pa = a.id, pb = b.id;
    return g.make_node(std::move(out), rg, [self, pa, pb](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        if (gg.node_requires_grad(pa)) gg.grad_acc(pa) += go;
        if (gg.node_requires_grad(pb)) {
            Tensor& gb = gg.grad_acc(pb);
            for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] -= go[i];
        }
    });
}

Var mul(Var a, Var b) {
    Graph& g = same_graph({a, b});
    require_same_shape(a, b, "mul");
    Tensor out = a.val();
    const Tensor& bv = b.val();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    bool rg = g.requires_grad(a) || g.requires_grad(b);
    int self = static_cast<int>(g.size());
    int pa = a.id, pb = b.id;
    return g.make_node(std::move(out), rg, [self, pa, pb](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        const Tensor& av = gg.node_value(pa);
        const Tensor& bv2 = gg.node_value(pb);
        if (gg.node_requires_grad(pa)) {
            Tensor& ga = gg.grad_acc(pa);
            for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * bv2[i];
        }
        if (gg.node_requires_grad(pb)) {
            Tensor& gb = gg.grad_acc(pb);
            for (std::int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i] * av[i];
        }
    });
}

Var scale(Var a, double s) {
    Graph& g = same_graph({a});
    Tensor out = a.val();
    out *= s;
    bool rg = g.requires_grad(a);
    int self = static_cast<int>(g.size());
    int pa = a.id;
    return g.make_node(std::move(out), rg, [self, pa, s](Graph& gg) {
        if (!gg.node_requires_grad(pa)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& ga = gg.grad_acc(pa);
        for (std::int64_t i = 0; i < go.numel(); ++i) ga[i] += s * go[i];
    });
}

Var sigmoid(Var x) {
    Graph& g = same_graph({x});
    Tensor out = x.val();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        const Tensor& y = gg.node_value(self);
        Tensor& gx = gg.grad_acc(px);
        for (std::int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] * y[i] * (1.0 - y[i]);
    });
}

Var gelu(Var x) {
    Graph& g = same_graph({x});
    Tensor out = x.val();
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        double v = out[i];
        out[i] = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
    }
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        const Tensor& xv = gg.node_value(px);
        Tensor& gx = gg.grad_acc(px);
        const double inv_sqrt_2pi = 0.3989422804014327;
        for (std::int64_t i = 0; i < go.numel(); ++i) {
            double v = xv[i];
            double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
            double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            gx[i] += go[i] * (cdf + v * pdf);
        }
    });
}

Var linear(Var x, Var w, Var b) {
    Graph& g = same_graph({x, w});
    const Tensor& xv = x.val();
    const Tensor& wv = w.val();
    if (wv.rank() != 2) throw std::invalid_argument("linear: weight must be rank-2");
    bool vec_in = xv.rank() == 1;
    if (!vec_in && xv.rank() != 2) throw std::invalid_argument("linear: input must be rank 1 or 2");
    int m = vec_in ? 1 : xv.dim(0);
    int k = vec_in ? xv.dim(0) : xv.dim(1);
    int n = wv.dim(1);
    if (wv.dim(0) != k) {
        throw std::invalid_argument("linear: inner dims mismatch " + shape_str(xv) + " x " +
                                    shape_str(wv));
    }
    if (b.valid()) {
        same_graph({x, b});
        if (b.val().rank() != 1 || b.val().dim(0) != n) {
            throw std::invalid_argument("linear: bias shape mismatch");
        }
    }
    Tensor out(vec_in ? std::vector<int>{n} : std::vector<int>{m, n});
    {
        const double* xp = xv.data();
        const double* wp = wv.data();
        double* op = out.data();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) op[static_cast<size_t>(i) * n + j] = 0.0;
            for (int kk = 0; kk < k; ++kk) {
                double xi = xp[static_cast<size_t>(i) * k + kk];
                if (xi == 0.0) continue;
                const double* wrow = wp + static_cast<size_t>(kk) * n;
                double* orow = op + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; ++j) orow[j] += xi * wrow[j];
            }
        }
        if (b.valid()) {
            const double* bp = b.val().data();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) op[static_cast<size_t>(i) * n + j] += bp[j];
            }
        }
    }
    bool rg = g.requires_grad(x) || g.requires_grad(w) || (b.valid() && g.requires_grad(b));
    int self = static_cast<int>(g.size());
    int px = x.id, pw = w.id, pb = b.valid() ? b.id : -1;
    return g.make_node(std::move(out), rg, [self, px, pw, pb, m, k, n](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        const Tensor& xv2 = gg.node_value(px);
        const Tensor& wv2 = gg.node_value(pw);
        const double* gop = go.data();
        if (gg.node_requires_grad(px)) {
            Tensor& gx = gg.grad_acc(px);
            double* gxp = gx.data();
            const double* wp = wv2.data();
            for (int i = 0; i < m; ++i) {
                for (int kk = 0; kk < k; ++kk) {
                    const double* wrow = wp + static_cast<size_t>(kk) * n;
                    const double* grow = gop + static_cast<size_t>(i) * n;
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += grow[j] * wrow[j];
                    gxp[static_cast<size_t>(i) * k + kk] += s;
                }
            }
        }
        if (gg.node_requires_grad(pw)) {
            Tensor& gw = gg.grad_acc(pw);
            double* gwp = gw.data();
            const double* xp = xv2.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = gop + static_cast<size_t>(i) * n;
                for (int kk = 0; kk < k; ++kk) {
                    double xi = xp[static_cast<size_t>(i) * k + kk];
                    if (xi == 0.0) continue;
                    double* gwrow = gwp + static_cast<size_t>(kk) * n;
                    for (int j = 0; j < n; ++j) gwrow[j] += xi * grow[j];
                }
            }
        }
        if (pb >= 0 && gg.node_requires_grad(pb)) {
            Tensor& gb = gg.grad_acc(pb);
            double* gbp = gb.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = gop + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; ++j) gbp[j] += grow[j];
            }
        }
    });
}

Var add_channel_bias(Var x, Var bias) {
    Graph& g = same_graph({x, bias});
    require_chw(x, "add_channel_bias");
    const Tensor& xv = x.val();
    const Tensor& bv = bias.val();
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (bv.rank() != 1 || bv.dim(0) != c) {
        throw std::invalid_argument("add_channel_bias: bias must be (C)");
    }
    Tensor out = xv;
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    for (int ci = 0; ci < c; ++ci) {
        double bb = bv[ci];
        double* row = out.data() + ci * hw;
        for (std::int64_t i = 0; i < hw; ++i) row[i] += bb;
    }
    bool rg = g.requires_grad(x) || g.requires_grad(bias);
    int self = static_cast<int>(g.size());
    int px = x.id, pbias = bias.id;
    return g.make_node(std::move(out), rg, [self, px, pbias, c, hw](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        if (gg.node_requires_grad(px)) gg.grad_acc(px) += go;
        if (gg.node_requires_grad(pbias)) {
            Tensor& gb = gg.grad_acc(pbias);
            for (int ci = 0; ci < c; ++ci) {
                const double* row = go.data() + ci * hw;
                double s = 0.0;
                for (std::int64_t i = 0; i < hw; ++i) s += row[i];
                gb[ci] += s;
            }
        }
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    Graph& g = same_graph({x, gain, bias});
    require_chw(x, "layer_norm");
    const Tensor& xv = x.val();
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (gain.val().rank() != 1 || gain.val().dim(0) != c || bias.val().rank() != 1 ||
        bias.val().dim(0) != c) {
        throw std::invalid_argument("layer_norm: gain/bias must be (C)");
    }
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    auto mu = std::make_shared<std::vector<double>>(static_cast<size_t>(hw));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(hw));
    Tensor out(xv.shape());
    const double* xp = xv.data();
    const double* gp = gain.val().data();
    const double* bp = bias.val().data();
    double* op = out.data();
    for (std::int64_t p = 0; p < hw; ++p) {
        double m = 0.0;
        for (int ci = 0; ci < c; ++ci) m += xp[ci * hw + p];
        m /= c;
        double v = 0.0;
        for (int ci = 0; ci < c; ++ci) {
            double d = xp[ci * hw + p] - m;
            v += d * d;
        }
        v /= c;
        double s = 1.0 / std::sqrt(v + eps);
        (*mu)[static_cast<size_t>(p)] = m;
        (*inv_std)[static_cast<size_t>(p)] = s;
        for (int ci = 0; ci < c; ++ci) {
            op[ci * hw + p] = gp[ci] * ((xp[ci * hw + p] - m) * s) + bp[ci];
        }
    }
    bool rg = g.requires_grad(x) || g.requires_grad(gain) || g.requires_grad(bias);
    int self = static_cast<int>(g.size());
    int px = x.id, pg = gain.id, pbias = bias.id;
    return g.make_node(std::move(out), rg, [self, px, pg, pbias, c, hw, mu, inv_std](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        const Tensor& xv2 = gg.node_value(px);
        const Tensor& gv = gg.node_value(pg);
        const double* gop = go.data();
        const double* xp2 = xv2.data();
        const double* gp2 = gv.data();
        bool need_x = gg.node_requires_grad(px);
        bool need_g = gg.node_requires_grad(pg);
        bool need_b = gg.node_requires_grad(pbias);
        double* gxp = need_x ? gg.grad_acc(px).data() : nullptr;
        double* ggp = need_g ? gg.grad_acc(pg).data() : nullptr;
        double* gbp = need_b ? gg.grad_acc(pbias).data() : nullptr;
        std::vector<double> xhat(static_cast<size_t>(c));
        std::vector<double> dxhat(static_cast<size_t>(c));
        for (std::int64_t p = 0; p < hw; ++p) {
            double m = (*mu)[static_cast<size_t>(p)];
            double s = (*inv_std)[static_cast<size_t>(p)];
            double m1 = 0.0, m2 = 0.0;
            for (int ci = 0; ci < c; ++ci) {
                double xh = (xp2[ci * hw + p] - m) * s;
                double dy = gop[ci * hw + p];
                xhat[static_cast<size_t>(ci)] = xh;
                double dxh = dy * gp2[ci];
                dxhat[static_cast<size_t>(ci)] = dxh;
                m1 += dxh;
                m2 += dxh * xh;
                if (need_g) ggp[ci] += dy * xh;
                if (need_b) gbp[ci] += dy;
            }
            if (!need_x) continue;
            m1 /= c;
            m2 /= c;
            for (int ci = 0; ci < c; ++ci) {
                gxp[ci * hw + p] +=
                    s * (dxhat[static_cast<size_t>(ci)] - m1 - xhat[static_cast<size_t>(ci)] * m2);
            }
        }
    });
}

Var channel_concat(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("channel_concat: empty argument list");
    Graph& g = same_graph({xs.front()});
    int h = -1, w = -1, ctotal = 0;
    for (const Var& v : xs) {
        if (!v.valid() || v.graph != &g) throw std::logic_error("channel_concat: foreign Var");
        require_chw(v, "channel_concat");
        if (h < 0) {
            h = v.val().dim(1);
            w = v.val().dim(2);
        } else if (v.val().dim(1) != h || v.val().dim(2) != w) {
            throw std::invalid_argument("channel_concat: spatial dims mismatch");
        }
        ctotal += v.val().dim(0);
    }
    Tensor out({ctotal, h, w});
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    std::vector<int> parents;
    std::vector<int> channels;
    bool rg = false;
    std::int64_t off = 0;
    for (const Var& v : xs) {
        const Tensor& t = v.val();
        std::copy(t.data(), t.data() + t.numel(), out.data() + off);
        off += t.numel();
        parents.push_back(v.id);
        channels.push_back(t.dim(0));
        rg = rg || g.requires_grad(v);
    }
    int self = static_cast<int>(g.size());
    return g.make_node(std::move(out), rg, [self, parents, channels, hw](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        std::int64_t off2 = 0;
        for (size_t i = 0; i < parents.size(); ++i) {
            std::int64_t len = static_cast<std::int64_t>(channels[i]) * hw;
            if (gg.node_requires_grad(parents[i])) {
                Tensor& gp = gg.grad_acc(parents[i]);
                const double* src = go.data() + off2;
                for (std::int64_t j = 0; j < len; ++j) gp[j] += src[j];
            }
            off2 += len;
        }
    });
}

Var channel_concat(Var a, Var b) { return channel_concat(std::vector<Var>{a, b}); }

Var channel_avg_pool(Var x) {
    Graph& g = same_graph({x});
    require_chw(x, "channel_avg_pool");
    const Tensor& xv = x.val();
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor out({1, h, w});
    const double* xp = xv.data();
    double* op = out.data();
    for (std::int64_t p = 0; p < hw; ++p) {
        double s = 0.0;
        for (int ci = 0; ci < c; ++ci) s += xp[ci * hw + p];
        op[p] = s / c;
    }
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px, c, hw](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& gx = gg.grad_acc(px);
        double inv = 1.0 / c;
        for (std::int64_t p = 0; p < hw; ++p) {
            double v = go[p] * inv;
            for (int ci = 0; ci < c; ++ci) gx[ci * hw + p] += v;
        }
    });
}

Var channel_max_pool(Var x) {
    Graph& g = same_graph({x});
    require_chw(x, "channel_max_pool");
    const Tensor& xv = x.val();
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor out({1, h, w});
    auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(hw));
    const double* xp = xv.data();
    double* op = out.data();
    for (std::int64_t p = 0; p < hw; ++p) {
        int best = 0;
        double bv = xp[p];
        for (int ci = 1; ci < c; ++ci) {
            double v = xp[ci * hw + p];
            if (v > bv) {
                bv = v;
                best = ci;
            }
        }
        op[p] = bv;
        (*argmax)[static_cast<size_t>(p)] = best;
    }
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px, hw, argmax](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& gx = gg.grad_acc(px);
        for (std::int64_t p = 0; p < hw; ++p) {
            gx[(*argmax)[static_cast<size_t>(p)] * hw + p] += go[p];
        }
    });
}

Var spatial_mean(Var x) {
    Graph& g = same_graph({x});
    require_chw(x, "spatial_mean");
    const Tensor& xv = x.val();
    int c = xv.dim(0);
    std::int64_t hw = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    Tensor out({c});
    for (int ci = 0; ci < c; ++ci) {
        const double* row = xv.data() + ci * hw;
        double s = 0.0;
        for (std::int64_t p = 0; p < hw; ++p) s += row[p];
        out[ci] = s / static_cast<double>(hw);
    }
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px, c, hw](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& gx = gg.grad_acc(px);
        double inv = 1.0 / static_cast<double>(hw);
        for (int ci = 0; ci < c; ++ci) {
            double v = go[ci] * inv;
            double* row = gx.data() + ci * hw;
            for (std::int64_t p = 0; p < hw; ++p) row[p] += v;
        }
    });
}

Var weighted_component_sum(Var bank, Var weights) {
    Graph& g = same_graph({bank, weights});
    const Tensor& pv = bank.val();
    const Tensor& wv = weights.val();
    if (pv.rank() != 4) throw std::invalid_argument("weighted_component_sum: bank must be rank-4");
    int n = pv.dim(0);
    if (wv.rank() != 1 || wv.dim(0) != n) {
        throw std::invalid_argument("weighted_component_sum: weights must be (N)");
    }
    std::int64_t chw = pv.numel() / n;
    Tensor out({pv.dim(1), pv.dim(2), pv.dim(3)});
    for (int ni = 0; ni < n; ++ni) {
        double wgt = wv[ni];
        const double* src = pv.data() + ni * chw;
        for (std::int64_t i = 0; i < chw; ++i) out[i] += wgt * src[i];
    }
    bool rg = g.requires_grad(bank) || g.requires_grad(weights);
    int self = static_cast<int>(g.size());
    int pbank = bank.id, pw = weights.id;
    return g.make_node(std::move(out), rg, [self, pbank, pw, n, chw](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        const Tensor& pv2 = gg.node_value(pbank);
        const Tensor& wv2 = gg.node_value(pw);
        if (gg.node_requires_grad(pbank)) {
            Tensor& gp = gg.grad_acc(pbank);
            for (int ni = 0; ni < n; ++ni) {
                double wgt = wv2[ni];
                double* dst = gp.data() + ni * chw;
                for (std::int64_t i = 0; i < chw; ++i) dst[i] += wgt * go[i];
            }
        }
        if (gg.node_requires_grad(pw)) {
            Tensor& gw = gg.grad_acc(pw);
            for (int ni = 0; ni < n; ++ni) {
                const double* src = pv2.data() + ni * chw;
                double s = 0.0;
                for (std::int64_t i = 0; i < chw; ++i) s += src[i] * go[i];
                gw[ni] += s;
            }
        }
    });
}

Var bilinear_resize(Var x, int out_h, int out_w) {
    Graph& g = same_graph({x});
    require_chw(x, "bilinear_resize");
    const Tensor& xv = x.val();
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    Tensor out = lumir::bilinear_resize(xv, out_h, out_w);
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px, c, h, w, out_h, out_w](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& gx = gg.grad_acc(px);
        auto ty = interp_taps(h, out_h);
        auto tx = interp_taps(w, out_w);
        for (int ci = 0; ci < c; ++ci) {
            for (int yo = 0; yo < out_h; ++yo) {
                const LinTap& a = ty[static_cast<size_t>(yo)];
                for (int xo = 0; xo < out_w; ++xo) {
                    const LinTap& b = tx[static_cast<size_t>(xo)];
                    double gv = go.at(ci, yo, xo);
                    gx.at(ci, a.i0, b.i0) += gv * (1.0 - a.w1) * (1.0 - b.w1);
                    gx.at(ci, a.i0, b.i1) += gv * (1.0 - a.w1) * b.w1;
                    gx.at(ci, a.i1, b.i0) += gv * a.w1 * (1.0 - b.w1);
                    gx.at(ci, a.i1, b.i1) += gv * a.w1 * b.w1;
                }
            }
        }
    });
}

Var nearest_upsample(Var x, int factor) {
    Graph& g = same_graph({x});
    require_chw(x, "nearest_upsample");
    const Tensor& xv = x.val();
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    Tensor out = nearest_upsample_tensor(xv, factor);
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px, c, h, w, factor](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& gx = gg.grad_acc(px);
        for (int ci = 0; ci < c; ++ci) {
            for (int yo = 0; yo < h * factor; ++yo) {
                for (int xo = 0; xo < w * factor; ++xo) {
                    gx.at(ci, yo / factor, xo / factor) += go.at(ci, yo, xo);
                }
            }
        }
    });
}

Var to_tokens(Var x) {
    Graph& g = same_graph({x});
    require_chw(x, "to_tokens");
    const Tensor& xv = x.val();
    int c = xv.dim(0);
    std::int64_t hw = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    Tensor out({static_cast<int>(hw), c});
    const double* xp = xv.data();
    double* op = out.data();
    for (int ci = 0; ci < c; ++ci) {
        for (std::int64_t p = 0; p < hw; ++p) op[p * c + ci] = xp[ci * hw + p];
    }
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px, c, hw](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& gx = gg.grad_acc(px);
        const double* gop = go.data();
        double* gxp = gx.data();
        for (int ci = 0; ci < c; ++ci) {
            for (std::int64_t p = 0; p < hw; ++p) gxp[ci * hw + p] += gop[p * c + ci];
        }
    });
}

Var from_tokens(Var t, int h, int w) {
    Graph& g = same_graph({t});
    const Tensor& tv = t.val();
    if (tv.rank() != 2 || tv.dim(0) != h * w) {
        throw std::invalid_argument("from_tokens: expected (" + std::to_string(h * w) +
                                    ",C), got " + shape_str(tv));
    }
    int c = tv.dim(1);
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor out({c, h, w});
    const double* tp = tv.data();
    double* op = out.data();
    for (std::int64_t p = 0; p < hw; ++p) {
        for (int ci = 0; ci < c; ++ci) op[ci * hw + p] = tp[p * c + ci];
    }
    bool rg = g.requires_grad(t);
    int self = static_cast<int>(g.size());
    int pt = t.id;
    return g.make_node(std::move(out), rg, [self, pt, c, hw](Graph& gg) {
        if (!gg.node_requires_grad(pt)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& gt = gg.grad_acc(pt);
        const double* gop = go.data();
        double* gtp = gt.data();
        for (std::int64_t p = 0; p < hw; ++p) {
            for (int ci = 0; ci < c; ++ci) gtp[p * c + ci] += gop[ci * hw + p];
        }
    });
}

Var gather_rows(Var t, std::shared_ptr<const std::vector<int>> perm) {
    Graph& g = same_graph({t});
    const Tensor& tv = t.val();
    if (tv.rank() != 2) throw std::invalid_argument("gather_rows: expected rank-2 input");
    int l = tv.dim(0), c = tv.dim(1);
    if (static_cast<int>(perm->size()) != l) {
        throw std::invalid_argument("gather_rows: permutation length mismatch");
    }
    Tensor out({l, c});
    const double* tp = tv.data();
    double* op = out.data();
    for (int r = 0; r < l; ++r) {
        const double* src = tp + static_cast<size_t>((*perm)[static_cast<size_t>(r)]) * c;
        double* dst = op + static_cast<size_t>(r) * c;
        std::copy(src, src + c, dst);
    }
    bool rg = g.requires_grad(t);
    int self = static_cast<int>(g.size());
    int pt = t.id;
    return g.make_node(std::move(out), rg, [self, pt, perm, l, c](Graph& gg) {
        if (!gg.node_requires_grad(pt)) return;
        const Tensor& go = gg.node_grad(self);
        Tensor& gt = gg.grad_acc(pt);
        const double* gop = go.data();
        double* gtp = gt.data();
        for (int r = 0; r < l; ++r) {
            double* dst = gtp + static_cast<size_t>((*perm)[static_cast<size_t>(r)]) * c;
            const double* src = gop + static_cast<size_t>(r) * c;
            for (int j = 0; j < c; ++j) dst[j] += src[j];
        }
    });
}

Var rms_norm_rows(Var x, double eps) {
    Graph& g = same_graph({x});
    const Tensor& xv = x.val();
    if (xv.rank() != 2) throw std::invalid_argument("rms_norm_rows: expected rank-2 input");
    int l = xv.dim(0), c = xv.dim(1);
    auto inv_rms = std::make_shared<std::vector<double>>(static_cast<size_t>(l));
    Tensor out({l, c});
    for (int r = 0; r < l; ++r) {
        const double* row = xv.data() + static_cast<size_t>(r) * c;
        double m = 0.0;
        for (int j = 0; j < c; ++j) m += row[j] * row[j];
        double s = 1.0 / std::sqrt(m / c + eps);
        (*inv_rms)[static_cast<size_t>(r)] = s;
        double* orow = out.data() + static_cast<size_t>(r) * c;
        for (int j = 0; j < c; ++j) orow[j] = row[j] * s;
    }
    bool rg = g.requires_grad(x);
    int self = static_cast<int>(g.size());
    int px = x.id;
    return g.make_node(std::move(out), rg, [self, px, l, c, inv_rms](Graph& gg) {
        if (!gg.node_requires_grad(px)) return;
        const Tensor& go = gg.node_grad(self);
        const Tensor& xv2 = gg.node_value(px);
        Tensor& gx = gg.grad_acc(px);
        for (int r = 0; r < l; ++r) {
            const double* row = xv2.data() + static_cast<size_t>(r) * c;
            const double* grow = go.data() + static_cast<size_t>(r) * c;
            double* gxrow = gx.data() + static_cast<size_t>(r) * c;
            double s = (*inv_rms)[static_cast<size_t>(r)];
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += grow[j] * row[j];
            double k = s * s * s * dot / c;
            for (int j = 0; j < c; ++j) gxrow[j] += s * grow[j] - k * row[j];
        }
    });
}

Var l1_loss(Var pred, Var target) {
    Graph& g = same_graph({pred, target});
    require_same_shape(pred, target, "l1_loss");
    const Tensor& pv = pred.val();
    const Tensor& tv = target.val();
    double s = 0.0;
    for (std::int64_t i = 0; i < pv.numel(); ++i) s += std::abs(pv[i] - tv[i]);
    Tensor out = Tensor::full({1}, s / static_cast<double>(pv.numel()));
    bool rg = g.requires_grad(pred) || g.requires_grad(target);
    int self = static_cast<int>(g.size());
    int pp = pred.id, pt = target.id;
    return g.make_node(std::move(out), rg, [self, pp, pt](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        const Tensor& pv2 = gg.node_value(pp);
        const Tensor& tv2 = gg.node_value(pt);
        double gs = go[0] / static_cast<double>(pv2.numel());
        bool need_p = gg.node_requires_grad(pp);
        bool need_t = gg.node_requires_grad(pt);
        double* gpp = need_p ? gg.grad_acc(pp).data() : nullptr;
        double* gtp = need_t ? gg.grad_acc(pt).data() : nullptr;
        for (std::int64_t i = 0; i < pv2.numel(); ++i) {
            double d = pv2[i] - tv2[i];
            double sg = d > 0.0 ? gs : (d < 0.0 ? -gs : 0.0);
            if (need_p) gpp[i] += sg;
            if (need_t) gtp[i] -= sg;
        }
    });
}

}  // namespace lumir::ag
