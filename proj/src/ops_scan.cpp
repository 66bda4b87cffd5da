#include <memory>
#include <stdexcept>

#include "lumir/autograd.hpp"

namespace lumir::ag {

Var scan_recurrence(Var a, Var b, Var c, Var u) {
    if (!a.valid() || !b.valid() || !c.valid() || !u.valid()) {
        throw std::logic_error("scan_recurrence: invalid arguments");
    }
    Graph& g = *a.graph;
    for (const Var& v : {b, c, u}) {
        if (v.graph != &g) throw std::logic_error("scan_recurrence: foreign Var");
        if (!v.val().same_shape(a.val())) {
            throw std::invalid_argument("scan_recurrence: all inputs must share shape, got " +
                                        shape_str(a.val()) + " vs " + shape_str(v.val()));
        }
    }
    const Tensor& av = a.val();
    if (av.rank() != 2) throw std::invalid_argument("scan_recurrence: inputs must be (L,C)");
    int l = av.dim(0), ch = av.dim(1);
    if (l < 1) throw std::invalid_argument("scan_recurrence: empty sequence");

    auto hstate = std::make_shared<Tensor>(std::vector<int>{l, ch});
    Tensor out({l, ch});
    {
        const double* ap = av.data();
        const double* bp = b.val().data();
        const double* cp = c.val().data();
        const double* up = u.val().data();
        double* hp = hstate->data();
        double* yp = out.data();
        for (int j = 0; j < ch; ++j) hp[j] = bp[j] * up[j];
        for (int t = 1; t < l; ++t) {
            const std::int64_t off = static_cast<std::int64_t>(t) * ch;
            const std::int64_t prev = off - ch;
            for (int j = 0; j < ch; ++j) {
                hp[off + j] = ap[off + j] * hp[prev + j] + bp[off + j] * up[off + j];
            }
        }
        for (std::int64_t i = 0; i < out.numel(); ++i) yp[i] = cp[i] * hp[i];
    }

    bool rg = g.requires_grad(a) || g.requires_grad(b) || g.requires_grad(c) || g.requires_grad(u);
    int self = static_cast<int>(g.size());
    int pa = a.id, pb = b.id, pc = c.id, pu = u.id;
    return g.make_node(std::move(out), rg, [self, pa, pb, pc, pu, hstate, l, ch](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        const Tensor& av2 = gg.node_value(pa);
        const Tensor& bv2 = gg.node_value(pb);
        const Tensor& cv2 = gg.node_value(pc);
        const Tensor& uv2 = gg.node_value(pu);
        bool na = gg.node_requires_grad(pa), nb = gg.node_requires_grad(pb);
        bool nc = gg.node_requires_grad(pc), nu = gg.node_requires_grad(pu);
        double* gap = na ? gg.grad_acc(pa).data() : nullptr;
        double* gbp = nb ? gg.grad_acc(pb).data() : nullptr;
        double* gcp = nc ? gg.grad_acc(pc).data() : nullptr;
        double* gup = nu ? gg.grad_acc(pu).data() : nullptr;
        const double* hp = hstate->data();
        const double* gop = go.data();
        std::vector<double> dh(static_cast<size_t>(ch), 0.0);
        for (int t = l - 1; t >= 0; --t) {
            const std::int64_t off = static_cast<std::int64_t>(t) * ch;
            for (int j = 0; j < ch; ++j) {
                double dht = gop[off + j] * cv2[off + j] + dh[static_cast<size_t>(j)];
                if (nc) gcp[off + j] += gop[off + j] * hp[off + j];
                if (nb) gbp[off + j] += dht * uv2[off + j];
                if (nu) gup[off + j] += dht * bv2[off + j];
                if (t > 0) {
                    if (na) gap[off + j] += dht * hp[off - ch + j];
                    dh[static_cast<size_t>(j)] = dht * av2[off + j];
                } else {
                    dh[static_cast<size_t>(j)] = 0.0;
                }
            }
        }
    });
}

}  // namespace lumir::ag
