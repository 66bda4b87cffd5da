#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "lumir/autograd.hpp"

namespace lumir::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void add_row_bias(MatMap m, const Tensor& b) {
    Eigen::Map<const Eigen::RowVectorXd> bv(b.data(), b.numel());
    m.rowwise() += bv;
}

void softmax_rows_inplace(MatMap m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = m.row(r).array();
        double mx = row.maxCoeff();
        row = (row - mx).exp();
        row /= row.sum();
    }
}

}  // namespace

Var multihead_attention(Var x, Var wq, Var bq, Var wk, Var bk, Var wv, Var bv, Var wo, Var bo,
                        int heads) {
    if (!x.valid()) throw std::logic_error("multihead_attention: invalid input");
    Graph& g = *x.graph;
    for (const Var& v : {wq, bq, wk, bk, wv, bv, wo, bo}) {
        if (!v.valid() || v.graph != &g) {
            throw std::logic_error("multihead_attention: invalid or foreign parameter");
        }
    }
    const Tensor& xv = x.val();
    if (xv.rank() != 2) throw std::invalid_argument("multihead_attention: input must be (L,C)");
    int l = xv.dim(0), c = xv.dim(1);
    if (heads < 1 || c % heads != 0) {
        throw std::invalid_argument("multihead_attention: channels not divisible by heads");
    }
    for (const Var& v : {wq, wk, wv, wo}) {
        if (v.val().shape() != std::vector<int>{c, c}) {
            throw std::invalid_argument("multihead_attention: projection must be (C,C)");
        }
    }
    for (const Var& v : {bq, bk, bv, bo}) {
        if (v.val().shape() != std::vector<int>{c}) {
            throw std::invalid_argument("multihead_attention: bias must be (C)");
        }
    }
    int dh = c / heads;
    double alpha = 1.0 / std::sqrt(static_cast<double>(dh));

    auto q = std::make_shared<Tensor>(std::vector<int>{l, c});
    auto k = std::make_shared<Tensor>(std::vector<int>{l, c});
    auto v = std::make_shared<Tensor>(std::vector<int>{l, c});
    auto o = std::make_shared<Tensor>(std::vector<int>{l, c});
    auto p = std::make_shared<Tensor>(std::vector<int>{heads, l, l});

    ConstMatMap xm(xv.data(), l, c);
    {
        MatMap qm(q->data(), l, c), km(k->data(), l, c), vm(v->data(), l, c);
        qm.noalias() = xm * ConstMatMap(wq.val().data(), c, c);
        km.noalias() = xm * ConstMatMap(wk.val().data(), c, c);
        vm.noalias() = xm * ConstMatMap(wv.val().data(), c, c);
        add_row_bias(qm, bq.val());
        add_row_bias(km, bk.val());
        add_row_bias(vm, bv.val());
        MatMap om(o->data(), l, c);
        for (int hd = 0; hd < heads; ++hd) {
            MatMap pm(p->data() + static_cast<std::int64_t>(hd) * l * l, l, l);
            pm.noalias() = alpha * (qm.middleCols(hd * dh, dh) *
                                    km.middleCols(hd * dh, dh).transpose());
            softmax_rows_inplace(pm);
            om.middleCols(hd * dh, dh).noalias() = pm * vm.middleCols(hd * dh, dh);
        }
    }
    Tensor out({l, c});
    {
        MatMap ym(out.data(), l, c);
        ym.noalias() = ConstMatMap(o->data(), l, c) * ConstMatMap(wo.val().data(), c, c);
        add_row_bias(ym, bo.val());
    }

    bool rg = false;
    for (const Var& vv : {x, wq, bq, wk, bk, wv, bv, wo, bo}) rg = rg || g.requires_grad(vv);
    int self = static_cast<int>(g.size());
    int px = x.id;
    int pwq = wq.id, pbq = bq.id, pwk = wk.id, pbk = bk.id;
    int pwv = wv.id, pbv = bv.id, pwo = wo.id, pbo = bo.id;
    return g.make_node(std::move(out), rg, [=](Graph& gg) {
        const Tensor& go = gg.node_grad(self);
        ConstMatMap dym(go.data(), l, c);
        ConstMatMap om(o->data(), l, c);
        ConstMatMap qm(q->data(), l, c), km(k->data(), l, c), vm(v->data(), l, c);
        ConstMatMap xm2(gg.node_value(px).data(), l, c);

        if (gg.node_requires_grad(pwo)) {
            MatMap gwo(gg.grad_acc(pwo).data(), c, c);
            gwo.noalias() += om.transpose() * dym;
        }
        if (gg.node_requires_grad(pbo)) {
            Tensor& gbo = gg.grad_acc(pbo);
            Eigen::Map<Eigen::RowVectorXd>(gbo.data(), c) += dym.colwise().sum();
        }

        RowMat do_(l, c);
        do_.noalias() = dym * ConstMatMap(gg.node_value(pwo).data(), c, c).transpose();

        RowMat dq = RowMat::Zero(l, c), dk = RowMat::Zero(l, c), dv = RowMat::Zero(l, c);
        RowMat dp(l, l);
        for (int hd = 0; hd < heads; ++hd) {
            ConstMatMap pm(p->data() + static_cast<std::int64_t>(hd) * l * l, l, l);
            auto doh = do_.middleCols(hd * dh, dh);
            dp.noalias() = doh * vm.middleCols(hd * dh, dh).transpose();
            dv.middleCols(hd * dh, dh).noalias() = pm.transpose() * doh;
            // softmax backward, in place on dp
            for (int r = 0; r < l; ++r) {
                auto prow = pm.row(r).array();
                auto drow = dp.row(r).array();
                double dot = (prow * drow).sum();
                dp.row(r).array() = prow * (drow - dot);
            }
            dq.middleCols(hd * dh, dh).noalias() = alpha * (dp * km.middleCols(hd * dh, dh));
            dk.middleCols(hd * dh, dh).noalias() =
                alpha * (dp.transpose() * qm.middleCols(hd * dh, dh));
        }

        auto accumulate_proj = [&](int pweight, int pbias, const RowMat& dproj) {
            if (gg.node_requires_grad(pweight)) {
                MatMap gw(gg.grad_acc(pweight).data(), c, c);
                gw.noalias() += xm2.transpose() * dproj;
            }
            if (gg.node_requires_grad(pbias)) {
                Eigen::Map<Eigen::RowVectorXd>(gg.grad_acc(pbias).data(), c) +=
                    dproj.colwise().sum();
            }
            if (gg.node_requires_grad(px)) {
                MatMap gx(gg.grad_acc(px).data(), l, c);
                gx.noalias() += dproj * ConstMatMap(gg.node_value(pweight).data(), c, c).transpose();
            }
        };
        accumulate_proj(pwq, pbq, dq);
        accumulate_proj(pwk, pbk, dk);
        accumulate_proj(pwv, pbv, dv);
    });
}

}  // namespace lumir::ag
