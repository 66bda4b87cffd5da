#include "lumir/prompt.hpp"

#include <memory>
#include <stdexcept>

namespace lumir {

std::vector<int> scan_permutation(int h, int w, ScanDirection dir) {
    if (h < 1 || w < 1) throw std::invalid_argument("scan_permutation: bad grid size");
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    std::vector<int> perm(static_cast<size_t>(hw));
    switch (dir) {
        case ScanDirection::TlBr:
            for (std::int64_t k = 0; k < hw; ++k) perm[static_cast<size_t>(k)] = static_cast<int>(k);
            break;
        case ScanDirection::BrTl:
            for (std::int64_t k = 0; k < hw; ++k) {
                perm[static_cast<size_t>(k)] = static_cast<int>(hw - 1 - k);
            }
            break;
        case ScanDirection::TrBl: {
            size_t k = 0;
            for (int col = w - 1; col >= 0; --col) {
                for (int row = 0; row < h; ++row) perm[k++] = row * w + col;
            }
            break;
        }
        case ScanDirection::BlTr: {
            size_t k = 0;
            for (int col = 0; col < w; ++col) {
                for (int row = h - 1; row >= 0; --row) perm[k++] = row * w + col;
            }
            break;
        }
    }
    return perm;
}

std::vector<int> inverse_permutation(const std::vector<int>& perm) {
    std::vector<int> inv(perm.size());
    for (size_t k = 0; k < perm.size(); ++k) inv[static_cast<size_t>(perm[k])] = static_cast<int>(k);
    return inv;
}

Tensor directional_flatten(const Tensor& x, ScanDirection dir) {
    if (x.rank() != 3) throw std::invalid_argument("directional_flatten: expected (C,H,W)");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    std::vector<int> perm = scan_permutation(h, w, dir);
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor seq({static_cast<int>(hw), c});
    for (std::int64_t k = 0; k < hw; ++k) {
        int p = perm[static_cast<size_t>(k)];
        for (int ci = 0; ci < c; ++ci) seq[k * c + ci] = x.data()[ci * hw + p];
    }
    return seq;
}

Tensor directional_unflatten(const Tensor& seq, ScanDirection dir, int h, int w) {
    if (seq.rank() != 2) throw std::invalid_argument("directional_unflatten: expected (L,C)");
    std::int64_t hw = static_cast<std::int64_t>(h) * w;
    if (seq.dim(0) != hw) {
        throw std::invalid_argument("directional_unflatten: sequence length " +
                                    std::to_string(seq.dim(0)) + " != H*W = " +
                                    std::to_string(hw));
    }
    int c = seq.dim(1);
    std::vector<int> perm = scan_permutation(h, w, dir);
    Tensor x({c, h, w});
    for (std::int64_t k = 0; k < hw; ++k) {
        int p = perm[static_cast<size_t>(k)];
        for (int ci = 0; ci < c; ++ci) x.data()[ci * hw + p] = seq[k * c + ci];
    }
    return x;
}

ag::Var multiscale_extract(ag::Var x, const ApiVars& p) {
    ag::Var f3 = ag::conv2d(x, p.ms3_w, p.ms3_b, 1, 1);
    ag::Var f5 = ag::conv2d(x, p.ms5_w, p.ms5_b, 1, 2);
    ag::Var f7 = ag::conv2d(x, p.ms7_w, p.ms7_b, 1, 3);
    ag::Var cat = ag::channel_concat({f3, f5, f7});
    return ag::conv2d(cat, p.fuse_w, p.fuse_b, 1, 0);
}

ag::Var api_forward(ag::Var x, const ApiVars& p) {
    const Tensor& xv = x.val();
    int h = xv.dim(1), w = xv.dim(2);
    ag::Var xa = multiscale_extract(x, p);
    ag::Var pooled = ag::channel_concat(ag::channel_avg_pool(xa), ag::channel_max_pool(xa));
    ag::Var gate = ag::conv2d(pooled, p.gate_w, p.gate_b, 1, 1);
    ag::Var weights = ag::linear(ag::spatial_mean(ag::sigmoid(gate)), p.fcn_w, p.fcn_b);
    ag::Var combined = ag::weighted_component_sum(p.bank, weights);
    ag::Var resized = ag::bilinear_resize(combined, h, w);
    return ag::conv2d(resized, p.out_w, p.out_b, 1, 1);
}

ag::Var selective_scan_1d(ag::Var u, const ScanVars& p) {
    // Gates read a per-token RMS-normalized copy of u so their magnitude
    // stays bounded on long sequences; the recurrence consumes u itself.
    ag::Var un = ag::rms_norm_rows(u);
    ag::Var a = ag::sigmoid(ag::linear(un, p.wa, p.ba));
    ag::Var b = ag::linear(un, p.wb, p.bb);
    ag::Var c = ag::linear(un, p.wc, p.bc);
    return ag::scan_recurrence(a, b, c, u);
}

ag::Var gps_forward(ag::Var x, ag::Var p_prime, const GpsVars& p) {
    const Tensor& xv = x.val();
    const Tensor& pv = p_prime.val();
    if (xv.dim(1) != pv.dim(1) || xv.dim(2) != pv.dim(2)) {
        throw std::invalid_argument("gps_forward: feature/prompt spatial dims mismatch: " +
                                    shape_str(xv) + " vs " + shape_str(pv));
    }
    int h = xv.dim(1), w = xv.dim(2);
    ag::Var xp = ag::channel_concat(x, p_prime);
    ag::Var tok = ag::to_tokens(xp);
    std::vector<ag::Var> scanned;
    for (int d = 0; d < kScanDirectionCount; ++d) {
        auto perm = std::make_shared<const std::vector<int>>(
            scan_permutation(h, w, static_cast<ScanDirection>(d)));
        auto inv = std::make_shared<const std::vector<int>>(inverse_permutation(*perm));
        ag::Var fwd = ag::gather_rows(tok, perm);
        ag::Var out = selective_scan_1d(fwd, p.scan);
        scanned.push_back(ag::gather_rows(out, inv));
    }
    ag::Var summed = ag::from_tokens(ag::add_n(scanned), h, w);
    ag::Var proj = ag::conv2d(summed, p.proj_w, p.proj_b, 1, 0);
    ag::Var skip = ag::conv2d(ag::conv2d(x, p.skip1_w, p.skip1_b, 1, 0), p.skip2_w, p.skip2_b, 1, 1);
    return ag::add(proj, skip);
}

namespace {

ApiVars api_leaves(ag::Graph& g, const ApiParams& p) {
    ApiVars v;
    v.ms3_w = g.leaf(p.ms3_w);
    v.ms3_b = g.leaf(p.ms3_b);
    v.ms5_w = g.leaf(p.ms5_w);
    v.ms5_b = g.leaf(p.ms5_b);
    v.ms7_w = g.leaf(p.ms7_w);
    v.ms7_b = g.leaf(p.ms7_b);
    v.fuse_w = g.leaf(p.fuse_w);
    v.fuse_b = g.leaf(p.fuse_b);
    v.gate_w = g.leaf(p.gate_w);
    v.gate_b = g.leaf(p.gate_b);
    v.fcn_w = g.leaf(p.fcn_w);
    v.fcn_b = g.leaf(p.fcn_b);
    v.bank = g.leaf(p.bank);
    v.out_w = g.leaf(p.out_w);
    v.out_b = g.leaf(p.out_b);
    return v;
}

ScanVars scan_leaves(ag::Graph& g, const ScanParams& p) {
    ScanVars v;
    v.wa = g.leaf(p.wa);
    v.ba = g.leaf(p.ba);
    v.wb = g.leaf(p.wb);
    v.bb = g.leaf(p.bb);
    v.wc = g.leaf(p.wc);
    v.bc = g.leaf(p.bc);
    return v;
}

}  // namespace

Tensor multiscale_extract(const Tensor& x, const ApiParams& p) {
    ag::Graph g;
    return multiscale_extract(g.leaf(x), api_leaves(g, p)).val();
}

Tensor api_forward(const Tensor& x, const ApiParams& p) {
    ag::Graph g;
    return api_forward(g.leaf(x), api_leaves(g, p)).val();
}

Tensor selective_scan_1d(const Tensor& u, const ScanParams& p) {
    ag::Graph g;
    return selective_scan_1d(g.leaf(u), scan_leaves(g, p)).val();
}

Tensor gps_forward(const Tensor& x, const Tensor& p_prime, const GpsParams& p) {
    ag::Graph g;
    GpsVars v;
    v.scan = scan_leaves(g, p.scan);
    v.proj_w = g.leaf(p.proj_w);
    v.proj_b = g.leaf(p.proj_b);
    v.skip1_w = g.leaf(p.skip1_w);
    v.skip1_b = g.leaf(p.skip1_b);
    v.skip2_w = g.leaf(p.skip2_w);
    v.skip2_b = g.leaf(p.skip2_b);
    return gps_forward(g.leaf(x), g.leaf(p_prime), v).val();
}

}  // namespace lumir
