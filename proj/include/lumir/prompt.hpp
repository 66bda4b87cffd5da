#pragma once

#include <vector>

#include "lumir/autograd.hpp"
#include "lumir/tensor.hpp"

namespace lumir {

// Traversal orders for the cross-scan. Serialization order is part of the
// checkpoint contract: TlBr=0, BrTl=1, TrBl=2, BlTr=3.
enum class ScanDirection { TlBr = 0, BrTl = 1, TrBl = 2, BlTr = 3 };

constexpr int kScanDirectionCount = 4;

// Position permutation for a direction: perm[k] is the row-major index of
// the k-th visited position. TlBr is row-major; BrTl its reversal; TrBl is
// column-major from the top-right corner, down each column then leftward;
// BlTr its reversal.
std::vector<int> scan_permutation(int h, int w, ScanDirection dir);
std::vector<int> inverse_permutation(const std::vector<int>& perm);

// Plain-tensor flatten/unflatten: (C,H,W) <-> (H*W, C) sequence of
// C-vectors in traversal order.
Tensor directional_flatten(const Tensor& x, ScanDirection dir);
Tensor directional_unflatten(const Tensor& seq, ScanDirection dir, int h, int w);

// --- Adaptive Prompt Integration ---
struct ApiVars {
    ag::Var ms3_w, ms3_b;    // (C,C,3,3), (C)
    ag::Var ms5_w, ms5_b;    // (C,C,5,5), (C)
    ag::Var ms7_w, ms7_b;    // (C,C,7,7), (C)
    ag::Var fuse_w, fuse_b;  // (C,3C,1,1), (C)
    ag::Var gate_w, gate_b;  // (N,2,3,3), (N)
    ag::Var fcn_w, fcn_b;    // (N,N), (N)
    ag::Var bank;            // (N,Cp,Hp,Wp)
    ag::Var out_w, out_b;    // (Cp,Cp,3,3), (Cp)
};

// Parallel 3/5/7 convolutions concatenated and fused back to C channels.
ag::Var multiscale_extract(ag::Var x, const ApiVars& p);
// Gated prompt emission: pooled multi-scale features weight the component
// bank, which is resized to the feature resolution and refined by a 3x3.
ag::Var api_forward(ag::Var x, const ApiVars& p);

// --- selective scan ---
struct ScanVars {
    ag::Var wa, ba;  // retention gate head (C,C), (C); sigmoid-activated
    ag::Var wb, bb;  // input gate head
    ag::Var wc, bc;  // output gate head
};

// Input-dependent gated linear recurrence over a (L,C) sequence:
// h_k = a_k*h_{k-1} + b_k*u_k, y_k = c_k*h_k. The gate heads are linear
// maps of a per-token RMS-normalized copy of u (a_k sigmoid-activated);
// the recurrence itself runs on the raw sequence.
ag::Var selective_scan_1d(ag::Var u, const ScanVars& p);

// --- Global Prompt Scanner ---
struct GpsVars {
    ScanVars scan;             // gates over C+Cp channels, shared by all directions
    ag::Var proj_w, proj_b;    // (C, C+Cp, 1, 1), (C)
    ag::Var skip1_w, skip1_b;  // (C,C,1,1), (C)
    ag::Var skip2_w, skip2_b;  // (C,C,3,3), (C)
};

// Concatenates features with the prompt, cross-scans in all four
// directions, sums, projects back to C channels and adds the convolved
// skip path.
ag::Var gps_forward(ag::Var x, ag::Var p_prime, const GpsVars& p);

// Plain-tensor convenience wrappers (build a throwaway graph).
struct ApiParams {
    Tensor ms3_w, ms3_b, ms5_w, ms5_b, ms7_w, ms7_b, fuse_w, fuse_b;
    Tensor gate_w, gate_b, fcn_w, fcn_b, bank, out_w, out_b;
};
struct ScanParams {
    Tensor wa, ba, wb, bb, wc, bc;
};
struct GpsParams {
    ScanParams scan;
    Tensor proj_w, proj_b, skip1_w, skip1_b, skip2_w, skip2_b;
};

Tensor multiscale_extract(const Tensor& x, const ApiParams& p);
Tensor api_forward(const Tensor& x, const ApiParams& p);
Tensor selective_scan_1d(const Tensor& u, const ScanParams& p);
Tensor gps_forward(const Tensor& x, const Tensor& p_prime, const GpsParams& p);

}  // namespace lumir
