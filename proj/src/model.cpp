#include "lumir/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lumir {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::string join_int_list(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

Tensor randn(std::vector<int> shape, double std_dev, Rng& rng) {
    Tensor t = rng.normal_tensor(std::move(shape));
    t *= std_dev;
    return t;
}

Tensor conv_he(int cout, int cin, int k, Rng& rng) {
    return randn({cout, cin, k, k}, std::sqrt(2.0 / (static_cast<double>(cin) * k * k)), rng);
}

Tensor linear_xavier(int in, int out, Rng& rng) {
    return randn({in, out}, std::sqrt(1.0 / in), rng);
}

}  // namespace

void ModelConfig::validate() const {
    if (levels < 2) throw std::invalid_argument("ModelConfig: levels must be >= 2");
    if (base_channels < 1) throw std::invalid_argument("ModelConfig: base_channels must be >= 1");
    if (static_cast<int>(channel_mults.size()) != levels) {
        throw std::invalid_argument("ModelConfig: channel_mults must have one entry per level");
    }
    if (!heads.empty() && static_cast<int>(heads.size()) != levels) {
        throw std::invalid_argument("ModelConfig: heads must be empty or one entry per level");
    }
    for (int i = 0; i < levels; ++i) {
        if (channel_mults[static_cast<size_t>(i)] < 1) {
            throw std::invalid_argument("ModelConfig: channel multipliers must be >= 1");
        }
        int c = width(i), h = head_count(i);
        if (h < 1 || c % h != 0) {
            throw std::invalid_argument("ModelConfig: width " + std::to_string(c) +
                                        " at level " + std::to_string(i) +
                                        " not divisible by head count " + std::to_string(h));
        }
    }
    if (blocks_per_stage < 1 || bottleneck_blocks < 1) {
        throw std::invalid_argument("ModelConfig: block counts must be >= 1");
    }
    if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
        throw std::invalid_argument("ModelConfig: time_embed_dim must be even and >= 2");
    }
    if (image_channels < 1) throw std::invalid_argument("ModelConfig: image_channels must be >= 1");
    if (prompt_components < 1) {
        throw std::invalid_argument("ModelConfig: prompt_components must be >= 1");
    }
    if (prompt_size < 1) throw std::invalid_argument("ModelConfig: prompt_size must be >= 1");
    if (block_kind != "transformer" && block_kind != "conv") {
        throw std::invalid_argument("ModelConfig: block_kind must be 'transformer' or 'conv'");
    }
}

int ModelConfig::width(int level) const {
    return base_channels * channel_mults[static_cast<size_t>(level)];
}

int ModelConfig::head_count(int level) const {
    if (!heads.empty()) return heads[static_cast<size_t>(level)];
    int c = width(level);
    return c >= 16 ? c / 16 : 1;
}

void ModelConfig::to_config(KvConfig& out) const {
    out.set_int("model.levels", levels);
    out.set_int("model.base_channels", base_channels);
    out.set("model.channel_mults", join_int_list(channel_mults));
    out.set("model.heads", join_int_list(heads));
    out.set_int("model.blocks_per_stage", blocks_per_stage);
    out.set_int("model.bottleneck_blocks", bottleneck_blocks);
    out.set_int("model.time_embed_dim", time_embed_dim);
    out.set_int("model.image_channels", image_channels);
    out.set_int("model.prompt_components", prompt_components);
    out.set_int("model.prompt_size", prompt_size);
    out.set_int("model.use_api", use_api ? 1 : 0);
    out.set_int("model.use_gps", use_gps ? 1 : 0);
    out.set("model.block_kind", block_kind);
}

ModelConfig ModelConfig::from_config(const KvConfig& cfg) {
    ModelConfig m;
    m.levels = cfg.get_int("model.levels", m.levels);
    m.base_channels = cfg.get_int("model.base_channels", m.base_channels);
    if (cfg.has("model.channel_mults")) {
        m.channel_mults = parse_int_list(cfg.get_str("model.channel_mults"));
    } else if (m.levels != static_cast<int>(m.channel_mults.size())) {
        m.channel_mults.assign(static_cast<size_t>(m.levels), 1);
    }
    if (cfg.has("model.heads")) m.heads = parse_int_list(cfg.get_str("model.heads"));
    m.blocks_per_stage = cfg.get_int("model.blocks_per_stage", m.blocks_per_stage);
    m.bottleneck_blocks = cfg.get_int("model.bottleneck_blocks", m.bottleneck_blocks);
    m.time_embed_dim = cfg.get_int("model.time_embed_dim", m.time_embed_dim);
    m.image_channels = cfg.get_int("model.image_channels", m.image_channels);
    m.prompt_components = cfg.get_int("model.prompt_components", m.prompt_components);
    m.prompt_size = cfg.get_int("model.prompt_size", m.prompt_size);
    m.use_api = cfg.get_bool("model.use_api", m.use_api);
    m.use_gps = cfg.get_bool("model.use_gps", m.use_gps);
    m.block_kind = cfg.get_str("model.block_kind", m.block_kind);
    m.validate();
    return m;
}

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    if (map_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
    order_.push_back(name);
    return map_[name] = std::move(init);
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = map_.find(name);
    if (it == map_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

bool ParamStore::has(const std::string& name) const { return map_.count(name) > 0; }

std::int64_t ParamStore::total_size() const {
    std::int64_t n = 0;
    for (const auto& name : order_) n += map_.at(name).numel();
    return n;
}

Tensor sinusoidal_embedding(int t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("sinusoidal_embedding: dim must be even");
    int half = dim / 2;
    Tensor e({dim});
    double log_base = std::log(10000.0) / half;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-log_base * i);
        e[i] = std::sin(t * freq);
        e[half + i] = std::cos(t * freq);
    }
    return e;
}

Model::Model(ModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    register_params(rng);
}

int Model::prompt_active_count() const {
    return cfg_.prompt_active() ? cfg_.levels - 1 : 0;
}

void Model::register_params(Rng& rng) {
    const int tdim = cfg_.time_embed_dim;
    params_.add("temb.l1.w", linear_xavier(tdim, tdim, rng));
    params_.add("temb.l1.b", Tensor::zeros({tdim}));
    params_.add("temb.l2.w", linear_xavier(tdim, tdim, rng));
    params_.add("temb.l2.b", Tensor::zeros({tdim}));

    const int c0 = cfg_.width(0);
    params_.add("sfe.w", conv_he(c0, 2 * cfg_.image_channels, 3, rng));
    params_.add("sfe.b", Tensor::zeros({c0}));

    auto add_block = [&](const std::string& prefix, int c) {
        params_.add(prefix + ".norm1.g", Tensor::full({c}, 1.0));
        params_.add(prefix + ".norm1.b", Tensor::zeros({c}));
        if (cfg_.block_kind == "transformer") {
            params_.add(prefix + ".attn.wq", linear_xavier(c, c, rng));
            params_.add(prefix + ".attn.bq", Tensor::zeros({c}));
            params_.add(prefix + ".attn.wk", linear_xavier(c, c, rng));
            params_.add(prefix + ".attn.bk", Tensor::zeros({c}));
            params_.add(prefix + ".attn.wv", linear_xavier(c, c, rng));
            params_.add(prefix + ".attn.bv", Tensor::zeros({c}));
            params_.add(prefix + ".attn.wo", Tensor::zeros({c, c}));
            params_.add(prefix + ".attn.bo", Tensor::zeros({c}));
        } else {
            params_.add(prefix + ".conv1.w", conv_he(c, c, 3, rng));
            params_.add(prefix + ".conv1.b", Tensor::zeros({c}));
        }
        params_.add(prefix + ".tproj.w", Tensor::zeros({tdim, c}));
        params_.add(prefix + ".tproj.b", Tensor::zeros({c}));
        params_.add(prefix + ".norm2.g", Tensor::full({c}, 1.0));
        params_.add(prefix + ".norm2.b", Tensor::zeros({c}));
        if (cfg_.block_kind == "transformer") {
            params_.add(prefix + ".ffn.w1", randn({c, 2 * c}, std::sqrt(2.0 / c), rng));
            params_.add(prefix + ".ffn.b1", Tensor::zeros({2 * c}));
            params_.add(prefix + ".ffn.w2", Tensor::zeros({2 * c, c}));
            params_.add(prefix + ".ffn.b2", Tensor::zeros({c}));
        } else {
            params_.add(prefix + ".conv2.w", Tensor::zeros({c, c, 3, 3}));
            params_.add(prefix + ".conv2.b", Tensor::zeros({c}));
        }
    };

    for (int i = 0; i + 1 < cfg_.levels; ++i) {
        int c = cfg_.width(i);
        for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
            add_block("enc" + std::to_string(i) + ".block" + std::to_string(b), c);
        }
        int cn = cfg_.width(i + 1);
        params_.add("enc" + std::to_string(i) + ".down.w", conv_he(cn, c, 3, rng));
        params_.add("enc" + std::to_string(i) + ".down.b", Tensor::zeros({cn}));
    }
    for (int b = 0; b < cfg_.bottleneck_blocks; ++b) {
        add_block("bneck.block" + std::to_string(b), cfg_.width(cfg_.levels - 1));
    }
    for (int i = cfg_.levels - 2; i >= 0; --i) {
        std::string d = "dec" + std::to_string(i);
        int c = cfg_.width(i);
        int cprev = cfg_.width(i + 1);
        params_.add(d + ".up.w", conv_he(c, cprev, 3, rng));
        params_.add(d + ".up.b", Tensor::zeros({c}));
        if (cfg_.prompt_active()) {
            const int n = cfg_.prompt_components;
            const int cp = c;  // prompt channels track the stage width
            std::string q = d + ".prompt";
            if (cfg_.use_api) {
                params_.add(q + ".api.ms3.w", conv_he(c, c, 3, rng));
                params_.add(q + ".api.ms3.b", Tensor::zeros({c}));
                params_.add(q + ".api.ms5.w", conv_he(c, c, 5, rng));
                params_.add(q + ".api.ms5.b", Tensor::zeros({c}));
                params_.add(q + ".api.ms7.w", conv_he(c, c, 7, rng));
                params_.add(q + ".api.ms7.b", Tensor::zeros({c}));
                params_.add(q + ".api.fuse.w", conv_he(c, 3 * c, 1, rng));
                params_.add(q + ".api.fuse.b", Tensor::zeros({c}));
                params_.add(q + ".api.gate.w", conv_he(n, 2, 3, rng));
                params_.add(q + ".api.gate.b", Tensor::zeros({n}));
                params_.add(q + ".api.fcn.w", linear_xavier(n, n, rng));
                params_.add(q + ".api.fcn.b", Tensor::zeros({n}));
            }
            params_.add(q + ".bank", randn({n, cp, cfg_.prompt_size, cfg_.prompt_size}, 0.1, rng));
            params_.add(q + ".out.w", conv_he(cp, cp, 3, rng));
            params_.add(q + ".out.b", Tensor::zeros({cp}));
            if (cfg_.use_gps) {
                int dch = c + cp;
                params_.add(q + ".gps.wa", linear_xavier(dch, dch, rng));
                params_.add(q + ".gps.ba", Tensor::zeros({dch}));
                params_.add(q + ".gps.wb", linear_xavier(dch, dch, rng));
                params_.add(q + ".gps.bb", Tensor::zeros({dch}));
                params_.add(q + ".gps.wc", linear_xavier(dch, dch, rng));
                params_.add(q + ".gps.bc", Tensor::zeros({dch}));
                // four directional scans are summed; keep the projection small
                params_.add(q + ".gps.proj.w", randn({c, dch, 1, 1}, 0.25 * std::sqrt(1.0 / dch), rng));
                params_.add(q + ".gps.proj.b", Tensor::zeros({c}));
                params_.add(q + ".gps.skip1.w", conv_he(c, c, 1, rng));
                params_.add(q + ".gps.skip1.b", Tensor::zeros({c}));
                params_.add(q + ".gps.skip2.w", Tensor::zeros({c, c, 3, 3}));
                params_.add(q + ".gps.skip2.b", Tensor::zeros({c}));
            } else {
                params_.add(q + ".fuse.w", conv_he(c, c + cp, 1, rng));
                params_.add(q + ".fuse.b", Tensor::zeros({c}));
            }
        }
        params_.add(d + ".fuse.w", conv_he(c, 2 * c, 1, rng));
        params_.add(d + ".fuse.b", Tensor::zeros({c}));
        for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
            add_block(d + ".block" + std::to_string(b), c);
        }
    }
    params_.add("out.w", Tensor::zeros({cfg_.image_channels, cfg_.width(0), 3, 3}));
    params_.add("out.b", Tensor::zeros({cfg_.image_channels}));
}

LeafMap Model::make_leaves(ag::Graph& g, bool requires_grad) const {
    LeafMap leaves;
    leaves.reserve(params_.names().size());
    for (const std::string& name : params_.names()) {
        leaves.emplace(name, g.leaf(params_.get(name), requires_grad));
    }
    return leaves;
}

ag::Var transformer_block(ag::Graph& g, const LeafMap& lv, const std::string& prefix, ag::Var x,
                          ag::Var temb, const ModelConfig& cfg, int level) {
    auto p = [&](const std::string& suffix) { return lv.at(prefix + "." + suffix); };
    const Tensor& xv = x.val();
    int h = xv.dim(1), w = xv.dim(2);
    ag::Var x1;
    if (cfg.block_kind == "transformer") {
        ag::Var n1 = ag::layer_norm(x, p("norm1.g"), p("norm1.b"));
        ag::Var att = ag::multihead_attention(ag::to_tokens(n1), p("attn.wq"), p("attn.bq"),
                                              p("attn.wk"), p("attn.bk"), p("attn.wv"),
                                              p("attn.bv"), p("attn.wo"), p("attn.bo"),
                                              cfg.head_count(level));
        x1 = ag::add(x, ag::from_tokens(att, h, w));
    } else {
        ag::Var n1 = ag::layer_norm(x, p("norm1.g"), p("norm1.b"));
        x1 = ag::add(x, ag::conv2d(ag::gelu(n1), p("conv1.w"), p("conv1.b"), 1, 1));
    }
    x1 = ag::add_channel_bias(x1, ag::linear(temb, p("tproj.w"), p("tproj.b")));
    ag::Var n2 = ag::layer_norm(x1, p("norm2.g"), p("norm2.b"));
    if (cfg.block_kind == "transformer") {
        ag::Var f = ag::linear(ag::to_tokens(n2), p("ffn.w1"), p("ffn.b1"));
        f = ag::linear(ag::gelu(f), p("ffn.w2"), p("ffn.b2"));
        return ag::add(x1, ag::from_tokens(f, h, w));
    }
    return ag::add(x1, ag::conv2d(ag::gelu(n2), p("conv2.w"), p("conv2.b"), 1, 1));
}

namespace {

ag::Var apply_prompt(ag::Graph& g, const LeafMap& lv, const std::string& q, ag::Var x,
                     const ModelConfig& cfg,
                     std::vector<std::vector<double>>* prompt_sink) {
    auto p = [&](const std::string& suffix) { return lv.at(q + "." + suffix); };
    const Tensor& xv = x.val();
    int h = xv.dim(1), w = xv.dim(2);
    ag::Var p_prime;
    if (cfg.use_api) {
        ApiVars a;
        a.ms3_w = p("api.ms3.w");
        a.ms3_b = p("api.ms3.b");
        a.ms5_w = p("api.ms5.w");
        a.ms5_b = p("api.ms5.b");
        a.ms7_w = p("api.ms7.w");
        a.ms7_b = p("api.ms7.b");
        a.fuse_w = p("api.fuse.w");
        a.fuse_b = p("api.fuse.b");
        a.gate_w = p("api.gate.w");
        a.gate_b = p("api.gate.b");
        a.fcn_w = p("api.fcn.w");
        a.fcn_b = p("api.fcn.b");
        a.bank = p("bank");
        a.out_w = p("out.w");
        a.out_b = p("out.b");
        p_prime = api_forward(x, a);
    } else {
        // unweighted component mean when the gating block is ablated
        int n = cfg.prompt_components;
        ag::Var weights = g.leaf(Tensor::full({n}, 1.0 / n));
        ag::Var combined = ag::weighted_component_sum(p("bank"), weights);
        p_prime = ag::conv2d(ag::bilinear_resize(combined, h, w), p("out.w"), p("out.b"), 1, 1);
    }
    ag::Var out;
    if (cfg.use_gps) {
        GpsVars gp;
        gp.scan.wa = p("gps.wa");
        gp.scan.ba = p("gps.ba");
        gp.scan.wb = p("gps.wb");
        gp.scan.bb = p("gps.bb");
        gp.scan.wc = p("gps.wc");
        gp.scan.bc = p("gps.bc");
        gp.proj_w = p("gps.proj.w");
        gp.proj_b = p("gps.proj.b");
        gp.skip1_w = p("gps.skip1.w");
        gp.skip1_b = p("gps.skip1.b");
        gp.skip2_w = p("gps.skip2.w");
        gp.skip2_b = p("gps.skip2.b");
        out = gps_forward(x, p_prime, gp);
    } else {
        out = ag::conv2d(ag::channel_concat(x, p_prime), p("fuse.w"), p("fuse.b"), 1, 0);
    }
    if (prompt_sink) {
        const Tensor& ov = out.val();
        int c = ov.dim(0);
        std::int64_t hw = static_cast<std::int64_t>(ov.dim(1)) * ov.dim(2);
        std::vector<double> pooled(static_cast<size_t>(c));
        for (int ci = 0; ci < c; ++ci) {
            const double* row = ov.data() + ci * hw;
            double s = 0.0;
            for (std::int64_t k = 0; k < hw; ++k) s += row[k];
            pooled[static_cast<size_t>(ci)] = s / static_cast<double>(hw);
        }
        prompt_sink->push_back(std::move(pooled));
    }
    return out;
}

}  // namespace

ag::Var Model::forward(ag::Graph& g, const LeafMap& leaves, ag::Var x_t, ag::Var cond, int t,
                       std::vector<std::vector<double>>* prompt_sink) const {
    const Tensor& xv = x_t.val();
    if (xv.rank() != 3 || xv.dim(0) != cfg_.image_channels) {
        throw std::invalid_argument("forward: x_t must be (" +
                                    std::to_string(cfg_.image_channels) + ",H,W), got " +
                                    shape_str(xv));
    }
    if (!cond.val().same_shape(xv)) {
        throw std::invalid_argument("forward: cond shape " + shape_str(cond.val()) +
                                    " does not match x_t shape " + shape_str(xv));
    }
    int div = cfg_.spatial_divisor();
    if (xv.dim(1) % div != 0 || xv.dim(2) % div != 0) {
        throw std::invalid_argument("forward: spatial dims " + shape_str(xv) +
                                    " not divisible by " + std::to_string(div));
    }
    if (t < 0) throw std::invalid_argument("forward: t must be >= 0");

    ag::Var emb = g.leaf(sinusoidal_embedding(t, cfg_.time_embed_dim));
    ag::Var temb = ag::linear(emb, leaves.at("temb.l1.w"), leaves.at("temb.l1.b"));
    temb = ag::linear(ag::gelu(temb), leaves.at("temb.l2.w"), leaves.at("temb.l2.b"));

    ag::Var x = ag::conv2d(ag::channel_concat(x_t, cond), leaves.at("sfe.w"),
                           leaves.at("sfe.b"), 1, 1);
    std::vector<ag::Var> skips;
    for (int i = 0; i + 1 < cfg_.levels; ++i) {
        std::string e = "enc" + std::to_string(i);
        for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
            x = transformer_block(g, leaves, e + ".block" + std::to_string(b), x, temb, cfg_, i);
        }
        skips.push_back(x);
        x = ag::conv2d(x, leaves.at(e + ".down.w"), leaves.at(e + ".down.b"), 2, 1);
    }
    for (int b = 0; b < cfg_.bottleneck_blocks; ++b) {
        x = transformer_block(g, leaves, "bneck.block" + std::to_string(b), x, temb, cfg_,
                        cfg_.levels - 1);
    }
    for (int i = cfg_.levels - 2; i >= 0; --i) {
        std::string d = "dec" + std::to_string(i);
        x = ag::conv2d(ag::nearest_upsample(x, 2), leaves.at(d + ".up.w"),
                       leaves.at(d + ".up.b"), 1, 1);
        ag::Var prompted = x;
        if (cfg_.prompt_active()) {
            prompted = apply_prompt(g, leaves, d + ".prompt", x, cfg_, prompt_sink);
        }
        x = ag::conv2d(ag::channel_concat(prompted, skips[static_cast<size_t>(i)]),
                       leaves.at(d + ".fuse.w"), leaves.at(d + ".fuse.b"), 1, 0);
        for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
            x = transformer_block(g, leaves, d + ".block" + std::to_string(b), x, temb, cfg_, i);
        }
    }
    return ag::conv2d(x, leaves.at("out.w"), leaves.at("out.b"), 1, 1);
}

Tensor Model::predict(const Tensor& x_t, const Tensor& cond, int t,
                      std::vector<std::vector<double>>* prompt_sink) const {
    ag::Graph g;
    LeafMap leaves = make_leaves(g, false);
    ag::Var y = forward(g, leaves, g.leaf(x_t), g.leaf(cond), t, prompt_sink);
    return y.val();
}

Predictor Model::predictor() const {
    return [this](const Tensor& x_t, const Tensor& cond, int t) {
        return predict(x_t, cond, t);
    };
}

}  // namespace lumir
