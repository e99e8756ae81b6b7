#include "mcsp/encoders.hpp"

#include <cmath>

namespace mcsp {

namespace ad_ = mcsp::ad;

namespace {

std::string layer_prefix(const std::string& prefix, Eigen::Index layer) {
    return prefix + ".l" + std::to_string(layer);
}

void init_transformer_layer(ParamStore& ps, const std::string& lp, Eigen::Index d,
                            bool graph_bias, Rng& rng) {
    ps.create(lp + ".ln1.g", Matrix::Ones(1, d));
    ps.create(lp + ".ln1.b", Matrix::Zero(1, d));
    ps.create(lp + ".attn.wq", glorot_init(rng, d, d));
    ps.create(lp + ".attn.bq", Matrix::Zero(1, d));
    ps.create(lp + ".attn.wk", glorot_init(rng, d, d));
    ps.create(lp + ".attn.bk", Matrix::Zero(1, d));
    ps.create(lp + ".attn.wv", glorot_init(rng, d, d));
    ps.create(lp + ".attn.bv", Matrix::Zero(1, d));
    ps.create(lp + ".attn.wo", glorot_init(rng, d, d));
    ps.create(lp + ".attn.bo", Matrix::Zero(1, d));
    if (graph_bias) ps.create(lp + ".attn.bias_scale", Matrix::Ones(1, 1));
    ps.create(lp + ".ln2.g", Matrix::Ones(1, d));
    ps.create(lp + ".ln2.b", Matrix::Zero(1, d));
    ps.create(lp + ".ffn.w1", glorot_init(rng, d, 4 * d));
    ps.create(lp + ".ffn.b1", Matrix::Zero(1, 4 * d));
    ps.create(lp + ".ffn.w2", glorot_init(rng, 4 * d, d));
    ps.create(lp + ".ffn.b2", Matrix::Zero(1, d));
}

// Pre-LN block: x + Attn(LN(x)), then x + FFN(LN(x)). The optional bias
// matrix is added to every head's attention logits, scaled by a learned
// scalar.
ad_::Var transformer_layer(const ad_::Var& x, const ParamStore& ps, const std::string& lp,
                           const EncoderConfig& cfg, const Matrix* bias) {
    const Eigen::Index d = cfg.d_model;
    const Eigen::Index heads = cfg.n_heads;
    const Eigen::Index dh = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(dh));

    ad_::Var normed = ad_::layer_norm_rows(x, ps.get(lp + ".ln1.g"), ps.get(lp + ".ln1.b"));
    ad_::Var q = ad_::linear(normed, ps.get(lp + ".attn.wq"), ps.get(lp + ".attn.bq"));
    ad_::Var k = ad_::linear(normed, ps.get(lp + ".attn.wk"), ps.get(lp + ".attn.bk"));
    ad_::Var v = ad_::linear(normed, ps.get(lp + ".attn.wv"), ps.get(lp + ".attn.bv"));

    ad_::Var bias_term;
    if (bias) {
        require(bias->rows() == x.value().rows() && bias->cols() == x.value().rows(),
                "transformer_layer: attention bias shape mismatch");
        bias_term = ad_::smul(ad_::constant(*bias), ps.get(lp + ".attn.bias_scale"));
    }

    std::vector<ad_::Var> head_outputs;
    head_outputs.reserve(std::size_t(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
        ad_::Var qh = ad_::slice_cols(q, h * dh, dh);
        ad_::Var kh = ad_::slice_cols(k, h * dh, dh);
        ad_::Var vh = ad_::slice_cols(v, h * dh, dh);
        ad_::Var scores = ad_::scale(ad_::matmul_nt(qh, kh), inv_sqrt);
        if (bias) scores = ad_::add(scores, bias_term);
        head_outputs.push_back(ad_::matmul(ad_::row_softmax(scores), vh));
    }
    ad_::Var attn = ad_::linear(ad_::concat_cols(head_outputs), ps.get(lp + ".attn.wo"),
                                ps.get(lp + ".attn.bo"));
    ad_::Var after_attn = ad_::add(x, attn);

    ad_::Var normed2 = ad_::layer_norm_rows(after_attn, ps.get(lp + ".ln2.g"),
                                            ps.get(lp + ".ln2.b"));
    ad_::Var hidden = ad_::relu(
        ad_::linear(normed2, ps.get(lp + ".ffn.w1"), ps.get(lp + ".ffn.b1")));
    ad_::Var ffn = ad_::linear(hidden, ps.get(lp + ".ffn.w2"), ps.get(lp + ".ffn.b2"));
    return ad_::add(after_attn, ffn);
}

DomainEmbedding run_encoder(ad_::Var tokens, const ParamStore& ps, const std::string& prefix,
                            const EncoderConfig& cfg, const Matrix* bias) {
    ad_::Var x = tokens;
    for (Eigen::Index l = 0; l < cfg.n_layers; ++l) {
        x = transformer_layer(x, ps, layer_prefix(prefix, l), cfg, bias);
    }
    x = ad_::layer_norm_rows(x, ps.get(prefix + ".final_ln.g"), ps.get(prefix + ".final_ln.b"));
    DomainEmbedding out;
    out.tokens = x;
    out.pooled = ad_::linear(ad_::mean_rows(x), ps.get(prefix + ".readout.w"),
                             ps.get(prefix + ".readout.b"));
    return out;
}

} // namespace

Matrix sinusoidal_positions(Eigen::Index length, Eigen::Index d_model) {
    Matrix pe(length, d_model);
    for (Eigen::Index pos = 0; pos < length; ++pos) {
        for (Eigen::Index i = 0; i < d_model; ++i) {
            const double exponent = double(2 * (i / 2)) / double(d_model);
            const double angle = double(pos) / std::pow(10000.0, exponent);
            pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

void init_encoder_params(ParamStore& ps, const std::string& prefix, const EncoderConfig& cfg,
                         Eigen::Index n_roi, Rng& rng) {
    cfg.validate(prefix);
    require(n_roi > 0, "init_encoder_params: n_roi must be > 0");
    const bool spatial = cfg.domain == Domain::SPATIAL;

    ps.create(prefix + ".embed.w", glorot_init(rng, n_roi, cfg.d_model));
    ps.create(prefix + ".embed.b", Matrix::Zero(1, cfg.d_model));
    if (spatial) {
        ps.create(prefix + ".pos", normal_init(rng, n_roi, cfg.d_model, 0.02));
    }
    for (Eigen::Index l = 0; l < cfg.n_layers; ++l) {
        init_transformer_layer(ps, layer_prefix(prefix, l), cfg.d_model, spatial, rng);
    }
    ps.create(prefix + ".final_ln.g", Matrix::Ones(1, cfg.d_model));
    ps.create(prefix + ".final_ln.b", Matrix::Zero(1, cfg.d_model));
    ps.create(prefix + ".readout.w", glorot_init(rng, cfg.d_model, cfg.d_enc));
    ps.create(prefix + ".readout.b", Matrix::Zero(1, cfg.d_enc));
}

DomainEmbedding encode_spatial(const BrainGraph& g, const ParamStore& ps,
                               const std::string& prefix, const EncoderConfig& cfg) {
    require(cfg.domain == Domain::SPATIAL, "encode_spatial: config domain is not spatial");
    const Eigen::Index n = g.n_roi();
    require(g.node_features.rows() == n && g.node_features.cols() == n,
            "encode_spatial: node features must be n_roi x n_roi");
    const Matrix& w = ps.get(prefix + ".embed.w").value();
    require(w.rows() == n, "encode_spatial: graph size does not match encoder parameters");
    require_finite(g.node_features, "encode_spatial node features");
    require_finite(g.adjacency, "encode_spatial adjacency");

    ad_::Var tokens = ad_::linear(ad_::constant(g.node_features), ps.get(prefix + ".embed.w"),
                                  ps.get(prefix + ".embed.b"));
    tokens = ad_::add(tokens, ps.get(prefix + ".pos"));
    return run_encoder(tokens, ps, prefix, cfg, &g.adjacency);
}

DomainEmbedding encode_sequence(const Matrix& x, const ParamStore& ps,
                                const std::string& prefix, const EncoderConfig& cfg,
                                Eigen::Index expected_length) {
    require(cfg.domain != Domain::SPATIAL, "encode_sequence: config domain is spatial");
    if (expected_length > 0) {
        require(x.cols() == expected_length,
                "encode_sequence: length " + std::to_string(x.cols()) +
                    " does not match unified length " + std::to_string(expected_length));
    }
    const Matrix& w = ps.get(prefix + ".embed.w").value();
    require(x.rows() == w.rows(),
            "encode_sequence: ROI count does not match encoder parameters");
    require_finite(x, "encode_sequence input");

    ad_::Var tokens = ad_::linear(ad_::constant(x.transpose()), ps.get(prefix + ".embed.w"),
                                  ps.get(prefix + ".embed.b"));
    tokens = ad_::add(tokens, ad_::constant(sinusoidal_positions(x.cols(), cfg.d_model)));
    return run_encoder(tokens, ps, prefix, cfg, nullptr);
}

std::vector<DomainEmbedding> encode_eeg_segments(const SegmentSet& s, const ParamStore& ps,
                                                 const std::string& prefix,
                                                 const EncoderConfig& cfg,
                                                 Eigen::Index expected_length) {
    require(!s.segments.empty(), "encode_eeg_segments: empty segment set");
    std::vector<DomainEmbedding> out;
    out.reserve(s.segments.size());
    for (const Matrix& seg : s.segments) {
        out.push_back(encode_sequence(seg, ps, prefix, cfg, expected_length));
    }
    return out;
}

} // namespace mcsp
