use relprobe_autodiff::{Graph, NodeId, ParamId, Scalar, Tensor};

use super::{Activation, Dropouts, EncoderConfig, Init, Register};
use crate::corpus::Sentence;
use crate::deptree::{prune, sdp, DepTree};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug)]
pub struct LstmDir {
    pub w_ih: ParamId,
    pub b: ParamId,
    pub w_hh: ParamId,
}

#[derive(Clone, Debug)]
pub struct AttnLayer {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub ln1: (ParamId, ParamId),
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: (ParamId, ParamId),
}

#[derive(Clone, Debug)]
pub struct AttnParams {
    pub input: Linear,
    pub layers: Vec<AttnLayer>,
}

#[derive(Clone, Debug)]
pub enum EncParams {
    Cnn(Vec<(usize, Linear)>),
    Bilstm(Vec<[LstmDir; 2]>),
    Gcn { layers: Vec<Linear>, ff: Vec<Linear> },
    Attn(AttnParams),
    Boe,
}

fn linear(reg: &mut Register<'_>, name: &str, d_in: usize, d_out: usize) -> Result<Linear> {
    Ok(Linear {
        w: reg(&format!("{name}.weight"), [d_in, d_out], Init::Xavier)?,
        b: reg(&format!("{name}.bias"), [1, d_out], Init::Zeros)?,
    })
}

pub(super) fn build(cfg: &EncoderConfig, d_in: usize, reg: &mut Register<'_>) -> Result<EncParams> {
    Ok(match cfg {
        EncoderConfig::Cnn { filters, widths, .. } => EncParams::Cnn(
            widths
                .iter()
                .map(|&w| Ok((w, linear(reg, &format!("cnn.conv{w}"), w * d_in, *filters)?)))
                .collect::<Result<_>>()?,
        ),
        EncoderConfig::Bilstm { layers, hidden } => {
            let h = *hidden;
            let mut out = Vec::new();
            for l in 0..*layers {
                let width = if l == 0 { d_in } else { 2 * h };
                let mut dir = |name: &str| -> Result<LstmDir> {
                    let p = format!("bilstm.l{l}.{name}");
                    Ok(LstmDir {
                        w_ih: reg(&format!("{p}.w_ih"), [width, 4 * h], Init::Xavier)?,
                        b: reg(&format!("{p}.bias"), [1, 4 * h], Init::LstmBias(h))?,
                        w_hh: reg(&format!("{p}.w_hh"), [h, 4 * h], Init::Xavier)?,
                    })
                };
                out.push([dir("fwd")?, dir("bwd")?]);
            }
            EncParams::Bilstm(out)
        }
        EncoderConfig::Gcn {
            layers, dim, ff_layers, ..
        } => {
            let layers = (0..*layers)
                .map(|l| linear(reg, &format!("gcn.l{l}"), if l == 0 { d_in } else { *dim }, *dim))
                .collect::<Result<_>>()?;
            let ff = (0..*ff_layers)
                .map(|l| linear(reg, &format!("gcn.ff{l}"), if l == 0 { 3 * dim } else { *dim }, *dim))
                .collect::<Result<_>>()?;
            EncParams::Gcn { layers, ff }
        }
        EncoderConfig::Attn {
            layers, kv_dim, ff_dim, ..
        } => {
            let d = *kv_dim;
            let input = linear(reg, "attn.in", d_in, d)?;
            let layers = (0..*layers)
                .map(|l| {
                    let p = format!("attn.l{l}");
                    Ok(AttnLayer {
                        q: linear(reg, &format!("{p}.q"), d, d)?,
                        k: linear(reg, &format!("{p}.k"), d, d)?,
                        v: linear(reg, &format!("{p}.v"), d, d)?,
                        o: linear(reg, &format!("{p}.o"), d, d)?,
                        ln1: (
                            reg(&format!("{p}.ln1.gain"), [1, d], Init::Ones)?,
                            reg(&format!("{p}.ln1.bias"), [1, d], Init::Zeros)?,
                        ),
                        ff1: linear(reg, &format!("{p}.ff1"), d, *ff_dim)?,
                        ff2: linear(reg, &format!("{p}.ff2"), *ff_dim, d)?,
                        ln2: (
                            reg(&format!("{p}.ln2.gain"), [1, d], Init::Ones)?,
                            reg(&format!("{p}.ln2.bias"), [1, d], Init::Zeros)?,
                        ),
                    })
                })
                .collect::<Result<_>>()?;
            EncParams::Attn(AttnParams { input, layers })
        }
        EncoderConfig::Boe => EncParams::Boe,
    })
}

fn apply<S: Scalar>(g: &mut Graph<'_, S>, l: &Linear, x: NodeId) -> Result<NodeId> {
    let w = g.param(l.w);
    let b = g.param(l.b);
    Ok(g.linear(x, w, b)?)
}

pub(super) fn encode<S: Scalar>(
    g: &mut Graph<'_, S>,
    cfg: &EncoderConfig,
    p: &EncParams,
    d: &Dropouts,
    x: NodeId,
    s: &Sentence,
    tree: Option<&DepTree>,
) -> Result<NodeId> {
    match (cfg, p) {
        (EncoderConfig::Cnn { activation, .. }, EncParams::Cnn(convs)) => cnn(g, convs, *activation, x),
        (EncoderConfig::Bilstm { hidden, .. }, EncParams::Bilstm(layers)) => bilstm(g, layers, *hidden, d, x),
        (EncoderConfig::Gcn { prune_k, .. }, EncParams::Gcn { layers, ff }) => {
            let tree = tree.ok_or_else(|| Error::Config("gcn encoder needs a dependency tree".into()))?;
            gcn(g, layers, ff, *prune_k, d, x, s, tree)
        }
        (EncoderConfig::Attn { heads, .. }, EncParams::Attn(params)) => attn(g, params, *heads, d, x),
        (EncoderConfig::Boe, EncParams::Boe) => Ok(g.sum_rows(x)),
        _ => unreachable!("layout built from the same config"),
    }
}

fn cnn<S: Scalar>(g: &mut Graph<'_, S>, convs: &[(usize, Linear)], act: Activation, x: NodeId) -> Result<NodeId> {
    let mut pooled = Vec::with_capacity(convs.len());
    for (width, l) in convs {
        let w = g.param(l.w);
        let b = g.param(l.b);
        let c = g.conv1d(x, w, b, *width)?;
        let a = match act {
            Activation::Tanh => g.tanh(c),
            Activation::Relu => g.relu(c),
        };
        pooled.push(g.max_rows(a));
    }
    if pooled.len() == 1 {
        Ok(pooled[0])
    } else {
        Ok(g.concat_cols(&pooled)?)
    }
}

fn lstm_pass<S: Scalar>(
    g: &mut Graph<'_, S>,
    p: &LstmDir,
    hidden: usize,
    recurrent_dropout: f64,
    x: NodeId,
    reverse: bool,
) -> Result<NodeId> {
    let t_len = g.value(x).rows();
    let w_ih = g.param(p.w_ih);
    let b = g.param(p.b);
    let proj = g.linear(x, w_ih, b)?;
    let w_hh = g.param(p.w_hh);
    let mask = g.dropout_mask(1, hidden, recurrent_dropout);
    let mut h = g.input(Tensor::zeros(vec![1, hidden]));
    let mut c = g.input(Tensor::zeros(vec![1, hidden]));
    let mut outs = vec![h; t_len];
    let order: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
    for t in order {
        let xt = g.select_rows(proj, &[t])?;
        let h_in = match &mask {
            Some(m) => g.mul_const(h, m.clone())?,
            None => h,
        };
        let (h2, c2) = g.lstm_step(xt, h_in, c, w_hh)?;
        h = h2;
        c = c2;
        outs[t] = h;
    }
    Ok(g.concat_rows(&outs)?)
}

fn bilstm<S: Scalar>(
    g: &mut Graph<'_, S>,
    layers: &[[LstmDir; 2]],
    hidden: usize,
    d: &Dropouts,
    x: NodeId,
) -> Result<NodeId> {
    let mut h = x;
    for (l, [fwd, bwd]) in layers.iter().enumerate() {
        if l > 0 {
            h = g.dropout(h, d.encoder)?;
        }
        let f = lstm_pass(g, fwd, hidden, d.recurrent, h, false)?;
        let b = lstm_pass(g, bwd, hidden, d.recurrent, h, true)?;
        h = g.concat_cols(&[f, b])?;
    }
    Ok(g.max_rows(h))
}

/// Row-normalized `A + I` over the kept tokens.
pub(crate) fn normalized_adjacency(tree: &DepTree, kept: &[usize]) -> Vec<f64> {
    let n = kept.len();
    let pos = |tok: usize| kept.binary_search(&tok).ok();
    let mut a = vec![0.0; n * n];
    for (i, &tok) in kept.iter().enumerate() {
        a[i * n + i] = 1.0;
        for nb in tree.neighbors(tok) {
            if let Some(j) = pos(nb) {
                a[i * n + j] = 1.0;
            }
        }
    }
    for row in a.chunks_mut(n) {
        let deg: f64 = row.iter().sum();
        for v in row {
            *v /= deg;
        }
    }
    a
}

#[allow(clippy::too_many_arguments)]
fn gcn<S: Scalar>(
    g: &mut Graph<'_, S>,
    layers: &[Linear],
    ff: &[Linear],
    prune_k: Option<usize>,
    d: &Dropouts,
    x: NodeId,
    s: &Sentence,
    tree: &DepTree,
) -> Result<NodeId> {
    let path = sdp(tree, s.head, s.tail);
    let kept = prune(tree, &path, prune_k);
    assert!(!kept.is_empty(), "pruned token set contains the dependency path");
    let n = kept.len();
    let adj = normalized_adjacency(tree, &kept);
    let adj = g.input(Tensor::from_f64(vec![n, n], &adj)?);
    let mut h = g.select_rows(x, &kept)?;
    for (l, layer) in layers.iter().enumerate() {
        let w = g.param(layer.w);
        let b = g.param(layer.b);
        h = g.graph_conv(adj, h, w, b)?;
        if l + 1 < layers.len() {
            h = g.dropout(h, d.encoder)?;
        }
    }
    let rows_in = |span: crate::corpus::Span| -> Vec<usize> {
        kept.iter()
            .enumerate()
            .filter(|(_, &t)| span.contains(t))
            .map(|(i, _)| i)
            .collect()
    };
    let sent = g.max_rows(h);
    let head_rows = rows_in(s.head);
    let tail_rows = rows_in(s.tail);
    let hs = g.select_rows(h, &head_rows)?;
    let head = g.max_rows(hs);
    let ts = g.select_rows(h, &tail_rows)?;
    let tail = g.max_rows(ts);
    let mut out = g.concat_cols(&[sent, head, tail])?;
    for l in ff {
        out = apply(g, l, out)?;
        out = g.relu(out);
    }
    Ok(out)
}

fn self_attention<S: Scalar>(
    g: &mut Graph<'_, S>,
    l: &AttnLayer,
    heads: usize,
    attn_dropout: f64,
    h: NodeId,
) -> Result<(NodeId, Vec<NodeId>)> {
    let d = g.value(h).cols();
    let dk = d / heads;
    let q = apply(g, &l.q, h)?;
    let k = apply(g, &l.k, h)?;
    let v = apply(g, &l.v, h)?;
    let mut outs = Vec::with_capacity(heads);
    let mut weights = Vec::with_capacity(heads);
    for i in 0..heads {
        let qi = g.slice_cols(q, i * dk, dk)?;
        let ki = g.slice_cols(k, i * dk, dk)?;
        let vi = g.slice_cols(v, i * dk, dk)?;
        let (o, w) = g.attention(qi, ki, vi, attn_dropout)?;
        outs.push(o);
        weights.push(w);
    }
    let cat = if heads == 1 { outs[0] } else { g.concat_cols(&outs)? };
    Ok((apply(g, &l.o, cat)?, weights))
}

fn attn<S: Scalar>(g: &mut Graph<'_, S>, p: &AttnParams, heads: usize, d: &Dropouts, x: NodeId) -> Result<NodeId> {
    let mut h = apply(g, &p.input, x)?;
    for l in &p.layers {
        let (a, _) = self_attention(g, l, heads, d.attention, h)?;
        let a = g.dropout(a, d.encoder)?;
        let r = g.add(h, a)?;
        let (gain, bias) = (g.param(l.ln1.0), g.param(l.ln1.1));
        h = g.layer_norm(r, gain, bias)?;
        let f = apply(g, &l.ff1, h)?;
        let f = g.relu(f);
        let f = apply(g, &l.ff2, f)?;
        let f = g.dropout(f, d.encoder)?;
        let r = g.add(h, f)?;
        let (gain, bias) = (g.param(l.ln2.0), g.param(l.ln2.1));
        h = g.layer_norm(r, gain, bias)?;
    }
    let last = g.value(h).rows() - 1;
    Ok(g.select_rows(h, &[last])?)
}

pub(super) fn first_layer_attention<S: Scalar>(
    g: &mut Graph<'_, S>,
    p: &AttnParams,
    heads: usize,
    x: NodeId,
) -> Result<Vec<NodeId>> {
    let h = apply(g, &p.input, x)?;
    let layer = p
        .layers
        .first()
        .ok_or_else(|| Error::Config("attn model has no layers".into()))?;
    Ok(self_attention(g, layer, heads, 0.0, h)?.1)
}
