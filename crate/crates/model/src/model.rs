use molpc_autograd::{Graph, ParamId, ParamStore, Tensor, Var};
use molpc_core::chem::Vec3;
use molpc_core::codec::Vocabulary;
use molpc_core::pointcloud::PointCloud;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ModelConfig;
use crate::error::ModelError;
use crate::sse::relative_position_bucket;

pub const LN_EPS: f64 = 1e-6;
const MASKED: f64 = -1e30;

pub const EMBED: &str = "embed.tokens";

/// A point cloud resolved against a vocabulary: feature ids per point,
/// ascending, and coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointInput {
    pub features: Vec<Vec<usize>>,
    pub coords: Vec<Vec3>,
}

impl PointInput {
    pub fn from_cloud(pc: &PointCloud, vocab: &Vocabulary) -> Result<Self, ModelError> {
        let mut features = Vec::with_capacity(pc.len());
        for p in &pc.points {
            let mut ids = Vec::with_capacity(p.features.len());
            for f in &p.features {
                let id = vocab.id(f).ok_or_else(|| ModelError::UnknownFeatureToken(f.clone()))?;
                ids.push(id as usize);
            }
            ids.sort_unstable();
            features.push(ids);
        }
        Ok(Self {
            features,
            coords: pc.coords(),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

struct Attn {
    q: ParamId,
    k: ParamId,
    v: ParamId,
    o: ParamId,
}

struct Mlp {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

struct EncoderLayer {
    attn: Attn,
    ff: Mlp,
}

struct PointLayer {
    attn: Attn,
    ff: Mlp,
    bias: Mlp,
}

struct DecoderLayer {
    attn: Attn,
    cross: Attn,
    ff: Mlp,
}

struct Ids {
    embed: ParamId,
    text_rel: ParamId,
    text: Vec<EncoderLayer>,
    distance_w: ParamId,
    coord_w: ParamId,
    points: Vec<PointLayer>,
    xyz_w: ParamId,
    xyz_b: ParamId,
    dec_rel: ParamId,
    decoder: Vec<DecoderLayer>,
}

enum Init {
    Normal(f64),
    Zeros,
    Fixed(Vec<f64>),
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
    trainable: bool,
}

fn param_specs(c: &ModelConfig) -> Vec<Spec> {
    let e = &c.encoder;
    let d = &c.decoder;
    let h = e.hidden;
    let mut specs = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, init: Init| {
        specs.push(Spec {
            name,
            shape,
            init,
            trainable: true,
        })
    };
    let lin = |fan_in: usize| Init::Normal(1.0 / (fan_in as f64).sqrt());
    add(EMBED.into(), vec![c.vocab_size, h], Init::Normal(c.embed_std));

    let attn = |add: &mut dyn FnMut(String, Vec<usize>, Init), p: &str, depth: usize| {
        for m in ["q", "k", "v"] {
            add(format!("{p}.{m}"), vec![h, h], lin(h));
        }
        add(format!("{p}.o"), vec![h, h], Init::Normal(1.0 / ((h * 2 * depth) as f64).sqrt()));
    };
    let mlp = |add: &mut dyn FnMut(String, Vec<usize>, Init), p: &str, i: usize, hid: usize, o: usize, out_std: f64| {
        add(format!("{p}.w1"), vec![i, hid], lin(i));
        add(format!("{p}.b1"), vec![hid], Init::Zeros);
        add(format!("{p}.w2"), vec![hid, o], Init::Normal(out_std));
        add(format!("{p}.b2"), vec![o], Init::Zeros);
    };

    add("text.rel_bias".into(), vec![e.buckets, e.heads], Init::Zeros);
    for l in 0..e.layers {
        attn(&mut add, &format!("text.layer{l}.attn"), e.layers);
        mlp(&mut add, &format!("text.layer{l}.ff"), h, e.ff, h, 1.0 / ((e.ff * 2 * e.layers) as f64).sqrt());
    }
    for l in 0..e.layers {
        attn(&mut add, &format!("point.layer{l}.attn"), e.layers);
        mlp(&mut add, &format!("point.layer{l}.ff"), h, e.ff, h, 1.0 / ((e.ff * 2 * e.layers) as f64).sqrt());
        let ds = e.distance_sse.dim;
        mlp(&mut add, &format!("point.layer{l}.bias"), ds, e.bias_hidden, e.heads, 1.0 / (e.bias_hidden as f64).sqrt());
    }
    let cs = e.coord_sse.dim;
    add("point.xyz.w".into(), vec![3 * cs, h], lin(3 * cs));
    add("point.xyz.b".into(), vec![h], Init::Zeros);
    add("decoder.rel_bias".into(), vec![d.buckets, d.heads], Init::Zeros);
    for l in 0..d.layers {
        attn(&mut add, &format!("decoder.layer{l}.attn"), d.layers);
        attn(&mut add, &format!("decoder.layer{l}.cross"), d.layers);
        mlp(&mut add, &format!("decoder.layer{l}.ff"), h, d.ff, h, 1.0 / ((d.ff * 2 * d.layers) as f64).sqrt());
    }
    for (name, sse) in [("point.distance_wavelengths", &e.distance_sse), ("point.coord_wavelengths", &e.coord_sse)] {
        specs.push(Spec {
            name: name.into(),
            shape: vec![sse.dim / 2],
            init: Init::Fixed(sse.wavelengths()),
            trainable: sse.trainable,
        });
    }
    specs
}

fn resolve(params: &ParamStore, c: &ModelConfig) -> Result<Ids, ModelError> {
    let id = |name: String| params.id(&name).map_err(ModelError::from);
    let attn = |p: String| -> Result<Attn, ModelError> {
        Ok(Attn {
            q: id(format!("{p}.q"))?,
            k: id(format!("{p}.k"))?,
            v: id(format!("{p}.v"))?,
            o: id(format!("{p}.o"))?,
        })
    };
    let mlp = |p: String| -> Result<Mlp, ModelError> {
        Ok(Mlp {
            w1: id(format!("{p}.w1"))?,
            b1: id(format!("{p}.b1"))?,
            w2: id(format!("{p}.w2"))?,
            b2: id(format!("{p}.b2"))?,
        })
    };
    let mut text = Vec::new();
    let mut points = Vec::new();
    for l in 0..c.encoder.layers {
        text.push(EncoderLayer {
            attn: attn(format!("text.layer{l}.attn"))?,
            ff: mlp(format!("text.layer{l}.ff"))?,
        });
        points.push(PointLayer {
            attn: attn(format!("point.layer{l}.attn"))?,
            ff: mlp(format!("point.layer{l}.ff"))?,
            bias: mlp(format!("point.layer{l}.bias"))?,
        });
    }
    let mut decoder = Vec::new();
    for l in 0..c.decoder.layers {
        decoder.push(DecoderLayer {
            attn: attn(format!("decoder.layer{l}.attn"))?,
            cross: attn(format!("decoder.layer{l}.cross"))?,
            ff: mlp(format!("decoder.layer{l}.ff"))?,
        });
    }
    Ok(Ids {
        embed: id(EMBED.into())?,
        text_rel: id("text.rel_bias".into())?,
        text,
        distance_w: id("point.distance_wavelengths".into())?,
        coord_w: id("point.coord_wavelengths".into())?,
        points,
        xyz_w: id("point.xyz.w".into())?,
        xyz_b: id("point.xyz.b".into())?,
        dec_rel: id("decoder.rel_bias".into())?,
        decoder,
    })
}

/// Point-encoder outputs: states after the attention stack (`n_l`) and after
/// adding the coordinate embedding (`n_out`).
#[derive(Debug, Clone, Copy)]
pub struct PointStates {
    pub n_l: Var,
    pub n_out: Var,
}

/// Cached keys and values, one `[rows, hidden]` pair per decoder layer.
#[derive(Debug, Clone, Default)]
pub struct KvCache {
    pub layers: Vec<(Tensor, Tensor)>,
}

impl KvCache {
    pub fn len(&self) -> usize {
        self.layers.first().map_or(0, |(k, _)| k.rows())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Output of one decoder pass over a run of new positions.
pub struct DecoderPass {
    pub logits: Var,
    pub self_kv: Vec<(Var, Var)>,
}

pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    ids: Ids,
}

impl Model {
    /// Fresh parameters drawn from a generator seeded with `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for spec in param_specs(&config) {
            let n: usize = spec.shape.iter().product();
            let data = match spec.init {
                Init::Normal(std) => {
                    let normal = Normal::new(0.0, std).map_err(|e| ModelError::Config(e.to_string()))?;
                    (0..n).map(|_| normal.sample(&mut rng)).collect()
                }
                Init::Zeros => vec![0.0; n],
                Init::Fixed(v) => v,
            };
            let t = Tensor::new(spec.shape, data)?;
            if spec.trainable {
                params.insert(spec.name, t)?;
            } else {
                params.insert_frozen(spec.name, t)?;
            }
        }
        let ids = resolve(&params, &config)?;
        Ok(Self { config, params, ids })
    }

    /// Wraps an existing store, checking that every parameter is present
    /// with the expected shape.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        for spec in param_specs(&config) {
            let id = params.id(&spec.name)?;
            if params.value(id).shape() != spec.shape.as_slice() {
                return Err(ModelError::Checkpoint(format!(
                    "`{}` has shape {:?}, expected {:?}",
                    spec.name,
                    params.value(id).shape(),
                    spec.shape
                )));
            }
        }
        let ids = resolve(&params, &config)?;
        Ok(Self { config, params, ids })
    }

    pub fn embedding_id(&self) -> ParamId {
        self.ids.embed
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<(), ModelError> {
        match tokens.iter().find(|&&t| t >= self.config.vocab_size) {
            Some(&t) => Err(ModelError::TokenOutOfRange(t)),
            None => Ok(()),
        }
    }

    /// Sum of the shared embedding rows of every feature of every point.
    pub fn embed_point_features(&self, g: &mut Graph<'_>, points: &PointInput) -> Result<Var, ModelError> {
        let v = self.config.vocab_size;
        let n = points.len();
        let mut incidence = vec![0.0; n * v];
        for (i, feats) in points.features.iter().enumerate() {
            self.check_tokens(feats)?;
            for &f in feats {
                incidence[i * v + f] += 1.0;
            }
        }
        let a = g.constant(Tensor::matrix(n, v, incidence)?);
        let table = g.param(self.ids.embed);
        Ok(g.matmul(a, table)?)
    }

    /// Per-head distance biases of layer `layer`: `[n * n, heads]`, row
    /// `i * n + j` for the pair (i, j).
    pub fn distance_bias(&self, g: &mut Graph<'_>, coords: &[Vec3], layer: usize) -> Result<Var, ModelError> {
        let sse = self.distance_sse(g, coords)?;
        self.bias_mlp(g, sse, layer)
    }

    fn distance_sse(&self, g: &mut Graph<'_>, coords: &[Vec3]) -> Result<Var, ModelError> {
        let n = coords.len();
        let mut d = Vec::with_capacity(n * n);
        for a in coords {
            for b in coords {
                let s: f64 = (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum();
                d.push(s.sqrt());
            }
        }
        let d = g.constant(Tensor::matrix(n * n, 1, d)?);
        let w = g.param(self.ids.distance_w);
        Ok(g.sse(d, w)?)
    }

    fn bias_mlp(&self, g: &mut Graph<'_>, sse: Var, layer: usize) -> Result<Var, ModelError> {
        let m = &self.ids.points[layer].bias;
        let h = linear(g, sse, m.w1, m.b1)?;
        let h = g.gelu(h)?;
        linear(g, h, m.w2, m.b2)
    }

    pub fn point_encoder(&self, g: &mut Graph<'_>, points: &PointInput) -> Result<PointStates, ModelError> {
        let e = &self.config.encoder;
        let n = points.len();
        let mut x = self.embed_point_features(g, points)?;
        let sse = self.distance_sse(g, &points.coords)?;
        for (l, layer) in self.ids.points.iter().enumerate() {
            let bias = self.bias_mlp(g, sse, l)?;
            let h = g.layer_norm(x, LN_EPS)?;
            let (k, v) = project_kv(g, h, &layer.attn)?;
            let a = attend(g, h, k, v, &layer.attn, e.heads, Some((bias, n, n)), None)?;
            x = g.add(x, a)?;
            x = ff_block(g, x, &layer.ff)?;
        }
        let n_l = g.layer_norm(x, LN_EPS)?;
        let w = g.param(self.ids.coord_w);
        let mut axes = Vec::with_capacity(3);
        for k in 0..3 {
            let col = g.constant(Tensor::matrix(n, 1, points.coords.iter().map(|c| c[k]).collect())?);
            axes.push(g.sse(col, w)?);
        }
        let xyz = g.concat_cols(&axes)?;
        let inj = linear(g, xyz, self.ids.xyz_w, self.ids.xyz_b)?;
        let n_out = g.add(n_l, inj)?;
        Ok(PointStates { n_l, n_out })
    }

    fn rel_bias(&self, g: &mut Graph<'_>, table: ParamId, queries: std::ops::Range<usize>, keys: usize, bidirectional: bool) -> Result<Var, ModelError> {
        let (buckets, max_distance) = if bidirectional {
            (self.config.encoder.buckets, self.config.encoder.max_distance)
        } else {
            (self.config.decoder.buckets, self.config.decoder.max_distance)
        };
        let mut ids = Vec::with_capacity(queries.len() * keys);
        for q in queries {
            for k in 0..keys {
                ids.push(relative_position_bucket(k as i64 - q as i64, bidirectional, buckets, max_distance));
            }
        }
        let t = g.param(table);
        Ok(g.embedding(t, &ids)?)
    }

    pub fn text_encoder(&self, g: &mut Graph<'_>, tokens: &[usize]) -> Result<Var, ModelError> {
        self.check_tokens(tokens)?;
        let t = tokens.len();
        let table = g.param(self.ids.embed);
        let mut x = g.embedding(table, tokens)?;
        let bias = self.rel_bias(g, self.ids.text_rel, 0..t, t, true)?;
        for layer in &self.ids.text {
            let h = g.layer_norm(x, LN_EPS)?;
            let (k, v) = project_kv(g, h, &layer.attn)?;
            let a = attend(g, h, k, v, &layer.attn, self.config.encoder.heads, Some((bias, t, t)), None)?;
            x = g.add(x, a)?;
            x = ff_block(g, x, &layer.ff)?;
        }
        Ok(g.layer_norm(x, LN_EPS)?)
    }

    /// Text states followed by point states.
    pub fn encode(&self, g: &mut Graph<'_>, tokens: &[usize], points: Option<&PointInput>) -> Result<Var, ModelError> {
        let text = if tokens.is_empty() { None } else { Some(self.text_encoder(g, tokens)?) };
        let pts = match points {
            Some(p) if !p.is_empty() => Some(self.point_encoder(g, p)?.n_out),
            _ => None,
        };
        build_memory(g, text, pts)
    }

    /// Cross-attention keys and values of every decoder layer.
    pub fn cross_kv(&self, g: &mut Graph<'_>, memory: Var) -> Result<Vec<(Var, Var)>, ModelError> {
        self.ids
            .decoder
            .iter()
            .map(|layer| project_kv(g, memory, &layer.cross))
            .collect()
    }

    /// Runs the decoder over `tokens`, placed at positions `past.len()..`
    /// after the cached positions in `past`.
    pub fn decoder_pass(
        &self,
        g: &mut Graph<'_>,
        tokens: &[usize],
        past: Option<&KvCache>,
        cross: &[(Var, Var)],
    ) -> Result<DecoderPass, ModelError> {
        self.check_tokens(tokens)?;
        let d = &self.config.decoder;
        let start = past.map_or(0, KvCache::len);
        let tq = tokens.len();
        let tk = start + tq;
        let table = g.param(self.ids.embed);
        let mut x = g.embedding(table, tokens)?;
        let bias = self.rel_bias(g, self.ids.dec_rel, start..tk, tk, false)?;
        let mut mask = vec![0.0; tq * tk];
        for q in 0..tq {
            for k in start + q + 1..tk {
                mask[q * tk + k] = MASKED;
            }
        }
        let mask = g.constant(Tensor::matrix(tq, tk, mask)?);
        let mut self_kv = Vec::with_capacity(d.layers);
        for (l, layer) in self.ids.decoder.iter().enumerate() {
            let h = g.layer_norm(x, LN_EPS)?;
            let (mut k, mut v) = project_kv(g, h, &layer.attn)?;
            if let Some(cache) = past.filter(|c| !c.is_empty()) {
                let (pk, pv) = &cache.layers[l];
                let pk = g.constant(pk.clone());
                let pv = g.constant(pv.clone());
                k = g.concat_rows(&[pk, k])?;
                v = g.concat_rows(&[pv, v])?;
            }
            self_kv.push((k, v));
            let a = attend(g, h, k, v, &layer.attn, d.heads, Some((bias, tq, tk)), Some(mask))?;
            x = g.add(x, a)?;
            let h = g.layer_norm(x, LN_EPS)?;
            let (ck, cv) = cross[l];
            let a = attend(g, h, ck, cv, &layer.cross, d.heads, None, None)?;
            x = g.add(x, a)?;
            x = ff_block(g, x, &layer.ff)?;
        }
        let h = g.layer_norm(x, LN_EPS)?;
        let table = g.param(self.ids.embed);
        let logits = g.matmul_nt(h, table)?;
        Ok(DecoderPass { logits, self_kv })
    }

    /// Teacher-forced logits `[targets, vocab]` for a full target sequence.
    pub fn logits(&self, g: &mut Graph<'_>, tokens: &[usize], points: Option<&PointInput>, decoder_input: &[usize]) -> Result<Var, ModelError> {
        let memory = self.encode(g, tokens, points)?;
        let cross = self.cross_kv(g, memory)?;
        Ok(self.decoder_pass(g, decoder_input, None, &cross)?.logits)
    }
}

/// `[text ; points]` along the sequence axis.
pub fn build_memory(g: &mut Graph<'_>, text: Option<Var>, points: Option<Var>) -> Result<Var, ModelError> {
    match (text, points) {
        (Some(t), Some(p)) => Ok(g.concat_rows(&[t, p])?),
        (Some(t), None) => Ok(t),
        (None, Some(p)) => Ok(p),
        (None, None) => Err(ModelError::EmptyMemory),
    }
}

fn linear(g: &mut Graph<'_>, x: Var, w: ParamId, b: ParamId) -> Result<Var, ModelError> {
    let w = g.param(w);
    let b = g.param(b);
    let y = g.matmul(x, w)?;
    Ok(g.add_row(y, b)?)
}

fn ff_block(g: &mut Graph<'_>, x: Var, m: &Mlp) -> Result<Var, ModelError> {
    let h = g.layer_norm(x, LN_EPS)?;
    let h = linear(g, h, m.w1, m.b1)?;
    let h = g.gelu(h)?;
    let h = linear(g, h, m.w2, m.b2)?;
    Ok(g.add(x, h)?)
}

fn project_kv(g: &mut Graph<'_>, x: Var, a: &Attn) -> Result<(Var, Var), ModelError> {
    let wk = g.param(a.k);
    let wv = g.param(a.v);
    Ok((g.matmul(x, wk)?, g.matmul(x, wv)?))
}

/// Multi-head scaled dot-product attention of `x` over keys `k` and values
/// `v`. `bias` holds one column per head in row-major `[tq * tk]` order.
#[allow(clippy::too_many_arguments)]
fn attend(
    g: &mut Graph<'_>,
    x: Var,
    k: Var,
    v: Var,
    a: &Attn,
    heads: usize,
    bias: Option<(Var, usize, usize)>,
    mask: Option<Var>,
) -> Result<Var, ModelError> {
    let wq = g.param(a.q);
    let q = g.matmul(x, wq)?;
    let hidden = g.value(q).cols();
    let dh = hidden / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dh, (h + 1) * dh)?;
        let kh = g.slice_cols(k, h * dh, (h + 1) * dh)?;
        let vh = g.slice_cols(v, h * dh, (h + 1) * dh)?;
        let s = g.matmul_nt(qh, kh)?;
        let mut s = g.scale(s, scale)?;
        if let Some((b, tq, tk)) = bias {
            let col = g.slice_cols(b, h, h + 1)?;
            let col = g.reshape(col, &[tq, tk])?;
            s = g.add(s, col)?;
        }
        if let Some(m) = mask {
            s = g.add(s, m)?;
        }
        let p = g.softmax(s)?;
        outs.push(g.matmul(p, vh)?);
    }
    let cat = if heads == 1 { outs[0] } else { g.concat_cols(&outs)? };
    let wo = g.param(a.o);
    Ok(g.matmul(cat, wo)?)
}
