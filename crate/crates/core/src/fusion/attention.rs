use ndarray::{Array2, Axis};
use rand::Rng;

use super::layers::FeatureMap;
use crate::bytes::quantize;
use crate::error::{mismatch, Result};
use crate::memory::FeatureVector;

/// Query/key/value projections for one attention site.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionProjections {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionGrad {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
}

impl AttentionGrad {
    pub fn zeros(c: usize) -> Self {
        Self { wq: Array2::zeros((c, c)), wk: Array2::zeros((c, c)), wv: Array2::zeros((c, c)) }
    }

    pub fn add_assign(&mut self, o: &AttentionGrad) {
        self.wq += &o.wq;
        self.wk += &o.wk;
        self.wv += &o.wv;
    }
}

impl AttentionProjections {
    pub fn random(c: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (c as f64).sqrt();
        let mut m = || Array2::from_shape_fn((c, c), |_| quantize(bound * (2.0 * rng.random::<f64>() - 1.0)));
        Self { wq: m(), wk: m(), wv: m() }
    }

    pub fn channels(&self) -> usize {
        self.wq.nrows()
    }

    pub fn sgd(&mut self, g: &AttentionGrad, lr: f64) {
        for (w, d) in [(&mut self.wq, &g.wq), (&mut self.wk, &g.wk), (&mut self.wv, &g.wv)] {
            w.zip_mut_with(d, |w, d| *w = quantize(*w - lr * d));
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.wq, &self.wk, &self.wv].iter().all(|m| m.iter().all(|v| v.is_finite()))
    }
}

/// Query side of an attention call.
#[derive(Clone, Copy, Debug)]
pub enum Query<'a> {
    /// One query per cell.
    Map(&'a FeatureMap),
    /// A single query broadcast to every key/value cell.
    Vector(&'a FeatureVector),
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct AttentionCache {
    xq: Array2<f64>,
    xkv: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    pub score: Array2<f64>,
    broadcast: usize,
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - mx).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Row-level attention: `softmax(Xq Wq (Xkv Wk)^T / sqrt(C)) Xkv Wv`.
pub fn attention_rows(xq: &Array2<f64>, xkv: &Array2<f64>, proj: &AttentionProjections) -> Result<(Array2<f64>, AttentionCache)> {
    let c = proj.channels();
    if xq.ncols() != c || xkv.ncols() != c {
        return Err(mismatch(format!(
            "attention expects {c} channels, got query {} / key {}",
            xq.ncols(),
            xkv.ncols()
        )));
    }
    let q = xq.dot(&proj.wq);
    let k = xkv.dot(&proj.wk);
    let v = xkv.dot(&proj.wv);
    let mut score = q.dot(&k.t()) / (c as f64).sqrt();
    softmax_rows(&mut score);
    let out = score.dot(&v);
    Ok((out, AttentionCache { xq: xq.clone(), xkv: xkv.clone(), q, k, v, score, broadcast: 0 }))
}

/// Cross attention between a query source and a key/value feature map.
///
/// Returns the attended features reshaped onto the query grid (or the
/// key/value grid for a broadcast vector query) and the score matrix.
pub fn cross_attention(query: Query<'_>, kv: &FeatureMap, proj: &AttentionProjections) -> Result<(FeatureMap, Array2<f64>)> {
    let (out, cache) = cross_attention_cached(query, kv, proj)?;
    Ok((out, cache.score))
}

pub fn cross_attention_cached(query: Query<'_>, kv: &FeatureMap, proj: &AttentionProjections) -> Result<(FeatureMap, AttentionCache)> {
    match query {
        Query::Map(qm) => {
            let (out, cache) = attention_rows(&qm.data, &kv.data, proj)?;
            Ok((FeatureMap::new(qm.gh, qm.gw, out), cache))
        }
        Query::Vector(v) => {
            let xq = Array2::from_shape_vec((1, v.dim()), v.as_slice().to_vec()).expect("row shape");
            let (row, mut cache) = attention_rows(&xq, &kv.data, proj)?;
            let n = kv.cells();
            let out = row.broadcast((n, row.ncols())).expect("broadcast row").to_owned();
            let mut score = Array2::zeros((n, kv.cells()));
            for mut r in score.rows_mut() {
                r.assign(&cache.score.row(0));
            }
            cache.broadcast = n;
            let (out_map, full) = (FeatureMap::new(kv.gh, kv.gw, out), score);
            cache.score = full;
            Ok((out_map, cache))
        }
    }
}

/// Gradients of the attention output.
pub struct AttentionBackward {
    pub grad: AttentionGrad,
    /// Gradient w.r.t. the query rows (one row for a broadcast vector query).
    pub d_query: Array2<f64>,
    pub d_kv: Array2<f64>,
}

pub fn attention_backward(cache: &AttentionCache, proj: &AttentionProjections, d_out: &Array2<f64>) -> AttentionBackward {
    let c = proj.channels() as f64;
    let (score, d_out) = if cache.broadcast > 0 {
        let s = cache.score.slice(ndarray::s![0..1, ..]).to_owned();
        let d = d_out.sum_axis(Axis(0)).insert_axis(Axis(0));
        (s, d)
    } else {
        (cache.score.clone(), d_out.clone())
    };
    let d_score = d_out.dot(&cache.v.t());
    let d_v = score.t().dot(&d_out);
    let mut d_logits = d_score.clone();
    for (mut row, (s_row, ds_row)) in d_logits.rows_mut().into_iter().zip(score.rows().into_iter().zip(d_score.rows())) {
        let dot: f64 = s_row.iter().zip(ds_row.iter()).map(|(a, b)| a * b).sum();
        for ((o, s), ds) in row.iter_mut().zip(s_row.iter()).zip(ds_row.iter()) {
            *o = s * (ds - dot);
        }
    }
    let d_logits = d_logits / c.sqrt();
    let d_q = d_logits.dot(&cache.k);
    let d_k = d_logits.t().dot(&cache.q);
    let grad = AttentionGrad {
        wq: cache.xq.t().dot(&d_q),
        wk: cache.xkv.t().dot(&d_k),
        wv: cache.xkv.t().dot(&d_v),
    };
    let d_query = d_q.dot(&proj.wq.t());
    let d_kv = d_k.dot(&proj.wk.t()) + d_v.dot(&proj.wv.t());
    AttentionBackward { grad, d_query, d_kv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_map(gh: usize, gw: usize, c: usize, rng: &mut ChaCha8Rng) -> FeatureMap {
        FeatureMap::new(gh, gw, Array2::from_shape_fn((gh * gw, c), |_| rng.random::<f64>() * 2.0 - 1.0))
    }

    #[test]
    fn identical_kv_rows_give_identical_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let proj = AttentionProjections::random(4, &mut rng);
        let q = rand_map(2, 3, 4, &mut rng);
        let row = [0.3, -0.2, 0.9, 0.1];
        let kv = FeatureMap::new(2, 2, Array2::from_shape_fn((4, 4), |(_, j)| row[j]));
        let (out, _) = cross_attention(Query::Map(&q), &kv, &proj).unwrap();
        let v_row = kv.data.row(0).dot(&proj.wv);
        for r in out.data.rows() {
            for (a, b) in r.iter().zip(v_row.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_query_key_weights_average_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut proj = AttentionProjections::random(3, &mut rng);
        proj.wq.fill(0.0);
        proj.wk.fill(0.0);
        let q = rand_map(2, 2, 3, &mut rng);
        let kv = rand_map(3, 3, 3, &mut rng);
        let (out, score) = cross_attention(Query::Map(&q), &kv, &proj).unwrap();
        assert!(score.iter().all(|s| (s - 1.0 / 9.0).abs() < 1e-15));
        let mean_v = kv.data.dot(&proj.wv).mean_axis(Axis(0)).unwrap();
        for r in out.data.rows() {
            for (a, b) in r.iter().zip(mean_v.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vector_query_is_broadcast_over_kv_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let proj = AttentionProjections::random(4, &mut rng);
        let kv = rand_map(3, 2, 4, &mut rng);
        let v = FeatureVector::new(vec![0.5, -1.0, 0.25, 2.0]).unwrap();
        let (out, score) = cross_attention(Query::Vector(&v), &kv, &proj).unwrap();
        assert_eq!((out.gh, out.gw), (3, 2));
        assert_eq!(score.dim(), (6, 6));
        for r in 1..6 {
            assert_eq!(out.data.row(r), out.data.row(0));
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let proj = AttentionProjections::random(4, &mut rng);
        let q = rand_map(2, 2, 3, &mut rng);
        let kv = rand_map(2, 2, 4, &mut rng);
        assert!(cross_attention(Query::Map(&q), &kv, &proj).is_err());
    }

    #[test]
    fn scores_are_row_stochastic_and_outputs_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let proj = AttentionProjections::random(8, &mut rng);
        let q = rand_map(4, 4, 8, &mut rng);
        let kv = rand_map(4, 4, 8, &mut rng);
        let (out, score) = cross_attention(Query::Map(&q), &kv, &proj).unwrap();
        for row in score.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|s| *s >= 0.0));
        }
        let v = kv.data.dot(&proj.wv);
        for j in 0..8 {
            let col = v.column(j);
            let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
            for x in out.data.column(j) {
                assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
            }
        }
    }
}
