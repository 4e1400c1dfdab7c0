//! Node and edge label distributions over the `m = layers * n` slots.

use crate::encoder::affine;
use crate::error::{LagrError, Result};
use crate::graph::AlignedGraph;
use crate::rng::Rng;
use crate::tensor::{uniform_init, ParamId, ParamStore, Scalar, Tape, Tensor, Var};

/// One `d -> |V_n|` projection per layer; layer `l` fills rows `l*n..(l+1)*n`.
#[derive(Debug, Clone)]
pub struct NodeHead {
    proj: Vec<(ParamId, ParamId)>,
}

impl NodeHead {
    pub fn new(store: &mut ParamStore, prefix: &str, d: usize, layers: usize, labels: usize, rng: &mut Rng) -> Result<Self> {
        let mut proj = Vec::with_capacity(layers);
        for l in 0..layers {
            let w = store.register(format!("{prefix}.w{l}"), uniform_init(vec![d, labels], d, rng)?)?;
            let b = store.register(format!("{prefix}.b{l}"), Tensor::zeros(vec![labels]))?;
            proj.push((w, b));
        }
        Ok(NodeHead { proj })
    }

    pub fn layers(&self) -> usize {
        self.proj.len()
    }

    pub fn weights(&self, layer: usize) -> (ParamId, ParamId) {
        self.proj[layer]
    }

    /// Logits of shape `[m, |V_n|]`.
    pub fn logits<T: Scalar>(&self, tape: &mut Tape<'_, T>, h: Var) -> Result<Var> {
        let rows = self
            .proj
            .iter()
            .map(|&p| affine(tape, h, p))
            .collect::<Result<Vec<_>>>()?;
        if rows.len() == 1 {
            Ok(rows[0])
        } else {
            tape.concat(&rows, 0)
        }
    }
}

/// Per layer, query and key projections for every edge label, fused into
/// `d -> |V_e| * d_e` matrices with `d_e = floor(d / |V_e|)`. Column block
/// `a` of the query matrix for layer `l` is `U^{a,l}`.
#[derive(Debug, Clone)]
pub struct EdgeHead {
    query: Vec<ParamId>,
    key: Vec<ParamId>,
    labels: usize,
    de: usize,
}

impl EdgeHead {
    pub fn new(store: &mut ParamStore, prefix: &str, d: usize, layers: usize, labels: usize, rng: &mut Rng) -> Result<Self> {
        let de = d.checked_div(labels).unwrap_or(0);
        if de == 0 {
            return Err(LagrError::Config(format!(
                "{labels} edge labels leave no room in width {d} (need d >= |V_e|)"
            )));
        }
        let mut query = Vec::with_capacity(layers);
        let mut key = Vec::with_capacity(layers);
        for l in 0..layers {
            query.push(store.register(format!("{prefix}.q{l}"), uniform_init(vec![d, labels * de], d, rng)?)?);
            key.push(store.register(format!("{prefix}.k{l}"), uniform_init(vec![d, labels * de], d, rng)?)?);
        }
        Ok(EdgeHead { query, key, labels, de })
    }

    pub fn de(&self) -> usize {
        self.de
    }

    pub fn projections(&self, layer: usize) -> (ParamId, ParamId) {
        (self.query[layer], self.key[layer])
    }

    /// Logits of shape `[m, m, |V_e|]`: entry `(j, k, a)` is the dot product
    /// of slot `j`'s query and slot `k`'s key for label `a`, unscaled.
    pub fn logits<T: Scalar>(&self, tape: &mut Tape<'_, T>, h: Var) -> Result<Var> {
        let mut qs = Vec::with_capacity(self.query.len());
        let mut ks = Vec::with_capacity(self.key.len());
        for (&q, &k) in self.query.iter().zip(&self.key) {
            let q = tape.param(q);
            let k = tape.param(k);
            qs.push(tape.matmul(h, q)?);
            ks.push(tape.matmul(h, k)?);
        }
        let (q, k) = if qs.len() == 1 {
            (qs[0], ks[0])
        } else {
            (tape.concat(&qs, 0)?, tape.concat(&ks, 0)?)
        };
        let mut scores = Vec::with_capacity(self.labels);
        for a in 0..self.labels {
            let qa = tape.slice(q, 1, a * self.de, self.de)?;
            let ka = tape.slice(k, 1, a * self.de, self.de)?;
            scores.push(tape.matmul_t(qa, ka)?);
        }
        tape.stack(&scores, 2)
    }
}

/// Negative log-likelihood of `target` given log-probabilities shaped
/// `[m, |V_n|]` and `[m, m, |V_e|]`.
pub fn supervised_loss<T: Scalar>(tape: &mut Tape<'_, T>, node_logp: Var, edge_logp: Var, target: &AlignedGraph) -> Result<Var> {
    let m = target.m();
    let ve = *tape.shape(edge_logp).last().unwrap_or(&0);
    if tape.shape(node_logp).first() != Some(&m) || tape.shape(edge_logp) != [m, m, ve] {
        return Err(LagrError::Shape {
            op: "supervised_loss",
            lhs: tape.shape(node_logp).to_vec(),
            rhs: vec![m],
        });
    }
    let nodes = tape.pick(node_logp, &target.nodes)?;
    let flat = tape.reshape(edge_logp, vec![m * m, ve])?;
    let edges = tape.pick(flat, &target.edges)?;
    let both = tape.concat(&[nodes, edges], 0)?;
    let total = tape.sum(both);
    Ok(tape.scale(total, -1.0))
}

/// Plain copies of the model's log-probabilities, for alignment search and
/// decoding outside the tape.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbs {
    pub n: usize,
    pub layers: usize,
    pub node_labels: usize,
    pub edge_labels: usize,
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

impl LogProbs {
    pub fn from_tape<T: Scalar>(tape: &Tape<'_, T>, n: usize, layers: usize, node_logp: Var, edge_logp: Var) -> Self {
        let node_labels = tape.shape(node_logp)[1];
        let edge_labels = tape.shape(edge_logp)[2];
        LogProbs {
            n,
            layers,
            node_labels,
            edge_labels,
            node: tape.value(node_logp).iter().map(|x| x.as_f64()).collect(),
            edge: tape.value(edge_logp).iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.n * self.layers
    }

    pub fn node(&self, j: usize, label: usize) -> f64 {
        self.node[j * self.node_labels + label]
    }

    pub fn edge(&self, j: usize, k: usize, label: usize) -> f64 {
        self.edge[(j * self.m() + k) * self.edge_labels + label]
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Most likely label per slot and per slot pair; ties go to the lowest id.
pub fn decode_argmax(lp: &LogProbs) -> AlignedGraph {
    let mut g = AlignedGraph::empty(lp.n, lp.layers);
    for (j, row) in lp.node.chunks(lp.node_labels).enumerate() {
        g.nodes[j] = argmax(row);
    }
    for (jk, row) in lp.edge.chunks(lp.edge_labels).enumerate() {
        g.edges[jk] = argmax(row);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn zero_all(store: &mut ParamStore) {
        for p in store.iter_mut() {
            p.tensor.data_mut().fill(0.0);
        }
    }

    fn input(tape: &mut Tape<'_, f64>, shape: Vec<usize>, data: Vec<f64>) -> Var {
        tape.input(shape, data, false).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let mut store = ParamStore::new();
        let nh = NodeHead::new(&mut store, "node", 4, 2, 5, &mut seeded(1)).unwrap();
        let eh = EdgeHead::new(&mut store, "edge", 4, 2, 3, &mut seeded(1)).unwrap();
        zero_all(&mut store);
        let mut tape = Tape::<f64>::new(&store);
        let h = input(&mut tape, vec![3, 4], (0..12).map(|i| i as f64 * 0.3 - 1.0).collect());
        let nl = nh.logits(&mut tape, h).unwrap();
        let np = tape.softmax(nl);
        assert_eq!(tape.shape(np), &[6, 5]);
        assert!(tape.value(np).iter().all(|&p| (p - 0.2).abs() < 1e-12));
        let el = eh.logits(&mut tape, h).unwrap();
        let ep = tape.softmax(el);
        assert_eq!(tape.shape(ep), &[6, 6, 3]);
        assert!(tape.value(ep).iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn second_layer_uses_its_own_matrix() {
        let mut store = ParamStore::new();
        let nh = NodeHead::new(&mut store, "node", 4, 2, 3, &mut seeded(2)).unwrap();
        let (w1, _) = nh.weights(1);
        store.get_mut(w1).tensor.data_mut().fill(0.0);
        let mut tape = Tape::<f64>::new(&store);
        let h = input(&mut tape, vec![2, 4], vec![0.5, -1.0, 2.0, 0.1, 1.5, 0.3, -0.7, 0.9]);
        let l = nh.logits(&mut tape, h).unwrap();
        let v = tape.value(l);
        assert!(v[..6].iter().any(|&x| x != 0.0));
        assert!(v[6..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn node_distribution_matches_scalar_oracle() {
        let mut store = ParamStore::new();
        let nh = NodeHead::new(&mut store, "node", 4, 1, 3, &mut seeded(3)).unwrap();
        let (w, b) = nh.weights(0);
        store.get_mut(b).tensor.data_mut().copy_from_slice(&[0.1, -0.2, 0.3]);
        let wv: Vec<f64> = store.get(w).tensor.data().iter().map(|&x| x as f64).collect();
        let bv = [0.1f32 as f64, -0.2f32 as f64, 0.3f32 as f64];
        let hv = [0.2, -0.4, 1.0, 0.7, -1.1, 0.0, 0.3, 0.9];
        let mut tape = Tape::<f64>::new(&store);
        let h = input(&mut tape, vec![2, 4], hv.to_vec());
        let l = nh.logits(&mut tape, h).unwrap();
        let p = tape.softmax(l);
        let got = tape.value(p).to_vec();
        for r in 0..2 {
            let mut logits = [0.0; 3];
            for (c, out) in logits.iter_mut().enumerate() {
                *out = bv[c];
                for i in 0..4 {
                    *out += hv[r * 4 + i] * wv[i * 3 + c];
                }
            }
            let z: f64 = logits.iter().map(|x| x.exp()).sum();
            for c in 0..3 {
                assert!((got[r * 3 + c] - logits[c].exp() / z).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn edge_distribution_matches_scalar_oracle() {
        let (d, ve) = (4, 2);
        let mut store = ParamStore::new();
        let eh = EdgeHead::new(&mut store, "edge", d, 1, ve, &mut seeded(4)).unwrap();
        assert_eq!(eh.de(), 2);
        let (q, k) = eh.projections(0);
        let qw: Vec<f64> = store.get(q).tensor.data().iter().map(|&x| x as f64).collect();
        let kw: Vec<f64> = store.get(k).tensor.data().iter().map(|&x| x as f64).collect();
        let hv = [0.3, -0.5, 0.8, 0.1, -0.9, 0.4, 0.2, 0.6];
        let mut tape = Tape::<f64>::new(&store);
        let h = input(&mut tape, vec![2, d], hv.to_vec());
        let l = eh.logits(&mut tape, h).unwrap();
        let p = tape.softmax(l);
        let got = tape.value(p).to_vec();
        let proj = |w: &[f64], row: usize, col: usize| (0..d).map(|i| hv[row * d + i] * w[i * ve * 2 + col]).sum::<f64>();
        for j in 0..2 {
            for kk in 0..2 {
                let mut s = [0.0; 2];
                for (a, sa) in s.iter_mut().enumerate() {
                    for c in 0..2 {
                        *sa += proj(&qw, j, a * 2 + c) * proj(&kw, kk, a * 2 + c);
                    }
                }
                let z = s[0].exp() + s[1].exp();
                for a in 0..2 {
                    assert!((got[(j * 2 + kk) * 2 + a] - s[a].exp() / z).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn edge_rows_normalized_at_twelve_slots() {
        let mut store = ParamStore::new();
        let eh = EdgeHead::new(&mut store, "edge", 8, 3, 4, &mut seeded(5)).unwrap();
        let mut tape = Tape::<f32>::new(&store);
        let h = tape
            .input(vec![4, 8], (0..32).map(|i| ((i * 7) % 11) as f32 * 0.2 - 1.0).collect(), false)
            .unwrap();
        let l = eh.logits(&mut tape, h).unwrap();
        let p = tape.softmax(l);
        assert_eq!(tape.shape(p), &[12, 12, 4]);
        for row in tape.value(p).chunks(4) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn too_many_edge_labels_rejected() {
        let mut store = ParamStore::new();
        assert!(EdgeHead::new(&mut store, "edge", 4, 1, 5, &mut seeded(0)).is_err());
    }

    fn target(n: usize, nodes: Vec<usize>, edges: Vec<usize>) -> AlignedGraph {
        AlignedGraph { n, layers: 1, nodes, edges }
    }

    #[test]
    fn one_hot_loss_is_zero_and_uniform_loss_closed_form() {
        let store = ParamStore::new();
        let t = target(2, vec![1, 0], vec![0, 1, 0, 0]);
        let mut tape = Tape::<f64>::new(&store);
        let ninf = f64::NEG_INFINITY;
        let n = input(&mut tape, vec![2, 2], vec![ninf, 0.0, 0.0, ninf]);
        let e = input(&mut tape, vec![2, 2, 2], vec![0.0, ninf, ninf, 0.0, 0.0, ninf, 0.0, ninf]);
        let loss = supervised_loss(&mut tape, n, e, &t).unwrap();
        assert_eq!(tape.scalar(loss), 0.0);

        let (vn, ve, m) = (5usize, 3usize, 2usize);
        let zn = input(&mut tape, vec![m, vn], vec![0.0; m * vn]);
        let ze = input(&mut tape, vec![m, m, ve], vec![0.0; m * m * ve]);
        let ln = tape.log_softmax(zn);
        let le = tape.log_softmax(ze);
        let loss = supervised_loss(&mut tape, ln, le, &t).unwrap();
        let expect = m as f64 * (vn as f64).ln() + (m * m) as f64 * (ve as f64).ln();
        assert!((tape.scalar(loss) - expect).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_scalar_recomputation() {
        use rand::Rng as _;
        let (m, vn, ve) = (6, 4, 3);
        let mut rng = seeded(6);
        let zn: Vec<f64> = (0..m * vn).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ze: Vec<f64> = (0..m * m * ve).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t = target(
            m,
            (0..m).map(|_| rng.random_range(0..vn)).collect(),
            (0..m * m).map(|_| rng.random_range(0..ve)).collect(),
        );
        let store = ParamStore::new();
        let mut tape = Tape::<f32>::new(&store);
        let a = tape.input(vec![m, vn], zn.iter().map(|&x| x as f32).collect(), false).unwrap();
        let b = tape.input(vec![m, m, ve], ze.iter().map(|&x| x as f32).collect(), false).unwrap();
        let la = tape.log_softmax(a);
        let lb = tape.log_softmax(b);
        let loss = supervised_loss(&mut tape, la, lb, &t).unwrap();

        let lse = |row: &[f64]| row.iter().map(|x| x.exp()).sum::<f64>().ln();
        let mut expect = 0.0;
        for j in 0..m {
            let row = &zn[j * vn..(j + 1) * vn];
            expect -= row[t.nodes[j]] - lse(row);
        }
        for jk in 0..m * m {
            let row = &ze[jk * ve..(jk + 1) * ve];
            expect -= row[t.edges[jk]] - lse(row);
        }
        let got = tape.scalar(loss) as f64;
        assert!((got - expect).abs() / expect.abs() < 1e-5, "{got} vs {expect}");
    }

    #[test]
    fn uniform_rows_decode_to_label_zero() {
        let lp = LogProbs {
            n: 2,
            layers: 1,
            node_labels: 3,
            edge_labels: 2,
            node: vec![-(3f64.ln()); 6],
            edge: vec![-(2f64.ln()); 8],
        };
        let g = decode_argmax(&lp);
        assert_eq!(g.nodes, vec![0, 0]);
        assert_eq!(g.edges, vec![0; 4]);
    }
}
