//! Grid-MRF energies, their decomposition into horizontal and vertical
//! chains, the min-sum DP oracle per chain, the zero-sum dual feasible set
//! with its closed-form projection, and brute-force oracles for testing.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{
    content_id, Atom, AtomAux, DenseVector, LinearMap, LmoHandle, LinearMinimizer, ProxFn,
    SaddleProblem, SmoothPart,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseKind {
    Potts,
    TruncatedLinear,
    TruncatedQuadratic,
}

/// One pairwise potential shared by all grid edges. `weight >= 0`,
/// `truncation >= 0`; symmetric in the label arguments by construction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PairwisePotential {
    pub kind: PairwiseKind,
    pub weight: f64,
    pub truncation: f64,
}

impl PairwisePotential {
    pub fn potts(weight: f64) -> Self {
        Self {
            kind: PairwiseKind::Potts,
            weight,
            truncation: 0.0,
        }
    }

    pub fn cost(&self, a: usize, b: usize) -> f64 {
        let diff = (a as f64 - b as f64).abs();
        match self.kind {
            PairwiseKind::Potts => {
                if a == b {
                    0.0
                } else {
                    self.weight
                }
            }
            PairwiseKind::TruncatedLinear => self.weight * diff.min(self.truncation),
            // truncation caps the squared difference
            PairwiseKind::TruncatedQuadratic => self.weight * (diff * diff).min(self.truncation),
        }
    }

    /// Largest value the potential can take for `labels` labels.
    pub fn max_cost(&self, labels: usize) -> f64 {
        let d = (labels.saturating_sub(1)) as f64;
        match self.kind {
            PairwiseKind::Potts => {
                if labels > 1 {
                    self.weight
                } else {
                    0.0
                }
            }
            PairwiseKind::TruncatedLinear => self.weight * d.min(self.truncation),
            PairwiseKind::TruncatedQuadratic => self.weight * (d * d).min(self.truncation),
        }
    }
}

/// Energy of a 4-connected grid: unary costs per (node, label) plus one
/// pairwise potential on every edge.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridMrf {
    pub width: usize,
    pub height: usize,
    pub labels: usize,
    /// row-major, node-major: `unary[node * labels + label]`
    pub unary: Vec<f64>,
    pub pairwise: PairwisePotential,
}

impl GridMrf {
    pub fn new(
        width: usize,
        height: usize,
        labels: usize,
        unary: Vec<f64>,
        pairwise: PairwisePotential,
    ) -> Result<Self> {
        if width == 0 || height == 0 || labels == 0 {
            return Err(Error::InvalidParam("grid dimensions must be positive".into()));
        }
        if unary.len() != width * height * labels {
            return Err(Error::DimensionMismatch {
                left: unary.len(),
                right: width * height * labels,
            });
        }
        for (index, &value) in unary.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NotFinite { index, value });
            }
        }
        if pairwise.weight < 0.0 || pairwise.truncation < 0.0 {
            return Err(Error::InvalidParam(
                "pairwise weight and truncation must be nonnegative".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            labels,
            unary,
            pairwise,
        })
    }

    pub fn nodes(&self) -> usize {
        self.width * self.height
    }

    pub fn node_id(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn unary_cost(&self, node: usize, label: usize) -> f64 {
        self.unary[node * self.labels + label]
    }

    /// Full grid energy of a labeling (one label per node, row-major).
    pub fn energy(&self, labeling: &[usize]) -> f64 {
        assert_eq!(labeling.len(), self.nodes());
        let mut e = 0.0;
        for (node, &l) in labeling.iter().enumerate() {
            e += self.unary_cost(node, l);
        }
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.node_id(r, c);
                if c + 1 < self.width {
                    e += self.pairwise.cost(labeling[v], labeling[self.node_id(r, c + 1)]);
                }
                if r + 1 < self.height {
                    e += self.pairwise.cost(labeling[v], labeling[self.node_id(r + 1, c)]);
                }
            }
        }
        e
    }
}

/// One chain of the decomposition: an ordered node list, its unary share
/// (half of the grid unary; every grid node sits in exactly one row chain
/// and one column chain) and the pairwise potential along its edges.
#[derive(Clone, Debug)]
pub struct ChainSubproblem {
    pub nodes: Vec<usize>,
    pub labels: usize,
    /// `unary[pos * labels + label]`
    pub unary: Vec<f64>,
    pub pairwise: PairwisePotential,
}

impl ChainSubproblem {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn unary_cost(&self, pos: usize, label: usize) -> f64 {
        self.unary[pos * self.labels + label]
    }

    /// Chain energy of a labeling (no duals).
    pub fn energy(&self, labeling: &[usize]) -> f64 {
        assert_eq!(labeling.len(), self.len());
        let mut e = 0.0;
        for (pos, &l) in labeling.iter().enumerate() {
            e += self.unary_cost(pos, l);
        }
        for pos in 0..self.len().saturating_sub(1) {
            e += self.pairwise.cost(labeling[pos], labeling[pos + 1]);
        }
        e
    }

    fn max_energy(&self) -> f64 {
        let mut e = 0.0;
        for pos in 0..self.len() {
            e += (0..self.labels)
                .map(|l| self.unary_cost(pos, l))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        e + (self.len().saturating_sub(1)) as f64 * self.pairwise.max_cost(self.labels)
    }

    fn min_energy_bound(&self) -> f64 {
        let mut e = 0.0;
        for pos in 0..self.len() {
            e += (0..self.labels)
                .map(|l| self.unary_cost(pos, l))
                .fold(f64::INFINITY, f64::min);
        }
        e // pairwise costs are nonnegative
    }
}

/// Split a grid into `height` row chains followed by `width` column chains.
/// Unaries are shared half/half between the two chains covering each node;
/// row chains own the horizontal edges, column chains the vertical ones.
pub fn decompose_grid(mrf: &GridMrf) -> Vec<ChainSubproblem> {
    let l = mrf.labels;
    let mut chains = Vec::with_capacity(mrf.height + mrf.width);
    for r in 0..mrf.height {
        let nodes: Vec<usize> = (0..mrf.width).map(|c| mrf.node_id(r, c)).collect();
        let unary: Vec<f64> = nodes
            .iter()
            .flat_map(|&v| (0..l).map(move |lab| (v, lab)))
            .map(|(v, lab)| 0.5 * mrf.unary_cost(v, lab))
            .collect();
        chains.push(ChainSubproblem {
            nodes,
            labels: l,
            unary,
            pairwise: mrf.pairwise,
        });
    }
    for c in 0..mrf.width {
        let nodes: Vec<usize> = (0..mrf.height).map(|r| mrf.node_id(r, c)).collect();
        let unary: Vec<f64> = nodes
            .iter()
            .flat_map(|&v| (0..l).map(move |lab| (v, lab)))
            .map(|(v, lab)| 0.5 * mrf.unary_cost(v, lab))
            .collect();
        chains.push(ChainSubproblem {
            nodes,
            labels: l,
            unary,
            pairwise: mrf.pairwise,
        });
    }
    chains
}

/// Vertex of a lifted chain polytope: the minimizing labeling and its chain
/// energy (the scalar cost coordinate), plus the minimized objective
/// `energy_coeff * energy + duals` for certification.
#[derive(Clone, Debug)]
pub struct ChainAtom {
    pub labeling: Vec<usize>,
    pub cost: f64,
    pub objective: f64,
}

#[inline]
fn node_term(chain: &ChainSubproblem, duals: &[f64], ec: f64, pos: usize, lab: usize) -> f64 {
    ec * chain.unary_cost(pos, lab) + duals[pos * chain.labels + lab]
}

/// Min-sum DP over a chain: minimizes
/// `energy_coeff * chain_energy(X) + sum_pos duals[pos, X_pos]`.
/// Ties resolve to the lexicographically smallest optimal labeling.
pub fn chain_lmo_scaled(chain: &ChainSubproblem, duals: &[f64], energy_coeff: f64) -> ChainAtom {
    let n = chain.len();
    let l = chain.labels;
    assert_eq!(duals.len(), n * l, "dual array dimensions must match chain");
    // suffix values: m[pos][lab] = best completion from (pos, lab)
    let mut m = vec![0.0_f64; n * l];
    for (lab, slot) in m[(n - 1) * l..].iter_mut().enumerate() {
        *slot = node_term(chain, duals, energy_coeff, n - 1, lab);
    }
    for pos in (0..n - 1).rev() {
        for lab in 0..l {
            let mut best = f64::INFINITY;
            for lab2 in 0..l {
                let v = energy_coeff * chain.pairwise.cost(lab, lab2) + m[(pos + 1) * l + lab2];
                if v < best {
                    best = v;
                }
            }
            m[pos * l + lab] = node_term(chain, duals, energy_coeff, pos, lab) + best;
        }
    }
    let mut labeling = Vec::with_capacity(n);
    let mut best_lab = 0;
    let mut best_val = f64::INFINITY;
    for (lab, &val) in m[..l].iter().enumerate() {
        if val < best_val {
            best_val = val;
            best_lab = lab;
        }
    }
    labeling.push(best_lab);
    for pos in 0..n - 1 {
        let cur = labeling[pos];
        let mut next = 0;
        let mut next_val = f64::INFINITY;
        for lab2 in 0..l {
            let v = energy_coeff * chain.pairwise.cost(cur, lab2) + m[(pos + 1) * l + lab2];
            if v < next_val {
                next_val = v;
                next = lab2;
            }
        }
        labeling.push(next);
    }
    let cost = chain.energy(&labeling);
    ChainAtom {
        labeling,
        cost,
        objective: best_val,
    }
}

/// DP oracle with unit weight on the chain energy (the plain min-oracle).
pub fn chain_lmo(chain: &ChainSubproblem, duals: &[f64]) -> ChainAtom {
    chain_lmo_scaled(chain, duals, 1.0)
}

/// Exhaustive minimizer over all labelings, accumulating in exactly the
/// same order as the DP so optimal values compare bit-for-bit. Test oracle.
pub fn chain_brute_force(
    chain: &ChainSubproblem,
    duals: &[f64],
    energy_coeff: f64,
) -> Result<ChainAtom> {
    let n = chain.len();
    let l = chain.labels;
    let total = (l as f64).powi(n as i32);
    if total > 1e6 {
        return Err(Error::InstanceTooLarge(format!(
            "{l}^{n} labelings exceed the brute-force guard"
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut labeling = vec![0usize; n];
    loop {
        // suffix-folded objective mirroring the DP accumulation order
        let mut acc = node_term(chain, duals, energy_coeff, n - 1, labeling[n - 1]);
        for pos in (0..n - 1).rev() {
            acc = node_term(chain, duals, energy_coeff, pos, labeling[pos])
                + (energy_coeff * chain.pairwise.cost(labeling[pos], labeling[pos + 1]) + acc);
        }
        if best.as_ref().is_none_or(|(b, _)| acc < *b) {
            best = Some((acc, labeling.clone()));
        }
        // lexicographic odometer, most significant digit first
        let mut pos = n;
        loop {
            if pos == 0 {
                let (objective, labeling) = best.unwrap();
                let cost = chain.energy(&labeling);
                return Ok(ChainAtom {
                    labeling,
                    cost,
                    objective,
                });
            }
            pos -= 1;
            labeling[pos] += 1;
            if labeling[pos] < l {
                break;
            }
            labeling[pos] = 0;
        }
    }
}

/// Index layout of the product problem: per chain, a block of one-hot
/// node-label indicators followed by one scalar cost coordinate; the dual
/// space repeats the indicator blocks without the cost coordinates.
#[derive(Clone, Debug)]
pub struct MrfLayout {
    pub labels: usize,
    pub chain_len: Vec<usize>,
    pub chain_x_offset: Vec<usize>,
    pub cost_index: Vec<usize>,
    pub chain_y_offset: Vec<usize>,
    pub x_dim: usize,
    pub y_dim: usize,
    /// per grid node, the two (chain, position) pairs covering it
    pub node_cover: Vec<[(usize, usize); 2]>,
}

impl MrfLayout {
    fn build(mrf: &GridMrf, chains: &[ChainSubproblem]) -> Self {
        let labels = mrf.labels;
        let mut chain_x_offset = Vec::with_capacity(chains.len());
        let mut chain_y_offset = Vec::with_capacity(chains.len());
        let mut cost_index = Vec::with_capacity(chains.len());
        let mut chain_len = Vec::with_capacity(chains.len());
        let mut x_dim = 0;
        let mut y_dim = 0;
        for ch in chains {
            chain_x_offset.push(x_dim);
            chain_y_offset.push(y_dim);
            chain_len.push(ch.len());
            x_dim += ch.len() * labels;
            cost_index.push(x_dim);
            x_dim += 1;
            y_dim += ch.len() * labels;
        }
        let mut node_cover = vec![[(0usize, 0usize); 2]; mrf.nodes()];
        for r in 0..mrf.height {
            for c in 0..mrf.width {
                let v = mrf.node_id(r, c);
                node_cover[v] = [(r, c), (mrf.height + c, r)];
            }
        }
        Self {
            labels,
            chain_len,
            chain_x_offset,
            cost_index,
            chain_y_offset,
            x_dim,
            y_dim,
            node_cover,
        }
    }

    pub fn x_index(&self, chain: usize, pos: usize, label: usize) -> usize {
        self.chain_x_offset[chain] + pos * self.labels + label
    }

    pub fn y_index(&self, chain: usize, pos: usize, label: usize) -> usize {
        self.chain_y_offset[chain] + pos * self.labels + label
    }
}

/// The coupling `K`: copies the indicator coordinates of `x` into the dual
/// space, dropping the cost coordinates. Each indicator coordinate appears
/// in exactly one output, so the operator norm is exactly one.
pub struct MrfCoupling {
    layout: Arc<MrfLayout>,
}

impl LinearMap for MrfCoupling {
    fn apply(&self, x: &DenseVector) -> DenseVector {
        let lt = &self.layout;
        let mut y = vec![0.0; lt.y_dim];
        for t in 0..lt.chain_len.len() {
            let n = lt.chain_len[t] * lt.labels;
            let xs = lt.chain_x_offset[t];
            let ys = lt.chain_y_offset[t];
            for j in 0..n {
                y[ys + j] = x[xs + j];
            }
        }
        DenseVector::from_raw(y)
    }

    fn adjoint_apply(&self, y: &DenseVector) -> DenseVector {
        let lt = &self.layout;
        let mut x = vec![0.0; lt.x_dim];
        for t in 0..lt.chain_len.len() {
            let n = lt.chain_len[t] * lt.labels;
            let xs = lt.chain_x_offset[t];
            let ys = lt.chain_y_offset[t];
            for j in 0..n {
                x[xs + j] = y[ys + j];
            }
        }
        DenseVector::from_raw(x)
    }

    fn norm_bound(&self) -> f64 {
        1.0
    }

    fn domain_dim(&self) -> usize {
        self.layout.x_dim
    }

    fn codomain_dim(&self) -> usize {
        self.layout.y_dim
    }
}

/// Indicator of the zero-sum dual set: for every node and label the duals
/// of the two covering chains must cancel. The prox subtracts the mean over
/// the covering chains (the closed-form projection).
pub struct MrfDualProx {
    layout: Arc<MrfLayout>,
}

impl MrfDualProx {
    pub fn residual(&self, y: &DenseVector) -> f64 {
        let lt = &self.layout;
        let mut worst = 0.0_f64;
        for cover in &lt.node_cover {
            let [(t1, p1), (t2, p2)] = *cover;
            for lab in 0..lt.labels {
                let s = y[lt.y_index(t1, p1, lab)] + y[lt.y_index(t2, p2, lab)];
                worst = worst.max(s.abs());
            }
        }
        worst
    }
}

impl ProxFn for MrfDualProx {
    fn prox(&self, _tau: f64, z: &DenseVector) -> DenseVector {
        let lt = &self.layout;
        let mut out = z.clone();
        for cover in &lt.node_cover {
            let [(t1, p1), (t2, p2)] = *cover;
            for lab in 0..lt.labels {
                let i1 = lt.y_index(t1, p1, lab);
                let i2 = lt.y_index(t2, p2, lab);
                let mean = 0.5 * (z[i1] + z[i2]);
                out[i1] = z[i1] - mean;
                out[i2] = z[i2] - mean;
            }
        }
        out
    }

    fn value(&self, y: &DenseVector) -> f64 {
        let scale = 1.0 + y.as_slice().iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if self.residual(y) <= 1e-8 * scale {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn dim(&self) -> usize {
        self.layout.y_dim
    }

    fn prox_linear_quadform(&self, tau: f64, w: &DenseVector) -> Option<f64> {
        let p = self.prox(tau, w);
        Some(p.dot(w))
    }
}

/// Projection of a dual vector onto the zero-sum feasible set.
pub fn project_dual_feasible(layout: &Arc<MrfLayout>, y: &DenseVector) -> DenseVector {
    MrfDualProx {
        layout: layout.clone(),
    }
    .prox(1.0, y)
}

/// Product-of-chains lmo: runs the DP per chain with the dual slice and the
/// cost-coordinate weight taken from the incoming direction.
pub struct ChainProductLmo {
    chains: Arc<Vec<ChainSubproblem>>,
    layout: Arc<MrfLayout>,
    diameter: f64,
}

impl ChainProductLmo {
    fn assemble(&self, atoms: Vec<ChainAtom>) -> Atom {
        let lt = &self.layout;
        let mut point = vec![0.0; lt.x_dim];
        let mut all_labels: Vec<u32> = Vec::new();
        let mut words: Vec<u64> = Vec::with_capacity(atoms.len() * 4);
        for (t, atom) in atoms.iter().enumerate() {
            for (pos, &lab) in atom.labeling.iter().enumerate() {
                point[lt.x_index(t, pos, lab)] = 1.0;
                all_labels.push(lab as u32);
                words.push(lab as u64);
            }
            words.push(u64::MAX); // chain separator
            point[lt.cost_index[t]] = atom.cost;
        }
        Atom {
            id: content_id(words),
            point: DenseVector::from_raw(point),
            aux: Some(AtomAux::Labeling(all_labels)),
        }
    }
}

impl LinearMinimizer for ChainProductLmo {
    fn minimize(&self, direction: &DenseVector) -> Atom {
        let lt = &self.layout;
        let atoms: Vec<ChainAtom> = self
            .chains
            .iter()
            .enumerate()
            .map(|(t, ch)| {
                let start = lt.chain_x_offset[t];
                let len = ch.len() * lt.labels;
                let duals = &direction.as_slice()[start..start + len];
                let ec = direction[lt.cost_index[t]];
                chain_lmo_scaled(ch, duals, ec)
            })
            .collect();
        self.assemble(atoms)
    }

    fn diameter_bound(&self) -> f64 {
        self.diameter
    }

    fn dim(&self) -> usize {
        self.layout.x_dim
    }

    fn contains(&self, x: &DenseVector, tol: f64) -> bool {
        // necessary marginalization checks: per (chain, position) the label
        // indicators form a distribution, and the cost coordinate stays
        // within the chain's energy range
        let lt = &self.layout;
        for (t, ch) in self.chains.iter().enumerate() {
            for pos in 0..ch.len() {
                let mut sum = 0.0;
                for lab in 0..lt.labels {
                    let v = x[lt.x_index(t, pos, lab)];
                    if v < -tol {
                        return false;
                    }
                    sum += v;
                }
                if (sum - 1.0).abs() > tol {
                    return false;
                }
            }
            let cost = x[lt.cost_index[t]];
            if cost < ch.min_energy_bound() - tol || cost > ch.max_energy() + tol {
                return false;
            }
        }
        true
    }
}

/// The assembled saddle problem for a grid MRF plus the pieces needed to
/// interpret its iterates.
pub struct MrfSaddle {
    pub problem: SaddleProblem,
    pub layout: Arc<MrfLayout>,
    pub chains: Arc<Vec<ChainSubproblem>>,
    pub mrf: GridMrf,
}

/// Build the chain-decomposed saddle problem: `f` linear in the cost
/// coordinates, `K` the indicator coupling, lmo the per-chain DP, and `h*`
/// the indicator of the zero-sum dual set.
pub fn build_saddle(mrf: GridMrf) -> MrfSaddle {
    let chains = Arc::new(decompose_grid(&mrf));
    let layout = Arc::new(MrfLayout::build(&mrf, &chains));
    let mut c = vec![0.0; layout.x_dim];
    for &ci in &layout.cost_index {
        c[ci] = 1.0;
    }
    let diameter = {
        let mut d2 = 0.0;
        for ch in chains.iter() {
            let range = ch.max_energy() - ch.min_energy_bound();
            d2 += 2.0 * ch.len() as f64 + range * range;
        }
        d2.sqrt()
    };
    let lmo = LmoHandle::new(Arc::new(ChainProductLmo {
        chains: chains.clone(),
        layout: layout.clone(),
        diameter,
    }));
    let problem = SaddleProblem {
        k: Arc::new(MrfCoupling {
            layout: layout.clone(),
        }),
        f: Arc::new(SmoothPart::Linear {
            c: DenseVector::from_raw(c),
        }),
        lmo,
        h_star: Arc::new(MrfDualProx {
            layout: layout.clone(),
        }),
        axb: None,
    };
    MrfSaddle {
        problem,
        layout,
        chains,
        mrf,
    }
}

/// Decode a relaxed primal point to a labeling: average the node-label
/// indicator mass over the two covering chains, take the argmax per node
/// (ties to the smallest label). Returns the labeling and its grid energy.
pub fn decode_primal(x: &DenseVector, mrf: &GridMrf, layout: &MrfLayout) -> (Vec<usize>, f64) {
    let mut labeling = Vec::with_capacity(mrf.nodes());
    for cover in &layout.node_cover {
        let [(t1, p1), (t2, p2)] = *cover;
        let mut best = 0usize;
        let mut best_mass = f64::NEG_INFINITY;
        for lab in 0..layout.labels {
            let mass = 0.5 * (x[layout.x_index(t1, p1, lab)] + x[layout.x_index(t2, p2, lab)]);
            if mass > best_mass {
                best_mass = mass;
                best = lab;
            }
        }
        labeling.push(best);
    }
    let energy = mrf.energy(&labeling);
    (labeling, energy)
}

/// Exhaustive MAP search; refuses instances beyond `labels^(W*H) <= 1e6`.
/// Ties resolve to the lexicographically smallest labeling.
pub fn brute_force_map(mrf: &GridMrf) -> Result<(Vec<usize>, f64)> {
    let n = mrf.nodes();
    if (mrf.labels as f64).powi(n as i32) > 1e6 {
        return Err(Error::InstanceTooLarge(format!(
            "{}^{n} labelings exceed the brute-force guard",
            mrf.labels
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut labeling = vec![0usize; n];
    loop {
        let e = mrf.energy(&labeling);
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, labeling.clone()));
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                let (e, lab) = best.unwrap();
                return Ok((lab, e));
            }
            pos -= 1;
            labeling[pos] += 1;
            if labeling[pos] < mrf.labels {
                break;
            }
            labeling[pos] = 0;
        }
    }
}
