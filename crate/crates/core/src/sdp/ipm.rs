//! Primal-dual interior-point method over complex Hermitian cones.
//!
//! Standard form, minimisation convention:
//!
//! ```text
//!   min <C, X>   s.t.  <A_i, X> = b_i,  X in K
//!   max b'y      s.t.  C - sum_i y_i A_i = Z in K
//! ```
//!
//! `K` is a product of Hermitian PSD cones and a non-negative orthant;
//! `<A, X> = Re Tr(A X)`. Inequalities become equalities with one slack
//! each. Search directions are HKM with Mehrotra predictor-corrector, from
//! an infeasible start.
//!
//! The Schur complement `M_ij = <A_i, X A_j Z^-1>` is assembled in
//! block-bordered form: rows not flagged `linking` are split into connected
//! components (rows sharing any cone or scalar), which never couple to each
//! other; linking rows form a dense border eliminated last.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::problem::{Sense, SdpProblem, Term};
use super::{SdpError, SdpSolution, SolveStatus, SolverConfig};

type CMat = DMatrix<Complex64>;

/// Tolerance of the normalised Farkas certificate for declaring infeasibility.
const CERTIFICATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
enum Coef {
    Sparse(Vec<(usize, usize, Complex64)>),
    Dense(CMat),
}

impl Coef {
    /// `Re Tr(A X)`.
    fn inner(&self, x: &CMat) -> f64 {
        match self {
            Coef::Sparse(e) => e.iter().map(|&(p, q, v)| (v * x[(q, p)]).re).sum(),
            Coef::Dense(a) => dense_inner(a, x),
        }
    }

    fn axpy(&self, scale: f64, target: &mut CMat) {
        match self {
            Coef::Sparse(e) => {
                for &(p, q, v) in e {
                    target[(p, q)] += v * scale;
                }
            }
            Coef::Dense(a) => {
                for (t, v) in target.iter_mut().zip(a.iter()) {
                    *t += v * scale;
                }
            }
        }
    }

    fn frobenius(&self) -> f64 {
        match self {
            Coef::Sparse(e) => e.iter().map(|(_, _, v)| v.norm_sqr()).sum::<f64>().sqrt(),
            Coef::Dense(a) => a.norm(),
        }
    }
}

fn dense_inner(a: &CMat, x: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            s += (a[(p, q)] * x[(q, p)]).re;
        }
    }
    s
}

fn herm(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

#[derive(Debug, Clone)]
struct Row {
    psd: Vec<(usize, Coef)>,
    lin: Vec<(usize, f64)>,
    rhs: f64,
    linking: bool,
}

/// The problem lowered to solver form.
struct Standard {
    cone_dims: Vec<usize>,
    nlin: usize,
    c_psd: Vec<CMat>,
    c_lin: Vec<f64>,
    rows: Vec<Row>,
    var_cones: Vec<Vec<usize>>,
    n_scalars: usize,
    /// Rows touching each cone: `(row, position in row.psd)`.
    cone_touch: Vec<Vec<(usize, usize)>>,
    lin_touch: Vec<Vec<(usize, f64)>>,
}

enum Lowered {
    Ready(Standard),
    /// A constraint without terms and nonzero right-hand side.
    TriviallyInfeasible(String),
}

fn lower(problem: &SdpProblem) -> Lowered {
    let mut var_cones = Vec::with_capacity(problem.psd_vars.len());
    let mut cone_dims = Vec::new();
    for v in &problem.psd_vars {
        let mut ids = Vec::with_capacity(v.block_dims.len());
        for &d in &v.block_dims {
            ids.push(cone_dims.len());
            cone_dims.push(d);
        }
        var_cones.push(ids);
    }
    let n_scalars = problem.scalar_vars.len();
    let n_slacks = problem.ineq_constraints().count();
    let nlin = n_scalars + n_slacks;

    let mut c_psd: Vec<CMat> = cone_dims.iter().map(|&d| CMat::zeros(d, d)).collect();
    let mut c_lin = vec![0.0; nlin];
    for t in &problem.objective {
        match t {
            Term::Psd { var, block, coeff } => {
                let k = var_cones[*var][*block];
                for e in &coeff.entries {
                    c_psd[k][(e.0, e.1)] -= e.value();
                }
            }
            Term::Scalar { var, coeff } => c_lin[*var] -= coeff,
        }
    }

    let mut rows = Vec::with_capacity(problem.constraints.len());
    let mut next_slack = n_scalars;
    for c in &problem.constraints {
        let mut per_cone: BTreeMap<usize, BTreeMap<(usize, usize), Complex64>> = BTreeMap::new();
        let mut per_lin: BTreeMap<usize, f64> = BTreeMap::new();
        for t in &c.terms {
            match t {
                Term::Psd { var, block, coeff } => {
                    let k = var_cones[*var][*block];
                    let slot = per_cone.entry(k).or_default();
                    for e in &coeff.entries {
                        *slot.entry((e.0, e.1)).or_insert(Complex64::new(0.0, 0.0)) += e.value();
                    }
                }
                Term::Scalar { var, coeff } => *per_lin.entry(*var).or_insert(0.0) += coeff,
            }
        }
        match c.sense {
            Sense::Eq => {}
            Sense::Ge => {
                per_lin.insert(next_slack, -1.0);
                next_slack += 1;
            }
            Sense::Le => {
                per_lin.insert(next_slack, 1.0);
                next_slack += 1;
            }
        }
        let psd: Vec<(usize, Coef)> = per_cone
            .into_iter()
            .filter_map(|(k, entries)| {
                let entries: Vec<_> = entries.into_iter().filter(|(_, v)| v.norm() != 0.0).map(|((p, q), v)| (p, q, v)).collect();
                if entries.is_empty() {
                    return None;
                }
                let dim = cone_dims[k];
                let coef = if entries.len() > 2 * dim {
                    let mut m = CMat::zeros(dim, dim);
                    for (p, q, v) in entries {
                        m[(p, q)] += v;
                    }
                    Coef::Dense(m)
                } else {
                    Coef::Sparse(entries)
                };
                Some((k, coef))
            })
            .collect();
        let lin: Vec<(usize, f64)> = per_lin.into_iter().filter(|(_, a)| *a != 0.0).collect();
        if psd.is_empty() && lin.is_empty() {
            if c.rhs.abs() > 0.0 {
                return Lowered::TriviallyInfeasible(c.label.clone());
            }
            continue;
        }
        rows.push(Row { psd, lin, rhs: c.rhs, linking: c.linking });
    }

    let mut cone_touch = vec![Vec::new(); cone_dims.len()];
    let mut lin_touch = vec![Vec::new(); nlin];
    for (i, r) in rows.iter().enumerate() {
        for (pos, (k, _)) in r.psd.iter().enumerate() {
            cone_touch[*k].push((i, pos));
        }
        for &(l, a) in &r.lin {
            lin_touch[l].push((i, a));
        }
    }
    Lowered::Ready(Standard { cone_dims, nlin, c_psd, c_lin, rows, var_cones, n_scalars, cone_touch, lin_touch })
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Group(usize, usize),
    Border(usize),
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Schur complement with independent diagonal groups and a dense border.
struct BorderedSchur {
    slots: Vec<Slot>,
    groups: Vec<DMatrix<f64>>,
    cross: Vec<DMatrix<f64>>,
    border: DMatrix<f64>,
}

impl BorderedSchur {
    fn layout(st: &Standard) -> Self {
        let m = st.rows.len();
        let mut parent: Vec<usize> = (0..m).collect();
        let link = |members: &mut dyn Iterator<Item = usize>, parent: &mut Vec<usize>| {
            let mut first = None;
            for i in members {
                if st.rows[i].linking {
                    continue;
                }
                match first {
                    None => first = Some(i),
                    Some(f) => union(parent, f, i),
                }
            }
        };
        for touch in &st.cone_touch {
            link(&mut touch.iter().map(|&(i, _)| i), &mut parent);
        }
        for touch in &st.lin_touch {
            link(&mut touch.iter().map(|&(i, _)| i), &mut parent);
        }
        let mut root_group: BTreeMap<usize, usize> = BTreeMap::new();
        let mut group_sizes: Vec<usize> = Vec::new();
        let mut nb = 0;
        let mut slots = Vec::with_capacity(m);
        for i in 0..m {
            if st.rows[i].linking {
                slots.push(Slot::Border(nb));
                nb += 1;
                continue;
            }
            let r = find(&mut parent, i);
            let g = *root_group.entry(r).or_insert_with(|| {
                group_sizes.push(0);
                group_sizes.len() - 1
            });
            slots.push(Slot::Group(g, group_sizes[g]));
            group_sizes[g] += 1;
        }
        Self {
            slots,
            groups: group_sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect(),
            cross: group_sizes.iter().map(|&s| DMatrix::zeros(s, nb)).collect(),
            border: DMatrix::zeros(nb, nb),
        }
    }

    fn clear(&mut self) {
        self.groups.iter_mut().for_each(|g| g.fill(0.0));
        self.cross.iter_mut().for_each(|c| c.fill(0.0));
        self.border.fill(0.0);
    }

    /// Adds `v` to `M_ij` and, off the diagonal, to `M_ji`.
    fn add(&mut self, i: usize, j: usize, v: f64) {
        match (self.slots[i], self.slots[j]) {
            (Slot::Group(g, a), Slot::Group(h, b)) => {
                debug_assert_eq!(g, h, "rows in different groups share a variable");
                self.groups[g][(a, b)] += v;
                if i != j {
                    self.groups[g][(b, a)] += v;
                }
            }
            (Slot::Group(g, a), Slot::Border(b)) | (Slot::Border(b), Slot::Group(g, a)) => {
                self.cross[g][(a, b)] += v;
            }
            (Slot::Border(a), Slot::Border(b)) => {
                self.border[(a, b)] += v;
                if i != j {
                    self.border[(b, a)] += v;
                }
            }
        }
    }

    fn factor(&self) -> Option<FactoredSchur> {
        let mut group_factors = Vec::with_capacity(self.groups.len());
        let mut solved_cross = Vec::with_capacity(self.groups.len());
        let mut reduced = self.border.clone();
        for (h, c) in self.groups.iter().zip(&self.cross) {
            let f = SpdFactor::new(h)?;
            let v = f.solve(c);
            reduced -= c.transpose() * &v;
            group_factors.push(f);
            solved_cross.push(v);
        }
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let border_factor = SpdFactor::new(&reduced)?;
        Some(FactoredSchur { group_factors, solved_cross, border_factor })
    }

    fn split(&self, v: &[f64]) -> (Vec<DVector<f64>>, DVector<f64>) {
        let mut groups: Vec<DVector<f64>> = self.groups.iter().map(|g| DVector::zeros(g.nrows())).collect();
        let mut border = DVector::zeros(self.border.nrows());
        for (i, slot) in self.slots.iter().enumerate() {
            match *slot {
                Slot::Group(g, a) => groups[g][a] = v[i],
                Slot::Border(b) => border[b] = v[i],
            }
        }
        (groups, border)
    }

    fn join(&self, groups: &[DVector<f64>], border: &DVector<f64>) -> Vec<f64> {
        self.slots
            .iter()
            .map(|slot| match *slot {
                Slot::Group(g, a) => groups[g][a],
                Slot::Border(b) => border[b],
            })
            .collect()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let (vg, vb) = self.split(v);
        let mut out_b = &self.border * &vb;
        let out_g: Vec<DVector<f64>> = (0..self.groups.len())
            .map(|g| {
                out_b += self.cross[g].transpose() * &vg[g];
                &self.groups[g] * &vg[g] + &self.cross[g] * &vb
            })
            .collect();
        self.join(&out_g, &out_b)
    }

    /// Solves `M dy = rhs` with a few rounds of iterative refinement.
    fn solve(&self, factored: &FactoredSchur, rhs: &[f64]) -> Vec<f64> {
        let mut x = factored.solve(self, rhs);
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut best = norm(&residual(rhs, &self.apply(&x)));
        for _ in 0..REFINEMENT_STEPS {
            let r = residual(rhs, &self.apply(&x));
            let d = factored.solve(self, &r);
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let res = norm(&residual(rhs, &self.apply(&trial)));
            if res >= best {
                break;
            }
            best = res;
            x = trial;
        }
        x
    }
}

const REFINEMENT_STEPS: usize = 3;

fn residual(rhs: &[f64], mv: &[f64]) -> Vec<f64> {
    rhs.iter().zip(mv).map(|(a, b)| a - b).collect()
}

/// Factorisation of a symmetric positive semidefinite matrix after symmetric
/// diagonal scaling: Cholesky when it succeeds, otherwise a spectral
/// pseudo-inverse that ignores directions with negligible curvature.
struct SpdFactor {
    scale: DVector<f64>,
    kind: FactorKind,
}

enum FactorKind {
    Cholesky(Cholesky<f64, nalgebra::Dyn>),
    Spectral { vectors: DMatrix<f64>, inv_values: DVector<f64> },
}

const PSEUDO_INVERSE_CUTOFF: f64 = 1e-14;

impl SpdFactor {
    fn new(m: &DMatrix<f64>) -> Option<Self> {
        let n = m.nrows();
        let scale = DVector::from_iterator(n, (0..n).map(|i| {
            let d = m[(i, i)];
            if d > 0.0 && d.is_finite() { 1.0 / d.sqrt() } else { 1.0 }
        }));
        let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * scale[i] * scale[j]);
        if let Some(c) = Cholesky::new(scaled.clone()) {
            let d = c.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if n == 0 || lo > 1e-7 * hi {
                return Some(SpdFactor { scale, kind: FactorKind::Cholesky(c) });
            }
        }
        let eig = scaled.symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        if !(top.is_finite() && top > 0.0) {
            return None;
        }
        let inv_values = eig.eigenvalues.map(|l| if l > PSEUDO_INVERSE_CUTOFF * top { 1.0 / l } else { 0.0 });
        Some(SpdFactor { scale, kind: FactorKind::Spectral { vectors: eig.eigenvectors, inv_values } })
    }

    fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut b = b.clone();
        for (i, mut row) in b.row_iter_mut().enumerate() {
            row *= self.scale[i];
        }
        let mut x = match &self.kind {
            FactorKind::Cholesky(c) => c.solve(&b),
            FactorKind::Spectral { vectors, inv_values } => {
                let mut t = vectors.transpose() * &b;
                for (i, mut row) in t.row_iter_mut().enumerate() {
                    row *= inv_values[i];
                }
                vectors * t
            }
        };
        for (i, mut row) in x.row_iter_mut().enumerate() {
            row *= self.scale[i];
        }
        x
    }

    fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let b = b.component_mul(&self.scale);
        let x = match &self.kind {
            FactorKind::Cholesky(c) => c.solve(&b),
            FactorKind::Spectral { vectors, inv_values } => {
                let t = (vectors.transpose() * b).component_mul(inv_values);
                vectors * t
            }
        };
        x.component_mul(&self.scale)
    }
}

struct FactoredSchur {
    group_factors: Vec<SpdFactor>,
    /// `V_g = H_g^-1 C_g`.
    solved_cross: Vec<DMatrix<f64>>,
    border_factor: SpdFactor,
}

impl FactoredSchur {
    fn solve(&self, layout: &BorderedSchur, rhs: &[f64]) -> Vec<f64> {
        let (r_groups, r_border) = layout.split(rhs);
        let u: Vec<DVector<f64>> = self.group_factors.iter().zip(&r_groups).map(|(f, r)| f.solve_vec(r)).collect();
        let mut reduced = r_border;
        for (v, r) in self.solved_cross.iter().zip(&r_groups) {
            reduced -= v.transpose() * r;
        }
        let dy_border = self.border_factor.solve_vec(&reduced);
        let dy_groups: Vec<DVector<f64>> = u.iter().zip(&self.solved_cross).map(|(ug, v)| ug - v * &dy_border).collect();
        layout.join(&dy_groups, &dy_border)
    }
}

/// Largest `alpha` with `x + alpha dx` in the PSD cone (infinite if none).
fn max_step_psd(x: &CMat, dx: &CMat) -> f64 {
    let n = x.nrows();
    if n == 1 {
        return max_step_lin(x[(0, 0)].re, dx[(0, 0)].re);
    }
    let chol = match Cholesky::new(x.clone()) {
        Some(c) => c,
        None => return 0.0,
    };
    let l = chol.l();
    let t = l.solve_lower_triangular(dx).expect("triangular solve");
    let r = l.solve_lower_triangular(&t.adjoint()).expect("triangular solve");
    let lmin = herm(&r).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Largest step not above `alpha` (shrinking geometrically) that keeps every
/// block numerically positive definite, with the updated blocks.
fn backtrack(x: &[CMat], dx: &[CMat], alpha: f64) -> (f64, Vec<CMat>) {
    let mut alpha = alpha;
    loop {
        let c = Complex64::new(alpha, 0.0);
        let next: Vec<CMat> = x.iter().zip(dx).map(|(a, d)| herm(&(a + d * c))).collect();
        if alpha == 0.0 || next.iter().all(|m| Cholesky::new(m.clone()).is_some()) {
            return (alpha, next);
        }
        alpha = if alpha < 1e-12 { 0.0 } else { alpha * 0.8 };
    }
}

fn max_step_lin(x: f64, dx: f64) -> f64 {
    if dx >= 0.0 {
        f64::INFINITY
    } else {
        -x / dx
    }
}

fn min_eigenvalue(m: &CMat) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].re,
        _ => herm(m).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min),
    }
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

struct Iterate {
    x: Vec<CMat>,
    z: Vec<CMat>,
    xl: Vec<f64>,
    zl: Vec<f64>,
    y: Vec<f64>,
}

struct Direction {
    dx: Vec<CMat>,
    dz: Vec<CMat>,
    dxl: Vec<f64>,
    dzl: Vec<f64>,
    dy: Vec<f64>,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Vec<CMat>,
    rdl: Vec<f64>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
}

impl Standard {
    fn apply_a(&self, x: &[CMat], xl: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.psd.iter().map(|(k, c)| c.inner(&x[*k])).sum::<f64>() + r.lin.iter().map(|&(l, a)| a * xl[l]).sum::<f64>())
            .collect()
    }

    fn apply_at(&self, y: &[f64]) -> (Vec<CMat>, Vec<f64>) {
        let mut psd: Vec<CMat> = self.cone_dims.iter().map(|&d| CMat::zeros(d, d)).collect();
        let mut lin = vec![0.0; self.nlin];
        for (r, &yi) in self.rows.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (k, c) in &r.psd {
                c.axpy(yi, &mut psd[*k]);
            }
            for &(l, a) in &r.lin {
                lin[l] += a * yi;
            }
        }
        (psd, lin)
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let ax = self.apply_a(&it.x, &it.xl);
        let rp: Vec<f64> = self.rows.iter().zip(&ax).map(|(r, v)| r.rhs - v).collect();
        let (aty, atyl) = self.apply_at(&it.y);
        let rd: Vec<CMat> = (0..self.cone_dims.len()).map(|k| &self.c_psd[k] - &it.z[k] - &aty[k]).collect();
        let rdl: Vec<f64> = (0..self.nlin).map(|l| self.c_lin[l] - it.zl[l] - atyl[l]).collect();
        let pobj = (0..self.cone_dims.len()).map(|k| dense_inner(&self.c_psd[k], &it.x[k])).sum::<f64>()
            + self.c_lin.iter().zip(&it.xl).map(|(c, x)| c * x).sum::<f64>();
        let dobj = self.rows.iter().zip(&it.y).map(|(r, y)| r.rhs * y).sum();
        let pinf = rp.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let dinf = rd.iter().map(max_abs).chain(rdl.iter().map(|v| v.abs())).fold(0.0, f64::max);
        Residuals { rp, rd, rdl, pobj, dobj, pinf, dinf }
    }

    fn initial_point(&self) -> Iterate {
        let mut x = Vec::with_capacity(self.cone_dims.len());
        let mut z = Vec::with_capacity(self.cone_dims.len());
        for (k, &n) in self.cone_dims.iter().enumerate() {
            let nf = n as f64;
            let mut xi: f64 = 1.0f64.max(nf.sqrt());
            let mut zeta: f64 = 1.0f64.max(nf.sqrt()).max(self.c_psd[k].norm());
            for &(i, pos) in &self.cone_touch[k] {
                let r = &self.rows[i];
                let na = r.psd[pos].1.frobenius();
                xi = xi.max(nf * (1.0 + r.rhs.abs()) / (1.0 + na));
                zeta = zeta.max(na);
            }
            x.push(identity(n) * Complex64::new(xi, 0.0));
            z.push(identity(n) * Complex64::new(zeta, 0.0));
        }
        let mut xl = Vec::with_capacity(self.nlin);
        let mut zl = Vec::with_capacity(self.nlin);
        for l in 0..self.nlin {
            let mut xi: f64 = 1.0;
            let mut zeta: f64 = 1.0f64.max(self.c_lin[l].abs());
            for &(i, a) in &self.lin_touch[l] {
                xi = xi.max((1.0 + self.rows[i].rhs.abs()) / (1.0 + a.abs()));
                zeta = zeta.max(a.abs());
            }
            xl.push(xi);
            zl.push(zeta);
        }
        Iterate { x, z, xl, zl, y: vec![0.0; self.rows.len()] }
    }

    fn assemble_schur(&self, schur: &mut BorderedSchur, it: &Iterate, w: &[CMat]) {
        schur.clear();
        for (k, touch) in self.cone_touch.iter().enumerate() {
            if touch.is_empty() {
                continue;
            }
            let x = &it.x[k];
            let wk = &w[k];
            // X A_j W for dense coefficients.
            let prod: Vec<Option<CMat>> = touch
                .iter()
                .map(|&(i, pos)| match &self.rows[i].psd[pos].1 {
                    Coef::Dense(a) => Some(x * a * wk),
                    Coef::Sparse(_) => None,
                })
                .collect();
            for (s, &(i, pi)) in touch.iter().enumerate() {
                let ci = &self.rows[i].psd[pi].1;
                for (t, &(j, pj)) in touch.iter().enumerate().skip(s) {
                    let cj = &self.rows[j].psd[pj].1;
                    let v = match (&prod[s], &prod[t]) {
                        (_, Some(yj)) => ci.inner(yj),
                        (Some(yi), None) => cj.inner(yi),
                        (None, None) => sparse_pair(ci, cj, x, wk),
                    };
                    schur.add(i, j, v);
                }
            }
        }
        for (l, touch) in self.lin_touch.iter().enumerate() {
            let ratio = it.xl[l] / it.zl[l];
            for (s, &(i, a)) in touch.iter().enumerate() {
                for &(j, b) in touch.iter().skip(s) {
                    schur.add(i, j, a * b * ratio);
                }
            }
        }
    }

    /// HKM direction for target `sigma_mu` with optional second-order term.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        schur: &BorderedSchur,
        factored: &FactoredSchur,
        it: &Iterate,
        res: &Residuals,
        w: &[CMat],
        sigma_mu: f64,
        corr: Option<(&[CMat], &[f64])>,
    ) -> Direction {
        let ncone = self.cone_dims.len();
        // target_k = (sigma mu I - corr_k) W_k
        let target: Vec<CMat> = (0..ncone)
            .map(|k| {
                let mut t = identity(self.cone_dims[k]) * Complex64::new(sigma_mu, 0.0);
                if let Some((c, _)) = corr {
                    t -= &c[k];
                }
                t * &w[k]
            })
            .collect();
        let q: Vec<CMat> = (0..ncone).map(|k| herm(&(&it.x[k] * &res.rd[k] * &w[k] + &it.x[k] - &target[k]))).collect();
        let target_l: Vec<f64> = (0..self.nlin)
            .map(|l| (sigma_mu - corr.map_or(0.0, |(_, c)| c[l])) / it.zl[l])
            .collect();
        let ql: Vec<f64> = (0..self.nlin)
            .map(|l| it.xl[l] * res.rdl[l] / it.zl[l] + it.xl[l] - target_l[l])
            .collect();
        let rhs: Vec<f64> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                res.rp[i]
                    + r.psd.iter().map(|(k, c)| c.inner(&q[*k])).sum::<f64>()
                    + r.lin.iter().map(|&(l, a)| a * ql[l]).sum::<f64>()
            })
            .collect();
        let dy = schur.solve(factored, &rhs);
        let (atdy, atdyl) = self.apply_at(&dy);
        let dz: Vec<CMat> = (0..ncone).map(|k| &res.rd[k] - &atdy[k]).collect();
        let dzl: Vec<f64> = (0..self.nlin).map(|l| res.rdl[l] - atdyl[l]).collect();
        let dx: Vec<CMat> = (0..ncone)
            .map(|k| herm(&(&target[k] - &it.x[k] - &it.x[k] * &dz[k] * &w[k])))
            .collect();
        let dxl: Vec<f64> = (0..self.nlin)
            .map(|l| target_l[l] - it.xl[l] - it.xl[l] * dzl[l] / it.zl[l])
            .collect();
        Direction { dx, dz, dxl, dzl, dy }
    }

    fn step_lengths(&self, it: &Iterate, d: &Direction) -> (f64, f64) {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for k in 0..self.cone_dims.len() {
            ap = ap.min(max_step_psd(&it.x[k], &d.dx[k]));
            ad = ad.min(max_step_psd(&it.z[k], &d.dz[k]));
        }
        for l in 0..self.nlin {
            ap = ap.min(max_step_lin(it.xl[l], d.dxl[l]));
            ad = ad.min(max_step_lin(it.zl[l], d.dzl[l]));
        }
        (ap, ad)
    }

    fn complementarity(&self, it: &Iterate) -> f64 {
        (0..self.cone_dims.len()).map(|k| dense_inner(&it.x[k], &it.z[k])).sum::<f64>()
            + it.xl.iter().zip(&it.zl).map(|(a, b)| a * b).sum::<f64>()
    }

    fn barrier_dim(&self) -> f64 {
        (self.cone_dims.iter().sum::<usize>() + self.nlin) as f64
    }

    /// Normalised primal-infeasibility certificate quality of `y`:
    /// `y` proves infeasibility when `b'y > 0` and `-A'y` is PSD.
    fn farkas_violation(&self, y: &[f64], dobj: f64) -> f64 {
        if dobj <= 0.0 {
            return f64::INFINITY;
        }
        let (aty, atyl) = self.apply_at(y);
        let worst = aty
            .iter()
            .map(|m| (-min_eigenvalue(&(-m))).max(0.0))
            .chain(atyl.iter().map(|v| v.max(0.0)))
            .fold(0.0, f64::max);
        worst / dobj
    }

    /// `max(0, -lambda_min(C - A'y))` over all cones.
    fn dual_cone_violation(&self, y: &[f64]) -> f64 {
        let (aty, atyl) = self.apply_at(y);
        let psd = (0..self.cone_dims.len()).map(|k| (-min_eigenvalue(&(&self.c_psd[k] - &aty[k]))).max(0.0));
        let lin = (0..self.nlin).map(|l| (atyl[l] - self.c_lin[l]).max(0.0));
        psd.chain(lin).fold(0.0, f64::max)
    }
}

fn sparse_pair(ci: &Coef, cj: &Coef, x: &CMat, w: &CMat) -> f64 {
    // Re Tr(A_i X A_j W) = sum A_i[p,q] X[q,r] A_j[r,s] W[s,p]
    match (ci, cj) {
        (Coef::Sparse(ei), Coef::Sparse(ej)) => {
            let mut s = Complex64::new(0.0, 0.0);
            for &(p, q, a) in ei {
                for &(r, t, b) in ej {
                    s += a * x[(q, r)] * b * w[(t, p)];
                }
            }
            s.re
        }
        _ => unreachable!("dense coefficients handled by the caller"),
    }
}

pub(super) fn solve_ipm(problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    config.validate()?;
    let st = match lower(problem) {
        Lowered::Ready(st) => st,
        Lowered::TriviallyInfeasible(label) => {
            return Ok(SdpSolution::failed(problem, SolveStatus::Infeasible, 0, format!("constraint `{label}` has no terms")));
        }
    };
    let mut schur = BorderedSchur::layout(&st);
    let mut it = st.initial_point();
    let nu = st.barrier_dim().max(1.0);
    let mut status = SolveStatus::NumericalFailure;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;
    let mut best: Option<(f64, Iterate)> = None;
    let mut stalls = 0;

    for iter in 0..=config.max_iterations {
        iterations = iter;
        let res = st.residuals(&it);
        let gap = (res.pobj - res.dobj).abs();
        let merit = gap.max(res.pinf).max(res.dinf);
        if best.as_ref().is_none_or(|(m, _)| merit < *m) {
            best = Some((merit, Iterate { x: it.x.clone(), z: it.z.clone(), xl: it.xl.clone(), zl: it.zl.clone(), y: it.y.clone() }));
        }
        let rel_gap = gap / (1.0 + res.pobj.abs() + res.dobj.abs());
        if rel_gap <= config.gap_tolerance && res.pinf <= config.feasibility_tolerance && res.dinf <= config.feasibility_tolerance {
            status = SolveStatus::Optimal;
            message = String::from("converged");
            break;
        }
        if res.dobj > 0.0 && st.farkas_violation(&it.y, res.dobj) <= CERTIFICATE_TOLERANCE && res.dobj > 1.0 / CERTIFICATE_TOLERANCE.sqrt() {
            status = SolveStatus::Infeasible;
            message = String::from("primal infeasibility certificate found");
            break;
        }
        if res.pobj < -1.0 / CERTIFICATE_TOLERANCE.sqrt() && res.pinf / res.pobj.abs() <= CERTIFICATE_TOLERANCE {
            status = SolveStatus::NumericalFailure;
            message = String::from("primal objective unbounded (dual infeasible)");
            break;
        }
        if iter == config.max_iterations {
            break;
        }

        let w: Vec<CMat> = match it.z.iter().map(|z| Cholesky::new(z.clone()).map(|c| c.inverse())).collect::<Option<Vec<_>>>() {
            Some(w) => w,
            None => {
                message = String::from("dual slack lost definiteness");
                break;
            }
        };
        st.assemble_schur(&mut schur, &it, &w);
        let factored = match schur.factor() {
            Some(f) => f,
            None => {
                message = String::from("Schur complement is not positive definite");
                break;
            }
        };
        let mu = st.complementarity(&it) / nu;

        let pred = st.direction(&schur, &factored, &it, &res, &w, 0.0, None);
        let (ap, ad) = st.step_lengths(&it, &pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let trial = Iterate {
            x: it.x.iter().zip(&pred.dx).map(|(x, d)| x + d * Complex64::new(ap, 0.0)).collect(),
            z: it.z.iter().zip(&pred.dz).map(|(z, d)| z + d * Complex64::new(ad, 0.0)).collect(),
            xl: it.xl.iter().zip(&pred.dxl).map(|(x, d)| x + ap * d).collect(),
            zl: it.zl.iter().zip(&pred.dzl).map(|(z, d)| z + ad * d).collect(),
            y: Vec::new(),
        };
        let mu_aff = (st.complementarity(&trial) / nu).max(0.0);
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        let corr_psd: Vec<CMat> = pred.dx.iter().zip(&pred.dz).map(|(a, b)| a * b).collect();
        let corr_lin: Vec<f64> = pred.dxl.iter().zip(&pred.dzl).map(|(a, b)| a * b).collect();
        let dir = st.direction(&schur, &factored, &it, &res, &w, sigma * mu, Some((&corr_psd, &corr_lin)));
        let (ap, ad) = st.step_lengths(&it, &dir);
        let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls > 3 {
                message = String::from("step length collapsed");
                break;
            }
        }
        let (ap, new_x) = backtrack(&it.x, &dir.dx, ap);
        let (ad, new_z) = backtrack(&it.z, &dir.dz, ad);
        it.x = new_x;
        it.z = new_z;
        for l in 0..st.nlin {
            it.xl[l] += ap * dir.dxl[l];
            it.zl[l] += ad * dir.dzl[l];
        }
        for (y, d) in it.y.iter_mut().zip(&dir.dy) {
            *y += ad * d;
        }
    }

    if status == SolveStatus::NumericalFailure {
        if let Some((_, b)) = best {
            it = b;
        }
    }
    Ok(extract(problem, &st, &it, status, iterations, message))
}

fn extract(problem: &SdpProblem, st: &Standard, it: &Iterate, status: SolveStatus, iterations: usize, message: String) -> SdpSolution {
    let res = st.residuals(it);
    let psd_values: Vec<Vec<CMat>> = st.var_cones.iter().map(|cones| cones.iter().map(|&k| it.x[k].clone()).collect()).collect();
    let scalar_values: Vec<f64> = it.xl[..st.n_scalars].to_vec();
    let residuals = problem.violations(&psd_values, &scalar_values);
    let primal_value = SdpProblem::evaluate(&problem.objective, &psd_values, &scalar_values);
    let dual_value = -res.dobj;
    let certified_bound = problem.trace_bound.map(|t| dual_value + t * st.dual_cone_violation(&it.y));
    SdpSolution {
        status,
        primal_value,
        dual_value,
        duality_gap: (dual_value - primal_value).abs(),
        certified_bound,
        primal_infeasibility: res.pinf,
        dual_infeasibility: res.dinf,
        iterations,
        message,
        psd_values,
        scalar_values,
        residuals,
        dual_multipliers: it.y.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::{HermitianCoeff, LinearConstraint, PsdVariable, ScalarVariable};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bordered_solve_matches_dense() {
        // Two groups and one border row, compare against a dense solve.
        let layout_slots = vec![Slot::Group(0, 0), Slot::Group(0, 1), Slot::Group(1, 0), Slot::Border(0)];
        let mut s = BorderedSchur {
            slots: layout_slots,
            groups: vec![DMatrix::zeros(2, 2), DMatrix::zeros(1, 1)],
            cross: vec![DMatrix::zeros(2, 1), DMatrix::zeros(1, 1)],
            border: DMatrix::zeros(1, 1),
        };
        let dense = DMatrix::from_row_slice(4, 4, &[4.0, 1.0, 0.0, 0.5, 1.0, 3.0, 0.0, -0.2, 0.0, 0.0, 2.0, 0.3, 0.5, -0.2, 0.3, 5.0]);
        for i in 0..4 {
            for j in i..4 {
                if dense[(i, j)] != 0.0 {
                    s.add(i, j, dense[(i, j)]);
                }
            }
        }
        let f = s.factor().unwrap();
        let rhs = [1.0, -2.0, 0.5, 3.0];
        let got = s.solve(&f, &rhs);
        let want = dense.clone().cholesky().unwrap().solve(&DVector::from_row_slice(&rhs));
        for i in 0..4 {
            assert!((got[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn max_step_hits_boundary() {
        let x = identity(2);
        let mut dx = CMat::zeros(2, 2);
        dx[(0, 0)] = c(-2.0, 0.0);
        assert!((max_step_psd(&x, &dx) - 0.5).abs() < 1e-12);
        assert_eq!(max_step_psd(&x, &identity(2)), f64::INFINITY);
    }

    /// max Re X[0,1] s.t. X 2x2 PSD, X00 = X11 = 1 has optimum 1.
    #[test]
    fn solves_small_complex_sdp() {
        let problem = SdpProblem {
            psd_vars: vec![PsdVariable { label: "X".into(), block_dims: vec![2] }],
            scalar_vars: vec![],
            objective: vec![Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::real_part(2, 0, 1) }],
            constraints: vec![
                LinearConstraint { label: "d0".into(), terms: vec![Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::diagonal_unit(2, 0) }], sense: Sense::Eq, rhs: 1.0, linking: false },
                LinearConstraint { label: "d1".into(), terms: vec![Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::diagonal_unit(2, 1) }], sense: Sense::Eq, rhs: 1.0, linking: false },
            ],
            trace_bound: Some(2.0),
        };
        let sol = solve_ipm(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.message);
        assert!((sol.dual_value - 1.0).abs() < 1e-7);
        assert!(sol.duality_gap <= 1e-8);
        assert!(sol.certified_bound.unwrap() >= 1.0 - 1e-9);
    }

    /// Imaginary part objective with an inequality and a scalar.
    #[test]
    fn solves_with_inequalities_and_scalars() {
        // max Im X01 + s  s.t. X00 + X11 <= 2, s <= 0.25, X PSD, s >= 0.
        let problem = SdpProblem {
            psd_vars: vec![PsdVariable { label: "X".into(), block_dims: vec![2] }],
            scalar_vars: vec![ScalarVariable { label: "s".into() }],
            objective: vec![
                Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::imag_part(2, 0, 1) },
                Term::Scalar { var: 0, coeff: 1.0 },
            ],
            constraints: vec![
                LinearConstraint {
                    label: "tr".into(),
                    terms: vec![
                        Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::diagonal_unit(2, 0) },
                        Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::diagonal_unit(2, 1) },
                    ],
                    sense: Sense::Le,
                    rhs: 2.0,
                    linking: false,
                },
                LinearConstraint { label: "cap".into(), terms: vec![Term::Scalar { var: 0, coeff: 1.0 }], sense: Sense::Le, rhs: 0.25, linking: true },
            ],
            trace_bound: Some(2.5),
        };
        let sol = solve_ipm(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.message);
        assert!((sol.dual_value - 1.25).abs() < 1e-7, "{}", sol.dual_value);
        let x = &sol.psd_values[0][0];
        assert!((x[(0, 1)].im - 1.0).abs() < 1e-5);
    }

    #[test]
    fn detects_infeasibility() {
        // X00 = 1 and X00 = -1 cannot both hold; use PSD X00 = -1.
        let problem = SdpProblem {
            psd_vars: vec![PsdVariable { label: "X".into(), block_dims: vec![2] }],
            scalar_vars: vec![],
            objective: vec![Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::diagonal_unit(2, 1) }],
            constraints: vec![
                LinearConstraint { label: "neg".into(), terms: vec![Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::diagonal_unit(2, 0) }], sense: Sense::Eq, rhs: -1.0, linking: false },
                LinearConstraint { label: "d1".into(), terms: vec![Term::Psd { var: 0, block: 0, coeff: HermitianCoeff::diagonal_unit(2, 1) }], sense: Sense::Le, rhs: 1.0, linking: false },
            ],
            trace_bound: None,
        };
        let sol = solve_ipm(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible, "{}", sol.message);
    }
}
