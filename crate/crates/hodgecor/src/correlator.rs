//! The tree-sum correlator engine: assemble κ_T(W), integrate over the
//! internal vertices, sum over plane trees, fill correlator tables and the
//! correlator class, and run the numeric identity checks.

use crate::algebra::{abelian_surface_model, elliptic_model, PDAlgebra};
use crate::cyclic::{Alphabet, CyclicChain, Side};
use crate::forms::{FormMask, FourierForm, Torus, TWO_PI};
use crate::green::{build_propagator, GreenError, MuChoice, Propagator};
use crate::polyops::{expand_omega, expand_xi, OperatorTermList, SlotOp};
use crate::scalar::{C64, Rat, Scalar};
use crate::trees::{enumerate_trees, PlaneTree};
use num::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorrelatorError {
    #[error("word too short: correlators need at least 3 letters, got {0}")]
    WordTooShort(usize),
    #[error("letter {0} is not in the reduced basis of the model")]
    UnknownLetter(String),
    #[error("green kernel: {0}")]
    Green(#[from] GreenError),
    #[error("quadrature failed to contract: deltas {0} then {1}")]
    QuadratureDivergence(f64, f64),
}

/// A torus-backed algebra model: exact algebra plus harmonic representatives
/// whose wedge integrals reproduce the trace table exactly.
#[derive(Clone)]
pub struct HarmonicModel {
    pub name: String,
    pub algebra: PDAlgebra<Rat>,
    pub torus: Torus,
    /// representative of each algebra basis class (constant forms)
    pub reps: Vec<FourierForm>,
}

fn scaled_generator_reps(torus: &Torus) -> Vec<FourierForm> {
    // dz_a as is; dz̄_a scaled by 1/(τ̄_a − τ_a) so ∫ dz ∧ rep(dz̄) = 1
    let n = torus.n;
    let mut reps = Vec::new();
    for a in 0..n {
        reps.push(FourierForm::monomial(
            torus,
            1 << a,
            &vec![0; torus.dims()],
            C64::new(1.0, 0.0),
        ));
        let tau = torus.periods[a][2 * a + 1];
        reps.push(FourierForm::monomial(
            torus,
            1 << (n + a),
            &vec![0; torus.dims()],
            C64::new(1.0, 0.0) / (tau.conj() - tau),
        ));
    }
    reps
}

fn model_from_exterior(
    name: &str,
    algebra: PDAlgebra<Rat>,
    torus: Torus,
) -> HarmonicModel {
    let gens = scaled_generator_reps(&torus);
    let mut reps = Vec::with_capacity(algebra.dim());
    for b in &algebra.basis {
        let mut form = FourierForm::one(&torus);
        if b.label != "1" {
            for part in b.label.split('.') {
                let gi = match part {
                    "dz" | "dz1" => 0,
                    "dzbar" | "dzbar1" => 1,
                    "dz2" => 2,
                    "dzbar2" => 3,
                    other => panic!("unknown generator label {other}"),
                };
                form = form.wedge(&gens[gi]).expect("constant wedge");
            }
        }
        reps.push(form);
    }
    HarmonicModel { name: name.to_string(), algebra, torus, reps }
}

pub fn elliptic_harmonic_model(tau: C64) -> HarmonicModel {
    model_from_exterior("elliptic", elliptic_model(), Torus::elliptic(tau))
}

pub fn surface_harmonic_model(tau1: C64, tau2: C64) -> HarmonicModel {
    model_from_exterior("ab-surface", abelian_surface_model(), Torus::product(tau1, tau2))
}

impl HarmonicModel {
    /// Largest deviation between ∫ rep_i ∧ rep_j and the exact trace table.
    pub fn trace_consistency_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.algebra.dim() {
            for j in 0..self.algebra.dim() {
                let prod = self.reps[i].wedge(&self.reps[j]).expect("constant wedge");
                let numeric = if prod.degree() == Some(2 * self.torus.n as u32) {
                    prod.integrate().unwrap_or_else(|_| C64::zero())
                } else {
                    C64::zero()
                };
                let exact = self
                    .algebra
                    .trace_of(&self.algebra.mult[i][j].clone())
                    .to_c64();
                defect = defect.max((numeric - exact).norm());
            }
        }
        defect
    }
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    Omega,
    Xi,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Quadrature {
    /// dealiased tensor grid with the given points per axis
    Grid { points: usize },
    /// Monte Carlo with antithetic pairs
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineConfig {
    pub flavor: Flavor,
    pub truncation: i32,
    pub mu: MuChoice,
    pub quadrature: Quadrature,
}

impl EngineConfig {
    pub fn grid(points: usize, truncation: i32) -> Self {
        EngineConfig {
            flavor: Flavor::Omega,
            truncation,
            mu: MuChoice::Volume,
            quadrature: Quadrature::Grid { points },
        }
    }
}

// ---------------------------------------------------------------------------
// degree filter

/// Lemma-level gate: for m+1 ≥ 4 letters the degree count Σ(deg−1) = 2n−2
/// plus the bidegree window Σp−n > 0, Σq−n > 0; the three-letter case is the
/// bare integral, nonzero only when Σ deg = 2n.
pub fn may_contribute(alg: &PDAlgebra<Rat>, letters: &[usize]) -> bool {
    let n = alg.n as i64;
    let degs: i64 = letters.iter().map(|&i| alg.basis[i].deg() as i64).sum();
    let p: i64 = letters.iter().map(|&i| alg.basis[i].p as i64).sum();
    let q: i64 = letters.iter().map(|&i| alg.basis[i].q as i64).sum();
    if letters.len() == 3 {
        return degs == 2 * n;
    }
    let m = letters.len() as i64 - 1;
    let degree_ok = degs - (m + 1) == 2 * n - 2;
    // the two counts of the same condition must agree structurally
    debug_assert_eq!(
        degree_ok,
        (2 * n - 2) * (m - 2) + (m - 3) + degs == 2 * n * (m - 1)
    );
    degree_ok && p - n > 0 && q - n > 0
}

// ---------------------------------------------------------------------------
// integrand machinery

/// Sparse exterior-algebra element over the covector slots of all integration
/// vertices, with pointwise complex coefficients.
#[derive(Clone, Debug)]
struct PointForm {
    terms: Vec<(u64, C64)>,
}

impl PointForm {
    fn constant(c: C64) -> Self {
        PointForm { terms: vec![(0, c)] }
    }

    fn wedge(&self, other: &PointForm) -> PointForm {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(ma, ca) in &self.terms {
            for &(mb, cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let sign = wedge_sign_u64(ma, mb);
                out.push((ma | mb, ca * cb * (sign as f64)));
            }
        }
        PointForm { terms: out }
    }

    fn top_coefficient(&self, full: u64) -> C64 {
        self.terms
            .iter()
            .filter(|(m, _)| *m == full)
            .map(|(_, c)| *c)
            .sum()
    }
}

fn wedge_sign_u64(a: u64, b: u64) -> i32 {
    let mut sign = 0u32;
    let mut bb = b;
    while bb != 0 {
        let bit = bb.trailing_zeros();
        sign += (a >> (bit + 1)).count_ones();
        bb &= bb - 1;
    }
    if sign % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Grid tables of a Fourier form: one complex array per covector mask, values
/// on the N^{2n} lattice, produced by zero-padded inverse FFTs.
struct GridTables {
    n_axis: usize,
    tables: BTreeMap<FormMask, Vec<C64>>,
}

impl GridTables {
    fn build(form: &FourierForm, n_axis: usize) -> GridTables {
        let dims = form.torus.dims();
        let size = n_axis.pow(dims as u32);
        let mut tables: BTreeMap<FormMask, Vec<C64>> = BTreeMap::new();
        for ((mask, mode), c) in &form.terms {
            let arr = tables.entry(*mask).or_insert_with(|| vec![C64::zero(); size]);
            // place the coefficient at the aliased index
            let mut idx = 0usize;
            for (axis, &k) in mode.iter().enumerate() {
                let pos = k.rem_euclid(n_axis as i32) as usize;
                idx = idx * n_axis + pos;
                let _ = axis;
            }
            arr[idx] += *c;
        }
        for arr in tables.values_mut() {
            ifft_nd(arr, n_axis, dims);
        }
        GridTables { n_axis, tables }
    }

    fn at(&self, point: &[usize]) -> Vec<(FormMask, C64)> {
        let mut idx = 0usize;
        for &p in point {
            idx = idx * self.n_axis + p;
        }
        self.tables
            .iter()
            .map(|(mask, arr)| (*mask, arr[idx]))
            .filter(|(_, c)| !c.is_zero())
            .collect()
    }
}

/// Unnormalized inverse DFT along every axis: value[x] = Σ_k c_k e^{2πik·x/N}.
fn ifft_nd(data: &mut [C64], n_axis: usize, dims: usize) {
    use rustfft::FftPlanner;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n_axis);
    let total = data.len();
    let mut buf = vec![C64::zero(); n_axis];
    for axis in (0..dims).rev() {
        // stride of this axis in row-major layout with index built as
        // idx = ((x₀·N + x₁)·N + x₂)…: axis d has stride N^{dims−1−d}
        let stride = n_axis.pow((dims - 1 - axis) as u32);
        let block = stride * n_axis;
        for start in 0..total / block {
            for offset in 0..stride {
                let base = start * block + offset;
                for i in 0..n_axis {
                    buf[i] = data[base + i * stride];
                }
                fft.process(&mut buf);
                for i in 0..n_axis {
                    data[base + i * stride] = buf[i];
                }
            }
        }
    }
}

/// Evaluates a Fourier form at an arbitrary point.
fn eval_form_components(form: &FourierForm, u: &[f64]) -> Vec<(FormMask, C64)> {
    let mut acc: BTreeMap<FormMask, C64> = BTreeMap::new();
    for ((mask, mode), c) in &form.terms {
        let phase: f64 = mode.iter().zip(u).map(|(&k, &x)| k as f64 * x).sum();
        *acc.entry(*mask).or_insert_with(C64::zero) += *c * C64::new(0.0, TWO_PI * phase).exp();
    }
    acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

/// Flattened form data for fast repeated evaluation.
struct FlatForm {
    band: i32,
    /// (mask, mode offsets per axis, coefficient)
    terms: Vec<(FormMask, Vec<usize>, C64)>,
}

impl FlatForm {
    fn new(form: &FourierForm) -> FlatForm {
        let band = form.bandwidth();
        let terms = form
            .terms
            .iter()
            .map(|((mask, mode), c)| {
                let offs: Vec<usize> = mode.iter().map(|&k| (k + band) as usize).collect();
                (*mask, offs, *c)
            })
            .collect();
        FlatForm { band, terms }
    }

    /// Characters per axis at the point u: vals[axis][k+band] = e^{2πiku_axis}.
    fn phases(&self, u: &[f64]) -> Vec<Vec<C64>> {
        let width = (2 * self.band + 1) as usize;
        u.iter()
            .map(|&x| {
                let step = C64::new(0.0, TWO_PI * x).exp();
                let mut v = vec![C64::new(1.0, 0.0); width];
                let mid = self.band as usize;
                for k in 1..=self.band as usize {
                    v[mid + k] = v[mid + k - 1] * step;
                    v[mid - k] = v[mid - k + 1] * step.conj();
                }
                v
            })
            .collect()
    }

    fn eval(&self, phases: &[Vec<C64>]) -> [C64; 16] {
        let mut acc = [C64::zero(); 16];
        for (mask, offs, c) in &self.terms {
            let mut ch = C64::new(1.0, 0.0);
            for (axis, &o) in offs.iter().enumerate() {
                ch *= phases[axis][o];
            }
            acc[*mask as usize] += *c * ch;
        }
        acc
    }

    fn eval_at(&self, u: &[f64]) -> Vec<(FormMask, C64)> {
        let phases = self.phases(u);
        self.eval(&phases)
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| (m as FormMask, *c))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// the engine

pub struct Engine {
    pub model: HarmonicModel,
    pub config: EngineConfig,
    pub propagator: Propagator,
    /// op-applied propagator forms: [γ, ∂γ, ∂̄γ]
    green_ops: [FourierForm; 3],
}

impl Engine {
    pub fn new(model: HarmonicModel, config: EngineConfig) -> Result<Engine, CorrelatorError> {
        let propagator = build_propagator(&model.torus, config.mu.clone(), config.truncation)?;
        let mut gamma = propagator.gamma.clone();
        gamma.band_cap = i32::MAX;
        let green_ops = [gamma.clone(), gamma.del(), gamma.del_bar()];
        Ok(Engine { model, config, propagator, green_ops })
    }

    pub fn op_list(&self, internal_edges: usize) -> Option<OperatorTermList> {
        if internal_edges == 0 {
            return None;
        }
        Some(match self.config.flavor {
            Flavor::Omega => expand_omega(internal_edges - 1),
            Flavor::Xi => expand_xi(internal_edges - 1),
        })
    }

    /// The κ_T integral of a decorated tree; decorations are forms indexed by
    /// leg, each with a stated degree (harmonic representatives in the main
    /// path, arbitrary forms in the vanishing oracles).
    pub fn kappa_integral(
        &self,
        tree: &PlaneTree,
        decorations: &[FourierForm],
        perturbation: Option<&FourierForm>,
    ) -> Result<(C64, f64), CorrelatorError> {
        let m = tree.num_legs - 1;
        assert_eq!(decorations.len(), m + 1);
        let n = self.model.torus.n;
        let two_n = 2 * n;

        // extraction sign: sort the odd edge generators to the right of the
        // interleaved sequence G₀E₀…G_{ni−1}E_{ni−1} α₀E^{a₀}…α_mE^{a_m}
        let ni = tree.num_internal_edges();
        let deg_g = (two_n - 2) as i64;
        let deg_a: Vec<i64> =
            decorations.iter().map(|f| f.degree().unwrap_or(0) as i64).collect();
        let sum_a: i64 = deg_a.iter().sum();
        let mut ext = (deg_g * (ni as i64) * (ni as i64 - 1) / 2) + (ni as i64) * sum_a;
        for (l, d) in deg_a.iter().enumerate() {
            ext += l as i64 * d;
        }
        let ext_sign = if ext % 2 == 0 { 1.0 } else { -1.0 };
        let or_sign = tree.orientation_sign as f64;
        // the passes average the coefficient of the global dz-top monomial;
        // each vertex contributes one dz-top → du-top measure conversion
        let measure = self.model.torus.det_factor.powu(tree.vertices.len() as u32);
        let overall = C64::new(ext_sign * or_sign, 0.0) * measure;

        // ω/ξ term list over the internal edges, with the permutation sign
        // precomputed: Green currents all share one odd shifted degree
        let ops = self.op_list(ni);

        let constant_decorations = decorations
            .iter()
            .all(|f| f.terms.keys().all(|(_, mode)| mode.iter().all(|&k| k == 0)));
        let translation_reduce =
            matches!(self.config.mu, MuChoice::Volume) && constant_decorations && ni > 0;

        // integration vertices: all internal vertices, minus the root when
        // translation invariance applies. m = 2 with constant decorations is
        // the bare wedge integral.
        let n_vertices = tree.vertices.len();
        let free: Vec<usize> = if translation_reduce {
            (0..n_vertices - 1).collect()
        } else if ni == 0 && constant_decorations && matches!(self.config.mu, MuChoice::Volume) {
            Vec::new()
        } else {
            (0..n_vertices).collect()
        };

        match &self.config.quadrature {
            Quadrature::Grid { points } => {
                let n_axis = *points;
                let green_tables: [GridTables; 3] = [
                    GridTables::build(&self.op_form(0, perturbation), n_axis),
                    GridTables::build(&self.op_form(1, perturbation), n_axis),
                    GridTables::build(&self.op_form(2, perturbation), n_axis),
                ];
                let deco_tables: Vec<Option<GridTables>> = decorations
                    .iter()
                    .map(|f| {
                        let constant =
                            f.terms.keys().all(|(_, mode)| mode.iter().all(|&k| k == 0));
                        if constant {
                            None
                        } else {
                            Some(GridTables::build(f, n_axis))
                        }
                    })
                    .collect();
                let value = self.grid_pass(
                    tree, decorations, &ops, &free, n_axis, 1, &green_tables, &deco_tables,
                );
                // refinement delta against the stride-2 subgrid
                let coarse = if n_axis % 2 == 0 && !free.is_empty() {
                    self.grid_pass(
                        tree, decorations, &ops, &free, n_axis, 2, &green_tables, &deco_tables,
                    )
                } else {
                    value
                };
                let err = (value - coarse).norm() * overall.norm();
                Ok((overall * value, err))
            }
            Quadrature::MonteCarlo { samples, seed } => {
                // sample on a dealiased lattice so the estimator is unbiased
                // for the exact integral of the band-limited theory
                let deco_band: i32 =
                    decorations.iter().map(|f| f.bandwidth()).max().unwrap_or(0);
                let bound = self.config.truncation * (ni.max(1) as i32) + deco_band + 1;
                let n_axis = (bound.max(8) as u32).next_power_of_two() as usize;
                let green_tables: [GridTables; 3] = [
                    GridTables::build(&self.op_form(0, perturbation), n_axis),
                    GridTables::build(&self.op_form(1, perturbation), n_axis),
                    GridTables::build(&self.op_form(2, perturbation), n_axis),
                ];
                let deco_tables: Vec<Option<GridTables>> = decorations
                    .iter()
                    .map(|f| {
                        let constant =
                            f.terms.keys().all(|(_, mode)| mode.iter().all(|&k| k == 0));
                        if constant {
                            None
                        } else {
                            Some(GridTables::build(f, n_axis))
                        }
                    })
                    .collect();
                let (value, err) = self.mc_pass(
                    tree, decorations, &ops, &free, *samples, *seed, n_axis,
                    &green_tables, &deco_tables,
                )?;
                Ok((overall * value, err * overall.norm()))
            }
        }
    }

    /// Integrand given per-edge component fetchers and per-leg point forms.
    fn assemble_integrand(
        &self,
        tree: &PlaneTree,
        ops: &Option<OperatorTermList>,
        edge_comps: &mut dyn FnMut(usize, usize) -> Vec<(FormMask, C64)>,
        edge_point_comps: &mut dyn FnMut(usize, usize, usize) -> Vec<(FormMask, C64)>,
        deco_pfs: &[PointForm],
        n_slots: usize,
    ) -> C64 {
        let two_n = 2 * self.model.torus.n;
        let full: u64 = if n_slots == 64 { u64::MAX } else { (1u64 << n_slots) - 1 };
        let delta_point = matches!(self.config.mu, MuChoice::DeltaPoint(_));

        let mut total = PointForm { terms: vec![] };
        match ops {
            None => total = PointForm::constant(C64::new(1.0, 0.0)),
            Some(list) => {
                for term in &list.terms {
                    // Green slots share one odd shifted degree: the Koszul
                    // symmetrization sign is the permutation sign
                    let sign = crate::trees::permutation_sign(&term.inputs) as f64;
                    let mut acc = PointForm::constant(term.coeff.to_c64() * C64::new(sign, 0.0));
                    for (&input, &op) in term.inputs.iter().zip(&term.ops) {
                        let opi = match op {
                            SlotOp::Id => 0,
                            SlotOp::Del => 1,
                            SlotOp::DelBar => 2,
                        };
                        let (vu, vw) = tree.internal_edge_ends(input);
                        let comps = edge_comps(input, opi);
                        let mut ef = expand_difference(&comps, vu, vw, two_n);
                        if delta_point {
                            for vert in [vu, vw] {
                                for (mask, c) in edge_point_comps(input, opi, vert) {
                                    for (gm, s) in single_vertex_mask(mask, vert, two_n) {
                                        ef.terms.push((gm, -c * (s as f64)));
                                    }
                                }
                            }
                        }
                        acc = acc.wedge(&ef);
                        if acc.terms.is_empty() {
                            break;
                        }
                    }
                    total.terms.extend(acc.terms);
                }
            }
        }
        let mut acc = total;
        for pf in deco_pfs {
            acc = acc.wedge(pf);
            if acc.terms.is_empty() {
                return C64::zero();
            }
        }
        acc.top_coefficient(full)
    }

    fn op_form(&self, opi: usize, perturbation: Option<&FourierForm>) -> FourierForm {
        match perturbation {
            None => self.green_ops[opi].clone(),
            Some(p) => match opi {
                0 => self.green_ops[0].add(p),
                1 => self.green_ops[1].add(&p.del()),
                _ => self.green_ops[2].add(&p.del_bar()),
            },
        }
    }

    fn grid_pass(
        &self,
        tree: &PlaneTree,
        decorations: &[FourierForm],
        ops: &Option<OperatorTermList>,
        free: &[usize],
        points: usize,
        stride: usize,
        green_tables: &[GridTables; 3],
        deco_tables: &[Option<GridTables>],
    ) -> C64 {
        let dims = self.model.torus.dims();
        let two_n = dims;
        let n_vertices = tree.vertices.len();
        let n_slots = n_vertices * two_n;
        let eff = points / stride;

        // constant decorations have position-independent point forms
        let const_deco: Vec<Option<PointForm>> = decorations
            .iter()
            .enumerate()
            .map(|(leg, f)| {
                if deco_tables[leg].is_some() {
                    return None;
                }
                let v = tree.leg_vertex(leg);
                let comps = eval_form_components(f, &vec![0.0; dims]);
                Some(point_form_at_vertex(&comps, v, two_n))
            })
            .collect();

        if free.is_empty() {
            let mut edge = |e: usize, opi: usize| -> Vec<(FormMask, C64)> {
                let _ = (e, opi);
                green_tables[opi].at(&vec![0; dims])
            };
            let mut edge_pt = |_e: usize, opi: usize, _v: usize| -> Vec<(FormMask, C64)> {
                green_tables[opi].at(&vec![0; dims])
            };
            let pfs: Vec<PointForm> = const_deco
                .iter()
                .enumerate()
                .map(|(leg, c)| match c {
                    Some(pf) => pf.clone(),
                    None => {
                        let v = tree.leg_vertex(leg);
                        let comps = deco_tables[leg].as_ref().unwrap().at(&vec![0; dims]);
                        point_form_at_vertex(&comps, v, two_n)
                    }
                })
                .collect();
            return self.assemble_integrand(tree, ops, &mut edge, &mut edge_pt, &pfs, n_slots);
        }

        let total = (eff as u64).pow((free.len() * dims) as u32);
        let chunk: u64 = 1 << 12;
        let n_chunks = (total + chunk - 1) / chunk;
        let partials: Vec<C64> = (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let mut local = NeumaierSum::new();
                let start = ci * chunk;
                let end = (start + chunk).min(total);
                let mut pos = vec![vec![0usize; dims]; n_vertices];
                let a_index: Option<Vec<usize>> = match &self.config.mu {
                    MuChoice::DeltaPoint(a) => Some(
                        a.iter().map(|x| ((x * points as f64).round() as usize) % points).collect(),
                    ),
                    _ => None,
                };
                for idx in start..end {
                    let mut rest = idx;
                    for &v in free.iter().rev() {
                        for axis in (0..dims).rev() {
                            let p = (rest % eff as u64) as usize;
                            rest /= eff as u64;
                            pos[v][axis] = p * stride;
                        }
                    }
                    let mut edge = |e: usize, opi: usize| -> Vec<(FormMask, C64)> {
                        let (vu, vw) = tree.internal_edge_ends(e);
                        let diff: Vec<usize> = (0..dims)
                            .map(|ax| (pos[vu][ax] + points - pos[vw][ax]) % points)
                            .collect();
                        green_tables[opi].at(&diff)
                    };
                    let mut edge_pt = |_e: usize, opi: usize, v: usize| -> Vec<(FormMask, C64)> {
                        let a = a_index.as_ref().expect("delta point");
                        let diff: Vec<usize> = (0..dims)
                            .map(|ax| (pos[v][ax] + points - a[ax]) % points)
                            .collect();
                        green_tables[opi].at(&diff)
                    };
                    let pfs: Vec<PointForm> = const_deco
                        .iter()
                        .enumerate()
                        .map(|(leg, c)| match c {
                            Some(pf) => pf.clone(),
                            None => {
                                let v = tree.leg_vertex(leg);
                                let comps = deco_tables[leg].as_ref().unwrap().at(&pos[v]);
                                point_form_at_vertex(&comps, v, two_n)
                            }
                        })
                        .collect();
                    local.add(self.assemble_integrand(
                        tree, ops, &mut edge, &mut edge_pt, &pfs, n_slots,
                    ));
                }
                local.value()
            })
            .collect();
        let sum = partials.into_iter().fold(C64::zero(), |a, b| a + b);
        sum / (total as f64)
    }

    #[allow(clippy::too_many_arguments)]
    fn mc_pass(
        &self,
        tree: &PlaneTree,
        decorations: &[FourierForm],
        ops: &Option<OperatorTermList>,
        free: &[usize],
        samples: u64,
        seed: u64,
        n_axis: usize,
        green_tables: &[GridTables; 3],
        deco_tables: &[Option<GridTables>],
    ) -> Result<(C64, f64), CorrelatorError> {
        use rand::{Rng, SeedableRng};
        let dims = self.model.torus.dims();
        let two_n = dims;
        let n_vertices = tree.vertices.len();
        let n_slots = n_vertices * two_n;
        let const_deco: Vec<Option<PointForm>> = decorations
            .iter()
            .enumerate()
            .map(|(leg, f)| {
                if deco_tables[leg].is_some() {
                    return None;
                }
                let v = tree.leg_vertex(leg);
                let comps = eval_form_components(f, &vec![0.0; dims]);
                Some(point_form_at_vertex(&comps, v, two_n))
            })
            .collect();
        if free.is_empty() {
            let mut edge = |_e: usize, opi: usize| -> Vec<(FormMask, C64)> {
                green_tables[opi].at(&vec![0; dims])
            };
            let mut edge_pt = |_e: usize, opi: usize, _v: usize| -> Vec<(FormMask, C64)> {
                green_tables[opi].at(&vec![0; dims])
            };
            let pfs: Vec<PointForm> = const_deco
                .iter()
                .enumerate()
                .map(|(leg, c)| match c {
                    Some(pf) => pf.clone(),
                    None => {
                        let v = tree.leg_vertex(leg);
                        let comps = deco_tables[leg].as_ref().unwrap().at(&vec![0; dims]);
                        point_form_at_vertex(&comps, v, two_n)
                    }
                })
                .collect();
            return Ok((
                self.assemble_integrand(tree, ops, &mut edge, &mut edge_pt, &pfs, n_slots),
                0.0,
            ));
        }
        let a_index: Option<Vec<usize>> = match &self.config.mu {
            MuChoice::DeltaPoint(a) => Some(
                a.iter().map(|x| ((x * n_axis as f64).round() as usize) % n_axis).collect(),
            ),
            _ => None,
        };
        let pairs = (samples / 2).max(1);
        let workers = rayon::current_num_threads().max(1) as u64;
        let per_worker = (pairs + workers - 1) / workers;
        let results: Vec<(C64, f64, u64)> = (0..workers)
            .into_par_iter()
            .map(|w| {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                    seed ^ (w.wrapping_mul(0x9E3779B97F4A7C15)),
                );
                let mut sum = NeumaierSum::new();
                let mut sq = 0.0f64;
                let mut count = 0u64;
                let mut pos = vec![vec![0usize; dims]; n_vertices];
                for _ in 0..per_worker {
                    let draw: Vec<usize> = (0..free.len() * dims)
                        .map(|_| rng.gen_range(0..n_axis))
                        .collect();
                    let mut pair_val = C64::zero();
                    for anti in [false, true] {
                        for (fi, &v) in free.iter().enumerate() {
                            for axis in 0..dims {
                                let x = draw[fi * dims + axis];
                                pos[v][axis] = if anti { (n_axis - x) % n_axis } else { x };
                            }
                        }
                        let mut edge = |e: usize, opi: usize| -> Vec<(FormMask, C64)> {
                            let (vu, vw) = tree.internal_edge_ends(e);
                            let diff: Vec<usize> = (0..dims)
                                .map(|ax| (pos[vu][ax] + n_axis - pos[vw][ax]) % n_axis)
                                .collect();
                            green_tables[opi].at(&diff)
                        };
                        let mut edge_pt =
                            |_e: usize, opi: usize, v: usize| -> Vec<(FormMask, C64)> {
                                let a = a_index.as_ref().expect("delta point");
                                let diff: Vec<usize> = (0..dims)
                                    .map(|ax| (pos[v][ax] + n_axis - a[ax]) % n_axis)
                                    .collect();
                                green_tables[opi].at(&diff)
                            };
                        let pfs: Vec<PointForm> = const_deco
                            .iter()
                            .enumerate()
                            .map(|(leg, c)| match c {
                                Some(pf) => pf.clone(),
                                None => {
                                    let v = tree.leg_vertex(leg);
                                    let comps =
                                        deco_tables[leg].as_ref().unwrap().at(&pos[v]);
                                    point_form_at_vertex(&comps, v, two_n)
                                }
                            })
                            .collect();
                        pair_val += self.assemble_integrand(
                            tree, ops, &mut edge, &mut edge_pt, &pfs, n_slots,
                        );
                    }
                    pair_val /= 2.0;
                    sum.add(pair_val);
                    sq += pair_val.norm_sqr();
                    count += 1;
                }
                (sum.value(), sq, count)
            })
            .collect();
        let mut total = C64::zero();
        let mut sq = 0.0;
        let mut count = 0u64;
        for (s, q, c) in results {
            total += s;
            sq += q;
            count += c;
        }
        let mean = total / (count as f64);
        let var = (sq / count as f64 - mean.norm_sqr()).max(0.0);
        let std_err = (var / count as f64).sqrt();
        Ok((mean, std_err))
    }

    /// Evaluates the raw integrand at explicit vertex positions through the
    /// arbitrary-point path; used by consistency tests against grid tables.
    pub fn integrand_probe(
        &self,
        tree: &PlaneTree,
        decorations: &[FourierForm],
        positions: &[Vec<f64>],
    ) -> C64 {
        let dims = self.model.torus.dims();
        let two_n = dims;
        let n_slots = tree.vertices.len() * two_n;
        let ops = self.op_list(tree.num_internal_edges());
        let forms: [FlatForm; 3] = [
            FlatForm::new(&self.op_form(0, None)),
            FlatForm::new(&self.op_form(1, None)),
            FlatForm::new(&self.op_form(2, None)),
        ];
        let pfs: Vec<PointForm> = decorations
            .iter()
            .enumerate()
            .map(|(leg, f)| {
                let v = tree.leg_vertex(leg);
                point_form_at_vertex(&eval_form_components(f, &positions[v]), v, two_n)
            })
            .collect();
        let a_pt: Option<Vec<f64>> = match &self.config.mu {
            MuChoice::DeltaPoint(a) => Some(a.clone()),
            _ => None,
        };
        let mut edge = |e: usize, opi: usize| -> Vec<(FormMask, C64)> {
            let (vu, vw) = tree.internal_edge_ends(e);
            let diff: Vec<f64> =
                (0..dims).map(|ax| positions[vu][ax] - positions[vw][ax]).collect();
            forms[opi].eval_at(&diff)
        };
        let mut edge_pt = |_e: usize, opi: usize, v: usize| -> Vec<(FormMask, C64)> {
            let a = a_pt.as_ref().expect("delta point");
            let diff: Vec<f64> = (0..dims).map(|ax| positions[v][ax] - a[ax]).collect();
            forms[opi].eval_at(&diff)
        };
        self.assemble_integrand(tree, &ops, &mut edge, &mut edge_pt, &pfs, n_slots)
    }

    /// The Hodge correlator of a cyclic word of reduced-basis indices:
    /// Σ over plane trees of κ_T. Returns the total, the combined error and
    /// the per-tree values.
    pub fn correlator(
        &self,
        letters: &[usize],
    ) -> Result<(C64, f64, Vec<C64>), CorrelatorError> {
        if letters.len() < 3 {
            return Err(CorrelatorError::WordTooShort(letters.len()));
        }
        if !may_contribute(&self.model.algebra, letters) {
            let trees = enumerate_trees(letters.len()).expect("≥3 legs");
            return Ok((C64::zero(), 0.0, vec![C64::zero(); trees.len()]));
        }
        self.correlator_force(letters)
    }

    /// Evaluates the tree-sum integrals without the degree gate.
    pub fn correlator_force(
        &self,
        letters: &[usize],
    ) -> Result<(C64, f64, Vec<C64>), CorrelatorError> {
        let decorations: Vec<FourierForm> =
            letters.iter().map(|&i| self.model.reps[i].clone()).collect();
        let trees = enumerate_trees(letters.len()).expect("≥3 legs");
        let mut per_tree = Vec::with_capacity(trees.len());
        let mut total = C64::zero();
        let mut err = 0.0;
        for tree in &trees {
            let (v, e) = self.kappa_integral(tree, &decorations, None)?;
            per_tree.push(v);
            total += v;
            err += e;
        }
        Ok((total, err, per_tree))
    }

    /// Correlator of a word with a gauge perturbation of the Green current.
    pub fn correlator_perturbed(
        &self,
        letters: &[usize],
        perturbation: &FourierForm,
    ) -> Result<(C64, f64), CorrelatorError> {
        if !may_contribute(&self.model.algebra, letters) {
            return Ok((C64::zero(), 0.0));
        }
        let decorations: Vec<FourierForm> =
            letters.iter().map(|&i| self.model.reps[i].clone()).collect();
        let trees = enumerate_trees(letters.len()).expect("≥3 legs");
        let mut total = C64::zero();
        let mut err = 0.0;
        for tree in &trees {
            let (v, e) = self.kappa_integral(tree, &decorations, Some(perturbation))?;
            total += v;
            err += e;
        }
        Ok((total, err))
    }
}


fn point_form_at_vertex(comps: &[(FormMask, C64)], vertex: usize, two_n: usize) -> PointForm {
    let mut pf = PointForm { terms: Vec::with_capacity(comps.len()) };
    for &(mask, c) in comps {
        for (gm, s) in single_vertex_mask(mask, vertex, two_n) {
            pf.terms.push((gm, c * (s as f64)));
        }
    }
    pf
}

/// Expands the difference pullback of a single-torus mask into global
/// covector slots of two vertices: each symbol becomes v^{(u)} − v^{(w)}.
fn expand_difference(
    components: &[(FormMask, C64)],
    vu: usize,
    vw: usize,
    two_n: usize,
) -> PointForm {
    let mut out = Vec::new();
    for &(mask, c) in components {
        let symbols: Vec<u32> = (0..two_n as u32).filter(|b| mask & (1 << b) != 0).collect();
        for t in 0..(1u32 << symbols.len()) {
            let mut gm: u64 = 0;
            let mut sign = 1i32;
            let mut y_seen = 0;
            for (pos, &b) in symbols.iter().enumerate() {
                if t & (1 << pos) != 0 {
                    gm |= 1u64 << (vw * two_n + b as usize);
                    y_seen += 1;
                    sign = -sign;
                } else {
                    gm |= 1u64 << (vu * two_n + b as usize);
                    if y_seen % 2 == 1 {
                        sign = -sign;
                    }
                }
            }
            // reorder the assembled global mask into canonical slot order
            // is already encoded by the bitmask; the sign above accounts for
            // the (x-symbols, y-symbols) collection, and vu < vw ordering is
            // canonical when vu < vw, otherwise flip by the inversion count
            let s2 = if vu < vw { 1 } else { reorder_two_vertex_sign(mask, t, two_n) };
            out.push((gm, c * C64::new((sign * s2) as f64, 0.0)));
        }
    }
    PointForm { terms: out }
}

/// When the "x" vertex has a higher slot block than the "y" vertex, the
/// collected x-block must move past the y-block: Koszul sign of the swap.
fn reorder_two_vertex_sign(mask: FormMask, t: u32, _two_n: usize) -> i32 {
    let total = mask.count_ones();
    let y_count = t.count_ones();
    let x_count = total - y_count;
    if (x_count * y_count) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Global mask of a single-vertex form component, with the canonical-order
/// sign (none needed: symbols stay in order within one vertex block).
fn single_vertex_mask(
    mask: FormMask,
    vertex: usize,
    two_n: usize,
) -> impl Iterator<Item = (u64, i32)> {
    let gm = (mask as u64) << (vertex * two_n);
    std::iter::once((gm, 1))
}

/// Compensated accumulation so grid sums are reproducible and accurate.
struct NeumaierSum {
    sum_re: f64,
    c_re: f64,
    sum_im: f64,
    c_im: f64,
}

impl NeumaierSum {
    fn new() -> Self {
        NeumaierSum { sum_re: 0.0, c_re: 0.0, sum_im: 0.0, c_im: 0.0 }
    }

    fn add(&mut self, v: C64) {
        let t = self.sum_re + v.re;
        if self.sum_re.abs() >= v.re.abs() {
            self.c_re += (self.sum_re - t) + v.re;
        } else {
            self.c_re += (v.re - t) + self.sum_re;
        }
        self.sum_re = t;
        let t = self.sum_im + v.im;
        if self.sum_im.abs() >= v.im.abs() {
            self.c_im += (self.sum_im - t) + v.im;
        } else {
            self.c_im += (v.im - t) + self.sum_im;
        }
        self.sum_im = t;
    }

    fn value(&self) -> C64 {
        C64::new(self.sum_re + self.c_re, self.sum_im + self.c_im)
    }
}

// ---------------------------------------------------------------------------
// tables and the correlator class

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableEntry {
    pub value: (f64, f64),
    pub abs_error: f64,
    pub per_tree: Vec<(f64, f64)>,
    /// exact zero from the degree/bidegree filter
    pub filtered: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableMeta {
    pub model: String,
    pub lattice: Vec<String>,
    pub mu: MuChoice,
    pub truncation: i32,
    pub quadrature: String,
    pub seed: Option<u64>,
    pub flavor: Flavor,
    pub engine_version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelatorTable {
    /// canonical word (labels joined by commas) -> entry
    pub entries: BTreeMap<String, TableEntry>,
    pub meta: TableMeta,
}

pub fn word_key(alg: &PDAlgebra<Rat>, letters: &[usize]) -> String {
    letters
        .iter()
        .map(|&i| alg.basis[i].label.clone())
        .collect::<Vec<_>>()
        .join(",")
}

impl Engine {
    fn meta(&self) -> TableMeta {
        TableMeta {
            model: self.model.name.clone(),
            lattice: self
                .model
                .torus
                .periods
                .iter()
                .flat_map(|row| row.iter().map(|c| format!("{}+{}i", c.re, c.im)))
                .collect(),
            mu: self.config.mu.clone(),
            truncation: self.config.truncation,
            quadrature: match &self.config.quadrature {
                Quadrature::Grid { points } => format!("grid:{points}"),
                Quadrature::MonteCarlo { samples, .. } => format!("mc:{samples}"),
            },
            seed: match &self.config.quadrature {
                Quadrature::MonteCarlo { seed, .. } => Some(*seed),
                _ => None,
            },
            flavor: self.config.flavor,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Fills the correlator table for every contributing canonical cyclic
    /// word up to the weight cap and assembles the correlator class
    /// **G** = Σ_W Cor(W)/|Aut W| · (dual homology word) ⊗ 𝓗.
    pub fn correlator_class(
        &self,
        weight_cap: usize,
    ) -> Result<(CorrelatorTable, CyclicChain<C64>), CorrelatorError> {
        let alg = &self.model.algebra;
        let hom = Alphabet::reduced(alg, Side::Homology);
        let coh = Alphabet::reduced(alg, Side::Cohomology);
        let mut entries = BTreeMap::new();
        let mut class: CyclicChain<C64> = CyclicChain::zero(true);
        for weight in 3..=weight_cap {
            for word in crate::lie::cyclic_word_basis(&coh, weight) {
                let letters: Vec<usize> =
                    word.iter().map(|&l| coh.algebra_index[l]).collect();
                let key = word_key(alg, &letters);
                if !may_contribute(alg, &letters) {
                    entries.insert(
                        key,
                        TableEntry {
                            value: (0.0, 0.0),
                            abs_error: 0.0,
                            per_tree: Vec::new(),
                            filtered: true,
                        },
                    );
                    continue;
                }
                let (value, err, per_tree) = self.correlator(&letters)?;
                entries.insert(
                    key,
                    TableEntry {
                        value: (value.re, value.im),
                        abs_error: err,
                        per_tree: per_tree.iter().map(|c| (c.re, c.im)).collect(),
                        filtered: false,
                    },
                );
                // attach the dual homology word with the weighted projection
                let aut = crate::cyclic::aut_order(&word, &coh.degs) as i64;
                let coeff = value * C64::new(1.0, 0.0) / (aut as f64);
                // homology letters share the alphabet indexing
                class.add_word(&word, coeff, &hom.degs);
            }
        }
        Ok((CorrelatorTable { entries, meta: self.meta() }, class))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::random_form;
    use rand::SeedableRng;

    fn tau1() -> C64 {
        C64::new(0.13, 1.12)
    }

    fn tau2() -> C64 {
        C64::new(-0.21, 0.87)
    }

    #[test]
    fn harmonic_reps_match_trace_tables() {
        let m = elliptic_harmonic_model(tau1());
        assert!(m.trace_consistency_defect() < 1e-13);
        let s = surface_harmonic_model(tau1(), tau2());
        assert!(s.trace_consistency_defect() < 1e-13);
    }

    #[test]
    fn degree_filter_examples() {
        let e = elliptic_model();
        let dz = e.index_of("dz").unwrap();
        let dzbar = e.index_of("dzbar").unwrap();
        // C(dz, dzbar, dz, dzbar): passes both gates
        assert!(may_contribute(&e, &[dz, dzbar, dz, dzbar]));
        // C(dz, dzbar, dz): three letters on a curve need Σdeg = 2: fails
        assert!(!may_contribute(&e, &[dz, dzbar, dz]));
        // bidegree gate: C(dz,dz,dz,dzbar) has q−n = 0
        assert!(!may_contribute(&e, &[dz, dz, dz, dzbar]));
        // surface: triple with Σ deg = 4 passes
        let s = abelian_surface_model();
        let a = s.index_of("dz1").unwrap();
        let b = s.index_of("dzbar1").unwrap();
        let c = s.index_of("dz2.dzbar2").unwrap();
        assert!(may_contribute(&s, &[a, b, c]));
    }

    #[test]
    fn three_leg_correlator_is_wedge_integral_with_hcc_sign() {
        let model = surface_harmonic_model(tau1(), tau2());
        let engine = Engine::new(model, EngineConfig::grid(8, 4)).unwrap();
        let alg = &engine.model.algebra;
        // pick several contributing triples and compare with
        // ±(−1)^{deg α₁} ∫ α₀∧α₁∧α₂
        let red = alg.reduced_basis().to_vec();
        let mut checked = 0;
        for &i in &red {
            for &j in &red {
                for &k in &red {
                    if !may_contribute(alg, &[i, j, k]) {
                        continue;
                    }
                    let (v, _, per_tree) = engine.correlator(&[i, j, k]).unwrap();
                    assert_eq!(per_tree.len(), 1);
                    let wedge = engine.model.reps[i]
                        .wedge(&engine.model.reps[j])
                        .unwrap()
                        .wedge(&engine.model.reps[k])
                        .unwrap();
                    let direct = wedge.integrate().unwrap();
                    let sign = if alg.basis[j].deg() % 2 == 0 { 1.0 } else { -1.0 };
                    let expect = direct * sign;
                    assert!(
                        (v - expect).norm() < 1e-10,
                        "triple ({i},{j},{k}): {v} vs {expect}"
                    );
                    if !v.is_zero() {
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 0, "no nonzero triples exercised");
    }

    #[test]
    fn four_letter_elliptic_correlators_vanish_in_volume_gauge() {
        let model = elliptic_harmonic_model(tau1());
        let engine = Engine::new(model, EngineConfig::grid(16, 6)).unwrap();
        let alg = &engine.model.algebra;
        let dz = alg.index_of("dz").unwrap();
        let dzbar = alg.index_of("dzbar").unwrap();
        for word in [vec![dz, dzbar, dz, dzbar], vec![dz, dz, dzbar, dzbar]] {
            let (v, err, _) = engine.correlator(&word).unwrap();
            assert!(v.norm() < 1e-10 + err, "weight-4 value {v}");
        }
    }

    #[test]
    fn weight_five_elliptic_vanishes_in_both_gauges_and_grid_converges() {
        // on a torus every internal-tree leaf vertex integrates a single
        // Green factor against constants, so all higher correlators vanish;
        // the shuffle relations force the same conclusion (𝒞Lie₅ = 0 here)
        let model = elliptic_harmonic_model(tau1());
        let engine = Engine::new(model.clone(), EngineConfig::grid(16, 5)).unwrap();
        let alg = &engine.model.algebra;
        let dz = alg.index_of("dz").unwrap();
        let dzbar = alg.index_of("dzbar").unwrap();
        let word = vec![dz, dz, dzbar, dz, dzbar];
        assert!(may_contribute(alg, &word));
        let (v1, e1, _) = engine.correlator(&word).unwrap();
        assert!(v1.norm() < 1e-10 + e1, "volume-gauge weight-5 value {v1}");
        let engine2 = Engine::new(model.clone(), EngineConfig::grid(32, 5)).unwrap();
        let (v2, _, _) = engine2.correlator(&word).unwrap();
        assert!((v1 - v2).norm() <= e1.max(1e-9), "self-convergence: {v1} vs {v2}");
        // base-point gauge on an exact dealiased grid
        let cfg = EngineConfig {
            flavor: Flavor::Omega,
            truncation: 3,
            mu: MuChoice::DeltaPoint(vec![0.25, 0.375]),
            quadrature: Quadrature::Grid { points: 8 },
        };
        let engine3 = Engine::new(model, cfg).unwrap();
        let (v3, e3, _) = engine3.correlator(&word).unwrap();
        assert!(v3.norm() < 1e-12 + e3, "base-point weight-5 value {v3}");
    }

    #[test]
    fn rotated_words_share_the_stored_value() {
        let model = elliptic_harmonic_model(tau1());
        let engine = Engine::new(model, EngineConfig::grid(12, 5)).unwrap();
        let alg = &engine.model.algebra;
        let dz = alg.index_of("dz").unwrap();
        let dzbar = alg.index_of("dzbar").unwrap();
        // the engine canonicalizes; check the raw tree-sum is rotation
        // invariant (graded-cyclic invariance of κ̃)
        let w1 = vec![dz, dz, dzbar, dz, dzbar];
        let w2 = vec![dz, dzbar, dz, dz, dzbar]; // one rotation
        let (v1, e1, _) = engine.correlator_force(&w1).unwrap();
        let (v2, e2, _) = engine.correlator_force(&w2).unwrap();
        assert!((v1 - v2).norm() < 1e-9 + e1 + e2, "{v1} vs {v2}");
    }

    #[test]
    fn shuffle_residuals_weight_four_elliptic() {
        let model = elliptic_harmonic_model(tau1());
        let engine = Engine::new(model, EngineConfig::grid(16, 6)).unwrap();
        let alg = engine.model.algebra.clone();
        let coh = Alphabet::reduced(&alg, Side::Cohomology);
        // Σ over (1,2)-shuffles of Cor with Koszul signs
        let chain: CyclicChain<Rat> =
            crate::cyclic::shuffle_generators(0, &[1], &[0, 1], &coh.degs);
        let mut acc = C64::zero();
        let mut err = 0.0;
        for (word, coeff) in &chain.terms {
            let letters: Vec<usize> = word.iter().map(|&l| coh.algebra_index[l]).collect();
            let (v, e, _) = engine.correlator(&letters).unwrap();
            acc += v * coeff.to_c64();
            err += e;
        }
        assert!(acc.norm() < 1e-6 + err, "shuffle residual {acc}");
    }

    #[test]
    fn eta_collapse_vanishing_oracle() {
        // 4-leg configuration, one leg decorated by d^Cβ, others harmonic
        // and d^C-closed: the tree sum vanishes
        let model = elliptic_harmonic_model(tau1());
        let engine = Engine::new(model, EngineConfig::grid(24, 6)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let beta = random_form(&engine.model.torus, &[0b00], 2, &mut rng);
        let reps = &engine.model.reps;
        let alg = &engine.model.algebra;
        let dz = alg.index_of("dz").unwrap();
        let dzbar = alg.index_of("dzbar").unwrap();
        let decorations =
            vec![beta.dc(), reps[dz].clone(), reps[dzbar].clone(), reps[dzbar].clone()];
        let trees = enumerate_trees(4).unwrap();
        let mut acc = C64::zero();
        let mut err = 0.0;
        for tree in &trees {
            let (v, e) = engine.kappa_integral(tree, &decorations, None).unwrap();
            acc += v;
            err += e;
        }
        assert!(acc.norm() < 1e-8 + err, "η-collapse residual {acc}");
    }

    #[test]
    fn class_assembly_elliptic() {
        let model = elliptic_harmonic_model(tau1());
        let engine = Engine::new(model, EngineConfig::grid(12, 5)).unwrap();
        let (table, class) = engine.correlator_class(4).unwrap();
        // all weight-3 words filtered, weight-4 near zero
        for (key, entry) in &table.entries {
            if key.split(',').count() == 3 {
                assert!(entry.filtered, "weight-3 {key} not filtered");
            }
        }
        let norm: f64 = class.terms.values().map(|c| c.norm()).sum();
        assert!(norm < 1e-8, "elliptic class through weight 4 should be ~0");
    }
}
