//! Finite-dimensional models of the cohomology of a compact Kähler manifold:
//! graded commutative algebra with unit, trace on the top degree, Hodge
//! bigrading, Poincaré pairing, dual bases and functoriality maps.

use crate::linalg::Mat;
use crate::scalar::{parse_gauss, parse_rat, rat_to_string, Rat, Scalar};
use num::Zero;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisClass {
    pub label: String,
    pub p: usize,
    pub q: usize,
}

impl BasisClass {
    pub fn deg(&self) -> usize {
        self.p + self.q
    }
    /// Degree in the shifted cohomology H̄*[1].
    pub fn shifted_form_deg(&self) -> i64 {
        self.deg() as i64 - 1
    }
    /// Degree in the shifted homology H̄_*[-1]; the pair (form, dual class) is even.
    pub fn shifted_hom_deg(&self) -> i64 {
        1 - self.deg() as i64
    }
}

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("algebra has no unit basis class")]
    MissingUnit,
    #[error("graded commutativity fails on ({0}, {1})")]
    NotCommutative(String, String),
    #[error("associativity fails on ({0}, {1}, {2})")]
    NotAssociative(String, String, String),
    #[error("trace pairing is singular")]
    SingularPairing,
    #[error("trace is nonzero outside the top degree on {0}")]
    BadTrace(String),
    #[error("morphism is not a unital ring map")]
    NotRingMap,
    #[error("bigrading out of range for {0}")]
    BadBigrading(String),
    #[error("dimension mismatch in morphism")]
    DimensionMismatch,
    #[error("model load error: {0}")]
    Load(String),
}

/// Graded commutative algebra with Poincaré duality, over an exact field.
#[derive(Clone, Debug)]
pub struct PDAlgebra<S> {
    pub n: usize,
    pub basis: Vec<BasisClass>,
    /// mult[i][j] = sparse expansion of basis[i]·basis[j].
    pub mult: Vec<Vec<Vec<(usize, S)>>>,
    /// trace of each basis class (nonzero only in degree 2n).
    pub trace: Vec<S>,
    /// complex conjugation on basis indices, when the model carries one.
    pub conj: Option<Vec<usize>>,
    unit: usize,
    labels: HashMap<String, usize>,
    /// inverse of the full trace-pairing matrix P[i][j] = trace(b_i · b_j).
    pairing_inv: Mat<S>,
    reduced: Vec<usize>,
}

impl<S: Scalar> PDAlgebra<S> {
    pub fn new(
        n: usize,
        basis: Vec<BasisClass>,
        mult: Vec<Vec<Vec<(usize, S)>>>,
        trace: Vec<S>,
        conj: Option<Vec<usize>>,
    ) -> Result<Self, AlgebraError> {
        let dim = basis.len();
        assert_eq!(mult.len(), dim);
        assert_eq!(trace.len(), dim);
        let labels: HashMap<String, usize> =
            basis.iter().enumerate().map(|(i, b)| (b.label.clone(), i)).collect();

        for b in &basis {
            if b.p > n || b.q > n {
                return Err(AlgebraError::BadBigrading(b.label.clone()));
            }
        }
        let unit = basis
            .iter()
            .position(|b| b.deg() == 0)
            .ok_or(AlgebraError::MissingUnit)?;

        let mut alg = PDAlgebra {
            n,
            basis,
            mult,
            trace,
            conj,
            unit,
            labels,
            pairing_inv: Mat::zeros(0, 0),
            reduced: Vec::new(),
        };

        // unit acts as identity
        for j in 0..dim {
            let prod = normalize(&alg.mult[alg.unit][j]);
            if prod != vec![(j, S::one())] {
                return Err(AlgebraError::MissingUnit);
            }
        }
        // trace is supported on the top degree only
        for (k, t) in alg.trace.iter().enumerate() {
            if !t.is_zero() && alg.basis[k].deg() != 2 * n {
                return Err(AlgebraError::BadTrace(alg.basis[k].label.clone()));
            }
        }
        // graded commutativity
        for i in 0..dim {
            for j in 0..dim {
                let mut ji = alg.mul_sparse(&[(j, S::one())], &[(i, S::one())]);
                let sign = if alg.basis[i].deg() % 2 == 1 && alg.basis[j].deg() % 2 == 1 {
                    S::zero() - S::one()
                } else {
                    S::one()
                };
                for t in ji.iter_mut() {
                    t.1 = t.1.clone() * sign.clone();
                }
                if normalize(&ji) != normalize(&alg.mult[i][j]) {
                    return Err(AlgebraError::NotCommutative(
                        alg.basis[i].label.clone(),
                        alg.basis[j].label.clone(),
                    ));
                }
            }
        }
        // associativity
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let ij_k = alg.mul_sparse(&alg.mult[i][j].clone(), &[(k, S::one())]);
                    let i_jk = alg.mul_sparse(&[(i, S::one())], &alg.mult[j][k].clone());
                    if normalize(&ij_k) != normalize(&i_jk) {
                        return Err(AlgebraError::NotAssociative(
                            alg.basis[i].label.clone(),
                            alg.basis[j].label.clone(),
                            alg.basis[k].label.clone(),
                        ));
                    }
                }
            }
        }
        // nondegenerate trace pairing; degenerate models are rejected at load time
        let mut pairing = Mat::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                pairing[(i, j)] = alg.trace_of(&alg.mult[i][j].clone());
            }
        }
        alg.pairing_inv = pairing.inverse().ok_or(AlgebraError::SingularPairing)?;
        alg.reduced = (0..dim)
            .filter(|&i| alg.basis[i].deg() > 0 && alg.basis[i].deg() < 2 * n)
            .collect();
        Ok(alg)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn unit(&self) -> usize {
        self.unit
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.get(label).copied()
    }

    /// Indices of the classes with 0 < deg < 2n.
    pub fn reduced_basis(&self) -> &[usize] {
        &self.reduced
    }

    pub fn mul_sparse(&self, a: &[(usize, S)], b: &[(usize, S)]) -> Vec<(usize, S)> {
        let mut acc: HashMap<usize, S> = HashMap::new();
        for (i, ca) in a {
            for (j, cb) in b {
                for (k, c) in &self.mult[*i][*j] {
                    let e = acc.entry(*k).or_insert_with(S::zero);
                    *e = e.clone() + ca.clone() * cb.clone() * c.clone();
                }
            }
        }
        let mut out: Vec<(usize, S)> =
            acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        out.sort_by_key(|t| t.0);
        out
    }

    pub fn trace_of(&self, x: &[(usize, S)]) -> S {
        x.iter().fold(S::zero(), |acc, (k, c)| acc + self.trace[*k].clone() * c.clone())
    }

    /// trace(b_i · b_j · b_k), the triple product trace.
    pub fn triple_trace(&self, i: usize, j: usize, k: usize) -> S {
        let ij = self.mult[i][j].clone();
        self.trace_of(&self.mul_sparse(&ij, &[(k, S::one())]))
    }

    /// Dual basis {b_i^∨} with trace(b_i · b_j^∨) = δ_ij, by exact inversion.
    /// Entry j is the coefficient vector of b_j^∨ in the basis.
    pub fn dual_basis(&self) -> Vec<Vec<S>> {
        let dim = self.dim();
        // trace(b_i · Σ_k c_k b_k) = δ_ij  ⇒  P·c = e_j  ⇒  c = column j of P⁻¹
        (0..dim)
            .map(|j| (0..dim).map(|k| self.pairing_inv[(k, j)].clone()).collect())
            .collect()
    }

    /// Poincaré dual of the homology class dual to basis element j:
    /// the cohomology class γ with trace(γ · b_l) = δ_jl.
    pub fn poincare_dual_row(&self, j: usize) -> Vec<S> {
        // trace(γ·b_l) = Σ_k c_k P[k][l] = δ_jl  ⇒  c = row j of P⁻¹
        (0..self.dim()).map(|k| self.pairing_inv[(j, k)].clone()).collect()
    }

    /// ⟨h̄_a ∩ 𝓗 ∩ h̄_b⟩ on shifted homology classes indexed by the basis.
    /// Zero whenever deg a + deg b ≠ 2n (graded mismatch), by convention.
    pub fn symplectic_pairing(&self, a: usize, b: usize) -> S {
        if self.basis[a].deg() + self.basis[b].deg() != 2 * self.n {
            return S::zero();
        }
        let v = self.poincare_dual_row(b);
        let value = v[a].clone();
        if self.basis[a].deg() % 2 == 1 {
            S::zero() - value
        } else {
            value
        }
    }

    /// The symplectic pairing restricted to reduced-basis indices, as a matrix
    /// in the order of `reduced_basis()`.
    pub fn symplectic_matrix(&self) -> Mat<S> {
        let r = self.reduced.len();
        let mut m = Mat::zeros(r, r);
        for (ia, &a) in self.reduced.iter().enumerate() {
            for (ib, &b) in self.reduced.iter().enumerate() {
                m[(ia, ib)] = self.symplectic_pairing(a, b);
            }
        }
        m
    }
}

fn normalize<S: Scalar>(x: &[(usize, S)]) -> Vec<(usize, S)> {
    let mut v: Vec<(usize, S)> = x.iter().filter(|t| !t.1.is_zero()).cloned().collect();
    v.sort_by_key(|t| t.0);
    v
}

// ---------------------------------------------------------------------------
// morphisms and the four functoriality maps

/// A ring map on cohomology models, stored as the pullback matrix:
/// f*(target-basis j) = Σ_i matrix[i][j] · source-basis i, for f: X → Y
/// with `source` modeling H*(X) and `target` modeling H*(Y).
#[derive(Clone, Debug)]
pub struct AlgebraMorphism<S> {
    pub source: PDAlgebra<S>,
    pub target: PDAlgebra<S>,
    pub pullback: Mat<S>,
}

/// The induced maps: pushforward on homology, Gysin f^! on homology,
/// and f_! on cohomology (the dual of f^!).
pub struct FunctorMaps<S> {
    /// f_* : H_*(X) → H_*(Y), matrix on dual bases.
    pub pushforward: Mat<S>,
    /// f^! : H_*(Y) → H_*(X).
    pub gysin: Mat<S>,
    /// f_! : H^*(X) → H^*(Y).
    pub shriek: Mat<S>,
}

impl<S: Scalar> AlgebraMorphism<S> {
    pub fn new(
        source: PDAlgebra<S>,
        target: PDAlgebra<S>,
        pullback: Mat<S>,
    ) -> Result<Self, AlgebraError> {
        if pullback.rows != source.dim() || pullback.cols != target.dim() {
            return Err(AlgebraError::DimensionMismatch);
        }
        let f = AlgebraMorphism { source, target, pullback };
        // unital ring map: f*(1) = 1 and f*(a·b) = f*(a)·f*(b)
        let unit_col = f.pull_class(&[(f.target.unit(), S::one())]);
        if normalize(&unit_col) != vec![(f.source.unit(), S::one())] {
            return Err(AlgebraError::NotRingMap);
        }
        for i in 0..f.target.dim() {
            for j in 0..f.target.dim() {
                let lhs = f.pull_class(&f.target.mult[i][j].clone());
                let rhs = f.source.mul_sparse(
                    &f.pull_class(&[(i, S::one())]),
                    &f.pull_class(&[(j, S::one())]),
                );
                if normalize(&lhs) != normalize(&rhs) {
                    return Err(AlgebraError::NotRingMap);
                }
            }
        }
        Ok(f)
    }

    pub fn pull_class(&self, c: &[(usize, S)]) -> Vec<(usize, S)> {
        let mut acc = vec![S::zero(); self.source.dim()];
        for (j, coeff) in c {
            for i in 0..self.source.dim() {
                let m = self.pullback[(i, *j)].clone();
                if !m.is_zero() {
                    acc[i] = acc[i].clone() + m * coeff.clone();
                }
            }
        }
        acc.into_iter().enumerate().filter(|(_, c)| !c.is_zero()).collect()
    }

    /// f_* dual to f*, f^! by Poincaré duality (f^!c ∩ H_X := f*(c ∩ H_Y)),
    /// f_! dual to f^!.
    pub fn functor_maps(&self) -> FunctorMaps<S> {
        let pushforward = self.pullback.transpose();

        // f^!(c_j) = PD_X⁻¹ ( f*( PD_Y(c_j) ) )
        let dim_y = self.target.dim();
        let dim_x = self.source.dim();
        let mut gysin = Mat::zeros(dim_x, dim_y);
        // PD_X as a matrix: homology class e_j ↦ row j of P_X⁻¹; invertible.
        let mut pd_x = Mat::zeros(dim_x, dim_x);
        for j in 0..dim_x {
            let row = self.source.poincare_dual_row(j);
            for k in 0..dim_x {
                pd_x[(k, j)] = row[k].clone();
            }
        }
        let pd_x_inv = pd_x.inverse().expect("nondegenerate pairing");
        for j in 0..dim_y {
            let pd_y = self.target.poincare_dual_row(j);
            let pulled = self.pull_class(
                &pd_y.iter().cloned().enumerate().filter(|(_, c)| !c.is_zero()).collect::<Vec<_>>(),
            );
            let mut dense = vec![S::zero(); dim_x];
            for (i, c) in pulled {
                dense[i] = c;
            }
            let h = pd_x_inv.mul_vec(&dense);
            for i in 0..dim_x {
                gysin[(i, j)] = h[i].clone();
            }
        }
        let shriek = gysin.transpose();
        FunctorMaps { pushforward, gysin, shriek }
    }
}

// ---------------------------------------------------------------------------
// shipped models

/// Exterior algebra Λ(e_1..e_k) on degree-1 generators with bigradings and a
/// normalized trace on the top class e_1∧…∧e_k. Basis classes are the subsets,
/// labeled by generator labels joined with '.'.
pub fn exterior_model(
    n: usize,
    gen_labels: &[&str],
    gen_types: &[(usize, usize)],
) -> PDAlgebra<Rat> {
    let k = gen_labels.len();
    assert_eq!(gen_types.len(), k);
    let dim = 1usize << k;
    let label_of = |mask: usize| -> String {
        if mask == 0 {
            return "1".to_string();
        }
        (0..k)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| gen_labels[b])
            .collect::<Vec<_>>()
            .join(".")
    };
    let basis: Vec<BasisClass> = (0..dim)
        .map(|mask| {
            let (mut p, mut q) = (0, 0);
            for b in 0..k {
                if mask & (1 << b) != 0 {
                    p += gen_types[b].0;
                    q += gen_types[b].1;
                }
            }
            BasisClass { label: label_of(mask), p, q }
        })
        .collect();
    let mut mult = vec![vec![Vec::new(); dim]; dim];
    for a in 0..dim {
        for b in 0..dim {
            if a & b != 0 {
                continue;
            }
            // sign of interleaving the two subsets
            let mut sign = 0usize;
            for bit_b in 0..k {
                if b & (1 << bit_b) != 0 {
                    sign += ((a >> (bit_b + 1)) as usize).count_ones() as usize;
                }
            }
            let c = if sign % 2 == 0 { Rat::from_i64(1) } else { Rat::from_i64(-1) };
            mult[a][b].push((a | b, c));
        }
    }
    let mut trace = vec![Rat::from_i64(0); dim];
    trace[dim - 1] = Rat::from_i64(1);
    // conjugation: swap each (1,0) generator with its (0,1) partner when the
    // generators come in dz/dzbar pairs (pattern: consecutive pairs)
    let conj = if k % 2 == 0
        && (0..k / 2).all(|i| gen_types[2 * i] == (1, 0) && gen_types[2 * i + 1] == (0, 1))
    {
        let gen_conj: Vec<usize> = (0..k).map(|b| b ^ 1).collect();
        Some(
            (0..dim)
                .map(|mask| {
                    let mut out = 0usize;
                    for b in 0..k {
                        if mask & (1 << b) != 0 {
                            out |= 1 << gen_conj[b];
                        }
                    }
                    out
                })
                .collect(),
        )
    } else {
        None
    };
    PDAlgebra::new(n, basis, mult, trace, conj).expect("exterior model is valid")
}

/// H*(E) for an elliptic curve: Λ(dz, dzbar), trace(dz∧dzbar) = 1.
pub fn elliptic_model() -> PDAlgebra<Rat> {
    exterior_model(1, &["dz", "dzbar"], &[(1, 0), (0, 1)])
}

/// H¹ of a genus-g surface with symplectic basis (q_i, p_i):
/// Λ(q_1, p_1, …, q_g, p_g) would have the wrong H², so the model keeps only
/// degrees 0,1,2 with q_i∧p_i = top and q_i∧q_j etc. expressed in the top class.
pub fn genus_model(g: usize) -> PDAlgebra<Rat> {
    let n = 1usize;
    let mut basis = vec![BasisClass { label: "1".into(), p: 0, q: 0 }];
    for i in 1..=g {
        basis.push(BasisClass { label: format!("q{i}"), p: 1, q: 0 });
        basis.push(BasisClass { label: format!("p{i}"), p: 0, q: 1 });
    }
    basis.push(BasisClass { label: "vol".into(), p: 1, q: 1 });
    let dim = basis.len();
    let top = dim - 1;
    let mut mult = vec![vec![Vec::new(); dim]; dim];
    for j in 0..dim {
        mult[0][j].push((j, Rat::from_i64(1)));
        if j != 0 {
            mult[j][0].push((j, Rat::from_i64(1)));
        }
    }
    // intersection form: q_i · p_i = vol = -p_i · q_i, all else zero in deg 2
    for i in 0..g {
        let qi = 1 + 2 * i;
        let pi = 2 + 2 * i;
        mult[qi][pi].push((top, Rat::from_i64(1)));
        mult[pi][qi].push((top, Rat::from_i64(-1)));
    }
    let mut trace = vec![Rat::from_i64(0); dim];
    trace[top] = Rat::from_i64(1);
    PDAlgebra::new(n, basis, mult, trace, None).expect("genus model is valid")
}

/// H*(Pⁿ) = Q[h]/(h^{n+1}), trace(hⁿ) = 1.
pub fn projective_model(n: usize) -> PDAlgebra<Rat> {
    let dim = n + 1;
    let basis: Vec<BasisClass> = (0..dim)
        .map(|i| BasisClass {
            label: if i == 0 { "1".into() } else if i == 1 { "h".into() } else { format!("h{i}") },
            p: i,
            q: i,
        })
        .collect();
    let mut mult = vec![vec![Vec::new(); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            if i + j < dim {
                mult[i][j].push((i + j, Rat::from_i64(1)));
            }
        }
    }
    let mut trace = vec![Rat::from_i64(0); dim];
    trace[n] = Rat::from_i64(1);
    PDAlgebra::new(n, basis, mult, trace, None).expect("projective model is valid")
}

/// H*(E×E): Λ(dz1, dzbar1, dz2, dzbar2).
pub fn abelian_surface_model() -> PDAlgebra<Rat> {
    exterior_model(2, &["dz1", "dzbar1", "dz2", "dzbar2"], &[(1, 0), (0, 1), (1, 0), (0, 1)])
}

/// Pullback of the diagonal embedding E → E×E on the shipped models.
pub fn diagonal_morphism() -> AlgebraMorphism<Rat> {
    let e = elliptic_model();
    let ee = abelian_surface_model();
    let mut m = Mat::zeros(e.dim(), ee.dim());
    // generators pull back: dz1,dz2 ↦ dz; dzbar1,dzbar2 ↦ dzbar; extend multiplicatively
    let gen_image = |lab: &str| -> Vec<(usize, Rat)> {
        match lab {
            "1" => vec![(e.index_of("1").unwrap(), Rat::from_i64(1))],
            "dz1" | "dz2" => vec![(e.index_of("dz").unwrap(), Rat::from_i64(1))],
            "dzbar1" | "dzbar2" => vec![(e.index_of("dzbar").unwrap(), Rat::from_i64(1))],
            _ => unreachable!(),
        }
    };
    for (j, b) in ee.basis.iter().enumerate() {
        let mut acc = vec![(e.index_of("1").unwrap(), Rat::from_i64(1))];
        if b.label != "1" {
            for part in b.label.split('.') {
                acc = e.mul_sparse(&acc, &gen_image(part));
            }
        }
        for (i, c) in acc {
            m[(i, j)] = c;
        }
    }
    AlgebraMorphism::new(e, ee, m).expect("diagonal is a ring map")
}

/// Pullback of the first-factor projection E×E → E.
pub fn projection_morphism() -> AlgebraMorphism<Rat> {
    let e = elliptic_model();
    let ee = abelian_surface_model();
    let mut m = Mat::zeros(ee.dim(), e.dim());
    for (j, b) in e.basis.iter().enumerate() {
        let lab = match b.label.as_str() {
            "1" => "1".to_string(),
            "dz" => "dz1".to_string(),
            "dzbar" => "dzbar1".to_string(),
            "dz.dzbar" => "dz1.dzbar1".to_string(),
            other => other.to_string(),
        };
        m[(ee.index_of(&lab).unwrap(), j)] = Rat::from_i64(1);
    }
    AlgebraMorphism::new(ee, e, m).expect("projection is a ring map")
}

pub fn identity_morphism<S: Scalar>(a: &PDAlgebra<S>) -> AlgebraMorphism<S> {
    AlgebraMorphism::new(a.clone(), a.clone(), Mat::identity(a.dim()))
        .expect("identity is a ring map")
}

// ---------------------------------------------------------------------------
// model files

#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    basis: Vec<BasisClass>,
    /// entries [i, j, [[k, "num/den"], ...]]
    mult: Vec<(usize, usize, Vec<(usize, String)>)>,
    trace: Vec<(usize, String)>,
    #[serde(default)]
    conj: Option<Vec<usize>>,
    #[serde(default)]
    gaussian: bool,
}

pub fn load_model_rat(json: &str) -> Result<PDAlgebra<Rat>, AlgebraError> {
    let mf: ModelFile =
        serde_json::from_str(json).map_err(|e| AlgebraError::Load(e.to_string()))?;
    if mf.gaussian {
        return Err(AlgebraError::Load(
            "model declares gaussian scalars; load it with load_model_gauss".into(),
        ));
    }
    let dim = mf.basis.len();
    let mut mult = vec![vec![Vec::new(); dim]; dim];
    for (i, j, terms) in mf.mult {
        let parsed: Result<Vec<(usize, Rat)>, String> =
            terms.into_iter().map(|(k, s)| parse_rat(&s).map(|c| (k, c))).collect();
        mult[i][j] = parsed.map_err(AlgebraError::Load)?;
    }
    let mut trace = vec![Rat::from_i64(0); dim];
    for (k, s) in mf.trace {
        trace[k] = parse_rat(&s).map_err(AlgebraError::Load)?;
    }
    PDAlgebra::new(mf.n, mf.basis, mult, trace, mf.conj)
}

pub fn load_model_gauss(json: &str) -> Result<PDAlgebra<crate::scalar::GaussRat>, AlgebraError> {
    let mf: ModelFile =
        serde_json::from_str(json).map_err(|e| AlgebraError::Load(e.to_string()))?;
    let dim = mf.basis.len();
    let mut mult = vec![vec![Vec::new(); dim]; dim];
    for (i, j, terms) in mf.mult {
        let parsed: Result<Vec<(usize, crate::scalar::GaussRat)>, String> =
            terms.into_iter().map(|(k, s)| parse_gauss(&s).map(|c| (k, c))).collect();
        mult[i][j] = parsed.map_err(AlgebraError::Load)?;
    }
    let mut trace = vec![crate::scalar::GaussRat::from_i64(0); dim];
    for (k, s) in mf.trace {
        trace[k] = parse_gauss(&s).map_err(AlgebraError::Load)?;
    }
    PDAlgebra::new(mf.n, mf.basis, mult, trace, mf.conj)
}

pub fn save_model(a: &PDAlgebra<Rat>) -> String {
    let mut mult = Vec::new();
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            if !a.mult[i][j].is_empty() {
                mult.push((
                    i,
                    j,
                    a.mult[i][j].iter().map(|(k, c)| (*k, rat_to_string(c))).collect(),
                ));
            }
        }
    }
    let trace = a
        .trace
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(k, c)| (k, rat_to_string(c)))
        .collect();
    let mf = ModelFile {
        n: a.n,
        basis: a.basis.clone(),
        mult,
        trace,
        conj: a.conj.clone(),
        gaussian: false,
    };
    serde_json::to_string_pretty(&mf).expect("model serializes")
}

/// Looks up a shipped model by name.
pub fn model_by_name(name: &str) -> Option<PDAlgebra<Rat>> {
    match name {
        "elliptic" => Some(elliptic_model()),
        "genus2" => Some(genus_model(2)),
        "ab-surface" | "surface" => Some(abelian_surface_model()),
        "p1" => Some(projective_model(1)),
        "p2" => Some(projective_model(2)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elliptic_reduced_basis() {
        let e = elliptic_model();
        let red: Vec<&str> =
            e.reduced_basis().iter().map(|&i| e.basis[i].label.as_str()).collect();
        assert_eq!(red, vec!["dz", "dzbar"]);
    }

    #[test]
    fn p1_reduced_basis_is_empty() {
        let p = projective_model(1);
        assert!(p.reduced_basis().is_empty());
    }

    #[test]
    fn surface_reduced_basis_has_14_classes() {
        let s = abelian_surface_model();
        assert_eq!(s.reduced_basis().len(), 14);
        let count_deg =
            |d: usize| s.reduced_basis().iter().filter(|&&i| s.basis[i].deg() == d).count();
        assert_eq!((count_deg(1), count_deg(2), count_deg(3)), (4, 6, 4));
    }

    #[test]
    fn elliptic_dual_basis() {
        let e = elliptic_model();
        let dual = e.dual_basis();
        let dz = e.index_of("dz").unwrap();
        let dzbar = e.index_of("dzbar").unwrap();
        // dz^∨ = dzbar, dzbar^∨ = -dz
        assert_eq!(dual[dz][dzbar], Rat::from_i64(1));
        assert_eq!(dual[dzbar][dz], Rat::from_i64(-1));
        // unit^∨ = vol
        let unit = e.index_of("1").unwrap();
        let vol = e.index_of("dz.dzbar").unwrap();
        assert_eq!(dual[unit][vol], Rat::from_i64(1));
        // double dual picks up (-1)^deg
        for i in 0..e.dim() {
            let v = e.dual_basis();
            let mut dd = vec![Rat::from_i64(0); e.dim()];
            for (k, c) in v[i].iter().enumerate() {
                if !c.is_zero() {
                    for (l, c2) in v[k].iter().enumerate() {
                        dd[l] = dd[l].clone() + c.clone() * c2.clone();
                    }
                }
            }
            let sign = if e.basis[i].deg() % 2 == 1 { -1 } else { 1 };
            let mut expect = vec![Rat::from_i64(0); e.dim()];
            expect[i] = Rat::from_i64(sign);
            assert_eq!(dd, expect, "double dual of {}", e.basis[i].label);
        }
    }

    #[test]
    fn elliptic_symplectic_pairing() {
        let e = elliptic_model();
        let dz = e.index_of("dz").unwrap();
        let dzbar = e.index_of("dzbar").unwrap();
        assert_eq!(e.symplectic_pairing(dz, dzbar), Rat::from_i64(-1));
        assert_eq!(e.symplectic_pairing(dzbar, dz), Rat::from_i64(1));
        assert_eq!(e.symplectic_pairing(dz, dz), Rat::from_i64(0));
    }

    #[test]
    fn symplectic_antisymmetry_all_models() {
        for a in [elliptic_model(), genus_model(2), abelian_surface_model()] {
            for &i in a.reduced_basis() {
                for &j in a.reduced_basis() {
                    let lhs = a.symplectic_pairing(i, j);
                    let s = (1 - a.basis[i].deg() as i64) * (1 - a.basis[j].deg() as i64);
                    let sign = if s % 2 == 0 { 1 } else { -1 };
                    let rhs = Rat::from_i64(-sign) * a.symplectic_pairing(j, i);
                    assert_eq!(lhs, rhs);
                }
            }
            // nondegenerate on the reduced part
            let m = a.symplectic_matrix();
            assert_eq!(m.rank(), a.reduced_basis().len());
        }
    }

    #[test]
    fn genus2_pairing_is_standard_symplectic() {
        let g = genus_model(2);
        let idx = |l: &str| g.index_of(l).unwrap();
        for i in 1..=2 {
            let q = idx(&format!("q{i}"));
            let p = idx(&format!("p{i}"));
            let v = g.symplectic_pairing(q, p);
            assert_eq!(v.clone() * v.clone(), Rat::from_i64(1));
            assert_eq!(g.symplectic_pairing(q, p), Rat::from_i64(0) - g.symplectic_pairing(p, q));
        }
        assert_eq!(g.symplectic_pairing(idx("q1"), idx("q2")), Rat::from_i64(0));
        assert_eq!(g.symplectic_pairing(idx("q1"), idx("p2")), Rat::from_i64(0));
    }

    #[test]
    fn identity_functor_maps_are_identity() {
        let e = elliptic_model();
        let f = identity_morphism(&e);
        let maps = f.functor_maps();
        assert_eq!(maps.pushforward, Mat::identity(e.dim()));
        assert_eq!(maps.gysin, Mat::identity(e.dim()));
        assert_eq!(maps.shriek, Mat::identity(e.dim()));
    }

    fn check_adjunction_and_projection(f: &AlgebraMorphism<Rat>) {
        let maps = f.functor_maps();
        let x = &f.source;
        let y = &f.target;
        // adjunction ⟨c₀ ∩ H_Y ∩ f_*h⟩_Y = ⟨f^!c₀ ∩ H_X ∩ h⟩_X (unshifted caps)
        let cap = |alg: &PDAlgebra<Rat>, a: &[Rat], b: &[Rat]| -> Rat {
            // (a, PD(b)) with homology coefficient vectors a, b
            let mut acc = Rat::from_i64(0);
            for (j, cb) in b.iter().enumerate() {
                if cb.is_zero() {
                    continue;
                }
                let row = alg.poincare_dual_row(j);
                for (i, ca) in a.iter().enumerate() {
                    acc = acc + ca.clone() * cb.clone() * row[i].clone();
                }
            }
            acc
        };
        for c0 in 0..y.dim() {
            for h in 0..x.dim() {
                let mut hy = vec![Rat::from_i64(0); x.dim()];
                hy[h] = Rat::from_i64(1);
                let fh = maps.pushforward.mul_vec(&hy);
                let mut cy = vec![Rat::from_i64(0); y.dim()];
                cy[c0] = Rat::from_i64(1);
                let lhs = cap(y, &cy, &fh);
                let gc = maps.gysin.mul_vec(&cy);
                let rhs = cap(x, &gc, &hy);
                assert_eq!(lhs, rhs, "adjunction at c0={c0}, h={h}");
            }
        }
        // projection formula f_!(α ∪ f*γ) = f_!α ∪ γ on all basis pairs
        for a in 0..x.dim() {
            for g in 0..y.dim() {
                let fg = f.pull_class(&[(g, Rat::from_i64(1))]);
                let prod = x.mul_sparse(&[(a, Rat::from_i64(1))], &fg);
                let mut dense = vec![Rat::from_i64(0); x.dim()];
                for (i, c) in prod {
                    dense[i] = c;
                }
                let lhs = maps.shriek.mul_vec(&dense);
                let mut ea = vec![Rat::from_i64(0); x.dim()];
                ea[a] = Rat::from_i64(1);
                let fa = maps.shriek.mul_vec(&ea);
                let rhs_sparse = y.mul_sparse(
                    &fa.iter().cloned().enumerate().filter(|(_, c)| !c.is_zero()).collect::<Vec<_>>(),
                    &[(g, Rat::from_i64(1))],
                );
                let mut rhs = vec![Rat::from_i64(0); y.dim()];
                for (i, c) in rhs_sparse {
                    rhs[i] = c;
                }
                assert_eq!(lhs, rhs, "projection formula at α={a}, γ={g}");
            }
        }
    }

    #[test]
    fn diagonal_morphism_functoriality() {
        check_adjunction_and_projection(&diagonal_morphism());
    }

    #[test]
    fn projection_morphism_functoriality() {
        check_adjunction_and_projection(&projection_morphism());
    }

    #[test]
    fn model_file_round_trip() {
        let e = genus_model(2);
        let json = save_model(&e);
        let e2 = load_model_rat(&json).unwrap();
        assert_eq!(e2.dim(), e.dim());
        for i in 0..e.dim() {
            for j in 0..e.dim() {
                assert_eq!(e.mult[i][j], e2.mult[i][j]);
            }
        }
        assert_eq!(e.trace, e2.trace);
    }

    #[test]
    fn degenerate_pairing_rejected_at_load() {
        // 2-dim "algebra" with zero trace: pairing singular
        let basis = vec![
            BasisClass { label: "1".into(), p: 0, q: 0 },
            BasisClass { label: "x".into(), p: 1, q: 1 },
        ];
        let mut mult = vec![vec![Vec::new(); 2]; 2];
        mult[0][0].push((0, Rat::from_i64(1)));
        mult[0][1].push((1, Rat::from_i64(1)));
        mult[1][0].push((1, Rat::from_i64(1)));
        let trace = vec![Rat::from_i64(0), Rat::from_i64(0)];
        let err = PDAlgebra::new(1, basis, mult, trace, None).unwrap_err();
        assert!(matches!(err, AlgebraError::SingularPairing));
    }
}
