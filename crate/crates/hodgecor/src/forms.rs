//! Band-limited Fourier forms on flat complex tori: ∂, ∂̄, d, d^C, wedge and
//! integration, exact in coefficients up to float rounding.

use crate::linalg::Mat;
use crate::scalar::C64;
use num::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum FormError {
    #[error("bandwidth overflow: |k|∞ = {0} exceeds the cap {1}")]
    BandwidthOverflow(i32, i32),
    #[error("not a top-degree form")]
    NotTopDegree,
    #[error("torus mismatch between operands")]
    TorusMismatch,
}

/// Flat complex torus ℂⁿ/Λ in lattice coordinates u ∈ ℝ^{2n}/ℤ^{2n}, with
/// z = periods · u.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Torus {
    pub n: usize,
    /// n×2n period matrix.
    pub periods: Vec<Vec<C64>>,
    /// ∂u_j/∂z_a = inv[j][a], ∂u_j/∂z̄_a = inv[j][n+a]; 2n×2n.
    inv: Vec<Vec<C64>>,
    /// dz₁∧…∧dz_n∧dz̄₁∧…∧dz̄_n = det_factor · du₁∧…∧du_{2n}.
    pub det_factor: C64,
}

impl Torus {
    pub fn new(n: usize, periods: Vec<Vec<C64>>) -> Self {
        assert_eq!(periods.len(), n);
        assert!(periods.iter().all(|r| r.len() == 2 * n));
        // stack [P; conj P] and invert
        let mut big = Mat::<C64>::zeros(2 * n, 2 * n);
        for a in 0..n {
            for j in 0..2 * n {
                big[(a, j)] = periods[a][j];
                big[(n + a, j)] = periods[a][j].conj();
            }
        }
        let det = det_complex(&big);
        let inv_m = big.inverse().expect("nondegenerate periods");
        let mut inv = vec![vec![C64::zero(); 2 * n]; 2 * n];
        for j in 0..2 * n {
            for c in 0..2 * n {
                inv[j][c] = inv_m[(j, c)];
            }
        }
        Torus { n, periods, inv, det_factor: det }
    }

    /// Elliptic curve ℂ/(ℤ + τℤ).
    pub fn elliptic(tau: C64) -> Self {
        Torus::new(1, vec![vec![C64::new(1.0, 0.0), tau]])
    }

    /// Product E_{τ₁} × E_{τ₂}.
    pub fn product(tau1: C64, tau2: C64) -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::zero();
        Torus::new(2, vec![vec![one, tau1, zero, zero], vec![zero, zero, one, tau2]])
    }

    pub fn dims(&self) -> usize {
        2 * self.n
    }

    /// Eigenvalue of ∂/∂z_a on the character e_k, divided by 2πi.
    pub fn lambda(&self, a: usize, k: &[i32]) -> C64 {
        let mut acc = C64::zero();
        for (j, &kj) in k.iter().enumerate() {
            acc += self.inv[j][a] * (kj as f64);
        }
        acc
    }

    /// Eigenvalue of ∂/∂z̄_a on the character e_k, divided by 2πi.
    pub fn lambda_bar(&self, a: usize, k: &[i32]) -> C64 {
        let mut acc = C64::zero();
        for (j, &kj) in k.iter().enumerate() {
            acc += self.inv[j][self.n + a] * (kj as f64);
        }
        acc
    }

    /// z-coordinates of a lattice point u.
    pub fn z_of(&self, u: &[f64]) -> Vec<C64> {
        (0..self.n)
            .map(|a| {
                let mut acc = C64::zero();
                for (j, &uj) in u.iter().enumerate() {
                    acc += self.periods[a][j] * uj;
                }
                acc
            })
            .collect()
    }
}

fn det_complex(m: &Mat<C64>) -> C64 {
    // small sizes only; Laplace would do, Gaussian is fine
    let n = m.rows;
    let mut a = m.clone();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| a[(r, col)].norm() > 1e-14) else {
            return C64::zero();
        };
        if p != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(p, j)];
                a[(p, j)] = tmp;
            }
            det = -det;
        }
        det *= a[(col, col)];
        let inv = C64::new(1.0, 0.0) / a[(col, col)];
        for r in col + 1..n {
            let f = a[(r, col)] * inv;
            for j in col..n {
                let sub = f * a[(col, j)];
                a[(r, j)] -= sub;
            }
        }
    }
    det
}

pub type Mode = Vec<i32>;

/// Bitmask over the covector symbols dz₁..dz_n (low bits) then dz̄₁..dz̄_n.
pub type FormMask = u32;

/// Wedge sign of combining two disjoint masks, by inversion count.
pub fn mask_wedge_sign(a: FormMask, b: FormMask) -> i32 {
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

#[derive(Clone, Debug)]
pub struct FourierForm {
    pub torus: Torus,
    /// (mask, mode) -> coefficient.
    pub terms: BTreeMap<(FormMask, Mode), C64>,
    pub band_cap: i32,
}

pub const DEFAULT_BAND_CAP: i32 = 128;

impl FourierForm {
    pub fn zero(torus: &Torus) -> Self {
        FourierForm { torus: torus.clone(), terms: BTreeMap::new(), band_cap: DEFAULT_BAND_CAP }
    }

    pub fn monomial(torus: &Torus, mask: FormMask, mode: &[i32], c: C64) -> Self {
        let mut f = FourierForm::zero(torus);
        f.add_term(mask, mode.to_vec(), c);
        f
    }

    /// The constant function 1.
    pub fn one(torus: &Torus) -> Self {
        FourierForm::monomial(torus, 0, &vec![0; torus.dims()], C64::new(1.0, 0.0))
    }

    /// The normalized volume form (integral 1).
    pub fn volume(torus: &Torus) -> Self {
        let top: FormMask = (1 << torus.dims()) - 1;
        FourierForm::monomial(
            torus,
            top,
            &vec![0; torus.dims()],
            C64::new(1.0, 0.0) / torus.det_factor,
        )
    }

    pub fn add_term(&mut self, mask: FormMask, mode: Mode, c: C64) {
        if c.is_zero() {
            return;
        }
        let key = (mask, mode);
        let e = self.terms.entry(key.clone()).or_insert_with(C64::zero);
        *e += c;
        if e.norm() == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &FourierForm) -> FourierForm {
        let mut out = self.clone();
        for ((mask, mode), c) in &other.terms {
            out.add_term(*mask, mode.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> FourierForm {
        let mut out = FourierForm::zero(&self.torus);
        out.band_cap = self.band_cap;
        for ((mask, mode), c) in &self.terms {
            out.add_term(*mask, mode.clone(), *c * s);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn bandwidth(&self) -> i32 {
        self.terms
            .keys()
            .flat_map(|(_, mode)| mode.iter().map(|k| k.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Degrees present (deg = popcount of mask); None for the zero form.
    pub fn degree(&self) -> Option<u32> {
        let mut degs: Vec<u32> = self.terms.keys().map(|(m, _)| m.count_ones()).collect();
        degs.dedup();
        match degs.len() {
            0 => None,
            1 => Some(degs[0]),
            _ => None,
        }
    }

    pub fn wedge(&self, other: &FourierForm) -> Result<FourierForm, FormError> {
        if self.torus != other.torus {
            return Err(FormError::TorusMismatch);
        }
        let mut out = FourierForm::zero(&self.torus);
        out.band_cap = self.band_cap.min(other.band_cap);
        for ((ma, ka), ca) in &self.terms {
            for ((mb, kb), cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let mode: Mode = ka.iter().zip(kb.iter()).map(|(x, y)| x + y).collect();
                let bw = mode.iter().map(|k| k.abs()).max().unwrap_or(0);
                if bw > out.band_cap {
                    return Err(FormError::BandwidthOverflow(bw, out.band_cap));
                }
                let sign = mask_wedge_sign(*ma, *mb);
                out.add_term(ma | mb, mode, *ca * *cb * (sign as f64));
            }
        }
        Ok(out)
    }

    fn apply_derivative(&self, bar: bool) -> FourierForm {
        let mut out = FourierForm::zero(&self.torus);
        out.band_cap = self.band_cap;
        let n = self.torus.n;
        let i2pi = C64::new(0.0, TWO_PI);
        for ((mask, mode), c) in &self.terms {
            for a in 0..n {
                let sym = if bar { 1 << (n + a) } else { 1 << a };
                if mask & sym != 0 {
                    continue;
                }
                let lam = if bar {
                    self.torus.lambda_bar(a, mode)
                } else {
                    self.torus.lambda(a, mode)
                };
                if lam.is_zero() {
                    continue;
                }
                // dz_a ∧ (dz-part of mask): the new symbol goes in front
                let sign = mask_wedge_sign(sym, *mask);
                out.add_term(mask | sym, mode.clone(), *c * i2pi * lam * (sign as f64));
            }
        }
        out
    }

    pub fn del(&self) -> FourierForm {
        self.apply_derivative(false)
    }

    pub fn del_bar(&self) -> FourierForm {
        self.apply_derivative(true)
    }

    pub fn d(&self) -> FourierForm {
        self.del().add(&self.del_bar())
    }

    /// d^C := ∂ − ∂̄.
    pub fn dc(&self) -> FourierForm {
        self.del().add(&self.del_bar().scale(C64::new(-1.0, 0.0)))
    }

    /// ∫_X of a top-degree form: the zero-mode coefficient times the
    /// volume conversion (∫ vol = 1).
    pub fn integrate(&self) -> Result<C64, FormError> {
        let top: FormMask = (1 << self.torus.dims()) - 1;
        let mut acc = C64::zero();
        for ((mask, mode), c) in &self.terms {
            if *mask != top {
                return Err(FormError::NotTopDegree);
            }
            if mode.iter().all(|&k| k == 0) {
                acc += *c;
            }
        }
        Ok(acc * self.torus.det_factor)
    }

    /// Pointwise evaluation: returns the coefficient of each mask at u.
    pub fn eval(&self, u: &[f64]) -> BTreeMap<FormMask, C64> {
        let mut out: BTreeMap<FormMask, C64> = BTreeMap::new();
        for ((mask, mode), c) in &self.terms {
            let phase: f64 = mode.iter().zip(u).map(|(&k, &x)| k as f64 * x).sum();
            let ch = C64::new(0.0, TWO_PI * phase).exp();
            *out.entry(*mask).or_insert_with(C64::zero) += *c * ch;
        }
        out
    }

    /// L² norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn conj(&self) -> FourierForm {
        let n = self.torus.n;
        let mut out = FourierForm::zero(&self.torus);
        out.band_cap = self.band_cap;
        for ((mask, mode), c) in &self.terms {
            // conjugate swaps dz_a ↔ dz̄_a and negates the mode
            let lo = mask & ((1 << n) - 1);
            let hi = mask >> n;
            let new_mask = (hi) | (lo << n);
            // sign: reorder swapped symbols back to canonical order
            let perm_sign = conj_reorder_sign(*mask, n);
            let neg: Mode = mode.iter().map(|k| -k).collect();
            out.add_term(new_mask, neg, c.conj() * (perm_sign as f64));
        }
        out
    }
}

/// Sign of reordering the conjugated symbol list back to canonical order.
fn conj_reorder_sign(mask: FormMask, n: usize) -> i32 {
    // list the symbols of mask in canonical order, conjugate each in place,
    // then count inversions of the resulting order
    let mut symbols: Vec<u32> = Vec::new();
    for bit in 0..(2 * n) as u32 {
        if mask & (1 << bit) != 0 {
            let conj_bit = if (bit as usize) < n { bit + n as u32 } else { bit - n as u32 };
            symbols.push(conj_bit);
        }
    }
    let mut inv = 0;
    for i in 0..symbols.len() {
        for j in i + 1..symbols.len() {
            if symbols[i] > symbols[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Seeded random band-limited form with the given mask set.
pub fn random_form(
    torus: &Torus,
    masks: &[FormMask],
    band: i32,
    rng: &mut impl rand::Rng,
) -> FourierForm {
    let mut f = FourierForm::zero(torus);
    let dims = torus.dims();
    let terms_per_mask = 6usize;
    for &mask in masks {
        for _ in 0..terms_per_mask {
            let mode: Mode = (0..dims).map(|_| rng.gen_range(-band..=band)).collect();
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.add_term(mask, mode, c);
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tau() -> C64 {
        C64::new(0.3, 1.1)
    }

    #[test]
    fn integrate_volume_and_modes() {
        let t = Torus::elliptic(tau());
        let vol = FourierForm::volume(&t);
        let one = vol.integrate().unwrap();
        assert!((one - C64::new(1.0, 0.0)).norm() < 1e-14);
        // nonzero mode integrates to zero
        let f = FourierForm::monomial(&t, 0b11, &[1, 0], C64::new(2.0, 1.0));
        assert!(f.integrate().unwrap().norm() < 1e-14);
        // not top degree
        let g = FourierForm::monomial(&t, 0b01, &[0, 0], C64::new(1.0, 0.0));
        assert!(matches!(g.integrate(), Err(FormError::NotTopDegree)));
    }

    #[test]
    fn stokes_exactly_in_coefficients() {
        let t = Torus::elliptic(tau());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let f = random_form(&t, &[0b01, 0b10], 4, &mut rng);
        assert!(f.d().integrate().unwrap().norm() < 1e-12);
        assert!(f.dc().integrate().unwrap().norm() < 1e-12);
        // ∂² = ∂̄² = 0 and ∂∂̄ = −∂̄∂
        let h = random_form(&t, &[0b00], 4, &mut rng);
        assert!(h.del().del().is_zero());
        assert!(h.del_bar().del_bar().is_zero());
        let anti = h.del().del_bar().add(&h.del_bar().del().scale(C64::new(1.0, 0.0)));
        assert!(anti.coeff_norm() < 1e-12);
    }

    #[test]
    fn wedge_is_graded_commutative() {
        let t = Torus::product(tau(), C64::new(-0.2, 0.9));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let f = random_form(&t, &[0b0001, 0b0010], 2, &mut rng);
        let g = random_form(&t, &[0b0100, 0b1000], 2, &mut rng);
        let fg = f.wedge(&g).unwrap();
        let gf = g.wedge(&f).unwrap();
        // both degree 1: f∧g = −g∧f
        let res = fg.add(&gf);
        assert!(res.coeff_norm() < 1e-12);
    }

    #[test]
    fn product_torus_volume_is_product_of_factors() {
        let t = Torus::product(tau(), tau());
        let vol = FourierForm::volume(&t);
        assert!((vol.integrate().unwrap() - C64::new(1.0, 0.0)).norm() < 1e-13);
        // canonical symbol order is dz1 dz2 dz̄1 dz̄2: one transposition away
        // from the per-factor order, so det = −(τ̄−τ)²
        let per_factor = tau().conj() - tau();
        assert!((t.det_factor + per_factor * per_factor).norm() < 1e-12);
    }

    #[test]
    fn bandwidth_overflow_is_hard_error() {
        let t = Torus::elliptic(tau());
        let mut f = FourierForm::monomial(&t, 0, &[40, 0], C64::new(1.0, 0.0));
        f.band_cap = 64;
        let g = f.clone();
        // 40+40 = 80 > 64
        assert!(matches!(f.wedge(&g), Err(FormError::BandwidthOverflow(80, 64))));
    }

    #[test]
    fn conj_is_an_involution_matching_reality() {
        let t = Torus::elliptic(tau());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let f = random_form(&t, &[0b00, 0b01, 0b10, 0b11], 3, &mut rng);
        let cc = f.conj().conj();
        let res = cc.add(&f.scale(C64::new(-1.0, 0.0)));
        assert!(res.coeff_norm() < 1e-12);
        // a real function evaluates to real values
        let g0 = random_form(&t, &[0b00], 3, &mut rng);
        let real = g0.add(&g0.conj());
        for u in [[0.1, 0.2], [0.7, 0.4]] {
            let v = real.eval(&u)[&0];
            assert!(v.im.abs() < 1e-12);
        }
    }
}
