//! Green currents on flat complex tori: translation-invariant propagators
//! inverting (2πi)⁻¹∂̄∂ off harmonics, their derivatives, the base-point
//! variant, and weak-residual verification of the defining equation.

use crate::forms::{FormMask, FourierForm, Mode, Torus, TWO_PI};
use crate::linalg::Mat;
use crate::scalar::C64;
use num::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GreenError {
    #[error("unsupported complex dimension {0}")]
    UnsupportedDimension(usize),
    #[error("no solution for mode {0:?}")]
    ModeUnsolvable(Vec<i32>),
    #[error("evaluation on the diagonal")]
    OnDiagonal,
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MuChoice {
    Volume,
    /// Base point in lattice coordinates.
    DeltaPoint(Vec<f64>),
}

/// Translation-invariant smooth part of the Green current: an
/// (n−1, n−1)-form-valued Fourier series γ on X with zero zero-mode; the
/// current on X×X is the difference-map pullback, symmetric by construction.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub torus: Torus,
    pub mu: MuChoice,
    pub truncation: i32,
    pub gamma: FourierForm,
    /// Coefficient of log|z−w|² in the local model of the diagonal
    /// singularity (complex dimension one).
    pub log_coefficient: f64,
}

/// Masks of the (p,q)-forms on a torus of complex dimension n.
pub fn masks_of_bidegree(n: usize, p: usize, q: usize) -> Vec<FormMask> {
    let mut out = Vec::new();
    for mask in 0..(1u32 << (2 * n)) {
        let lo = (mask & ((1 << n) - 1)).count_ones() as usize;
        let hi = (mask >> n).count_ones() as usize;
        if lo == p && hi == q {
            out.push(mask);
        }
    }
    out
}

/// Builds the propagator by solving (2πi)⁻¹ ∂̄∂ γ = δ₀ − vol mode by mode:
/// for every nonzero mode the (n−1,n−1) coefficients are the minimal-norm
/// solution reproducing the δ-side coefficient of the top form.
pub fn build_propagator(
    torus: &Torus,
    mu: MuChoice,
    truncation: i32,
) -> Result<Propagator, GreenError> {
    if torus.n != 1 && torus.n != 2 {
        return Err(GreenError::UnsupportedDimension(torus.n));
    }
    let n = torus.n;
    let dims = torus.dims();
    let source_masks = masks_of_bidegree(n, n - 1, n - 1);
    let top_mask: FormMask = (1 << dims) - 1;
    // δ₀ = Σ_k e_k · du-top; in the dz-basis the mode-k coefficient of the
    // top mask is 1/det_factor
    let delta_coeff = C64::new(1.0, 0.0) / torus.det_factor;
    let i2pi = C64::new(0.0, TWO_PI);

    let mut gamma = FourierForm::zero(torus);
    gamma.band_cap = i32::MAX;
    let mut k = vec![-truncation; dims];
    loop {
        if k.iter().any(|&x| x != 0) {
            // matrix of (2πi)⁻¹∂̄∂ on mode k from source masks to the top mask
            let mut row = vec![C64::zero(); source_masks.len()];
            for (j, &mask) in source_masks.iter().enumerate() {
                let probe = FourierForm::monomial(torus, mask, &k, C64::new(1.0, 0.0));
                let image = probe.del().del_bar(); // ∂̄∂
                for ((m, _), c) in &image.terms {
                    if *m == top_mask {
                        row[j] += *c / i2pi;
                    }
                }
            }
            let norm2: f64 = row.iter().map(|c| c.norm_sqr()).sum();
            if norm2 < 1e-20 {
                return Err(GreenError::ModeUnsolvable(k.clone()));
            }
            // minimal-norm solution of row·x = delta_coeff
            let scale = delta_coeff / C64::new(norm2, 0.0);
            for (j, &mask) in source_masks.iter().enumerate() {
                let x = row[j].conj() * scale;
                if !x.is_zero() {
                    gamma.add_term(mask, k.clone(), x);
                }
            }
        }
        // next mode
        let mut i = dims;
        while i > 0 && k[i - 1] == truncation {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        k[i - 1] += 1;
        for j in i..dims {
            k[j] = -truncation;
        }
    }
    Ok(Propagator {
        torus: torus.clone(),
        mu,
        truncation,
        gamma,
        log_coefficient: if n == 1 { 1.0 } else { f64::NAN },
    })
}

impl Propagator {
    /// γ evaluated at a lattice point: mask -> coefficient.
    pub fn eval_components(&self, u: &[f64]) -> std::collections::BTreeMap<FormMask, C64> {
        self.gamma.eval(u)
    }

    /// For the elliptic case the propagator is a scalar function.
    pub fn eval_scalar(&self, u: &[f64]) -> C64 {
        assert_eq!(self.torus.n, 1);
        self.gamma.eval(u).get(&0).copied().unwrap_or_else(C64::zero)
    }

    /// Symmetry of the induced current on X×X: γ(−u) with covectors negated
    /// must equal γ(u); for even-degree components this is evenness of the
    /// coefficients, exact by the mode-pair construction.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for ((mask, mode), c) in &self.gamma.terms {
            let neg: Mode = mode.iter().map(|k| -k).collect();
            let other = self
                .gamma
                .terms
                .get(&(*mask, neg))
                .copied()
                .unwrap_or_else(C64::zero);
            defect = defect.max((*c - other).norm());
        }
        defect
    }
}

// ---------------------------------------------------------------------------
// weak verification of the defining equation

/// One product test form p₁*(e_j·mask_a) ∧ p₂*(e_l·mask_b) on X×X.
#[derive(Clone, Debug)]
pub struct TestForm {
    pub mode_x: Mode,
    pub mask_x: FormMask,
    pub mode_y: Mode,
    pub mask_y: FormMask,
}

/// ⟨(2πi)⁻¹∂̄∂ G − (δ_Δ − P_Har), φ⟩ for a product test form φ, where
/// G = d*γ is the pullback of γ along (x,y) ↦ x−y. All three pairings are
/// exact Fourier sums.
pub fn weak_residual(prop: &Propagator, phi: &TestForm) -> C64 {
    let torus = &prop.torus;
    let alpha = FourierForm::monomial(torus, phi.mask_x, &phi.mode_x, C64::new(1.0, 0.0));
    let beta = FourierForm::monomial(torus, phi.mask_y, &phi.mode_y, C64::new(1.0, 0.0));

    // ⟨d*ψ, p₁*α ∧ p₂*β⟩ with ψ = (2πi)⁻¹ ∂̄∂ γ
    let i2pi = C64::new(0.0, TWO_PI);
    let psi = prop.gamma.del().del_bar().scale(C64::new(1.0, 0.0) / i2pi);
    let lhs = pair_pullback_with_product(torus, &psi, &alpha, &beta);

    // ⟨δ_Δ, φ⟩ = ∫_X α∧β
    let diag = alpha
        .wedge(&beta)
        .map(|f| f.integrate().unwrap_or_else(|_| C64::zero()))
        .unwrap_or_else(|_| C64::zero());

    // ⟨P_Har, φ⟩ per the split μ-terms + harmonic Casimir; for the volume
    // choice μ = vol. The base-point variant replaces the μ-terms by
    // evaluation at the point.
    let phar = pair_projector_with_product(prop, &alpha, &beta);

    lhs - (diag - phar)
}

/// ⟨d*ψ, p₁*α ∧ p₂*β⟩ by expanding each difference covector.
fn pair_pullback_with_product(
    torus: &Torus,
    psi: &FourierForm,
    alpha: &FourierForm,
    beta: &FourierForm,
) -> C64 {
    let mut acc = C64::zero();
    let dims = torus.dims();
    for ((mask, mode), c) in &psi.terms {
        // e_k(x−y): x-mode k, y-mode −k
        let symbols: Vec<u32> = (0..dims as u32).filter(|b| mask & (1 << b) != 0).collect();
        // choose the subset T of symbols pulled to the y factor
        for t in 0..(1u32 << symbols.len()) {
            let mut x_mask: FormMask = 0;
            let mut y_mask: FormMask = 0;
            // sign: (−1)^{|T|} for the minus in (v^x − v^y), times the Koszul
            // reordering sign collecting x-symbols before y-symbols (all
            // covectors are odd, so it is the permutation sign)
            let mut sign = 1i32;
            let mut y_seen = 0;
            for (pos, &b) in symbols.iter().enumerate() {
                if t & (1 << pos) != 0 {
                    y_mask |= 1 << b;
                    y_seen += 1;
                    sign = -sign; // the −v^y
                } else {
                    x_mask |= 1 << b;
                    if y_seen % 2 == 1 {
                        sign = -sign; // move this x-symbol past the y-block
                    }
                }
            }
            let x_form = FourierForm::monomial(torus, x_mask, mode, C64::new(sign as f64, 0.0));
            let neg: Mode = mode.iter().map(|k| -k).collect();
            let y_form = FourierForm::monomial(torus, y_mask, &neg, C64::new(1.0, 0.0));
            // (Xc ∧ Yc)∧(α ∧ β) → (Xc∧α)(Yc∧β), sign (−1)^{deg Yc·deg α}
            let deg_yc = y_mask.count_ones();
            let deg_a = alpha.degree().unwrap_or(0);
            let s2 = if (deg_yc * deg_a) % 2 == 0 { 1.0 } else { -1.0 };
            let ix = x_form
                .wedge(alpha)
                .ok()
                .and_then(|f| f.integrate().ok())
                .unwrap_or_else(C64::zero);
            if ix.is_zero() {
                continue;
            }
            let iy = y_form
                .wedge(beta)
                .ok()
                .and_then(|f| f.integrate().ok())
                .unwrap_or_else(C64::zero);
            acc += *c * ix * iy * s2;
        }
    }
    acc
}

/// ⟨P_Har, p₁*α∧p₂*β⟩: the projector kernel is p₁*μ + p₂*μ + Σ p₁*h_i^∨∧p₂*h_i
/// over the constant harmonic forms of intermediate degree.
fn pair_projector_with_product(prop: &Propagator, alpha: &FourierForm, beta: &FourierForm) -> C64 {
    let torus = &prop.torus;
    let n = torus.n;
    let pair_product = |a: &FourierForm, b: &FourierForm| -> C64 {
        let deg_b_first = b.degree().unwrap_or(0);
        let deg_alpha = alpha.degree().unwrap_or(0);
        let sign = if (deg_b_first * deg_alpha) % 2 == 0 { 1.0 } else { -1.0 };
        let ix = a
            .wedge(alpha)
            .ok()
            .and_then(|f| f.integrate().ok())
            .unwrap_or_else(C64::zero);
        let iy = b
            .wedge(beta)
            .ok()
            .and_then(|f| f.integrate().ok())
            .unwrap_or_else(C64::zero);
        ix * iy * sign
    };

    let one = FourierForm::one(torus);
    let vol = FourierForm::volume(torus);
    let mut acc = match &prop.mu {
        MuChoice::Volume => pair_product(&vol, &one) + pair_product(&one, &vol),
        MuChoice::DeltaPoint(a) => {
            // ⟨δ_{a×X} + δ_{X×a}, φ⟩ = α-part evaluated at a times ∫β + …
            let ax = alpha.eval(a).get(&0).copied().unwrap_or_else(C64::zero);
            let by = beta.eval(a).get(&0).copied().unwrap_or_else(C64::zero);
            let ib = beta.integrate().unwrap_or_else(|_| C64::zero());
            let ia = alpha.integrate().unwrap_or_else(|_| C64::zero());
            ax * ib + by * ia
        }
    };

    // harmonic Casimir over intermediate degrees
    let mut inter_masks: Vec<FormMask> = Vec::new();
    for p in 0..=n {
        for q in 0..=n {
            if p + q > 0 && p + q < 2 * n {
                inter_masks.extend(masks_of_bidegree(n, p, q));
            }
        }
    }
    // dual basis: constants with ∫ h_i ∧ h_j^∨ = δ_ij
    let m = inter_masks.len();
    let mut pairing = Mat::<C64>::zeros(m, m);
    for (i, &mi) in inter_masks.iter().enumerate() {
        for (j, &mj) in inter_masks.iter().enumerate() {
            let a = FourierForm::monomial(torus, mi, &vec![0; torus.dims()], C64::new(1.0, 0.0));
            let b = FourierForm::monomial(torus, mj, &vec![0; torus.dims()], C64::new(1.0, 0.0));
            pairing[(i, j)] = a
                .wedge(&b)
                .ok()
                .and_then(|f| f.integrate().ok())
                .unwrap_or_else(C64::zero);
        }
    }
    let inv = pairing.inverse().expect("harmonic pairing nondegenerate");
    for (i, &mi) in inter_masks.iter().enumerate() {
        // h_i^∨ = Σ_j (P⁻¹)[j][i]-ish: ∫ h_i ∧ h^∨ = 1 with h^∨ = Σ_l c_l h_l,
        // Σ_l pairing[i][l] c_l = δ: c = column i of P⁻¹
        let hi = FourierForm::monomial(torus, mi, &vec![0; torus.dims()], C64::new(1.0, 0.0));
        let mut hdual = FourierForm::zero(torus);
        for (l, &ml) in inter_masks.iter().enumerate() {
            let c = inv[(l, i)];
            if !c.is_zero() {
                hdual.add_term(ml, vec![0; torus.dims()], c);
            }
        }
        acc += pair_product(&hdual, &hi);
    }
    acc
}

// ---------------------------------------------------------------------------
// accelerated evaluation for the elliptic curve

/// Exponential integral E₁(x) for x > 0.
pub fn exp_int_e1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 1.0 {
        // series: E₁ = −γ − ln x + Σ (−1)^{k+1} x^k/(k·k!)
        let gamma = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..=30 {
            term *= -x / k as f64;
            sum -= term / k as f64;
        }
        -gamma - x.ln() + sum
    } else {
        // continued fraction (Lentz)
        let mut b = x + 1.0;
        let mut c = 1e308;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=60 {
            let a = -(i as f64) * (i as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Full (untruncated) elliptic Green function g with ĝ_k = −Im τ/(π|k₂−τ̄k₁|²),
/// evaluated by Ewald splitting; log|z|²-type singularity at u = 0.
pub struct EllipticGreen {
    pub tau: C64,
    t0: f64,
    /// reciprocal-space terms (k, damped coefficient)
    recip: Vec<([i32; 2], f64)>,
    real_range: i32,
}

impl EllipticGreen {
    pub fn new(tau: C64) -> Self {
        let t0 = 0.5;
        let mut recip = Vec::new();
        let kmax = {
            // e^{−t₀ Q(k)} below 1e−17 is negligible; Q ≥ c·|k|²
            let qmin = TWO_PI / 2.0 * (tau.im / (tau.norm_sqr().max(1.0))).min(1.0);
            ((40.0 / (t0 * qmin)).sqrt() as i32) + 2
        };
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let q = Self::q_form(tau, k1, k2);
                let damped = (-t0 * q).exp() / q;
                if damped > 1e-18 {
                    recip.push(([k1, k2], damped));
                }
            }
        }
        EllipticGreen { tau, t0, recip, real_range: 6 }
    }

    /// Q(k) = π |k₂ − τ̄ k₁|² / Im τ, so that ĝ_k = −1/Q(k).
    fn q_form(tau: C64, k1: i32, k2: i32) -> f64 {
        let w = C64::new(k2 as f64, 0.0) - tau.conj() * (k1 as f64);
        std::f64::consts::PI * w.norm_sqr() / tau.im
    }

    /// c_m(u) = π |z(u) + λ_m|² / Im τ for the real-space lattice sum.
    fn c_m(&self, z: C64, m1: i32, m2: i32) -> f64 {
        let lam = C64::new(m1 as f64, 0.0) + self.tau * (m2 as f64);
        std::f64::consts::PI * (z + lam).norm_sqr() / self.tau.im
    }

    pub fn z_of(&self, u: &[f64]) -> C64 {
        C64::new(u[0], 0.0) + self.tau * u[1]
    }

    /// g(u); diverges like log|z|² at the origin.
    pub fn eval(&self, u: &[f64]) -> Result<f64, GreenError> {
        let z = self.z_of(u);
        let mut recip_sum = 0.0;
        for ([k1, k2], damped) in &self.recip {
            let phase = TWO_PI * (*k1 as f64 * u[0] + *k2 as f64 * u[1]);
            recip_sum += damped * phase.cos();
        }
        let mut real_sum = -self.t0;
        for m1 in -self.real_range..=self.real_range {
            for m2 in -self.real_range..=self.real_range {
                let c = self.c_m(z, m1, m2);
                if c == 0.0 {
                    return Err(GreenError::OnDiagonal);
                }
                let x = c / self.t0;
                if x < 40.0 {
                    real_sum += exp_int_e1(x);
                }
            }
        }
        Ok(-(recip_sum + real_sum))
    }

    /// ∂g/∂z at u ≠ 0 (z-derivative of both Ewald halves).
    pub fn eval_dz(&self, u: &[f64]) -> Result<C64, GreenError> {
        let z = self.z_of(u);
        let mut acc = C64::zero();
        // reciprocal part: ∂/∂z e_k = 2πi λ_k e_k, λ_k = (k₂ − τ̄k₁)/(τ−τ̄)
        for ([k1, k2], damped) in &self.recip {
            let lam = (C64::new(*k2 as f64, 0.0) - self.tau.conj() * (*k1 as f64))
                / (self.tau - self.tau.conj());
            let phase = TWO_PI * (*k1 as f64 * u[0] + *k2 as f64 * u[1]);
            let e = C64::new(0.0, phase).exp();
            acc += C64::new(0.0, TWO_PI) * lam * e * *damped;
        }
        // real part: d/dz E₁(c/t₀) = −e^{−c/t₀}/(c/t₀) · (1/t₀) ∂c/∂z,
        // ∂c/∂z = π(z̄+λ̄)/Im τ
        for m1 in -self.real_range..=self.real_range {
            for m2 in -self.real_range..=self.real_range {
                let c = self.c_m(z, m1, m2);
                if c == 0.0 {
                    return Err(GreenError::OnDiagonal);
                }
                let x = c / self.t0;
                if x < 40.0 {
                    let lam = C64::new(m1 as f64, 0.0) + self.tau * (m2 as f64);
                    let dcdz =
                        (z + lam).conj() * std::f64::consts::PI / self.tau.im;
                    // d/dz E₁(c/t₀) = −e^{−x}/x · (1/t₀) ∂c/∂z
                    acc -= C64::new((-x).exp() / x / self.t0, 0.0) * dcdz;
                }
            }
        }
        Ok(-acc)
    }

    pub fn eval_dzbar(&self, u: &[f64]) -> Result<C64, GreenError> {
        // g is real: ∂̄g = conj(∂g)
        Ok(self.eval_dz(u)?.conj())
    }

    /// Plain truncated Fourier sum; the slow oracle.
    pub fn slow_sum(&self, u: &[f64], truncation: i32) -> f64 {
        let mut acc = 0.0;
        for k1 in -truncation..=truncation {
            for k2 in -truncation..=truncation {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let q = Self::q_form(self.tau, k1, k2);
                let phase = TWO_PI * (k1 as f64 * u[0] + k2 as f64 * u[1]);
                acc += -phase.cos() / q;
            }
        }
        acc
    }
}

/// log|θ₁(z|τ)|² − 2π (Im z)²/Im τ: the classical closed form of the Green
/// function up to an additive constant; the independent oracle.
pub fn theta_green_shape(tau: C64, z: C64) -> f64 {
    let q = (C64::new(0.0, TWO_PI) * tau).exp();
    let mut theta =
        C64::new(2.0, 0.0) * q.powc(C64::new(0.125, 0.0)) * (z * std::f64::consts::PI).sin();
    let mut qn = C64::new(1.0, 0.0);
    for _ in 1..60 {
        qn *= q;
        let a = C64::new(1.0, 0.0) - qn;
        let b = C64::new(1.0, 0.0) - qn * (C64::new(0.0, TWO_PI) * z).exp();
        let c = C64::new(1.0, 0.0) - qn * (C64::new(0.0, -TWO_PI) * z).exp();
        theta *= a * b * c;
    }
    2.0 * theta.norm().ln() - TWO_PI * z.im * z.im / tau.im
}



#[cfg(test)]
mod tests {
    use super::*;

    fn tau() -> C64 {
        C64::new(0.21, 1.05)
    }

    #[test]
    fn elliptic_mode_coefficients_match_closed_form() {
        let t = Torus::elliptic(tau());
        let p = build_propagator(&t, MuChoice::Volume, 6).unwrap();
        // derived closed form: ĝ_k = −Im τ / (π |k₂ − τ̄ k₁|²)
        for ((mask, mode), c) in &p.gamma.terms {
            assert_eq!(*mask, 0);
            let w = C64::new(mode[1] as f64, 0.0) - tau().conj() * (mode[0] as f64);
            let expect = -tau().im / (std::f64::consts::PI * w.norm_sqr());
            assert!(
                (c - C64::new(expect, 0.0)).norm() < 1e-12 * expect.abs().max(1.0),
                "mode {mode:?}"
            );
        }
    }

    #[test]
    fn propagator_is_symmetric_and_real() {
        let t = Torus::elliptic(tau());
        let p = build_propagator(&t, MuChoice::Volume, 8).unwrap();
        assert!(p.symmetry_defect() < 1e-14);
        for u in [[0.3, 0.4], [0.1, 0.9]] {
            let v = p.eval_scalar(&u);
            assert!(v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn weak_residual_elliptic_all_band2_forms() {
        let t = Torus::elliptic(tau());
        let p = build_propagator(&t, MuChoice::Volume, 16).unwrap();
        let mut max = 0.0f64;
        for j1 in -2..=2 {
            for j2 in -2..=2 {
                for mx in 0..4u32 {
                    for my in 0..4u32 {
                        let phi = TestForm {
                            mode_x: vec![j1, j2],
                            mask_x: mx,
                            mode_y: vec![-j1, -j2],
                            mask_y: my,
                        };
                        max = max.max(weak_residual(&p, &phi).norm());
                    }
                }
            }
        }
        assert!(max < 1e-10, "weak residual {max}");
    }

    #[test]
    fn weak_residual_delta_point() {
        let t = Torus::elliptic(tau());
        let base = build_propagator(&t, MuChoice::Volume, 16).unwrap();
        // G_a(x,y) = g(x−y) − g(x−a) − g(y−a): not translation-invariant, so
        // the weak check pairs the three pieces; here we verify the volume
        // piece satisfies its own equation and defer the full base-point
        // weak test to the dedicated helper below.
        let a = vec![0.35, 0.15];
        let mut max = 0.0f64;
        for j1 in -1..=1 {
            for j2 in -1..=1 {
                let phi = TestForm {
                    mode_x: vec![j1, j2],
                    mask_x: 0b11,
                    mode_y: vec![-j1, -j2],
                    mask_y: 0b00,
                };
                max = max.max(delta_point_weak_residual(&base, &a, &phi).norm());
            }
        }
        assert!(max < 1e-10, "delta-point weak residual {max}");
    }

    #[test]
    fn surface_weak_residual_coarse() {
        let t = Torus::product(tau(), C64::new(-0.3, 0.8));
        let p = build_propagator(&t, MuChoice::Volume, 4).unwrap();
        let mut max = 0.0f64;
        // sampled set: complementary mask pairs at band 1
        for j in [[0, 0, 0, 0], [1, 0, 0, 0], [0, 1, -1, 0], [1, 1, 1, 1]] {
            for mx in 0..16u32 {
                let my = !mx & 0xF;
                let phi = TestForm {
                    mode_x: j.to_vec(),
                    mask_x: mx,
                    mode_y: j.iter().map(|x| -x).collect(),
                    mask_y: my,
                };
                max = max.max(weak_residual(&p, &phi).norm());
            }
        }
        assert!(max < 1e-9, "surface weak residual {max}");
    }

    #[test]
    fn ewald_matches_truncated_series_and_theta_shape() {
        let g = EllipticGreen::new(tau());
        // t₀-independence: the Ewald value is a reparametrization identity
        let g2 = EllipticGreen { t0: 0.9, ..EllipticGreen::new(tau()) };
        let mut g2 = g2;
        g2.recip = {
            let mut v = Vec::new();
            let kmax = 14;
            for k1 in -kmax..=kmax {
                for k2 in -kmax..=kmax {
                    if (k1, k2) == (0, 0) {
                        continue;
                    }
                    let q = EllipticGreen::q_form(tau(), k1, k2);
                    let d = (-0.9 * q).exp() / q;
                    if d > 1e-18 {
                        v.push(([k1, k2], d));
                    }
                }
            }
            v
        };
        for u in [[0.5, 0.0], [0.31, 0.17], [0.05, 0.45]] {
            let a = g.eval(&u).unwrap();
            let b = g2.eval(&u).unwrap();
            assert!((a - b).abs() < 1e-11, "t0 independence at {u:?}: {a} vs {b}");
        }
        // slow-sum agreement at its convergence level
        let half = [0.5, 0.0];
        let slow = g.slow_sum(&half, 600);
        assert!((g.eval(&half).unwrap() - slow).abs() < 2e-3);
        // theta-function shape: g − (log|θ₁|² − 2π Im²z/Imτ) is constant
        let mut shifts = Vec::new();
        for u in [[0.5, 0.0], [0.2, 0.3], [0.4, 0.45], [0.15, 0.05], [0.33, 0.41]] {
            let z = g.z_of(&u);
            shifts.push(g.eval(&u).unwrap() - theta_green_shape(tau(), z));
        }
        let mean: f64 = shifts.iter().sum::<f64>() / shifts.len() as f64;
        for s in &shifts {
            assert!((s - mean).abs() < 1e-10, "theta shape defect {shifts:?}");
        }
    }

    #[test]
    fn derivative_consistency_and_near_diagonal_boundedness() {
        let g = EllipticGreen::new(tau());
        // finite differences vs analytic ∂g
        let u = [0.27, 0.36];
        let h = 1e-6;
        let gz = g.eval_dz(&u).unwrap();
        // z = u₁ + τu₂: ∂/∂u₁ = ∂_z + ∂_z̄, ∂/∂u₂ = τ∂_z + τ̄∂_z̄
        let du1 = (g.eval(&[u[0] + h, u[1]]).unwrap() - g.eval(&[u[0] - h, u[1]]).unwrap())
            / (2.0 * h);
        let du2 = (g.eval(&[u[0], u[1] + h]).unwrap() - g.eval(&[u[0], u[1] - h]).unwrap())
            / (2.0 * h);
        let gzbar = gz.conj();
        let pred1 = gz + gzbar;
        let pred2 = tau() * gz + tau().conj() * gzbar;
        assert!((pred1.re - du1).abs() < 1e-5);
        assert!((pred2.re - du2).abs() < 1e-5);
        // near the diagonal: g − log|z|² stays bounded along a ray
        let mut vals = Vec::new();
        for k in 1..=6 {
            let s = 0.5f64.powi(k) * 0.2;
            let u = [s * 0.6, s * 0.8];
            let z = g.z_of(&u);
            vals.push(g.eval(&u).unwrap() - z.norm_sqr().ln());
        }
        for w in vals.windows(2) {
            assert!((w[0] - w[1]).abs() < 0.05, "log model drift {vals:?}");
        }
        // on-diagonal evaluation errors out
        assert!(matches!(g.eval(&[0.0, 0.0]), Err(GreenError::OnDiagonal)));
    }
}

/// Weak residual of the base-point equation (the δ_a variant): the current is
/// G_a(x,y) = g(x−y) − g(x−a) − g(y−a) with c = 0 fixed by zero pairing
/// against the volume form. Only the translation-invariant piece needs the
/// pullback pairing; the other two pair as single-factor forms.
pub fn delta_point_weak_residual(volume_prop: &Propagator, a: &[f64], phi: &TestForm) -> C64 {
    let torus = &volume_prop.torus;
    let alpha = FourierForm::monomial(torus, phi.mask_x, &phi.mode_x, C64::new(1.0, 0.0));
    let beta = FourierForm::monomial(torus, phi.mask_y, &phi.mode_y, C64::new(1.0, 0.0));
    let i2pi = C64::new(0.0, TWO_PI);
    let psi = volume_prop.gamma.del().del_bar().scale(C64::new(1.0, 0.0) / i2pi);

    // (2πi)⁻¹∂̄∂ g(x−y) pairs as before
    let mut lhs = pair_pullback_with_product(torus, &psi, &alpha, &beta);
    // (2πi)⁻¹∂̄∂_x g(x−a): ψ(x−a) = Σ ψ̂_k e_k(x)e_{−k}(a); pair with α, ∫β
    let ib = beta.integrate().unwrap_or_else(|_| C64::zero());
    let ia = alpha.integrate().unwrap_or_else(|_| C64::zero());
    for ((mask, mode), c) in &psi.terms {
        let e_at_a = {
            let phase: f64 = mode.iter().zip(a).map(|(&k, &x)| k as f64 * x).sum();
            C64::new(0.0, -TWO_PI * phase).exp()
        };
        let xf = FourierForm::monomial(torus, *mask, mode, C64::new(1.0, 0.0));
        let ix = xf
            .wedge(&alpha)
            .ok()
            .and_then(|f| f.integrate().ok())
            .unwrap_or_else(C64::zero);
        lhs -= *c * e_at_a * ix * ib;
        // and the y-factor copy g(y−a): sign from moving the 2-form past α
        let yf = FourierForm::monomial(torus, *mask, mode, C64::new(1.0, 0.0));
        let iy = yf
            .wedge(&beta)
            .ok()
            .and_then(|f| f.integrate().ok())
            .unwrap_or_else(C64::zero);
        let deg_a = alpha.degree().unwrap_or(0);
        let sign = if (2 * deg_a) % 2 == 0 { 1.0 } else { -1.0 };
        lhs -= *c * e_at_a * ia * iy * sign;
    }

    // right side: δ_Δ − (δ_{a×X} + δ_{X×a} + Casimir)
    let diag = alpha
        .wedge(&beta)
        .map(|f| f.integrate().unwrap_or_else(|_| C64::zero()))
        .unwrap_or_else(|_| C64::zero());
    let delta_prop = Propagator {
        torus: torus.clone(),
        mu: MuChoice::DeltaPoint(a.to_vec()),
        truncation: volume_prop.truncation,
        gamma: volume_prop.gamma.clone(),
        log_coefficient: volume_prop.log_coefficient,
    };
    let phar = pair_projector_with_product(&delta_prop, &alpha, &beta);
    lhs - (diag - phar)
}
