//! The polydifferential operators ω, ξ, η as exact combinatorial expansions:
//! symmetrized assignments of {id, ∂, ∂̄} to input slots, with the Koszul
//! symmetrization signs computed in shifted degrees at application time.

use crate::forms::{FormError, FourierForm};
use crate::scalar::{Rat, Scalar};
use num::Zero;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotOp {
    Id,
    Del,
    DelBar,
}

/// One collected term: apply `ops[j]` to input `inputs[j]` and wedge in this
/// order, times the exact coefficient and the Koszul sign of the input
/// permutation (computed against shifted degrees when applied).
#[derive(Clone, Debug)]
pub struct OperatorTerm {
    pub coeff: Rat,
    pub inputs: Vec<usize>,
    pub ops: Vec<SlotOp>,
}

#[derive(Clone, Debug)]
pub struct OperatorTermList {
    pub arity: usize,
    pub terms: Vec<OperatorTerm>,
}

fn subsets(of: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &x in of {
        let mut more = out.clone();
        for s in more.iter_mut() {
            s.push(x);
        }
        out.extend(more);
    }
    out
}

/// ω(φ₀,…,φ_m) = 1/(m+1)!·Sym Σ_k (−1)^k φ₀∧∂φ₁∧…∧∂φ_k∧∂̄φ_{k+1}∧…∧∂̄φ_m,
/// collected over (id slot, ∂-subset): coefficient (−1)^{|S|}/((m+1)·C(m,|S|)).
pub fn expand_omega(m: usize) -> OperatorTermList {
    let mut terms = Vec::new();
    for i in 0..=m {
        let rest: Vec<usize> = (0..=m).filter(|&l| l != i).collect();
        for s in subsets(&rest) {
            let k = s.len();
            let binom = binomial(m, k);
            let coeff = Rat::from_ratio(
                if k % 2 == 0 { 1 } else { -1 },
                ((m + 1) as i64) * binom,
            );
            let mut inputs = vec![i];
            let mut ops = vec![SlotOp::Id];
            for &l in &rest {
                inputs.push(l);
                ops.push(if s.contains(&l) { SlotOp::Del } else { SlotOp::DelBar });
            }
            terms.push(OperatorTerm { coeff, inputs, ops });
        }
    }
    OperatorTermList { arity: m + 1, terms }
}

/// ξ(φ₀,…,φ_m) = 1/(m+1)!·Sym(φ₀ ∧ d^Cφ₁ ∧ … ∧ d^Cφ_m), collected the same
/// way: coefficient (−1)^{m−|S|}/(m+1), the binomial pattern of the d^C
/// expansion.
pub fn expand_xi(m: usize) -> OperatorTermList {
    let mut terms = Vec::new();
    for i in 0..=m {
        let rest: Vec<usize> = (0..=m).filter(|&l| l != i).collect();
        for s in subsets(&rest) {
            let k = s.len();
            let coeff =
                Rat::from_ratio(if (m - k) % 2 == 0 { 1 } else { -1 }, (m + 1) as i64);
            let mut inputs = vec![i];
            let mut ops = vec![SlotOp::Id];
            for &l in &rest {
                inputs.push(l);
                ops.push(if s.contains(&l) { SlotOp::Del } else { SlotOp::DelBar });
            }
            terms.push(OperatorTerm { coeff, inputs, ops });
        }
    }
    OperatorTermList { arity: m + 1, terms }
}

/// η(φ₀,…,φ_m) = d^Cφ₀ ∧ … ∧ d^Cφ_m (already symmetric): every summand of
/// the 2^{m+1} expansion appears with coefficient ±1.
pub fn expand_eta(m: usize) -> OperatorTermList {
    let all: Vec<usize> = (0..=m).collect();
    let mut terms = Vec::new();
    for s in subsets(&all) {
        let bars = m + 1 - s.len();
        let coeff = Rat::from_i64(if bars % 2 == 0 { 1 } else { -1 });
        let ops = (0..=m)
            .map(|l| if s.contains(&l) { SlotOp::Del } else { SlotOp::DelBar })
            .collect();
        terms.push(OperatorTerm { coeff, inputs: all.clone(), ops });
    }
    OperatorTermList { arity: m + 1, terms }
}

fn binomial(n: usize, k: usize) -> i64 {
    let mut r = 1i64;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

/// Koszul sign of the permutation in shifted degrees (deg + 1).
fn permutation_koszul_sign(inputs: &[usize], shifted_degs: &[i64]) -> f64 {
    let mut exp = 0i64;
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            if inputs[i] > inputs[j] {
                exp += shifted_degs[inputs[i]] * shifted_degs[inputs[j]];
            }
        }
    }
    if exp % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Applies the collected operator to forms on a common torus.
pub fn apply_termlist(
    ops: &OperatorTermList,
    forms: &[FourierForm],
) -> Result<FourierForm, FormError> {
    assert_eq!(forms.len(), ops.arity);
    let torus = &forms[0].torus;
    let shifted: Vec<i64> = forms
        .iter()
        .map(|f| f.degree().map(|d| d as i64 + 1).unwrap_or(1))
        .collect();
    let mut out = FourierForm::zero(torus);
    for term in &ops.terms {
        let sign = permutation_koszul_sign(&term.inputs, &shifted);
        let mut acc: Option<FourierForm> = None;
        for (&input, &op) in term.inputs.iter().zip(&term.ops) {
            let factor = match op {
                SlotOp::Id => forms[input].clone(),
                SlotOp::Del => forms[input].del(),
                SlotOp::DelBar => forms[input].del_bar(),
            };
            acc = Some(match acc {
                None => factor,
                Some(a) => a.wedge(&factor)?,
            });
        }
        let contribution = acc
            .expect("arity ≥ 1")
            .scale(crate::scalar::C64::new(sign, 0.0) * term.coeff.to_c64());
        out = out.add(&contribution);
    }
    Ok(out)
}

/// Collected ξ coefficients per ∂-count k, in the 1/(m+1)!·Sym normalization:
/// the (−1)-alternating binomial pattern C(m, k).
pub fn xi_binomial_coefficients(m: usize) -> Vec<Rat> {
    let list = expand_xi(m);
    let mut out = vec![Rat::zero(); m + 1];
    for term in &list.terms {
        if term.inputs[0] != 0 {
            continue;
        }
        let k = term.ops.iter().filter(|&&o| o == SlotOp::Del).count();
        out[k] = out[k].clone() + term.coeff.clone() * Rat::from_i64((m + 1) as i64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{random_form, FourierForm, Torus};
    use crate::scalar::C64;
    use rand::SeedableRng;

    fn torus() -> Torus {
        Torus::elliptic(C64::new(0.25, 1.2))
    }

    fn rel_norm(a: &FourierForm, b: &FourierForm) -> f64 {
        let diff = a.add(&b.scale(C64::new(-1.0, 0.0)));
        let scale = a.coeff_norm().max(b.coeff_norm()).max(1e-30);
        diff.coeff_norm() / scale
    }

    #[test]
    fn omega_arity_one_is_identity() {
        let list = expand_omega(0);
        assert_eq!(list.terms.len(), 1);
        assert_eq!(list.terms[0].coeff, Rat::from_i64(1));
        assert_eq!(list.terms[0].ops, vec![SlotOp::Id]);
        let t = torus();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let f = random_form(&t, &[0b00, 0b01], 4, &mut rng);
        let out = apply_termlist(&list, &[f.clone()]).unwrap();
        assert!(rel_norm(&out, &f) < 1e-14);
    }

    #[test]
    fn omega_arity_two_is_minus_xi() {
        let t = torus();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let f0 = random_form(&t, &[0b00], 5, &mut rng);
        let f1 = random_form(&t, &[0b00], 5, &mut rng);
        let om = apply_termlist(&expand_omega(1), &[f0.clone(), f1.clone()]).unwrap();
        let xi = apply_termlist(&expand_xi(1), &[f0, f1]).unwrap();
        assert!(rel_norm(&om, &xi.scale(C64::new(-1.0, 0.0))) < 1e-13);
    }

    #[test]
    fn eta_summands_are_plus_minus_one() {
        let list = expand_eta(2);
        assert_eq!(list.terms.len(), 8);
        for t in &list.terms {
            assert!(t.coeff == Rat::from_i64(1) || t.coeff == Rat::from_i64(-1));
        }
    }

    #[test]
    fn xi_coefficients_follow_binomial_pattern() {
        for m in 0..=6 {
            let coeffs = xi_binomial_coefficients(m);
            for (k, c) in coeffs.iter().enumerate() {
                // alternating in k, magnitude C(m,k), all-∂ term positive
                let expect = Rat::from_i64(if (m - k) % 2 == 0 { 1 } else { -1 })
                    * Rat::from_i64(binomial(m, k));
                assert_eq!(c, &expect, "m={m}, k={k}");
            }
        }
    }

    #[test]
    fn dc_xi_equals_eta() {
        let t = torus();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for m in 1..=3usize {
            let forms: Vec<FourierForm> =
                (0..=m).map(|_| random_form(&t, &[0b00], 6, &mut rng)).collect();
            let xi = apply_termlist(&expand_xi(m), &forms).unwrap();
            let eta = apply_termlist(&expand_eta(m), &forms).unwrap();
            assert!(rel_norm(&xi.dc(), &eta) < 1e-12, "m={m}");
        }
    }

    #[test]
    fn d_omega_identity() {
        // dω(φ₀..φ_m) = (−1)^m ∂φ₀∧…∧∂φ_m + ∂̄φ₀∧…∧∂̄φ_m
        //               + 1/m!·Sym((−1)^{deg φ₀} ∂̄∂φ₀ ∧ ω(φ₁..φ_m))
        let t = torus();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for m in 1..=3usize {
            let forms: Vec<FourierForm> =
                (0..=m).map(|_| random_form(&t, &[0b00], 5, &mut rng)).collect();
            let lhs = apply_termlist(&expand_omega(m), &forms).unwrap().d();

            let wedge_all = |op: &dyn Fn(&FourierForm) -> FourierForm| -> FourierForm {
                let mut acc = op(&forms[0]);
                for f in &forms[1..] {
                    acc = acc.wedge(&op(f)).unwrap();
                }
                acc
            };
            let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mut rhs = wedge_all(&|f| f.del()).scale(C64::new(sign_m, 0.0));
            rhs = rhs.add(&wedge_all(&|f| f.del_bar()));

            // correction: Σ_i κ_i (−1)^{deg φ_i} ∂̄∂φ_i ∧ ω(others)
            let shifted: Vec<i64> =
                forms.iter().map(|f| f.degree().map(|d| d as i64 + 1).unwrap_or(1)).collect();
            let omega_rest = expand_omega(m - 1);
            for i in 0..=m {
                let others: Vec<FourierForm> = (0..=m)
                    .filter(|&l| l != i)
                    .map(|l| forms[l].clone())
                    .collect();
                let inner = apply_termlist(&omega_rest, &others).unwrap();
                let mut inputs = vec![i];
                inputs.extend((0..=m).filter(|&l| l != i));
                let kappa = super::permutation_koszul_sign(&inputs, &shifted);
                let deg0 = forms[i].degree().unwrap_or(0) as i64;
                let sg = if deg0 % 2 == 0 { 1.0 } else { -1.0 };
                // .del().del_bar() applies ∂ then ∂̄, i.e. the operator ∂̄∂
                let corr = forms[i].del().del_bar().scale(C64::new(kappa * sg, 0.0));
                rhs = rhs.add(&corr.wedge(&inner).unwrap());
            }
            assert!(rel_norm(&lhs, &rhs) < 1e-11, "m={m}");
        }
    }

    #[test]
    fn sym_sign_rule_on_transposition() {
        let t = torus();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        // degree-0 and degree-1 inputs: swapping multiplies by
        // (−1)^{(deg+1)(deg+1)}
        let f0 = random_form(&t, &[0b00], 4, &mut rng);
        let f1 = random_form(&t, &[0b01], 4, &mut rng);
        let f2 = random_form(&t, &[0b00], 4, &mut rng);
        let list = expand_omega(2);
        let a = apply_termlist(&list, &[f0.clone(), f1.clone(), f2.clone()]).unwrap();
        let b = apply_termlist(&list, &[f1, f0, f2]).unwrap();
        // (deg0+1)(deg1+1) = 1·2 = even: symmetric
        assert!(rel_norm(&a, &b) < 1e-12);
        // two odd-shifted inputs anticommute
        let g0 = random_form(&t, &[0b00], 4, &mut rng);
        let g1 = random_form(&t, &[0b00], 4, &mut rng);
        let h = random_form(&t, &[0b01], 4, &mut rng);
        let list = expand_xi(2);
        let a = apply_termlist(&list, &[g0.clone(), g1.clone(), h.clone()]).unwrap();
        let b = apply_termlist(&list, &[g1, g0, h]).unwrap();
        assert!(rel_norm(&a, &b.scale(C64::new(-1.0, 0.0))) < 1e-12);
    }
}
