//! The cyclic tensor envelope with Koszul signs: canonical rotations, the
//! weighted projection, shuffle generators, the cyclic-homology differential,
//! noncommutative partial derivatives and the Lie cobracket.

use crate::algebra::PDAlgebra;
use crate::scalar::Scalar;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Homology,
    Cohomology,
}

/// The letters of words: a graded alphabet drawn from an algebra's basis.
/// `degs` are shifted degrees (deg−1 on the form side, 1−deg on the homology
/// side), which drive every Koszul sign below.
#[derive(Clone, Debug)]
pub struct Alphabet {
    pub side: Side,
    pub labels: Vec<String>,
    pub degs: Vec<i64>,
    /// Position of each letter in the parent algebra's basis.
    pub algebra_index: Vec<usize>,
}

impl Alphabet {
    fn from_indices<S: Scalar>(alg: &PDAlgebra<S>, side: Side, idx: &[usize]) -> Self {
        Alphabet {
            side,
            labels: idx.iter().map(|&i| alg.basis[i].label.clone()).collect(),
            degs: idx
                .iter()
                .map(|&i| match side {
                    Side::Cohomology => alg.basis[i].shifted_form_deg(),
                    Side::Homology => alg.basis[i].shifted_hom_deg(),
                })
                .collect(),
            algebra_index: idx.to_vec(),
        }
    }

    /// Letters dual to the reduced basis (0 < deg < 2n).
    pub fn reduced<S: Scalar>(alg: &PDAlgebra<S>, side: Side) -> Self {
        Self::from_indices(alg, side, alg.reduced_basis())
    }

    /// Reduced letters plus the top class (the H̃ variant on the homology side).
    pub fn tilde<S: Scalar>(alg: &PDAlgebra<S>, side: Side) -> Self {
        let mut idx = alg.reduced_basis().to_vec();
        let top = (0..alg.dim())
            .find(|&i| alg.basis[i].deg() == 2 * alg.n)
            .expect("top class");
        idx.push(top);
        Self::from_indices(alg, side, &idx)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn deg_of_word(&self, letters: &[usize]) -> i64 {
        letters.iter().map(|&l| self.degs[l]).sum()
    }

    pub fn letter_of_algebra_index(&self, i: usize) -> Option<usize> {
        self.algebra_index.iter().position(|&j| j == i)
    }
}

/// Rotating the last letter to the front costs (−1)^(deg(last)·Σ deg(rest)).
fn rotate_right(letters: &mut Vec<usize>, degs: &[i64]) -> i64 {
    let last = letters.pop().expect("nonempty word");
    let s = degs[last] * letters.iter().map(|&l| degs[l]).sum::<i64>();
    letters.insert(0, last);
    if s % 2 == 0 {
        1
    } else {
        -1
    }
}

/// All rotations of a word with cumulative Koszul signs, starting from the
/// word itself with sign +1.
pub fn rotations(letters: &[usize], degs: &[i64]) -> Vec<(Vec<usize>, i64)> {
    let mut out = Vec::with_capacity(letters.len());
    let mut cur = letters.to_vec();
    let mut sign = 1i64;
    for _ in 0..letters.len() {
        out.push((cur.clone(), sign));
        sign *= rotate_right(&mut cur, degs);
    }
    out
}

/// Canonical rotation: lexicographically minimal letter sequence, its Koszul
/// sign folded out. Returns None when the word is killed by a sign-reversing
/// self-rotation.
pub fn canonical_form(letters: &[usize], degs: &[i64]) -> Option<(Vec<usize>, i64)> {
    assert!(!letters.is_empty());
    let rots = rotations(letters, degs);
    let min = rots.iter().map(|(w, _)| w.clone()).min().unwrap();
    let mut sign = 0i64;
    for (w, s) in &rots {
        if *w == min {
            if sign == 0 {
                sign = *s;
            } else if sign != *s {
                return None;
            }
        }
    }
    Some((min, sign))
}

/// Order of the rotation stabilizer of a (nonzero, canonical) word.
pub fn aut_order(letters: &[usize], degs: &[i64]) -> usize {
    rotations(letters, degs).iter().filter(|(w, _)| w == letters).count()
}

/// Exact linear combination of canonical cyclic words over one alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclicChain<S> {
    pub terms: BTreeMap<Vec<usize>, S>,
    /// Tensored with the (even) shifted fundamental class or its dual.
    pub h_factor: bool,
}

impl<S: Scalar> CyclicChain<S> {
    pub fn zero(h_factor: bool) -> Self {
        CyclicChain { terms: BTreeMap::new(), h_factor }
    }

    pub fn add_word(&mut self, letters: &[usize], coeff: S, degs: &[i64]) {
        if coeff.is_zero() {
            return;
        }
        if let Some((canon, sign)) = canonical_form(letters, degs) {
            let c = if sign < 0 { S::zero() - coeff } else { coeff };
            let entry = self.terms.entry(canon.clone()).or_insert_with(S::zero);
            *entry = entry.clone() + c;
            if entry.is_zero() {
                self.terms.remove(&canon);
            }
        }
    }

    pub fn add_chain(&mut self, other: &CyclicChain<S>) {
        assert_eq!(self.h_factor, other.h_factor);
        for (w, c) in &other.terms {
            let entry = self.terms.entry(w.clone()).or_insert_with(S::zero);
            *entry = entry.clone() + c.clone();
        }
        self.terms.retain(|_, v| !v.is_zero());
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return CyclicChain::zero(self.h_factor);
        }
        CyclicChain {
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c.clone() * s.clone())).collect(),
            h_factor: self.h_factor,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Word-degree of a homogeneous chain (panics when mixed).
    pub fn degree(&self, degs: &[i64]) -> Option<i64> {
        let mut it = self.terms.keys().map(|w| w.iter().map(|&l| degs[l]).sum::<i64>());
        let first = it.next()?;
        assert!(it.all(|d| d == first), "chain is not degree-homogeneous");
        Some(first)
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> CyclicChain<T> {
        CyclicChain {
            terms: self
                .terms
                .iter()
                .map(|(w, c)| (w.clone(), f(c)))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
            h_factor: self.h_factor,
        }
    }
}

/// Plain ordered tensor words (no cyclic identification).
#[derive(Clone, Debug, PartialEq)]
pub struct TensorChain<S> {
    pub terms: BTreeMap<Vec<usize>, S>,
}

impl<S: Scalar> TensorChain<S> {
    pub fn zero() -> Self {
        TensorChain { terms: BTreeMap::new() }
    }

    pub fn from_word(letters: &[usize], coeff: S) -> Self {
        let mut t = TensorChain::zero();
        t.add_word(letters, coeff);
        t
    }

    pub fn add_word(&mut self, letters: &[usize], coeff: S) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(letters.to_vec()).or_insert_with(S::zero);
        *entry = entry.clone() + coeff;
        if entry.is_zero() {
            self.terms.remove(letters);
        }
    }

    pub fn add_chain(&mut self, other: &TensorChain<S>) {
        for (w, c) in &other.terms {
            self.add_word(w, c.clone());
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return TensorChain::zero();
        }
        TensorChain {
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c.clone() * s.clone())).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Concatenation product.
    pub fn concat(&self, other: &TensorChain<S>) -> TensorChain<S> {
        let mut out = TensorChain::zero();
        for (u, cu) in &self.terms {
            for (v, cv) in &other.terms {
                let mut w = u.clone();
                w.extend_from_slice(v);
                out.add_word(&w, cu.clone() * cv.clone());
            }
        }
        out
    }

    /// Graded commutator [a, b] = ab − (−1)^{|a||b|} ba.
    pub fn graded_bracket(&self, other: &TensorChain<S>, degs: &[i64]) -> TensorChain<S> {
        let mut out = TensorChain::zero();
        for (u, cu) in &self.terms {
            let du: i64 = u.iter().map(|&l| degs[l]).sum();
            for (v, cv) in &other.terms {
                let dv: i64 = v.iter().map(|&l| degs[l]).sum();
                let mut w = u.clone();
                w.extend_from_slice(v);
                out.add_word(&w, cu.clone() * cv.clone());
                let mut w2 = v.clone();
                w2.extend_from_slice(u);
                let sign = if (du * dv) % 2 == 0 { S::one() } else { S::zero() - S::one() };
                out.add_word(&w2, S::zero() - sign * cu.clone() * cv.clone());
            }
        }
        out
    }

    /// Projects every word to the cyclic envelope (unweighted).
    pub fn cyclic_projection(&self, degs: &[i64], h_factor: bool) -> CyclicChain<S> {
        let mut out = CyclicChain::zero(h_factor);
        for (w, c) in &self.terms {
            out.add_word(w, c.clone(), degs);
        }
        out
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TensorChain<T> {
        TensorChain {
            terms: self
                .terms
                .iter()
                .map(|(w, c)| (w.clone(), f(c)))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
        }
    }
}

/// Weighted projection: the class of `letters` with coefficient 1/|Aut(W)|.
pub fn cyclic_project<S: Scalar>(
    letters: &[usize],
    degs: &[i64],
    weighted: bool,
    h_factor: bool,
) -> CyclicChain<S> {
    let mut out = CyclicChain::zero(h_factor);
    let Some((canon, sign)) = canonical_form(letters, degs) else {
        return out;
    };
    let coeff = if weighted {
        let aut = aut_order(&canon, degs) as i64;
        S::from_ratio(sign, aut)
    } else {
        S::from_i64(sign)
    };
    out.terms.insert(canon, coeff);
    out
}

/// Σ over (p,q)-shuffles of (v0 ⊗ shuffled letters) with Koszul signs.
pub fn shuffle_generators<S: Scalar>(
    v0: usize,
    left: &[usize],
    right: &[usize],
    degs: &[i64],
) -> CyclicChain<S> {
    assert!(!left.is_empty() && !right.is_empty());
    let p = left.len();
    let q = right.len();
    let mut out = CyclicChain::zero(false);
    // choose the positions of the left block among p+q slots
    let mut positions: Vec<usize> = (0..p).collect();
    loop {
        // build the arrangement and its Koszul sign
        let mut word = Vec::with_capacity(p + q + 1);
        word.push(v0);
        let mut arrangement = vec![usize::MAX; p + q];
        for (i, &pos) in positions.iter().enumerate() {
            arrangement[pos] = left[i];
        }
        let mut ri = 0;
        for slot in arrangement.iter_mut() {
            if *slot == usize::MAX {
                *slot = right[ri];
                ri += 1;
            }
        }
        // sign: count crossings (right letter placed before a left letter)
        let mut exp = 0i64;
        for (i, &pos) in positions.iter().enumerate() {
            // right letters occupying slots before pos that are "later" in the
            // base order l..l r..r: each contributes deg(l_i)·deg(r_j)
            let mut passed = 0;
            for s in 0..pos {
                if !positions.contains(&s) {
                    passed += 1;
                }
            }
            for j in 0..passed {
                exp += degs[left[i]] * degs[right[j]];
            }
        }
        word.extend_from_slice(&arrangement);
        let sign = if exp % 2 == 0 { 1 } else { -1 };
        out.add_word(&word, S::from_i64(sign), degs);

        // next combination
        let mut t = p;
        while t > 0 && positions[t - 1] == p + q - (p - t) - 1 {
            t -= 1;
        }
        if t == 0 {
            break;
        }
        positions[t - 1] += 1;
        for j in t..p {
            positions[j] = positions[j - 1] + 1;
        }
    }
    out
}

/// The cyclic-homology differential on the cohomology side: sum over signed
/// cyclic shifts of merging the last two letters by the reduced cup product.
pub fn cyclic_delta<S: Scalar>(
    chain: &CyclicChain<S>,
    alg: &PDAlgebra<S>,
    alphabet: &Alphabet,
) -> CyclicChain<S> {
    assert_eq!(alphabet.side, Side::Cohomology);
    let degs = &alphabet.degs;
    let mut out = CyclicChain::zero(chain.h_factor);
    for (word, coeff) in &chain.terms {
        if word.len() < 2 {
            continue;
        }
        for (rot, rsign) in rotations(word, degs) {
            let m = rot.len();
            let last = rot[m - 1];
            let prev = rot[m - 2];
            let tail_sign = if degs[last] % 2 == 0 { 1 } else { -1 };
            let prod = alg.mul_sparse(
                &[(alphabet.algebra_index[prev], S::one())],
                &[(alphabet.algebra_index[last], S::one())],
            );
            for (k, ck) in prod {
                // truncate to the reduced range
                let Some(letter) = alphabet.letter_of_algebra_index(k) else {
                    continue;
                };
                if alg.basis[k].deg() == 0 || alg.basis[k].deg() == 2 * alg.n {
                    continue;
                }
                let mut new_word = rot[..m - 2].to_vec();
                new_word.push(letter);
                let c = coeff.clone() * S::from_i64(rsign * tail_sign) * ck;
                out.add_word(&new_word, c, degs);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeSide {
    Right,
    Left,
}

/// Noncommutative partial derivative ∂_p (right) or ∂_p⁻ (left): sum over
/// signed rotations ending (resp. starting) with the letter p, with p removed.
pub fn ncpd<S: Scalar>(
    chain: &CyclicChain<S>,
    p: usize,
    side: DerivativeSide,
    degs: &[i64],
) -> TensorChain<S> {
    let mut out = TensorChain::zero();
    for (word, coeff) in &chain.terms {
        for (rot, rsign) in rotations(word, degs) {
            match side {
                DerivativeSide::Right => {
                    if *rot.last().unwrap() == p {
                        out.add_word(&rot[..rot.len() - 1], coeff.clone() * S::from_i64(rsign));
                    }
                }
                DerivativeSide::Left => {
                    if rot[0] == p {
                        out.add_word(&rot[1..], coeff.clone() * S::from_i64(rsign));
                    }
                }
            }
        }
    }
    out
}

/// One term of a cobracket: coefficient · (first piece ⊗ second piece).
pub type CobracketTerms<S> = Vec<(S, Vec<usize>, Vec<usize>)>;

/// Lie cobracket on the cohomology side: cut the cyclic word into two
/// nonempty arcs and insert the Casimir element Σ_s α_s^∨ ⊗ α_s, one factor
/// per piece. The sign rule is pinned by duality with the bracket.
pub fn cobracket<S: Scalar>(
    chain: &CyclicChain<S>,
    alg: &PDAlgebra<S>,
    alphabet: &Alphabet,
) -> CobracketTerms<S> {
    assert_eq!(alphabet.side, Side::Cohomology);
    let degs = &alphabet.degs;
    let dual = alg.dual_basis();
    let mut raw: BTreeMap<(Vec<usize>, Vec<usize>), S> = BTreeMap::new();
    for (word, coeff) in &chain.terms {
        let m = word.len();
        if m < 2 {
            continue;
        }
        for (rot, rsign) in rotations(word, degs) {
            // cut after position a-1: arc A = rot[..a], arc B = rot[a..]
            for a in 1..m {
                let arc_a = &rot[..a];
                let arc_b = &rot[a..];
                let deg_a: i64 = arc_a.iter().map(|&l| degs[l]).sum();
                let deg_b: i64 = arc_b.iter().map(|&l| degs[l]).sum();
                for (s, &alg_s) in alphabet.algebra_index.iter().enumerate() {
                    // piece2 gets the letter α_s, piece1 gets α_s^∨ expanded
                    for (k, ck) in dual[alg_s].iter().enumerate() {
                        if ck.is_zero() {
                            continue;
                        }
                        let Some(ins_a) = alphabet.letter_of_algebra_index(k) else {
                            continue;
                        };
                        // Koszul rule pinned by duality with the bracket
                        let exp = degs[ins_a] * deg_a + deg_a * deg_b;
                        let sign = if exp % 2 == 0 { 1 } else { -1 };
                        let mut w1 = arc_a.to_vec();
                        w1.push(ins_a);
                        let mut w2 = arc_b.to_vec();
                        w2.push(s);
                        let Some((c1, s1)) = canonical_form(&w1, degs) else {
                            continue;
                        };
                        let Some((c2, s2)) = canonical_form(&w2, degs) else {
                            continue;
                        };
                        let total = coeff.clone()
                            * ck.clone()
                            * S::from_i64(rsign * sign * s1 * s2);
                        // each cut is seen twice around the rotation sum: once
                        // as (A,B) and once as (B,A); keep both, they are the
                        // two tensor factors' orders.
                        let e = raw.entry((c1.clone(), c2.clone())).or_insert_with(S::zero);
                        *e = e.clone() + total;
                    }
                }
            }
        }
    }
    raw.into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((w1, w2), c)| (c, w1, w2))
        .collect()
}

/// Graded pairing of a homology-side and a cohomology-side cyclic word over
/// the same algebra: sum over rotations of the homology word of letterwise
/// dual-basis evaluation with Koszul signs.
pub fn pair_words<S: Scalar>(
    hom: &[usize],
    coh: &[usize],
    hom_ab: &Alphabet,
    coh_ab: &Alphabet,
) -> S {
    if hom.len() != coh.len() {
        return S::zero();
    }
    let mut acc = S::zero();
    for (rot, rsign) in rotations(hom, &hom_ab.degs) {
        if rot
            .iter()
            .zip(coh.iter())
            .all(|(&h, &c)| hom_ab.algebra_index[h] == coh_ab.algebra_index[c])
        {
            // evaluation Koszul sign: (−1)^{Σ_{i<j} |y_i||x_j|}
            let mut exp = 0i64;
            for j in 1..rot.len() {
                for i in 0..j {
                    exp += coh_ab.degs[coh[i]] * hom_ab.degs[rot[j]];
                }
            }
            let sign = if exp % 2 == 0 { 1 } else { -1 };
            acc = acc + S::from_i64(rsign * sign);
        }
    }
    acc
}

/// Pairing extended to chains: ⟨hom chain, coh chain⟩.
pub fn pair_chains<S: Scalar>(
    hom: &CyclicChain<S>,
    coh: &CyclicChain<S>,
    hom_ab: &Alphabet,
    coh_ab: &Alphabet,
) -> S {
    let mut acc = S::zero();
    for (hw, hc) in &hom.terms {
        for (cw, cc) in &coh.terms {
            let p: S = pair_words(hw, cw, hom_ab, coh_ab);
            if !p.is_zero() {
                acc = acc + hc.clone() * cc.clone() * p;
            }
        }
    }
    acc
}
