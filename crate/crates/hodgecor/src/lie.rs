//! Free graded Lie algebras on the shifted homology of a model, derivations,
//! the θ-map from cyclic words to special derivations, the bracket and the
//! canonical element Δ on cyclic chains, the differential δ = {Δ,·}, and
//! homology of the resulting complexes.

use crate::algebra::PDAlgebra;
use crate::cyclic::{
    canonical_form, ncpd, rotations, Alphabet, CyclicChain, DerivativeSide, Side, TensorChain,
};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use std::collections::BTreeMap;

// ---------------------------------------------------------------------------
// Lyndon machinery

/// Basis key of the free graded Lie algebra: a Lyndon word, or the square
/// [w, w] of an odd-degree Lyndon word.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LyndonKey {
    pub word: Vec<usize>,
    pub squared: bool,
}

fn is_lyndon(w: &[usize]) -> bool {
    let n = w.len();
    for r in 1..n {
        let rot: Vec<usize> = w[r..].iter().chain(w[..r].iter()).copied().collect();
        if rot <= w.to_vec() {
            return false;
        }
    }
    n >= 1
}

fn lyndon_words(alphabet_size: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut w = vec![0usize; len];
    loop {
        if is_lyndon(&w) {
            out.push(w.clone());
        }
        let mut i = len;
        while i > 0 && w[i - 1] == alphabet_size - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        w[i - 1] += 1;
        for j in i..len {
            w[j] = 0;
        }
    }
    out.sort();
    out
}

/// Standard factorization w = u·v with v the longest proper Lyndon suffix.
fn standard_factorization(w: &[usize]) -> (Vec<usize>, Vec<usize>) {
    assert!(w.len() >= 2);
    for split in 1..w.len() {
        if is_lyndon(&w[split..]) {
            return (w[..split].to_vec(), w[split..].to_vec());
        }
    }
    unreachable!("every Lyndon word of length ≥ 2 factors")
}

/// Expansion of the bracketed key into tensor words.
fn expand_key<S: Scalar>(key: &LyndonKey, degs: &[i64]) -> TensorChain<S> {
    fn expand_lyndon<S: Scalar>(w: &[usize], degs: &[i64]) -> TensorChain<S> {
        if w.len() == 1 {
            return TensorChain::from_word(w, S::one());
        }
        let (u, v) = standard_factorization(w);
        let eu = expand_lyndon::<S>(&u, degs);
        let ev = expand_lyndon::<S>(&v, degs);
        eu.graded_bracket(&ev, degs)
    }
    let base = expand_lyndon::<S>(&key.word, degs);
    if key.squared {
        base.graded_bracket(&base, degs)
    } else {
        base
    }
}

fn word_deg(w: &[usize], degs: &[i64]) -> i64 {
    w.iter().map(|&l| degs[l]).sum()
}

/// One weight slice of the free graded Lie algebra: a super-Lyndon basis with
/// tensor expansions and exact change-of-basis both ways.
pub struct LieSlice<S> {
    pub weight: usize,
    pub keys: Vec<LyndonKey>,
    pub expansions: Vec<TensorChain<S>>,
    word_index: BTreeMap<Vec<usize>, usize>,
    /// matrix: rows = tensor words of the slice, cols = keys
    matrix: Mat<S>,
}

impl<S: Scalar> LieSlice<S> {
    pub fn new(alphabet: &Alphabet, weight: usize) -> Self {
        assert!(weight >= 1);
        let degs = &alphabet.degs;
        let mut keys: Vec<LyndonKey> = lyndon_words(alphabet.len(), weight)
            .into_iter()
            .map(|word| LyndonKey { word, squared: false })
            .collect();
        if weight % 2 == 0 {
            for w in lyndon_words(alphabet.len(), weight / 2) {
                if word_deg(&w, degs) % 2 != 0 {
                    keys.push(LyndonKey { word: w, squared: true });
                }
            }
        }
        keys.sort();
        let expansions: Vec<TensorChain<S>> =
            keys.iter().map(|k| expand_key(k, degs)).collect();
        // drop keys whose expansion vanished (odd squares can collapse)
        let (keys, expansions): (Vec<_>, Vec<_>) = keys
            .into_iter()
            .zip(expansions)
            .filter(|(_, e)| !e.is_zero())
            .unzip();
        let mut word_index = BTreeMap::new();
        for e in &expansions {
            for w in e.terms.keys() {
                let next = word_index.len();
                word_index.entry(w.clone()).or_insert(next);
            }
        }
        let mut matrix = Mat::zeros(word_index.len(), keys.len());
        for (j, e) in expansions.iter().enumerate() {
            for (w, c) in &e.terms {
                matrix[(word_index[w], j)] = c.clone();
            }
        }
        let slice = LieSlice { weight, keys, expansions, word_index, matrix };
        debug_assert_eq!(slice.matrix.rank(), slice.keys.len(), "Lyndon basis independent");
        slice
    }

    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    /// Coordinates of a tensor chain in the Lyndon basis; None when the chain
    /// is not in the Lie subspace.
    pub fn from_tensor(&self, chain: &TensorChain<S>) -> Option<Vec<S>> {
        let mut rhs = vec![S::zero(); self.word_index.len()];
        for (w, c) in &chain.terms {
            let &i = self.word_index.get(w)?;
            rhs[i] = c.clone();
        }
        let x = self.matrix.solve(&rhs)?;
        // solve() ignores rows beyond rank; verify the residual
        let back = self.matrix.mul_vec(&x);
        if back != rhs {
            return None;
        }
        Some(x)
    }
}

/// The reduced coshuffle coproduct vanishes exactly on Lie elements.
pub fn is_primitive<S: Scalar>(chain: &TensorChain<S>, degs: &[i64]) -> bool {
    // Σ over proper subsets S of positions: ±(letters at S) ⊗ (rest)
    let mut acc: BTreeMap<(Vec<usize>, Vec<usize>), S> = BTreeMap::new();
    for (word, coeff) in &chain.terms {
        let m = word.len();
        for mask in 1..(1u64 << m) - 1 {
            let mut left = Vec::new();
            let mut right = Vec::new();
            let mut exp = 0i64;
            let mut right_deg_before = 0i64;
            for (i, &l) in word.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    left.push(l);
                    exp += degs[l] * right_deg_before;
                } else {
                    right.push(l);
                    right_deg_before += degs[l];
                }
            }
            let sign = if exp % 2 == 0 { S::one() } else { S::zero() - S::one() };
            let e = acc.entry((left, right)).or_insert_with(S::zero);
            *e = e.clone() + coeff.clone() * sign;
        }
    }
    acc.values().all(|v| v.is_zero())
}

// ---------------------------------------------------------------------------
// derivations

/// Degree-graded derivation of the tensor algebra on an alphabet, stored by
/// generator images.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation<S> {
    pub images: Vec<TensorChain<S>>,
    pub degree: i64,
}

impl<S: Scalar> Derivation<S> {
    pub fn zero(alphabet_len: usize, degree: i64) -> Self {
        Derivation { images: vec![TensorChain::zero(); alphabet_len], degree }
    }

    pub fn is_zero(&self) -> bool {
        self.images.iter().all(|im| im.is_zero())
    }

    pub fn add(&self, other: &Derivation<S>) -> Derivation<S> {
        if !self.is_zero() && !other.is_zero() {
            assert_eq!(self.degree, other.degree);
        }
        let images = self
            .images
            .iter()
            .zip(&other.images)
            .map(|(a, b)| {
                let mut c = a.clone();
                c.add_chain(b);
                c
            })
            .collect();
        Derivation { images, degree: self.degree }
    }

    pub fn scale(&self, s: &S) -> Derivation<S> {
        Derivation {
            images: self.images.iter().map(|im| im.scale(s)).collect(),
            degree: self.degree,
        }
    }

    /// Graded Leibniz extension to tensor chains.
    pub fn apply(&self, chain: &TensorChain<S>, degs: &[i64]) -> TensorChain<S> {
        let mut out = TensorChain::zero();
        for (word, coeff) in &chain.terms {
            let mut prefix_deg = 0i64;
            for (i, &l) in word.iter().enumerate() {
                if !self.images[l].is_zero() {
                    let sign = if (self.degree * prefix_deg) % 2 == 0 {
                        S::one()
                    } else {
                        S::zero() - S::one()
                    };
                    for (img_word, img_c) in &self.images[l].terms {
                        let mut w = word[..i].to_vec();
                        w.extend_from_slice(img_word);
                        w.extend_from_slice(&word[i + 1..]);
                        out.add_word(&w, coeff.clone() * sign.clone() * img_c.clone());
                    }
                }
                prefix_deg += degs[l];
            }
        }
        out
    }

    /// Graded commutator of derivations.
    pub fn commutator(&self, other: &Derivation<S>, degs: &[i64]) -> Derivation<S> {
        let sign = if (self.degree * other.degree) % 2 == 0 {
            S::one()
        } else {
            S::zero() - S::one()
        };
        let images = (0..self.images.len())
            .map(|q| {
                let mut a = self.apply(&other.images[q], degs);
                let b = other.apply(&self.images[q], degs);
                a.add_chain(&b.scale(&(S::zero() - sign.clone())));
                a
            })
            .collect();
        Derivation { images, degree: self.degree + other.degree }
    }
}

// ---------------------------------------------------------------------------
// pairing, θ, bracket, Δ

/// ⟨p ∩ 𝓗 ∩ q⟩ on the letters of an alphabet.
pub fn alphabet_pairing<S: Scalar>(alg: &PDAlgebra<S>, alphabet: &Alphabet) -> Mat<S> {
    let k = alphabet.len();
    let mut m = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] =
                alg.symplectic_pairing(alphabet.algebra_index[i], alphabet.algebra_index[j]);
        }
    }
    m
}

/// θ_{F⊗𝓗}: the derivation q ↦ Σ_p ∂_p F · ⟨p ∩ 𝓗 ∩ q⟩.
pub fn theta<S: Scalar>(
    chain: &CyclicChain<S>,
    alg: &PDAlgebra<S>,
    alphabet: &Alphabet,
) -> Derivation<S> {
    assert!(chain.h_factor, "θ needs the fundamental-class factor");
    let pairing = alphabet_pairing(alg, alphabet);
    let degree = chain.degree(&alphabet.degs).unwrap_or(0) + 2 * alg.n as i64 - 2;
    let mut images = vec![TensorChain::zero(); alphabet.len()];
    for p in 0..alphabet.len() {
        let dp = ncpd(chain, p, DerivativeSide::Right, &alphabet.degs);
        if dp.is_zero() {
            continue;
        }
        for q in 0..alphabet.len() {
            let c = pairing[(p, q)].clone();
            if !c.is_zero() {
                images[q].add_chain(&dp.scale(&c));
            }
        }
    }
    Derivation { images, degree }
}

/// {F⊗𝓗, G⊗𝓗} = Σ_{p,q} (∂_p F ⊗ ⟨p∩𝓗∩q⟩ ⊗ ∂_q⁻ G)_𝒞 ⊗ 𝓗.
pub fn bracket<S: Scalar>(
    f: &CyclicChain<S>,
    g: &CyclicChain<S>,
    alg: &PDAlgebra<S>,
    alphabet: &Alphabet,
) -> CyclicChain<S> {
    assert!(f.h_factor && g.h_factor);
    let pairing = alphabet_pairing(alg, alphabet);
    let degs = &alphabet.degs;
    let mut out = CyclicChain::zero(true);
    for p in 0..alphabet.len() {
        let dp = ncpd(f, p, DerivativeSide::Right, degs);
        if dp.is_zero() {
            continue;
        }
        for q in 0..alphabet.len() {
            let c = pairing[(p, q)].clone();
            if c.is_zero() {
                continue;
            }
            let dq = ncpd(g, q, DerivativeSide::Left, degs);
            if dq.is_zero() {
                continue;
            }
            let prod = dp.concat(&dq);
            for (w, wc) in &prod.terms {
                out.add_word(w, wc.clone() * c.clone(), degs);
            }
        }
    }
    out
}

/// The canonical element Δ: the cyclic chain dual to the triple product,
/// (1/3) Σ over ordered reduced triples of (−1)^{deg α_b}·tr(α_a α_b α_c)
/// times the homology word (h̄_a ⊗ h̄_b ⊗ h̄_c)_𝒞.
pub fn canonical_delta<S: Scalar>(alg: &PDAlgebra<S>, alphabet: &Alphabet) -> CyclicChain<S> {
    assert_eq!(alphabet.side, Side::Homology);
    let degs = &alphabet.degs;
    let mut out = CyclicChain::zero(true);
    let third = S::from_ratio(1, 3);
    for a in 0..alphabet.len() {
        let ia = alphabet.algebra_index[a];
        for b in 0..alphabet.len() {
            let ib = alphabet.algebra_index[b];
            if alg.basis[ib].deg() >= 2 * alg.n {
                continue;
            }
            for c in 0..alphabet.len() {
                let ic = alphabet.algebra_index[c];
                let t = alg.triple_trace(ia, ib, ic);
                if t.is_zero() {
                    continue;
                }
                let sign = if alg.basis[ib].deg() % 2 == 0 {
                    S::one()
                } else {
                    S::zero() - S::one()
                };
                out.add_word(&[a, b, c], third.clone() * sign * t, degs);
            }
        }
    }
    out
}

/// The special element S = δ(top generator) ∈ Lie², dual to the cup product
/// into the top degree: Σ_{a,b reduced} (−1)^{deg α_b} tr(α_a α_b) h̄_a ⊗ h̄_b.
/// The sign matches the Koszul bookkeeping of θ_Δ, so the H̃ differential is
/// one uniform formula across all generators.
pub fn special_element<S: Scalar>(alg: &PDAlgebra<S>, alphabet: &Alphabet) -> TensorChain<S> {
    let mut out = TensorChain::zero();
    for a in 0..alphabet.len() {
        let ia = alphabet.algebra_index[a];
        if alg.basis[ia].deg() >= 2 * alg.n {
            continue;
        }
        for b in 0..alphabet.len() {
            let ib = alphabet.algebra_index[b];
            if alg.basis[ib].deg() >= 2 * alg.n {
                continue;
            }
            let t = alg.trace_of(&alg.mul_sparse(&[(ia, S::one())], &[(ib, S::one())]));
            if !t.is_zero() {
                let sign = if alg.basis[ib].deg() % 2 == 0 {
                    S::one()
                } else {
                    S::zero() - S::one()
                };
                out.add_word(&[a, b], sign * t);
            }
        }
    }
    out
}

/// The differential of the free Lie algebra: on reduced generators this is
/// θ_Δ (the dual of the cup product); on the H̃ variant the top-class
/// generator additionally maps to the special element S.
pub fn lie_differential<S: Scalar>(alg: &PDAlgebra<S>, alphabet: &Alphabet) -> Derivation<S> {
    let delta = canonical_delta(alg, alphabet);
    let mut d = theta(&delta, alg, alphabet);
    d.degree = 1;
    for (l, &i) in alphabet.algebra_index.iter().enumerate() {
        if alg.basis[i].deg() == 2 * alg.n {
            d.images[l] = special_element(alg, alphabet);
        }
    }
    d
}

/// δ(F) = {Δ, F}: the coderivation extension of the Lie differential to
/// cyclic chains. On the strictly reduced alphabet this equals the bracket
/// with the canonical element Δ.
pub fn delta_op<S: Scalar>(
    f: &CyclicChain<S>,
    alg: &PDAlgebra<S>,
    alphabet: &Alphabet,
) -> CyclicChain<S> {
    let d = lie_differential(alg, alphabet);
    coderivation_apply(&d, f, &alphabet.degs)
}

/// Extends a generator differential to cyclic chains: replace the leading
/// letter of every signed rotation by its image.
pub fn coderivation_apply<S: Scalar>(
    d: &Derivation<S>,
    f: &CyclicChain<S>,
    degs: &[i64],
) -> CyclicChain<S> {
    let mut out = CyclicChain::zero(f.h_factor);
    for (word, coeff) in &f.terms {
        for (rot, rsign) in rotations(word, degs) {
            let head = rot[0];
            if d.images[head].is_zero() {
                continue;
            }
            for (img, ic) in &d.images[head].terms {
                let mut w = img.clone();
                w.extend_from_slice(&rot[1..]);
                out.add_word(&w, coeff.clone() * S::from_i64(rsign) * ic.clone(), degs);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// graded slices of 𝒞Lie, Der^S and homology

/// All canonical nonzero cyclic words of a given length over the alphabet.
pub fn cyclic_word_basis(alphabet: &Alphabet, weight: usize) -> Vec<Vec<usize>> {
    let mut seen = std::collections::BTreeSet::new();
    let k = alphabet.len();
    let mut word = vec![0usize; weight];
    loop {
        if let Some((canon, _)) = canonical_form(&word, &alphabet.degs) {
            seen.insert(canon);
        }
        let mut i = weight;
        while i > 0 && word[i - 1] == k - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        word[i - 1] += 1;
        for j in i..weight {
            word[j] = 0;
        }
    }
    seen.into_iter().collect()
}

/// Basis of the weight-w slice of 𝒞Lie⊗𝓗: the projection of Lie_{w−1}⊗ℍ to
/// the cyclic envelope, extracted by exact rank computation. Weight 1 is
/// empty by this description.
pub fn clie_basis<S: Scalar>(alphabet: &Alphabet, weight: usize) -> Vec<CyclicChain<S>> {
    if weight < 2 {
        return Vec::new();
    }
    let degs = &alphabet.degs;
    let lie = LieSlice::<S>::new(alphabet, weight - 1);
    let words = cyclic_word_basis(alphabet, weight);
    let index: BTreeMap<Vec<usize>, usize> =
        words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let mut candidates: Vec<CyclicChain<S>> = Vec::new();
    for expansion in &lie.expansions {
        for letter in 0..alphabet.len() {
            let ext = expansion.concat(&TensorChain::from_word(&[letter], S::one()));
            let chain = ext.cyclic_projection(degs, true);
            if !chain.is_zero() {
                candidates.push(chain);
            }
        }
    }
    // exact rank filtering
    let mut span = crate::linalg::IncrementalSpan::new(index.len());
    let mut basis = Vec::new();
    for cand in candidates {
        let mut v = vec![S::zero(); index.len()];
        for (w, c) in &cand.terms {
            v[index[w]] = c.clone();
        }
        if span.insert(&v) {
            basis.push(cand);
        }
    }
    basis
}

/// A (degree, weight) slice of derivations with images in the free Lie
/// algebra; weight w means images of word length w−1.
pub struct DerSlice<S> {
    pub weight: usize,
    pub degree: i64,
    /// generators of the slice: (letter q, Lie key index) pairs
    pub basis: Vec<(usize, usize)>,
    pub lie: LieSlice<S>,
}

impl<S: Scalar> DerSlice<S> {
    pub fn new(alphabet: &Alphabet, degree: i64, weight: usize) -> Self {
        assert!(weight >= 2);
        let lie = LieSlice::<S>::new(alphabet, weight - 1);
        let mut basis = Vec::new();
        for q in 0..alphabet.len() {
            for (ki, key) in lie.keys.iter().enumerate() {
                let target = alphabet.degs[q] + degree;
                let d: i64 = {
                    let mut deg = word_deg(&key.word, &alphabet.degs);
                    if key.squared {
                        deg *= 2;
                    }
                    deg
                };
                if d == target {
                    basis.push((q, ki));
                }
            }
        }
        DerSlice { weight, degree, basis, lie }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn derivation(&self, coords: &[S], alphabet: &Alphabet) -> Derivation<S> {
        let mut der = Derivation::zero(alphabet.len(), self.degree);
        for ((q, ki), c) in self.basis.iter().zip(coords) {
            if !c.is_zero() {
                der.images[*q].add_chain(&self.lie.expansions[*ki].scale(c));
            }
        }
        der
    }

    /// Coordinates of a derivation whose images lie in this slice.
    pub fn coords(&self, der: &Derivation<S>) -> Option<Vec<S>> {
        let mut out = vec![S::zero(); self.basis.len()];
        for (q, img) in der.images.iter().enumerate() {
            if img.is_zero() {
                continue;
            }
            let lie_coords = self.lie.from_tensor(img)?;
            for (ki, c) in lie_coords.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let pos = self.basis.iter().position(|&(qq, kk)| qq == q && kk == ki)?;
                out[pos] = c.clone();
            }
        }
        Some(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LieVariant {
    Reduced,
    Tilde,
}

// ---------------------------------------------------------------------------
// homology of the two complexes

fn chains_to_rows<S: Scalar>(
    chains: &[CyclicChain<S>],
    index: &mut BTreeMap<Vec<usize>, usize>,
) -> Vec<Vec<(usize, S)>> {
    let mut rows = Vec::new();
    for c in chains {
        let mut row = Vec::new();
        for (w, v) in &c.terms {
            let next = index.len();
            let i = *index.entry(w.clone()).or_insert(next);
            row.push((i, v.clone()));
        }
        rows.push(row);
    }
    rows
}

fn sparse_to_mat<S: Scalar>(rows: &[Vec<(usize, S)>], cols: usize) -> Mat<S> {
    let mut m = Mat::zeros(rows.len().max(1), cols.max(1));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row {
            m[(i, *j)] = v.clone();
        }
    }
    m
}

/// H₀ of (𝒞Lie⊗𝓗, δ = {Δ,·}) at a given weight: elements of degree 0 and
/// weight w modulo boundaries from degree −1, weight w−1. Returns
/// (dim ker, dim im, dim H₀) together with cycle representatives.
pub fn h0_clie<S: Scalar>(
    alg: &PDAlgebra<S>,
    alphabet: &Alphabet,
    weight: usize,
) -> (usize, usize, usize, Vec<CyclicChain<S>>) {
    let degs = &alphabet.degs;
    let at_deg = |w: usize, d: i64| -> Vec<CyclicChain<S>> {
        if w < 2 {
            return Vec::new();
        }
        clie_basis::<S>(alphabet, w)
            .into_iter()
            .filter(|c| c.degree(degs) == Some(d))
            .collect()
    };
    let b0 = at_deg(weight, 0);
    if b0.is_empty() {
        return (0, 0, 0, Vec::new());
    }
    let b_minus = if weight >= 3 { at_deg(weight - 1, -1) } else { Vec::new() };

    // kernel of δ on the degree-0 slice
    let images_out: Vec<CyclicChain<S>> =
        b0.iter().map(|c| delta_op(c, alg, alphabet)).collect();
    let mut out_index = BTreeMap::new();
    let out_rows = chains_to_rows(&images_out, &mut out_index);
    let out_mat = sparse_to_mat(&out_rows, out_index.len()).transpose();
    let kernel_coords = out_mat.kernel_basis();
    let dim_ker = kernel_coords.len();

    // image of δ from the (−1, w−1) slice, inside the degree-0 slice
    let images_in: Vec<CyclicChain<S>> =
        b_minus.iter().map(|c| delta_op(c, alg, alphabet)).collect();
    let mut in_index = BTreeMap::new();
    let in_rows = chains_to_rows(&images_in, &mut in_index);
    let dim_im = if in_rows.is_empty() {
        0
    } else {
        sparse_to_mat(&in_rows, in_index.len()).rank()
    };

    // representatives: kernel vectors modulo the image, by incremental spans
    let kernel_chains: Vec<CyclicChain<S>> = kernel_coords
        .iter()
        .map(|coords| {
            let mut chain = CyclicChain::zero(true);
            for (c, b) in coords.iter().zip(&b0) {
                if !c.is_zero() {
                    chain.add_chain(&b.scale(c));
                }
            }
            chain
        })
        .collect();
    let mut span_index = in_index;
    for c in &kernel_chains {
        let _ = chains_to_rows(std::slice::from_ref(c), &mut span_index);
    }
    let to_vec = |c: &CyclicChain<S>, idx: &BTreeMap<Vec<usize>, usize>| -> Vec<S> {
        let mut v = vec![S::zero(); idx.len()];
        for (w, coeff) in &c.terms {
            v[idx[w]] = coeff.clone();
        }
        v
    };
    let mut span = crate::linalg::IncrementalSpan::new(span_index.len());
    for img in &images_in {
        span.insert(&to_vec(img, &span_index));
    }
    let mut reps = Vec::new();
    for c in kernel_chains {
        if span.insert(&to_vec(&c, &span_index)) {
            reps.push(c);
        }
    }
    (dim_ker, dim_im, dim_ker - dim_im, reps)
}

/// H₀ of (Der^S, D = [δ, ·]) at a given weight (degree-0 special derivations
/// commuting with δ, modulo [δ, ·]-exact ones). Returns (ker, im, h0).
pub fn h0_der_special<S: Scalar>(
    alg: &PDAlgebra<S>,
    variant: LieVariant,
    weight: usize,
) -> (usize, usize, usize) {
    let (alphabet, slice0, ker0) = special_derivations::<S>(alg, variant, 0, weight);
    let lie_d = lie_differential(alg, &alphabet);
    let degs = &alphabet.degs;
    // δ acting on a derivation
    let d_of = |der: &Derivation<S>| -> Derivation<S> { lie_d.commutator(der, degs) };

    // matrix of D on the degree-0 Der^S slice, in tensor coordinates of images
    let mut out_index: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
    let mut out_rows: Vec<Vec<(usize, S)>> = Vec::new();
    for coords in &ker0 {
        let der = slice0.derivation(coords, &alphabet);
        let dd = d_of(&der);
        let mut row = Vec::new();
        for (q, img) in dd.images.iter().enumerate() {
            for (w, c) in &img.terms {
                let next = out_index.len();
                let i = *out_index.entry((q, w.clone())).or_insert(next);
                row.push((i, c.clone()));
            }
        }
        out_rows.push(row);
    }
    if ker0.is_empty() {
        return (0, 0, 0);
    }
    let dim_ker = sparse_to_mat(&out_rows, out_index.len()).transpose().kernel_basis().len();

    // image from the degree −1, weight −1 slice
    let dim_im = if weight >= 3 {
        let (_, slice_m, ker_m) = special_derivations::<S>(alg, variant, -1, weight - 1);
        let mut idx: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut rows: Vec<Vec<(usize, S)>> = Vec::new();
        for coords in &ker_m {
            let der = slice_m.derivation(coords, &alphabet);
            let dd = d_of(&der);
            let mut row = Vec::new();
            for (q, img) in dd.images.iter().enumerate() {
                for (w, c) in &img.terms {
                    let next = idx.len();
                    let i = *idx.entry((q, w.clone())).or_insert(next);
                    row.push((i, c.clone()));
                }
            }
            rows.push(row);
        }
        sparse_to_mat(&rows, idx.len()).rank()
    } else {
        0
    };
    (dim_ker, dim_im, dim_ker - dim_im)
}

/// Exact basis of the special derivations in a (degree, weight) slice:
/// the kernel of D ↦ D(S), with D(top generator) = 0 too in the H̃ variant
/// (realized by restricting to derivations supported away from the top
/// letter, since the Lyndon expansions are independent).
pub fn special_derivations<S: Scalar>(
    alg: &PDAlgebra<S>,
    variant: LieVariant,
    degree: i64,
    weight: usize,
) -> (Alphabet, DerSlice<S>, Vec<Vec<S>>) {
    let alphabet = match variant {
        LieVariant::Reduced => Alphabet::reduced(alg, Side::Homology),
        LieVariant::Tilde => Alphabet::tilde(alg, Side::Homology),
    };
    let mut slice = DerSlice::<S>::new(&alphabet, degree, weight);
    if variant == LieVariant::Tilde {
        let top_letter = alphabet
            .algebra_index
            .iter()
            .position(|&i| alg.basis[i].deg() == 2 * alg.n)
            .expect("H̃ alphabet has the top class");
        slice.basis.retain(|&(q, _)| q != top_letter);
    }
    let s_el = special_element(alg, &alphabet);
    // one column per basis derivation: coordinates of D(S) in tensor words
    let mut word_index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut columns: Vec<Vec<(usize, S)>> = Vec::new();
    for (q, ki) in &slice.basis {
        let mut der = Derivation::zero(alphabet.len(), slice.degree);
        der.images[*q] = slice.lie.expansions[*ki].clone();
        let ds = der.apply(&s_el, &alphabet.degs);
        let mut col = Vec::new();
        for (w, c) in &ds.terms {
            let next = word_index.len();
            let i = *word_index.entry(w.clone()).or_insert(next);
            col.push((i, c.clone()));
        }
        columns.push(col);
    }
    let rows = word_index.len().max(1);
    let mut m = Mat::zeros(rows, columns.len());
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col {
            m[(*i, j)] = v.clone();
        }
    }
    let kernel = m.kernel_basis();
    (alphabet, slice, kernel)
}
