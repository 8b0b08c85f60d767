//! Indexed tensors with vertical-pair structure.
//!
//! A vertical pair couples one Greek slot (range 1..=p) with one Latin slot
//! (range p+1..=p+q); pair operations permute both members in lockstep.
//! Symmetrization and alternation divide by the number of permutations, so
//! they are projectors.
//!
//! Index conventions: Greek indices run 1..=p and Latin indices run
//! p+1..=p+q in all public interfaces; storage is zero-based internally.

use crate::error::TensorError;
use crate::expr::ScalarExpr;
use num::BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Greek,
    Latin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub upper: bool,
    pub kind: IndexKind,
}

impl Slot {
    pub const fn up(kind: IndexKind) -> Slot {
        Slot { upper: true, kind }
    }
    pub const fn low(kind: IndexKind) -> Slot {
        Slot { upper: false, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VPTensor {
    pub p: usize,
    pub q: usize,
    pub slots: Vec<Slot>,
    data: Vec<ScalarExpr>,
}

fn permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    // all permutations of 0..n with parity
    let mut out = vec![(vec![], 1)];
    for k in 0..n {
        let mut next = Vec::new();
        for (perm, sign) in out {
            for pos in 0..=perm.len() {
                let mut p2 = perm.clone();
                p2.insert(pos, k);
                let swaps = (perm.len() - pos) as i32;
                let s2 = if swaps % 2 == 0 { sign } else { -sign };
                next.push((p2, s2));
            }
        }
        out = next;
    }
    out
}

impl VPTensor {
    pub fn radix(&self, slot: usize) -> usize {
        match self.slots[slot].kind {
            IndexKind::Greek => self.p,
            IndexKind::Latin => self.q,
        }
    }

    pub fn len(&self) -> usize {
        (0..self.slots.len()).map(|s| self.radix(s)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn zeros(p: usize, q: usize, slots: Vec<Slot>) -> VPTensor {
        let mut t = VPTensor {
            p,
            q,
            slots,
            data: Vec::new(),
        };
        t.data = vec![ScalarExpr::zero(); t.len()];
        t
    }

    pub fn from_fn(
        p: usize,
        q: usize,
        slots: Vec<Slot>,
        f: &mut dyn FnMut(&[usize]) -> ScalarExpr,
    ) -> VPTensor {
        let mut t = VPTensor::zeros(p, q, slots);
        let mut idx = vec![0usize; t.slots.len()];
        loop {
            let off = t.offset(&idx);
            t.data[off] = f(&idx);
            if !t.advance(&mut idx) {
                break;
            }
        }
        t
    }

    fn advance(&self, idx: &mut [usize]) -> bool {
        for s in (0..idx.len()).rev() {
            idx[s] += 1;
            if idx[s] < self.radix(s) {
                return true;
            }
            idx[s] = 0;
        }
        false
    }

    fn offset(&self, idx: &[usize]) -> usize {
        let mut off = 0;
        for (s, &i) in idx.iter().enumerate() {
            off = off * self.radix(s) + i;
        }
        off
    }

    /// Zero-based component access.
    pub fn get(&self, idx: &[usize]) -> &ScalarExpr {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: ScalarExpr) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    /// Paper-numbered access: Greek slots take 1..=p, Latin take p+1..=p+q.
    pub fn at(&self, paper_idx: &[usize]) -> &ScalarExpr {
        let idx = self.to_zero_based(paper_idx);
        self.get(&idx)
    }

    pub fn to_zero_based(&self, paper_idx: &[usize]) -> Vec<usize> {
        paper_idx
            .iter()
            .enumerate()
            .map(|(s, &i)| match self.slots[s].kind {
                IndexKind::Greek => i - 1,
                IndexKind::Latin => i - self.p - 1,
            })
            .collect()
    }

    pub fn for_each(&self, f: &mut dyn FnMut(&[usize], &ScalarExpr)) {
        let mut idx = vec![0usize; self.slots.len()];
        if self.data.is_empty() {
            return;
        }
        loop {
            f(&idx, self.get(&idx));
            if !self.advance(&mut idx) {
                break;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &VPTensor) -> VPTensor {
        assert_eq!(self.slots, other.slots);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = a.add(b);
        }
        out
    }

    pub fn sub(&self, other: &VPTensor) -> VPTensor {
        assert_eq!(self.slots, other.slots);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = a.sub(b);
        }
        out
    }

    fn check_same_radix(&self, slots: &[usize]) -> Result<(), TensorError> {
        if slots.is_empty() {
            return Err(TensorError::RangeMismatch("empty slot selection".into()));
        }
        let r = self.radix(slots[0]);
        if slots.iter().any(|&s| self.radix(s) != r) {
            return Err(TensorError::RangeMismatch(format!(
                "slots {slots:?} mix index ranges"
            )));
        }
        Ok(())
    }

    fn permute_group(&self, slots: &[usize], signed: bool) -> VPTensor {
        let perms = permutations(slots.len());
        let norm = BigRational::new(1.into(), (perms.len() as i64).into());
        let mut out = VPTensor::zeros(self.p, self.q, self.slots.clone());
        let mut idx = vec![0usize; self.slots.len()];
        loop {
            let mut acc = ScalarExpr::zero();
            for (perm, sign) in &perms {
                let mut src = idx.clone();
                for (k, &slot) in slots.iter().enumerate() {
                    src[slot] = idx[slots[perm[k]]];
                }
                let v = self.get(&src);
                acc = if signed && *sign < 0 {
                    acc.sub(v)
                } else {
                    acc.add(v)
                };
            }
            out.set(&idx, acc.scale(&norm));
            if !advance_helper(self, &mut idx) {
                break;
            }
        }
        out
    }

    /// Symmetrize over a group of same-range slots (projector normalization).
    pub fn symmetrize(&self, slots: &[usize]) -> Result<VPTensor, TensorError> {
        self.check_same_radix(slots)?;
        Ok(self.permute_group(slots, false))
    }

    /// Alternate over a group of same-range slots.
    pub fn alternate(&self, slots: &[usize]) -> Result<VPTensor, TensorError> {
        self.check_same_radix(slots)?;
        Ok(self.permute_group(slots, true))
    }

    fn permute_pairs(&self, pairs: &[(usize, usize)], signed: bool) -> Result<VPTensor, TensorError> {
        for &(g, l) in pairs {
            if self.slots[g].kind != IndexKind::Greek || self.slots[l].kind != IndexKind::Latin {
                return Err(TensorError::RangeMismatch(format!(
                    "vertical pair ({g},{l}) must couple a Greek and a Latin slot"
                )));
            }
        }
        let perms = permutations(pairs.len());
        let norm = BigRational::new(1.into(), (perms.len() as i64).into());
        let mut out = VPTensor::zeros(self.p, self.q, self.slots.clone());
        let mut idx = vec![0usize; self.slots.len()];
        loop {
            let mut acc = ScalarExpr::zero();
            for (perm, sign) in &perms {
                let mut src = idx.clone();
                for (k, &(g, l)) in pairs.iter().enumerate() {
                    let (g2, l2) = pairs[perm[k]];
                    src[g] = idx[g2];
                    src[l] = idx[l2];
                }
                let v = self.get(&src);
                acc = if signed && *sign < 0 {
                    acc.sub(v)
                } else {
                    acc.add(v)
                };
            }
            out.set(&idx, acc.scale(&norm));
            if !advance_helper(self, &mut idx) {
                break;
            }
        }
        Ok(out)
    }

    /// Symmetrize over vertical pairs, moving Greek and Latin in lockstep.
    pub fn vp_symmetrize(&self, pairs: &[(usize, usize)]) -> Result<VPTensor, TensorError> {
        self.permute_pairs(pairs, false)
    }

    /// Alternate over vertical pairs.
    pub fn vp_alternate(&self, pairs: &[(usize, usize)]) -> Result<VPTensor, TensorError> {
        self.permute_pairs(pairs, true)
    }
}

fn advance_helper(t: &VPTensor, idx: &mut [usize]) -> bool {
    for s in (0..idx.len()).rev() {
        idx[s] += 1;
        if idx[s] < t.radix(s) {
            return true;
        }
        idx[s] = 0;
    }
    false
}

// ---------------------------------------------------------------------------
// Torsion tensor: a^{i beta gamma}_{alpha j k}
// slot order: 0 = i (up Latin), 1 = beta (up Greek), 2 = gamma (up Greek),
//             3 = alpha (low Greek), 4 = j (low Latin), 5 = k (low Latin)
// Vertical pairs: (1,4) and (2,5).
// ---------------------------------------------------------------------------

pub const TORSION_SLOTS: [Slot; 6] = [
    Slot::up(IndexKind::Latin),
    Slot::up(IndexKind::Greek),
    Slot::up(IndexKind::Greek),
    Slot::low(IndexKind::Greek),
    Slot::low(IndexKind::Latin),
    Slot::low(IndexKind::Latin),
];

#[derive(Debug, Clone)]
pub struct TorsionDecomposition {
    pub a_alpha: VPTensor,
    pub a_beta: VPTensor,
}

/// Check the defining symmetries of a torsion tensor: pair skew and the two
/// trace conditions. Returns the offending component description on failure.
pub fn check_torsion_symmetries(a: &VPTensor) -> Result<(), TensorError> {
    assert_eq!(a.slots, TORSION_SLOTS);
    // pair skew: a^{i beta gamma}_{alpha j k} = -a^{i gamma beta}_{alpha k j}
    let swapped = a.vp_alternate(&[(1, 4), (2, 5)]).unwrap();
    let mut bad: Option<String> = None;
    a.for_each(&mut |idx, v| {
        if bad.is_none() && !swapped.get(idx).sub(v).is_zero() {
            bad = Some(format!("pair-skew fails at {idx:?}"));
        }
    });
    if let Some(msg) = bad {
        return Err(TensorError::SymmetryViolation(msg));
    }
    // traces: sum_alpha a^{i alpha gamma}_{alpha j k} = 0 and
    //         sum_i a^{i beta gamma}_{alpha i k} = 0
    for i in 0..a.q {
        for g in 0..a.p {
            for j in 0..a.q {
                for k in 0..a.q {
                    let mut tr = ScalarExpr::zero();
                    for al in 0..a.p {
                        tr = tr.add(a.get(&[i, al, g, al, j, k]));
                    }
                    if !tr.is_zero() {
                        return Err(TensorError::SymmetryViolation(format!(
                            "Greek trace fails at i={i} gamma={g} j={j} k={k}"
                        )));
                    }
                }
            }
        }
    }
    for b in 0..a.p {
        for g in 0..a.p {
            for al in 0..a.p {
                for k in 0..a.q {
                    let mut tr = ScalarExpr::zero();
                    for i in 0..a.q {
                        tr = tr.add(a.get(&[i, b, g, al, i, k]));
                    }
                    if !tr.is_zero() {
                        return Err(TensorError::SymmetryViolation(format!(
                            "Latin trace fails at beta={b} gamma={g} alpha={al} k={k}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Split a torsion tensor into its two subtensors: the lower-Latin-symmetric
/// part and the lower-Latin-alternating part. The parts sum back to the
/// input and are trace-free whenever the input is.
pub fn decompose_torsion(a: &VPTensor) -> Result<TorsionDecomposition, TensorError> {
    check_torsion_symmetries(a)?;
    let a_alpha = a.symmetrize(&[4, 5])?;
    let a_beta = a.alternate(&[4, 5])?;
    Ok(TorsionDecomposition { a_alpha, a_beta })
}

/// The implication check used as a property test: for a tensor with three
/// vertical pairs whose triple vertical-pair alternation vanishes, the
/// mixed projection (alternate the upper triple, symmetrize the lower
/// triple) vanishes as well.
pub fn check_lemma_triple_implication(t: &VPTensor) -> Result<bool, TensorError> {
    // slots: 0,1,2 upper Greek; 3,4,5 lower Latin; pairs (0,3),(1,4),(2,5)
    let mixed = t.alternate(&[0, 1, 2])?.symmetrize(&[3, 4, 5])?;
    Ok(mixed.is_zero())
}

// ---------------------------------------------------------------------------
// Curvature component checks for p = q = 2.
// ---------------------------------------------------------------------------

/// A curvature component reference `b_{jkl}^{i gd}` by paper indices; the
/// first lower index selects the family (Greek -> second curvature block,
/// Latin -> first).
pub type BIndex = ([usize; 3], [usize; 3]);

pub fn b_label(lower: [usize; 3], upper: [usize; 3]) -> String {
    format!(
        "b[{};{},{}]^[{};{},{}]",
        lower[0], lower[1], lower[2], upper[0], upper[1], upper[2]
    )
}

/// One printed linear relation among curvature components:
/// sum of coeff * component == 0.
pub struct BRelation {
    pub name: &'static str,
    pub terms: Vec<(i64, BIndex)>,
}

fn rel(name: &'static str, terms: Vec<(i64, BIndex)>) -> BRelation {
    BRelation { name, terms }
}

fn c(lower: [usize; 3], upper: [usize; 3]) -> BIndex {
    (lower, upper)
}

/// The independent relations of the four-dimensional case in their printed
/// grouping: the trace/cyclic consequences (first batch) and the closure
/// consequences (second batch). Evaluated as checks; the solver derives its
/// constraints from the general identities instead.
pub fn relations_3_10_to_3_12() -> Vec<BRelation> {
    let mut rels = Vec::new();
    // Eight vanishing components.
    for (nm, lo, up) in [
        ("(3.10) b[2;3,3]^[1;2,1] = 0", [2, 3, 3], [1, 2, 1]),
        ("(3.10) b[3;3,4]^[4;1,1] = 0", [3, 3, 4], [4, 1, 1]),
        ("(3.10) b[1;3,3]^[2;1,2] = 0", [1, 3, 3], [2, 1, 2]),
        ("(3.10) b[3;3,4]^[4;2,2] = 0", [3, 3, 4], [4, 2, 2]),
        ("(3.10) b[2;4,4]^[1;2,1] = 0", [2, 4, 4], [1, 2, 1]),
        ("(3.10) b[4;4,3]^[3;1,1] = 0", [4, 4, 3], [3, 1, 1]),
        ("(3.10) b[1;4,4]^[2;1,2] = 0", [1, 4, 4], [2, 1, 2]),
        ("(3.10) b[4;4,3]^[3;2,2] = 0", [4, 4, 3], [3, 2, 2]),
    ] {
        rels.push(rel(nm, vec![(1, c(lo, up))]));
    }
    // Four vanishing components and four equality chains.
    for (nm, lo, up) in [
        ("(3.11) b[1;3,3]^[1;1,2] = 0", [1, 3, 3], [1, 1, 2]),
        ("(3.11) b[1;4,4]^[1;1,2] = 0", [1, 4, 4], [1, 1, 2]),
        ("(3.11) b[4;4,3]^[4;1,1] = 0", [4, 4, 3], [4, 1, 1]),
        ("(3.11) b[3;3,4]^[3;2,2] = 0", [3, 3, 4], [3, 2, 2]),
    ] {
        rels.push(rel(nm, vec![(1, c(lo, up))]));
    }
    let chains: Vec<(&'static str, Vec<BIndex>)> = vec![
        (
            "(3.11) a1-chain",
            vec![
                c([3, 4, 3], [4, 1, 2]),
                c([4, 3, 3], [4, 1, 2]),
                c([3, 3, 4], [4, 1, 2]),
            ],
        ),
        (
            "(3.11) a3-chain",
            vec![
                c([4, 4, 3], [3, 2, 1]),
                c([3, 4, 4], [3, 2, 1]),
                c([4, 3, 4], [3, 2, 1]),
            ],
        ),
        (
            "(3.11) b1-chain",
            vec![
                c([2, 4, 3], [2, 1, 1]),
                c([2, 4, 3], [1, 2, 2]),
                c([2, 4, 3], [1, 2, 1]),
            ],
        ),
        (
            "(3.11) b3-chain",
            vec![
                c([1, 3, 4], [1, 2, 2]),
                c([1, 3, 4], [2, 2, 1]),
                c([1, 3, 4], [2, 1, 2]),
            ],
        ),
        (
            "(3.12) b2-chain",
            vec![
                c([1, 3, 4], [1, 1, 2]),
                c([1, 3, 4], [2, 1, 1]),
                c([1, 3, 4], [1, 2, 1]),
                c([2, 4, 3], [1, 2, 2]),
            ],
        ),
        (
            "(3.12) a2-chain",
            vec![
                c([4, 3, 3], [3, 2, 1]),
                c([3, 3, 4], [3, 2, 1]),
                c([3, 4, 3], [3, 2, 1]),
                c([3, 4, 4], [4, 1, 2]),
            ],
        ),
    ];
    for (nm, comps) in chains {
        for w in comps.windows(2) {
            rels.push(rel(nm, vec![(1, w[0]), (-1, w[1])]));
        }
    }
    rels
}

/// Evaluate a set of relations against a component accessor; returns the
/// names of violated relations together with the mismatch value description.
pub fn check_relations(
    rels: &[BRelation],
    comp: &dyn Fn(BIndex) -> ScalarExpr,
) -> Vec<(String, ScalarExpr)> {
    let mut out = Vec::new();
    for r in rels {
        let mut acc = ScalarExpr::zero();
        for (k, idx) in &r.terms {
            acc = acc.add(&comp(*idx).scale(&BigRational::from_integer((*k).into())));
        }
        if !acc.is_zero() {
            out.push((r.name.to_string(), acc));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn rand_expr(rng: &mut ChaCha8Rng) -> ScalarExpr {
        ScalarExpr::from_rational(BigRational::new(
            rng.gen_range(-6i64..=6).into(),
            rng.gen_range(1i64..=4).into(),
        ))
    }

    /// Random tensor with two vertical pairs, projected to pair-skew.
    fn random_pair_skew(p: usize, q: usize, rng: &mut ChaCha8Rng) -> VPTensor {
        let slots = vec![
            Slot::up(IndexKind::Greek),
            Slot::up(IndexKind::Greek),
            Slot::low(IndexKind::Latin),
            Slot::low(IndexKind::Latin),
        ];
        let t = VPTensor::from_fn(p, q, slots, &mut |_| rand_expr(rng));
        // skew part under simultaneous pair swap
        t.vp_alternate(&[(0, 2), (1, 3)]).unwrap()
    }

    #[test]
    fn pair_skew_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (p, q) in [(2, 2), (2, 3), (3, 2)] {
            for _ in 0..10 {
                let t = random_pair_skew(p, q, &mut rng);
                // alternation over upper pair equals symmetrization over lower
                let up_alt = t.alternate(&[0, 1]).unwrap();
                let low_sym = t.symmetrize(&[2, 3]).unwrap();
                assert_eq!(up_alt, low_sym);
                let up_sym = t.symmetrize(&[0, 1]).unwrap();
                let low_alt = t.alternate(&[2, 3]).unwrap();
                assert_eq!(up_sym, low_alt);
                // double alternation and double symmetrization vanish
                assert!(up_alt.alternate(&[2, 3]).unwrap().is_zero());
                assert!(up_sym.symmetrize(&[2, 3]).unwrap().is_zero());
                // decompositions
                assert_eq!(up_sym.add(&low_sym), t);
                assert_eq!(up_alt.add(&low_alt), t);
            }
        }
    }

    #[test]
    fn triple_pair_implication() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let slots = vec![
            Slot::up(IndexKind::Greek),
            Slot::up(IndexKind::Greek),
            Slot::up(IndexKind::Greek),
            Slot::low(IndexKind::Latin),
            Slot::low(IndexKind::Latin),
            Slot::low(IndexKind::Latin),
        ];
        for _ in 0..5 {
            let t = VPTensor::from_fn(3, 3, slots.clone(), &mut |_| rand_expr(&mut rng));
            // project onto the kernel of the triple vertical alternation
            let alt3 = t.vp_alternate(&[(0, 3), (1, 4), (2, 5)]).unwrap();
            let proj = t.sub(&alt3);
            assert!(proj
                .vp_alternate(&[(0, 3), (1, 4), (2, 5)])
                .unwrap()
                .is_zero());
            assert!(check_lemma_triple_implication(&proj).unwrap());
        }
    }

    #[test]
    fn zero_tensor_decomposes_to_zero() {
        let a = VPTensor::zeros(2, 2, TORSION_SLOTS.to_vec());
        let d = decompose_torsion(&a).unwrap();
        assert!(d.a_alpha.is_zero());
        assert!(d.a_beta.is_zero());
    }

    #[test]
    fn symmetry_violation_reported() {
        let mut a = VPTensor::zeros(2, 2, TORSION_SLOTS.to_vec());
        a.set(&[0, 0, 1, 0, 0, 1], ScalarExpr::one());
        assert!(matches!(
            decompose_torsion(&a),
            Err(TensorError::SymmetryViolation(_))
        ));
    }

    #[test]
    fn range_mismatch_detected() {
        let a = VPTensor::zeros(2, 3, TORSION_SLOTS.to_vec());
        // slot 0 is Latin (radix 3), slot 1 Greek (radix 2)
        assert!(matches!(
            a.symmetrize(&[0, 1]),
            Err(TensorError::RangeMismatch(_))
        ));
    }
}
